use nalgebra::{Vector2, Vector3};

use super::camera::{backproject_unchecked, project_unchecked};
use super::{CameraIntrinsics, InverseDepthMap, Pose, MIN_DEPTH};
use crate::{Error, Result};

/// Dense correspondence field storing absolute target coordinates.
///
/// Entries are only meaningful where the mask is set; displacements are
/// `values[i] - grid(i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    values: Vec<Vector2<f64>>,
    valid: Vec<bool>,
}

impl FlowField {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<Vector2<f64>>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let n = width * height;
        if values.len() != n || valid.len() != n {
            return Err(Error::shape(
                format!("{n} flow entries"),
                format!("{} values, {} mask entries", values.len(), valid.len()),
            ));
        }
        let valid = values
            .iter()
            .zip(valid)
            .map(|(v, ok)| ok && v.x.is_finite() && v.y.is_finite())
            .collect();
        Ok(Self {
            width,
            height,
            values,
            valid,
        })
    }

    /// The identity correspondence: every pixel maps to itself.
    pub fn identity(width: usize, height: usize) -> Self {
        let values = (0..width * height)
            .map(|i| Vector2::new((i % width) as f64, (i / width) as f64))
            .collect();
        Self {
            width,
            height,
            values,
            valid: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Vector2<f64>] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, index: usize) -> bool {
        self.valid[index]
    }

    pub fn value(&self, index: usize) -> Vector2<f64> {
        self.values[index]
    }

    pub fn grid_coord(&self, index: usize) -> Vector2<f64> {
        Vector2::new((index % self.width) as f64, (index / self.width) as f64)
    }

    pub fn displacement(&self, index: usize) -> Vector2<f64> {
        self.values[index] - self.grid_coord(index)
    }

    pub fn count_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Mean displacement magnitude over valid entries; `None` when nothing is valid.
    pub fn mean_displacement(&self) -> Option<f64> {
        let (sum, n) = (0..self.len())
            .filter(|&i| self.valid[i])
            .fold((0.0, 0usize), |(s, n), i| (s + self.displacement(i).norm(), n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Scalar reprojection of one pixel: returns the target coordinate and the
/// transformed depth, or `None` when the point ends up behind the camera.
#[inline]
pub fn reproject_pixel(
    k: &CameraIntrinsics,
    g_ij: &Pose,
    pixel: &Vector2<f64>,
    inv_depth: f64,
) -> Option<(Vector2<f64>, Vector3<f64>)> {
    let x = backproject_unchecked(k, pixel, inv_depth);
    let y = g_ij.transform_point(&x);
    (y.z > MIN_DEPTH).then(|| (project_unchecked(k, &y), y))
}

/// Reprojection-induced flow `p_ij = Π(G_ij ∘ Π⁻¹(p_i, d_i))`.
pub fn reproject_flow(k: &CameraIntrinsics, g_ij: &Pose, d_i: &InverseDepthMap) -> Result<FlowField> {
    d_i.check_dims(k.width, k.height)?;
    let n = k.num_pixels();
    let mut values = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    let rot = g_ij.rotation.to_rotation_matrix();
    for idx in 0..n {
        let pixel = Vector2::new((idx % k.width) as f64, (idx / k.width) as f64);
        if !d_i.is_valid(idx) {
            values.push(pixel);
            valid.push(false);
            continue;
        }
        let x = backproject_unchecked(k, &pixel, d_i.value(idx));
        let y = rot * x + g_ij.translation;
        if y.z > MIN_DEPTH {
            let uv = project_unchecked(k, &y);
            valid.push(k.contains(&uv));
            values.push(uv);
        } else {
            values.push(pixel);
            valid.push(false);
        }
    }
    Ok(FlowField {
        width: k.width,
        height: k.height,
        values,
        valid,
    })
}
