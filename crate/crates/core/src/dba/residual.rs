use nalgebra::{Matrix2x3, Matrix2x6, Matrix3x6, Vector2};

use super::{BaState, Edge, EdgeTarget};
use crate::geometry::{hat, MIN_DEPTH};
use crate::{Error, Result};

/// Per-pixel linearization of one edge.
///
/// The Jacobians are those of the reprojected coordinate `Π(G_ij ∘ Π⁻¹(p, d))`
/// with respect to right perturbations of `G_i`, `G_j` and to `d_i(p)`; the
/// residual derivative is their negation. With this convention the
/// Gauss-Newton step solves `(JᵀΣJ) δ = JᵀΣr`.
#[derive(Clone, Debug)]
pub struct EdgeLinearization {
    pub edge: Edge,
    pub residuals: Vec<Vector2<f64>>,
    pub weights: Vec<Vector2<f64>>,
    pub j_pose_i: Vec<Matrix2x6<f64>>,
    pub j_pose_j: Vec<Matrix2x6<f64>>,
    pub j_depth: Vec<Vector2<f64>>,
    /// Pixels whose current reprojection is defined and in bounds.
    pub valid: Vec<bool>,
}

impl EdgeLinearization {
    pub fn weighted_squared_norm(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.weights)
            .zip(&self.valid)
            .filter(|(_, ok)| **ok)
            .map(|((r, w), _)| w.x * r.x * r.x + w.y * r.y * r.y)
            .sum()
    }
}

pub fn edge_residual_jacobian(state: &BaState, edge: Edge, target: &EdgeTarget) -> Result<EdgeLinearization> {
    let k = &state.intrinsics;
    let (i, j) = edge;
    let n = k.num_pixels();
    if i >= state.num_keyframes() || j >= state.num_keyframes() {
        return Err(Error::Config(format!("edge ({i}, {j}) out of range")));
    }
    let flow = target.target_flow();
    if (flow.width(), flow.height()) != (k.width, k.height) {
        return Err(Error::shape(
            format!("{}x{} target", k.width, k.height),
            format!("{}x{}", flow.width(), flow.height()),
        ));
    }

    let g_i = &state.poses[i];
    let g_j = &state.poses[j];
    let g_i_inv = g_i.inverse();
    let g_ij = g_j.compose(&g_i_inv);
    let r_ij = g_ij.rotation.to_rotation_matrix().into_inner();
    let r_j = g_j.rotation_matrix();
    let depth = &state.inv_depths[i];

    let mut lin = EdgeLinearization {
        edge,
        residuals: vec![Vector2::zeros(); n],
        weights: vec![Vector2::zeros(); n],
        j_pose_i: vec![Matrix2x6::zeros(); n],
        j_pose_j: vec![Matrix2x6::zeros(); n],
        j_depth: vec![Vector2::zeros(); n],
        valid: vec![false; n],
    };

    for idx in 0..n {
        if !depth.is_valid(idx) {
            continue;
        }
        let pixel = flow.grid_coord(idx);
        let d = depth.value(idx);
        let x = crate::geometry::camera_ray(k, &pixel) / d;
        let y = r_ij * x + g_ij.translation;
        if y.z <= MIN_DEPTH {
            continue;
        }
        let inv_z = 1.0 / y.z;
        let uv = crate::geometry::project_unchecked(k, &y);
        if !k.contains(&uv) {
            continue;
        }

        let d_proj = Matrix2x3::new(
            k.fx * inv_z,
            0.0,
            -k.fx * y.x * inv_z * inv_z,
            0.0,
            k.fy * inv_z,
            -k.fy * y.y * inv_z * inv_z,
        );
        // world point seen by both cameras
        let w = g_i_inv.transform_point(&x);
        let mut d_y_j = Matrix3x6::zeros();
        d_y_j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-r_j * hat(&w)));
        d_y_j.fixed_view_mut::<3, 3>(0, 3).copy_from(&r_j);
        let jj = d_proj * d_y_j;

        lin.valid[idx] = true;
        lin.residuals[idx] = flow.value(idx) - uv;
        lin.weights[idx] = target.weights().get(idx);
        lin.j_pose_j[idx] = jj;
        lin.j_pose_i[idx] = -jj;
        lin.j_depth[idx] = d_proj * (r_ij * (-x / d));
    }
    Ok(lin)
}
