use nalgebra::{DMatrix, DVector, Vector6};

use super::NormalEquations;
use crate::geometry::Twist;
use crate::{Error, Result};

/// Pose and inverse-depth increments from one Gauss-Newton step.
#[derive(Clone, Debug, PartialEq)]
pub struct Updates {
    pub poses: Vec<Twist>,
    /// Indexed `frame * pixels_per_frame + pixel`.
    pub depths: Vec<f64>,
}

impl Updates {
    pub fn zeros(num_poses: usize, pixels_per_frame: usize) -> Self {
        Self {
            poses: vec![Twist::zero(); num_poses],
            depths: vec![0.0; num_poses * pixels_per_frame],
        }
    }

    /// Largest pose-twist norm or absolute depth increment.
    pub fn max_norm(&self) -> f64 {
        let pose = self.poses.iter().map(Twist::norm).fold(0.0, f64::max);
        self.depths.iter().map(|d| d.abs()).fold(pose, f64::max)
    }
}

/// Solves the system by eliminating the diagonal depth block.
///
/// Depth parameters without a weighted observation (see
/// [`NormalEquations::depth_observed`]) are left unchanged. The first
/// `fixed_poses` poses receive zero update.
pub fn schur_solve(system: &NormalEquations, fixed_poses: usize) -> Result<Updates> {
    let n = system.num_poses;
    let pixels = system.pixels_per_frame;
    let inv_hdd: Vec<f64> = system
        .h_dd
        .iter()
        .zip(system.depth_observed())
        .map(|(h, seen)| if seen { 1.0 / h } else { 0.0 })
        .collect();

    let mut reduced = system.h_pp.clone();
    let mut rhs = system.b_p.clone();

    // blocks grouped by frame so every pair of poses touching a frame is visited once
    let mut by_frame: Vec<Vec<(usize, &Vec<Vector6<f64>>)>> = vec![Vec::new(); n];
    for (&(frame, pose), column) in &system.h_pd {
        by_frame[frame].push((pose, column));
    }
    for (frame, blocks) in by_frame.iter().enumerate() {
        let base = frame * pixels;
        for &(pk, ck) in blocks {
            let mut acc_b = Vector6::zeros();
            for p in 0..pixels {
                acc_b += ck[p] * (inv_hdd[base + p] * system.b_d[base + p]);
            }
            {
                let mut r = rhs.fixed_rows_mut::<6>(6 * pk);
                r -= acc_b;
            }
            for &(pl, cl) in blocks {
                let mut acc = nalgebra::Matrix6::zeros();
                for p in 0..pixels {
                    let s = inv_hdd[base + p];
                    if s != 0.0 {
                        acc += (ck[p] * s) * cl[p].transpose();
                    }
                }
                let mut view = reduced.fixed_view_mut::<6, 6>(6 * pk, 6 * pl);
                view -= acc;
            }
        }
    }

    let fixed = fixed_poses.min(n);
    let free = n - fixed;
    let mut pose_delta = DVector::zeros(6 * n);
    if free > 0 {
        let off = 6 * fixed;
        let s = reduced.view((off, off), (6 * free, 6 * free)).into_owned();
        let r = rhs.rows(off, 6 * free).into_owned();
        let x = cholesky_solve(s, r).map_err(|row| Error::Singular {
            pose: fixed + row / 6,
        })?;
        pose_delta.rows_mut(off, 6 * free).copy_from(&x);
    }

    let mut depths = vec![0.0; n * pixels];
    for (frame, blocks) in by_frame.iter().enumerate() {
        let base = frame * pixels;
        for p in 0..pixels {
            let s = inv_hdd[base + p];
            if s == 0.0 {
                continue;
            }
            let mut rhs_p = system.b_d[base + p];
            for &(pose, column) in blocks {
                rhs_p -= column[p].dot(&pose_delta.fixed_rows::<6>(6 * pose));
            }
            depths[base + p] = s * rhs_p;
        }
    }

    let poses = (0..n)
        .map(|k| Twist::from_vector(&pose_delta.fixed_rows::<6>(6 * k).into_owned()))
        .collect();
    Ok(Updates { poses, depths })
}

/// Dense Cholesky solve; on failure returns the row whose pivot vanished.
fn cholesky_solve(mut a: DMatrix<f64>, mut b: DVector<f64>) -> std::result::Result<DVector<f64>, usize> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let tol = scale * 1e-14;
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        if !(d > tol) || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        a[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[(i, k)] * b[k];
        }
        b[i] = s / a[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[(k, i)] * b[k];
        }
        b[i] = s / a[(i, i)];
    }
    Ok(b)
}
