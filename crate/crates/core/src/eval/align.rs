use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::{AlignmentMode, Trajectory};
use crate::geometry::Pose;
use crate::{Error, Result};

/// Matching tolerance for timestamps, seconds.
pub const ASSOCIATION_TOLERANCE: f64 = 0.02;

/// `x ↦ s·R·x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn apply_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn apply_pose(&self, p: &Pose) -> Pose {
        let r = UnitQuaternion::from_matrix(&self.rotation);
        Pose::new(r * p.rotation, self.apply_point(&p.translation))
    }
}

/// Index pairs `(pred, gt)` matched by nearest timestamp.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Association {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_pred: usize,
    pub unmatched_gt: usize,
}

pub fn associate(pred: &Trajectory, gt: &Trajectory, tolerance: f64) -> Association {
    let gts = gt.timestamps();
    let mut taken = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for (i, &t) in pred.timestamps().iter().enumerate() {
        let k = gts.partition_point(|&g| g < t);
        let best = [k.checked_sub(1), (k < gts.len()).then_some(k)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (gts[a] - t).abs().total_cmp(&(gts[b] - t).abs()));
        if let Some(j) = best {
            if (gts[j] - t).abs() <= tolerance && !taken[j] {
                taken[j] = true;
                pairs.push((i, j));
            }
        }
    }
    Association {
        unmatched_pred: pred.len() - pairs.len(),
        unmatched_gt: gt.len() - pairs.len(),
        pairs,
    }
}

/// Closed-form `S` minimizing `Σ ‖q_i − S·p_i‖²` over the translations of
/// index-aligned trajectories.
pub fn umeyama_align(pred: &Trajectory, gt: &Trajectory, mode: AlignmentMode) -> Result<Similarity> {
    if pred.len() != gt.len() {
        return Err(Error::shape(gt.len(), pred.len()));
    }
    let p: Vec<Vector3<f64>> = pred.translations().collect();
    let q: Vec<Vector3<f64>> = gt.translations().collect();
    align_points(&p, &q, mode)
}

pub(crate) fn align_points(p: &[Vector3<f64>], q: &[Vector3<f64>], mode: AlignmentMode) -> Result<Similarity> {
    match mode {
        AlignmentMode::None => Ok(Similarity::identity()),
        AlignmentMode::ScaleOnly => {
            let pp: f64 = p.iter().map(|x| x.norm_squared()).sum();
            if pp == 0.0 {
                return Err(Error::DegenerateAlignment("all predicted positions at the origin".into()));
            }
            let pq: f64 = p.iter().zip(q).map(|(a, b)| a.dot(b)).sum();
            Ok(Similarity { scale: pq / pp, ..Similarity::identity() })
        }
        AlignmentMode::Rigid | AlignmentMode::Similarity => {
            if p.len() < 3 {
                return Err(Error::DegenerateAlignment(format!(
                    "{mode} alignment needs three poses, got {}",
                    p.len()
                )));
            }
            let n = p.len() as f64;
            let mu_p = p.iter().sum::<Vector3<f64>>() / n;
            let mu_q = q.iter().sum::<Vector3<f64>>() / n;
            let mut sigma = Matrix3::zeros();
            let mut var_p = 0.0;
            for (a, b) in p.iter().zip(q) {
                let (da, db) = (a - mu_p, b - mu_q);
                sigma += db * da.transpose();
                var_p += da.norm_squared();
            }
            sigma /= n;
            var_p /= n;
            let svd = sigma.svd(true, true);
            let mut d: Vec<(f64, usize)> = svd.singular_values.iter().copied().zip(0..3).collect();
            d.sort_by(|a, b| b.0.total_cmp(&a.0));
            if !(d[0].0 > 0.0) || d[1].0 <= 1e-12 * d[0].0 {
                return Err(Error::DegenerateAlignment(
                    "cross-covariance has rank below two".into(),
                ));
            }
            let u = svd.u.expect("requested");
            let v_t = svd.v_t.expect("requested");
            let mut s = Matrix3::identity();
            if u.determinant() * v_t.determinant() < 0.0 {
                s[(d[2].1, d[2].1)] = -1.0;
            }
            let rotation = u * s * v_t;
            let scale = if mode == AlignmentMode::Similarity {
                (svd.singular_values.component_mul(&s.diagonal())).sum() / var_p
            } else {
                1.0
            };
            Ok(Similarity { scale, rotation, translation: mu_q - scale * rotation * mu_p })
        }
    }
}
