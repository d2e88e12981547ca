use super::align::{align_points, associate, Similarity, ASSOCIATION_TOLERANCE};
use super::{AlignmentMode, Trajectory};
use crate::geometry::DepthMap;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AteReport {
    pub ate: f64,
    pub matched: usize,
    pub unmatched_pred: usize,
    pub unmatched_gt: usize,
    pub alignment: Similarity,
}

/// RMSE of `trans(Q_i⁻¹·S·P_i)` after timestamp association and alignment.
pub fn ate(pred: &Trajectory, gt: &Trajectory, mode: AlignmentMode) -> Result<f64> {
    ate_report(pred, gt, mode).map(|r| r.ate)
}

pub fn ate_report(pred: &Trajectory, gt: &Trajectory, mode: AlignmentMode) -> Result<AteReport> {
    let assoc = associate(pred, gt, ASSOCIATION_TOLERANCE);
    if assoc.pairs.is_empty() {
        return Err(Error::Association("no timestamps matched within tolerance".into()));
    }
    let p: Vec<_> = assoc.pairs.iter().map(|&(i, _)| pred.poses()[i]).collect();
    let q: Vec<_> = assoc.pairs.iter().map(|&(_, j)| gt.poses()[j]).collect();
    let pt: Vec<_> = p.iter().map(|x| x.translation).collect();
    let qt: Vec<_> = q.iter().map(|x| x.translation).collect();
    let s = align_points(&pt, &qt, mode)?;
    let sq: f64 = p
        .iter()
        .zip(&q)
        .map(|(pi, qi)| qi.inverse().compose(&s.apply_pose(pi)).translation.norm_squared())
        .sum();
    Ok(AteReport {
        ate: (sq / p.len() as f64).sqrt(),
        matched: p.len(),
        unmatched_pred: assoc.unmatched_pred,
        unmatched_gt: assoc.unmatched_gt,
        alignment: s,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub delta_1_25: f64,
    pub count: usize,
}

/// Standard depth errors over pixels valid in both maps with `gt` in `(0, cap]`.
pub fn depth_metrics(pred: &DepthMap, gt: &DepthMap, cap: f64) -> Result<DepthMetrics> {
    gt.check_dims(pred.width(), pred.height())?;
    let (mut abs_rel, mut sq_rel, mut sq, mut within, mut n) = (0.0, 0.0, 0.0, 0usize, 0usize);
    for i in 0..gt.len() {
        if !(pred.is_valid(i) && gt.is_valid(i)) {
            continue;
        }
        let (p, g) = (pred.value(i), gt.value(i));
        if !(g > 0.0 && g <= cap) {
            continue;
        }
        let e = p - g;
        abs_rel += e.abs() / g;
        sq_rel += e * e / g;
        sq += e * e;
        if p > 0.0 && (p / g).max(g / p) < 1.25 {
            within += 1;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoOverlap("no jointly valid depth pixels".into()));
    }
    let nf = n as f64;
    Ok(DepthMetrics {
        abs_rel: abs_rel / nf,
        sq_rel: sq_rel / nf,
        rmse: (sq / nf).sqrt(),
        delta_1_25: within as f64 / nf,
        count: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{se3_exp, Pose, Twist};
    use nalgebra::{UnitQuaternion, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_traj(rng: &mut ChaCha8Rng, n: usize) -> Trajectory {
        let poses = (0..n)
            .map(|_| {
                se3_exp(&Twist::new(
                    Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                    Vector3::from_fn(|_, _| rng.random_range(-4.0..4.0)),
                ))
            })
            .collect();
        Trajectory::uniform(poses, 0.1).unwrap()
    }

    #[test]
    fn self_ate_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_traj(&mut rng, 8);
        for mode in [AlignmentMode::None, AlignmentMode::ScaleOnly, AlignmentMode::Similarity] {
            assert!(ate(&t, &t, mode).unwrap() < 1e-12);
        }
    }

    #[test]
    fn constant_offset_under_scale_only() {
        let gt_poses: Vec<Pose> = [(-3.0, 0.0, 0.0), (0.0, 2.0, 0.0), (-1.0, 0.0, 1.0), (0.0, -2.0, -1.0)]
            .iter()
            .map(|&(x, y, z)| Pose::from_translation(Vector3::new(x, y, z)))
            .collect();
        let pred: Vec<Pose> = gt_poses
            .iter()
            .map(|p| Pose::from_translation(p.translation + Vector3::x()))
            .collect();
        let gt = Trajectory::uniform(gt_poses, 0.1).unwrap();
        let pred = Trajectory::uniform(pred, 0.1).unwrap();
        let r = ate_report(&pred, &gt, AlignmentMode::ScaleOnly).unwrap();
        // p = q + x̂ gives Σp·q − Σp·p = −Σq_x − n = 0, so the optimal scale is one.
        assert_eq!(r.alignment.scale, 1.0);
        assert!((r.ate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invariance_and_nesting() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let gt = random_traj(&mut rng, 10);
            let pred = random_traj(&mut rng, 10);
            let a_sim = ate(&pred, &gt, AlignmentMode::Similarity).unwrap();
            let a_sc = ate(&pred, &gt, AlignmentMode::ScaleOnly).unwrap();
            let a_none = ate(&pred, &gt, AlignmentMode::None).unwrap();
            assert!(a_sim <= a_sc + 1e-12 && a_sc <= a_none + 1e-12);
            let g = se3_exp(&Twist::new(
                Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
                Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0)),
            ));
            let s0 = Similarity {
                scale: rng.random_range(0.3..3.0),
                rotation: g.rotation_matrix(),
                translation: g.translation,
            };
            let moved = ate(&pred.transformed(&s0), &gt, AlignmentMode::Similarity).unwrap();
            assert!((moved - a_sim).abs() < 1e-9);
        }
    }

    #[test]
    fn transformed_copy_has_zero_similarity_ate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gt = random_traj(&mut rng, 12);
        let s0 = Similarity {
            scale: 0.37,
            rotation: UnitQuaternion::from_euler_angles(0.3, -1.2, 2.0).to_rotation_matrix().into_inner(),
            translation: Vector3::new(5.0, -1.0, 2.0),
        };
        assert!(ate(&gt.transformed(&s0), &gt, AlignmentMode::Similarity).unwrap() < 1e-9);
    }

    #[test]
    fn disjoint_timestamps() {
        let a = Trajectory::new(vec![0.0, 1.0], vec![Pose::identity(); 2]).unwrap();
        let b = Trajectory::new(vec![0.5, 1.5], vec![Pose::identity(); 2]).unwrap();
        assert!(matches!(ate(&a, &b, AlignmentMode::None), Err(Error::Association(_))));
    }

    #[test]
    fn depth_identities() {
        let g = DepthMap::from_values(3, 1, vec![1.0, 2.0, 4.0]).unwrap();
        let m = depth_metrics(&g, &g, 80.0).unwrap();
        assert_eq!((m.abs_rel, m.sq_rel, m.rmse, m.delta_1_25), (0.0, 0.0, 0.0, 1.0));
        let m = depth_metrics(&g.scaled(2.0), &g, 80.0).unwrap();
        assert_eq!(m.abs_rel, 1.0);
        assert_eq!(m.delta_1_25, 0.0);
    }

    #[test]
    fn depth_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (w, h) = (9, 7);
            let mk = |rng: &mut ChaCha8Rng| {
                let v = (0..w * h).map(|_| rng.random_range(0.5..100.0)).collect();
                let m = (0..w * h).map(|_| rng.random_bool(0.8)).collect();
                DepthMap::with_mask(w, h, v, m).unwrap()
            };
            let (p, g) = (mk(&mut rng), mk(&mut rng));
            let m = depth_metrics(&p, &g, 80.0).unwrap();
            let mut rows = Vec::new();
            for v in 0..h {
                for u in 0..w {
                    if let (Some(a), Some(b)) = (p.get(u, v), g.get(u, v)) {
                        if b <= 80.0 {
                            rows.push((a, b));
                        }
                    }
                }
            }
            let n = rows.len() as f64;
            let abs_rel = rows.iter().map(|(a, b)| (a - b).abs() / b).sum::<f64>() / n;
            let sq_rel = rows.iter().map(|(a, b)| (a - b) * (a - b) / b).sum::<f64>() / n;
            let rmse = (rows.iter().map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n).sqrt();
            let delta = rows.iter().filter(|(a, b)| (a / b).max(b / a) < 1.25).count() as f64 / n;
            assert!((m.abs_rel - abs_rel).abs() < 1e-10);
            assert!((m.sq_rel - sq_rel).abs() < 1e-10);
            assert!((m.rmse - rmse).abs() < 1e-10);
            assert!((m.delta_1_25 - delta).abs() < 1e-10);
        }
    }
}
