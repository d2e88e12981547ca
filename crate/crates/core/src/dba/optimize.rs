use rayon::prelude::*;

use super::{
    build_normal_equations, schur_solve, BaState, EdgeTarget, FlowRevisionProvider, KeyframeGraph,
    SolverConfig, Updates,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationStats {
    /// Weighted residual norm `sqrt(rᵀΣr)` before the update.
    pub residual_norm: f64,
    pub update_norm: f64,
    /// Inverse depths clamped at the floor by this update.
    pub clamped: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimizeReport {
    pub iterations: Vec<IterationStats>,
    /// Weighted residual norm after the last update.
    pub final_residual_norm: f64,
    pub converged: bool,
}

impl OptimizeReport {
    pub fn num_iterations(&self) -> usize {
        self.iterations.len()
    }

    pub fn total_clamped(&self) -> usize {
        self.iterations.iter().map(|s| s.clamped).sum()
    }
}

/// Retracts poses on the right and increments inverse depths, clamping at
/// `depth_floor`. Returns the new state and the number of clamped pixels.
pub fn apply_updates(state: &BaState, updates: &Updates, depth_floor: f64) -> (BaState, usize) {
    let mut next = state.clone();
    for (pose, xi) in next.poses.iter_mut().zip(&updates.poses) {
        if *xi != crate::geometry::Twist::zero() {
            *pose = pose.retract(xi);
        }
    }
    let pixels = state.num_pixels();
    let mut clamped = 0;
    for (frame, map) in next.inv_depths.iter_mut().enumerate() {
        for p in 0..pixels {
            let delta = updates.depths[frame * pixels + p];
            if !map.is_valid(p) || delta == 0.0 {
                continue;
            }
            let value = map.value(p) + delta;
            if value < depth_floor || !value.is_finite() {
                map.set(p, depth_floor);
                clamped += 1;
            } else {
                map.set(p, value);
            }
        }
    }
    (next, clamped)
}

fn query_targets(
    state: &BaState,
    graph: &KeyframeGraph,
    provider: &dyn FlowRevisionProvider,
) -> Result<Vec<EdgeTarget>> {
    graph
        .edges()
        .par_iter()
        .map(|&edge| {
            let current = state.flow(edge)?;
            let revision = provider.query(edge, &current)?;
            EdgeTarget::from_revision(&current, &revision)
        })
        .collect()
}

/// Alternates provider queries and Gauss-Newton steps.
///
/// Each iteration recomputes the current flows, asks the provider for
/// revisions, forms `p* = r + p`, and applies one Schur-complement step.
/// Stops once the largest update falls below `convergence_tol`.
pub fn optimize(
    state: &BaState,
    graph: &KeyframeGraph,
    provider: &dyn FlowRevisionProvider,
    config: &SolverConfig,
) -> Result<(BaState, OptimizeReport)> {
    match optimize_best_effort(state, graph, provider, config)? {
        (state, report, None) => Ok((state, report)),
        (_, _, Some(e)) => Err(e),
    }
}

/// Like [`optimize`], but a singular step ends the run instead of failing
/// it: the last state reached is returned together with the error.
pub fn optimize_best_effort(
    state: &BaState,
    graph: &KeyframeGraph,
    provider: &dyn FlowRevisionProvider,
    config: &SolverConfig,
) -> Result<(BaState, OptimizeReport, Option<Error>)> {
    config.validate()?;
    let mut state = state.clone();
    let mut report = OptimizeReport::default();
    for _ in 0..config.max_iterations {
        let targets = query_targets(&state, graph, provider)?;
        let system = build_normal_equations(&state, graph, &targets, config.damping)?;
        let updates = match schur_solve(&system, config.fixed_poses) {
            Ok(u) => u,
            Err(e @ Error::Singular { .. }) => {
                report.final_residual_norm = system.residual_sq.sqrt();
                return Ok((state, report, Some(e)));
            }
            Err(e) => return Err(e),
        };
        let update_norm = updates.max_norm();
        let (next, clamped) = apply_updates(&state, &updates, config.depth_floor);
        state = next;
        report.iterations.push(IterationStats {
            residual_norm: system.residual_sq.sqrt(),
            update_norm,
            clamped,
        });
        log::debug!(
            "iteration {}: residual {:.6e}, update {:.3e}, clamped {}",
            report.iterations.len() - 1,
            system.residual_sq.sqrt(),
            update_norm,
            clamped
        );
        if update_norm < config.convergence_tol {
            report.converged = true;
            break;
        }
    }
    let targets = query_targets(&state, graph, provider)?;
    let system = build_normal_equations(&state, graph, &targets, 0.0)?;
    report.final_residual_norm = system.residual_sq.sqrt();
    Ok((state, report, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dba::fixtures::random_instance;
    use crate::dba::{ConfidenceWeights, Revision};
    use crate::geometry::{FlowField, Twist};
    use crate::Error;

    #[test]
    fn zero_updates_leave_state_unchanged() {
        let (state, _) = random_instance(3, 6, 4, 1);
        let (next, clamped) = apply_updates(&state, &Updates::zeros(3, 24), 1e-4);
        assert_eq!(next, state);
        assert_eq!(clamped, 0);
    }

    #[test]
    fn pose_update_is_right_retraction() {
        let (state, _) = random_instance(3, 6, 4, 2);
        let mut u = Updates::zeros(3, 24);
        let xi = Twist::new(nalgebra::Vector3::new(0.01, -0.02, 0.03), nalgebra::Vector3::new(0.1, 0.2, -0.3));
        u.poses[1] = xi;
        let (next, _) = apply_updates(&state, &u, 1e-4);
        let expect = state.poses[1].compose(&crate::geometry::se3_exp(&xi));
        assert!((next.poses[1].to_homogeneous() - expect.to_homogeneous()).amax() < 1e-12);
    }

    #[test]
    fn depth_floor_clamps_and_counts() {
        let (state, _) = random_instance(2, 6, 4, 3);
        let mut u = Updates::zeros(2, 24);
        u.depths[5] = -10.0;
        u.depths[30] = -10.0;
        let (next, clamped) = apply_updates(&state, &u, 1e-4);
        assert_eq!(clamped, 2);
        assert_eq!(next.inv_depths[0].value(5), 1e-4);
        assert_eq!(next.inv_depths[1].value(6), 1e-4);
    }

    struct Uncovered;

    impl FlowRevisionProvider for Uncovered {
        fn query(&self, edge: (usize, usize), _: &FlowField) -> Result<Revision> {
            Err(Error::Coverage(edge.0, edge.1))
        }
    }

    struct Exact;

    impl FlowRevisionProvider for Exact {
        fn query(&self, _: (usize, usize), current: &FlowField) -> Result<Revision> {
            Ok(Revision {
                revision: vec![nalgebra::Vector2::zeros(); current.len()],
                weights: ConfidenceWeights::uniform(current.width(), current.height(), 1.0),
            })
        }
    }

    #[test]
    fn provider_errors_propagate() {
        let (state, graph) = random_instance(2, 6, 4, 4);
        assert!(matches!(
            optimize(&state, &graph, &Uncovered, &SolverConfig::default()),
            Err(Error::Coverage(..))
        ));
    }

    #[test]
    fn consistent_targets_converge_immediately() {
        let (state, graph) = random_instance(3, 6, 4, 5);
        let (next, report) = optimize(&state, &graph, &Exact, &SolverConfig::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.num_iterations(), 1);
        assert_eq!(report.iterations[0].update_norm, 0.0);
        assert_eq!(next, state);
    }
}
