use super::{make_provider, ProviderConfig, SyntheticSequence};
use crate::dba::{optimize_best_effort, SolverConfig};
use crate::eval::{ate_report, depth_metrics, AlignmentMode, Trajectory};
use crate::init::{build_keyframe_graph, initialize_state, InitPolicy, PriorBundle};
use crate::priors::median_scale;
use crate::{Error, Result};

/// Depth cap used for ablation depth metrics, meters.
const DEPTH_CAP: f64 = 80.0;

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub policy: InitPolicy,
    pub ate: f64,
    /// Alignment actually used for `ate`.
    pub alignment: AlignmentMode,
    /// Mean over frames of median-scaled Abs.Rel.
    pub abs_rel: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Solver failure that ended the run early; metrics describe the last
    /// state reached.
    pub solver_error: Option<String>,
}

/// ATE under similarity alignment, falling back to scale-only when the
/// point sets are too degenerate to fix a rotation, and to no alignment when
/// the ground truth does not move.
pub fn ablation_ate(pred: &Trajectory, gt: &Trajectory) -> Result<(f64, AlignmentMode)> {
    let t0 = gt.poses()[0].translation;
    let static_gt = gt.translations().all(|t| t == t0);
    let modes: &[AlignmentMode] = if static_gt {
        &[AlignmentMode::None]
    } else {
        &[AlignmentMode::Similarity, AlignmentMode::ScaleOnly, AlignmentMode::None]
    };
    for &mode in modes {
        match ate_report(pred, gt, mode) {
            Ok(r) => return Ok((r.ate, mode)),
            Err(Error::DegenerateAlignment(msg)) => log::debug!("{mode} alignment degenerate: {msg}"),
            Err(e) => return Err(e),
        }
    }
    unreachable!("alignment mode none never degenerates")
}

/// Runs each policy from the same priors with every frame as a keyframe.
pub fn run_ablation(
    seq: &SyntheticSequence,
    priors: &PriorBundle,
    policies: &[InitPolicy],
    provider_config: &ProviderConfig,
    solver_config: &SolverConfig,
    graph_window: usize,
) -> Result<Vec<AblationRow>> {
    if policies.is_empty() {
        return Err(Error::Config("ablation needs at least one policy".into()));
    }
    let n = seq.num_frames();
    let keyframes: Vec<usize> = (0..n).collect();
    let graph = build_keyframe_graph(n, graph_window)?;
    let provider = make_provider(seq, *provider_config)?;
    let k = seq.intrinsics;
    policies
        .iter()
        .map(|policy| {
            let state = initialize_state(priors, &keyframes, policy, &k)?;
            let (state, report, failure) = optimize_best_effort(&state, &graph, &provider, solver_config)?;
            let est = Trajectory::new(
                seq.gt_trajectory.timestamps().to_vec(),
                state.poses.iter().map(|p| p.inverse()).collect(),
            )?;
            let (ate, alignment) = ablation_ate(&est, &seq.gt_trajectory)?;
            let mut abs_rel = 0.0;
            for (est_d, gt_d) in state.inv_depths.iter().zip(&seq.gt_depths) {
                let (pred, gt) = (est_d.to_depth(), gt_d.to_depth());
                let s = median_scale(&pred, &gt)?;
                abs_rel += depth_metrics(&pred.scaled(s), &gt, DEPTH_CAP)?.abs_rel;
            }
            Ok(AblationRow {
                policy: *policy,
                ate,
                alignment,
                abs_rel: abs_rel / n as f64,
                iterations: report.num_iterations(),
                converged: report.converged,
                solver_error: failure.map(|e| e.to_string()),
            })
        })
        .collect()
}
