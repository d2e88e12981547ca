//! Weighted dense bundle adjustment over keyframe poses and per-pixel
//! inverse depths.
//!
//! The residual of an edge `(i, j)` at pixel `p` is `p*_ij(p) - Π(G_ij ∘ Π⁻¹(p, d_i(p)))`
//! weighted by a diagonal 2x2 confidence. Pose perturbations are applied on
//! the right, `G ← G · exp(ξ)`, with `ξ = (ω, v)`.

mod normal;
mod optimize;
mod residual;
mod schur;

#[cfg(test)]
pub(crate) mod fixtures;

use nalgebra::Vector2;

use crate::geometry::{CameraIntrinsics, FlowField, InverseDepthMap, Pose};
use crate::{Error, Result};

pub use normal::{build_normal_equations, NormalEquations};
pub use optimize::{apply_updates, optimize, optimize_best_effort, IterationStats, OptimizeReport};
pub use residual::{edge_residual_jacobian, EdgeLinearization};
pub use schur::{schur_solve, Updates};

/// Directed co-visibility edge `(source, target)`.
pub type Edge = (usize, usize);

/// Set of directed co-visible keyframe pairs. Always bidirectional.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyframeGraph {
    num_keyframes: usize,
    edges: Vec<Edge>,
}

impl KeyframeGraph {
    pub fn new(num_keyframes: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &(i, j) in &edges {
            if i >= num_keyframes || j >= num_keyframes {
                return Err(Error::Config(format!(
                    "edge ({i}, {j}) out of range for {num_keyframes} keyframes"
                )));
            }
            if i == j {
                return Err(Error::Config(format!("self edge ({i}, {j})")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::Config(format!("duplicate edge ({i}, {j})")));
            }
        }
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| !seen.contains(&(j, i))) {
            return Err(Error::Config(format!(
                "edge ({i}, {j}) has no reverse edge"
            )));
        }
        Ok(Self {
            num_keyframes,
            edges,
        })
    }

    pub fn empty(num_keyframes: usize) -> Self {
        Self {
            num_keyframes,
            edges: Vec::new(),
        }
    }

    pub fn num_keyframes(&self) -> usize {
        self.num_keyframes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn contains(&self, edge: Edge) -> bool {
        self.edges.contains(&edge)
    }
}

/// Per-pixel, per-component non-negative confidence weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceWeights {
    width: usize,
    height: usize,
    values: Vec<Vector2<f64>>,
}

impl ConfidenceWeights {
    pub fn new(width: usize, height: usize, values: Vec<Vector2<f64>>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(
                format!("{} weights", width * height),
                format!("{} weights", values.len()),
            ));
        }
        if let Some(w) = values
            .iter()
            .find(|w| !(w.x.is_finite() && w.y.is_finite() && w.x >= 0.0 && w.y >= 0.0))
        {
            return Err(Error::Config(format!("invalid confidence weight {w:?}")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn uniform(width: usize, height: usize, w: f64) -> Self {
        Self::new(width, height, vec![Vector2::new(w, w); width * height])
            .expect("uniform weights are valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[Vector2<f64>] {
        &self.values
    }

    pub fn get(&self, index: usize) -> Vector2<f64> {
        self.values[index]
    }
}

/// Target flow `p*_ij` and its confidence for one edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeTarget {
    target_flow: FlowField,
    weights: ConfidenceWeights,
}

impl EdgeTarget {
    /// Weights at pixels where the target is invalid are forced to zero.
    pub fn new(target_flow: FlowField, mut weights: ConfidenceWeights) -> Result<Self> {
        if (target_flow.width(), target_flow.height()) != (weights.width, weights.height) {
            return Err(Error::shape(
                format!("{}x{} weights", target_flow.width(), target_flow.height()),
                format!("{}x{}", weights.width, weights.height),
            ));
        }
        for (w, ok) in weights.values.iter_mut().zip(target_flow.mask()) {
            if !ok {
                *w = Vector2::zeros();
            }
        }
        Ok(Self {
            target_flow,
            weights,
        })
    }

    /// Forms `p* = r + p` from a provider revision of the current flow.
    pub fn from_revision(current: &FlowField, revision: &Revision) -> Result<Self> {
        if revision.revision.len() != current.len() {
            return Err(Error::shape(
                format!("{} revisions", current.len()),
                format!("{}", revision.revision.len()),
            ));
        }
        let values = current
            .values()
            .iter()
            .zip(&revision.revision)
            .map(|(p, r)| p + r)
            .collect();
        let flow = FlowField::new(
            current.width(),
            current.height(),
            values,
            current.mask().to_vec(),
        )?;
        Self::new(flow, revision.weights.clone())
    }

    pub fn target_flow(&self) -> &FlowField {
        &self.target_flow
    }

    pub fn weights(&self) -> &ConfidenceWeights {
        &self.weights
    }
}

/// Optimization variables: keyframe poses (world-to-camera) and inverse depths.
#[derive(Clone, Debug, PartialEq)]
pub struct BaState {
    pub poses: Vec<Pose>,
    pub inv_depths: Vec<InverseDepthMap>,
    pub intrinsics: CameraIntrinsics,
}

impl BaState {
    pub fn new(
        poses: Vec<Pose>,
        inv_depths: Vec<InverseDepthMap>,
        intrinsics: CameraIntrinsics,
    ) -> Result<Self> {
        if poses.len() != inv_depths.len() {
            return Err(Error::shape(
                format!("{} inverse depth maps", poses.len()),
                format!("{}", inv_depths.len()),
            ));
        }
        for d in &inv_depths {
            d.check_dims(intrinsics.width, intrinsics.height)?;
        }
        Ok(Self {
            poses,
            inv_depths,
            intrinsics,
        })
    }

    pub fn num_keyframes(&self) -> usize {
        self.poses.len()
    }

    pub fn num_pixels(&self) -> usize {
        self.intrinsics.num_pixels()
    }

    pub fn relative(&self, (i, j): Edge) -> Pose {
        crate::geometry::relative(&self.poses[i], &self.poses[j])
    }

    /// Current reprojection flow along an edge.
    pub fn flow(&self, edge: Edge) -> Result<FlowField> {
        crate::geometry::reproject_flow(&self.intrinsics, &self.relative(edge), &self.inv_depths[edge.0])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Multiplicative Levenberg damping on the diagonal of `JᵀΣJ`.
    pub damping: f64,
    /// Smallest admissible inverse depth (1/m).
    pub depth_floor: f64,
    /// Iteration stops once the largest update component falls below this.
    pub convergence_tol: f64,
    /// Number of leading poses held fixed as gauge.
    pub fixed_poses: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 20,
            damping: 1e-4,
            depth_floor: 1e-4,
            convergence_tol: 1e-8,
            fixed_poses: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Config("solver.max_iterations must be >= 1".into()));
        }
        if self.fixed_poses < 1 {
            return Err(Error::Config("fixed_poses must be >= 1".into()));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::Config("solver.damping must be finite and >= 0".into()));
        }
        if !(self.depth_floor > 0.0 && self.depth_floor.is_finite()) {
            return Err(Error::Config("solver.depth_floor must be finite and > 0".into()));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::Config("solver.convergence_tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Flow revision and confidence answered for one edge query.
#[derive(Clone, Debug, PartialEq)]
pub struct Revision {
    pub revision: Vec<Vector2<f64>>,
    pub weights: ConfidenceWeights,
}

/// Source of flow revisions: given the current flow of edge `(i, j)`,
/// returns the per-pixel revision `r_ij` and confidence `w_ij`.
pub trait FlowRevisionProvider: Sync {
    fn query(&self, edge: Edge, current: &FlowField) -> Result<Revision>;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_requires_reverse_edges() {
        assert!(KeyframeGraph::new(3, vec![(0, 1)]).is_err());
        assert!(KeyframeGraph::new(3, vec![(0, 1), (1, 0)]).is_ok());
        assert!(KeyframeGraph::new(3, vec![(0, 3), (3, 0)]).is_err());
        assert!(KeyframeGraph::new(3, vec![(1, 1)]).is_err());
        assert!(KeyframeGraph::new(3, vec![(0, 1), (1, 0), (0, 1)]).is_err());
    }

    #[test]
    fn negative_weights_rejected() {
        assert!(ConfidenceWeights::new(1, 1, vec![Vector2::new(-1.0, 0.0)]).is_err());
        assert!(ConfidenceWeights::new(1, 1, vec![Vector2::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn invalid_targets_get_zero_weight() {
        let flow = FlowField::new(2, 1, vec![Vector2::zeros(); 2], vec![true, false]).unwrap();
        let t = EdgeTarget::new(flow, ConfidenceWeights::uniform(2, 1, 1.0)).unwrap();
        assert_eq!(t.weights().get(0), Vector2::new(1.0, 1.0));
        assert_eq!(t.weights().get(1), Vector2::zeros());
    }

    #[test]
    fn solver_config_invariants() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { fixed_poses: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { max_iterations: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
