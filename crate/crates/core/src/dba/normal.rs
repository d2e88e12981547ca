use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};
use rayon::prelude::*;

use super::{edge_residual_jacobian, BaState, EdgeLinearization, EdgeTarget, KeyframeGraph};
use crate::{Error, Result};

const DEPTH_OBSERVED_TOL: f64 = 1e-14;

/// Block-structured Gauss-Newton system over poses and inverse depths.
///
/// Depth parameters are indexed `frame * pixels_per_frame + pixel`. The
/// depth-depth block is diagonal; pose-depth coupling is stored per
/// `(frame, pose)` pair as one 6-vector per pixel of `frame`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalEquations {
    pub num_poses: usize,
    pub pixels_per_frame: usize,
    pub h_pp: DMatrix<f64>,
    pub b_p: DVector<f64>,
    pub h_dd: Vec<f64>,
    pub b_d: Vec<f64>,
    pub h_pd: BTreeMap<(usize, usize), Vec<Vector6<f64>>>,
    /// Weighted squared residual `rᵀΣr` at the linearization point.
    pub residual_sq: f64,
}

impl NormalEquations {
    pub fn zeros(num_poses: usize, pixels_per_frame: usize) -> Self {
        Self {
            num_poses,
            pixels_per_frame,
            h_pp: DMatrix::zeros(6 * num_poses, 6 * num_poses),
            b_p: DVector::zeros(6 * num_poses),
            h_dd: vec![0.0; num_poses * pixels_per_frame],
            b_d: vec![0.0; num_poses * pixels_per_frame],
            h_pd: BTreeMap::new(),
            residual_sq: 0.0,
        }
    }

    pub fn num_depths(&self) -> usize {
        self.h_dd.len()
    }

    /// Per-depth observation flags. Diagonal entries at rounding level
    /// relative to the largest pose diagonal count as unobserved.
    pub fn depth_observed(&self) -> Vec<bool> {
        let scale = (0..self.h_pp.nrows()).map(|i| self.h_pp[(i, i)].abs()).fold(0.0, f64::max);
        let tol = scale * DEPTH_OBSERVED_TOL;
        self.h_dd.iter().map(|&h| h > tol && h.is_finite()).collect()
    }

    /// Dense `(6N + N·P)`-square matrix and right-hand side, poses first.
    pub fn to_dense(&self) -> (DMatrix<f64>, DVector<f64>) {
        let np = 6 * self.num_poses;
        let n = np + self.num_depths();
        let mut h = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        h.view_mut((0, 0), (np, np)).copy_from(&self.h_pp);
        b.rows_mut(0, np).copy_from(&self.b_p);
        for (k, (hd, bd)) in self.h_dd.iter().zip(&self.b_d).enumerate() {
            h[(np + k, np + k)] = *hd;
            b[np + k] = *bd;
        }
        for (&(frame, pose), column) in &self.h_pd {
            for (p, v) in column.iter().enumerate() {
                let c = np + frame * self.pixels_per_frame + p;
                for r in 0..6 {
                    h[(6 * pose + r, c)] += v[r];
                    h[(c, 6 * pose + r)] += v[r];
                }
            }
        }
        (h, b)
    }
}

/// Per-edge partial sums, combined in edge order.
struct EdgeSums {
    i: usize,
    j: usize,
    h_ii: Matrix6<f64>,
    h_ij: Matrix6<f64>,
    h_jj: Matrix6<f64>,
    b_i: Vector6<f64>,
    b_j: Vector6<f64>,
    h_dd: Vec<f64>,
    b_d: Vec<f64>,
    h_id: Vec<Vector6<f64>>,
    h_jd: Vec<Vector6<f64>>,
    residual_sq: f64,
}

fn edge_sums(lin: &EdgeLinearization) -> EdgeSums {
    let n = lin.valid.len();
    let (i, j) = lin.edge;
    let mut s = EdgeSums {
        i,
        j,
        h_ii: Matrix6::zeros(),
        h_ij: Matrix6::zeros(),
        h_jj: Matrix6::zeros(),
        b_i: Vector6::zeros(),
        b_j: Vector6::zeros(),
        h_dd: vec![0.0; n],
        b_d: vec![0.0; n],
        h_id: vec![Vector6::zeros(); n],
        h_jd: vec![Vector6::zeros(); n],
        residual_sq: 0.0,
    };
    for p in 0..n {
        let w = lin.weights[p];
        if !lin.valid[p] || (w.x == 0.0 && w.y == 0.0) {
            continue;
        }
        let r = lin.residuals[p];
        let ji = &lin.j_pose_i[p];
        let jj = &lin.j_pose_j[p];
        let jd = &lin.j_depth[p];
        // rows scaled by the weights
        let mut wji = *ji;
        let mut wjj = *jj;
        wji.row_mut(0).scale_mut(w.x);
        wji.row_mut(1).scale_mut(w.y);
        wjj.row_mut(0).scale_mut(w.x);
        wjj.row_mut(1).scale_mut(w.y);
        let wr = nalgebra::Vector2::new(w.x * r.x, w.y * r.y);
        let wjd = nalgebra::Vector2::new(w.x * jd.x, w.y * jd.y);

        s.h_ii += ji.transpose() * wji;
        s.h_ij += ji.transpose() * wjj;
        s.h_jj += jj.transpose() * wjj;
        s.b_i += ji.transpose() * wr;
        s.b_j += jj.transpose() * wr;
        s.h_dd[p] = jd.dot(&wjd);
        s.b_d[p] = jd.dot(&wr);
        s.h_id[p] = ji.transpose() * wjd;
        s.h_jd[p] = jj.transpose() * wjd;
        s.residual_sq += r.dot(&wr);
    }
    s
}

/// Assembles `H = JᵀΣJ + λ·diag(JᵀΣJ)` and `b = JᵀΣr` over all edges.
///
/// `targets` is aligned with `graph.edges()`. Edges are linearized in
/// parallel and combined in list order, so the result does not depend on
/// scheduling.
pub fn build_normal_equations(
    state: &BaState,
    graph: &KeyframeGraph,
    targets: &[EdgeTarget],
    damping: f64,
) -> Result<NormalEquations> {
    if targets.len() != graph.edges().len() {
        return Err(Error::Config(format!(
            "{} edge targets supplied for {} edges",
            targets.len(),
            graph.edges().len()
        )));
    }
    if graph.num_keyframes() != state.num_keyframes() {
        return Err(Error::shape(
            format!("{} keyframes", state.num_keyframes()),
            format!("graph over {}", graph.num_keyframes()),
        ));
    }
    let sums: Vec<EdgeSums> = graph
        .edges()
        .par_iter()
        .zip(targets.par_iter())
        .map(|(&edge, target)| edge_residual_jacobian(state, edge, target).map(|lin| edge_sums(&lin)))
        .collect::<Result<_>>()?;
    Ok(accumulate(state.num_keyframes(), state.num_pixels(), &sums, damping))
}

fn accumulate(num_poses: usize, pixels: usize, sums: &[EdgeSums], damping: f64) -> NormalEquations {
    let mut ne = NormalEquations::zeros(num_poses, pixels);
    for s in sums {
        let (i, j) = (s.i, s.j);
        add_block(&mut ne.h_pp, i, i, &s.h_ii);
        add_block(&mut ne.h_pp, i, j, &s.h_ij);
        add_block(&mut ne.h_pp, j, i, &s.h_ij.transpose());
        add_block(&mut ne.h_pp, j, j, &s.h_jj);
        {
            let mut bi = ne.b_p.fixed_rows_mut::<6>(6 * i);
            bi += s.b_i;
        }
        {
            let mut bj = ne.b_p.fixed_rows_mut::<6>(6 * j);
            bj += s.b_j;
        }
        let base = i * pixels;
        for p in 0..pixels {
            ne.h_dd[base + p] += s.h_dd[p];
            ne.b_d[base + p] += s.b_d[p];
        }
        for (pose, column) in [(i, &s.h_id), (j, &s.h_jd)] {
            let entry = ne
                .h_pd
                .entry((i, pose))
                .or_insert_with(|| vec![Vector6::zeros(); pixels]);
            for (acc, v) in entry.iter_mut().zip(column) {
                *acc += v;
            }
        }
        ne.residual_sq += s.residual_sq;
    }
    if damping > 0.0 {
        for k in 0..ne.h_pp.nrows() {
            ne.h_pp[(k, k)] *= 1.0 + damping;
        }
        for h in &mut ne.h_dd {
            *h *= 1.0 + damping;
        }
    }
    ne
}

fn add_block(h: &mut DMatrix<f64>, r: usize, c: usize, block: &Matrix6<f64>) {
    let mut view = h.fixed_view_mut::<6, 6>(6 * r, 6 * c);
    view += block;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dba::fixtures::{noisy_targets, random_instance};

    /// Stacks every weighted residual row into a dense Jacobian.
    fn dense_oracle(state: &BaState, graph: &KeyframeGraph, targets: &[EdgeTarget], damping: f64) -> (DMatrix<f64>, DVector<f64>) {
        let n_kf = state.num_keyframes();
        let pixels = state.num_pixels();
        let cols = 6 * n_kf + n_kf * pixels;
        let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
        for (&edge, target) in graph.edges().iter().zip(targets) {
            let lin = edge_residual_jacobian(state, edge, target).unwrap();
            for p in (0..pixels).filter(|&p| lin.valid[p]) {
                for comp in 0..2 {
                    let mut row = vec![0.0; cols];
                    for c in 0..6 {
                        row[6 * edge.0 + c] += lin.j_pose_i[p][(comp, c)];
                        row[6 * edge.1 + c] += lin.j_pose_j[p][(comp, c)];
                    }
                    row[6 * n_kf + edge.0 * pixels + p] = lin.j_depth[p][comp];
                    rows.push((row, lin.residuals[p][comp], lin.weights[p][comp]));
                }
            }
        }
        let j = DMatrix::from_fn(rows.len(), cols, |r, c| rows[r].0[c]);
        let w = DMatrix::from_diagonal(&DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2)));
        let r = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
        let mut h = j.transpose() * &w * &j;
        for k in 0..cols {
            h[(k, k)] *= 1.0 + damping;
        }
        (h, j.transpose() * w * r)
    }

    #[test]
    fn empty_graph_gives_zero_system() {
        let (state, _) = random_instance(3, 6, 4, 0);
        let ne = build_normal_equations(&state, &KeyframeGraph::empty(3), &[], 1e-4).unwrap();
        assert!(ne.h_pp.iter().all(|v| *v == 0.0));
        assert!(ne.b_p.iter().all(|v| *v == 0.0));
        assert!(ne.h_dd.iter().chain(&ne.b_d).all(|v| *v == 0.0));
        assert!(ne.h_pd.is_empty());
    }

    #[test]
    fn missing_target_is_config_error() {
        let (state, graph) = random_instance(3, 6, 4, 0);
        let targets = noisy_targets(&state, &graph, 1);
        assert!(matches!(
            build_normal_equations(&state, &graph, &targets[1..], 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn blocks_match_dense_assembly() {
        for (seed, damping) in [(0, 0.0), (1, 1e-4), (2, 0.5)] {
            let (state, graph) = random_instance(3, 6, 4, seed);
            let targets = noisy_targets(&state, &graph, seed + 100);
            let ne = build_normal_equations(&state, &graph, &targets, damping).unwrap();
            let (h, b) = ne.to_dense();
            let (h_ref, b_ref) = dense_oracle(&state, &graph, &targets, damping);
            let scale = h_ref.amax().max(1.0);
            assert!((&h - &h_ref).amax() < 1e-10 * scale, "seed {seed}");
            assert!((&b - &b_ref).amax() < 1e-10 * b_ref.amax().max(1.0));
        }
    }

    #[test]
    fn dense_system_is_symmetric_psd() {
        let (state, graph) = random_instance(3, 6, 4, 5);
        let targets = noisy_targets(&state, &graph, 9);
        let ne = build_normal_equations(&state, &graph, &targets, 0.0).unwrap();
        let (h, _) = ne.to_dense();
        assert!((&h - h.transpose()).amax() < 1e-12 * h.amax());
        let eig = h.symmetric_eigen();
        assert!(eig.eigenvalues.min() >= -1e-8, "{}", eig.eigenvalues.min());
    }

    #[test]
    fn zero_weight_pixel_contributes_nothing() {
        let (state, graph) = random_instance(3, 6, 4, 3);
        let targets = noisy_targets(&state, &graph, 4);
        let ne = build_normal_equations(&state, &graph, &targets, 1e-4).unwrap();

        let mut zeroed = targets.clone();
        let t = &zeroed[0];
        let mut w = t.weights().values().to_vec();
        w[7] = nalgebra::Vector2::zeros();
        let weights = crate::dba::ConfidenceWeights::new(6, 4, w).unwrap();
        zeroed[0] = EdgeTarget::new(t.target_flow().clone(), weights.clone()).unwrap();
        let ne_zero = build_normal_equations(&state, &graph, &zeroed, 1e-4).unwrap();

        // arbitrary change of the zero-weight target leaves the system bit-identical
        let mut values = zeroed[0].target_flow().values().to_vec();
        values[7] += nalgebra::Vector2::new(123.0, -45.0);
        let flow = crate::geometry::FlowField::new(6, 4, values, zeroed[0].target_flow().mask().to_vec()).unwrap();
        let mut moved = zeroed.clone();
        moved[0] = EdgeTarget::new(flow, weights).unwrap();
        let ne_moved = build_normal_equations(&state, &graph, &moved, 1e-4).unwrap();
        assert_eq!(ne_zero, ne_moved);
        assert_ne!(ne, ne_zero);
    }
}
