//! Small random BA instances shared by unit tests.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BaState, ConfidenceWeights, EdgeTarget, KeyframeGraph};
use crate::geometry::{se3_exp, CameraIntrinsics, InverseDepthMap, Pose, Twist};

pub(crate) fn intrinsics(width: usize, height: usize) -> CameraIntrinsics {
    CameraIntrinsics::new(
        width as f64,
        width as f64,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        width,
        height,
    )
    .unwrap()
}

/// Random poses near identity and depths in 2..6 m, fully connected graph.
pub(crate) fn random_instance(
    keyframes: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> (BaState, KeyframeGraph) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = intrinsics(width, height);
    let mut poses = vec![Pose::identity()];
    for _ in 1..keyframes {
        let xi = Twist::new(
            Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05)),
            Vector3::from_fn(|_, _| rng.random_range(-0.3..0.3)),
        );
        poses.push(se3_exp(&xi));
    }
    let inv_depths = (0..keyframes)
        .map(|_| {
            let vals = (0..width * height)
                .map(|_| 1.0 / rng.random_range(2.0..6.0))
                .collect();
            InverseDepthMap::from_values(width, height, vals).unwrap()
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..keyframes {
        for j in 0..keyframes {
            if i != j {
                edges.push((i, j));
            }
        }
    }
    (
        BaState::new(poses, inv_depths, k).unwrap(),
        KeyframeGraph::new(keyframes, edges).unwrap(),
    )
}

/// Targets equal to the current reprojection, unit weights.
pub(crate) fn oracle_targets(state: &BaState, graph: &KeyframeGraph) -> Vec<EdgeTarget> {
    let k = &state.intrinsics;
    graph
        .edges()
        .iter()
        .map(|&e| {
            EdgeTarget::new(state.flow(e).unwrap(), ConfidenceWeights::uniform(k.width, k.height, 1.0)).unwrap()
        })
        .collect()
}

/// Targets perturbed with noise and random positive weights.
pub(crate) fn noisy_targets(state: &BaState, graph: &KeyframeGraph, seed: u64) -> Vec<EdgeTarget> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = &state.intrinsics;
    graph
        .edges()
        .iter()
        .map(|&e| {
            let flow = state.flow(e).unwrap();
            let values = flow
                .values()
                .iter()
                .map(|v| v + nalgebra::Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let flow = crate::geometry::FlowField::new(k.width, k.height, values, flow.mask().to_vec()).unwrap();
            let weights = (0..k.num_pixels())
                .map(|_| nalgebra::Vector2::new(rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)))
                .collect();
            EdgeTarget::new(flow, ConfidenceWeights::new(k.width, k.height, weights).unwrap()).unwrap()
        })
        .collect()
}
