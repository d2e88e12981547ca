//! Shared fixtures for the criterion benchmarks.

use sginit_core::dba::{EdgeTarget, FlowRevisionProvider};
use sginit_core::init::{build_keyframe_graph, initialize_state};
use sginit_core::synth::{generate_scene, large_motion_scenario, make_provider, Scenario, SyntheticSequence};
use sginit_core::{BaState, CameraIntrinsics, InitPolicy, KeyframeGraph};

pub struct Fixture {
    pub scenario: Scenario,
    pub seq: SyntheticSequence,
    pub state: BaState,
    pub graph: KeyframeGraph,
    pub targets: Vec<EdgeTarget>,
}

/// Large-motion scenario rescaled to `width x height`, initialized from
/// noisy priors with oracle targets queried at the initial state.
pub fn fixture(width: usize, height: usize, frames: usize) -> Fixture {
    let mut scenario = large_motion_scenario(0);
    let s = width as f64 / 24.0;
    scenario.scene.intrinsics = CameraIntrinsics::new(
        22.0 * s,
        22.0 * s,
        (width as f64 - 1.0) / 2.0,
        (height as f64 - 1.0) / 2.0,
        width,
        height,
    )
    .expect("valid intrinsics");
    scenario.scene.num_frames = frames;
    scenario.provider.kind = sginit_core::synth::ProviderKind::Oracle;
    let seq = generate_scene(&scenario.scene).expect("scene");
    let priors = seq.priors(&scenario.prior_noise).expect("priors");
    let keyframes: Vec<usize> = (0..frames).collect();
    let state = initialize_state(&priors, &keyframes, &InitPolicy::geometry_guided(), &seq.intrinsics).expect("state");
    let graph = build_keyframe_graph(frames, scenario.graph_window).expect("graph");
    let provider = make_provider(&seq, scenario.provider).expect("provider");
    let targets = graph
        .edges()
        .iter()
        .map(|&e| {
            let current = state.flow(e).expect("flow");
            EdgeTarget::from_revision(&current, &provider.query(e, &current).expect("query")).expect("target")
        })
        .collect();
    Fixture { scenario, seq, state, graph, targets }
}
