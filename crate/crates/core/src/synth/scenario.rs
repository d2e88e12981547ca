use nalgebra::Vector3;

use super::{
    generate_scene, run_ablation, AblationRow, DepthModel, Motion, PriorNoise, ProviderConfig, ProviderKind,
    SceneConfig,
};
use crate::dba::SolverConfig;
use crate::geometry::CameraIntrinsics;
use crate::init::InitPolicy;
use crate::Result;

/// Everything needed to reproduce one ablation cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub scene: SceneConfig,
    pub prior_noise: PriorNoise,
    pub provider: ProviderConfig,
    pub solver: SolverConfig,
    pub graph_window: usize,
}

const LATERAL_SPEED: f64 = 2.6;
const YAW_RATE: f64 = 0.03;
/// Relative-pose prior rotation error at full motion, radians.
const PRIOR_ROTATION_NOISE: f64 = 0.01;
/// Relative-pose prior translation error as a fraction of the step length.
const PRIOR_TRANSLATION_NOISE: f64 = 0.02;

/// One sweep cell: the large-motion setup with its motion scaled by
/// `motion_scale` (0 gives a static camera) and the chosen provider.
pub fn motion_scenario(motion_scale: f64, kind: ProviderKind, seed: u64) -> Scenario {
    scenario(format!("motion{motion_scale}_{kind}"), motion_scale, kind, seed)
}

fn scenario(name: String, motion_scale: f64, kind: ProviderKind, seed: u64) -> Scenario {
    let motion = if motion_scale == 0.0 {
        Motion::Static
    } else {
        Motion::ConstantVelocity {
            velocity: Vector3::new(motion_scale * LATERAL_SPEED, 0.0, 0.0),
            angular: Vector3::new(0.0, motion_scale * YAW_RATE, 0.0),
        }
    };
    Scenario {
        name,
        scene: SceneConfig {
            intrinsics: CameraIntrinsics::new(22.0, 22.0, 11.5, 7.5, 24, 16).expect("valid intrinsics"),
            num_frames: 8,
            motion,
            depth_model: DepthModel::HeightField { base: 6.0, amplitude: 0.5, seed },
            dynamic_region: None,
            texture_seed: seed.wrapping_add(1000),
            flow_window: 2,
        },
        prior_noise: PriorNoise {
            rotation_sigma: PRIOR_ROTATION_NOISE * motion_scale,
            translation_sigma: PRIOR_TRANSLATION_NOISE * motion_scale * LATERAL_SPEED,
            depth_sigma: 0.1,
            seed,
        },
        provider: ProviderConfig { kind, search_radius: 8.0, rng_seed: seed, ..ProviderConfig::default() },
        solver: SolverConfig { damping: 1e-6, ..SolverConfig::default() },
        graph_window: 2,
    }
}

/// Side-looking camera on a vehicle travelling 2.6 m per frame with a slow
/// turn: 18 m of travel over 8 frames and about 9.5 px of flow between
/// neighbouring frames, against a bounded provider with an 8 px search
/// radius.
pub fn large_motion_scenario(seed: u64) -> Scenario {
    scenario(format!("large_motion_s{seed}"), 1.0, ProviderKind::Bounded, seed)
}

/// Motion scales {0, 0.5, 1} of the large-motion scenario crossed with both
/// provider kinds.
pub fn default_sweep(seed: u64) -> Vec<Scenario> {
    let mut out = Vec::new();
    for scale in [0.0, 0.5, 1.0] {
        for kind in [ProviderKind::Oracle, ProviderKind::Bounded] {
            out.push(motion_scenario(scale, kind, seed));
        }
    }
    out
}

pub fn run_scenario(s: &Scenario, policies: &[InitPolicy]) -> Result<Vec<AblationRow>> {
    let seq = generate_scene(&s.scene)?;
    let priors = seq.priors(&s.prior_noise)?;
    run_ablation(&seq, &priors, policies, &s.provider, &s.solver, s.graph_window)
}
