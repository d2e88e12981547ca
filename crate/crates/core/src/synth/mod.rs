//! Synthetic ground-truth sequences and flow-revision oracles.

mod ablation;
mod provider;
mod scenario;
mod scene;

pub use ablation::{ablation_ate, run_ablation, AblationRow};
pub use provider::{make_provider, ProviderConfig, ProviderKind, SyntheticProvider};
pub use scenario::{default_sweep, large_motion_scenario, motion_scenario, run_scenario, Scenario};
pub use scene::{generate_scene, PriorNoise, SyntheticSequence};

use nalgebra::Vector3;

use crate::geometry::{CameraIntrinsics, Twist};
use crate::{Error, Result};

/// Largest supported grid, rows × columns.
pub const MAX_GRID: (usize, usize) = (64, 96);
/// Smallest depth a generated scene may contain, meters.
pub const MIN_SCENE_DEPTH: f64 = 0.5;
/// Time between generated frames, seconds.
pub const FRAME_INTERVAL: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum Motion {
    Static,
    /// Body-frame twist applied once per frame.
    ConstantVelocity { velocity: Vector3<f64>, angular: Vector3<f64> },
    /// One body-frame step per frame transition.
    Scripted(Vec<Twist>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DepthModel {
    /// World plane `Z = z`.
    Plane { z: f64 },
    /// `Z = base + amplitude · h(X, Y)` with smooth seeded `|h| ≤ 1`.
    HeightField { base: f64, amplitude: f64, seed: u64 },
}

/// Pixels `[u0, u1) × [v0, v1)` of every frame see an object moving with
/// `velocity` in world coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicRegion {
    pub u0: usize,
    pub v0: usize,
    pub u1: usize,
    pub v1: usize,
    pub velocity: Vector3<f64>,
    pub weight: f64,
}

impl DynamicRegion {
    pub fn contains(&self, u: usize, v: usize) -> bool {
        (self.u0..self.u1).contains(&u) && (self.v0..self.v1).contains(&v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub intrinsics: CameraIntrinsics,
    pub num_frames: usize,
    pub motion: Motion,
    pub depth_model: DepthModel,
    pub dynamic_region: Option<DynamicRegion>,
    pub texture_seed: u64,
    /// Ground-truth flows are cached for frame pairs at most this far apart.
    pub flow_window: usize,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        let k = &self.intrinsics;
        if k.height > MAX_GRID.0 || k.width > MAX_GRID.1 {
            return Err(Error::Config(format!(
                "grid {}x{} exceeds {}x{}",
                k.width, k.height, MAX_GRID.1, MAX_GRID.0
            )));
        }
        if self.num_frames == 0 {
            return Err(Error::Config("num_frames must be >= 1".into()));
        }
        match &self.motion {
            Motion::Scripted(steps) if steps.len() + 1 != self.num_frames => {
                return Err(Error::Config(format!(
                    "scripted motion needs {} steps, got {}",
                    self.num_frames - 1,
                    steps.len()
                )))
            }
            Motion::Scripted(steps) if steps.iter().any(|s| !s.is_finite()) => {
                return Err(Error::Config("scripted motion has non-finite steps".into()))
            }
            Motion::ConstantVelocity { velocity, angular }
                if !velocity.iter().chain(angular.iter()).all(|v| v.is_finite()) =>
            {
                return Err(Error::Config("velocity must be finite".into()))
            }
            _ => {}
        }
        match self.depth_model {
            DepthModel::Plane { z } if !(z >= MIN_SCENE_DEPTH) => {
                return Err(Error::Config(format!("plane depth {z} below {MIN_SCENE_DEPTH} m")))
            }
            DepthModel::HeightField { base, amplitude, .. }
                if !(base - amplitude.abs() >= MIN_SCENE_DEPTH) =>
            {
                return Err(Error::Config(format!(
                    "height field {base} ± {amplitude} reaches below {MIN_SCENE_DEPTH} m"
                )))
            }
            _ => {}
        }
        if let Some(r) = &self.dynamic_region {
            if r.u0 >= r.u1 || r.v0 >= r.v1 || r.u1 > k.width || r.v1 > k.height {
                return Err(Error::Config(format!(
                    "dynamic region [{}, {}) x [{}, {}) is empty or outside the image",
                    r.u0, r.u1, r.v0, r.v1
                )));
            }
            if !(0.0..=1.0).contains(&r.weight) {
                return Err(Error::Config(format!("dynamic weight {} outside [0, 1]", r.weight)));
            }
        }
        Ok(())
    }
}
