//! Trajectory and depth metrics.

mod align;
mod failure;
mod metrics;

pub use align::{associate, umeyama_align, Association, Similarity, ASSOCIATION_TOLERANCE};
pub use failure::{classify_failure, FailureReport, LARGE_MOTION_DISPLACEMENT};
pub use metrics::{ate, ate_report, depth_metrics, AteReport, DepthMetrics};

use std::str::FromStr;

use crate::geometry::Pose;
use crate::{Error, Result};

/// Timestamped camera-to-world poses.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    timestamps: Vec<f64>,
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(timestamps: Vec<f64>, poses: Vec<Pose>) -> Result<Self> {
        if timestamps.len() != poses.len() {
            return Err(Error::shape(timestamps.len(), poses.len()));
        }
        if poses.is_empty() {
            return Err(Error::Config("trajectory must hold at least one pose".into()));
        }
        if let Some(w) = timestamps.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "timestamps must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { timestamps, poses })
    }

    /// Poses at `0, dt, 2dt, ...`.
    pub fn uniform(poses: Vec<Pose>, dt: f64) -> Result<Self> {
        let ts = (0..poses.len()).map(|i| i as f64 * dt).collect();
        Self::new(ts, poses)
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn translations(&self) -> impl Iterator<Item = nalgebra::Vector3<f64>> + '_ {
        self.poses.iter().map(|p| p.translation)
    }

    /// Applies `S` on the left of every pose.
    pub fn transformed(&self, s: &Similarity) -> Self {
        Self {
            timestamps: self.timestamps.clone(),
            poses: self.poses.iter().map(|p| s.apply_pose(p)).collect(),
        }
    }

    /// Keeps the entries at `indices` (increasing).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            indices.iter().map(|&i| self.timestamps[i]).collect(),
            indices.iter().map(|&i| self.poses[i]).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignmentMode {
    None,
    ScaleOnly,
    Rigid,
    Similarity,
}

impl FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "scale_only" => Ok(Self::ScaleOnly),
            "rigid" => Ok(Self::Rigid),
            "similarity" => Ok(Self::Similarity),
            other => Err(Error::Config(format!("unknown alignment mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for AlignmentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::ScaleOnly => "scale_only",
            Self::Rigid => "rigid",
            Self::Similarity => "similarity",
        })
    }
}
