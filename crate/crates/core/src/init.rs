//! Keyframe graph construction and state initialization from priors.

use crate::dba::{BaState, KeyframeGraph};
use crate::geometry::{relative, reproject_flow, CameraIntrinsics, InverseDepthMap, Pose};
use crate::{Error, Result};

/// Inverse depth assigned to every pixel by the naive initializer.
pub const NAIVE_INV_DEPTH: f64 = 1.0;

/// Depth priors and chained relative-pose priors for a frame sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorBundle {
    /// One inverse depth map per frame.
    pub depth_priors: Vec<InverseDepthMap>,
    /// `relative_poses[t]` maps camera `t` coordinates to camera `t + 1`.
    pub relative_poses: Vec<Pose>,
    pub base_index: usize,
    pub base_pose: Pose,
}

impl PriorBundle {
    /// Priors with `b = 0` and an identity base pose.
    pub fn new(depth_priors: Vec<InverseDepthMap>, relative_poses: Vec<Pose>) -> Result<Self> {
        let bundle = Self {
            depth_priors,
            relative_poses,
            base_index: 0,
            base_pose: Pose::identity(),
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.depth_priors.len();
        if n == 0 {
            return Err(Error::Config("priors cover no frames".into()));
        }
        if self.relative_poses.len() + 1 != n {
            return Err(Error::Config(format!(
                "{} relative poses for {} frames (expected {})",
                self.relative_poses.len(),
                n,
                n - 1
            )));
        }
        if self.base_index >= n {
            return Err(Error::Config(format!(
                "base index {} out of range for {} frames",
                self.base_index, n
            )));
        }
        Ok(())
    }

    pub fn num_frames(&self) -> usize {
        self.depth_priors.len()
    }

    /// Absolute world-to-camera poses for every frame.
    pub fn chained_poses(&self) -> Vec<Pose> {
        chain_poses(&self.relative_poses, self.base_index, self.base_pose)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    GeometryGuided,
    Naive,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometry_guided" => Ok(InitMode::GeometryGuided),
            "naive" => Ok(InitMode::Naive),
            other => Err(Error::Config(format!("unknown init mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for InitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitMode::GeometryGuided => "geometry_guided",
            InitMode::Naive => "naive",
        })
    }
}

/// How keyframes past the chain window are seeded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extrapolation {
    /// Repeat the last inter-keyframe relative motion.
    ConstantMotion,
    /// Copy the previous keyframe pose.
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InitPolicy {
    pub mode: InitMode,
    pub chain_limit: usize,
    pub extrapolation: Extrapolation,
}

impl Default for InitPolicy {
    fn default() -> Self {
        Self {
            mode: InitMode::GeometryGuided,
            chain_limit: 8,
            extrapolation: Extrapolation::ConstantMotion,
        }
    }
}

impl InitPolicy {
    pub fn naive() -> Self {
        Self {
            mode: InitMode::Naive,
            ..Self::default()
        }
    }

    pub fn geometry_guided() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.chain_limit < 2 {
            return Err(Error::Config(format!(
                "init.chain_limit must be >= 2 (got {})",
                self.chain_limit
            )));
        }
        Ok(())
    }
}

/// Chains relative motions outward from the base frame.
///
/// For `i > b`: `G_i = X^{i-1→i} ∘ … ∘ X^{b→b+1} ∘ G_b`; frames before the
/// base use the inverted relatives.
pub fn chain_poses(relatives: &[Pose], base_index: usize, base_pose: Pose) -> Vec<Pose> {
    let n = relatives.len() + 1;
    let mut poses = vec![Pose::identity(); n];
    poses[base_index] = base_pose;
    for i in (base_index + 1)..n {
        poses[i] = relatives[i - 1].compose(&poses[i - 1]);
    }
    for i in (0..base_index).rev() {
        poses[i] = relatives[i].inverse().compose(&poses[i + 1]);
    }
    poses
}

/// Bidirectional edges between all keyframes at most `window` apart.
pub fn build_keyframe_graph(num_keyframes: usize, window: usize) -> Result<KeyframeGraph> {
    if window == 0 {
        return Err(Error::Config("graph.window must be >= 1".into()));
    }
    let mut edges = Vec::new();
    for i in 0..num_keyframes {
        for j in 0..num_keyframes {
            if i != j && i.abs_diff(j) <= window {
                edges.push((i, j));
            }
        }
    }
    KeyframeGraph::new(num_keyframes, edges)
}

/// Greedy keyframe selection on prior flow magnitude.
///
/// Frame 0 is always a keyframe; frame `t` becomes one once the mean
/// displacement of the prior reprojection from the last keyframe reaches
/// `mean_flow_threshold`. The final frame is always included.
pub fn select_keyframes(
    priors: &PriorBundle,
    intrinsics: &CameraIntrinsics,
    mean_flow_threshold: f64,
) -> Result<Vec<usize>> {
    priors.validate()?;
    let poses = priors.chained_poses();
    let n = priors.num_frames();
    let mut keyframes = vec![0];
    let mut last = 0;
    for t in 1..n {
        let g = relative(&poses[last], &poses[t]);
        let flow = reproject_flow(intrinsics, &g, &priors.depth_priors[last])?;
        let mean = flow.mean_displacement().unwrap_or(f64::INFINITY);
        if mean >= mean_flow_threshold {
            keyframes.push(t);
            last = t;
        }
    }
    if last != n - 1 {
        keyframes.push(n - 1);
    }
    Ok(keyframes)
}

/// Seeds the optimizer state for the given keyframes.
pub fn initialize_state(
    priors: &PriorBundle,
    keyframes: &[usize],
    policy: &InitPolicy,
    intrinsics: &CameraIntrinsics,
) -> Result<BaState> {
    policy.validate()?;
    let n = priors.num_frames();
    if let Some(&bad) = keyframes.iter().find(|&&k| k >= n) {
        return Err(Error::Config(format!(
            "keyframe {bad} outside prior range of {n} frames"
        )));
    }
    let (w, h) = (intrinsics.width, intrinsics.height);

    match policy.mode {
        InitMode::Naive => BaState::new(
            vec![Pose::identity(); keyframes.len()],
            vec![InverseDepthMap::constant(w, h, NAIVE_INV_DEPTH); keyframes.len()],
            *intrinsics,
        ),
        InitMode::GeometryGuided => {
            priors.validate()?;
            let chained = priors.chained_poses();
            let mut poses: Vec<Pose> = Vec::with_capacity(keyframes.len());
            for (m, &frame) in keyframes.iter().enumerate() {
                let pose = if m < policy.chain_limit {
                    chained[frame]
                } else {
                    let prev = poses[m - 1];
                    match policy.extrapolation {
                        Extrapolation::Identity => prev,
                        Extrapolation::ConstantMotion => {
                            relative(&poses[m - 2], &prev).compose(&prev)
                        }
                    }
                };
                poses.push(pose);
            }
            let depths = keyframes
                .iter()
                .map(|&f| {
                    let d = priors.depth_priors[f].clone();
                    d.check_dims(w, h)?;
                    Ok(d)
                })
                .collect::<Result<Vec<_>>>()?;
            BaState::new(poses, depths, *intrinsics)
        }
    }
}
