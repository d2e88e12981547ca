//! Dense bundle adjustment over keyframe graphs, seeded from depth and
//! relative-pose priors.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: SE(3) poses, pinhole projection, reprojection flow.
//! - [`dba`]: weighted Gauss-Newton over poses and per-pixel inverse depths
//!   with Schur elimination of the depth block.
//! - [`init`]: pose chaining, keyframe selection and state initialization.
//! - [`priors`]: PFM / TUM loaders and depth scale alignment.
//! - [`photometric`]: image warping, SSIM and the photometric / smoothness losses.
//! - [`eval`]: trajectory alignment, ATE, depth metrics and failure classification.
//! - [`synth`]: synthetic scenes, flow revision providers and initialization ablations.

pub mod dba;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod init;
pub mod photometric;
pub mod priors;
pub mod synth;

pub use dba::{
    BaState, ConfidenceWeights, EdgeTarget, FlowRevisionProvider, KeyframeGraph, OptimizeReport,
    Revision, SolverConfig,
};
pub use error::{Error, Result};
pub use eval::{AlignmentMode, FailureReport, Trajectory};
pub use geometry::{CameraIntrinsics, DepthMap, FlowField, InverseDepthMap, Pose, Twist};
pub use init::{InitMode, InitPolicy, PriorBundle};
