//! Rigid-body geometry, pinhole cameras and reprojection flow.

mod camera;
mod flow;
mod maps;
mod se3;

pub use camera::{backproject, project, CameraIntrinsics, PixelGrid};
pub(crate) use camera::{project_unchecked, ray as camera_ray};
pub use camera::BOUNDS_EPS;
pub use flow::{reproject_flow, reproject_pixel, FlowField};
pub use maps::{DepthMap, InverseDepthMap};
pub use se3::{hat, relative, se3_exp, se3_log, Pose, Twist, SMALL_ANGLE};

/// Smallest transformed depth accepted as "in front of the camera".
pub const MIN_DEPTH: f64 = 1e-8;
