use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3, Vector6};

use crate::{Error, Result};

/// Below this rotation angle the exp/log maps switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Log map refuses rotations within this margin of pi (covers 179.9999 deg).
const BRANCH_MARGIN: f64 = 1e-5;

/// Rigid transform stored as a unit quaternion and a translation.
///
/// Applying a pose to a point computes `R * p + t`. Keyframe poses in the
/// optimizer are world-to-camera maps; trajectories used for evaluation are
/// camera-to-world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

/// Tangent vector of SE(3): rotational part first, translational part second.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Twist {
    pub rotation: Vector3<f64>,
    pub translation: Vector3<f64>,
}

impl Twist {
    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            rotation: Vector3::new(v[0], v[1], v[2]),
            translation: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.rotation.x,
            self.rotation.y,
            self.rotation.z,
            self.translation.x,
            self.translation.y,
            self.translation.z,
        )
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// Skew-symmetric matrix such that `hat(a) * b == a.cross(&b)`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(UnitQuaternion::identity(), t)
    }

    /// Builds a pose from raw quaternion components, renormalizing them.
    pub fn from_components(w: f64, x: f64, y: f64, z: f64, translation: Vector3<f64>) -> Self {
        let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
        Self::new(q, translation)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose {
            rotation: r_inv,
            translation: -(r_inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        self.rotation.angle()
    }

    pub fn exp(xi: &Twist) -> Pose {
        se3_exp(xi)
    }

    pub fn log(&self) -> Result<Twist> {
        se3_log(self)
    }

    /// Retraction used by the optimizer: `self ∘ exp(xi)`.
    pub fn retract(&self, xi: &Twist) -> Pose {
        self.compose(&se3_exp(xi))
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

/// Relative transform `g_j ∘ g_i⁻¹` between two world-to-camera poses.
pub fn relative(g_i: &Pose, g_j: &Pose) -> Pose {
    g_j.compose(&g_i.inverse())
}

pub fn se3_exp(xi: &Twist) -> Pose {
    let omega = xi.rotation;
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let w = hat(&omega);
    let w2 = w * w;

    let (q, v) = if theta < SMALL_ANGLE {
        let q = Quaternion::new(1.0 - theta2 / 8.0, 0.0, 0.0, 0.0);
        let imag = omega * (0.5 - theta2 / 48.0);
        let q = Quaternion::new(q.w, imag.x, imag.y, imag.z);
        let v = Matrix3::identity() + w * 0.5 + w2 / 6.0;
        (q, v)
    } else {
        let half = 0.5 * theta;
        let imag = omega * (half.sin() / theta);
        let q = Quaternion::new(half.cos(), imag.x, imag.y, imag.z);
        let sin_half = half.sin();
        let v = Matrix3::identity()
            + w * (2.0 * sin_half * sin_half / theta2)
            + w2 * ((theta - theta.sin()) / (theta2 * theta));
        (q, v)
    };

    Pose {
        rotation: UnitQuaternion::from_quaternion(q),
        translation: v * xi.translation,
    }
}

pub fn se3_log(g: &Pose) -> Result<Twist> {
    let mut q = *g.rotation.quaternion();
    if q.w < 0.0 {
        q = -q;
    }
    let imag = q.imag();
    let s = imag.norm();
    let theta = 2.0 * s.atan2(q.w);
    if theta >= std::f64::consts::PI - BRANCH_MARGIN {
        return Err(Error::Domain { angle: theta });
    }

    let omega = if theta < SMALL_ANGLE {
        // 2 atan(s / w) / s ≈ (2 / w) (1 - s² / (3 w²))
        imag * (2.0 / q.w) * (1.0 - s * s / (3.0 * q.w * q.w))
    } else {
        imag * (theta / s)
    };

    let w = hat(&omega);
    let w2 = w * w;
    let v_inv = if theta < SMALL_ANGLE {
        Matrix3::identity() - w * 0.5 + w2 / 12.0
    } else {
        let half = 0.5 * theta;
        let coeff = (1.0 - half * half.cos() / half.sin()) / (theta * theta);
        Matrix3::identity() - w * 0.5 + w2 * coeff
    };

    Ok(Twist {
        rotation: omega,
        translation: v_inv * g.translation,
    })
}
