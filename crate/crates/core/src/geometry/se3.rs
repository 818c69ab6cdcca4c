//! Rigid transforms as unit quaternion + translation.
//!
//! Working directly on the quaternion keeps composition chains well
//! conditioned; the rotation matrix is only materialized where projection
//! needs it. `compose` renormalizes so long chains cannot drift off the unit
//! sphere.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// A rigid transform (rotation followed by translation), in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl RigidPose {
    /// The identity transform.
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Pose from a `[w, x, y, z]` quaternion (normalized here) and a translation.
    pub fn from_wxyz(wxyz: [f64; 4], translation: [f64; 3]) -> Self {
        let q = nalgebra::Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        // Components written by `rotation_wxyz` are unit up to roundoff;
        // renormalizing those would perturb them and break save/load
        // round-trips, so only clean up inputs that are meaningfully off.
        let rotation = if (q.norm_squared() - 1.0).abs() <= 1e-9 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        Self {
            rotation,
            translation: Vector3::new(translation[0], translation[1], translation[2]),
        }
    }

    /// Rotation as `[w, x, y, z]`.
    pub fn rotation_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn translation_xyz(&self) -> [f64; 3] {
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ]
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        let rotation = UnitQuaternion::from_quaternion(
            (self.rotation.into_inner() * other.rotation.into_inner()).normalize(),
        );
        RigidPose {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let inv_rot = self.rotation.inverse();
        RigidPose {
            rotation: inv_rot,
            translation: -(inv_rot * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Geodesic angle in radians between the two rotations.
    ///
    /// Uses atan2 on the relative quaternion so differences near identity are
    /// resolved to machine precision; acos on the scalar part loses half the
    /// significant digits exactly where pose checks need them.
    pub fn rotation_angle_to(&self, other: &RigidPose) -> f64 {
        quaternion_angle(&self.rotation, &other.rotation)
    }

    pub fn translation_distance_to(&self, other: &RigidPose) -> f64 {
        (self.translation - other.translation).norm()
    }
}

/// Geodesic angle in radians between two unit quaternions, double cover folded.
pub(crate) fn quaternion_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let d = a.inverse() * b;
    let q = d.quaternion();
    let vec_norm = Vector3::new(q.i, q.j, q.k).norm();
    2.0 * vec_norm.atan2(q.w.abs())
}
