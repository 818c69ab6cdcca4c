//! Pinhole camera without distortion.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, RigidPose};

/// Focal lengths and principal point in pixels, plus the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        }
    }

    /// Rejects non-positive focal lengths and principal points outside the image.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64)
        {
            return Err(GeometryError::InvalidCamera(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Projects a camera-frame point; the depth must be strictly positive.
    pub fn project_camera_point(&self, p_cam: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
        if p_cam.z <= 0.0 {
            return Err(GeometryError::NonPositiveDepth(p_cam.z));
        }
        Ok(Vector2::new(
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        ))
    }

    /// Unit bearing vector for a pixel.
    pub fn bearing(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) / self.fx,
            (pixel.y - self.cy) / self.fy,
            1.0,
        )
        .normalize()
    }

    pub fn contains_pixel(&self, pixel: &Vector2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x < self.width as f64
            && pixel.y < self.height as f64
    }
}

/// A posed pinhole camera; `pose` maps camera frame to world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub intrinsics: CameraIntrinsics,
    pub pose: RigidPose,
}

impl CameraModel {
    pub fn new(intrinsics: CameraIntrinsics, pose: RigidPose) -> Self {
        Self { intrinsics, pose }
    }

    /// Projects a world point into pixels.
    pub fn project(&self, p_world: &Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
        let p_cam = self.pose.inverse().transform_point(p_world);
        self.intrinsics.project_camera_point(&p_cam)
    }

    /// World-frame depth of a point along the camera's optical axis.
    pub fn depth_of(&self, p_world: &Vector3<f64>) -> f64 {
        self.pose.inverse().transform_point(p_world).z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, UnitQuaternion};

    const TOL: f64 = 1e-9;

    fn intrinsics() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480)
    }

    /// Oracle: projection through an explicitly assembled K [R|t] chain.
    fn reference_project(
        k: &CameraIntrinsics,
        cam_pose: &RigidPose,
        p_world: &Vector3<f64>,
    ) -> Vector2<f64> {
        let k_mat = Matrix3::new(k.fx, 0.0, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0);
        let r_wc = cam_pose.rotation_matrix().transpose();
        let t_wc = -(r_wc * cam_pose.translation);
        let p_cam = r_wc * p_world + t_wc;
        let h = k_mat * p_cam;
        Vector2::new(h.x / h.z, h.y / h.z)
    }

    #[test]
    fn point_on_axis_hits_principal_point() {
        let cam = CameraModel::new(intrinsics(), RigidPose::identity());
        let px = cam.project(&Vector3::new(0.0, 0.0, 2.0)).unwrap();
        assert_relative_eq!(px, Vector2::new(320.0, 240.0), epsilon = TOL);
    }

    #[test]
    fn unit_offset_at_unit_depth_lands_fx_right_of_center() {
        let cam = CameraModel::new(intrinsics(), RigidPose::identity());
        let px = cam.project(&Vector3::new(1.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(px, Vector2::new(820.0, 240.0), epsilon = TOL);
    }

    #[test]
    fn posed_camera_matches_reference_chain() {
        let pose = RigidPose::new(
            UnitQuaternion::from_euler_angles(0.2, -0.4, 0.9),
            Vector3::new(1.0, -2.0, 0.5),
        );
        let cam = CameraModel::new(intrinsics(), pose);
        for p in [
            Vector3::new(0.3, 0.1, 4.0),
            Vector3::new(-1.0, 2.0, 6.0),
            Vector3::new(2.5, -0.5, 3.0),
        ] {
            let got = cam.project(&p).unwrap();
            let want = reference_project(&intrinsics(), &pose, &p);
            assert_relative_eq!(got, want, epsilon = TOL);
        }
    }

    #[test]
    fn point_behind_camera_is_rejected() {
        let cam = CameraModel::new(intrinsics(), RigidPose::identity());
        match cam.project(&Vector3::new(0.0, 0.0, -1.0)) {
            Err(GeometryError::NonPositiveDepth(z)) => assert_eq!(z, -1.0),
            other => panic!("expected NonPositiveDepth, got {other:?}"),
        }
        assert!(cam.project(&Vector3::new(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn bearing_inverts_projection() {
        let k = intrinsics();
        let p_cam = Vector3::new(0.4, -0.2, 2.5);
        let px = k.project_camera_point(&p_cam).unwrap();
        let b = k.bearing(&px);
        assert_relative_eq!(b, p_cam.normalize(), epsilon = TOL);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        let mut k = intrinsics();
        k.fx = 0.0;
        assert!(k.validate().is_err());
        let mut k = intrinsics();
        k.cx = 640.0;
        assert!(k.validate().is_err());
        assert!(intrinsics().validate().is_ok());
    }

    #[test]
    fn pixel_bounds_are_half_open() {
        let k = intrinsics();
        assert!(k.contains_pixel(&Vector2::new(0.0, 0.0)));
        assert!(k.contains_pixel(&Vector2::new(639.99, 479.99)));
        assert!(!k.contains_pixel(&Vector2::new(640.0, 100.0)));
        assert!(!k.contains_pixel(&Vector2::new(-0.01, 100.0)));
    }
}
