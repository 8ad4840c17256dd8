use crate::geometry::{rad_to_arcsec, UnitQuaternion, Vec3};

use super::SimError;

/// Pinhole camera. Pixel `(x, y)` is centred on coordinate `(x, y)`; the camera
/// frame has +z along the boresight, +x along increasing `u` and +y along
/// increasing `v`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CameraModel {
    /// Meters.
    pub focal_length: f64,
    /// Meters.
    pub pixel_pitch: f64,
    pub width: u32,
    pub height: u32,
    pub cx: f64,
    pub cy: f64,
}

impl CameraModel {
    /// Camera with the principal point at the sensor centre.
    pub fn new(focal_length: f64, pixel_pitch: f64, width: u32, height: u32) -> Result<Self, SimError> {
        Self::with_principal_point(
            focal_length,
            pixel_pitch,
            width,
            height,
            width as f64 / 2.0,
            height as f64 / 2.0,
        )
    }

    pub fn with_principal_point(
        focal_length: f64,
        pixel_pitch: f64,
        width: u32,
        height: u32,
        cx: f64,
        cy: f64,
    ) -> Result<Self, SimError> {
        if !(focal_length > 0.0 && focal_length.is_finite()) {
            return Err(SimError::InvalidArgument(format!("focal length {focal_length} must be positive")));
        }
        if !(pixel_pitch > 0.0 && pixel_pitch.is_finite()) {
            return Err(SimError::InvalidArgument(format!("pixel pitch {pixel_pitch} must be positive")));
        }
        if width == 0 || height == 0 {
            return Err(SimError::InvalidArgument("sensor must have nonzero size".into()));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(SimError::InvalidArgument("principal point must be finite".into()));
        }
        Ok(Self {
            focal_length,
            pixel_pitch,
            width,
            height,
            cx,
            cy,
        })
    }

    /// 1280×720, 4.86 µm pixels behind a 400 mm lens.
    pub fn desk_telescope() -> Self {
        Self::new(0.4, 4.86e-6, 1280, 720).expect("valid constants")
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        self.focal_length / self.pixel_pitch
    }

    pub fn pixel_scale_arcsec(&self) -> f64 {
        rad_to_arcsec((self.pixel_pitch / self.focal_length).atan())
    }

    /// Full field of view (horizontal, vertical) in degrees.
    pub fn fov_deg(&self) -> (f64, f64) {
        let half = |n: u32| (n as f64 * self.pixel_pitch / (2.0 * self.focal_length)).atan();
        (2.0 * half(self.width).to_degrees(), 2.0 * half(self.height).to_degrees())
    }

    /// Largest angle between the boresight and any sensor corner, radians.
    pub fn half_diagonal_fov(&self) -> f64 {
        let dx = self.cx.max(self.width as f64 - self.cx);
        let dy = self.cy.max(self.height as f64 - self.cy);
        (dx.hypot(dy) / self.focal_px()).atan()
    }

    /// Full diagonal field of view in degrees.
    pub fn diagonal_fov_deg(&self) -> f64 {
        let w = self.width as f64 * self.pixel_pitch;
        let h = self.height as f64 * self.pixel_pitch;
        2.0 * (w.hypot(h) / (2.0 * self.focal_length)).atan().to_degrees()
    }

    /// Projects a camera-frame direction; `None` when behind the camera.
    pub fn project_camera(&self, c: &Vec3) -> Option<(f64, f64)> {
        if c.z <= 0.0 {
            return None;
        }
        let k = self.focal_px();
        Some((self.cx + k * c.x / c.z, self.cy + k * c.y / c.z))
    }

    /// Projects an ICRF direction seen from `attitude`.
    pub fn project(&self, attitude: &UnitQuaternion, dir: &Vec3) -> Option<(f64, f64)> {
        self.project_camera(&attitude.inverse().rotate(dir))
    }

    /// Unit camera-frame ray through pixel coordinate `(u, v)`.
    pub fn unproject_camera(&self, u: f64, v: f64) -> Vec3 {
        let k = self.focal_px();
        Vec3::new((u - self.cx) / k, (v - self.cy) / k, 1.0).normalize()
    }

    pub fn unproject(&self, attitude: &UnitQuaternion, u: f64, v: f64) -> Vec3 {
        attitude.rotate(&self.unproject_camera(u, v))
    }

    /// Whether `(u, v)` lies in `[0, width) × [0, height)`.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        (0.0..self.width as f64).contains(&u) && (0.0..self.height as f64).contains(&v)
    }

    /// Pixel holding coordinate `(u, v)`, if on the sensor.
    pub fn pixel_of(&self, u: f64, v: f64) -> Option<(u16, u16)> {
        let (x, y) = (u.round(), v.round());
        (x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64)
            .then_some((x as u16, y as u16))
    }
}

/// Star speed on the image plane, px/s: `f·tan(s)/x` with `s` the angle swept
/// in one second (degrees) and `f`, `x` in meters.
pub fn image_plane_speed(f: f64, s_deg_per_s: f64, x: f64) -> f64 {
    f * s_deg_per_s.to_radians().tan() / x
}

/// Focal length giving image-plane speed `p` px/s, inverse of [`image_plane_speed`].
pub fn focal_length_for_speed(p: f64, s_deg_per_s: f64, x: f64) -> Result<f64, SimError> {
    if s_deg_per_s == 0.0 {
        return Err(SimError::InvalidArgument("angular speed must be nonzero".into()));
    }
    if !(x > 0.0) || p < 0.0 {
        return Err(SimError::InvalidArgument(format!("invalid speed {p} or pitch {x}")));
    }
    Ok(p * x / s_deg_per_s.to_radians().tan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::arcsec_to_rad;
    use proptest::prelude::*;

    #[test]
    fn boresight_hits_principal_point() {
        let cam = CameraModel::desk_telescope();
        let q = UnitQuaternion::from_pointing(68.0, 23.0, 17.0).unwrap();
        let (u, v) = cam.project(&q, &q.rotate(&Vec3::z())).unwrap();
        assert!((u - 640.0).abs() < 1e-9 && (v - 360.0).abs() < 1e-9);
    }

    #[test]
    fn one_pixel_scale_offset() {
        let cam = CameraModel::desk_telescope();
        let a = arcsec_to_rad(2.52);
        let c = Vec3::new(a.sin(), 0.0, a.cos());
        let (u, v) = cam.project_camera(&c).unwrap();
        assert!((u - 640.0 - 1.0).abs() < 0.01, "offset {}", u - 640.0);
        assert_eq!(v, 360.0);
    }

    #[test]
    fn behind_camera() {
        let cam = CameraModel::desk_telescope();
        assert!(cam.project_camera(&Vec3::new(1.0, 0.0, 0.0)).is_none());
        assert!(cam.project_camera(&Vec3::new(0.0, 0.0, -1.0)).is_none());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(CameraModel::new(0.0, 1e-6, 10, 10).is_err());
        assert!(CameraModel::new(0.1, -1e-6, 10, 10).is_err());
        assert!(CameraModel::new(0.1, 1e-6, 0, 10).is_err());
    }

    #[test]
    fn speeds_and_focal_lengths() {
        let x = 4.86e-6;
        assert!((image_plane_speed(0.035, 15.0 / 3600.0, x) - 0.52).abs() < 0.005);
        assert!((image_plane_speed(0.035, 1.8, x) - 226.32).abs() < 0.005);
        assert_eq!(image_plane_speed(0.2, 0.0, x), 0.0);
        assert!((focal_length_for_speed(226.32, 15.0 / 3600.0, x).unwrap() - 15.125).abs() < 0.001);
        assert!((focal_length_for_speed(0.52, 15.0 / 3600.0, x).unwrap() - 0.035).abs() < 0.0005);
        assert!(focal_length_for_speed(1.0, 0.0, x).is_err());
    }

    proptest! {
        #[test]
        fn project_unproject_round_trip(u in 0.0..1280.0f64, v in 0.0..720.0f64,
                                        ra in 0.0..360.0f64, dec in -85.0..85.0f64, roll in -180.0..180.0f64) {
            let cam = CameraModel::desk_telescope();
            let q = UnitQuaternion::from_pointing(ra, dec, roll).unwrap();
            let d = cam.unproject(&q, u, v);
            let (u2, v2) = cam.project(&q, &d).unwrap();
            prop_assert!((u - u2).abs() < 1e-6 && (v - v2).abs() < 1e-6);
        }

        #[test]
        fn speed_inverse(f in 0.01..20.0f64, s in 1e-4..2.0f64) {
            let p = image_plane_speed(f, s, 4.86e-6);
            let f2 = focal_length_for_speed(p, s, 4.86e-6).unwrap();
            prop_assert!(((f2 - f) / f).abs() < 1e-12);
        }
    }
}
