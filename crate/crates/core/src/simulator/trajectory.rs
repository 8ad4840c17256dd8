use crate::earth::{EarthModel, UtcInstant};
use crate::geometry::{arcsec_to_rad, UnitQuaternion, Vec3};

use super::SimError;

/// Camera attitude in ICRF as a function of UTC.
pub trait Trajectory: Sync {
    fn attitude_at(&self, t: &UtcInstant) -> Result<UnitQuaternion, SimError>;
}

/// A fixed camera attitude, for tests and inertial scenes.
#[derive(Clone, Copy, Debug)]
pub struct FixedTrajectory(pub UnitQuaternion);

impl Trajectory for FixedTrajectory {
    fn attitude_at(&self, _t: &UtcInstant) -> Result<UnitQuaternion, SimError> {
        Ok(self.0)
    }
}

/// Constant body-rate rotation starting from `q0` at `t0`.
#[derive(Clone, Copy, Debug)]
pub struct SpinTrajectory {
    pub q0: UnitQuaternion,
    pub t0: UtcInstant,
    /// Body-frame rate, rad/s.
    pub rate: Vec3,
}

impl Trajectory for SpinTrajectory {
    fn attitude_at(&self, t: &UtcInstant) -> Result<UnitQuaternion, SimError> {
        let dt = t.seconds_since(&self.t0);
        Ok(self.q0 * UnitQuaternion::from_rotation_vector(&(self.rate * dt)))
    }
}

/// Camera bolted to the ground: `C(t) = E(t) · E(t0)⁻¹ · C(t0)`, optionally
/// with the mount creeping in declination at a constant rate.
#[derive(Clone, Debug)]
pub struct StaticSiteTrajectory<'a, E: EarthModel + Sync> {
    earth: &'a E,
    t0: UtcInstant,
    /// Camera frame in ITRF.
    mount: UnitQuaternion,
    /// ITRF axis about which declination drift turns the camera.
    drift_axis: Vec3,
    /// rad/s
    drift_rate: f64,
}

/// Static-site trajectory through `cam0` at `t0`.
pub fn static_site_trajectory<E: EarthModel + Sync>(
    cam0: UnitQuaternion,
    t0: UtcInstant,
    earth: &E,
) -> Result<StaticSiteTrajectory<'_, E>, SimError> {
    let e0 = earth.earth_attitude(&t0)?;
    let mount = e0.inverse() * cam0;
    Ok(StaticSiteTrajectory {
        earth,
        t0,
        mount,
        drift_axis: Vec3::zeros(),
        drift_rate: 0.0,
    })
}

impl<'a, E: EarthModel + Sync> StaticSiteTrajectory<'a, E> {
    /// Adds a declination drift in arcsec/hour; positive moves the boresight
    /// toward the north pole.
    pub fn with_dec_drift(mut self, arcsec_per_hour: f64) -> Result<Self, SimError> {
        if arcsec_per_hour == 0.0 {
            self.drift_rate = 0.0;
            return Ok(self);
        }
        let b = self.mount.rotate(&Vec3::z());
        let axis = b.cross(&Vec3::z());
        if axis.norm() < 1e-9 {
            return Err(SimError::InvalidArgument(
                "declination drift undefined with the boresight on the pole".into(),
            ));
        }
        self.drift_axis = axis.normalize();
        self.drift_rate = arcsec_to_rad(arcsec_per_hour) / 3600.0;
        Ok(self)
    }

    /// Camera frame in ITRF at t0.
    pub fn mount(&self) -> UnitQuaternion {
        self.mount
    }

    pub fn t0(&self) -> UtcInstant {
        self.t0
    }
}

impl<E: EarthModel + Sync> Trajectory for StaticSiteTrajectory<'_, E> {
    fn attitude_at(&self, t: &UtcInstant) -> Result<UnitQuaternion, SimError> {
        let e = self.earth.earth_attitude(t)?;
        if self.drift_rate == 0.0 {
            return Ok(e * self.mount);
        }
        let angle = self.drift_rate * t.seconds_since(&self.t0);
        let drift = UnitQuaternion::from_axis_angle(&self.drift_axis, angle)
            .expect("normalized axis");
        Ok(e * drift * self.mount)
    }
}
