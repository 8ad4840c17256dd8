use std::f64::consts::TAU;

use crate::geometry::{arcsec_to_rad, UnitQuaternion, Vec3};

use super::{EarthError, EopRecord, EopTable, UtcInstant, SECONDS_PER_DAY};

/// ERA at J2000.0 UT1, in revolutions.
const ERA_AT_J2000: f64 = 0.779_057_273_264_0;
/// Excess of the ERA rate over one revolution per UT1 day.
const ERA_EXCESS_RATE: f64 = 0.002_737_811_911_354_48;
/// MJD of JD 2451545.0.
const J2000_MJD_DAY: i64 = 51_544;

pub const ERA_RATE_DEG_PER_DAY: f64 = 360.0 * (1.0 + ERA_EXCESS_RATE);

/// Earth Rotation Angle in `[0, 2π)` at UTC instant `t` given UT1 − UTC.
pub fn era(t: &UtcInstant, ut1_utc: f64) -> f64 {
    // Tu = whole_days + day_fraction, split so the integer part never enters
    // the fractional-revolution sum with its full magnitude.
    let whole_days = (t.mjd_day() - J2000_MJD_DAY) as f64 - 0.5;
    let day_fraction = (t.sec_of_day() + ut1_utc) / SECONDS_PER_DAY;
    let tu = whole_days + day_fraction;
    let mut rev = (whole_days.rem_euclid(1.0)
        + day_fraction.rem_euclid(1.0)
        + ERA_AT_J2000
        + ERA_EXCESS_RATE * tu)
        .rem_euclid(1.0);
    if rev >= 1.0 {
        rev -= 1.0;
    }
    TAU * rev
}

fn axis_rotation(axis: Vec3, angle: f64) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle(&axis, angle).expect("coordinate axes are unit vectors")
}

/// ITRF-in-ICRF attitude from one set of parameters: polar motion, then the
/// ERA spin about the pole, then the celestial-pole offset tilt.
pub fn attitude_from_record(t: &UtcInstant, rec: &EopRecord) -> UnitQuaternion {
    let xp = arcsec_to_rad(rec.pm_x);
    let yp = arcsec_to_rad(rec.pm_y);
    let dx = arcsec_to_rad(rec.dx_mas * 1e-3);
    let dy = arcsec_to_rad(rec.dy_mas * 1e-3);

    let polar = axis_rotation(Vec3::y(), -xp) * axis_rotation(Vec3::x(), -yp);
    let spin = axis_rotation(Vec3::z(), era(t, rec.ut1_utc));
    let pole_offset = axis_rotation(Vec3::x(), -dy) * axis_rotation(Vec3::y(), dx);
    pole_offset * spin * polar
}

/// Source of the Earth's attitude (ITRF in ICRF) at UTC instants.
///
/// The EOP-table implementation omits the precession-nutation series; every
/// consumer goes through this trait so a fuller model can replace it.
pub trait EarthModel {
    fn earth_attitude(&self, t: &UtcInstant) -> Result<UnitQuaternion, EarthError>;
}

impl EarthModel for EopTable {
    fn earth_attitude(&self, t: &UtcInstant) -> Result<UnitQuaternion, EarthError> {
        let rec = self.eop_at(t)?;
        Ok(attitude_from_record(t, &rec))
    }
}
