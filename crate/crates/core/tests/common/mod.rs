#![allow(dead_code)]

use std::path::PathBuf;

use earthtruth::catalog::{synthetic_field, Catalog, FieldSpec};
use earthtruth::earth::{parse_finals2000a, EopTable, UtcInstant};
use earthtruth::geometry::{arcsec_to_rad, UnitQuaternion, Vec3};

pub const START: &str = "2024-11-02T03:00:00Z";
pub const RA0: f64 = 60.0;
pub const DEC0: f64 = 30.0;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn eop() -> EopTable {
    parse_finals2000a(&data_dir().join("finals2000A_2024q4.txt"))
        .expect("bundled EOP file")
        .table
}

pub fn t0() -> UtcInstant {
    UtcInstant::parse_iso8601(START).unwrap()
}

pub fn cam0() -> UnitQuaternion {
    UnitQuaternion::from_pointing(RA0, DEC0, 0.0).unwrap()
}

/// Dense synthetic field covering an hour of sidereal sweep from (RA0, DEC0).
pub fn field() -> Catalog {
    let spec = FieldSpec {
        ra_min_deg: RA0 - 3.0,
        ra_max_deg: RA0 + 20.0,
        dec_min_deg: DEC0 - 2.0,
        dec_max_deg: DEC0 + 2.0,
        density_per_deg2: 30.0,
        mag_min: 6.0,
        mag_max: 10.0,
        mag_slope: 0.3,
        first_id: 10_000_000,
    };
    Catalog::new(synthetic_field(&spec, 1), 10.0).unwrap()
}

/// `q` tilted by `arcsec` about a fixed axis perpendicular to the boresight.
pub fn tilted(q: UnitQuaternion, arcsec: f64) -> UnitQuaternion {
    let r = arcsec_to_rad(arcsec);
    q * UnitQuaternion::from_rotation_vector(&Vec3::new(0.6 * r, 0.8 * r, 0.0))
}
