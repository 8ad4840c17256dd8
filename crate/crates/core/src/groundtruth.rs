//! Ground truth from Earth orientation: the camera is assumed bolted to the
//! ground, so its ITRF attitude is fixed once anchored at one instant.

use crate::attitude::{AttitudeEstimate, Source};
use crate::earth::{EarthError, EarthModel, UtcInstant};
use crate::geometry::UnitQuaternion;

/// Camera frame expressed in ITRF.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MountTransform {
    pub q_mount: UnitQuaternion,
}

/// `q_mount = earth0⁻¹ ∘ cam0`.
pub fn virtual_telescope(earth0: &UnitQuaternion, cam0: &UnitQuaternion) -> MountTransform {
    MountTransform {
        q_mount: earth0.inverse() * *cam0,
    }
}

/// Anchors the mount on `est[anchor]`.
pub fn anchor_mount<E: EarthModel>(
    earth: &E,
    est: &[AttitudeEstimate],
    anchor: usize,
) -> Result<(MountTransform, UtcInstant), GroundTruthError> {
    let a = est.get(anchor).ok_or(GroundTruthError::AnchorOutOfRange {
        anchor,
        len: est.len(),
    })?;
    let e0 = earth.earth_attitude(&a.t)?;
    Ok((virtual_telescope(&e0, &a.q), a.t))
}

#[derive(Debug, thiserror::Error)]
pub enum GroundTruthError {
    #[error("anchor index {anchor} outside estimate series of length {len}")]
    AnchorOutOfRange { anchor: usize, len: usize },
    #[error(transparent)]
    Earth(#[from] EarthError),
}

/// `G(t) = earth_attitude(t) ∘ q_mount` at each time.
pub fn gt_series<E: EarthModel>(
    earth: &E,
    mount: &MountTransform,
    times: &[UtcInstant],
) -> Result<Vec<AttitudeEstimate>, EarthError> {
    times
        .iter()
        .map(|t| {
            let e = earth.earth_attitude(t)?;
            Ok(AttitudeEstimate::new(*t, e * mount.q_mount, Source::GroundTruth))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::earth::{EopRecord, EopTable};
    use crate::geometry::{angular_separation, Vec3};
    use proptest::prelude::*;

    fn table() -> EopTable {
        EopTable::new(
            (0..3)
                .map(|i| EopRecord {
                    mjd_utc: 60_616.0 + i as f64,
                    pm_x: 0.15 + 0.01 * i as f64,
                    pm_y: 0.3,
                    ut1_utc: 0.04 - 0.0005 * i as f64,
                    dx_mas: 0.2,
                    dy_mas: -0.1,
                })
                .collect(),
        )
        .unwrap()
    }

    fn quat(r: [f64; 3]) -> UnitQuaternion {
        UnitQuaternion::from_rotation_vector(&Vec3::from(r))
    }

    #[test]
    fn trivial_anchors() {
        let cam0 = UnitQuaternion::from_pointing(10.0, 20.0, 30.0).unwrap();
        assert!(virtual_telescope(&UnitQuaternion::identity(), &cam0).q_mount.angle_to(&cam0) < 1e-15);
        assert!(virtual_telescope(&cam0, &cam0).q_mount.angle() < 1e-15);
    }

    proptest! {
        #[test]
        fn composition(a in prop::array::uniform3(-3.0..3.0f64), b in prop::array::uniform3(-3.0..3.0f64)) {
            let (e0, c0) = (quat(a), quat(b));
            let m = virtual_telescope(&e0, &c0);
            prop_assert!((e0 * m.q_mount).angle_to(&c0) < 1e-12);
        }

        #[test]
        fn relative_motion_independent_of_camera(a in prop::array::uniform3(-3.0..3.0f64), b in prop::array::uniform3(-3.0..3.0f64)) {
            let eop = table();
            let t0 = UtcInstant::new(60_617, 3600.0).unwrap();
            let t1 = t0.plus_seconds(1234.5);
            let e0 = eop.earth_attitude(&t0).unwrap();
            let rel = |c: UnitQuaternion| {
                let g = gt_series(&eop, &virtual_telescope(&e0, &c), &[t0, t1]).unwrap();
                // Earth motion seen in ICRF: G(t1) ∘ G(t0)⁻¹
                g[1].q * g[0].q.inverse()
            };
            prop_assert!(rel(quat(a)).angle_to(&rel(quat(b))) < 1e-12);
        }
    }

    #[test]
    fn anchor_exact_and_hour_sweep() {
        let eop = table();
        let t0 = UtcInstant::new(60_617, 7200.0).unwrap();
        let cam0 = UnitQuaternion::from_pointing(75.0, 0.0, 12.0).unwrap();
        let mount = virtual_telescope(&eop.earth_attitude(&t0).unwrap(), &cam0);
        let g = gt_series(&eop, &mount, &[t0, t0.plus_seconds(3600.0)]).unwrap();
        assert!(g[0].q.angle_to(&cam0) < 1e-12);
        assert_eq!(g[0].source, Source::GroundTruth);
        let sweep = angular_separation(&g[0].q.rotate(&Vec3::z()), &g[1].q.rotate(&Vec3::z())).to_degrees();
        assert!((sweep - 15.04).abs() < 0.01, "{sweep}");
    }

    #[test]
    fn anchor_index_checked() {
        let eop = table();
        assert!(matches!(
            anchor_mount(&eop, &[], 0),
            Err(GroundTruthError::AnchorOutOfRange { anchor: 0, len: 0 })
        ));
        let t = UtcInstant::new(60_630, 0.0).unwrap();
        assert!(gt_series(&eop, &MountTransform { q_mount: UnitQuaternion::identity() }, &[t]).is_err());
    }
}
