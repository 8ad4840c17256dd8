mod common;

use earthtruth::catalog::{Catalog, Star};
use earthtruth::evaluate::fit_line;
use earthtruth::geometry::{UnitQuaternion, Vec3};
use earthtruth::simulator::{generate_events, image_plane_speed, CameraModel, SimConfig, SpinTrajectory};

fn quiet() -> SimConfig {
    SimConfig {
        noise_rate: 0.0,
        ..Default::default()
    }
}

#[test]
fn slow_star_centroid_velocity() {
    let cam = CameraModel::desk_telescope();
    let q0 = UnitQuaternion::from_pointing(100.0, 20.0, 0.0).unwrap();
    let speed = image_plane_speed(0.035, 15.0 / 3600.0, 4.86e-6);
    assert!((speed - 0.52).abs() < 0.005);
    // start left of centre, drift along +u
    let star = Star {
        id: 1,
        dir: cam.unproject(&q0, cam.cx - 15.0, cam.cy),
        mag: 6.0,
    };
    let cat = Catalog::new(vec![star], 10.0).unwrap();
    let traj = SpinTrajectory {
        q0,
        t0: common::t0(),
        rate: Vec3::new(0.0, -speed / cam.focal_px(), 0.0),
    };
    let out = generate_events(&traj, &cat, &cam, &quiet(), common::t0(), 60.0).unwrap();
    let (mut ts, mut us) = (Vec::new(), Vec::new());
    for sec in 0..60i64 {
        let (mut su, mut n) = (0.0, 0);
        for e in out.events.iter().filter(|e| e.p > 0 && e.t_us / 1_000_000 == sec) {
            su += e.x as f64;
            n += 1;
        }
        if n > 0 {
            ts.push(sec as f64 + 0.5);
            us.push(su / n as f64);
        }
    }
    assert!(ts.len() > 50, "only {} seconds with events", ts.len());
    let fit = fit_line(&ts, &us).unwrap();
    assert!((fit.rate - 0.52).abs() < 0.05, "centroid speed {} px/s", fit.rate);
}

#[test]
fn event_rate_grows_with_star_count() {
    let cam = CameraModel::desk_telescope();
    let q0 = UnitQuaternion::from_pointing(100.0, 20.0, 0.0).unwrap();
    let spots = [(300.0, 200.0), (700.0, 500.0), (1000.0, 150.0), (500.0, 600.0)];
    let traj = SpinTrajectory {
        q0,
        t0: common::t0(),
        rate: Vec3::new(0.0, -5.0 / cam.focal_px(), 0.0),
    };
    let mut counts = Vec::new();
    for n in 1..=spots.len() {
        let stars = spots[..n]
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| Star {
                id: i as u32 + 1,
                dir: cam.unproject(&q0, u, v),
                mag: 7.0,
            })
            .collect();
        let cat = Catalog::new(stars, 10.0).unwrap();
        let out = generate_events(&traj, &cat, &cam, &quiet(), common::t0(), 2.0).unwrap();
        counts.push(out.events.len());
    }
    assert!(counts.windows(2).all(|w| w[0] < w[1]), "{counts:?}");
}
