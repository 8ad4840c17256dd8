mod common;

use earthtruth::astrometry::{
    accumulate_frames, extract_centroids, plate_solve, solve_stream, BatchFrame, SolveConfig, SolveFailure,
    DEFAULT_WINDOW_US,
};
use earthtruth::catalog::TriangleIndex;
use earthtruth::geometry::{rad_to_arcsec, swing_twist_decompose, Vec3};
use earthtruth::simulator::{render_star_image, simulate_static_site, CameraModel, SimConfig};

#[test]
fn rendered_frame_centroids() {
    let cam = CameraModel::desk_telescope();
    let cfg = SimConfig::default();
    let spots = [(100.3, 200.7, 4000.0), (640.0, 360.0, 9000.0), (1001.55, 87.25, 2500.0)];
    let img = render_star_image(&cam, &cfg, &spots);
    let counts: Vec<u32> = img.iter().map(|f| (f * 0.1).floor() as u32).collect();
    let frame = BatchFrame::from_dense(0, 166_667, cam.width, cam.height, &counts);
    let cents = extract_centroids(&frame, 5.0, 3.0);
    assert_eq!(cents.len(), 3);
    for &(u, v, _) in &spots {
        let d = cents
            .iter()
            .map(|c| (c.u - u).hypot(c.v - v))
            .fold(f64::INFINITY, f64::min);
        assert!(d < 0.3, "centroid {d} px from ({u}, {v})");
    }
}

#[test]
fn noiseless_minute_solves() {
    let cam = CameraModel::desk_telescope();
    let cat = common::field();
    let cfg = SimConfig {
        noise_rate: 0.0,
        ..Default::default()
    };
    let sim = simulate_static_site(common::cam0(), common::t0(), 60.0, &common::eop(), &cat, &cam, &cfg).unwrap();
    let index = TriangleIndex::build(&cat, cam.diagonal_fov_deg(), 10.0).unwrap();
    let solve_cfg = SolveConfig::default();
    let out = solve_stream(&sim.events, &sim.pps, &index, &cat, &cam, &solve_cfg).unwrap();
    assert_eq!(out.frames, 359);
    assert!(out.success_rate() >= 0.95, "success {}", out.success_rate());
    let start = sim.truth[0].t;
    for e in &out.estimates {
        // nearest 20 Hz truth sample is at most 25 ms away
        let k = (e.t.seconds_since(&start) * 20.0).round() as usize;
        let err = sim.truth[k].q.inverse() * e.q;
        let across = rad_to_arcsec(swing_twist_decompose(&err, &Vec3::z()).unwrap().across);
        assert!(across < 10.0, "across {across}");
    }

    // Keep only the two heaviest blobs: never a wrong answer.
    let frames = accumulate_frames(&sim.events, cam.width, cam.height, DEFAULT_WINDOW_US);
    for f in frames.iter().step_by(20) {
        let cents = extract_centroids(f, solve_cfg.min_weight, solve_cfg.merge_radius_px);
        assert_eq!(
            plate_solve(&cents[..2.min(cents.len())], &index, &cat, &cam, &solve_cfg),
            Err(SolveFailure::InsufficientStars)
        );
    }

    let again = solve_stream(&sim.events, &sim.pps, &index, &cat, &cam, &solve_cfg).unwrap();
    assert_eq!(out.estimates, again.estimates);
    assert_eq!(out.failures, again.failures);
}
