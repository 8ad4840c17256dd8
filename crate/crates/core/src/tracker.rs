//! Event-driven multiplicative EKF on SO(3).
//!
//! The error state is `[δθ, δω]`: a body-frame attitude error with
//! `q_true = q ⊗ exp(δθ)` and a body-rate error. Positive events are gated to
//! the nearest predicted star; every `min_batch` matched events of one star
//! give a two-pixel measurement update from their mean offset.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix6, SMatrix, SymmetricEigen, Vector2, Vector6};
use thiserror::Error;

use crate::attitude::{AttitudeEstimate, Source};
use crate::catalog::Catalog;
use crate::geometry::{arcsec_to_rad, skew, UnitQuaternion, Vec3};
use crate::simulator::{CameraModel, Event};
use crate::timesync::{PpsAnchor, TimeMap, TimeSyncError};

type Matrix2x6 = SMatrix<f64, 2, 6>;
type Matrix6x2 = SMatrix<f64, 6, 2>;

/// Most negative covariance eigenvalue tolerated before flooring.
pub const PSD_TOLERANCE: f64 = -1e-12;

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("no catalog star in the initial field of view; an initial attitude with stars in view is required")]
    LostInSpace,
    #[error("event at {t_us} µs precedes filter time {state_us} µs")]
    Ordering { t_us: i64, state_us: i64 },
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    TimeSync(#[from] TimeSyncError),
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Smallest association gate, pixels.
    pub gate_radius: f64,
    /// The gate widens to this many predicted position sigmas when the
    /// attitude is uncertain.
    pub gate_sigmas: f64,
    /// rad²/s
    pub process_noise_attitude: f64,
    /// rad²/s³
    pub process_noise_rate: f64,
    /// Variance of one batch centroid, px².
    pub measurement_noise: f64,
    /// Hz
    pub output_rate: f64,
    /// Positive events per star update.
    pub min_batch: usize,
    pub prior_attitude_sigma_arcsec: f64,
    /// rad/s
    pub prior_rate_sigma: f64,
    /// How often the set of tracked stars is refreshed, µs.
    pub refresh_us: i64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            gate_radius: 3.0,
            gate_sigmas: 3.0,
            process_noise_attitude: 1e-14,
            process_noise_rate: 1e-18,
            measurement_noise: 0.25,
            output_rate: 20.0,
            min_batch: 8,
            prior_attitude_sigma_arcsec: 30.0,
            prior_rate_sigma: 1e-4,
            refresh_us: 500_000,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        let positive = [
            ("gate_radius", self.gate_radius),
            ("gate_sigmas", self.gate_sigmas),
            ("process_noise_attitude", self.process_noise_attitude),
            ("process_noise_rate", self.process_noise_rate),
            ("measurement_noise", self.measurement_noise),
            ("output_rate", self.output_rate),
            ("prior_attitude_sigma_arcsec", self.prior_attitude_sigma_arcsec),
            ("prior_rate_sigma", self.prior_rate_sigma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TrackerError::InvalidConfig(format!("{name} = {v} must be positive")));
            }
        }
        if self.output_rate > 1000.0 {
            return Err(TrackerError::InvalidConfig("output_rate must be at most 1000 Hz".into()));
        }
        if self.min_batch == 0 || self.refresh_us <= 0 {
            return Err(TrackerError::InvalidConfig("min_batch and refresh_us must be positive".into()));
        }
        Ok(())
    }

    fn prior(&self) -> Matrix6<f64> {
        let a = arcsec_to_rad(self.prior_attitude_sigma_arcsec).powi(2);
        let r = self.prior_rate_sigma.powi(2);
        Matrix6::from_diagonal(&Vector6::new(a, a, a, r, r, r))
    }
}

/// Association state of one tracked star.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    pub star_id: u32,
    pub dir: Vec3,
    pub mag: f64,
    pub last_match_us: Option<i64>,
    /// Positive events matched since the last update: (t_us, x, y).
    pub batch: Vec<(i64, f64, f64)>,
}

impl Track {
    fn new(star_id: u32, dir: Vec3, mag: f64) -> Self {
        Self {
            star_id,
            dir,
            mag,
            last_match_us: None,
            batch: Vec::new(),
        }
    }

    /// Centroid `(u, v, t_us)` of the batch after discarding events farther
    /// than `radius` from the median offset to the predicted star track.
    /// `None` when fewer than half the events survive.
    pub fn centroid(&self, state: &EkfState, cam: &CameraModel, radius: f64) -> Option<(f64, f64, f64)> {
        let offsets: Vec<(f64, f64)> = self
            .batch
            .iter()
            .map(|&(t, x, y)| {
                let (u, v) = cam.project(&state.attitude_at(t as f64), &self.dir)?;
                Some((x - u, y - v))
            })
            .collect::<Option<_>>()?;
        let median = |mut xs: Vec<f64>| {
            xs.sort_by(f64::total_cmp);
            let n = xs.len();
            if n % 2 == 1 {
                xs[n / 2]
            } else {
                0.5 * (xs[n / 2 - 1] + xs[n / 2])
            }
        };
        let mu = median(offsets.iter().map(|o| o.0).collect());
        let mv = median(offsets.iter().map(|o| o.1).collect());
        let (mut su, mut sv, mut st, mut n) = (0.0, 0.0, 0.0, 0usize);
        let t0 = self.batch[0].0;
        for (&(t, x, y), &(du, dv)) in self.batch.iter().zip(&offsets) {
            if (du - mu).hypot(dv - mv) <= radius {
                su += x;
                sv += y;
                st += (t - t0) as f64;
                n += 1;
            }
        }
        if 2 * n < self.batch.len() || n == 0 {
            return None;
        }
        let n = n as f64;
        Some((su / n, sv / n, t0 as f64 + st / n))
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackerStats {
    pub events: u64,
    pub matched: u64,
    pub updates: u64,
    /// Batches dropped because their events disagreed.
    pub rejected_batches: u64,
    /// Smallest covariance eigenvalue seen before flooring.
    pub min_eigenvalue: f64,
    /// Updates whose covariance fell below [`PSD_TOLERANCE`].
    pub psd_violations: u64,
}

#[derive(Clone, Debug)]
pub struct EkfState {
    pub q: UnitQuaternion,
    /// Body-frame angular rate, rad/s.
    pub w: Vec3,
    pub p: Matrix6<f64>,
    pub t_us: i64,
    /// Tracked stars, ordered by id.
    pub tracks: Vec<Track>,
    pub cfg: TrackerConfig,
    pub stats: TrackerStats,
    last_refresh_us: i64,
}

impl EkfState {
    /// 3×3 attitude-error covariance, rad².
    pub fn attitude_covariance(&self) -> Matrix3<f64> {
        self.p.fixed_view::<3, 3>(0, 0).into_owned()
    }

    /// Predicted pixel position of a tracked star under the current attitude.
    pub fn predicted(&self, track: &Track, cam: &CameraModel) -> Option<(f64, f64)> {
        cam.project(&self.q, &track.dir)
    }

    /// Attitude at an earlier device time, propagated back at the current rate.
    pub fn attitude_at(&self, t_us: f64) -> UnitQuaternion {
        let dt = (t_us - self.t_us as f64) * 1e-6;
        self.q * UnitQuaternion::from_rotation_vector(&(self.w * dt))
    }

    /// Effective association gate, pixels.
    pub fn gate(&self, cam: &CameraModel) -> f64 {
        let sigma_px = cam.focal_px() * (self.p[(0, 0)] + self.p[(1, 1)]).max(0.0).sqrt();
        self.cfg.gate_radius.max(self.cfg.gate_sigmas * sigma_px)
    }
}

/// Tracked stars for attitude `q`: catalog stars projecting inside the sensor
/// or within `margin` pixels of its edge.
fn select_stars(cat: &Catalog, cam: &CameraModel, q: &UnitQuaternion, margin: f64) -> Vec<(u32, Vec3, f64)> {
    let radius = cam.half_diagonal_fov() + margin / cam.focal_px();
    let mut out: Vec<(u32, Vec3, f64)> = cat
        .cone(&q.rotate(&Vec3::z()), radius)
        .into_iter()
        .filter_map(|i| {
            let s = cat.stars()[i];
            let (u, v) = cam.project(q, &s.dir)?;
            let inside = u >= -margin
                && v >= -margin
                && u < cam.width as f64 + margin
                && v < cam.height as f64 + margin;
            inside.then_some((s.id, s.dir, s.mag))
        })
        .collect();
    out.sort_by_key(|s| s.0);
    out
}

pub fn ekf_init(
    cat: &Catalog,
    cam: &CameraModel,
    q0: UnitQuaternion,
    cfg: &TrackerConfig,
    t0_us: i64,
) -> Result<EkfState, TrackerError> {
    cfg.validate()?;
    if cat.stars_in_fov(&q0, cam).is_empty() {
        return Err(TrackerError::LostInSpace);
    }
    let mut state = EkfState {
        q: q0,
        w: Vec3::zeros(),
        p: cfg.prior(),
        t_us: t0_us,
        tracks: Vec::new(),
        cfg: cfg.clone(),
        stats: TrackerStats {
            min_eigenvalue: f64::INFINITY,
            ..Default::default()
        },
        last_refresh_us: t0_us,
    };
    refresh_tracks(&mut state, cat, cam);
    Ok(state)
}

fn refresh_tracks(state: &mut EkfState, cat: &Catalog, cam: &CameraModel) {
    let margin = state.gate(cam);
    let selected = select_stars(cat, cam, &state.q, margin);
    let mut old = std::mem::take(&mut state.tracks).into_iter().peekable();
    for (id, dir, mag) in selected {
        while old.peek().is_some_and(|t| t.star_id < id) {
            old.next();
        }
        match old.peek() {
            Some(t) if t.star_id == id => state.tracks.push(old.next().expect("peeked")),
            _ => state.tracks.push(Track::new(id, dir, mag)),
        }
    }
    state.last_refresh_us = state.t_us;
}

/// Propagates attitude and covariance to `t_us` at the current rate.
pub fn ekf_predict(state: &mut EkfState, t_us: i64) {
    let dt = (t_us - state.t_us) as f64 * 1e-6;
    if dt <= 0.0 {
        return;
    }
    let step = UnitQuaternion::from_rotation_vector(&(state.w * dt));
    state.q = state.q * step;
    let mut f = Matrix6::identity();
    f.fixed_view_mut::<3, 3>(0, 0).copy_from(&step.to_matrix().transpose());
    f.fixed_view_mut::<3, 3>(0, 3).copy_from(&(Matrix3::identity() * dt));
    let (qa, qr) = (state.cfg.process_noise_attitude, state.cfg.process_noise_rate);
    let mut qd = Matrix6::zeros();
    let i3 = Matrix3::<f64>::identity();
    qd.fixed_view_mut::<3, 3>(0, 0).copy_from(&(i3 * (qa * dt + qr * dt.powi(3) / 3.0)));
    qd.fixed_view_mut::<3, 3>(0, 3).copy_from(&(i3 * (qr * dt * dt / 2.0)));
    qd.fixed_view_mut::<3, 3>(3, 0).copy_from(&(i3 * (qr * dt * dt / 2.0)));
    qd.fixed_view_mut::<3, 3>(3, 3).copy_from(&(i3 * (qr * dt)));
    state.p = f * state.p * f.transpose() + qd;
    state.t_us = t_us;
}

/// Jacobian of a star's pixel position with respect to the error state.
fn measurement_jacobian(cam: &CameraModel, c: &Vec3) -> Matrix2x6 {
    let k = cam.focal_px();
    let j = Matrix2x3::new(
        k / c.z,
        0.0,
        -k * c.x / (c.z * c.z),
        0.0,
        k / c.z,
        -k * c.y / (c.z * c.z),
    );
    let mut h = Matrix2x6::zeros();
    h.fixed_view_mut::<2, 3>(0, 0).copy_from(&(j * skew(c)));
    h
}

/// Kalman update from the centroid `z` of star `dir` observed at device time
/// `t_us` (at or before the filter time), Joseph form.
pub fn ekf_update(state: &mut EkfState, cam: &CameraModel, dir: &Vec3, z: (f64, f64), t_us: f64) {
    let c = state.attitude_at(t_us).inverse().rotate(dir);
    let Some((u, v)) = cam.project_camera(&c) else {
        return;
    };
    let y = Vector2::new(z.0 - u, z.1 - v);
    let h = measurement_jacobian(cam, &c);
    let r = Matrix2::identity() * state.cfg.measurement_noise;
    let s = h * state.p * h.transpose() + r;
    let Some(s_inv) = s.try_inverse() else {
        return;
    };
    let k: Matrix6x2 = state.p * h.transpose() * s_inv;
    let dx = k * y;
    state.q = state.q * UnitQuaternion::from_rotation_vector(&Vec3::new(dx[0], dx[1], dx[2]));
    state.w += Vec3::new(dx[3], dx[4], dx[5]);
    let ikh = Matrix6::identity() - k * h;
    let p = ikh * state.p * ikh.transpose() + k * r * k.transpose();
    state.p = condition_covariance(&p, &mut state.stats);
    state.stats.updates += 1;
}

/// Symmetrizes and floors negative eigenvalues at zero.
fn condition_covariance(p: &Matrix6<f64>, stats: &mut TrackerStats) -> Matrix6<f64> {
    let sym = (p + p.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    stats.min_eigenvalue = stats.min_eigenvalue.min(min);
    if min >= 0.0 {
        return sym;
    }
    if min < PSD_TOLERANCE {
        stats.psd_violations += 1;
        log::warn!("covariance eigenvalue {min:e} below tolerance");
    }
    let floored = eig.eigenvalues.map(|l| l.max(0.0));
    let v = eig.eigenvectors;
    let out = v * Matrix6::from_diagonal(&floored) * v.transpose();
    (out + out.transpose()) * 0.5
}

/// Feeds one event: predicts to its time, associates positive events with the
/// nearest tracked star inside the gate (ties go to the brighter star) and
/// updates once that star's batch is full.
pub fn ekf_process_event(
    state: &mut EkfState,
    e: &Event,
    cam: &CameraModel,
    cat: &Catalog,
) -> Result<(), TrackerError> {
    if e.t_us < state.t_us {
        return Err(TrackerError::Ordering {
            t_us: e.t_us,
            state_us: state.t_us,
        });
    }
    ekf_predict(state, e.t_us);
    state.stats.events += 1;
    if e.t_us - state.last_refresh_us >= state.cfg.refresh_us {
        refresh_tracks(state, cat, cam);
    }
    if e.p < 0 {
        return Ok(());
    }
    let gate = state.gate(cam);
    let rt = state.q.inverse().to_matrix();
    let (ex, ey) = (e.x as f64, e.y as f64);
    let mut best: Option<(usize, f64)> = None;
    for (i, t) in state.tracks.iter().enumerate() {
        let Some((u, v)) = cam.project_camera(&(rt * t.dir)) else {
            continue;
        };
        let d = (ex - u).hypot(ey - v);
        if d > gate {
            continue;
        }
        let better = match best {
            None => true,
            Some((j, bd)) => {
                d < bd - 1e-9 || ((d - bd).abs() <= 1e-9 && t.mag < state.tracks[j].mag)
            }
        };
        if better {
            best = Some((i, d));
        }
    }
    let Some((i, _)) = best else {
        return Ok(());
    };
    state.stats.matched += 1;
    let track = &mut state.tracks[i];
    track.last_match_us = Some(e.t_us);
    track.batch.push((e.t_us, ex, ey));
    if track.batch.len() >= state.cfg.min_batch {
        let track = &state.tracks[i];
        let centroid = track.centroid(state, cam, state.cfg.gate_radius);
        let dir = track.dir;
        state.tracks[i].batch.clear();
        if let Some((u, v, t)) = centroid {
            ekf_update(state, cam, &dir, (u, v), t);
        } else {
            state.stats.rejected_batches += 1;
        }
    }
    Ok(())
}

fn estimate(state: &EkfState, map: &TimeMap) -> AttitudeEstimate {
    AttitudeEstimate {
        t: map.to_utc(state.t_us),
        q: state.q,
        source: Source::Ekf,
        cov: Some(state.attitude_covariance()),
    }
}

/// Result of [`track_stream`].
#[derive(Clone, Debug)]
pub struct TrackOutput {
    pub estimates: Vec<AttitudeEstimate>,
    pub stats: TrackerStats,
}

/// Tracks a whole stream from `q0`, emitting at `cfg.output_rate` on the
/// device clock from the start of the stream (the earlier of the first event
/// and the first PPS anchor) to its end.
pub fn track_stream(
    events: &[Event],
    pps: &[PpsAnchor],
    cat: &Catalog,
    cam: &CameraModel,
    cfg: &TrackerConfig,
    q0: UnitQuaternion,
) -> Result<TrackOutput, TrackerError> {
    let map = TimeMap::new(pps.to_vec())?;
    let first_pps = pps[0].t_event_us;
    let last_pps = pps[pps.len() - 1].t_event_us;
    let start = events.first().map_or(first_pps, |e| e.t_us.min(first_pps));
    let end = events.last().map_or(last_pps, |e| e.t_us.max(last_pps));
    let mut state = ekf_init(cat, cam, q0, cfg, start)?;
    let period_us = 1e6 / cfg.output_rate;
    let tick = |k: u64| start + (k as f64 * period_us).round() as i64;

    let mut estimates = Vec::new();
    let mut k = 0u64;
    for e in events {
        while tick(k) < e.t_us && tick(k) <= end {
            ekf_predict(&mut state, tick(k));
            estimates.push(estimate(&state, &map));
            k += 1;
        }
        ekf_process_event(&mut state, e, cam, cat)?;
    }
    while tick(k) <= end {
        ekf_predict(&mut state, tick(k));
        estimates.push(estimate(&state, &map));
        k += 1;
    }
    Ok(TrackOutput {
        estimates,
        stats: state.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Star;
    use crate::geometry::{angular_separation, rad_to_arcsec, SkyCoord};
    use crate::earth::UtcInstant;

    fn cam() -> CameraModel {
        CameraModel::desk_telescope()
    }

    fn field(q: &UnitQuaternion) -> Catalog {
        let c = cam();
        let pix = [(640.0, 360.0, 5.0), (200.0, 100.0, 6.0), (1000.0, 600.0, 7.0), (900.0, 150.0, 6.5)];
        let stars = pix
            .iter()
            .enumerate()
            .map(|(i, &(u, v, mag))| Star {
                id: i as u32 + 1,
                dir: c.unproject(q, u, v),
                mag,
            })
            .collect();
        Catalog::new(stars, 10.0).unwrap()
    }

    fn q0() -> UnitQuaternion {
        UnitQuaternion::from_pointing(60.0, 30.0, 0.0).unwrap()
    }

    fn tight() -> TrackerConfig {
        TrackerConfig {
            prior_attitude_sigma_arcsec: 0.1,
            prior_rate_sigma: 1e-9,
            min_batch: 1,
            ..Default::default()
        }
    }

    #[test]
    fn init_emits_q0_and_prior() {
        let q = q0();
        let cat = field(&q);
        let cfg = TrackerConfig::default();
        let s = ekf_init(&cat, &cam(), q, &cfg, 0).unwrap();
        assert_eq!(s.q, q);
        assert_eq!(s.tracks.len(), 4);
        let a = arcsec_to_rad(30.0).powi(2);
        assert!((s.p.trace() - (3.0 * a + 3.0 * 1e-8)).abs() < 1e-20);
        let pps: Vec<PpsAnchor> = (0..3)
            .map(|i| PpsAnchor {
                t_event_us: i * 1_000_000,
                t_utc: UtcInstant::new(60_616, 100.0 + i as f64).unwrap(),
            })
            .collect();
        let out = track_stream(&[], &pps, &cat, &cam(), &cfg, q).unwrap();
        assert_eq!(out.estimates.len(), 41);
        assert!(out.estimates.iter().all(|e| e.q == q));
        assert_eq!(out.estimates[0].t, UtcInstant::new(60_616, 100.0).unwrap());
    }

    #[test]
    fn empty_fov_is_lost_in_space() {
        let cat = field(&q0());
        let away = UnitQuaternion::from_pointing(240.0, -30.0, 0.0).unwrap();
        assert!(matches!(
            ekf_init(&cat, &cam(), away, &TrackerConfig::default(), 0),
            Err(TrackerError::LostInSpace)
        ));
    }

    #[test]
    fn predict_zero_dt_is_identity() {
        let cat = field(&q0());
        let mut s = ekf_init(&cat, &cam(), q0(), &TrackerConfig::default(), 10).unwrap();
        s.w = Vec3::new(1e-5, 2e-5, 3e-5);
        let before = s.clone();
        ekf_predict(&mut s, 10);
        assert_eq!(s.q, before.q);
        assert_eq!(s.p, before.p);
    }

    #[test]
    fn predict_sidereal_hour() {
        let cat = field(&q0());
        let mut s = ekf_init(&cat, &cam(), q0(), &TrackerConfig::default(), 0).unwrap();
        let rate = (15.04f64 / 3600.0).to_radians();
        s.w = s.q.inverse().rotate(&Vec3::z()) * rate;
        let q_start = s.q;
        ekf_predict(&mut s, 3_600_000_000);
        let delta = s.q * q_start.inverse();
        assert!((delta.angle() - 15.04f64.to_radians()).abs() < 1e-9);
        let axis = delta.vector().normalize();
        assert!((axis - Vec3::z()).norm() < 1e-9);
    }

    #[test]
    fn predict_grows_covariance() {
        let cat = field(&q0());
        let mut s = ekf_init(&cat, &cam(), q0(), &TrackerConfig::default(), 0).unwrap();
        let mut trace = s.p.trace();
        for t in [1, 10, 1000, 1_000_000] {
            ekf_predict(&mut s, t);
            assert!(s.p.trace() > trace);
            trace = s.p.trace();
        }
    }

    #[test]
    fn event_on_prediction_leaves_attitude() {
        let q = q0();
        let cat = field(&q);
        let mut s = ekf_init(&cat, &cam(), q, &tight(), 0).unwrap();
        let trace = s.p.trace();
        ekf_process_event(&mut s, &Event { t_us: 0, x: 640, y: 360, p: 1 }, &cam(), &cat).unwrap();
        assert_eq!(s.stats.updates, 1);
        assert!(s.q.angle_to(&q) < 1e-15);
        assert!(s.p.trace() < trace);
    }

    #[test]
    fn far_event_is_skipped() {
        let q = q0();
        let cat = field(&q);
        let mut s = ekf_init(&cat, &cam(), q, &tight(), 0).unwrap();
        let gate = s.gate(&cam());
        assert_eq!(gate, 3.0);
        let e = Event {
            t_us: 5,
            x: (640.0 + 2.0 * gate) as u16,
            y: 360,
            p: 1,
        };
        ekf_process_event(&mut s, &e, &cam(), &cat).unwrap();
        assert_eq!(s.stats.matched, 0);
        assert_eq!(s.q, q);
        assert!(ekf_process_event(&mut s, &Event { t_us: 4, ..e }, &cam(), &cat).is_err());
    }

    #[test]
    fn negative_events_only_advance_time() {
        let q = q0();
        let cat = field(&q);
        let mut s = ekf_init(&cat, &cam(), q, &tight(), 0).unwrap();
        ekf_process_event(&mut s, &Event { t_us: 9, x: 641, y: 360, p: -1 }, &cam(), &cat).unwrap();
        assert_eq!(s.t_us, 9);
        assert_eq!(s.stats.matched, 0);
    }

    #[test]
    fn tie_goes_to_brighter_star() {
        let c = cam();
        let q = q0();
        // two stars 4 px either side of pixel 400
        let stars = vec![
            Star { id: 1, dir: c.unproject(&q, 396.0, 300.0), mag: 8.0 },
            Star { id: 2, dir: c.unproject(&q, 404.0, 300.0), mag: 5.0 },
        ];
        let cat = Catalog::new(stars, 10.0).unwrap();
        let cfg = TrackerConfig {
            gate_radius: 5.0,
            min_batch: 100,
            ..tight()
        };
        let mut s = ekf_init(&cat, &c, q, &cfg, 0).unwrap();
        ekf_process_event(&mut s, &Event { t_us: 0, x: 400, y: 300, p: 1 }, &c, &cat).unwrap();
        let hit: Vec<u32> = s.tracks.iter().filter(|t| t.batch.len() == 1).map(|t| t.star_id).collect();
        assert_eq!(hit, vec![2]);
    }

    #[test]
    fn update_reduces_residual() {
        let q = q0();
        let cat = field(&q);
        let c = cam();
        let cfg = TrackerConfig {
            prior_attitude_sigma_arcsec: 10.0,
            ..tight()
        };
        let mut s = ekf_init(&cat, &c, q, &cfg, 0).unwrap();
        let star = cat.stars()[1];
        let (u0, v0) = c.project(&s.q, &star.dir).unwrap();
        let (zu, zv) = (u0.round() + 2.0, v0.round() - 1.0);
        let before = (zu - u0).hypot(zv - v0);
        ekf_process_event(&mut s, &Event { t_us: 0, x: zu as u16, y: zv as u16, p: 1 }, &c, &cat).unwrap();
        let (u1, v1) = c.project(&s.q, &star.dir).unwrap();
        let after = (zu - u1).hypot(zv - v1);
        assert!(after < before, "{after} >= {before}");
        assert_eq!(s.stats.psd_violations, 0);
    }

    #[test]
    fn converges_on_static_synthetic_events() {
        // Events sampled exactly at the star positions of a slowly spinning
        // camera; the filter starts 20″ off and at zero rate.
        let c = cam();
        let truth0 = q0();
        let rate = Vec3::new(2e-5, -6e-5, 1e-5);
        let cat = field(&truth0);
        let tilt = UnitQuaternion::from_rotation_vector(&Vec3::new(arcsec_to_rad(20.0), 0.0, 0.0));
        let mut s = ekf_init(&cat, &c, truth0 * tilt, &TrackerConfig { min_batch: 4, ..Default::default() }, 0).unwrap();
        let mut t = 0i64;
        while t < 20_000_000 {
            let qt = truth0 * UnitQuaternion::from_rotation_vector(&(rate * (t as f64 * 1e-6)));
            for st in cat.stars() {
                let (u, v) = c.project(&qt, &st.dir).unwrap();
                if let Some((x, y)) = c.pixel_of(u, v) {
                    ekf_process_event(&mut s, &Event { t_us: t, x, y, p: 1 }, &c, &cat).unwrap();
                }
            }
            t += 5_000;
        }
        let qt = truth0 * UnitQuaternion::from_rotation_vector(&(rate * (t as f64 * 1e-6)));
        ekf_predict(&mut s, t);
        let b = s.q.rotate(&Vec3::z());
        let err = rad_to_arcsec(angular_separation(&b, &qt.rotate(&Vec3::z())));
        assert!(err < 1.0, "boresight error {err}″");
        assert!((s.w - rate).norm() < 1e-6);
        assert_eq!(s.stats.psd_violations, 0);
        let _ = SkyCoord::from_unit(&b);
    }
}
