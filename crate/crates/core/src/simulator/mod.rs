//! Synthetic event streams of a star field seen by a pinhole event camera.
//!
//! Each star is rendered as a pixel-integrated Gaussian spot on a constant
//! background. Pixel intensities are advanced on a 1 ms tick; a pixel fires
//! whenever its log intensity has moved by the contrast threshold since its
//! last event, with the crossing time interpolated inside the tick.

mod camera;
mod trajectory;

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::attitude::{AttitudeEstimate, Source};
use crate::catalog::Catalog;
use crate::earth::{EarthError, EarthModel, UtcInstant};
use crate::geometry::{UnitQuaternion, Vec3};
use crate::timesync::PpsAnchor;

pub use camera::{focal_length_for_speed, image_plane_speed, CameraModel};
pub use trajectory::{
    static_site_trajectory, FixedTrajectory, SpinTrajectory, StaticSiteTrajectory, Trajectory,
};

/// Internal simulation step.
pub const TICK_US: i64 = 1_000;
/// Ground-truth sampling rate.
pub const TRUTH_RATE_HZ: f64 = 20.0;

pub const EVENT_CSV_HEADER: &str = "t_us,x,y,p";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Earth(#[from] EarthError),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    /// Device clock, microseconds.
    pub t_us: i64,
    pub x: u16,
    pub y: u16,
    /// +1 or −1.
    pub p: i8,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Log-intensity step that triggers an event.
    pub contrast_threshold: f64,
    /// Gaussian PSF sigma, pixels.
    pub psf_sigma: f64,
    pub refractory_us: f64,
    /// Background events per pixel per second.
    pub noise_rate: f64,
    /// Total flux of a magnitude-0 star, in units of the per-pixel background.
    pub mag_zero_flux: f64,
    /// Per-pixel background flux.
    pub background: f64,
    pub seed: u64,
    /// Injected mount creep in declination, arcsec/hour.
    pub drift_dec_rate: f64,
    /// Device clock rate error, parts per million.
    pub clock_skew_ppm: f64,
    /// Device clock reading at the start of the simulation, microseconds.
    pub clock_offset_us: i64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            contrast_threshold: 0.4,
            psf_sigma: 0.8,
            refractory_us: 50.0,
            noise_rate: 2e-4,
            mag_zero_flux: 1.0e5,
            background: 1.0,
            seed: 0,
            drift_dec_rate: 0.0,
            clock_skew_ppm: 0.0,
            clock_offset_us: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let nonneg = [
            ("psf_sigma", self.psf_sigma),
            ("refractory_us", self.refractory_us),
            ("noise_rate", self.noise_rate),
            ("mag_zero_flux", self.mag_zero_flux),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SimError::InvalidArgument(format!("{name} = {v} must be nonnegative")));
            }
        }
        if !(self.contrast_threshold > 0.0 && self.contrast_threshold.is_finite()) {
            return Err(SimError::InvalidArgument("contrast_threshold must be positive".into()));
        }
        if !(self.background > 0.0 && self.background.is_finite()) {
            return Err(SimError::InvalidArgument("background must be positive".into()));
        }
        if !(self.psf_sigma > 0.0) {
            return Err(SimError::InvalidArgument("psf_sigma must be positive".into()));
        }
        if !(self.clock_skew_ppm.abs() < 1e5) || !self.drift_dec_rate.is_finite() {
            return Err(SimError::InvalidArgument("clock skew or drift out of range".into()));
        }
        Ok(())
    }

    /// Total flux of a star of magnitude `mag`.
    pub fn star_flux(&self, mag: f64) -> f64 {
        self.mag_zero_flux * 10f64.powf(-0.4 * mag)
    }

    /// Device clock reading `s` seconds after the simulation start.
    pub fn device_us(&self, s: f64) -> i64 {
        (self.clock_offset_us as f64 + s * 1e6 * (1.0 + self.clock_skew_ppm * 1e-6)).round() as i64
    }

    /// Spot half-width beyond which a star's contribution stays well under
    /// the contrast threshold.
    fn spot_radius(&self, flux: f64) -> f64 {
        let tol = 0.05 * self.contrast_threshold.exp_m1() * self.background;
        let ratio = flux / tol;
        if ratio <= 1.0 {
            return 0.5;
        }
        0.5 + self.psf_sigma * (2.0 * ratio.ln()).sqrt()
    }
}

#[derive(Clone, Debug, Default)]
pub struct SimOutput {
    pub events: Vec<Event>,
    pub pps: Vec<PpsAnchor>,
    pub truth: Vec<AttitudeEstimate>,
}

/// Adds the pixel-integrated Gaussian of one spot into `acc`, recording newly
/// touched pixels.
struct SpotRenderer {
    width: usize,
    height: usize,
    inv_sqrt2_sigma: f64,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

impl SpotRenderer {
    fn new(cam: &CameraModel, sigma: f64) -> Self {
        Self {
            width: cam.width as usize,
            height: cam.height as usize,
            inv_sqrt2_sigma: 1.0 / (std::f64::consts::SQRT_2 * sigma),
            gx: Vec::new(),
            gy: Vec::new(),
        }
    }

    fn weights(out: &mut Vec<f64>, c: f64, first: i64, n: usize, k: f64) {
        out.clear();
        let mut lo = libm::erf((first as f64 - 0.5 - c) * k);
        for i in 0..n {
            let hi = libm::erf((first as f64 + i as f64 + 0.5 - c) * k);
            out.push(0.5 * (hi - lo));
            lo = hi;
        }
    }

    fn render(&mut self, u: f64, v: f64, flux: f64, radius: f64, mut add: impl FnMut(usize, f64)) {
        let x0 = ((u - radius).round() as i64).max(0);
        let x1 = ((u + radius).round() as i64).min(self.width as i64 - 1);
        let y0 = ((v - radius).round() as i64).max(0);
        let y1 = ((v + radius).round() as i64).min(self.height as i64 - 1);
        if x1 < x0 || y1 < y0 {
            return;
        }
        let k = self.inv_sqrt2_sigma;
        Self::weights(&mut self.gx, u, x0, (x1 - x0 + 1) as usize, k);
        Self::weights(&mut self.gy, v, y0, (y1 - y0 + 1) as usize, k);
        for (j, gy) in self.gy.iter().enumerate() {
            let row = (y0 as usize + j) * self.width + x0 as usize;
            let fy = flux * gy;
            for (i, gx) in self.gx.iter().enumerate() {
                add(row + i, fy * gx);
            }
        }
    }
}

/// Noise-free star light above background per pixel (row-major), for spots
/// given as `(u, v, flux)`.
pub fn render_star_image(cam: &CameraModel, cfg: &SimConfig, spots: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut img = vec![0.0; cam.width as usize * cam.height as usize];
    let mut r = SpotRenderer::new(cam, cfg.psf_sigma);
    for &(u, v, flux) in spots {
        r.render(u, v, flux, cfg.spot_radius(flux), |i, f| img[i] += f);
    }
    img
}

struct Candidate {
    dir: Vec3,
    flux: f64,
    radius: f64,
}

/// Per-pixel event-generation state over the whole sensor.
struct PixelField {
    background: f64,
    up: f64,
    down: f64,
    acc: Vec<f64>,
    level: Vec<f64>,
    reference: Vec<f64>,
    last_event_s: Vec<f64>,
    mark: Vec<u32>,
    touched: Vec<u32>,
    previous: Vec<u32>,
    stamp: u32,
}

impl PixelField {
    fn new(n: usize, cfg: &SimConfig) -> Self {
        Self {
            background: cfg.background,
            up: cfg.contrast_threshold.exp(),
            down: (-cfg.contrast_threshold).exp(),
            acc: vec![0.0; n],
            level: vec![cfg.background; n],
            reference: vec![cfg.background; n],
            last_event_s: vec![f64::NEG_INFINITY; n],
            mark: vec![0; n],
            touched: Vec::new(),
            previous: Vec::new(),
            stamp: 0,
        }
    }

    fn begin_tick(&mut self) {
        std::mem::swap(&mut self.touched, &mut self.previous);
        self.touched.clear();
        self.stamp = self.stamp.wrapping_add(1);
    }

    fn add(&mut self, i: usize, f: f64) {
        if self.mark[i] != self.stamp {
            self.mark[i] = self.stamp;
            self.acc[i] = 0.0;
            self.touched.push(i as u32);
        }
        self.acc[i] += f;
    }

    /// Sets levels and references to the current image without emitting.
    fn settle(&mut self) {
        for &i in &self.touched {
            let i = i as usize;
            self.level[i] = self.background + self.acc[i];
            self.reference[i] = self.level[i];
        }
    }

    /// Compares this tick's image with the last one over `[t_prev, t_prev + dt]`.
    fn emit(&mut self, t_prev: f64, dt: f64, refractory_s: f64, width: usize, mut out: impl FnMut(f64, usize, usize, i8)) {
        // Pixels lit last tick but not this one fall back to background.
        for k in 0..self.previous.len() {
            let i = self.previous[k] as usize;
            if self.mark[i] != self.stamp {
                self.mark[i] = self.stamp;
                self.acc[i] = 0.0;
                self.touched.push(i as u32);
            }
        }
        for &i in &self.touched {
            let i = i as usize;
            let now = self.background + self.acc[i];
            let before = self.level[i];
            self.level[i] = now;
            if now == before {
                continue;
            }
            let mut crossing = |level: f64, reference: &mut f64, last: &mut f64, p: i8| {
                let frac = ((level / before).ln() / (now / before).ln()).clamp(0.0, 1.0);
                let t = t_prev + frac * dt;
                *reference = level;
                if t - *last >= refractory_s {
                    *last = t;
                    out(t, i % width, i / width, p);
                }
            };
            let reference = &mut self.reference[i];
            let last = &mut self.last_event_s[i];
            while now >= *reference * self.up {
                let level = *reference * self.up;
                crossing(level, reference, last, 1);
            }
            while now <= *reference * self.down {
                let level = *reference * self.down;
                crossing(level, reference, last, -1);
            }
        }
        // Pixels back at background no longer need revisiting.
        let acc = &self.acc;
        self.touched.retain(|&i| acc[i as usize] != 0.0);
    }
}

/// Renders the event stream seen along `traj` over `[t0, t0 + duration_s]`.
pub fn generate_events(
    traj: &dyn Trajectory,
    cat: &Catalog,
    cam: &CameraModel,
    cfg: &SimConfig,
    t0: UtcInstant,
    duration_s: f64,
) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(SimError::InvalidArgument(format!("duration {duration_s} must be positive")));
    }
    let (w, h) = (cam.width as usize, cam.height as usize);
    let dt = TICK_US as f64 * 1e-6;
    let n_ticks = (duration_s / dt).round() as i64;
    let refractory_s = cfg.refractory_us * 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = if cfg.noise_rate > 0.0 {
        Some(Poisson::new(cfg.noise_rate * (w * h) as f64 * dt).map_err(|e| SimError::InvalidArgument(e.to_string()))?)
    } else {
        None
    };

    let mut field = PixelField::new(w * h, cfg);
    let mut renderer = SpotRenderer::new(cam, cfg.psf_sigma);
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut events: Vec<Event> = Vec::new();
    let mut ever_visible = false;
    // Refresh the candidate list once per simulated second with a margin
    // wider than any star moves in that time.
    let refresh_ticks = 1_000_000 / TICK_US;
    let cone = cam.half_diagonal_fov() + 0.1f64.to_radians();

    for k in 0..=n_ticks {
        let s = k as f64 * dt;
        let q = traj.attitude_at(&t0.plus_seconds(s))?;
        if k % refresh_ticks == 0 {
            candidates = cat
                .cone(&q.rotate(&Vec3::z()), cone)
                .into_iter()
                .map(|i| {
                    let star = cat.stars()[i];
                    let flux = cfg.star_flux(star.mag);
                    Candidate {
                        dir: star.dir,
                        flux,
                        radius: cfg.spot_radius(flux),
                    }
                })
                .collect();
        }
        field.begin_tick();
        let inv = q.inverse();
        for c in &candidates {
            let Some((u, v)) = cam.project_camera(&inv.rotate(&c.dir)) else {
                continue;
            };
            if u < -c.radius || v < -c.radius || u > w as f64 + c.radius || v > h as f64 + c.radius {
                continue;
            }
            ever_visible |= cam.contains(u, v);
            renderer.render(u, v, c.flux, c.radius, |i, f| field.add(i, f));
        }
        if k == 0 {
            field.settle();
            continue;
        }
        let t_prev = s - dt;
        field.emit(t_prev, dt, refractory_s, w, |t, x, y, p| {
            events.push(Event {
                t_us: cfg.device_us(t),
                x: x as u16,
                y: y as u16,
                p,
            })
        });
        if let Some(noise) = &noise {
            let n = noise.sample(&mut rng) as usize;
            for _ in 0..n {
                let t = t_prev + rng.random::<f64>() * dt;
                events.push(Event {
                    t_us: cfg.device_us(t),
                    x: rng.random_range(0..w) as u16,
                    y: rng.random_range(0..h) as u16,
                    p: if rng.random::<bool>() { 1 } else { -1 },
                });
            }
        }
    }
    if !ever_visible {
        log::warn!("no catalog star entered the field of view; events are noise only");
    }
    events.sort_unstable_by_key(|e| (e.t_us, e.y, e.x, e.p));

    let pps = pps_anchors(cfg, t0, duration_s);
    let n_truth = (duration_s * TRUTH_RATE_HZ + 1e-9).floor() as usize;
    let truth = (0..=n_truth)
        .map(|k| {
            let t = t0.plus_seconds(k as f64 / TRUTH_RATE_HZ);
            Ok(AttitudeEstimate::new(t, traj.attitude_at(&t)?, Source::SimulatorTruth))
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SimOutput { events, pps, truth })
}

/// One anchor per whole UTC second inside `[t0, t0 + duration_s]`.
fn pps_anchors(cfg: &SimConfig, t0: UtcInstant, duration_s: f64) -> Vec<PpsAnchor> {
    let midnight = UtcInstant::new(t0.mjd_day(), 0.0).expect("midnight is valid");
    let first = t0.sec_of_day().ceil();
    let mut out = Vec::new();
    for n in 0.. {
        let t_utc = midnight.plus_seconds(first + n as f64);
        let s = t_utc.seconds_since(&t0);
        if s > duration_s + 1e-9 {
            break;
        }
        out.push(PpsAnchor {
            t_event_us: cfg.device_us(s),
            t_utc,
        });
    }
    out
}

/// Simulates a camera fixed to the ground, pointing at `cam0` at `t0`, with
/// any declination drift from `cfg`.
pub fn simulate_static_site<E: EarthModel + Sync>(
    cam0: UnitQuaternion,
    t0: UtcInstant,
    duration_s: f64,
    earth: &E,
    cat: &Catalog,
    cam: &CameraModel,
    cfg: &SimConfig,
) -> Result<SimOutput, SimError> {
    let traj = static_site_trajectory(cam0, t0, earth)?.with_dec_drift(cfg.drift_dec_rate)?;
    generate_events(&traj, cat, cam, cfg, t0, duration_s)
}

pub fn write_events_csv<W: Write>(events: &[Event], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{EVENT_CSV_HEADER}")?;
    for e in events {
        writeln!(out, "{},{},{},{}", e.t_us, e.x, e.y, e.p)?;
    }
    Ok(())
}

/// Reads an event CSV, checking time order and polarity.
pub fn read_events_csv<R: Read>(reader: R) -> Result<Vec<Event>, SimError> {
    let mut lines = BufReader::new(reader).lines();
    let perr = |line: usize, message: String| SimError::Parse { line, message };
    match lines.next() {
        Some(Ok(h)) if h.trim() == EVENT_CSV_HEADER => {}
        Some(Err(e)) => return Err(e.into()),
        _ => return Err(perr(1, format!("expected header {EVENT_CSV_HEADER}"))),
    }
    let mut out: Vec<Event> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let mut next = |name: &str| {
            it.next()
                .map(str::trim)
                .ok_or_else(|| perr(line_no, format!("missing field {name}")))
        };
        let t_us: i64 = next("t_us")?.parse().map_err(|_| perr(line_no, "t_us is not an integer".into()))?;
        let x: u16 = next("x")?.parse().map_err(|_| perr(line_no, "x is not a pixel index".into()))?;
        let y: u16 = next("y")?.parse().map_err(|_| perr(line_no, "y is not a pixel index".into()))?;
        let p: i8 = match next("p")? {
            "1" => 1,
            "-1" => -1,
            other => return Err(perr(line_no, format!("polarity must be 1 or -1, got {other:?}"))),
        };
        if it.next().is_some() {
            return Err(perr(line_no, "expected 4 fields".into()));
        }
        if out.last().is_some_and(|prev| prev.t_us > t_us) {
            return Err(perr(line_no, "events not sorted by t_us".into()));
        }
        out.push(Event { t_us, x, y, p });
    }
    Ok(out)
}
