//! Error series and summary statistics of an estimate series against
//! ground truth.

use std::io::Write;

use crate::attitude::AttitudeEstimate;
use crate::earth::UtcInstant;
use crate::geometry::{rad_to_arcsec, swing_twist_decompose, GeometryError, SkyCoord, UnitQuaternion, Vec3};

pub const ERROR_CSV_HEADER: &str = "utc_iso8601,ra_err_as,dec_err_as,roll_err_as,across_as,about_as";

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no estimate lies within {max_dt} s of a ground-truth sample")]
    EmptyAlignment { max_dt: f64 },
    #[error("no samples to summarize")]
    NoSamples,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Errors in arcseconds; `q_err = gt⁻¹ ∘ est`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSample {
    pub t: UtcInstant,
    /// RA difference of the boresights scaled by cos(dec of truth).
    pub ra_err: f64,
    pub dec_err: f64,
    pub roll_err: f64,
    pub across: f64,
    pub about: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pair {
    pub est: usize,
    pub gt: usize,
    /// `t_gt − t_est`, seconds.
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub pairs: Vec<Pair>,
    pub dropped: usize,
}

/// Pairs each estimate with the nearest ground-truth sample within `max_dt`
/// seconds. Ties go to the earlier sample.
pub fn align_series(
    est: &[AttitudeEstimate],
    gt: &[AttitudeEstimate],
    max_dt: f64,
) -> Result<Alignment, EvalError> {
    let mut pairs = Vec::with_capacity(est.len());
    let mut dropped = 0;
    for (i, e) in est.iter().enumerate() {
        let k = gt.partition_point(|g| g.t < e.t);
        let mut best: Option<Pair> = None;
        for j in [k.wrapping_sub(1), k] {
            let Some(g) = gt.get(j) else {
                continue;
            };
            let dt = g.t.seconds_since(&e.t);
            if best.is_none_or(|b| dt.abs() < b.dt.abs()) {
                best = Some(Pair { est: i, gt: j, dt });
            }
        }
        match best {
            Some(p) if p.dt.abs() <= max_dt => pairs.push(p),
            _ => dropped += 1,
        }
    }
    if pairs.is_empty() {
        return Err(EvalError::EmptyAlignment { max_dt });
    }
    Ok(Alignment { pairs, dropped })
}

/// Error of `est_q` relative to `gt_q`, decomposed about `boresight`
/// (camera frame).
pub fn error_sample(
    t: UtcInstant,
    est_q: &UnitQuaternion,
    gt_q: &UnitQuaternion,
    boresight: &Vec3,
) -> Result<ErrorSample, EvalError> {
    let q_err = gt_q.inverse() * *est_q;
    let st = swing_twist_decompose(&q_err, boresight)?;
    let se = SkyCoord::from_unit(&est_q.rotate(boresight));
    let sg = SkyCoord::from_unit(&gt_q.rotate(boresight));
    let dra = (se.ra_deg - sg.ra_deg + 180.0).rem_euclid(360.0) - 180.0;
    let about = rad_to_arcsec(st.about);
    Ok(ErrorSample {
        t,
        ra_err: dra * 3600.0 * sg.dec_deg.to_radians().cos(),
        dec_err: (se.dec_deg - sg.dec_deg) * 3600.0,
        roll_err: about,
        across: rad_to_arcsec(st.across),
        about,
    })
}

/// Error samples for every aligned pair, boresight along camera +z.
pub fn error_series(
    est: &[AttitudeEstimate],
    gt: &[AttitudeEstimate],
    alignment: &Alignment,
) -> Result<Vec<ErrorSample>, EvalError> {
    alignment
        .pairs
        .iter()
        .map(|p| error_sample(est[p.est].t, &est[p.est].q, &gt[p.gt].q, &Vec3::z()))
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AxisStats {
    pub mean: f64,
    pub max_abs: f64,
    pub rmse: f64,
}

impl AxisStats {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count() as f64;
        let mut s = AxisStats::default();
        for v in values {
            s.mean += v;
            s.rmse += v * v;
            s.max_abs = s.max_abs.max(v.abs());
        }
        s.mean /= n;
        s.rmse = (s.rmse / n).sqrt();
        s
    }
}

/// Least-squares line through dec error against time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftFit {
    /// arcsec/hour
    pub rate: f64,
    /// arcsec, at the first sample
    pub intercept: f64,
    pub residual_rms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub samples: usize,
    pub rmse_across: f64,
    pub rmse_about: f64,
    pub ra: AxisStats,
    pub dec: AxisStats,
    pub roll: AxisStats,
    pub across: AxisStats,
    /// `None` with fewer than two samples.
    pub dec_drift: Option<DriftFit>,
    /// Astrometry only: solved frames over total frames.
    pub solve_success_rate: Option<f64>,
}

pub fn fit_line(ts: &[f64], ys: &[f64]) -> Option<DriftFit> {
    let n = ts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mt = ts.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut stt, mut sty) = (0.0, 0.0);
    for (t, y) in ts.iter().zip(ys) {
        stt += (t - mt) * (t - mt);
        sty += (t - mt) * (y - my);
    }
    if stt == 0.0 {
        return None;
    }
    let rate = sty / stt;
    let intercept = my - rate * mt;
    let ss: f64 = ts
        .iter()
        .zip(ys)
        .map(|(t, y)| (y - intercept - rate * t).powi(2))
        .sum();
    Some(DriftFit {
        rate,
        intercept,
        residual_rms: (ss / nf).sqrt(),
    })
}

/// Summary over samples inside `window` (inclusive), or all samples.
pub fn summarize(samples: &[ErrorSample], window: Option<(UtcInstant, UtcInstant)>) -> Result<Report, EvalError> {
    let sel: Vec<&ErrorSample> = samples
        .iter()
        .filter(|s| window.is_none_or(|(a, b)| s.t >= a && s.t <= b))
        .collect();
    let Some(first) = sel.first() else {
        return Err(EvalError::NoSamples);
    };
    let t0 = first.t;
    let hours: Vec<f64> = sel.iter().map(|s| s.t.seconds_since(&t0) / 3600.0).collect();
    let decs: Vec<f64> = sel.iter().map(|s| s.dec_err).collect();
    let it = sel.iter();
    let across = AxisStats::of(it.clone().map(|s| s.across));
    let roll = AxisStats::of(it.clone().map(|s| s.roll_err));
    Ok(Report {
        samples: sel.len(),
        rmse_across: across.rmse,
        rmse_about: AxisStats::of(it.clone().map(|s| s.about)).rmse,
        ra: AxisStats::of(it.clone().map(|s| s.ra_err)),
        dec: AxisStats::of(it.clone().map(|s| s.dec_err)),
        roll,
        across,
        dec_drift: fit_line(&hours, &decs),
        solve_success_rate: None,
    })
}

pub fn write_error_csv<W: Write>(samples: &[ErrorSample], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{ERROR_CSV_HEADER}")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.t.to_iso8601(),
            s.ra_err,
            s.dec_err,
            s.roll_err,
            s.across,
            s.about
        )?;
    }
    Ok(())
}

impl Report {
    /// Ordered (key, value) pairs; missing values are empty strings.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut f = vec![
            ("samples", self.samples.to_string()),
            ("rmse_across_as", self.rmse_across.to_string()),
            ("rmse_about_as", self.rmse_about.to_string()),
        ];
        for (name, s) in [("ra", &self.ra), ("dec", &self.dec), ("roll", &self.roll), ("across", &self.across)] {
            let (km, kx) = match name {
                "ra" => ("mean_ra_err_as", "max_ra_err_as"),
                "dec" => ("mean_dec_err_as", "max_dec_err_as"),
                "roll" => ("mean_roll_err_as", "max_roll_err_as"),
                _ => ("mean_across_as", "max_across_as"),
            };
            f.push((km, s.mean.to_string()));
            f.push((kx, s.max_abs.to_string()));
        }
        f.push(("dec_drift_rate_as_per_h", opt(self.dec_drift.map(|d| d.rate))));
        f.push(("dec_drift_residual_rms_as", opt(self.dec_drift.map(|d| d.residual_rms))));
        f.push(("solve_success_rate", opt(self.solve_success_rate)));
        f
    }

    pub fn write_key_value<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, v) in self.fields() {
            writeln!(out, "{k}={v}")?;
        }
        Ok(())
    }

    pub fn write_csv_row<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let f = self.fields();
        writeln!(out, "{}", f.iter().map(|p| p.0).collect::<Vec<_>>().join(","))?;
        writeln!(out, "{}", f.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join(","))
    }
}
