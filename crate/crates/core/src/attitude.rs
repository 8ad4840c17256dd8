//! Time-tagged attitude series and their CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::earth::UtcInstant;
use crate::geometry::UnitQuaternion;

pub const ATTITUDE_CSV_HEADER: [&str; 6] = ["utc_iso8601", "qw", "qx", "qy", "qz", "source"];

#[derive(Debug, Error)]
pub enum AttitudeIoError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: timestamps not increasing")]
    Ordering { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    Ekf,
    Astrometry,
    GroundTruth,
    SimulatorTruth,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Ekf => "ekf",
            Source::Astrometry => "astrometry",
            Source::GroundTruth => "groundtruth",
            Source::SimulatorTruth => "simulator-truth",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ekf" => Ok(Source::Ekf),
            "astrometry" => Ok(Source::Astrometry),
            "groundtruth" => Ok(Source::GroundTruth),
            "simulator-truth" => Ok(Source::SimulatorTruth),
            other => Err(format!("unknown source {other:?}")),
        }
    }
}

/// Camera attitude in ICRF at a UTC instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttitudeEstimate {
    pub t: UtcInstant,
    pub q: UnitQuaternion,
    pub source: Source,
    /// Attitude-error covariance, rad².
    pub cov: Option<Matrix3<f64>>,
}

impl AttitudeEstimate {
    pub fn new(t: UtcInstant, q: UnitQuaternion, source: Source) -> Self {
        Self {
            t,
            q,
            source,
            cov: None,
        }
    }
}

/// Writes a series; quaternions in canonical sign, shortest round-trip digits.
pub fn write_attitude_csv<W: Write>(series: &[AttitudeEstimate], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", ATTITUDE_CSV_HEADER.join(","))?;
    for e in series {
        let [w, x, y, z] = e.q.canonical().to_array();
        writeln!(out, "{},{w},{x},{y},{z},{}", e.t.to_iso8601(), e.source)?;
    }
    Ok(())
}

/// Reads a series written by [`write_attitude_csv`]. Timestamps must be
/// strictly increasing.
pub fn read_attitude_csv<R: Read>(reader: R) -> Result<Vec<AttitudeEstimate>, AttitudeIoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| AttitudeIoError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != ATTITUDE_CSV_HEADER {
        return Err(AttitudeIoError::Parse {
            line: 1,
            message: format!("expected header {}", ATTITUDE_CSV_HEADER.join(",")),
        });
    }
    let mut out: Vec<AttitudeEstimate> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let perr = |message: String| AttitudeIoError::Parse { line, message };
        let row = row.map_err(|e| perr(e.to_string()))?;
        if row.len() != 6 {
            return Err(perr(format!("expected 6 fields, found {}", row.len())));
        }
        let t = UtcInstant::parse_iso8601(&row[0]).map_err(|e| perr(e.to_string()))?;
        let mut c = [0.0; 4];
        for (k, v) in c.iter_mut().enumerate() {
            *v = row[k + 1]
                .parse()
                .map_err(|_| perr(format!("{} is not a number: {:?}", ATTITUDE_CSV_HEADER[k + 1], &row[k + 1])))?;
        }
        let q = UnitQuaternion::from_wxyz(c[0], c[1], c[2], c[3]).map_err(|e| perr(e.to_string()))?;
        let source = row[5].parse().map_err(perr)?;
        if let Some(prev) = out.last() {
            if t <= prev.t {
                return Err(AttitudeIoError::Ordering { line });
            }
        }
        out.push(AttitudeEstimate::new(t, q, source));
    }
    Ok(out)
}
