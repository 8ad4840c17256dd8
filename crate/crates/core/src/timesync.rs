//! Device-clock to UTC mapping from pulse-per-second anchors.
//!
//! The camera records the rising edge of each GPS pulse in its own
//! microsecond timescale; the matching UTC second comes from the receiver's
//! log. Adjacent anchors define a piecewise-linear map, which absorbs slow
//! oscillator drift. Events outside the anchor span extrapolate along the
//! nearest segment.

use std::io::{Read, Write};

use thiserror::Error;

use crate::earth::UtcInstant;

/// Allowed device-µs per UTC-µs on every segment.
pub const SLOPE_BOUNDS: (f64, f64) = (0.9, 1.1);

#[derive(Debug, Error)]
pub enum TimeSyncError {
    #[error("need at least 2 PPS anchors, got {0}")]
    InsufficientAnchors(usize),
    #[error("anchors not strictly increasing at index {0}")]
    Ordering(usize),
    #[error("segment {index} slope {slope} outside clock-skew bound [0.9, 1.1]")]
    Skew { index: usize, slope: f64 },
    #[error("trigger file has {triggers} rows but UTC log has {utc}")]
    CountMismatch { triggers: usize, utc: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A PPS pulse seen at device time `t_event_us` and known to be at `t_utc`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpsAnchor {
    pub t_event_us: i64,
    pub t_utc: UtcInstant,
}

#[derive(Clone, Debug)]
pub struct TimeMap {
    anchors: Vec<PpsAnchor>,
    /// UTC seconds of each anchor relative to the first.
    utc_offsets: Vec<f64>,
}

impl TimeMap {
    pub fn new(anchors: Vec<PpsAnchor>) -> Result<Self, TimeSyncError> {
        if anchors.len() < 2 {
            return Err(TimeSyncError::InsufficientAnchors(anchors.len()));
        }
        let origin = anchors[0].t_utc;
        let utc_offsets: Vec<f64> = anchors.iter().map(|a| a.t_utc.seconds_since(&origin)).collect();
        for i in 1..anchors.len() {
            let dev = anchors[i].t_event_us - anchors[i - 1].t_event_us;
            let utc = utc_offsets[i] - utc_offsets[i - 1];
            if dev <= 0 || utc <= 0.0 {
                return Err(TimeSyncError::Ordering(i));
            }
            let slope = dev as f64 / (utc * 1e6);
            if !(SLOPE_BOUNDS.0..=SLOPE_BOUNDS.1).contains(&slope) {
                return Err(TimeSyncError::Skew { index: i - 1, slope });
            }
        }
        Ok(Self {
            anchors,
            utc_offsets,
        })
    }

    pub fn anchors(&self) -> &[PpsAnchor] {
        &self.anchors
    }

    /// Device-µs per UTC-µs on each segment.
    pub fn slopes(&self) -> Vec<f64> {
        self.anchors
            .windows(2)
            .zip(self.utc_offsets.windows(2))
            .map(|(a, u)| (a[1].t_event_us - a[0].t_event_us) as f64 / ((u[1] - u[0]) * 1e6))
            .collect()
    }

    fn segment_for_device(&self, t_us: f64) -> usize {
        let idx = self
            .anchors
            .partition_point(|a| (a.t_event_us as f64) <= t_us);
        idx.clamp(1, self.anchors.len() - 1) - 1
    }

    /// UTC seconds after the first anchor for a (possibly fractional) device time.
    pub fn utc_offset_seconds(&self, t_event_us: f64) -> f64 {
        let i = self.segment_for_device(t_event_us);
        let (a, b) = (&self.anchors[i], &self.anchors[i + 1]);
        let (ua, ub) = (self.utc_offsets[i], self.utc_offsets[i + 1]);
        let da = t_event_us - a.t_event_us as f64;
        if da == 0.0 {
            return ua;
        }
        ua + da * (ub - ua) / (b.t_event_us - a.t_event_us) as f64
    }

    pub fn to_utc(&self, t_event_us: i64) -> UtcInstant {
        self.to_utc_f64(t_event_us as f64)
    }

    pub fn to_utc_f64(&self, t_event_us: f64) -> UtcInstant {
        let i = self.segment_for_device(t_event_us);
        if t_event_us == self.anchors[i].t_event_us as f64 {
            return self.anchors[i].t_utc;
        }
        if t_event_us == self.anchors[i + 1].t_event_us as f64 {
            return self.anchors[i + 1].t_utc;
        }
        self.anchors[0]
            .t_utc
            .plus_seconds(self.utc_offset_seconds(t_event_us))
    }

    /// Inverse map: device microseconds (fractional) at a UTC instant.
    pub fn to_device_us(&self, t: &UtcInstant) -> f64 {
        let off = t.seconds_since(&self.anchors[0].t_utc);
        let idx = self.utc_offsets.partition_point(|&u| u <= off);
        let i = idx.clamp(1, self.anchors.len() - 1) - 1;
        let (a, b) = (&self.anchors[i], &self.anchors[i + 1]);
        let (ua, ub) = (self.utc_offsets[i], self.utc_offsets[i + 1]);
        a.t_event_us as f64 + (off - ua) * (b.t_event_us - a.t_event_us) as f64 / (ub - ua)
    }
}

/// Reads the device trigger CSV (`t_event_us`).
pub fn read_trigger_csv<R: Read>(reader: R) -> Result<Vec<i64>, TimeSyncError> {
    read_single_column(reader, "t_event_us", |s| s.parse::<i64>().map_err(|e| e.to_string()))
}

/// Reads the UTC log CSV (`utc_iso8601`).
pub fn read_utc_log_csv<R: Read>(reader: R) -> Result<Vec<UtcInstant>, TimeSyncError> {
    read_single_column(reader, "utc_iso8601", |s| {
        UtcInstant::parse_iso8601(s).map_err(|e| e.to_string())
    })
}

fn read_single_column<R: Read, T>(
    reader: R,
    header: &str,
    parse: impl Fn(&str) -> Result<T, String>,
) -> Result<Vec<T>, TimeSyncError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let h = rdr.headers().map_err(|e| TimeSyncError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if h.len() != 1 || &h[0] != header {
        return Err(TimeSyncError::Parse {
            line: 1,
            message: format!("expected header `{header}`"),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| TimeSyncError::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(parse(&row[0]).map_err(|message| TimeSyncError::Parse { line, message })?);
    }
    Ok(out)
}

/// Pairs trigger timestamps with UTC log entries by index after sorting both.
///
/// Callers must drop falling-edge triggers beforehand; only rising edges are
/// paired with UTC seconds.
pub fn pair_anchors(
    mut triggers: Vec<i64>,
    mut utc: Vec<UtcInstant>,
) -> Result<Vec<PpsAnchor>, TimeSyncError> {
    if triggers.len() != utc.len() {
        return Err(TimeSyncError::CountMismatch {
            triggers: triggers.len(),
            utc: utc.len(),
        });
    }
    triggers.sort_unstable();
    utc.sort_by(|a, b| a.partial_cmp(b).expect("finite instants"));
    Ok(triggers
        .into_iter()
        .zip(utc)
        .map(|(t_event_us, t_utc)| PpsAnchor { t_event_us, t_utc })
        .collect())
}

pub fn write_trigger_csv<W: Write>(anchors: &[PpsAnchor], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t_event_us")?;
    for a in anchors {
        writeln!(out, "{}", a.t_event_us)?;
    }
    Ok(())
}

pub fn write_utc_log_csv<W: Write>(anchors: &[PpsAnchor], mut out: W) -> std::io::Result<()> {
    writeln!(out, "utc_iso8601")?;
    for a in anchors {
        writeln!(out, "{}", a.t_utc.to_iso8601())?;
    }
    Ok(())
}
