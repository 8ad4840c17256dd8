//! Earth orientation: UTC instants, IERS Earth orientation parameters, and the
//! attitude of the terrestrial frame (ITRF) in the celestial frame (ICRF).

mod eop;
mod finals;
mod rotation;
mod utc;

use thiserror::Error;

pub use eop::{parse_eop_csv, read_eop_csv, write_eop_csv, EopRecord, EopTable};
pub use finals::{format_finals2000a_line, parse_finals2000a, read_finals2000a, FinalsParse};
pub use rotation::{attitude_from_record, era, EarthModel, ERA_RATE_DEG_PER_DAY};
pub use utc::{UtcInstant, SECONDS_PER_DAY};

#[derive(Debug, Error)]
pub enum EarthError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("EOP table is empty")]
    EmptyTable,
    #[error("EOP records not strictly ascending at line {line}: mjd {mjd} after {previous}")]
    Ordering { line: usize, mjd: f64, previous: f64 },
    #[error("invalid EOP record at mjd {mjd}: {message}")]
    InvalidRecord { mjd: f64, message: String },
    #[error("time {t} outside EOP span [{first}, {last}] (MJD)")]
    OutOfRange { t: f64, first: f64, last: f64 },
    #[error("invalid UTC time: {0}")]
    InvalidTime(String),
}
