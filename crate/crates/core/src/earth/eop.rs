use std::io::{Read, Write};
use std::path::Path;

use super::{EarthError, UtcInstant, SECONDS_PER_DAY};

pub const EOP_CSV_HEADER: [&str; 6] = [
    "mjd_utc",
    "pm_x_arcsec",
    "pm_y_arcsec",
    "ut1_utc_s",
    "dx_mas",
    "dy_mas",
];

/// One day (or interpolated instant) of Earth orientation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EopRecord {
    pub mjd_utc: f64,
    /// Polar motion, arcseconds.
    pub pm_x: f64,
    pub pm_y: f64,
    /// UT1 − UTC, seconds.
    pub ut1_utc: f64,
    /// Celestial pole offsets, milliarcseconds.
    pub dx_mas: f64,
    pub dy_mas: f64,
}

impl EopRecord {
    pub fn validate(&self) -> Result<(), EarthError> {
        let bad = |message: String| EarthError::InvalidRecord {
            mjd: self.mjd_utc,
            message,
        };
        let fields = [
            self.mjd_utc,
            self.pm_x,
            self.pm_y,
            self.ut1_utc,
            self.dx_mas,
            self.dy_mas,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite field".into()));
        }
        if self.ut1_utc.abs() >= 1.0 {
            return Err(bad(format!("|UT1-UTC| = {} s must be < 1 s", self.ut1_utc)));
        }
        if self.pm_x.abs() >= 2.0 || self.pm_y.abs() >= 2.0 {
            return Err(bad(format!(
                "polar motion ({}, {}) arcsec exceeds 2 arcsec",
                self.pm_x, self.pm_y
            )));
        }
        Ok(())
    }

    fn lerp(&self, other: &EopRecord, f: f64, mjd: f64) -> EopRecord {
        let mix = |a: f64, b: f64| a + f * (b - a);
        EopRecord {
            mjd_utc: mjd,
            pm_x: mix(self.pm_x, other.pm_x),
            pm_y: mix(self.pm_y, other.pm_y),
            ut1_utc: mix(self.ut1_utc, other.ut1_utc),
            dx_mas: mix(self.dx_mas, other.dx_mas),
            dy_mas: mix(self.dy_mas, other.dy_mas),
        }
    }
}

/// EOP records sorted strictly ascending by MJD.
#[derive(Clone, Debug, PartialEq)]
pub struct EopTable {
    records: Vec<EopRecord>,
}

impl EopTable {
    pub fn new(records: Vec<EopRecord>) -> Result<Self, EarthError> {
        if records.is_empty() {
            return Err(EarthError::EmptyTable);
        }
        for (i, r) in records.iter().enumerate() {
            r.validate()?;
            if i > 0 && r.mjd_utc <= records[i - 1].mjd_utc {
                return Err(EarthError::Ordering {
                    line: i + 1,
                    mjd: r.mjd_utc,
                    previous: records[i - 1].mjd_utc,
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[EopRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// First and last MJD covered.
    pub fn span(&self) -> (f64, f64) {
        (
            self.records[0].mjd_utc,
            self.records[self.records.len() - 1].mjd_utc,
        )
    }

    /// Linearly interpolated parameters at `t`; exact at table nodes.
    pub fn eop_at(&self, t: &UtcInstant) -> Result<EopRecord, EarthError> {
        let (first, last) = self.span();
        // Day offsets relative to the bracketing node keep sub-microsecond
        // resolution that a single fractional MJD would lose.
        let offset_days = |node: f64| (t.mjd_day() as f64 - node) + t.sec_of_day() / SECONDS_PER_DAY;
        if offset_days(first) < 0.0 || offset_days(last) > 0.0 {
            return Err(EarthError::OutOfRange {
                t: t.mjd(),
                first,
                last,
            });
        }
        let idx = self
            .records
            .partition_point(|r| offset_days(r.mjd_utc) >= 0.0);
        let lo = &self.records[idx - 1];
        let from_lo = offset_days(lo.mjd_utc);
        if from_lo == 0.0 || idx == self.records.len() {
            return Ok(*lo);
        }
        let hi = &self.records[idx];
        let f = from_lo / (hi.mjd_utc - lo.mjd_utc);
        Ok(lo.lerp(hi, f, t.mjd()))
    }
}

/// Parses the canonical EOP CSV.
pub fn read_eop_csv<R: Read>(reader: R) -> Result<EopTable, EarthError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| EarthError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().collect::<Vec<_>>() != EOP_CSV_HEADER {
        return Err(EarthError::Parse {
            line: 1,
            message: format!("expected header {}", EOP_CSV_HEADER.join(",")),
        });
    }
    let mut records: Vec<EopRecord> = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| EarthError::Parse {
            line,
            message: e.to_string(),
        })?;
        if row.len() != EOP_CSV_HEADER.len() {
            return Err(EarthError::Parse {
                line,
                message: format!("expected 6 fields, found {}", row.len()),
            });
        }
        let mut v = [0.0; 6];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = row[k].parse().map_err(|_| EarthError::Parse {
                line,
                message: format!("field {} is not a number: {:?}", EOP_CSV_HEADER[k], &row[k]),
            })?;
        }
        let rec = EopRecord {
            mjd_utc: v[0],
            pm_x: v[1],
            pm_y: v[2],
            ut1_utc: v[3],
            dx_mas: v[4],
            dy_mas: v[5],
        };
        if let Some(prev) = records.last() {
            if rec.mjd_utc <= prev.mjd_utc {
                return Err(EarthError::Ordering {
                    line,
                    mjd: rec.mjd_utc,
                    previous: prev.mjd_utc,
                });
            }
        }
        records.push(rec);
    }
    EopTable::new(records)
}

pub fn parse_eop_csv(path: &Path) -> Result<EopTable, EarthError> {
    let file = std::fs::File::open(path).map_err(|source| EarthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_eop_csv(file)
}

/// Writes the canonical EOP CSV. Values use Rust's shortest round-trip
/// decimal form, so reading the output back reproduces the table exactly.
pub fn write_eop_csv<W: Write>(table: &EopTable, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", EOP_CSV_HEADER.join(","))?;
    for r in table.records() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.mjd_utc, r.pm_x, r.pm_y, r.ut1_utc, r.dx_mas, r.dy_mas
        )?;
    }
    Ok(())
}
