//! Reader and writer for the IERS `finals2000A` fixed-width format.
//!
//! Column positions follow `readme.finals2000A` published with the IERS
//! rapid-service products. Only the Bulletin A fields used by the Earth model
//! are read.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::{EarthError, EopRecord, EopTable, UtcInstant};

/// A fixed-width field: 1-based inclusive columns, width and decimals of the
/// Fortran `F` descriptor.
#[derive(Clone, Copy, Debug)]
struct Field {
    first: usize,
    last: usize,
    decimals: usize,
}

impl Field {
    const fn new(first: usize, last: usize, decimals: usize) -> Self {
        Self {
            first,
            last,
            decimals,
        }
    }

    fn width(&self) -> usize {
        self.last - self.first + 1
    }

    fn slice<'a>(&self, line: &'a str) -> Option<&'a str> {
        line.get(self.first - 1..self.last.min(line.len()))
            .map(str::trim)
            .filter(|s| !s.is_empty())
    }
}

//                                          cols      format   contents
const YEAR: Field = Field::new(1, 2, 0); //  1-2      I2       year mod 100
const MONTH: Field = Field::new(3, 4, 0); // 3-4      I2       month
const DAY: Field = Field::new(5, 6, 0); //   5-6      I2       day of month
const MJD: Field = Field::new(8, 15, 2); //  8-15     F8.2     MJD
const PM_FLAG: usize = 17; //                17       A1       I/P flag
const PM_X: Field = Field::new(19, 27, 6); // 19-27   F9.6     PM-x, arcsec
const PM_Y: Field = Field::new(38, 46, 6); // 38-46   F9.6     PM-y, arcsec
const UT1_FLAG: usize = 58; //               58       A1       I/P flag
const UT1_UTC: Field = Field::new(59, 68, 7); // 59-68 F10.7   UT1-UTC, s
const NUT_FLAG: usize = 96; //               96       A1       I/P flag
const DX: Field = Field::new(98, 106, 3); //  98-106  F9.3     dX, mas
const DY: Field = Field::new(117, 125, 3); // 117-125 F9.3     dY, mas
const LINE_WIDTH: usize = 185;

/// Outcome of a finals2000A parse.
#[derive(Clone, Debug)]
pub struct FinalsParse {
    pub table: EopTable,
    /// Lines skipped because UT1−UTC (or polar motion) was absent or truncated.
    pub skipped: usize,
}

fn number(field: Field, line: &str, lineno: usize) -> Result<Option<f64>, EarthError> {
    match field.slice(line) {
        None => Ok(None),
        Some(s) => s.parse().map(Some).map_err(|_| EarthError::Parse {
            line: lineno,
            message: format!("columns {}-{}: {s:?} is not a number", field.first, field.last),
        }),
    }
}

pub fn read_finals2000a<R: Read>(reader: R) -> Result<FinalsParse, EarthError> {
    let mut records: Vec<EopRecord> = Vec::new();
    let mut skipped = 0;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| EarthError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        // A record is usable only with a complete UT1-UTC field.
        if line.len() < UT1_UTC.last {
            skipped += 1;
            continue;
        }
        let (Some(mjd), Some(pm_x), Some(pm_y), Some(ut1_utc)) = (
            number(MJD, &line, lineno)?,
            number(PM_X, &line, lineno)?,
            number(PM_Y, &line, lineno)?,
            number(UT1_UTC, &line, lineno)?,
        ) else {
            skipped += 1;
            continue;
        };
        let rec = EopRecord {
            mjd_utc: mjd,
            pm_x,
            pm_y,
            ut1_utc,
            dx_mas: number(DX, &line, lineno)?.unwrap_or(0.0),
            dy_mas: number(DY, &line, lineno)?.unwrap_or(0.0),
        };
        if let Some(prev) = records.last() {
            if rec.mjd_utc <= prev.mjd_utc {
                return Err(EarthError::Ordering {
                    line: lineno,
                    mjd: rec.mjd_utc,
                    previous: prev.mjd_utc,
                });
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(EarthError::EmptyTable);
    }
    Ok(FinalsParse {
        table: EopTable::new(records)?,
        skipped,
    })
}

pub fn parse_finals2000a(path: &Path) -> Result<FinalsParse, EarthError> {
    let file = std::fs::File::open(path).map_err(|source| EarthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_finals2000a(file)
}

fn put(buf: &mut [u8], field: Field, text: &str) {
    let w = field.width();
    let padded = format!("{text:>w$}");
    debug_assert_eq!(padded.len(), w, "value {text:?} overflows columns");
    buf[field.first - 1..field.last].copy_from_slice(padded.as_bytes());
}

fn put_f(buf: &mut [u8], field: Field, value: f64) {
    put(buf, field, &format!("{value:.*}", field.decimals));
}

/// Formats a record as a finals2000A line with all flags set to `I`.
/// Error and Bulletin B columns are left blank.
pub fn format_finals2000a_line(rec: &EopRecord) -> String {
    let mut buf = vec![b' '; LINE_WIDTH];
    let (y, m, d) = UtcInstant::from_mjd(rec.mjd_utc).calendar_date();
    put(&mut buf, YEAR, &format!("{:02}", y.rem_euclid(100)));
    put(&mut buf, MONTH, &format!("{m:2}"));
    put(&mut buf, DAY, &format!("{d:2}"));
    put_f(&mut buf, MJD, rec.mjd_utc);
    buf[PM_FLAG - 1] = b'I';
    put_f(&mut buf, PM_X, rec.pm_x);
    put_f(&mut buf, PM_Y, rec.pm_y);
    buf[UT1_FLAG - 1] = b'I';
    put_f(&mut buf, UT1_UTC, rec.ut1_utc);
    buf[NUT_FLAG - 1] = b'I';
    put_f(&mut buf, DX, rec.dx_mas);
    put_f(&mut buf, DY, rec.dy_mas);
    String::from_utf8(buf)
        .expect("ascii")
        .trim_end()
        .to_string()
}
