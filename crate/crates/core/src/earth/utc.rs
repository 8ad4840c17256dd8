use std::fmt;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Utc};

use super::EarthError;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

const MICROS_PER_DAY: i64 = 86_400_000_000;

fn mjd_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1858, 11, 17).expect("valid epoch")
}

/// A UTC instant as (MJD day number, seconds into the day).
///
/// Every day is treated as 86400 s; leap seconds are not representable.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct UtcInstant {
    mjd_day: i64,
    sec_of_day: f64,
}

impl UtcInstant {
    pub fn new(mjd_day: i64, sec_of_day: f64) -> Result<Self, EarthError> {
        if !sec_of_day.is_finite() || !(0.0..SECONDS_PER_DAY).contains(&sec_of_day) {
            return Err(EarthError::InvalidTime(format!(
                "seconds of day {sec_of_day} outside [0, 86400)"
            )));
        }
        Ok(Self {
            mjd_day,
            sec_of_day,
        })
    }

    pub fn from_mjd(mjd: f64) -> Self {
        let day = mjd.floor();
        Self::normalized(day as i64, (mjd - day) * SECONDS_PER_DAY)
    }

    fn normalized(mut day: i64, mut sec: f64) -> Self {
        let carry = (sec / SECONDS_PER_DAY).floor();
        if carry != 0.0 {
            day += carry as i64;
            sec -= carry * SECONDS_PER_DAY;
        }
        if sec >= SECONDS_PER_DAY {
            day += 1;
            sec -= SECONDS_PER_DAY;
        }
        if sec < 0.0 {
            sec = 0.0;
        }
        Self {
            mjd_day: day,
            sec_of_day: sec,
        }
    }

    pub fn from_calendar(
        year: i32,
        month: u32,
        day: u32,
        hour: u32,
        minute: u32,
        second: f64,
    ) -> Result<Self, EarthError> {
        let date = NaiveDate::from_ymd_opt(year, month, day)
            .ok_or_else(|| EarthError::InvalidTime(format!("{year}-{month}-{day}")))?;
        if hour > 23 || minute > 59 || !(0.0..60.0).contains(&second) {
            return Err(EarthError::InvalidTime(format!(
                "{hour:02}:{minute:02}:{second}"
            )));
        }
        let mjd_day = (date - mjd_epoch()).num_days();
        Self::new(mjd_day, hour as f64 * 3600.0 + minute as f64 * 60.0 + second)
    }

    pub fn mjd_day(&self) -> i64 {
        self.mjd_day
    }

    pub fn sec_of_day(&self) -> f64 {
        self.sec_of_day
    }

    /// Fractional MJD. Loses sub-microsecond precision; prefer
    /// [`UtcInstant::seconds_since`] for intervals.
    pub fn mjd(&self) -> f64 {
        self.mjd_day as f64 + self.sec_of_day / SECONDS_PER_DAY
    }

    pub fn plus_seconds(&self, seconds: f64) -> Self {
        Self::normalized(self.mjd_day, self.sec_of_day + seconds)
    }

    /// `self − earlier` in seconds.
    pub fn seconds_since(&self, earlier: &UtcInstant) -> f64 {
        (self.mjd_day - earlier.mjd_day) as f64 * SECONDS_PER_DAY
            + (self.sec_of_day - earlier.sec_of_day)
    }

    /// Parses RFC 3339 / ISO 8601 with an explicit offset, e.g.
    /// `2024-11-02T03:14:15Z` or `2024-11-02T03:14:15.250000Z`.
    pub fn parse_iso8601(s: &str) -> Result<Self, EarthError> {
        let dt: DateTime<Utc> = s
            .trim()
            .parse()
            .map_err(|e| EarthError::InvalidTime(format!("{s:?}: {e}")))?;
        let mjd_day = (dt.date_naive() - mjd_epoch()).num_days();
        let sec = dt.num_seconds_from_midnight() as f64 + dt.nanosecond() as f64 * 1e-9;
        Self::new(mjd_day, sec)
    }

    /// ISO 8601 with microsecond resolution and a `Z` suffix.
    pub fn to_iso8601(&self) -> String {
        let mut day = self.mjd_day;
        let mut micros = (self.sec_of_day * 1e6).round() as i64;
        if micros >= MICROS_PER_DAY {
            day += 1;
            micros -= MICROS_PER_DAY;
        }
        let date = mjd_epoch() + Duration::days(day);
        let secs = micros / 1_000_000;
        let frac = micros % 1_000_000;
        format!(
            "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:06}Z",
            date.year(),
            date.month(),
            date.day(),
            secs / 3600,
            (secs / 60) % 60,
            secs % 60,
            frac
        )
    }

    /// Calendar (year, month, day) of the MJD day.
    pub fn calendar_date(&self) -> (i32, u32, u32) {
        let date = mjd_epoch() + Duration::days(self.mjd_day);
        (date.year(), date.month(), date.day())
    }
}

impl fmt::Display for UtcInstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso8601())
    }
}
