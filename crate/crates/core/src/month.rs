//! Calendar-month labels of the form `YYYY-MM`.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Utc};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Parse(format!("month {month} out of range")));
        }
        Ok(Month { year, month })
    }

    pub fn of(ts: &DateTime<Utc>) -> Self {
        Month { year: ts.year(), month: ts.month() }
    }

    pub fn from_unix(seconds: i64) -> Option<Self> {
        DateTime::<Utc>::from_timestamp(seconds, 0).map(|t| Month::of(&t))
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            Month { year: self.year + 1, month: 1 }
        } else {
            Month { year: self.year, month: self.month + 1 }
        }
    }

    /// Inclusive range of months.
    pub fn range_inclusive(start: Month, end: Month) -> Vec<Month> {
        let mut out = Vec::new();
        let mut m = start;
        while m <= end {
            out.push(m);
            m = m.next();
        }
        out
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("expected YYYY-MM, got {s:?}"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        Month::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

/// Label following `label`: the next month for `YYYY-MM` labels, otherwise a
/// numbered suffix that still sorts after the original.
pub fn successor_label(label: &str, step: usize) -> String {
    match label.parse::<Month>() {
        Ok(m) => (0..step).fold(m, |m, _| m.next()).to_string(),
        Err(_) => format!("{label}.{step:04}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_format_next() {
        let m: Month = "2017-12".parse().unwrap();
        assert_eq!(m.next().to_string(), "2018-01");
        assert!("2017-13".parse::<Month>().is_err());
        assert!("17-01".parse::<Month>().is_err());
        assert_eq!(successor_label("2017-07", 2), "2017-09");
        assert!(successor_label("t", 1) > "t".to_string());
        let r = Month::range_inclusive("2016-11".parse().unwrap(), "2017-02".parse().unwrap());
        assert_eq!(r.len(), 4);
    }
}
