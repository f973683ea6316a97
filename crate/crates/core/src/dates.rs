//! Calendar-date helpers shared by manifests, configs and reports.

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

/// Parses `YYYY-MM-DD`, or an RFC 3339 timestamp truncated to its UTC day.
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    let text = text.trim();
    if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Some(d);
    }
    DateTime::parse_from_rfc3339(text)
        .ok()
        .map(|t| t.naive_utc().date())
}

/// Inclusive date range. Either bound may be open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl DateWindow {
    pub fn new(start: Option<NaiveDate>, end: Option<NaiveDate>) -> Self {
        DateWindow { start, end }
    }

    pub fn between(start: NaiveDate, end: NaiveDate) -> Self {
        DateWindow {
            start: Some(start),
            end: Some(end),
        }
    }

    pub fn unbounded() -> Self {
        DateWindow::default()
    }

    pub fn is_well_ordered(&self) -> bool {
        match (self.start, self.end) {
            (Some(s), Some(e)) => s <= e,
            _ => true,
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start.is_none_or(|s| date >= s) && self.end.is_none_or(|e| date <= e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_timestamp_dates() {
        let d = NaiveDate::from_ymd_opt(2012, 5, 6).unwrap();
        assert_eq!(parse_date("2012-05-06"), Some(d));
        assert_eq!(parse_date("2012-05-06T23:10:00Z"), Some(d));
        assert_eq!(parse_date("2012-05-07T01:00:00+02:00"), Some(d));
        assert_eq!(parse_date("06/05/2012"), None);
    }

    #[test]
    fn window_bounds_are_inclusive() {
        let a = NaiveDate::from_ymd_opt(2012, 1, 1).unwrap();
        let b = NaiveDate::from_ymd_opt(2013, 1, 1).unwrap();
        let w = DateWindow::between(a, b);
        assert!(w.contains(a) && w.contains(b));
        assert!(!w.contains(b.succ_opt().unwrap()));
        assert!(DateWindow::unbounded().contains(a));
        assert!(!DateWindow::between(b, a).is_well_ordered());
    }
}
