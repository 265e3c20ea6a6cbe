//! Calendar months without day or timezone semantics.

use std::fmt;
use std::str::FromStr;

/// A calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

/// Error returned when a date token cannot be parsed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid date '{0}': expected YYYY-MM or YYYY-MM-DD")]
pub struct DateParseError(pub String);

impl YearMonth {
    /// Builds a month; `month` is 1-based. Returns `None` outside 1..=12.
    pub fn new(year: i32, month: u32) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    /// Months since year 0, January.
    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    fn from_ordinal(ord: i64) -> Self {
        let year = ord.div_euclid(12) as i32;
        let month = ord.rem_euclid(12) as u32 + 1;
        Self { year, month }
    }

    /// Shifts by a signed number of months.
    pub fn add_months(self, delta: i64) -> Self {
        Self::from_ordinal(self.ordinal() + delta)
    }

    pub fn succ(self) -> Self {
        self.add_months(1)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: Self) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = DateParseError;

    /// Accepts `YYYY-MM` and `YYYY-MM-DD`; the day is validated and then dropped.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DateParseError(s.to_string());
        let trimmed = s.trim();
        let mut parts = trimmed.split('-');
        let year_tok = parts.next().ok_or_else(err)?;
        let month_tok = parts.next().ok_or_else(err)?;
        let day_tok = parts.next();
        if parts.next().is_some() || year_tok.len() != 4 || month_tok.len() != 2 {
            return Err(err());
        }
        if !year_tok
            .bytes()
            .chain(month_tok.bytes())
            .all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        if let Some(day) = day_tok {
            let valid = day.len() == 2
                && day.bytes().all(|b| b.is_ascii_digit())
                && matches!(day.parse::<u32>(), Ok(1..=31));
            if !valid {
                return Err(err());
            }
        }
        let year: i32 = year_tok.parse().map_err(|_| err())?;
        let month: u32 = month_tok.parse().map_err(|_| err())?;
        Self::new(year, month).ok_or_else(err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_formats() {
        let a: YearMonth = "2010-03".parse().unwrap();
        let b: YearMonth = "2010-03-31".parse().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "2010-03");
    }

    #[test]
    fn rejects_garbage() {
        for bad in [
            "2010",
            "2010-13",
            "10-03",
            "2010-3",
            "2010-03-00",
            "2010-03-1x",
            "abcd-01",
            "",
        ] {
            assert!(bad.parse::<YearMonth>().is_err(), "{bad}");
        }
    }

    #[test]
    fn month_arithmetic_wraps_years() {
        let dec = YearMonth::new(2009, 12).unwrap();
        assert_eq!(dec.succ(), YearMonth::new(2010, 1).unwrap());
        assert_eq!(dec.add_months(-12), YearMonth::new(2008, 12).unwrap());
        assert_eq!(dec.months_until(YearMonth::new(2011, 2).unwrap()), 14);
    }
}
