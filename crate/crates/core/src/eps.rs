//! Dyadic proximity parameters `ε = 2^-j`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EpsError {
    #[error("proximity parameter must lie strictly between 0 and 1, got {0}")]
    OutOfRange(String),
    #[error("proximity parameter {0} is not of the form 1/2^j")]
    NotDyadic(String),
    #[error("cannot parse proximity parameter {0:?}; use \"1/16\" or \"2^-4\"")]
    Syntax(String),
}

/// Largest supported exponent; keeps `4/ε` and friends inside `u64`.
pub const MAX_LOG2_INV: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DyadicEps {
    log2_inv: u32,
}

impl DyadicEps {
    pub fn from_log2_inv(j: u32) -> Result<Self, EpsError> {
        if j == 0 {
            return Err(EpsError::OutOfRange("1".into()));
        }
        if j > MAX_LOG2_INV {
            return Err(EpsError::OutOfRange(format!("2^-{j}")));
        }
        Ok(Self { log2_inv: j })
    }

    /// `ε = 1/inv`; `inv` must be a power of two, at least 2.
    pub fn from_inverse(inv: u64) -> Result<Self, EpsError> {
        if !inv.is_power_of_two() {
            return Err(EpsError::NotDyadic(format!("1/{inv}")));
        }
        Self::from_log2_inv(inv.trailing_zeros())
    }

    /// The largest `2^-j` not exceeding `value`.
    pub fn floor_of(value: f64) -> Result<Self, EpsError> {
        if !(value > 0.0 && value < 1.0) {
            return Err(EpsError::OutOfRange(value.to_string()));
        }
        let mut j = 1;
        while (0.5f64).powi(j as i32) > value {
            j += 1;
        }
        Self::from_log2_inv(j)
    }

    /// `log₂(1/ε)`, which is also the number of levels the tester visits.
    pub fn log2_inv(self) -> u32 {
        self.log2_inv
    }

    pub fn inv(self) -> u64 {
        1u64 << self.log2_inv
    }

    pub fn value(self) -> f64 {
        1.0 / self.inv() as f64
    }

    /// Parses `value` as a plain decimal or fraction and rounds it down to
    /// a dyadic value (opt-in normalisation).
    pub fn parse_normalizing(s: &str) -> Result<Self, EpsError> {
        if let Ok(e) = s.parse::<Self>() {
            return Ok(e);
        }
        Self::floor_of(parse_real(s)?)
    }
}

fn parse_real(s: &str) -> Result<f64, EpsError> {
    let t = s.trim();
    if let Some((num, den)) = t.split_once('/') {
        let num: f64 = num.trim().parse().map_err(|_| EpsError::Syntax(s.into()))?;
        let den: f64 = den.trim().parse().map_err(|_| EpsError::Syntax(s.into()))?;
        return Ok(num / den);
    }
    t.parse().map_err(|_| EpsError::Syntax(s.into()))
}

impl FromStr for DyadicEps {
    type Err = EpsError;

    /// Accepts `1/N` with `N` a power of two, or `2^-j`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Some(exp) = t.strip_prefix("2^") {
            let exp = exp.trim_start_matches('{').trim_end_matches('}');
            let j: i64 = exp.parse().map_err(|_| EpsError::Syntax(s.into()))?;
            if j >= 0 {
                return Err(EpsError::OutOfRange(s.into()));
            }
            return Self::from_log2_inv((-j) as u32);
        }
        if let Some(den) = t.strip_prefix("1/") {
            let inv: u64 = den.trim().parse().map_err(|_| EpsError::Syntax(s.into()))?;
            if inv <= 1 {
                return Err(EpsError::OutOfRange(s.into()));
            }
            return Self::from_inverse(inv);
        }
        match parse_real(t) {
            Ok(v) if !(v > 0.0 && v < 1.0) => Err(EpsError::OutOfRange(s.into())),
            Ok(_) => Err(EpsError::NotDyadic(s.into())),
            Err(e) => Err(e),
        }
    }
}

impl fmt::Display for DyadicEps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.log2_inv <= 20 {
            write!(f, "1/{}", self.inv())
        } else {
            write!(f, "2^-{}", self.log2_inv)
        }
    }
}

impl TryFrom<String> for DyadicEps {
    type Error = EpsError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DyadicEps> for String {
    fn from(e: DyadicEps) -> String {
        e.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_notations() {
        assert_eq!("1/16".parse::<DyadicEps>().unwrap().log2_inv(), 4);
        assert_eq!("2^-16".parse::<DyadicEps>().unwrap().inv(), 65536);
        assert_eq!("2^{-3}".parse::<DyadicEps>().unwrap().inv(), 8);
    }

    #[test]
    fn rejects_non_dyadic_and_out_of_range() {
        assert!(matches!("1/12".parse::<DyadicEps>(), Err(EpsError::NotDyadic(_))));
        assert!(matches!("0.1".parse::<DyadicEps>(), Err(EpsError::NotDyadic(_))));
        assert!(matches!("1".parse::<DyadicEps>(), Err(EpsError::OutOfRange(_))));
        assert!(matches!("1/1".parse::<DyadicEps>(), Err(EpsError::OutOfRange(_))));
        assert!(matches!("2^3".parse::<DyadicEps>(), Err(EpsError::OutOfRange(_))));
        assert!(matches!("abc".parse::<DyadicEps>(), Err(EpsError::Syntax(_))));
    }

    #[test]
    fn normalizing_rounds_down() {
        assert_eq!(DyadicEps::parse_normalizing("0.1").unwrap().inv(), 16);
        assert_eq!(DyadicEps::parse_normalizing("1/12").unwrap().inv(), 16);
        assert_eq!(DyadicEps::parse_normalizing("1/8").unwrap().inv(), 8);
        assert_eq!(DyadicEps::floor_of(0.173).unwrap().inv(), 8);
        assert!(DyadicEps::parse_normalizing("1.5").is_err());
    }

    #[test]
    fn serde_as_string() {
        let e: DyadicEps = "1/64".parse().unwrap();
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, "\"1/64\"");
        assert_eq!(serde_json::from_str::<DyadicEps>(&s).unwrap(), e);
    }
}
