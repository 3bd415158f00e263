//! Parsing of real-valued parameters written either as decimals or as exact
//! fractions such as `8/255`.

use crate::error::{Error, Result};

/// Parses `"0.01"`, `"1e-3"` or `"n/d"`. A fraction is evaluated as one
/// correctly rounded division, so `"8/255"` equals `8.0 / 255.0` exactly.
pub fn parse_real(text: &str) -> Result<f64> {
    let bad = || Error::Parse(format!("not a number or fraction: {text:?}"));
    let value = match text.trim().split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0.0 {
                return Err(bad());
            }
            n / d
        }
        None => text.trim().parse().map_err(|_| bad())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_and_decimals() {
        assert_eq!(parse_real("8/255").unwrap(), 8.0 / 255.0);
        assert_eq!(parse_real(" 1 / 255 ").unwrap(), 1.0 / 255.0);
        assert_eq!(parse_real("0.01").unwrap(), 0.01);
        assert_eq!(parse_real("-2/255").unwrap(), -2.0 / 255.0);
        assert_eq!(parse_real("1e-3").unwrap(), 0.001);
        for bad in ["", "8/", "/3", "1/0", "abc", "inf", "1/2/3"] {
            assert!(parse_real(bad).is_err(), "{bad}");
        }
    }
}
