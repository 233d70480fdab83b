//! Exact rational parameters and the integer thresholds derived from them.

use num_integer::Integer;
pub use num_rational::Ratio;

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse `{0}` as a rational (expected `a/b` or a decimal)")]
pub struct ParseRationalError(pub String);

/// Parses `"3/8"`, `"0.02"`, `"1"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(s.to_string());
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| err())?;
        let b: i64 = b.trim().parse().map_err(|_| err())?;
        if b == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(a, b));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > 15 {
        return Err(err());
    }
    let int: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| err())? };
    let den = 10i64.pow(frac.len() as u32);
    let fr: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| err())? };
    let r = Ratio::new(int * den + fr, den);
    Ok(if neg { -r } else { r })
}

/// ⌈r·m⌉ computed exactly.
pub fn ceil_mul(r: Rational, m: usize) -> i64 {
    let num = *r.numer() * m as i64;
    -Integer::div_floor(&-num, r.denom())
}

/// ⌊r·m⌋ computed exactly.
pub fn floor_mul(r: Rational, m: usize) -> i64 {
    Integer::div_floor(&(*r.numer() * m as i64), r.denom())
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses() {
        assert_eq!(parse_rational("3/8").unwrap(), Ratio::new(3, 8));
        assert_eq!(parse_rational("0.02").unwrap(), Ratio::new(1, 50));
        assert_eq!(parse_rational("1").unwrap(), Ratio::from_integer(1));
        assert_eq!(parse_rational(".25").unwrap(), Ratio::new(1, 4));
        assert!(parse_rational("x").is_err());
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn exact_ceilings() {
        let r = Ratio::new(1, 5);
        assert_eq!(ceil_mul(r, 15), 3);
        assert_eq!(floor_mul(Ratio::new(4, 5), 15), 12);
        assert_eq!(ceil_mul(Ratio::new(1, 50), 21), 1);
        assert_eq!(ceil_mul(Ratio::new(0, 1), 21), 0);
    }
}
