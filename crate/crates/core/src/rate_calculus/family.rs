use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Built-in rate and modulus shapes, addressable by name in configuration
/// files: `power(alpha)`, `log`, `identity`, `indicator`.
///
/// The meaning depends on where the family is used:
///
/// | family      | rate φ(t)   | concave modulus f(t) | convex ψ(s)   |
/// |-------------|-------------|----------------------|---------------|
/// | `power(a)`  | t^a         | t^a, a ∈ (0, 1]      | s^a, a ≥ 1    |
/// | `log`       | 1 + ln t    | ln(1 + t)            | s ln(1 + s)   |
/// | `identity`  | t           | t                    | s             |
/// | `indicator` | –           | 1_(0,∞)(t)           | –             |
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Power(f64),
    Log,
    Identity,
    Indicator,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Power(a) => write!(f, "power({a})"),
            Family::Log => f.write_str("log"),
            Family::Identity => f.write_str("identity"),
            Family::Indicator => f.write_str("indicator"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "log" => return Ok(Family::Log),
            "identity" => return Ok(Family::Identity),
            "indicator" => return Ok(Family::Indicator),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("power(").and_then(|r| r.strip_suffix(')')) {
            let a: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::Argument(format!("bad exponent in family '{s}'")))?;
            if !a.is_finite() {
                return Err(Error::Argument(format!("non-finite exponent in family '{s}'")));
            }
            return Ok(Family::Power(a));
        }
        Err(Error::Argument(format!("unknown family '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_agree() {
        for name in ["power(0.5)", "log", "identity", "indicator", "power(2)"] {
            let fam: Family = name.parse().unwrap();
            assert_eq!(fam.to_string().parse::<Family>().unwrap(), fam);
        }
        assert_eq!("power( 0.25 )".parse::<Family>().unwrap(), Family::Power(0.25));
    }

    #[test]
    fn rejects_unknown() {
        assert!("cubic".parse::<Family>().is_err());
        assert!("power(x)".parse::<Family>().is_err());
        assert!("power(inf)".parse::<Family>().is_err());
    }
}
