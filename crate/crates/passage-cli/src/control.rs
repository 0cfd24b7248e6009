//! `--control` flag parsing.

use passage::policies::ControlFunction;
use passage::{Error, Result};

/// Accepts `optimal`, `greedy`, `stationary`, `threshold=0.1`, or
/// `custom=FILE` where FILE is a JSON array of `[z, psi]` pairs.
/// `stationary` fixes its window from the horizon `t`.
pub fn parse_control(spec: &str, t: f64) -> Result<ControlFunction> {
    match spec {
        "optimal" => Ok(ControlFunction::Optimal),
        "greedy" => Ok(ControlFunction::Greedy),
        "stationary" => Ok(ControlFunction::Stationary { horizon: t }),
        other => {
            if let Some(theta) = other.strip_prefix("threshold=") {
                let theta: f64 = theta
                    .parse()
                    .map_err(|e| Error::Domain(format!("bad threshold '{theta}': {e}")))?;
                return Ok(ControlFunction::Threshold(theta));
            }
            if let Some(path) = other.strip_prefix("custom=") {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Domain(format!("cannot read control table {path}: {e}")))?;
                let table: Vec<(f64, f64)> = serde_json::from_str(&text)
                    .map_err(|e| Error::Domain(format!("bad control table {path}: {e}")))?;
                return Ok(ControlFunction::Custom(table));
            }
            Err(Error::Domain(format!(
                "unknown control '{other}'; expected optimal | greedy | stationary | threshold=θ | custom=FILE"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_controls() {
        assert!(matches!(
            parse_control("optimal", 10.0).unwrap(),
            ControlFunction::Optimal
        ));
        assert!(matches!(
            parse_control("greedy", 10.0).unwrap(),
            ControlFunction::Greedy
        ));
        match parse_control("stationary", 32.0).unwrap() {
            ControlFunction::Stationary { horizon } => assert_eq!(horizon, 32.0),
            other => panic!("{other:?}"),
        }
        match parse_control("threshold=0.25", 1.0).unwrap() {
            ControlFunction::Threshold(v) => assert_eq!(v, 0.25),
            other => panic!("{other:?}"),
        }
        assert!(parse_control("bogus", 1.0).is_err());
        assert!(parse_control("threshold=x", 1.0).is_err());
    }
}
