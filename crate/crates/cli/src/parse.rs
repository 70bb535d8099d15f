//! Value syntax shared by flags and config files.

use crate::CliError;

/// `1e-8`, `0.5` or an exact power of two written `2^-34`.
pub fn parse_f64(s: &str) -> Result<f64, CliError> {
    let s = s.trim();
    if let Some(exp) = s.strip_prefix("2^") {
        let k: i32 = exp
            .parse()
            .map_err(|_| CliError::usage(format!("bad power-of-two literal `{s}`")))?;
        if !(-1074..=1023).contains(&k) {
            return Err(CliError::usage(format!("power of two out of range: `{s}`")));
        }
        return Ok(qdot_core::float_bits::scale_pow2(1.0, k));
    }
    s.parse::<f64>()
        .map_err(|_| CliError::usage(format!("bad number `{s}`")))
}

/// Non-negative integer, also in float notation when exact (`1e4`).
pub fn parse_count(s: &str) -> Result<usize, CliError> {
    let s = s.trim();
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let v = parse_f64(s)?;
    if v >= 0.0 && v.fract() == 0.0 && v <= (1u64 << 53) as f64 {
        Ok(v as usize)
    } else {
        Err(CliError::usage(format!(
            "expected a non-negative integer, got `{s}`"
        )))
    }
}

pub fn parse_list<T>(
    s: &str,
    item: impl Fn(&str) -> Result<T, CliError>,
) -> Result<Vec<T>, CliError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| item(p.trim()))
        .collect()
}

pub fn parse_bool(s: &str) -> Result<bool, CliError> {
    match s.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => Err(CliError::usage(format!(
            "expected a boolean, got `{other}`"
        ))),
    }
}

/// Geometric range `start:stop:xF`, both ends inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub start: String,
    pub stop: String,
    pub factor: f64,
}

impl Scan {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(CliError::usage(format!(
                "scan must look like start:stop:x10, got `{s}`"
            )));
        };
        let factor = step
            .strip_prefix('x')
            .ok_or_else(|| CliError::usage(format!("scan step must look like x10, got `{step}`")))
            .and_then(parse_f64)?;
        let scan = Scan {
            start: start.to_string(),
            stop: stop.to_string(),
            factor,
        };
        let (a, b) = (parse_f64(start)?, parse_f64(stop)?);
        if !(factor > 1.0) || !(a > 0.0) || b < a {
            return Err(CliError::usage(format!("empty or unbounded scan `{s}`")));
        }
        Ok(scan)
    }

    /// The scanned values. Decimal scans by a power of ten step the decimal
    /// exponent, so `1e-16:1e3:x10` yields exactly `1e-16, 1e-15, ..., 1e3`.
    pub fn values(&self) -> Vec<f64> {
        let a = parse_f64(&self.start).expect("validated");
        let b = parse_f64(&self.stop).expect("validated");
        let limit = b * (1.0 + 1e-12);
        let mut out = Vec::new();
        let decade = (1..=22).find(|&k| 10f64.powi(k) == self.factor);
        if let (Some(step), false) = (decade, self.start.starts_with("2^")) {
            let text = format!("{a:e}");
            let (mant, exp) = text.split_once('e').expect("exponent form");
            let exp: i32 = exp.parse().expect("integer exponent");
            for k in 0.. {
                let v: f64 = format!("{mant}e{}", exp + k * step)
                    .parse()
                    .expect("valid literal");
                if v > limit {
                    break;
                }
                out.push(v);
            }
        } else {
            let mut v = a;
            while v <= limit {
                out.push(v);
                v *= self.factor;
            }
        }
        out
    }
}

impl std::fmt::Display for Scan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:x{}", self.start, self.stop, self.factor)
    }
}
