//! Grid specifications such as `h0=10..1000/5,phases=8` or `amp=1|2|4`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridVar {
    H0,
    Lambda,
    Amp,
}

impl fmt::Display for GridVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridVar::H0 => "h0",
            GridVar::Lambda => "lambda",
            GridVar::Amp => "amp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub var: GridVar,
    pub values: Vec<f64>,
    pub phases: usize,
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("grid values must be positive, got {s}"))
    }
}

impl GridSpec {
    /// Parses `VAR=LIST[,phases=K]` where `LIST` is `a|b|c` or the geometric
    /// range `lo..hi/count`.
    pub fn parse(src: &str) -> Result<GridSpec, String> {
        let mut var = None;
        let mut values = Vec::new();
        let mut phases = 1;
        for part in src.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("grid entry `{part}` is not KEY=VALUE"))?;
            match key.trim() {
                "phases" => {
                    phases = value
                        .trim()
                        .parse()
                        .ok()
                        .filter(|&p: &usize| p > 0)
                        .ok_or_else(|| {
                            format!("phases must be a positive integer, got `{value}`")
                        })?;
                }
                name => {
                    if var.is_some() {
                        return Err("grid spec names more than one variable".into());
                    }
                    var = Some(match name {
                        "h0" => GridVar::H0,
                        "lambda" | "l" => GridVar::Lambda,
                        "amp" => GridVar::Amp,
                        other => {
                            return Err(format!(
                                "unknown grid variable `{other}` (h0, lambda, amp)"
                            ))
                        }
                    });
                    values = parse_values(value)?;
                }
            }
        }
        let var = var.ok_or("grid spec has no variable")?;
        Ok(GridSpec {
            var,
            values,
            phases,
        })
    }
}

fn parse_values(src: &str) -> Result<Vec<f64>, String> {
    if let Some((range, count)) = src.split_once('/') {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| format!("range `{range}` must look like lo..hi"))?;
        let (lo, hi) = (number(lo)?, number(hi)?);
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("`{count}` is not a point count"))?;
        if count < 2 || hi <= lo {
            return Err("a range needs lo < hi and at least 2 points".into());
        }
        Ok(impulse_kam::impulse::geometric_grid(lo, hi, count))
    } else {
        let values = src.split('|').map(number).collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err("empty grid".into());
        }
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        let g = GridSpec::parse("h0=10|100|1000,phases=8").unwrap();
        assert_eq!(g.var, GridVar::H0);
        assert_eq!(g.values, vec![10.0, 100.0, 1000.0]);
        assert_eq!(g.phases, 8);
        let g = GridSpec::parse("lambda=10..1000/3").unwrap();
        assert_eq!(g.phases, 1);
        assert_eq!(g.values.len(), 3);
        assert!((g.values[1] - 100.0).abs() < 1e-9);
        assert_eq!(g.values[2], 1000.0);
    }

    #[test]
    fn rejects_malformed_specs() {
        for bad in [
            "",
            "h0",
            "x=1",
            "h0=1..2",
            "h0=-1|2",
            "h0=1,phases=0",
            "h0=1,amp=2",
            "h0=5..1/3",
        ] {
            assert!(GridSpec::parse(bad).is_err(), "{bad}");
        }
    }
}
