use std::str::FromStr;

/// Sweep grid given as `MIN:MAX:POINTS[:log]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub log: bool,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..self.points)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == n {
                    return self.max;
                }
                let f = i as f64 / n as f64;
                if self.log {
                    (self.min.ln() + f * (self.max.ln() - self.min.ln())).exp()
                } else {
                    self.min + f * (self.max - self.min)
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(format!("expected MIN:MAX:POINTS[:log], got `{s}`"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number"));
        let (min, max) = (num(parts[0])?, num(parts[1])?);
        let points: usize = parts[2].trim().parse().map_err(|_| format!("`{}` is not a point count", parts[2]))?;
        let log = match parts.get(3).map(|p| p.trim()) {
            None | Some("lin") | Some("linear") => false,
            Some("log") => true,
            Some(other) => return Err(format!("unknown grid spacing `{other}`")),
        };
        if !min.is_finite() || !max.is_finite() || min > max {
            return Err(format!("grid needs finite MIN <= MAX, got {min}:{max}"));
        }
        if points < 2 {
            return Err("grid needs at least 2 points".into());
        }
        if log && min <= 0.0 {
            return Err("log grid needs positive endpoints".into());
        }
        Ok(Grid { min, max, points, log })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_spaces() {
        let g: Grid = "1e-8:1e-1:50:log".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 50);
        assert_eq!((v[0], v[49]), (1e-8, 1e-1));
        assert!((v[1] / v[0] - v[2] / v[1]).abs() < 1e-9);
        let lin: Grid = "0:4:5".parse().unwrap();
        assert_eq!(lin.values(), [0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_bad_grids() {
        for bad in ["0:1", "0:1:1", "0:1:5:log", "2:1:5", "a:1:3", "0:1:3:cubic"] {
            assert!(bad.parse::<Grid>().is_err(), "{bad}");
        }
    }
}
