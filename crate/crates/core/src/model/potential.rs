use crate::error::{Error, Result};
use crate::lattice::{dist_to_int, reduce_half};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_DELTA_SING: f64 = 1e-9;

/// The 1-periodic potential `f`. Poles sit at `Z + 1/2` for every kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `tan(πx)`.
    MarylandTan,
    /// `tan(πx) + κ sin(2πx)/(2π)`, strictly increasing for `|κ| < π`.
    MeromorphicMonotoneSample { kappa: f64 },
    /// Linear interpolation through `knots` with tangent-type tails that
    /// match the end slopes and diverge at `±1/2`.
    PiecewiseUser { knots: Vec<[f64; 2]> },
    /// `tan(πψ(x))/π` where `ψ` is the identity off `(a-h, a+h)`, constant
    /// on `[a-h1, a+h1]` and linear in between.
    FlatSegment { a: f64, h: f64, h1: f64, c_plus: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    #[serde(flatten)]
    pub kind: PotentialKind,
    #[serde(default = "default_delta_sing")]
    pub delta_sing: f64,
}

fn default_delta_sing() -> f64 {
    DEFAULT_DELTA_SING
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind) -> Result<Self> {
        let spec = PotentialSpec {
            kind,
            delta_sing: DEFAULT_DELTA_SING,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn maryland() -> Self {
        PotentialSpec {
            kind: PotentialKind::MarylandTan,
            delta_sing: DEFAULT_DELTA_SING,
        }
    }

    pub fn flat_segment(a: f64, h: f64, h1: f64) -> Result<Self> {
        let c_plus = h / (h - h1) / (PI * (a.abs() + 2.0 * h)).cos().powi(2);
        Self::new(PotentialKind::FlatSegment { a, h, h1, c_plus })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            PotentialKind::MarylandTan => {}
            PotentialKind::MeromorphicMonotoneSample { kappa } => {
                if kappa.abs() >= PI {
                    return Err(Error::Invalid(format!(
                        "kappa = {kappa} breaks monotonicity (need |kappa| < pi)"
                    )));
                }
            }
            PotentialKind::PiecewiseUser { knots } => {
                if knots.len() < 2 {
                    return Err(Error::Invalid("need at least two knots".into()));
                }
                for w in knots.windows(2) {
                    if w[1][0] <= w[0][0] || w[1][1] < w[0][1] {
                        return Err(Error::Invalid(
                            "knots must have increasing x and nondecreasing y".into(),
                        ));
                    }
                }
                let (first, last) = (knots[0], knots[knots.len() - 1]);
                if first[0] <= -0.5 || last[0] >= 0.5 {
                    return Err(Error::Invalid("knots must lie inside (-1/2, 1/2)".into()));
                }
                if slope(knots, 0) <= 0.0 || slope(knots, knots.len() - 2) <= 0.0 {
                    return Err(Error::Invalid("end slopes must be positive".into()));
                }
            }
            PotentialKind::FlatSegment { a, h, h1, c_plus } => {
                if !(0.0 < *h1 && h1 < h) {
                    return Err(Error::Invalid("flat segment needs 0 < h1 < h".into()));
                }
                if a - 2.0 * h <= -0.5 || a + 2.0 * h >= 0.5 {
                    return Err(Error::Invalid("[a-2h, a+2h] must lie inside (-1/2, 1/2)".into()));
                }
                if *c_plus <= 0.0 {
                    return Err(Error::Invalid("c_plus must be positive".into()));
                }
            }
        }
        let hi = self.value(0.5 - 1e-7)?;
        let lo = self.value(-0.5 + 1e-7)?;
        if !(hi > 1e4 && lo < -1e4) {
            return Err(Error::Invalid("f does not diverge at the period endpoints".into()));
        }
        Ok(())
    }

    /// `f(x)` with 1-periodic extension.
    pub fn value(&self, x: f64) -> Result<f64> {
        if dist_to_int(x - 0.5) < self.delta_sing {
            return Err(Error::SingularArgument {
                x,
                tol: self.delta_sing,
            });
        }
        Ok(self.eval_reduced(reduce_half(x)))
    }

    fn eval_reduced(&self, y: f64) -> f64 {
        match &self.kind {
            PotentialKind::MarylandTan => (PI * y).tan(),
            PotentialKind::MeromorphicMonotoneSample { kappa } => {
                (PI * y).tan() + kappa * (2.0 * PI * y).sin() / (2.0 * PI)
            }
            PotentialKind::PiecewiseUser { knots } => piecewise(knots, y),
            PotentialKind::FlatSegment { a, h, h1, .. } => {
                (PI * flat_reparam(y, *a, *h, *h1)).tan() / PI
            }
        }
    }

    /// Closed flat piece `[a-h1, a+h1]` and the interval `[a-h, a+h]`.
    pub fn flat_intervals(&self) -> Option<((f64, f64), (f64, f64))> {
        match &self.kind {
            PotentialKind::FlatSegment { a, h, h1, .. } => {
                Some(((a - h1, a + h1), (a - h, a + h)))
            }
            _ => None,
        }
    }

    /// Whether `f` is strictly increasing on each branch.
    pub fn strictly_monotone(&self) -> bool {
        !matches!(self.kind, PotentialKind::FlatSegment { .. })
    }

    /// Largest grid difference quotient decrease found; `None` if nondecreasing.
    pub fn monotonicity_violation(&self, grid: usize) -> Option<f64> {
        let mut prev = self.eval_reduced(-0.5 + 0.5 / grid as f64);
        let mut worst: Option<f64> = None;
        for i in 1..grid {
            let y = -0.5 + (i as f64 + 0.5) / grid as f64;
            let v = self.eval_reduced(y);
            if v < prev {
                worst = Some(worst.map_or(prev - v, |w: f64| w.max(prev - v)));
            }
            prev = v;
        }
        worst
    }
}

fn slope(knots: &[[f64; 2]], i: usize) -> f64 {
    (knots[i + 1][1] - knots[i][1]) / (knots[i + 1][0] - knots[i][0])
}

fn piecewise(knots: &[[f64; 2]], y: f64) -> f64 {
    let k = knots.len();
    let (x1, y1) = (knots[0][0], knots[0][1]);
    let (xk, yk) = (knots[k - 1][0], knots[k - 1][1]);
    if y > xk {
        let span = 0.5 - xk;
        let u = (y - xk) / span;
        return yk + slope(knots, k - 2) * span * (2.0 / PI) * (PI * u / 2.0).tan();
    }
    if y < x1 {
        let span = x1 + 0.5;
        let u = (x1 - y) / span;
        return y1 - slope(knots, 0) * span * (2.0 / PI) * (PI * u / 2.0).tan();
    }
    let i = knots
        .windows(2)
        .position(|w| y <= w[1][0])
        .unwrap_or(k - 2);
    knots[i][1] + slope(knots, i) * (y - knots[i][0])
}

fn flat_reparam(y: f64, a: f64, h: f64, h1: f64) -> f64 {
    let s = y - a;
    if s.abs() >= h {
        y
    } else if s.abs() <= h1 {
        a
    } else {
        a + s.signum() * (s.abs() - h1) * h / (h - h1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maryland_values() {
        let f = PotentialSpec::maryland();
        assert_eq!(f.value(0.0).unwrap(), 0.0);
        assert!((f.value(0.25).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            f.value(0.5),
            Err(Error::SingularArgument { .. })
        ));
        assert!(f.value(0.5 + 1e-6).is_ok());
    }

    #[test]
    fn flat_piece_is_constant() {
        let f = PotentialSpec::flat_segment(0.0, 0.03, 0.02).unwrap();
        assert_eq!(f.value(0.01).unwrap(), f.value(0.0).unwrap());
        assert_eq!(f.value(-0.02).unwrap(), 0.0);
        assert!(f.value(0.025).unwrap() > 0.0);
        assert!(f.monotonicity_violation(10_000).is_none());
    }

    #[test]
    fn piecewise_linear_and_tails() {
        let f = PotentialSpec::new(PotentialKind::PiecewiseUser {
            knots: vec![[-0.45, -4.5], [0.45, 4.5]],
        })
        .unwrap();
        assert!((f.value(0.1).unwrap() - 1.0).abs() < 1e-14);
        let h = 1e-7;
        let d = (f.value(0.45 + h).unwrap() - f.value(0.45).unwrap()) / h;
        assert!((d - 10.0).abs() < 1e-4);
        assert!(f.monotonicity_violation(10_000).is_none());
    }

    #[test]
    fn rejects_bad_kappa() {
        assert!(PotentialSpec::new(PotentialKind::MeromorphicMonotoneSample { kappa: 4.0 }).is_err());
        let g = PotentialSpec::new(PotentialKind::MeromorphicMonotoneSample { kappa: 1.0 }).unwrap();
        assert!(g.monotonicity_violation(10_000).is_none());
    }
}
