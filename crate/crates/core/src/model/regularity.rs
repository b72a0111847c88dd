use super::PotentialSpec;
use crate::error::{Error, Result};
use crate::lattice::reduce_half;
use serde::Serialize;

/// Grid estimates for the regularity conditions around `x₀`.
#[derive(Clone, Debug, Serialize)]
pub struct RegularityReport {
    pub x0: f64,
    pub nu: f64,
    /// Preimage of `(f(x₀) − 2ν, f(x₀) + 2ν)`.
    pub a: f64,
    pub b: f64,
    /// Preimage of `(f(x₀) − ν, f(x₀) + ν)`.
    pub a1: f64,
    pub b1: f64,
    pub d_min: f64,
    pub d_max: f64,
    /// Smallest `C` with `D_min ≤ f' ≤ C·D_min` on `(a, b)`.
    pub c_slope: f64,
    /// Smallest `C` with `|g'| ≤ C·D_min` outside `(a1, b1)`, `g = 1/(f(x₀) − f)`.
    pub c_inverse: f64,
    pub c_reg: f64,
    pub pass: bool,
}

/// Probe with the standard width `ν = 1`.
pub fn probe_regularity(spec: &PotentialSpec, x0: f64, grid_size: usize) -> Result<RegularityReport> {
    probe_regularity_scaled(spec, x0, grid_size, 1.0)
}

/// Probe with the bands `(f(x₀) ± 2ν)` and `(f(x₀) ± ν)`.
pub fn probe_regularity_scaled(
    spec: &PotentialSpec,
    x0: f64,
    grid_size: usize,
    nu: f64,
) -> Result<RegularityReport> {
    let y0 = reduce_half(x0);
    let f0 = spec.value(y0)?;
    let f = |y: f64| spec.value(y).unwrap_or(if y > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY });
    let step = 1.0 / grid_size as f64;
    let edge = 0.5 - 0.5 * step;

    let (a, b) = preimage(&f, y0, f0, 2.0 * nu, step, edge);
    let (a1, b1) = preimage(&f, y0, f0, nu, step, edge);

    // Injectivity: nothing outside (a, b) maps into the band, and f does not
    // decrease inside it.
    let total = grid_size;
    for i in 0..total {
        let y = -0.5 + (i as f64 + 0.5) * step;
        if (y < a || y > b) && (f(y) - f0).abs() < 2.0 * nu * (1.0 - 1e-12) {
            return Err(Error::NotOneToOne { x: y });
        }
    }

    let cells = (((b - a) * grid_size as f64).ceil() as usize).max(4);
    let hh = (b - a) / cells as f64;
    let mut d_min = f64::INFINITY;
    let mut d_max: f64 = 0.0;
    let mut prev = f(a);
    for i in 1..=cells {
        let y = a + i as f64 * hh;
        let v = f(y);
        let dq = (v - prev) / hh;
        if dq < 0.0 {
            return Err(Error::NotOneToOne { x: y });
        }
        d_min = d_min.min(dq);
        d_max = d_max.max(dq);
        prev = v;
    }

    let g = |y: f64| 1.0 / (f0 - f(y));
    let mut g_slope: f64 = 0.0;
    for (lo, hi) in [(-edge, a1), (b1, edge)] {
        if hi - lo <= step {
            continue;
        }
        let n = ((hi - lo) * grid_size as f64).ceil() as usize;
        let hh = (hi - lo) / n as f64;
        let mut prev = g(lo);
        for i in 1..=n {
            let v = g(lo + i as f64 * hh);
            g_slope = g_slope.max(((v - prev) / hh).abs());
            prev = v;
        }
    }

    let (c_slope, c_inverse) = if d_min > 0.0 {
        (d_max / d_min, g_slope / d_min)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let c_reg = c_slope.max(c_inverse);
    Ok(RegularityReport {
        x0,
        nu,
        a,
        b,
        a1,
        b1,
        d_min,
        d_max,
        c_slope,
        c_inverse,
        c_reg,
        pass: d_min > 0.0 && c_reg.is_finite(),
    })
}

fn preimage(f: &impl Fn(f64) -> f64, y0: f64, f0: f64, w: f64, step: f64, edge: f64) -> (f64, f64) {
    let inside = |y: f64| (f(y) - f0).abs() < w;
    let mut hi = y0;
    while hi + step < edge && inside(hi + step) {
        hi += step;
    }
    let b = if hi + step >= edge { edge } else { bisect(&inside, hi, hi + step) };
    let mut lo = y0;
    while lo - step > -edge && inside(lo - step) {
        lo -= step;
    }
    let a = if lo - step <= -edge { -edge } else { bisect(&inside, lo, lo - step) };
    (a, b)
}

fn bisect(inside: &impl Fn(f64) -> bool, mut good: f64, mut bad: f64) -> f64 {
    for _ in 0..60 {
        let mid = 0.5 * (good + bad);
        if inside(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialKind;
    use std::f64::consts::PI;

    #[test]
    fn maryland_at_zero() {
        let r = probe_regularity(&PotentialSpec::maryland(), 0.0, 10_000).unwrap();
        assert!((r.d_min - PI).abs() < 1e-6, "{}", r.d_min);
        assert!((r.b - 2f64.atan() / PI).abs() < 1e-9);
        // f' ranges over π·[1, 5] on the preimage of (−2, 2).
        assert!((r.c_slope - 5.0).abs() < 1e-2);
        assert!(r.pass);
    }

    #[test]
    fn linear_branch_has_unit_slope_constant() {
        let f = PotentialSpec::new(PotentialKind::PiecewiseUser {
            knots: vec![[-0.45, -4.5], [0.45, 4.5]],
        })
        .unwrap();
        let r = probe_regularity(&f, 0.05, 10_000).unwrap();
        assert!((r.c_slope - 1.0).abs() < 1e-6);
        assert!((r.d_min - 10.0).abs() < 1e-6);
    }

    #[test]
    fn flat_piece_fails() {
        let f = PotentialSpec::flat_segment(0.0, 0.03, 0.02).unwrap();
        let r = probe_regularity(&f, 0.01, 10_000).unwrap();
        assert_eq!(r.d_min, 0.0);
        assert!(!r.pass);
    }
}
