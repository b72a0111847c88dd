use super::eigen::EigenSystem;
use super::truncated::{build_truncated, TruncatedOperator};
use crate::error::{Error, Result};
use crate::lattice::{reduce_half, BoxIndex, Site};
use crate::model::{HoppingKernel, OperatorInstance};
use crate::series::{compute_series_longrange, evaluate_partial_sum, SeriesResult, SparseVector};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchReport {
    pub epsilon: f64,
    pub s_used: usize,
    pub partial_sum: f64,
    pub nearest: f64,
    pub delta: f64,
    /// Index of the eigenvector with the largest overlap with the partial-sum vector.
    pub best_vector: usize,
    pub overlap: f64,
    pub best_vector_eigenvalue: f64,
    /// `Σ_{s=S+1}^{order} |λ_s| ε^{s−S−1}`, the coefficient of `ε^{S+1}` in the tail.
    pub tail_coefficient: f64,
}

pub fn match_series_to_spectrum(
    series: &SeriesResult,
    op: &TruncatedOperator,
    system: &EigenSystem,
    epsilon: f64,
    s_used: usize,
) -> MatchReport {
    let (lam, psi) = evaluate_partial_sum(series, epsilon, s_used);
    let (k, nearest) = system
        .values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| (a.1 - lam).abs().total_cmp(&(b.1 - lam).abs()))
        .unwrap_or((0, f64::NAN));
    let _ = k;
    let v = op.embed(&psi);
    let nv = norm(&v);
    let (best, overlap) = system
        .vectors
        .iter()
        .enumerate()
        .map(|(i, u)| (i, dot(u, &v).norm() / nv))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, 0.0));
    let tail_coefficient = (s_used + 1..=series.order)
        .map(|s| series.lambdas[s].abs() * epsilon.powi((s - s_used - 1) as i32))
        .sum();
    MatchReport {
        epsilon,
        s_used,
        partial_sum: lam,
        nearest,
        delta: (nearest - lam).abs(),
        best_vector: best,
        overlap,
        best_vector_eigenvalue: system.values.get(best).copied().unwrap_or(f64::NAN),
        tail_coefficient,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HalvingReport {
    pub coarse: MatchReport,
    pub fine: MatchReport,
    /// `|Δλ(ε)| / |Δλ(ε/2)|`.
    pub ratio: f64,
}

/// Series to order `order` matched against the truncated spectrum at `ε`
/// and `ε/2`.
pub fn halving_check(
    instance: &OperatorInstance,
    radius: i32,
    epsilon: f64,
    s_used: usize,
    order: usize,
) -> Result<HalvingReport> {
    let series = compute_series_longrange(instance, order)?;
    let run = |eps: f64| -> Result<MatchReport> {
        let op = build_truncated(&instance.with_epsilon(eps), radius)?;
        let sys = op.diagonalize()?;
        Ok(match_series_to_spectrum(&series, &op, &sys, eps, s_used))
    };
    let coarse = run(epsilon)?;
    let fine = run(epsilon / 2.0)?;
    Ok(HalvingReport {
        ratio: coarse.delta / fine.delta,
        coarse,
        fine,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LocalizationFit {
    pub center: Site,
    /// Least-squares slope of `log|ψ_m|` against `dist(m, center)`.
    pub rate: f64,
    pub intercept: f64,
    /// `max_{m ≠ center} (|ψ_m| / |ψ_center|)^{1/dist} / ε`: the smallest `C`
    /// with `|ψ_m| ≤ |ψ_center| (Cε)^{dist}`.
    pub envelope_c: f64,
    pub support: usize,
}

/// Decay profile of `v` around `center` in the graph distance of `kernel`.
pub fn localization_profile(v: &SparseVector, center: &Site, epsilon: f64, kernel: &HoppingKernel) -> LocalizationFit {
    let reach = v.keys().map(|n| (*n - *center).norm_inf()).max().unwrap_or(0);
    let table = kernel.distance_table(reach.max(1));
    let c0 = v.get(center).map(|z| z.norm()).unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let pts: Vec<(f64, f64)> = v
        .iter()
        .filter(|(n, z)| **n != *center && z.norm() > 0.0)
        .filter_map(|(n, z)| table.get(&(*n - *center)).map(|d| (d as f64, (z.norm() / c0).ln())))
        .collect();
    let envelope_c = pts
        .iter()
        .map(|(d, l)| (l / d).exp() / epsilon)
        .fold(0.0, f64::max);
    let (rate, intercept) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        (slope, my - slope * mx)
    } else {
        (0.0, 0.0)
    };
    LocalizationFit {
        center: *center,
        rate,
        intercept,
        envelope_c,
        support: pts.len() + 1,
    }
}

/// Whether `log|ψ_m| ≤ dist(m, center)·log(Cε) + slack` on the support.
pub fn envelope_holds(v: &SparseVector, center: &Site, epsilon: f64, c: f64, slack: f64, kernel: &HoppingKernel) -> bool {
    let reach = v.keys().map(|n| (*n - *center).norm_inf()).max().unwrap_or(0);
    let table = kernel.distance_table(reach.max(1));
    v.iter().filter(|(n, _)| **n != *center).all(|(n, z)| {
        let d = table.get(&(*n - *center)).unwrap_or(0) as f64;
        z.norm() == 0.0 || z.norm().ln() <= d * (c * epsilon).ln() + slack
    })
}

/// Series eigenvector for the site `n`, translated so that it is centred at
/// `n`: `ψ[n]_m = ψ(x₀ + n·ω)_{m−n}`.
pub fn translated_vector(instance: &OperatorInstance, n: &Site, epsilon: f64, s_used: usize) -> Result<(f64, SparseVector)> {
    let shifted = instance.with_phase(instance.phase + n.dot(instance.omega()))?;
    let r = compute_series_longrange(&shifted, s_used)?;
    let (lam, psi) = evaluate_partial_sum(&r, epsilon, s_used);
    Ok((lam, psi.into_iter().map(|(m, z)| (m + *n, z)).collect()))
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletenessReport {
    pub epsilon: f64,
    pub inner_radius: i32,
    pub s_used: usize,
    /// `‖U*U − I‖_max` over columns in the inner box.
    pub gram_deviation: f64,
    /// `‖UU* − I‖_max` over rows far enough inside for every contributing column to be present.
    pub frame_deviation: f64,
}

/// Near-unitarity of the matrix whose columns are the translated series
/// vectors `ψ[n]`, `|n|_∞ ≤ inner_radius`.
pub fn completeness_check(
    instance: &OperatorInstance,
    epsilon: f64,
    inner_radius: i32,
    s_used: usize,
) -> Result<CompletenessReport> {
    let dim = instance.dim();
    let reach = instance.hopping.effective_range().max(1) * s_used as i32;
    let cols: Vec<Site> = Site::ball(dim, inner_radius);
    let vecs: Vec<SparseVector> = cols
        .par_iter()
        .map(|n| translated_vector(instance, n, epsilon, s_used).map(|r| r.1))
        .collect::<Result<_>>()?;
    let mut gram: f64 = 0.0;
    for (i, a) in vecs.iter().enumerate() {
        for (j, b) in vecs.iter().enumerate().skip(i) {
            let d: C64 = a
                .iter()
                .filter_map(|(m, x)| b.get(m).map(|y| x.conj() * y))
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            gram = gram.max((d - target).norm());
        }
    }
    let rows_radius = inner_radius - reach;
    let mut frame: f64 = 0.0;
    if rows_radius >= 0 {
        let rows = Site::ball(dim, rows_radius);
        for (i, a) in rows.iter().enumerate() {
            for b in rows.iter().skip(i) {
                let s: C64 = vecs
                    .iter()
                    .filter_map(|v| match (v.get(a), v.get(b)) {
                        (Some(x), Some(y)) => Some(x * y.conj()),
                        _ => None,
                    })
                    .sum();
                let target = if a == b { 1.0 } else { 0.0 };
                frame = frame.max((s - target).norm());
            }
        }
    }
    Ok(CompletenessReport {
        epsilon,
        inner_radius,
        s_used,
        gram_deviation: gram,
        frame_deviation: frame,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowReport {
    /// Phase interval `(α, β)` and its image `(f(α), f(β))`.
    pub alpha: f64,
    pub beta: f64,
    pub f_alpha: f64,
    pub f_beta: f64,
    pub margin: f64,
    pub window_sites: usize,
    pub checked_vectors: usize,
    /// Smallest norm of the projection of a checked eigenvector onto the span.
    pub min_overlap: f64,
    /// Smallest `‖(H − mid)ψ‖ / (half-width·‖ψ‖)` over random `ψ` orthogonal to the span.
    pub min_orthogonal_ratio: f64,
}

/// Eigenvectors with eigenvalues inside the shrunken window and centre in
/// the inner box should lie in the span of the series vectors whose phases
/// fall in `(α, β)`; vectors orthogonal to that span should stay at least
/// half the window width from its midpoint.
pub fn window_projection_check(
    instance: &OperatorInstance,
    window: (f64, f64),
    epsilon: f64,
    radius: i32,
    inner_radius: i32,
    s_used: usize,
    seed: u64,
) -> Result<WindowReport> {
    let (alpha, beta) = window;
    if !(alpha < beta) {
        return Err(Error::Invalid("window must satisfy α < β".into()));
    }
    let inst = instance.with_epsilon(epsilon);
    let op = build_truncated(&inst, radius)?;
    let sys = op.diagonalize()?;
    let f_alpha = inst.potential.value(alpha)?;
    let f_beta = inst.potential.value(beta)?;
    let dim = inst.dim();
    let sites = Site::ball(dim, radius);
    let in_window: Vec<Site> = sites
        .into_iter()
        .filter(|n| {
            let x = reduce_half(inst.phase + n.dot(inst.omega()));
            alpha < x && x < beta
        })
        .collect();
    let series: Vec<(f64, SparseVector)> = in_window
        .par_iter()
        .map(|n| translated_vector(&inst, n, epsilon, s_used))
        .collect::<Result<_>>()?;
    let margin = 5.0
        * in_window
            .iter()
            .zip(&series)
            .map(|(n, (lam, _))| (lam - inst.v(n).unwrap_or(*lam)).abs())
            .fold(0.0, f64::max);

    // Orthonormal basis of the span, restricted to the box.
    let mut basis: Vec<Vec<C64>> = vec![];
    for (_, psi) in &series {
        let mut v = op.embed(psi);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            basis.push(v.into_iter().map(|z| z / nv).collect());
        }
    }
    let project_norm = |v: &[C64]| -> f64 {
        basis.iter().map(|b| dot(b, v).norm_sqr()).sum::<f64>().sqrt()
    };

    let inner = BoxIndex::new(dim, inner_radius);
    let mut checked = 0;
    let mut min_overlap: f64 = 1.0;
    for (lam, v) in sys.values.iter().zip(&sys.vectors) {
        if *lam < f_alpha + margin || *lam > f_beta - margin {
            continue;
        }
        let centre = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| op.site(i))
            .unwrap();
        if !inner.contains(&centre) {
            continue;
        }
        checked += 1;
        min_overlap = min_overlap.min(project_norm(v));
    }

    let mid = 0.5 * (f_alpha + f_beta);
    let half = 0.5 * (f_beta - f_alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..20 {
        let mut v: Vec<C64> = (0..op.len())
            .map(|i| {
                if inner.contains(&op.site(i)) {
                    C64::new(rng.gen_range(-1.0..1.0), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &v);
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nv = norm(&v);
        if nv < 1e-12 {
            continue;
        }
        let hv = op.matrix.apply(&v);
        let r: Vec<C64> = hv.iter().zip(&v).map(|(a, b)| a - b * mid).collect();
        min_ratio = min_ratio.min(norm(&r) / (half * nv));
    }
    Ok(WindowReport {
        alpha,
        beta,
        f_alpha,
        f_beta,
        margin,
        window_sites: in_window.len(),
        checked_vectors: checked,
        min_overlap,
        min_orthogonal_ratio: min_ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdsPoint {
    pub energy: f64,
    pub counted: f64,
    pub predicted: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdsReport {
    pub radius: i32,
    pub points: Vec<IdsPoint>,
    pub max_error: f64,
}

/// Partial sum `λ(x)` at phase `x`.
pub fn lambda_at(instance: &OperatorInstance, x: f64, epsilon: f64, s_used: usize) -> Result<f64> {
    let inst = instance.with_phase(x)?;
    let r = compute_series_longrange(&inst, s_used)?;
    Ok(evaluate_partial_sum(&r, epsilon, s_used).0)
}

/// `λ^{-1}(E)` on `(−1/2, 1/2)` by bisection; `λ` is assumed increasing.
pub fn invert_lambda(instance: &OperatorInstance, energy: f64, epsilon: f64, s_used: usize) -> Result<f64> {
    let (mut lo, mut hi) = (-0.5 + 1e-9, 0.5 - 1e-9);
    let eval = |x: f64| lambda_at(instance, x, epsilon, s_used);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match eval(mid) {
            Ok(v) if v <= energy => lo = mid,
            Ok(_) => hi = mid,
            Err(_) => {
                // Resonant or singular phase: nudge and retry once.
                let v = eval(mid + 1e-9)?;
                if v <= energy {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Eigenvalue counting on the box against `λ^{-1}(E) + 1/2`.
pub fn ids_check(instance: &OperatorInstance, radius: i32, energies: &[f64], s_used: usize) -> Result<IdsReport> {
    let op = build_truncated(instance, radius)?;
    let sys = op.diagonalize()?;
    let total = op.len() as f64;
    let points: Vec<IdsPoint> = energies
        .par_iter()
        .map(|&e| {
            let counted = sys.values.iter().filter(|&&l| l <= e).count() as f64 / total;
            let predicted = invert_lambda(instance, e, instance.epsilon, s_used)? + 0.5;
            Ok(IdsPoint {
                energy: e,
                counted,
                predicted,
            })
        })
        .collect::<Result<_>>()?;
    let max_error = points.iter().map(|p| (p.counted - p.predicted).abs()).fold(0.0, f64::max);
    Ok(IdsReport {
        radius,
        points,
        max_error,
    })
}
