//! Rayleigh–Schrödinger coefficients `λ_s`, `ψ_s` by the projection recursion.
//!
//! With `ψ_0 = e_0`, `(ψ_s)_0 = 0` and `R = (V_0 − V)^{-1}` extended by zero at
//! the origin,
//!
//! ```text
//! λ_k = ⟨Σ_j Φ^j ψ_{k−j}, e_0⟩
//! ψ_k = R (Σ_j Φ^j ψ_{k−j} − Σ_{i<k} λ_i ψ_{k−i})
//! ```
//!
//! Coefficients carry no powers of ε; ε enters only in partial sums.

use crate::error::{Error, Result};
use crate::lattice::{BoxIndex, Site};
use crate::model::OperatorInstance;
use crate::C64;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

pub type SparseVector = BTreeMap<Site, C64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Recursion,
    PathSum,
    ClassSum,
}

#[derive(Clone, Debug)]
pub struct SeriesResult {
    pub order: usize,
    pub lambdas: Vec<f64>,
    /// Imaginary parts dropped from `λ_s` (roundoff for Hermitian input).
    pub lambda_imag: Vec<f64>,
    pub psis: Vec<SparseVector>,
    pub method: Method,
    pub instance: OperatorInstance,
}

/// Nearest-neighbour recursion `ψ_s = R(Φψ_{s−1} − Σ_{i<s} λ_i ψ_{s−i})` on
/// sparse vectors. The kernel must contain order-one terms only.
pub fn compute_series_recursive(instance: &OperatorInstance, order: usize) -> Result<SeriesResult> {
    if instance.hopping.orders().any(|j| j != 1) {
        return Err(Error::Invalid(
            "the single-order recursion needs a kernel with only order-one terms".into(),
        ));
    }
    let v0 = instance.v0()?;
    let dim = instance.dim();
    let origin = Site::zero(dim);
    let moves = instance.hopping.offsets(1);
    let mut inv_cache: HashMap<Site, f64> = HashMap::new();
    let mut inv = |n: &Site| -> Result<f64> {
        if let Some(v) = inv_cache.get(n) {
            return Ok(*v);
        }
        let d = v0 - instance.v(n)?;
        if d.abs() < instance.delta_res {
            return Err(Error::ResonantSite(*n));
        }
        inv_cache.insert(*n, 1.0 / d);
        Ok(1.0 / d)
    };

    let mut psis: Vec<SparseVector> = vec![BTreeMap::from([(origin, C64::new(1.0, 0.0))])];
    let mut lambdas = vec![v0];
    let mut lambda_imag = vec![0.0];
    for s in 1..=order {
        let mut w: SparseVector = BTreeMap::new();
        for (n, val) in &psis[s - 1] {
            for m in &moves {
                let target = *n + *m;
                let h = instance.hop(1, &target, n, 0.0);
                *w.entry(target).or_insert(C64::new(0.0, 0.0)) += h * val;
            }
        }
        let lam = w.get(&origin).copied().unwrap_or_default();
        for i in 1..s {
            for (n, val) in &psis[s - i] {
                *w.entry(*n).or_insert(C64::new(0.0, 0.0)) -= lambdas[i] * val;
            }
        }
        let mut next = BTreeMap::new();
        for (n, val) in w {
            if n.is_zero() || val == C64::new(0.0, 0.0) {
                continue;
            }
            next.insert(n, val * inv(&n)?);
        }
        psis.push(next);
        lambdas.push(lam.re);
        lambda_imag.push(lam.im);
    }
    Ok(SeriesResult {
        order,
        lambdas,
        lambda_imag,
        psis,
        method: Method::Recursion,
        instance: instance.clone(),
    })
}

/// Multi-order recursion for `H = V + Σ_j ε^j Φ^j`, on a dense box.
pub fn compute_series_longrange(instance: &OperatorInstance, order: usize) -> Result<SeriesResult> {
    let dim = instance.dim();
    let reach = instance.hopping.effective_range().max(1);
    let radius = order as i32 * reach;
    let bx = BoxIndex::new(dim, radius);
    let sites = bx.sites();
    let v0 = instance.v0()?;
    let dist = instance.hopping.distance_table(radius);
    let origin_idx = bx.index(&Site::zero(dim)).unwrap();

    let mut inv = vec![0.0; bx.len()];
    for (i, n) in sites.iter().enumerate() {
        if n.is_zero() || dist.get(n).is_none_or(|d| d as usize > order) {
            continue;
        }
        let d = v0 - instance.v(n)?;
        if d.abs() < instance.delta_res {
            return Err(Error::ResonantSite(*n));
        }
        inv[i] = 1.0 / d;
    }

    // Incoming moves per order: (Φ^j ψ)_m = Σ_δ Φ^j_{m, m−δ} ψ_{m−δ}.
    let orders: Vec<u32> = instance.hopping.orders().collect();
    let offsets: BTreeMap<u32, Vec<Site>> = orders
        .iter()
        .map(|&j| (j, instance.hopping.offsets(j)))
        .collect();
    let apply = |j: u32, psi: &[C64]| -> Vec<C64> {
        let offs = &offsets[&j];
        sites
            .par_iter()
            .map(|m| {
                let mut acc = C64::new(0.0, 0.0);
                for d in offs {
                    let n = *m - *d;
                    if let Some(k) = bx.index(&n) {
                        if psi[k] != C64::new(0.0, 0.0) {
                            acc += instance.hop(j, m, &n, 0.0) * psi[k];
                        }
                    }
                }
                acc
            })
            .collect()
    };

    let mut dense: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); bx.len()]];
    dense[0][origin_idx] = C64::new(1.0, 0.0);
    let mut lambdas = vec![v0];
    let mut lambda_imag = vec![0.0];
    for k in 1..=order {
        let mut w = vec![C64::new(0.0, 0.0); bx.len()];
        for &j in &orders {
            if j as usize > k {
                continue;
            }
            let part = apply(j, &dense[k - j as usize]);
            for (a, b) in w.iter_mut().zip(part) {
                *a += b;
            }
        }
        let lam = w[origin_idx];
        for i in 1..k {
            let li = lambdas[i];
            if li == 0.0 {
                continue;
            }
            for (a, b) in w.iter_mut().zip(&dense[k - i]) {
                *a -= li * b;
            }
        }
        let next: Vec<C64> = w.iter().zip(&inv).map(|(a, r)| a * r).collect();
        dense.push(next);
        lambdas.push(lam.re);
        lambda_imag.push(lam.im);
    }
    let psis = dense
        .into_iter()
        .map(|v| {
            v.into_iter()
                .enumerate()
                .filter(|(_, z)| *z != C64::new(0.0, 0.0))
                .map(|(i, z)| (sites[i], z))
                .collect()
        })
        .collect();
    Ok(SeriesResult {
        order,
        lambdas,
        lambda_imag,
        psis,
        method: Method::Recursion,
        instance: instance.clone(),
    })
}

/// `(Σ_{s≤S} ε^s λ_s, Σ_{s≤S} ε^s ψ_s)`.
pub fn evaluate_partial_sum(result: &SeriesResult, epsilon: f64, s_used: usize) -> (f64, SparseVector) {
    let s_used = s_used.min(result.order);
    let mut lam = 0.0;
    let mut psi: SparseVector = BTreeMap::new();
    let mut p = 1.0;
    for s in 0..=s_used {
        lam += p * result.lambdas[s];
        for (n, v) in &result.psis[s] {
            *psi.entry(*n).or_insert(C64::new(0.0, 0.0)) += p * v;
        }
        p *= epsilon;
    }
    (lam, psi)
}

impl SeriesResult {
    /// Relative size of the `ε^s` coefficient of `(V + Σ ε^jΦ^j)ψ − λψ`.
    pub fn residuals(&self) -> Result<Vec<f64>> {
        let inst = &self.instance;
        let orders: Vec<u32> = inst.hopping.orders().collect();
        let mut out = Vec::with_capacity(self.order + 1);
        for s in 0..=self.order {
            let mut acc: BTreeMap<Site, C64> = BTreeMap::new();
            let mut scale: f64 = 0.0;
            let mut add = |acc: &mut BTreeMap<Site, C64>, n: Site, v: C64| {
                scale = scale.max(v.norm());
                *acc.entry(n).or_insert(C64::new(0.0, 0.0)) += v;
            };
            for (n, v) in &self.psis[s] {
                add(&mut acc, *n, inst.v(n)? * v);
            }
            for &j in &orders {
                if j as usize > s {
                    continue;
                }
                for (n, v) in &self.psis[s - j as usize] {
                    for d in inst.hopping.offsets(j) {
                        let m = *n + d;
                        add(&mut acc, m, inst.hop(j, &m, n, 0.0) * v);
                    }
                }
            }
            for i in 0..=s {
                for (n, v) in &self.psis[s - i] {
                    add(&mut acc, *n, -self.lambdas[i] * v);
                }
            }
            let worst = acc.values().map(|z| z.norm()).fold(0.0, f64::max);
            out.push(if scale > 0.0 { worst / scale } else { 0.0 });
        }
        Ok(out)
    }

    /// `1 / max_{s ≥ S/2} |λ_s|^{1/s}` over nonzero coefficients.
    pub fn radius_estimate(&self) -> Option<f64> {
        let start = (self.order / 2).max(2);
        let m = (start..=self.order)
            .filter(|&s| self.lambdas[s] != 0.0)
            .map(|s| self.lambdas[s].abs().powf(1.0 / s as f64))
            .fold(0.0, f64::max);
        (m > 0.0).then(|| 1.0 / m)
    }

    pub fn support_radius(&self, s: usize) -> i32 {
        self.psis[s].keys().map(Site::norm_inf).max().unwrap_or(0)
    }
}

/// One point of a `λ(x)` scan.
#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub lambda: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaCurve {
    pub epsilon: f64,
    pub order: usize,
    pub points: Vec<CurvePoint>,
    /// Strict increase across consecutive successful points.
    pub strictly_increasing: bool,
    pub min_increment: f64,
}

/// Partial sums `λ(x)` at order `S` on a grid of phases.
pub fn lambda_of_x(base: &OperatorInstance, order: usize, epsilon: f64, grid: &[f64]) -> LambdaCurve {
    let points: Vec<CurvePoint> = grid
        .par_iter()
        .map(|&x| {
            let r = base
                .with_phase(x)
                .and_then(|inst| compute_series_longrange(&inst, order));
            match r {
                Ok(res) => CurvePoint {
                    x,
                    lambda: Some(evaluate_partial_sum(&res, epsilon, order).0),
                    error: None,
                },
                Err(e) => CurvePoint {
                    x,
                    lambda: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let vals: Vec<f64> = points.iter().filter_map(|p| p.lambda).collect();
    let min_increment = vals
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    LambdaCurve {
        epsilon,
        order,
        strictly_increasing: min_increment > 0.0,
        min_increment,
        points,
    }
}
