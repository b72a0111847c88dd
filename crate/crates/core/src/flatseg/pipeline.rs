use super::blocks::{build_u2, eliminate_star, FlatWindow, LocalBlock, Zone};
use super::staged::{Stage, StagedOperator};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::model::OperatorInstance;
use crate::C64;
use serde::Serialize;

pub const DEFAULT_C1: i32 = 6;

fn window_of(instance: &OperatorInstance) -> Result<FlatWindow> {
    FlatWindow::from_potential(&instance.potential)
        .ok_or_else(|| Error::PreconditionViolated("potential has no flat segment".into()))
}

/// Sites whose `ℓ¹` star of radius `r` fits in the box.
fn anchors(op: &StagedOperator, r: i32) -> Vec<Site> {
    op.index
        .sites()
        .into_iter()
        .filter(|m| m.norm_inf() + r <= op.radius)
        .collect()
}

fn apply_stage(
    op: &mut StagedOperator,
    instance: &OperatorInstance,
    window: &FlatWindow,
    step: u32,
) -> Result<f64> {
    let order = step;
    let mut defect: f64 = 0.0;
    for m in anchors(op, order as i32) {
        let i = op.idx(&m).unwrap();
        let x = op.phases[i];
        match window.zone(x) {
            Zone::Outside => {}
            Zone::Flat => {
                let b = eliminate_star(op, &m, order)?;
                defect = defect.max(b.unitarity_defect());
            }
            Zone::Collar { .. } => {
                let b: LocalBlock = build_u2(instance, window, x, step)?.expect("collar block");
                defect = defect.max(b.unitarity_defect());
                let sites: Vec<usize> = b.sites.iter().map(|e| op.idx(&(m + *e)).unwrap()).collect();
                op.apply_block(&sites, &b.u, order, order as i32)?;
            }
        }
    }
    Ok(defect)
}

/// Step one in place; returns the worst block unitarity defect.
pub(crate) fn apply_step1(op: &mut StagedOperator, instance: &OperatorInstance, window: &FlatWindow) -> Result<f64> {
    let d = apply_stage(op, instance, window, 1)?;
    op.stage = Stage::H1;
    Ok(d)
}

/// `H₁ = U*HU` on the box `|n|_∞ ≤ radius`. Anchors whose star leaves the
/// box are skipped, so a boundary band is not covariant.
pub fn step1(instance: &OperatorInstance, radius: i32) -> Result<StagedOperator> {
    let window = window_of(instance)?;
    window.check_separation(instance.omega(), DEFAULT_C1)?;
    let mut op = StagedOperator::from_instance(instance, radius)?;
    apply_step1(&mut op, instance, &window)?;
    Ok(op)
}

/// `H₂` from `H₁`: eliminates the order-2 entries anchored at flat sites.
pub fn step2(h1: &StagedOperator, instance: &OperatorInstance) -> Result<StagedOperator> {
    if h1.stage != Stage::H1 {
        return Err(Error::PreconditionViolated("step2 expects a step-one operator".into()));
    }
    let window = window_of(instance)?;
    let mut op = h1.clone();
    apply_stage(&mut op, instance, &window, 2)?;
    op.stage = Stage::H2;
    Ok(op)
}

/// The operator of the given stage built on a box of the given radius
/// around the origin at phase `x`.
pub fn local_stage(instance: &OperatorInstance, x: f64, stage: Stage, radius: i32) -> Result<StagedOperator> {
    let inst = instance.with_phase(x)?;
    let window = window_of(instance)?;
    let mut op = StagedOperator::from_instance(&inst, radius)?;
    if stage != Stage::H0 {
        apply_step1(&mut op, &inst, &window)?;
    }
    if stage == Stage::H2 {
        apply_stage(&mut op, &inst, &window, 2)?;
        op.stage = Stage::H2;
    }
    Ok(op)
}

/// `f₁(x) = V₁(x)_{00}`.
pub fn f1_value(instance: &OperatorInstance, x: f64) -> Result<f64> {
    let op = local_stage(instance, x, Stage::H1, 2)?;
    Ok(op.v[op.idx(&Site::zero(instance.dim())).unwrap()])
}

/// `f(x) + ε² Σ_j [1/(f(x) − f(x+ω_j)) + 1/(f(x) − f(x−ω_j))]`.
pub fn f1_second_order(instance: &OperatorInstance, x: f64) -> Result<f64> {
    let f = &instance.potential;
    let fx = f.value(x)?;
    let mut s = 0.0;
    for w in instance.omega() {
        s += 1.0 / (fx - f.value(x + w)?) + 1.0 / (fx - f.value(x - w)?);
    }
    Ok(fx + instance.epsilon * instance.epsilon * s)
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeScan {
    pub epsilon: f64,
    pub points: usize,
    /// Smallest difference quotient of `f₁` on the flat interval.
    pub min_quotient: f64,
    /// Smallest difference quotient of `f₁` on a grid of the same size outside `[a−2h, a+2h]`.
    pub min_quotient_outside: f64,
    /// `max |f₁ − f₁^{(2)}|` over the flat grid.
    pub second_order_residual: f64,
}

/// Difference quotients of `f₁` on a uniform grid of `[a−h, a+h]`.
pub fn slope_scan(instance: &OperatorInstance, points: usize) -> Result<SlopeScan> {
    let w = window_of(instance)?;
    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
    };
    let inside = grid(w.a - w.h, w.a + w.h);
    let vals: Vec<f64> = inside.iter().map(|&x| f1_value(instance, x)).collect::<Result<_>>()?;
    let mut residual: f64 = 0.0;
    for (x, v) in inside.iter().zip(&vals) {
        residual = residual.max((v - f1_second_order(instance, *x)?).abs());
    }
    let dq = |xs: &[f64], ys: &[f64]| -> f64 {
        xs.windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
            .fold(f64::INFINITY, f64::min)
    };
    let outside = grid(w.a + 2.0 * w.h + 0.01, w.a + 0.45);
    let out_vals: Vec<f64> = outside.iter().map(|&x| f1_value(instance, x)).collect::<Result<_>>()?;
    Ok(SlopeScan {
        epsilon: instance.epsilon,
        points,
        min_quotient: dq(&inside, &vals),
        min_quotient_outside: dq(&outside, &out_vals),
        second_order_residual: residual,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FlatsegReport {
    pub radius: i32,
    pub epsilon: f64,
    /// Flat sites whose rows are checked (both stars inside the box).
    pub flat_sites: Vec<Site>,
    pub phi1_flat_rows_zero: bool,
    pub phi2_flat_rows_zero: bool,
    pub range_phi1: i32,
    pub range_phi2_after_step1: i32,
    pub range_phi2_after_step2: i32,
    pub range_phi3: i32,
    pub block_unitarity: f64,
    pub spectral_shift_h1: f64,
    pub spectral_shift_h2: f64,
    pub covariance_defect: f64,
}

fn row_zero(op: &StagedOperator, order: u32, m: &Site) -> bool {
    let i = op.idx(m).unwrap();
    (0..op.len()).all(|k| op.coeff(order, i, k) == C64::new(0.0, 0.0))
}

fn spectral_shift(a: &StagedOperator, b: &StagedOperator) -> Result<f64> {
    let ea = a.matrix();
    let eb = b.matrix();
    let sa = crate::spectra::jacobi_eigen(&ea, crate::spectra::DEFAULT_DIM_CAP)?;
    let sb = crate::spectra::jacobi_eigen(&eb, crate::spectra::DEFAULT_DIM_CAP)?;
    Ok(sa
        .values
        .iter()
        .zip(&sb.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// `max |H_{m,m+e} − H(x₀+m·ω)_{0,e}|` over sites at least `margin` inside
/// the box and `|e|_∞ ≤ reach`, comparing against locally built operators.
pub fn covariance_defect(op: &StagedOperator, instance: &OperatorInstance, margin: i32, reach: i32) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let local_radius = reach + margin;
    for m in op.index.sites() {
        if m.norm_inf() + margin > op.radius {
            continue;
        }
        let x = instance.phase + m.dot(instance.omega());
        let local = local_stage(instance, x, op.stage, local_radius)?;
        let o = local.idx(&Site::zero(op.dim())).unwrap();
        let i = op.idx(&m).unwrap();
        for e in Site::ball(op.dim(), reach) {
            let (Some(k), Some(kl)) = (op.idx(&(m + e)), local.idx(&e)) else {
                continue;
            };
            worst = worst.max((op.entry(i, k) - local.entry(o, kl)).norm());
        }
    }
    Ok(worst)
}

/// Runs both steps on the box and collects the structural and spectral
/// diagnostics.
pub fn flatseg_report(instance: &OperatorInstance, radius: i32, covariance_margin: Option<i32>) -> Result<FlatsegReport> {
    let window = window_of(instance)?;
    let h0 = StagedOperator::from_instance(instance, radius)?;
    let h1 = step1(instance, radius)?;
    let h2 = step2(&h1, instance)?;
    let flat_sites: Vec<Site> = h0
        .index
        .sites()
        .into_iter()
        .filter(|m| m.norm_inf() + 2 <= radius && window.contains(h0.phases[h0.idx(m).unwrap()]))
        .collect();
    let interior = |s: &Site| s.norm_inf() + 4 <= radius;
    let mut unit: f64 = 0.0;
    for m in &flat_sites {
        let x = h0.phases[h0.idx(m).unwrap()];
        for step in [1, 2] {
            if let Some(b) = build_u2(instance, &window, x, step)? {
                unit = unit.max(b.unitarity_defect());
            }
        }
    }
    for i in 0..h0.len() {
        if let Zone::Collar { .. } = window.zone(h0.phases[i]) {
            for step in [1, 2] {
                if let Some(b) = build_u2(instance, &window, h0.phases[i], step)? {
                    unit = unit.max(b.unitarity_defect());
                }
            }
        }
    }
    let covariance_defect = match covariance_margin {
        Some(mg) => covariance_defect(&h2, instance, mg, 2)?,
        None => f64::NAN,
    };
    Ok(FlatsegReport {
        radius,
        epsilon: instance.epsilon,
        phi1_flat_rows_zero: flat_sites.iter().all(|m| row_zero(&h1, 1, m) && row_zero(&h2, 1, m)),
        phi2_flat_rows_zero: flat_sites.iter().all(|m| row_zero(&h2, 2, m)),
        range_phi1: h2.range_of(1, &interior),
        range_phi2_after_step1: h1.range_of(2, &interior),
        range_phi2_after_step2: h2.range_of(2, &interior),
        range_phi3: h2.range_of(3, &interior),
        block_unitarity: unit,
        spectral_shift_h1: spectral_shift(&h0, &h1)?,
        spectral_shift_h2: spectral_shift(&h0, &h2)?,
        covariance_defect,
        flat_sites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FrequencyVector, HoppingKernel, PotentialSpec};

    fn flat_instance(phase: f64, eps: f64) -> OperatorInstance {
        let f = PotentialSpec::flat_segment(0.0, 0.014, 0.007).unwrap();
        let w = FrequencyVector::new(vec![0.618_033_988_749_895], 50, None, None).unwrap();
        OperatorInstance::new_allow_resonance(f, w, HoppingKernel::laplacian(1), phase, eps).unwrap()
    }

    #[test]
    fn zero_coupling_leaves_h_unchanged() {
        let inst = flat_instance(0.1, 0.0);
        let h0 = StagedOperator::from_instance(&inst, 10).unwrap();
        let h1 = step1(&inst, 10).unwrap();
        assert_eq!(h0.matrix(), h1.matrix());
    }

    #[test]
    fn no_flat_sites_means_step2_is_identity() {
        // A box too small to reach any flat or collar phase.
        let inst = flat_instance(0.2, 0.05);
        let h1 = step1(&inst, 2).unwrap();
        let h2 = step2(&h1, &inst).unwrap();
        assert_eq!(h1.matrix(), h2.matrix());
    }

    #[test]
    fn f1_matches_second_order_formula() {
        let coarse = slope_scan(&flat_instance(0.0, 0.02), 41).unwrap();
        let fine = slope_scan(&flat_instance(0.0, 0.01), 41).unwrap();
        assert!(coarse.second_order_residual < 0.02f64.powi(3));
        assert!(coarse.second_order_residual / fine.second_order_residual > 8.0);
    }

    #[test]
    fn diagnostics_on_small_box() {
        let r = flatseg_report(&flat_instance(0.0, 0.02), 12, Some(6)).unwrap();
        assert!(!r.flat_sites.is_empty());
        assert!(r.phi1_flat_rows_zero && r.phi2_flat_rows_zero);
        assert!(r.range_phi2_after_step1 <= 2);
        assert!(r.block_unitarity <= 1e-12);
        assert!(r.spectral_shift_h2 < 1e-10);
        assert!(r.covariance_defect < 1e-10, "{}", r.covariance_defect);
    }
}
