use super::staged::{EliminationPair, StagedOperator, DEFAULT_DELTA_RES};
use crate::error::{Error, Result};
use crate::lattice::{reduce_half, Site};
use crate::model::{OperatorInstance, PotentialSpec};
use crate::spectra::{jacobi_eigen, HermitianMatrix, DEFAULT_DIM_CAP};
use crate::C64;
use serde::Serialize;

/// The interval `[a − h, a + h]` (mod 1) and its collars of width `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlatWindow {
    pub a: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Zone {
    Flat,
    /// Interpolation between the identity (`t = 0`) and the block at `edge` (`t = 1`).
    Collar { edge: f64, t: f64 },
    Outside,
}

impl FlatWindow {
    pub fn from_potential(f: &PotentialSpec) -> Option<Self> {
        f.flat_intervals().map(|(_, (lo, hi))| FlatWindow {
            a: 0.5 * (lo + hi),
            h: 0.5 * (hi - lo),
        })
    }

    pub fn zone(&self, x: f64) -> Zone {
        let s = reduce_half(x - self.a);
        if s.abs() <= self.h {
            Zone::Flat
        } else if s.abs() < 2.0 * self.h {
            Zone::Collar {
                edge: self.a + s.signum() * self.h,
                t: (2.0 * self.h - s.abs()) / self.h,
            }
        } else {
            Zone::Outside
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.zone(x) == Zone::Flat
    }

    /// Separation `‖n·ω‖ ≥ 6h` for `1 ≤ |n|_∞ ≤ c1`.
    pub fn check_separation(&self, omega: &[f64], c1: i32) -> Result<()> {
        for n in Site::ball(omega.len(), c1) {
            if n.is_zero() {
                continue;
            }
            let d = crate::lattice::dist_to_int(n.dot(omega));
            if d < 6.0 * self.h {
                return Err(Error::PreconditionViolated(format!(
                    "‖n·ω‖ = {d:.6} < 6h = {:.6} at n = {n}",
                    6.0 * self.h
                )));
            }
        }
        Ok(())
    }
}

/// Nonzero offsets with `|e|_1 ≤ r`, in lexicographic order.
pub fn star_offsets(dim: usize, r: i32) -> Vec<Site> {
    Site::ball(dim, r)
        .into_iter()
        .filter(|e| !e.is_zero() && e.norm_l1() <= r)
        .collect()
}

/// A unitary on the star `{0} ∪ offsets`, row-major over `sites`.
#[derive(Clone, Debug)]
pub struct LocalBlock {
    pub sites: Vec<Site>,
    pub u: Vec<C64>,
}

impl LocalBlock {
    pub fn identity(sites: Vec<Site>) -> Self {
        let k = sites.len();
        let mut u = vec![C64::new(0.0, 0.0); k * k];
        for i in 0..k {
            u[i * k + i] = C64::new(1.0, 0.0);
        }
        LocalBlock { sites, u }
    }

    pub fn size(&self) -> usize {
        self.sites.len()
    }

    /// Right-multiplies by the pair rotation.
    fn push(&mut self, p: &EliminationPair) {
        let k = self.size();
        let a = self.sites.iter().position(|s| s.is_zero()).unwrap();
        let b = self.sites.iter().position(|s| *s == p.offset).unwrap();
        for row in 0..k {
            let ua = self.u[row * k + a];
            let ub = self.u[row * k + b];
            self.u[row * k + a] = ua * p.c - ub * p.sigma.conj();
            self.u[row * k + b] = ua * p.sigma + ub * p.c;
        }
    }

    /// `‖U*U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let k = self.size();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let s: C64 = (0..k).map(|m| self.u[m * k + i].conj() * self.u[m * k + j]).sum();
                let t = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - t).norm());
            }
        }
        worst
    }
}

/// Unitary factor of `p` from the eigendecomposition of `p*p`.
pub fn polar_unitary(p: &[C64], k: usize, x: f64) -> Result<Vec<C64>> {
    let mut g = HermitianMatrix::zeros(k);
    for i in 0..k {
        for j in 0..k {
            let s: C64 = (0..k).map(|m| p[m * k + i].conj() * p[m * k + j]).sum();
            g.set(i, j, s);
        }
    }
    for i in 0..k {
        for j in 0..i {
            let z = g.get(j, i).conj();
            g.set(i, j, z);
        }
        let d = g.get(i, i).re;
        g.set(i, i, C64::new(d, 0.0));
    }
    let sys = jacobi_eigen(&g, DEFAULT_DIM_CAP)?;
    if sys.values[0] <= 1e-12 {
        return Err(Error::InterpolationSingular { x });
    }
    // (p*p)^{-1/2} = Q diag(λ^{-1/2}) Q*.
    let mut inv = vec![C64::new(0.0, 0.0); k * k];
    for (l, q) in sys.values.iter().zip(&sys.vectors) {
        let w = 1.0 / l.sqrt();
        for i in 0..k {
            for j in 0..k {
                inv[i * k + j] += q[i] * q[j].conj() * w;
            }
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in 0..k {
            out[i * k + j] = (0..k).map(|m| p[i * k + m] * inv[m * k + j]).sum();
        }
    }
    Ok(out)
}

/// `((1 − t)I + tU)|(1 − t)I + tU|^{-1}`.
pub fn interpolate(block: &LocalBlock, t: f64, x: f64) -> Result<LocalBlock> {
    let k = block.size();
    let mut p: Vec<C64> = block.u.iter().map(|z| z * t).collect();
    for i in 0..k {
        p[i * k + i] += 1.0 - t;
    }
    Ok(LocalBlock {
        sites: block.sites.clone(),
        u: polar_unitary(&p, k, x)?,
    })
}

fn local_operator(instance: &OperatorInstance, x: f64, radius: i32) -> Result<StagedOperator> {
    StagedOperator::from_instance(&instance.with_phase(x)?, radius)
}

/// Product of the eliminations of the order-`order` entries `(0, e)`,
/// `|e|_1 ≤ order`, in `op`, in lexicographic order of `e`.
pub(crate) fn eliminate_star(op: &mut StagedOperator, anchor: &Site, order: u32) -> Result<LocalBlock> {
    let offsets = star_offsets(op.dim(), order as i32);
    let mut sites = vec![Site::zero(op.dim())];
    sites.extend(offsets.iter().copied());
    let mut block = LocalBlock::identity(sites);
    for e in &offsets {
        if let Some(p) = op.eliminate_entry(anchor, e, order, DEFAULT_DELTA_RES)? {
            block.push(&p);
        }
    }
    Ok(block)
}

/// Step-one block at phase `x`: eliminations of the order-1 entries of the
/// star of the origin in `H(x)`.
pub fn step1_block(instance: &OperatorInstance, x: f64) -> Result<LocalBlock> {
    let mut op = local_operator(instance, x, 1)?;
    eliminate_star(&mut op, &Site::zero(instance.dim()), 1)
}

/// Step-two block at phase `x`: eliminations of the order-2 entries of the
/// `ℓ¹`-radius-2 star of the origin in `H₁(x)`.
pub fn step2_block(instance: &OperatorInstance, window: &FlatWindow, x: f64) -> Result<LocalBlock> {
    let mut op = local_operator(instance, x, 3)?;
    super::pipeline::apply_step1(&mut op, instance, window)?;
    eliminate_star(&mut op, &Site::zero(instance.dim()), 2)
}

/// The interpolated block of the given step at phase `x`; `None` outside
/// the flat interval and its collars.
pub fn build_u2(instance: &OperatorInstance, window: &FlatWindow, x: f64, step: u32) -> Result<Option<LocalBlock>> {
    let at = |y: f64| match step {
        1 => step1_block(instance, y),
        _ => step2_block(instance, window, y),
    };
    match window.zone(x) {
        Zone::Flat => at(x).map(Some),
        Zone::Collar { edge, t } => interpolate(&at(edge)?, t, x).map(Some),
        Zone::Outside => Ok(None),
    }
}
