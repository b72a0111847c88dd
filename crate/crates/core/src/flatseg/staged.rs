use crate::error::{Error, Result};
use crate::lattice::{reduce_half, BoxIndex, Site};
use crate::model::OperatorInstance;
use crate::spectra::HermitianMatrix;
use crate::C64;
use serde::Serialize;

/// Highest bucket; every correction carrying three or more powers of `ε` lands here.
pub const TOP_ORDER: u32 = 3;
pub const DEFAULT_DELTA_RES: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stage {
    H0,
    H1,
    H2,
}

/// `V + εΦ¹ + ε²Φ² + ε³Φ³` on a box. The diagonal carries every order
/// exactly; off-diagonal entries are stored as `ε`-free coefficients per
/// bucket.
#[derive(Clone, Debug)]
pub struct StagedOperator {
    pub index: BoxIndex,
    pub radius: i32,
    pub epsilon: f64,
    /// Reduced phase `x₀ + n·ω` per site.
    pub phases: Vec<f64>,
    pub v: Vec<f64>,
    pub phi: [Vec<C64>; 3],
    pub stage: Stage,
}

/// The rotation `[[c, σ], [−σ̄, c]]` on the pair `(anchor, anchor + offset)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EliminationPair {
    pub anchor: Site,
    pub offset: Site,
    pub order: u32,
    pub d: f64,
    pub c: f64,
    pub sigma: C64,
}

impl EliminationPair {
    /// `‖U*U − I‖_max` of the 2×2 block.
    pub fn unitarity_defect(&self) -> f64 {
        let (c, s) = (self.c, self.sigma);
        let diag = (c * c + s.norm_sqr() - 1.0).abs();
        let off = (c * s - s * c).norm();
        diag.max(off)
    }
}

fn bucket(order: u32) -> u32 {
    order.min(TOP_ORDER)
}

impl StagedOperator {
    pub fn from_instance(instance: &OperatorInstance, radius: i32) -> Result<Self> {
        let dim = instance.dim();
        let index = BoxIndex::new(dim, radius);
        let sites = index.sites();
        let n = sites.len();
        let eps = instance.epsilon;
        let mut v = Vec::with_capacity(n);
        let mut phases = Vec::with_capacity(n);
        for s in &sites {
            v.push(instance.v(s)?);
            phases.push(reduce_half(instance.phase + s.dot(instance.omega())));
        }
        let zero = C64::new(0.0, 0.0);
        let mut phi = [vec![zero; n * n], vec![zero; n * n], vec![zero; n * n]];
        for j in instance.hopping.orders() {
            let b = bucket(j);
            let carry = eps.powi((j - b) as i32);
            for d in instance.hopping.offsets(j) {
                for (i, m) in sites.iter().enumerate() {
                    if let Some(k) = index.index(&(*m - d)) {
                        if k != i {
                            phi[b as usize - 1][i * n + k] += instance.hop(j, m, &(*m - d), 0.0) * carry;
                        }
                    }
                }
            }
        }
        Ok(StagedOperator {
            index,
            radius,
            epsilon: eps,
            phases,
            v,
            phi,
            stage: Stage::H0,
        })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.index.dim
    }

    pub fn site(&self, i: usize) -> Site {
        self.index.site(i)
    }

    pub fn idx(&self, s: &Site) -> Option<usize> {
        self.index.index(s)
    }

    /// Coefficient of `ε^order` at `(i, k)`, `order ∈ 1..=3`.
    pub fn coeff(&self, order: u32, i: usize, k: usize) -> C64 {
        self.phi[order as usize - 1][i * self.len() + k]
    }

    fn set_pair(&mut self, order: u32, i: usize, k: usize, z: C64) {
        let n = self.len();
        self.phi[order as usize - 1][i * n + k] = z;
        self.phi[order as usize - 1][k * n + i] = z.conj();
    }

    /// Full matrix entry `H_{ik}`.
    pub fn entry(&self, i: usize, k: usize) -> C64 {
        if i == k {
            return C64::new(self.v[i], 0.0);
        }
        (1..=TOP_ORDER)
            .map(|j| self.coeff(j, i, k) * self.epsilon.powi(j as i32))
            .sum()
    }

    pub fn matrix(&self) -> HermitianMatrix {
        let n = self.len();
        let mut m = HermitianMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                m.set(i, k, self.entry(i, k));
            }
        }
        m
    }

    /// Largest `|m − n|_1` with a nonzero coefficient in bucket `order`,
    /// over rows whose site satisfies `keep`.
    pub fn range_of(&self, order: u32, keep: &dyn Fn(&Site) -> bool) -> i32 {
        let n = self.len();
        let mut worst = 0;
        for i in 0..n {
            let si = self.site(i);
            if !keep(&si) {
                continue;
            }
            for k in 0..n {
                if self.coeff(order, i, k) != C64::new(0.0, 0.0) {
                    worst = worst.max((self.site(k) - si).norm_l1());
                }
            }
        }
        worst
    }

    /// Elimination of the order-`order` entry between `anchor` and
    /// `anchor + offset`, using only that entry for the rotation. The
    /// targeted coefficient is set to zero; its replacement is of order
    /// `3·order` and goes to the top bucket. Returns `None` when the entry
    /// already vanishes.
    pub fn eliminate_entry(
        &mut self,
        anchor: &Site,
        offset: &Site,
        order: u32,
        delta_res: f64,
    ) -> Result<Option<EliminationPair>> {
        if !(1..=2).contains(&order) {
            return Err(Error::Invalid(format!("elimination order {order} not in 1..=2")));
        }
        let outside = || Error::Invalid(format!("pair {anchor} + {offset} leaves the box"));
        let i0 = self.idx(anchor).ok_or_else(outside)?;
        let i1 = self.idx(&(*anchor + *offset)).ok_or_else(outside)?;
        let phi = self.coeff(order, i0, i1);
        if phi == C64::new(0.0, 0.0) {
            return Ok(None);
        }
        let eps = self.epsilon;
        let n = self.len();
        let ej = eps.powi(order as i32);
        let g2 = (ej * phi).norm_sqr();
        let v0 = self.v[i0];
        let dv = self.v[i1] - v0;
        let d = (dv * dv + g2).sqrt();
        if d < delta_res {
            return Err(Error::DegeneratePair {
                anchor: *anchor,
                offset: *offset,
                d,
            });
        }
        let sgn = if dv < 0.0 { -1.0 } else { 1.0 };
        let c = dv.abs() / d;
        // σ = s·ε^j·φ/D; `rho` is its ε-free part.
        let rho = phi * (sgn / d);
        let sigma = rho * ej;

        // Rows of the pair against every other site.
        let mut row0 = [vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n], vec![C64::new(0.0, 0.0); n]];
        let mut row1 = row0.clone();
        for b in 1..=TOP_ORDER {
            let tb = bucket(order + b);
            let carry = eps.powi((order + b - tb) as i32);
            for m in 0..n {
                if m == i0 || m == i1 {
                    continue;
                }
                let h0 = self.coeff(b, i0, m);
                let h1 = self.coeff(b, i1, m);
                row0[b as usize - 1][m] += h0 * c;
                row1[b as usize - 1][m] += h1 * c;
                row0[tb as usize - 1][m] -= rho * h1 * carry;
                row1[tb as usize - 1][m] += rho.conj() * h0 * carry;
            }
        }

        // The pair block itself.
        let mut new_v0 = v0 - dv * g2 / (d * d);
        let mut new_v1 = v0 + (dv * dv * dv + 2.0 * g2 * dv) / (d * d);
        let mut pair = [C64::new(0.0, 0.0); 3];
        let top = bucket(3 * order);
        pair[top as usize - 1] -= phi * phi.norm_sqr() / (d * d) * eps.powi((3 * order - top) as i32);
        for b in 1..=TOP_ORDER {
            if b == order {
                continue;
            }
            let k = self.coeff(b, i0, i1);
            if k == C64::new(0.0, 0.0) {
                continue;
            }
            let hk = k * eps.powi(b as i32);
            let re = 2.0 * c * (hk * sigma.conj()).re;
            new_v0 -= re;
            new_v1 += re;
            pair[b as usize - 1] += k * c * c;
            let tb = bucket(2 * order + b);
            pair[tb as usize - 1] -= rho * rho * k.conj() * eps.powi((2 * order + b - tb) as i32);
        }

        for b in 0..3 {
            for m in 0..n {
                if m == i0 || m == i1 {
                    continue;
                }
                self.phi[b][i0 * n + m] = row0[b][m];
                self.phi[b][m * n + i0] = row0[b][m].conj();
                self.phi[b][i1 * n + m] = row1[b][m];
                self.phi[b][m * n + i1] = row1[b][m].conj();
            }
        }
        for b in 1..=TOP_ORDER {
            self.set_pair(b, i0, i1, pair[b as usize - 1]);
        }
        self.v[i0] = new_v0;
        self.v[i1] = new_v1;
        Ok(Some(EliminationPair {
            anchor: *anchor,
            offset: *offset,
            order,
            d,
            c,
            sigma,
        }))
    }

    /// `U*HU` for a unitary `u` acting on `sites` (row-major `k×k`). An
    /// off-diagonal block entry between sites at `ℓ¹` distance `r` is
    /// booked at order `unit·⌈r/reach⌉`; products are bucketed by total order.
    pub fn apply_block(&mut self, sites: &[usize], u: &[C64], unit: u32, reach: i32) -> Result<()> {
        let k = sites.len();
        if u.len() != k * k {
            return Err(Error::Invalid("block size mismatch".into()));
        }
        let n = self.len();
        let eps = self.epsilon;
        let zero = C64::new(0.0, 0.0);
        let mut local = vec![usize::MAX; n];
        for (a, &s) in sites.iter().enumerate() {
            local[s] = a;
        }
        // Split the block by booked order.
        let mut parts: Vec<(u32, Vec<C64>)> = vec![];
        for a in 0..k {
            for b in 0..k {
                let z = u[a * k + b];
                if z == zero {
                    continue;
                }
                let q = if a == b {
                    0
                } else {
                    let r = (self.site(sites[a]) - self.site(sites[b])).norm_l1();
                    unit * ((r + reach - 1) / reach) as u32
                };
                let scale = eps.powi(q as i32);
                let slot = match parts.iter().position(|p| p.0 == q) {
                    Some(p) => p,
                    None => {
                        parts.push((q, vec![zero; k * k]));
                        parts.len() - 1
                    }
                };
                parts[slot].1[a * k + b] = if q == 0 { z } else { z / scale };
            }
        }
        // Coefficient of bucket b (0 = diagonal) at (t, col).
        let m_at = |b: u32, t: usize, col: usize| -> C64 {
            if b == 0 {
                if t == col {
                    C64::new(self.v[t], 0.0)
                } else {
                    zero
                }
            } else {
                self.phi[b as usize - 1][t * n + col]
            }
        };
        let mut new_v = vec![0.0; k];
        let mut new_rows = [vec![zero; k * n], vec![zero; k * n], vec![zero; k * n]];
        for b in 0..=TOP_ORDER {
            for (qc, uc) in &parts {
                // R[t][col] = Σ_u M_b[t][u] U^c[u][col] for t in the block.
                let mut r = vec![zero; k * n];
                for (ta, &t) in sites.iter().enumerate() {
                    for col in 0..n {
                        let lc = local[col];
                        let val = if lc == usize::MAX {
                            if *qc == 0 {
                                m_at(b, t, col)
                            } else {
                                zero
                            }
                        } else {
                            (0..k).map(|ua| m_at(b, t, sites[ua]) * uc[ua * k + lc]).sum()
                        };
                        r[ta * n + col] = val;
                    }
                }
                for (qa, ua_m) in &parts {
                    let o = qa + b + qc;
                    for (ra, &row) in sites.iter().enumerate() {
                        for col in 0..n {
                            let val: C64 = (0..k).map(|ta| ua_m[ta * k + ra].conj() * r[ta * n + col]).sum();
                            if val == zero {
                                continue;
                            }
                            if col == row {
                                new_v[ra] += val.re * eps.powi(o as i32);
                            } else if o == 0 {
                                continue;
                            } else {
                                let tb = bucket(o);
                                new_rows[tb as usize - 1][ra * n + col] += val * eps.powi((o - tb) as i32);
                            }
                        }
                    }
                }
            }
        }
        for b in 0..3 {
            for (ra, &row) in sites.iter().enumerate() {
                for col in 0..n {
                    if col == row {
                        continue;
                    }
                    let z = new_rows[b][ra * n + col];
                    let lc = local[col];
                    if lc == usize::MAX {
                        self.phi[b][row * n + col] = z;
                        self.phi[b][col * n + row] = z.conj();
                    } else if lc > ra {
                        let w = new_rows[b][lc * n + row];
                        let sym = (z + w.conj()) * 0.5;
                        self.phi[b][row * n + col] = sym;
                        self.phi[b][col * n + row] = sym.conj();
                    }
                }
            }
        }
        for (ra, &row) in sites.iter().enumerate() {
            self.v[row] = new_v[ra];
        }
        Ok(())
    }
}
