use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::f64::consts::PI;

/// A 1-periodic hopping function `φ(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopFn {
    Constant(C64),
    /// `Σ c_k e^{2πikx}` stored as `(k, c_k)`.
    Fourier(Vec<(i32, C64)>),
}

impl HopFn {
    pub fn eval(&self, x: f64) -> C64 {
        match self {
            HopFn::Constant(c) => *c,
            HopFn::Fourier(terms) => terms
                .iter()
                .map(|&(k, c)| c * C64::from_polar(1.0, 2.0 * PI * k as f64 * x))
                .sum(),
        }
    }

    /// Upper bound on `sup |φ|`.
    pub fn sup_bound(&self) -> f64 {
        match self {
            HopFn::Constant(c) => c.norm(),
            HopFn::Fourier(terms) => terms.iter().map(|(_, c)| c.norm()).sum(),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            HopFn::Constant(c) => *c == C64::new(0.0, 0.0),
            HopFn::Fourier(terms) => terms.iter().all(|(_, c)| *c == C64::new(0.0, 0.0)),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            HopFn::Constant(_) => true,
            HopFn::Fourier(terms) => terms.iter().all(|(k, c)| *k == 0 || c.norm() == 0.0),
        }
    }
}

/// One entry `φ^order_offset` of a kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoppingTerm {
    pub order: u32,
    pub offset: Vec<i32>,
    pub func: HopFn,
}

/// Family `Φ^j` of finite-range quasiperiodic hopping matrices,
/// `Φ^j_{mn}(x) = φ^j_{m−n}(x + (m+n)·ω/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HoppingKernel {
    dim: usize,
    base_range: i32,
    terms: BTreeMap<u32, BTreeMap<Site, HopFn>>,
    constant: bool,
}

impl HoppingKernel {
    /// Nearest-neighbour Laplacian: `φ^1_{±e_i} = 1`.
    pub fn laplacian(dim: usize) -> Self {
        let mut t = Vec::new();
        for i in 0..dim {
            for s in [1, -1] {
                t.push(HoppingTerm {
                    order: 1,
                    offset: Site::unit(dim, i).scale(s).coords().to_vec(),
                    func: HopFn::Constant(C64::new(1.0, 0.0)),
                });
            }
        }
        Self::from_terms(dim, 1, t).expect("laplacian is valid")
    }

    pub fn from_terms(dim: usize, base_range: i32, terms: Vec<HoppingTerm>) -> Result<Self> {
        if base_range < 1 {
            return Err(Error::Invalid("base_range must be positive".into()));
        }
        let mut map: BTreeMap<u32, BTreeMap<Site, HopFn>> = BTreeMap::new();
        for t in terms {
            if t.order == 0 {
                return Err(Error::Invalid("hopping order starts at 1".into()));
            }
            if t.offset.len() != dim {
                return Err(Error::Invalid("offset dimension mismatch".into()));
            }
            let m = Site::new(&t.offset);
            if m.norm_inf() > t.order as i32 * base_range {
                return Err(Error::Invalid(format!(
                    "offset {m} exceeds range {} of order {}",
                    t.order as i32 * base_range,
                    t.order
                )));
            }
            if t.func.is_identically_zero() {
                continue;
            }
            if map.entry(t.order).or_default().insert(m, t.func).is_some() {
                return Err(Error::Invalid(format!("duplicate term at offset {m}")));
            }
        }
        let constant = map.values().flat_map(|m| m.values()).all(HopFn::is_constant);
        let k = HoppingKernel {
            dim,
            base_range,
            terms: map,
            constant,
        };
        k.check_self_adjoint()?;
        Ok(k)
    }

    fn check_self_adjoint(&self) -> Result<()> {
        for (j, row) in &self.terms {
            for (m, f) in row {
                let zero = HopFn::Constant(C64::new(0.0, 0.0));
                let g = row.get(&-*m).unwrap_or(&zero);
                for i in 0..64 {
                    let x = i as f64 / 64.0;
                    let (a, b) = (f.eval(x), g.eval(x).conj());
                    if (a - b).norm() > 1e-12 * (1.0 + a.norm()) {
                        return Err(Error::Invalid(format!(
                            "order {j} offset {m}: φ_(-m) ≠ conj(φ_m) at x = {x}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base_range(&self) -> i32 {
        self.base_range
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn max_order(&self) -> u32 {
        self.terms.keys().next_back().copied().unwrap_or(0)
    }

    pub fn orders(&self) -> impl Iterator<Item = u32> + '_ {
        self.terms.keys().copied()
    }

    /// Offsets with a declared, not identically zero function at order `j`.
    pub fn offsets(&self, j: u32) -> Vec<Site> {
        self.terms
            .get(&j)
            .map(|r| r.keys().copied().collect())
            .unwrap_or_default()
    }

    /// All `(order, offset)` moves of the hopping graph.
    pub fn moves(&self) -> Vec<(u32, Site)> {
        self.terms
            .iter()
            .flat_map(|(j, r)| r.keys().map(move |m| (*j, *m)))
            .collect()
    }

    pub fn has_diagonal(&self, j: u32) -> bool {
        self.terms
            .get(&j)
            .is_some_and(|r| r.contains_key(&Site::zero(self.dim)))
    }

    /// Largest `|m|_∞ / j` over declared terms.
    pub fn effective_range(&self) -> i32 {
        self.terms
            .iter()
            .flat_map(|(j, r)| r.keys().map(move |m| (m.norm_inf() + *j as i32 - 1) / *j as i32))
            .max()
            .unwrap_or(0)
    }

    pub fn sup_norm(&self) -> f64 {
        self.terms
            .values()
            .flat_map(|r| r.values())
            .map(HopFn::sup_bound)
            .fold(0.0, f64::max)
    }

    /// `Φ^j_{mn}(x)`; exact zero outside the declared terms.
    pub fn value(&self, omega: &[f64], j: u32, m: &Site, n: &Site, x: f64) -> C64 {
        let Some(row) = self.terms.get(&j) else {
            return C64::new(0.0, 0.0);
        };
        match row.get(&(*m - *n)) {
            None => C64::new(0.0, 0.0),
            Some(HopFn::Constant(c)) => *c,
            Some(f) => f.eval(x + (*m + *n).dot(omega) / 2.0),
        }
    }

    /// Order-weighted graph distances from the origin for all points within
    /// `|n|_∞ ≤ radius`, by Dijkstra over the declared moves.
    pub fn distance_table(&self, radius: i32) -> DistanceTable {
        let moves: Vec<(u32, Site)> = self
            .moves()
            .into_iter()
            .filter(|(_, m)| !m.is_zero())
            .collect();
        let origin = Site::zero(self.dim);
        let mut dist: HashMap<Site, u32> = HashMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(origin, 0);
        heap.push(std::cmp::Reverse((0u32, origin)));
        while let Some(std::cmp::Reverse((d, n))) = heap.pop() {
            if dist.get(&n).is_some_and(|&best| best < d) {
                continue;
            }
            for &(j, m) in &moves {
                let next = n + m;
                if next.norm_inf() > radius {
                    continue;
                }
                let nd = d + j;
                if dist.get(&next).is_none_or(|&best| nd < best) {
                    dist.insert(next, nd);
                    heap.push(std::cmp::Reverse((nd, next)));
                }
            }
        }
        DistanceTable { radius, dist }
    }
}

/// `dist_φ(0, n)` on a box; unreachable points are absent.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    pub radius: i32,
    dist: HashMap<Site, u32>,
}

impl DistanceTable {
    pub fn get(&self, n: &Site) -> Option<u32> {
        self.dist.get(n).copied()
    }

    /// `dist_φ(m, n)`, using translation invariance of the graph.
    pub fn between(&self, m: &Site, n: &Site) -> Option<u32> {
        self.get(&(*n - *m))
    }

    /// Points at distance `< r` from the origin.
    pub fn within(&self, r: u32) -> Vec<Site> {
        let mut v: Vec<Site> = self
            .dist
            .iter()
            .filter(|(_, &d)| d < r)
            .map(|(s, _)| *s)
            .collect();
        v.sort();
        v
    }
}
