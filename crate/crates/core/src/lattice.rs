//! Lattice points of `Z^d` for `d ≤ 3` and small helpers on them.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Neg, Sub};

pub const MAX_DIM: usize = 3;

/// A point of `Z^d`. Unused trailing coordinates are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    c: [i32; MAX_DIM],
    dim: u8,
}

impl Site {
    pub fn new(coords: &[i32]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "dimension must be 1..=3"
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site {
            c,
            dim: coords.len() as u8,
        }
    }

    pub fn d1(n: i32) -> Self {
        Site::new(&[n])
    }

    pub fn zero(dim: usize) -> Self {
        Site::new(&vec![0; dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut c = vec![0; dim];
        c[axis] = 1;
        Site::new(&c)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.c[..self.dim as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.c == [0; MAX_DIM]
    }

    pub fn norm_inf(&self) -> i32 {
        self.coords().iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    pub fn norm_l1(&self) -> i32 {
        self.coords().iter().map(|v| v.abs()).sum()
    }

    /// `n·ω` as a real number.
    pub fn dot(&self, omega: &[f64]) -> f64 {
        self.coords()
            .iter()
            .zip(omega)
            .map(|(&a, &w)| a as f64 * w)
            .sum()
    }

    pub fn scale(&self, k: i32) -> Site {
        let mut s = *self;
        for v in s.c.iter_mut() {
            *v *= k;
        }
        s
    }

    /// All points with `|n|_∞ ≤ r`, lexicographic order.
    pub fn ball(dim: usize, r: i32) -> Vec<Site> {
        let side = (2 * r + 1) as usize;
        let total = side.pow(dim as u32);
        let mut out = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut c = [0i32; MAX_DIM];
            for k in (0..dim).rev() {
                c[k] = (rem % side) as i32 - r;
                rem /= side;
            }
            out.push(Site::new(&c[..dim]));
        }
        out
    }
}

impl Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        debug_assert_eq!(self.dim, o.dim);
        let mut s = self;
        for k in 0..MAX_DIM {
            s.c[k] += o.c[k];
        }
        s
    }
}

impl Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        debug_assert_eq!(self.dim, o.dim);
        let mut s = self;
        for k in 0..MAX_DIM {
            s.c[k] -= o.c[k];
        }
        s
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        self.scale(-1)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            write!(f, "{}", self.c[0])
        } else {
            let parts: Vec<String> = self.coords().iter().map(|v| v.to_string()).collect();
            write!(f, "({})", parts.join(","))
        }
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Site{}", self)
    }
}

/// Distance from `x` to the nearest integer.
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Reduce `x` into `[-1/2, 1/2)`.
pub fn reduce_half(x: f64) -> f64 {
    x - (x + 0.5).floor()
}

/// Dense row-major index of the box `|n|_∞ ≤ r` in `Z^d`.
#[derive(Clone, Debug)]
pub struct BoxIndex {
    pub dim: usize,
    pub radius: i32,
    side: usize,
}

impl BoxIndex {
    pub fn new(dim: usize, radius: i32) -> Self {
        BoxIndex {
            dim,
            radius,
            side: (2 * radius + 1) as usize,
        }
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, n: &Site) -> bool {
        n.norm_inf() <= self.radius
    }

    pub fn index(&self, n: &Site) -> Option<usize> {
        if !self.contains(n) {
            return None;
        }
        let mut idx = 0usize;
        for &v in n.coords() {
            idx = idx * self.side + (v + self.radius) as usize;
        }
        Some(idx)
    }

    pub fn site(&self, mut idx: usize) -> Site {
        let mut c = [0i32; MAX_DIM];
        for k in (0..self.dim).rev() {
            c[k] = (idx % self.side) as i32 - self.radius;
            idx /= self.side;
        }
        Site::new(&c[..self.dim])
    }

    pub fn sites(&self) -> Vec<Site> {
        (0..self.len()).map(|i| self.site(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_index_round_trip() {
        let b = BoxIndex::new(2, 3);
        assert_eq!(b.len(), 49);
        for i in 0..b.len() {
            assert_eq!(b.index(&b.site(i)), Some(i));
        }
        assert_eq!(b.index(&Site::new(&[4, 0])), None);
        assert_eq!(b.sites(), Site::ball(2, 3));
    }

    #[test]
    fn reductions() {
        assert_eq!(reduce_half(0.75), -0.25);
        assert_eq!(reduce_half(-0.5), -0.5);
        assert!((dist_to_int(2.9) - 0.1).abs() < 1e-12);
        assert_eq!(Site::new(&[1, -2]).to_string(), "(1,-2)");
        assert_eq!(Site::d1(-3).to_string(), "-3");
    }
}
