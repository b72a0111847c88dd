use crate::error::{Error, Result};
use crate::C64;

pub const DEFAULT_DIM_CAP: usize = 4096;
const MAX_SWEEPS: usize = 100;

/// Dense Hermitian matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    pub n: usize,
    pub data: Vec<C64>,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        HermitianMatrix {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }

    pub fn is_hermitian(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.get(i, j) == self.get(j, i).conj()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

/// Eigenvalues ascending; `vectors[k]` is the unit eigenvector of `values[k]`.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub sweeps: usize,
}

impl EigenSystem {
    /// `max_k ‖Hv_k − λ_k v_k‖`.
    pub fn max_residual(&self, h: &HermitianMatrix) -> f64 {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(l, v)| {
                h.apply(v)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| (a - b * l).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `‖QᴴQ − I‖_max`.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate().skip(i) {
                let dot: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible. Real
/// input takes a real-arithmetic path.
pub fn jacobi_eigen(h: &HermitianMatrix, dim_cap: usize) -> Result<EigenSystem> {
    if h.n > dim_cap {
        return Err(Error::Invalid(format!("dimension {} exceeds the cap {dim_cap}", h.n)));
    }
    let (values, vectors, sweeps) = if h.is_real() {
        let a: Vec<f64> = h.data.iter().map(|z| z.re).collect();
        let (vals, q, sweeps) = jacobi_real(a, h.n)?;
        let vecs: Vec<Vec<C64>> = (0..h.n)
            .map(|k| (0..h.n).map(|i| C64::new(q[i * h.n + k], 0.0)).collect())
            .collect();
        (vals, vecs, sweeps)
    } else {
        let (vals, q, sweeps) = jacobi_complex(h.data.clone(), h.n)?;
        let vecs = (0..h.n).map(|k| (0..h.n).map(|i| q[i * h.n + k]).collect()).collect();
        (vals, vecs, sweeps)
    };
    let mut order: Vec<usize> = (0..h.n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok(EigenSystem {
        values: order.iter().map(|&k| values[k]).collect(),
        vectors: order.iter().map(|&k| vectors[k].clone()).collect::<Vec<Vec<C64>>>(),
        sweeps,
    })
}

fn off_norm_real(a: &[f64], n: usize) -> (f64, f64) {
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = a[i * n + j] * a[i * n + j];
            if i == j {
                diag += v;
            } else {
                off += v;
            }
        }
    }
    (off.sqrt(), (off + diag).sqrt())
}

fn jacobi_real(mut a: Vec<f64>, n: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    for sweep in 0..MAX_SWEEPS {
        let (off, total) = off_norm_real(&a, n);
        if off <= 1e-15 * total || off == 0.0 {
            return Ok(((0..n).map(|i| a[i * n + i]).collect(), q, sweep));
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = a[p * n + r];
                if apr == 0.0 {
                    continue;
                }
                let (app, arr) = (a[p * n + p], a[r * n + r]);
                if apr.abs() < 1e-18 * (app.abs() + arr.abs()) {
                    a[p * n + r] = 0.0;
                    a[r * n + p] = 0.0;
                    continue;
                }
                let theta = (arr - app) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akr = a[k * n + r];
                    a[k * n + p] = c * akp - s * akr;
                    a[k * n + r] = s * akp + c * akr;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let ark = a[r * n + k];
                    a[p * n + k] = c * apk - s * ark;
                    a[r * n + k] = s * apk + c * ark;
                }
                a[p * n + r] = 0.0;
                a[r * n + p] = 0.0;
                for k in 0..n {
                    let qkp = q[k * n + p];
                    let qkr = q[k * n + r];
                    q[k * n + p] = c * qkp - s * qkr;
                    q[k * n + r] = s * qkp + c * qkr;
                }
            }
        }
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS })
}

fn jacobi_complex(mut a: Vec<C64>, n: usize) -> Result<(Vec<f64>, Vec<C64>, usize)> {
    let zero = C64::new(0.0, 0.0);
    let mut q = vec![zero; n * n];
    for i in 0..n {
        q[i * n + i] = C64::new(1.0, 0.0);
    }
    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = a[i * n + j].norm_sqr();
                total += v;
                if i != j {
                    off += v;
                }
            }
        }
        if off.sqrt() <= 1e-15 * total.sqrt() || off == 0.0 {
            return Ok(((0..n).map(|i| a[i * n + i].re).collect(), q, sweep));
        }
        for p in 0..n {
            for r in p + 1..n {
                let h = a[p * n + r];
                let mag = h.norm();
                if mag == 0.0 {
                    continue;
                }
                let (app, arr) = (a[p * n + p].re, a[r * n + r].re);
                if mag < 1e-18 * (app.abs() + arr.abs()) {
                    a[p * n + r] = zero;
                    a[r * n + p] = zero;
                    continue;
                }
                // Phase e^{-iφ} on column r makes the pivot real, then a real rotation.
                let ph = (h / mag).conj();
                let theta = (arr - app) / (2.0 * mag);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // U = [[c, s], [−s·ph, c·ph]] acting on columns (p, r).
                let (upp, upr, urp, urr) = (C64::new(c, 0.0), C64::new(s, 0.0), -ph * s, ph * c);
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akr = a[k * n + r];
                    a[k * n + p] = akp * upp + akr * urp;
                    a[k * n + r] = akp * upr + akr * urr;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let ark = a[r * n + k];
                    a[p * n + k] = upp.conj() * apk + urp.conj() * ark;
                    a[r * n + k] = upr.conj() * apk + urr.conj() * ark;
                }
                a[p * n + r] = zero;
                a[r * n + p] = zero;
                a[p * n + p] = C64::new(a[p * n + p].re, 0.0);
                a[r * n + r] = C64::new(a[r * n + r].re, 0.0);
                for k in 0..n {
                    let qkp = q[k * n + p];
                    let qkr = q[k * n + r];
                    q[k * n + p] = qkp * upp + qkr * urp;
                    q[k * n + r] = qkp * upr + qkr * urr;
                }
            }
        }
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, complex: bool, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = HermitianMatrix::zeros(n);
        for i in 0..n {
            h.set(i, i, C64::new(rng.gen_range(-3.0..3.0), 0.0));
            for j in i + 1..n {
                let im = if complex { rng.gen_range(-1.0..1.0) } else { 0.0 };
                let z = C64::new(rng.gen_range(-1.0..1.0), im);
                h.set(i, j, z);
                h.set(j, i, z.conj());
            }
        }
        h
    }

    #[test]
    fn two_by_two_closed_form() {
        let (eps, delta) = (0.3, 1.7);
        let mut h = HermitianMatrix::zeros(2);
        h.set(0, 1, C64::new(eps, 0.0));
        h.set(1, 0, C64::new(eps, 0.0));
        h.set(1, 1, C64::new(delta, 0.0));
        let e = jacobi_eigen(&h, DEFAULT_DIM_CAP).unwrap();
        let root = (delta * delta + 4.0 * eps * eps).sqrt();
        assert!((e.values[0] - (delta - root) / 2.0).abs() < 1e-15);
        assert!((e.values[1] - (delta + root) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_input() {
        let mut h = HermitianMatrix::zeros(3);
        for (i, v) in [2.0, -1.0, 0.5].iter().enumerate() {
            h.set(i, i, C64::new(*v, 0.0));
        }
        let e = jacobi_eigen(&h, DEFAULT_DIM_CAP).unwrap();
        assert_eq!(e.values, vec![-1.0, 0.5, 2.0]);
        assert_eq!(e.sweeps, 0);
    }

    #[test]
    fn random_contracts() {
        for (seed, complex) in [(1, false), (2, true), (3, true), (4, false)] {
            let h = random_hermitian(40, complex, seed);
            let e = jacobi_eigen(&h, DEFAULT_DIM_CAP).unwrap();
            assert!(e.orthonormality_defect() <= 1e-10);
            assert!(e.max_residual(&h) <= 1e-9 * h.frobenius());
            let trace: f64 = (0..40).map(|i| h.get(i, i).re).sum();
            assert!((e.values.iter().sum::<f64>() - trace).abs() < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn cap_enforced() {
        let h = HermitianMatrix::zeros(5);
        assert!(jacobi_eigen(&h, 4).is_err());
    }
}
