use super::eigen::{jacobi_eigen, EigenSystem, HermitianMatrix, DEFAULT_DIM_CAP};
use crate::error::Result;
use crate::lattice::{BoxIndex, Site};
use crate::model::OperatorInstance;
use crate::C64;
use rayon::prelude::*;

/// `H(x₀)` restricted to `|n|_∞ ≤ N` (Dirichlet truncation).
#[derive(Clone, Debug)]
pub struct TruncatedOperator {
    pub radius: i32,
    pub index: BoxIndex,
    pub matrix: HermitianMatrix,
    pub epsilon: f64,
}

impl TruncatedOperator {
    pub fn len(&self) -> usize {
        self.matrix.n
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.n == 0
    }

    pub fn site(&self, i: usize) -> Site {
        self.index.site(i)
    }

    pub fn diagonalize(&self) -> Result<EigenSystem> {
        jacobi_eigen(&self.matrix, DEFAULT_DIM_CAP)
    }

    /// Embeds a sparse vector, dropping entries outside the box.
    pub fn embed(&self, v: &crate::series::SparseVector) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        for (n, z) in v {
            if let Some(i) = self.index.index(n) {
                out[i] = *z;
            }
        }
        out
    }
}

/// Diagonal `V_n`, off-diagonal `Σ_j ε^j Φ^j_{mn}(x₀)`. Only the lower
/// triangle is evaluated; the upper one is its conjugate.
pub fn build_truncated(instance: &OperatorInstance, radius: i32) -> Result<TruncatedOperator> {
    let dim = instance.dim();
    let index = BoxIndex::new(dim, radius);
    let sites = index.sites();
    let n = sites.len();
    let eps = instance.epsilon;
    let terms: Vec<(u32, Vec<Site>)> = instance
        .hopping
        .orders()
        .map(|j| (j, instance.hopping.offsets(j)))
        .collect();
    let rows: Vec<Vec<(usize, C64)>> = sites
        .par_iter()
        .enumerate()
        .map(|(i, m)| -> Result<Vec<(usize, C64)>> {
            let mut row = vec![(i, C64::new(instance.v(m)?, 0.0))];
            for (j, offs) in &terms {
                let w = eps.powi(*j as i32);
                if w == 0.0 {
                    continue;
                }
                for d in offs {
                    let k = *m - *d;
                    if let Some(c) = index.index(&k) {
                        if c <= i {
                            row.push((c, instance.hop(*j, m, &k, 0.0) * w));
                        }
                    }
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut matrix = HermitianMatrix::zeros(n);
    for (i, row) in rows.into_iter().enumerate() {
        for (c, z) in row {
            let cur = matrix.get(i, c);
            matrix.set(i, c, cur + z);
        }
    }
    for i in 0..n {
        let d = matrix.get(i, i);
        matrix.set(i, i, C64::new(d.re, 0.0));
        for c in 0..i {
            let z = matrix.get(i, c);
            matrix.set(c, i, z.conj());
        }
    }
    Ok(TruncatedOperator {
        radius,
        index,
        matrix,
        epsilon: eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FrequencyVector, HopFn, HoppingKernel, HoppingTerm, PotentialSpec};

    #[test]
    fn unperturbed_spectrum_is_the_potential() {
        let inst = OperatorInstance::maryland_golden(0.1, 0.0).unwrap();
        let op = build_truncated(&inst, 5).unwrap();
        let e = op.diagonalize().unwrap();
        let mut v: Vec<f64> = (0..op.len()).map(|i| inst.v(&op.site(i)).unwrap()).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(e.values, v);
    }

    #[test]
    fn three_site_laplacian() {
        let inst = OperatorInstance::maryland_golden(0.1, 0.2).unwrap();
        let op = build_truncated(&inst, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j {
                    inst.v(&op.site(i)).unwrap()
                } else if i.abs_diff(j) == 1 {
                    0.2
                } else {
                    0.0
                };
                assert_eq!(op.matrix.get(i, j), C64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn phase_dependent_hopping_is_hermitian() {
        let f = HopFn::Fourier(vec![(0, C64::new(1.0, 0.0)), (1, C64::new(0.2, 0.1)), (-1, C64::new(0.3, -0.4))]);
        let g = HopFn::Fourier(vec![(0, C64::new(1.0, 0.0)), (-1, C64::new(0.2, -0.1)), (1, C64::new(0.3, 0.4))]);
        let k = HoppingKernel::from_terms(
            2,
            1,
            vec![
                HoppingTerm { order: 1, offset: vec![1, 0], func: f.clone() },
                HoppingTerm { order: 1, offset: vec![-1, 0], func: g.clone() },
                HoppingTerm { order: 2, offset: vec![0, 1], func: f },
                HoppingTerm { order: 2, offset: vec![0, -1], func: g },
            ],
        )
        .unwrap();
        let w = FrequencyVector::new(vec![0.618_033_988_749_895, 0.414_213_562_373_095], 10, None, None).unwrap();
        let inst = OperatorInstance::new(PotentialSpec::maryland(), w, k, 0.1, 0.1).unwrap();
        let op = build_truncated(&inst, 3).unwrap();
        assert!(op.matrix.is_hermitian());
        assert!(!op.matrix.is_real());
        let e = op.diagonalize().unwrap();
        assert!(e.max_residual(&op.matrix) <= 1e-9 * op.matrix.frobenius());
    }
}
