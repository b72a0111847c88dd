use crate::error::{Error, Result};
use crate::lattice::{dist_to_int, Site};
use serde::{Deserialize, Serialize};

pub const DEFAULT_N_CHECK: i32 = 50;

/// `(√5 − 1)/2`.
pub fn golden_mean() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Frequency vector with a Diophantine constant verified on `|n|_∞ ≤ n_check`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    omega: Vec<f64>,
    dio_constant: f64,
    dio_exponent: f64,
    n_check: i32,
    /// Smallest `‖n·ω‖·|n|_∞^τ` over the check box.
    observed_min_ratio: f64,
    /// Smallest `‖n·ω‖` over the check box.
    observed_min_norm: f64,
}

impl FrequencyVector {
    /// Checks `ω` on the box. Missing `C_dio` is fitted as the observed
    /// minimum; missing `τ` defaults to `d + 1.5`.
    pub fn new(
        omega: Vec<f64>,
        n_check: i32,
        dio_constant: Option<f64>,
        dio_exponent: Option<f64>,
    ) -> Result<Self> {
        let d = omega.len();
        if d == 0 || d > crate::lattice::MAX_DIM {
            return Err(Error::Frequency(format!("unsupported dimension {d}")));
        }
        // The default golden mean 0.618… lies outside (-1/2, 1/2); only
        // `ω mod 1` enters ‖n·ω‖ and V, so components in (-1, 1) are accepted.
        if omega.iter().any(|w| !(w.abs() < 1.0)) {
            return Err(Error::Frequency("components must lie in (-1, 1)".into()));
        }
        let tau = dio_exponent.unwrap_or(d as f64 + 1.5);
        if tau <= d as f64 + 1.0 {
            return Err(Error::Frequency(format!("exponent {tau} must exceed d+1")));
        }
        let mut min_ratio = f64::INFINITY;
        let mut min_norm = f64::INFINITY;
        for n in Site::ball(d, n_check) {
            if n.is_zero() {
                continue;
            }
            let norm = dist_to_int(n.dot(&omega));
            if norm == 0.0 {
                return Err(Error::Frequency(format!("n·ω is an integer for n = {n}")));
            }
            min_norm = min_norm.min(norm);
            min_ratio = min_ratio.min(norm * (n.norm_inf() as f64).powf(tau));
        }
        if n_check == 0 {
            min_ratio = 1.0;
            min_norm = 0.5;
        }
        let c = dio_constant.unwrap_or(min_ratio);
        if c <= 0.0 {
            return Err(Error::Frequency("Diophantine constant must be positive".into()));
        }
        if min_ratio < c {
            return Err(Error::Frequency(format!(
                "Diophantine inequality fails: min ‖n·ω‖|n|^τ = {min_ratio:.3e} < C = {c:.3e}"
            )));
        }
        Ok(FrequencyVector {
            omega,
            dio_constant: c,
            dio_exponent: tau,
            n_check,
            observed_min_ratio: min_ratio,
            observed_min_norm: min_norm,
        })
    }

    pub fn golden() -> Self {
        Self::new(vec![golden_mean()], DEFAULT_N_CHECK, None, None).expect("golden mean passes")
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn dio_constant(&self) -> f64 {
        self.dio_constant
    }

    pub fn dio_exponent(&self) -> f64 {
        self.dio_exponent
    }

    pub fn n_check(&self) -> i32 {
        self.n_check
    }

    pub fn observed_min_ratio(&self) -> f64 {
        self.observed_min_ratio
    }

    pub fn observed_min_norm(&self) -> f64 {
        self.observed_min_norm
    }

    /// `‖n·ω‖`.
    pub fn norm(&self, n: &Site) -> f64 {
        dist_to_int(n.dot(&self.omega))
    }
}
