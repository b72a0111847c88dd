use super::{FrequencyVector, HoppingKernel, PotentialSpec};
use crate::error::{Error, Result};
use crate::lattice::{dist_to_int, Site};
use crate::C64;

pub const DEFAULT_DELTA_RES: f64 = 1e-12;

/// `H(x₀) = V + Σ_j ε^j Φ^j` with `V_n = f(x₀ + n·ω)`.
#[derive(Clone, Debug)]
pub struct OperatorInstance {
    pub potential: PotentialSpec,
    pub frequency: FrequencyVector,
    pub hopping: HoppingKernel,
    pub phase: f64,
    pub epsilon: f64,
    pub delta_res: f64,
    resonance_checked: bool,
}

impl OperatorInstance {
    /// Validates the phase and non-resonance on `|n|_∞ ≤ N_check`.
    pub fn new(
        potential: PotentialSpec,
        frequency: FrequencyVector,
        hopping: HoppingKernel,
        phase: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let inst = Self::new_allow_resonance(potential, frequency, hopping, phase, epsilon)?;
        inst.check_nonresonance(inst.frequency.n_check())?;
        Ok(OperatorInstance {
            resonance_checked: true,
            ..inst
        })
    }

    /// As `new` but without the non-resonance check (flat potentials).
    pub fn new_allow_resonance(
        potential: PotentialSpec,
        frequency: FrequencyVector,
        hopping: HoppingKernel,
        phase: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if hopping.dim() != frequency.dim() {
            return Err(Error::Invalid("hopping and frequency dimensions differ".into()));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::Invalid("epsilon must be nonnegative".into()));
        }
        let inst = OperatorInstance {
            potential,
            frequency,
            hopping,
            phase,
            epsilon,
            delta_res: DEFAULT_DELTA_RES,
            resonance_checked: false,
        };
        for n in Site::ball(inst.dim(), inst.frequency.n_check()) {
            inst.v(&n)?;
        }
        Ok(inst)
    }

    pub fn maryland_golden(phase: f64, epsilon: f64) -> Result<Self> {
        Self::new(
            PotentialSpec::maryland(),
            FrequencyVector::golden(),
            HoppingKernel::laplacian(1),
            phase,
            epsilon,
        )
    }

    pub fn dim(&self) -> usize {
        self.frequency.dim()
    }

    pub fn omega(&self) -> &[f64] {
        self.frequency.omega()
    }

    pub fn resonance_checked(&self) -> bool {
        self.resonance_checked
    }

    pub fn with_phase(&self, phase: f64) -> Result<Self> {
        let mut c = self.clone();
        c.phase = phase;
        if self.resonance_checked {
            c.check_nonresonance(c.frequency.n_check())?;
        }
        Ok(c)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut c = self.clone();
        c.epsilon = epsilon;
        c
    }

    pub fn check_nonresonance(&self, radius: i32) -> Result<()> {
        let v0 = self.v0()?;
        for n in Site::ball(self.dim(), radius) {
            if !n.is_zero() && (self.v(&n)? - v0).abs() < self.delta_res {
                return Err(Error::ResonantSite(n));
            }
        }
        Ok(())
    }

    pub fn v0(&self) -> Result<f64> {
        self.potential.value(self.phase)
    }

    /// `f(x₀ + n·ω)`.
    pub fn v(&self, n: &Site) -> Result<f64> {
        self.potential
            .value(self.phase + n.dot(self.omega()))
            .map_err(|_| Error::SingularSite(*n))
    }

    /// `V_n(t) = f(t + x₀ + n·ω)` for `n ≠ 0`, and `V_0(t) = f(x₀)`.
    pub fn v_shifted(&self, n: &Site, t: f64) -> Result<f64> {
        if n.is_zero() {
            return self.v0();
        }
        self.potential
            .value(t + self.phase + n.dot(self.omega()))
            .map_err(|_| Error::SingularSite(*n))
    }

    /// `Φ^j_{mn}(x₀ + t)`.
    pub fn hop(&self, j: u32, m: &Site, n: &Site, t: f64) -> C64 {
        self.hopping.value(self.omega(), j, m, n, self.phase + t)
    }

    /// Whether `x₀ + n·ω` lands within `tol` of the poles.
    pub fn near_pole(&self, n: &Site, tol: f64) -> bool {
        dist_to_int(self.phase + n.dot(self.omega()) - 0.5) < tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::frequency::golden_mean;
    use std::f64::consts::PI;

    #[test]
    fn shifted_potential() {
        let inst = OperatorInstance::maryland_golden(0.1, 0.05).unwrap();
        let f0 = (0.1 * PI).tan();
        assert_eq!(inst.v_shifted(&Site::d1(0), 0.3).unwrap(), f0);
        let v1 = inst.v_shifted(&Site::d1(1), 0.0).unwrap();
        assert!((v1 - (PI * (0.1 + golden_mean())).tan()).abs() < 1e-12);
        let back = inst.v_shifted(&Site::d1(1), -golden_mean()).unwrap();
        assert!((back - f0).abs() < 1e-12);
    }

    #[test]
    fn singular_phase_rejected() {
        let r = OperatorInstance::maryland_golden(0.5, 0.05);
        assert!(r.is_err());
    }
}
