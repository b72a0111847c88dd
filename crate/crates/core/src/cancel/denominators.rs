use crate::lattice::Site;
use crate::model::{FrequencyVector, HoppingKernel};
use serde::Serialize;
use std::collections::BTreeMap;

/// Level of the origin.
pub const INFINITE_LEVEL: u32 = u32::MAX;

const MAX_BAND: u32 = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum LevelRule {
    /// `β_k ≤ ‖n·ω‖ < β_{k−1}` with `β_k = 1/⌊β^{−k−1}⌋`, `safedist = ⌈C_safe·level³⌉`.
    Bands { beta: f64, c_safe: f64 },
    /// Explicit levels (unlisted sites are level 0) and a safedist per level;
    /// levels past the end of the table reuse its last entry.
    Manual {
        levels: BTreeMap<Site, u32>,
        safedist: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenominatorData {
    pub rule: LevelRule,
    pub frequency: FrequencyVector,
}

impl DenominatorData {
    pub fn bands(frequency: FrequencyVector, beta: f64, c_safe: f64) -> Self {
        assert!(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
        assert!(c_safe > 0.0, "C_safe must be positive");
        DenominatorData {
            rule: LevelRule::Bands { beta, c_safe },
            frequency,
        }
    }

    /// `safedist[k]` is used for level `k`; entry 0 is forced to 0.
    pub fn manual(frequency: FrequencyVector, levels: BTreeMap<Site, u32>, mut safedist: Vec<u32>) -> Self {
        if safedist.is_empty() {
            safedist.push(0);
        }
        safedist[0] = 0;
        for i in 1..safedist.len() {
            safedist[i] = safedist[i].max(safedist[i - 1]);
        }
        DenominatorData {
            rule: LevelRule::Manual { levels, safedist },
            frequency,
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match self.rule {
            LevelRule::Bands { beta, .. } => Some(beta),
            LevelRule::Manual { .. } => None,
        }
    }

    /// Lower edge `β_k` of band `k`.
    pub fn threshold(&self, k: u32) -> Option<f64> {
        let LevelRule::Bands { beta, .. } = self.rule else {
            return None;
        };
        Some(band_edge(beta, k))
    }

    pub fn level_of(&self, n: &Site) -> u32 {
        if n.is_zero() {
            return INFINITE_LEVEL;
        }
        match &self.rule {
            LevelRule::Manual { levels, .. } => levels.get(n).copied().unwrap_or(0),
            LevelRule::Bands { beta, .. } => {
                let x = self.frequency.norm(n);
                (0..MAX_BAND).find(|&k| x >= band_edge(*beta, k)).unwrap_or(MAX_BAND)
            }
        }
    }

    /// `safedist` as a function of the level.
    pub fn safedist(&self, level: u32) -> u32 {
        if level == INFINITE_LEVEL {
            return u32::MAX;
        }
        if level == 0 {
            return 0;
        }
        match &self.rule {
            LevelRule::Bands { c_safe, .. } => (c_safe * (level as f64).powi(3)).ceil() as u32,
            LevelRule::Manual { safedist, .. } => safedist[(level as usize).min(safedist.len() - 1)],
        }
    }

    /// `safedist(level(n))`, infinite at the origin.
    pub fn safedist_at(&self, n: &Site) -> u32 {
        self.safedist(self.level_of(n))
    }
}

fn band_edge(beta: f64, k: u32) -> f64 {
    let v = (1.0 / beta).powi(k as i32 + 1);
    1.0 / (v * (1.0 + 1e-12)).floor()
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub radius: i32,
    pub small_denominators: usize,
    pub max_level: u32,
    pub c1_violations: usize,
    pub c2_violations: usize,
    /// Up to 20 offending pairs `(m, n)` per condition.
    pub c1_examples: Vec<(Site, Site)>,
    pub c2_examples: Vec<(Site, Site)>,
    pub pass: bool,
}

/// Exhaustive check of (c1) and (c2) on `|m|_∞, |n|_∞ ≤ radius`; (c0) holds
/// by construction. The origin takes part in (c1) with infinite safedist.
pub fn verify_consistency(data: &DenominatorData, kernel: &HoppingKernel, radius: i32) -> ConsistencyReport {
    let dim = data.frequency.dim();
    let mut report = ConsistencyReport {
        radius,
        small_denominators: 0,
        max_level: 0,
        c1_violations: 0,
        c2_violations: 0,
        c1_examples: vec![],
        c2_examples: vec![],
        pass: true,
    };
    if radius <= 0 {
        return report;
    }
    let sites = Site::ball(dim, radius);
    let small: Vec<(Site, u32)> = sites
        .iter()
        .filter(|n| !n.is_zero())
        .map(|n| (*n, data.level_of(n)))
        .filter(|(_, l)| *l >= 1)
        .collect();
    report.small_denominators = small.len();
    report.max_level = small.iter().map(|s| s.1).max().unwrap_or(0);
    let max_sd = small.iter().map(|s| data.safedist(s.1)).max().unwrap_or(0);
    let reach = kernel.effective_range().max(1);
    let table_radius = (2 * radius).max(max_sd as i32 * reach);
    let dist = kernel.distance_table(table_radius);

    let mut with_origin = small.clone();
    with_origin.push((Site::zero(dim), INFINITE_LEVEL));
    for (i, (m, lm)) in with_origin.iter().enumerate() {
        for (n, ln) in &with_origin[i + 1..] {
            let need = data.safedist(*lm).min(data.safedist(*ln));
            let d = dist.between(m, n).unwrap_or(u32::MAX);
            if d < need {
                report.c1_violations += 1;
                if report.c1_examples.len() < 20 {
                    report.c1_examples.push((*m, *n));
                }
            }
        }
    }

    for (m, lm) in &small {
        let sd = data.safedist(*lm);
        for delta in dist.within(sd) {
            if delta.is_zero() {
                continue;
            }
            let n = *m + delta;
            if n.norm_inf() > radius {
                continue;
            }
            if data.level_of(&delta) != data.level_of(&n) {
                report.c2_violations += 1;
                if report.c2_examples.len() < 20 {
                    report.c2_examples.push((*m, n));
                }
            }
        }
    }
    report.pass = report.c1_violations == 0 && report.c2_violations == 0;
    report
}

/// Largest `β` in `[lo, hi]` found by bisection on the pass/fail outcome of
/// [`verify_consistency`]. `None` if `lo` itself fails.
pub fn bisect_beta(
    frequency: &FrequencyVector,
    kernel: &HoppingKernel,
    c_safe: f64,
    radius: i32,
    lo: f64,
    hi: f64,
    iterations: usize,
) -> Option<f64> {
    let passes = |beta: f64| verify_consistency(&DenominatorData::bands(frequency.clone(), beta, c_safe), kernel, radius).pass;
    if !passes(lo) {
        return None;
    }
    if passes(hi) {
        return Some(hi);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..iterations {
        let mid = 0.5 * (a + b);
        if passes(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> FrequencyVector {
        FrequencyVector::golden()
    }

    #[test]
    fn band_lookup() {
        let d = DenominatorData::bands(golden(), 0.05, 1.0);
        assert_eq!(d.threshold(0), Some(0.05));
        assert!((d.threshold(1).unwrap() - 1.0 / 400.0).abs() < 1e-18);
        // ‖ω‖ ≈ 0.382 sits in the top band.
        assert_eq!(d.level_of(&Site::d1(1)), 0);
        // ‖34ω‖ ≈ 0.0132 and ‖89ω‖ ≈ 0.0050 lie in [1/400, 1/20).
        assert_eq!(d.level_of(&Site::d1(34)), 1);
        assert_eq!(d.level_of(&Site::d1(89)), 1);
        assert_eq!(d.level_of(&Site::d1(0)), INFINITE_LEVEL);
        assert_eq!(d.safedist(0), 0);
        assert_eq!(d.safedist(2), 8);
        let d3 = DenominatorData::bands(golden(), 0.05, 2.5);
        assert_eq!(d3.safedist(3), 68);
    }

    #[test]
    fn manual_table_is_monotone() {
        let mut levels = BTreeMap::new();
        levels.insert(Site::d1(5), 1);
        let d = DenominatorData::manual(golden(), levels, vec![7, 3, 2]);
        assert_eq!(d.safedist(0), 0);
        assert_eq!(d.safedist(1), 3);
        assert_eq!(d.safedist(2), 3);
        assert_eq!(d.safedist(9), 3);
        assert_eq!(d.level_of(&Site::d1(5)), 1);
        assert_eq!(d.level_of(&Site::d1(4)), 0);
    }

    #[test]
    fn consistency_checks() {
        let k = HoppingKernel::laplacian(1);
        let big = verify_consistency(&DenominatorData::bands(golden(), 0.5, 1.0), &k, 100);
        assert!(!big.pass);
        assert!(big.c1_violations + big.c2_violations > 0);
        let empty = verify_consistency(&DenominatorData::bands(golden(), 0.5, 1.0), &k, 0);
        assert!(empty.pass);
        let beta = bisect_beta(&golden(), &k, 1.0, 100, 1e-3, 0.5, 30).unwrap();
        let rep = verify_consistency(&DenominatorData::bands(golden(), beta, 1.0), &k, 100);
        assert!(rep.pass);
        assert!(beta > 1e-3 && beta < 0.5);
    }
}
