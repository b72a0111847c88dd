use crate::cancel::{canonical_translation, decompose_stacks, stack_stats_with, DenominatorData};
use crate::lattice::Site;
use crate::paths::{Loop, PathKind, PathString, Visit};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Whether every jump of `path` is admissible for the kernel of the
/// transformed operator: an order-`j` jump spans at most `j` in `ℓ¹`, and a
/// jump touching a flat site (the origin included when it is flat) has
/// order at least `min_flat_order`.
pub fn h2_compatible(path: &PathString, flat: &dyn Fn(&Site) -> bool, min_flat_order: u32) -> bool {
    fn ok(lp: &Loop, dim: usize, flat: &dyn Fn(&Site) -> bool, min: u32, closes: bool) -> bool {
        let origin = Site::zero(dim);
        let jump = |a: &Site, b: &Site, j: u32| -> bool {
            (*b - *a).norm_l1() as u32 <= j && (j >= min || !(flat(a) || flat(b)))
        };
        let mut prev = origin;
        for v in &lp.visits {
            if !jump(&prev, &v.site, v.order_in) {
                return false;
            }
            if !v.attachments.iter().all(|a| ok(a, dim, flat, min, true)) {
                return false;
            }
            prev = v.site;
        }
        !closes || jump(&prev, &origin, lp.closing_order)
    }
    ok(&path.root, path.dim, flat, min_flat_order, path.kind == PathKind::Eigenvalue)
}

#[derive(Clone, Debug, Serialize)]
pub struct Sing4Stack {
    pub path: String,
    pub length: u32,
    pub singden: u32,
    pub singdownedges: u32,
    /// `μ·κ·(singden + 2·singdownedges) / |P|` with `δ = ε^κ`.
    pub exponent_ratio: f64,
    pub short_loop_violations: u32,
    pub per_loop_violations: u32,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sing4Report {
    pub r: f64,
    pub mu: f64,
    pub delta_power: f64,
    pub stacks: Vec<Sing4Stack>,
    pub max_exponent_ratio: f64,
    pub violations: usize,
    pub pass: bool,
}

fn loop_checks(lp: &Loop, singular: &dyn Fn(&Site) -> bool, short: &mut u32, per: &mut u32) {
    let own = lp.own_length();
    let sd = lp.visits.iter().filter(|v| singular(&v.site)).count() as u32;
    if own <= 6 && sd > 0 {
        *short += 1;
    }
    if sd > own / 6 {
        *per += 1;
    }
    for v in &lp.visits {
        for a in &v.attachments {
            loop_checks(a, singular, short, per);
        }
    }
}

/// Per-stack accounting of singular small denominators. `singular` flags
/// flat sites other than the origin; with `δ = ε^delta_power`, the check is
/// `delta_power·μ·(singden + 2·singdownedges) ≤ r·|P|`.
pub fn sing4_accounting(
    stacks: &[PathString],
    data: &DenominatorData,
    singular: &dyn Fn(&Site) -> bool,
    mu: f64,
    delta_power: f64,
    r: f64,
) -> Sing4Report {
    let rows: Vec<Sing4Stack> = stacks
        .iter()
        .map(|p| {
            let st = stack_stats_with(p, data, f64::INFINITY, singular);
            let (mut short, mut per) = (0, 0);
            loop_checks(&p.root, singular, &mut short, &mut per);
            let e = delta_power * mu * (st.singden as f64 + 2.0 * st.singdownedges as f64);
            let ratio = e / st.length.max(1) as f64;
            Sing4Stack {
                path: p.to_string(),
                length: st.length,
                singden: st.singden,
                singdownedges: st.singdownedges,
                exponent_ratio: ratio,
                short_loop_violations: short,
                per_loop_violations: per,
                pass: short == 0 && per == 0 && ratio <= r,
            }
        })
        .collect();
    let violations = rows.iter().filter(|s| !s.pass).count();
    Sing4Report {
        r,
        mu,
        delta_power,
        max_exponent_ratio: rows.iter().map(|s| s.exponent_ratio).fold(0.0, f64::max),
        violations,
        pass: violations == 0,
        stacks: rows,
    }
}

/// Random eigenvalue paths admissible for the transformed kernel. Half of
/// the base loops make an excursion to one of `targets`, bounce around it,
/// and return; visits carry attached loops at random, more often at flat
/// sites.
pub struct RandomPaths<'a> {
    pub dim: usize,
    pub flat: &'a dyn Fn(&Site) -> bool,
    pub targets: Vec<Site>,
    pub min_flat_order: u32,
    pub max_depth: usize,
}

impl RandomPaths<'_> {
    fn step_toward(&self, rng: &mut ChaCha8Rng, from: &Site, to: &Site) -> Site {
        let mut diff: Vec<i32> = (*to - *from).coords().to_vec();
        let mut budget = 3;
        let mut step = vec![0; self.dim];
        let mut axes: Vec<usize> = (0..self.dim).collect();
        axes.shuffle(rng);
        for k in axes {
            let take = diff[k].abs().min(budget);
            step[k] = take * diff[k].signum();
            diff[k] -= step[k];
            budget -= take;
        }
        *from + Site::new(&step)
    }

    fn random_offset(&self, rng: &mut ChaCha8Rng) -> Site {
        loop {
            let c: Vec<i32> = (0..self.dim).map(|_| rng.gen_range(-3..=3)).collect();
            let e = Site::new(&c);
            if !e.is_zero() && e.norm_l1() <= 3 {
                return e;
            }
        }
    }

    fn order(&self, rng: &mut ChaCha8Rng, a: &Site, b: &Site) -> u32 {
        let touches = (self.flat)(a) || (self.flat)(b);
        let lo = ((*b - *a).norm_l1() as u32).max(if touches { self.min_flat_order } else { 1 });
        rng.gen_range(lo..=3.max(lo))
    }

    fn gen_loop(&self, rng: &mut ChaCha8Rng, depth: usize) -> Loop {
        let origin = Site::zero(self.dim);
        let mut sites: Vec<Site> = vec![];
        let mut pos = origin;
        let excursion = depth == 0 && !self.targets.is_empty() && rng.gen_bool(0.5);
        if excursion {
            let m = *self.targets.choose(rng).unwrap();
            while pos != m {
                pos = self.step_toward(rng, &pos, &m);
                sites.push(pos);
            }
            for _ in 0..rng.gen_range(0..=2) {
                let e = self.random_offset(rng);
                if m + e != origin {
                    sites.push(m + e);
                    sites.push(m);
                }
            }
        } else {
            for _ in 0..rng.gen_range(1..=3) {
                let e = self.random_offset(rng);
                if pos + e != origin {
                    pos = pos + e;
                    sites.push(pos);
                }
            }
            if sites.is_empty() {
                let e = self.random_offset(rng);
                sites.push(e);
            }
        }
        pos = *sites.last().unwrap();
        loop {
            let next = self.step_toward(rng, &pos, &origin);
            if next == origin {
                break;
            }
            sites.push(next);
            pos = next;
        }
        let mut visits = vec![];
        let mut prev = origin;
        for s in &sites {
            let order = self.order(rng, &prev, s);
            let p_att = if depth >= self.max_depth {
                0.0
            } else if (self.flat)(s) {
                0.6
            } else {
                0.15
            };
            let mut attachments = vec![];
            while attachments.len() < 2 && rng.gen_bool(p_att) {
                attachments.push(self.gen_loop(rng, depth + 1));
            }
            visits.push(Visit {
                site: *s,
                order_in: order,
                attachments,
            });
            prev = *s;
        }
        let closing_order = self.order(rng, &prev, &origin);
        Loop {
            visits,
            closing_order,
            marks: vec![],
        }
    }

    pub fn sample(&self, count: usize, seed: u64) -> Vec<PathString> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| PathString {
                kind: PathKind::Eigenvalue,
                root: self.gen_loop(&mut rng, 0),
                dim: self.dim,
            })
            .collect()
    }
}

/// Loop stacks of the canonical translations of the given paths, in order.
/// Paths whose translation fails are skipped.
pub fn stacks_of(paths: &[PathString], data: &DenominatorData) -> Vec<PathString> {
    paths
        .iter()
        .filter_map(|p| canonical_translation(p, data).ok())
        .filter_map(|t| decompose_stacks(&t, data).ok())
        .flat_map(|s| s.into_iter().map(|st| st.as_path()))
        .collect()
}
