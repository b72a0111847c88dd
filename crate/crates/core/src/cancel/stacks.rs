use super::class::class_weight;
use super::denominators::{DenominatorData, INFINITE_LEVEL};
use super::marking::{canonical_translation, is_short};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::model::OperatorInstance;
use crate::paths::{Loop, PathEnumerator, PathKind, PathString, PathWeightContext};
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeSet;

/// Where a non-base stack hangs: loop `node` (preorder index among the loops
/// of the parent stack), visit `visit` of that loop, position `slot` in the
/// visit's full attachment list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Anchor {
    pub stack: usize,
    pub node: usize,
    pub visit: usize,
    pub slot: usize,
    pub site: Site,
}

impl Anchor {
    /// Anchors on the base loop of the parent stack sit at a fixed phase.
    pub fn is_rigid(&self) -> bool {
        self.node == 0
    }
}

/// A base loop with every short loop reachable from it through short loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopStack {
    pub kind: PathKind,
    pub dim: usize,
    pub root: Loop,
    pub anchor: Option<Anchor>,
}

impl LoopStack {
    pub fn as_path(&self) -> PathString {
        PathString {
            kind: self.kind,
            root: self.root.clone(),
            dim: self.dim,
        }
    }
}

/// Whether `path` is a single loop stack: translation-canonical and every
/// attached loop short.
pub fn is_loop_stack(path: &PathString, data: &DenominatorData) -> bool {
    fn all_short(lp: &Loop, data: &DenominatorData) -> bool {
        lp.visits.iter().all(|v| {
            v.attachments
                .iter()
                .all(|a| is_short(a, &v.site, data) && all_short(a, data))
        })
    }
    !path.root.has_marks()
        && canonical_translation(path, data).is_ok_and(|t| t == *path)
        && all_short(&path.root, data)
}

/// Greedy maximal-stack decomposition in string order. The first stack
/// holds the base loop; later stacks hang on earlier ones.
pub fn decompose_stacks(path: &PathString, data: &DenominatorData) -> Result<Vec<LoopStack>> {
    if path.root.has_marks() {
        return Err(Error::NotCanonical("path carries marks".into()));
    }
    let t = canonical_translation(path, data)?;
    if t != *path {
        return Err(Error::NotCanonical(format!("{path} translates to {t}")));
    }
    let mut stacks = vec![];
    build_stack(&path.root, path.kind, path.dim, None, data, &mut stacks);
    Ok(stacks)
}

fn build_stack(
    base: &Loop,
    kind: PathKind,
    dim: usize,
    anchor: Option<Anchor>,
    data: &DenominatorData,
    stacks: &mut Vec<LoopStack>,
) {
    let idx = stacks.len();
    stacks.push(LoopStack {
        kind,
        dim,
        root: Loop::default(),
        anchor,
    });
    let mut pending = vec![];
    let mut counter = 0;
    let root = prune(base, idx, &mut counter, data, &mut pending);
    stacks[idx].root = root;
    for (a, lp) in pending {
        build_stack(&lp, PathKind::Eigenvalue, dim, Some(a), data, stacks);
    }
}

fn prune(
    lp: &Loop,
    stack: usize,
    counter: &mut usize,
    data: &DenominatorData,
    pending: &mut Vec<(Anchor, Loop)>,
) -> Loop {
    let node = *counter;
    *counter += 1;
    let mut out = lp.clone();
    for (vi, v) in out.visits.iter_mut().enumerate() {
        let mut kept = vec![];
        for (slot, a) in v.attachments.iter().enumerate() {
            if is_short(a, &v.site, data) {
                kept.push(prune(a, stack, counter, data, pending));
            } else {
                pending.push((
                    Anchor {
                        stack,
                        node,
                        visit: vi,
                        slot,
                        site: v.site,
                    },
                    a.clone(),
                ));
            }
        }
        v.attachments = kept;
    }
    out
}

/// Inverse of [`decompose_stacks`].
pub fn reassemble(stacks: &[LoopStack]) -> Result<PathString> {
    let first = stacks.first().ok_or(Error::Invalid("no stacks".into()))?;
    Ok(PathString {
        kind: first.kind,
        root: assemble_stack(stacks, 0)?,
        dim: first.dim,
    })
}

fn assemble_stack(stacks: &[LoopStack], idx: usize) -> Result<Loop> {
    let mut children: Vec<(&Anchor, Loop)> = vec![];
    for (j, s) in stacks.iter().enumerate() {
        if let Some(a) = &s.anchor {
            if a.stack == idx {
                children.push((a, assemble_stack(stacks, j)?));
            }
        }
    }
    let mut root = stacks[idx].root.clone();
    let mut counter = 0;
    insert_children(&mut root, &mut counter, &children)?;
    Ok(root)
}

fn insert_children(lp: &mut Loop, counter: &mut usize, children: &[(&Anchor, Loop)]) -> Result<()> {
    let node = *counter;
    *counter += 1;
    for v in &mut lp.visits {
        for a in &mut v.attachments {
            insert_children(a, counter, children)?;
        }
    }
    let mut mine: Vec<&(&Anchor, Loop)> = children.iter().filter(|(a, _)| a.node == node).collect();
    mine.sort_by_key(|(a, _)| (a.visit, a.slot));
    for (a, child) in mine {
        let v = lp.visits.get_mut(a.visit).ok_or(Error::BadPosition(a.visit))?;
        if a.slot > v.attachments.len() {
            return Err(Error::BadPosition(a.slot));
        }
        v.attachments.insert(a.slot, child.clone());
    }
    Ok(())
}

/// `Cont([P₀]) ∏_s (V_{n_s} − V_0)^{-1} Cont([P_s])` over the maximal stacks.
/// Needs every anchor on the base loop of its parent stack.
pub fn factorized_cont<S: Scalar>(
    stacks: &[LoopStack],
    ctx: &PathWeightContext,
    data: &DenominatorData,
) -> Result<S> {
    let mut total = S::one();
    for (i, s) in stacks.iter().enumerate() {
        let closes = s.kind == PathKind::Eigenvalue;
        total = total * class_weight::<S>(&s.root, ctx, ctx.shift, closes, s.dim, data)?;
        if let Some(a) = &s.anchor {
            if !a.is_rigid() {
                return Err(Error::PreconditionViolated(format!(
                    "stack {i} hangs on a short loop and does not factor"
                )));
            }
            total = -(total * ctx.inv_den::<S>(&a.site)?);
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StackStats {
    pub cutoff: f64,
    pub length: u32,
    pub den: u32,
    pub totallevel: u64,
    pub loops: u32,
    pub nbloops: u32,
    pub nblevel: u64,
    pub downedges: u32,
    pub singden: u32,
    pub singdownedges: u32,
    pub height: u32,
    pub maxlevel: u32,
}

/// Counters with cutoff `m` (real-valued so that `M_β` can be passed
/// directly). Descending edges are never counted as denominators.
pub fn stack_stats(path: &PathString, data: &DenominatorData, cutoff: f64) -> StackStats {
    stack_stats_with(path, data, cutoff, &|_| false)
}

/// As [`stack_stats`], also counting denominators and descents at sites
/// flagged by `singular`.
pub fn stack_stats_with(
    path: &PathString,
    data: &DenominatorData,
    cutoff: f64,
    singular: &dyn Fn(&Site) -> bool,
) -> StackStats {
    let mut st = StackStats {
        cutoff,
        length: path.length(),
        height: path.root.height() as u32,
        ..Default::default()
    };
    walk_stats(&path.root, true, data, singular, &mut st);
    st
}

fn walk_stats(lp: &Loop, is_base: bool, data: &DenominatorData, singular: &dyn Fn(&Site) -> bool, st: &mut StackStats) {
    let mut hit = false;
    for v in &lp.visits {
        let level = data.level_of(&v.site);
        let counted = level != INFINITE_LEVEL && level as f64 >= st.cutoff;
        if level != INFINITE_LEVEL {
            st.maxlevel = st.maxlevel.max(level);
        }
        if counted {
            hit = true;
            st.den += 1;
            st.totallevel += level as u64;
            if !is_base {
                st.nblevel += level as u64;
            }
        }
        if singular(&v.site) {
            st.singden += 1;
        }
        for a in &v.attachments {
            if counted {
                st.downedges += 1;
            }
            if singular(&v.site) {
                st.singdownedges += 1;
            }
            walk_stats(a, false, data, singular, st);
        }
    }
    if hit {
        st.loops += 1;
        if !is_base {
            st.nbloops += 1;
        }
    }
}

/// `M_β = log(4/D_min)/log β − 1`.
pub fn m_beta(beta: f64, d_min: f64) -> f64 {
    (4.0 / d_min).ln() / beta.ln() - 1.0
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct StackBoundParams {
    pub c_reg: f64,
    pub d_min: f64,
    /// `‖φ‖_∞`.
    pub phi_sup: f64,
    /// Combinatorial constant; 1 gives the bare right-hand side.
    pub c_dist: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StackBoundReport {
    pub path: String,
    pub t: f64,
    pub t_max: f64,
    pub m_beta: f64,
    pub stats: StackStats,
    pub cont_abs: f64,
    /// Right-hand side with `C_dist = 1`.
    pub rhs_unit: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `(|Cont| / rhs_unit)^{1/|P|}`: the smallest admissible `C_dist`.
    pub implied_c_dist: f64,
    pub derivative: f64,
    pub derivative_bound: f64,
    pub lipschitz_ratio: f64,
    pub pass: bool,
}

/// `(1/4) min ‖n·ω‖` over the base-loop sites.
pub fn allowed_shift(path: &PathString, data: &DenominatorData) -> f64 {
    path.root
        .visits
        .iter()
        .map(|v| data.frequency.norm(&v.site))
        .fold(f64::INFINITY, f64::min)
        / 4.0
}

/// Evaluates both sides of the loop-stack bound and its Lipschitz companion
/// at shift `t`. The derivative is a central difference with step
/// `1e-6·t_max`; `pass` requires `ratio ≤ 1` and a derivative within twice
/// its bound.
pub fn check_stack_bound(
    path: &PathString,
    ctx: &PathWeightContext,
    data: &DenominatorData,
    params: StackBoundParams,
    t: f64,
) -> Result<StackBoundReport> {
    let beta = data
        .beta()
        .ok_or_else(|| Error::PreconditionViolated("the stack bound needs band-defined levels".into()))?;
    if !is_loop_stack(path, data) {
        return Err(Error::PreconditionViolated(format!("{path} is not a loop stack")));
    }
    let t_max = allowed_shift(path, data);
    if t.abs() > t_max {
        return Err(Error::PreconditionViolated(format!("|t| = {t} exceeds {t_max}")));
    }
    let m = m_beta(beta, params.d_min);
    let st = stack_stats(path, data, m);
    let len = st.length as f64;
    let q = (4.0 / params.d_min).ln();
    let lb = beta.ln();
    let log_rhs = len * params.phi_sup.ln() + (st.den as f64) * q
        - (st.totallevel as f64 + st.den as f64) * lb
        + (st.downedges as f64) * params.c_reg.ln()
        + (st.nbloops as f64) * q
        - (st.nblevel as f64 + st.nbloops as f64) * lb;
    let rhs_unit = log_rhs.exp();
    let rhs = rhs_unit * params.c_dist.powf(len);
    let closes = path.kind == PathKind::Eigenvalue;
    let eval = |s: f64| -> Result<f64> {
        let c = ctx.at(s);
        Ok(class_weight::<crate::C64>(&path.root, &c, s, closes, path.dim, data)?.norm())
    };
    let signed = |s: f64| -> Result<crate::C64> {
        let c = ctx.at(s);
        class_weight::<crate::C64>(&path.root, &c, s, closes, path.dim, data)
    };
    let cont_abs = eval(t)?;
    let h = 1e-6 * t_max;
    let derivative = ((signed(t + h)? - signed(t - h)?) / (2.0 * h)).norm();
    let base_level = path
        .root
        .visits
        .iter()
        .map(|v| data.level_of(&v.site))
        .filter(|&l| l != INFINITE_LEVEL)
        .max()
        .unwrap_or(0);
    let derivative_bound = params.c_reg * (4.0 / beta.powi(base_level as i32 + 1)).max(params.d_min) * rhs;
    let ratio = cont_abs / rhs;
    let lipschitz_ratio = derivative / derivative_bound;
    Ok(StackBoundReport {
        path: path.to_string(),
        t,
        t_max,
        m_beta: m,
        stats: st,
        cont_abs,
        rhs_unit,
        rhs,
        ratio,
        implied_c_dist: (cont_abs / rhs_unit).powf(1.0 / len),
        derivative,
        derivative_bound,
        lipschitz_ratio,
        pass: ratio <= 1.0 && lipschitz_ratio <= 2.0,
    })
}

/// Distinct translation-canonical loop stacks among the eigenvalue paths of
/// the given lengths, sorted by printed string.
pub fn stack_population(
    instance: &OperatorInstance,
    data: &DenominatorData,
    lengths: std::ops::RangeInclusive<u32>,
) -> Result<Vec<PathString>> {
    let e = PathEnumerator::new(&instance.hopping, *lengths.end());
    let mut seen = BTreeSet::new();
    let mut out = vec![];
    for s in lengths {
        for p in e.eigenvalue(s)? {
            let t = canonical_translation(&p, data)?;
            let key = t.to_string();
            if !seen.contains(&key) && is_loop_stack(&t, data) {
                seen.insert(key);
                out.push(t);
            }
        }
    }
    out.sort_by_key(|p| p.to_string());
    Ok(out)
}

/// Two disjoint seeded samples (calibration, holdout) of `count` stacks each,
/// with a shift drawn uniformly from `[-t_max/2, t_max/2]` for each stack.
pub fn sample_stacks(
    population: &[PathString],
    data: &DenominatorData,
    count: usize,
    seed: u64,
) -> (Vec<(PathString, f64)>, Vec<(PathString, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..population.len()).collect();
    idx.shuffle(&mut rng);
    let mut draw = |ids: &[usize]| -> Vec<(PathString, f64)> {
        ids.iter()
            .map(|&i| {
                let p = population[i].clone();
                let tm = allowed_shift(&p, data);
                let t = rng.gen_range(-0.5..=0.5) * tm;
                (p, t)
            })
            .collect()
    };
    let n = count.min(population.len() / 2);
    let cal = draw(&idx[..n]);
    let hold = draw(&idx[n..2 * n]);
    (cal, hold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cancel::class::{cont_class_with, ClassRoute};
    use crate::model::{FrequencyVector, HoppingKernel, PotentialSpec};
    use std::collections::BTreeMap;

    fn p(s: &str) -> PathString {
        PathString::parse(s).unwrap()
    }

    fn manual5() -> DenominatorData {
        let mut levels = BTreeMap::new();
        levels.insert(Site::d1(5), 1);
        levels.insert(Site::d1(2), 1);
        DenominatorData::manual(FrequencyVector::new(vec![0.203], 50, None, None).unwrap(), levels, vec![0, 3])
    }

    fn inst() -> OperatorInstance {
        OperatorInstance::new(
            PotentialSpec::maryland(),
            FrequencyVector::new(vec![0.203], 50, None, None).unwrap(),
            HoppingKernel::laplacian(1),
            0.13,
            0.05,
        )
        .unwrap()
    }

    #[test]
    fn safe_loop_is_one_stack() {
        let d = manual5();
        let q = p("(1-1)");
        let s = decompose_stacks(&q, &d).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].anchor.is_none());
        let st = stack_stats(&q, &d, 1.0);
        assert_eq!((st.den, st.loops, st.downedges), (0, 0, 0));
        let st0 = stack_stats(&q, &d, 0.0);
        assert_eq!((st0.den, st0.loops), (2, 1));
    }

    #[test]
    fn repeated_returns_form_one_stack() {
        let d = manual5();
        for k in 2..=5 {
            let t = p(&format!("(12345{}4321)", "(-1)5".repeat(k - 1)));
            let s = decompose_stacks(&t, &d).unwrap();
            assert_eq!(s.len(), 1);
            assert!(is_loop_stack(&t, &d));
            let st = stack_stats(&t, &d, 0.0);
            assert_eq!(st.downedges as usize, k - 1);
            assert_eq!(st.den + st.loops, st.length);
            assert_eq!(st.downedges, st.loops - 1);
        }
    }

    #[test]
    fn non_short_attachment_splits() {
        let d = manual5();
        let t = p("(12(121)2(-1)21)");
        let s = decompose_stacks(&t, &d).unwrap();
        assert_eq!(s.len(), 2);
        let a = s[1].anchor.as_ref().unwrap();
        assert_eq!(a.site, Site::d1(2));
        assert!(a.is_rigid());
        assert_eq!(reassemble(&s).unwrap(), t);
        let i = inst();
        let ctx = PathWeightContext::new(&i);
        let direct: f64 = cont_class_with(&t, &ctx, &d, ClassRoute::Direct).unwrap();
        let fact: f64 = factorized_cont(&s, &ctx, &d).unwrap();
        assert!((direct - fact).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn marked_path_is_not_canonical() {
        let d = manual5();
        assert!(matches!(
            decompose_stacks(&p("(12345[4]54321)"), &d),
            Err(Error::NotCanonical(_))
        ));
        assert!(matches!(
            decompose_stacks(&p("(123454321)").without_marks(), &d),
            Ok(_)
        ));
        assert!(matches!(
            decompose_stacks(&p("(1234545454321)"), &d),
            Err(Error::NotCanonical(_))
        ));
    }
}
