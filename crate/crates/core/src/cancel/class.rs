use super::denominators::DenominatorData;
use super::marking::{canonical_translation, equivalence_class, is_short};
use crate::error::Result;
use crate::lattice::Site;
use crate::paths::{cont_with, Loop, PathKind, PathString, PathWeightContext};
use crate::scalar::Scalar;
use crate::C64;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassRoute {
    /// Sum of `Cont` over the listed members.
    Direct,
    /// Telescoping product over the short loops of the canonical translation.
    Product,
}

/// `Cont([P])` by direct summation over the class.
pub fn cont_class(path: &PathString, ctx: &PathWeightContext, data: &DenominatorData) -> Result<C64> {
    cont_class_with::<C64>(path, ctx, data, ClassRoute::Direct)
}

pub fn cont_class_with<S: Scalar>(
    path: &PathString,
    ctx: &PathWeightContext,
    data: &DenominatorData,
    route: ClassRoute,
) -> Result<S> {
    match route {
        ClassRoute::Direct => {
            let mut sum = S::zero();
            for m in equivalence_class(path, data)? {
                sum = sum + cont_with::<S>(&m, ctx)?;
            }
            Ok(sum)
        }
        ClassRoute::Product => {
            let t = canonical_translation(path, data)?;
            class_weight(&t.root, ctx, ctx.shift, t.kind == PathKind::Eigenvalue, t.dim, data)
        }
    }
}

/// Class weight of a translated loop whose own sheet sits at `shift`;
/// ascents are always evaluated at the base shift of `ctx`. A short ascent
/// `A` at `n` contributes `(V_0 − V_n)^{-1}(Cont([A], s + n·ω) − Cont([A], t))`,
/// any other ascent `−(V_0 − V_n)^{-1} Cont([A], t)`.
pub(crate) fn class_weight<S: Scalar>(
    lp: &Loop,
    ctx: &PathWeightContext,
    shift: f64,
    closes: bool,
    dim: usize,
    data: &DenominatorData,
) -> Result<S> {
    let own = ctx.at(shift);
    let omega = ctx.instance.omega();
    let mut prev = Site::zero(dim);
    let mut w = S::one();
    for v in &lp.visits {
        let inv: S = own.inv_den(&v.site)?;
        w = w * own.hop::<S>(v.order_in, &v.site, &prev)? * inv.clone();
        for a in &v.attachments {
            let here: S = class_weight(a, ctx, ctx.shift, true, dim, data)?;
            if is_short(a, &v.site, data) {
                let up: S = class_weight(a, ctx, shift + v.site.dot(omega), true, dim, data)?;
                w = w * inv.clone() * (up - here);
            } else {
                w = -(w * here * inv.clone());
            }
        }
        prev = v.site;
    }
    if closes {
        w = w * own.hop::<S>(lp.closing_order, &Site::zero(dim), &prev)?;
    }
    Ok(w)
}

/// Paths grouped by canonical translation, keyed by the printed translation.
pub fn group_by_class(paths: &[PathString], data: &DenominatorData) -> Result<BTreeMap<String, Vec<PathString>>> {
    let mut out: BTreeMap<String, Vec<PathString>> = BTreeMap::new();
    for p in paths {
        let t = canonical_translation(&p.without_marks(), data)?;
        out.entry(t.to_string()).or_default().push(p.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FrequencyVector, HoppingKernel, OperatorInstance, PotentialSpec};
    use crate::paths::{cont, PathEnumerator};
    use crate::scalar::High;

    fn engineered() -> (OperatorInstance, DenominatorData) {
        let w = FrequencyVector::new(vec![0.2 + 0.003], 50, None, None).unwrap();
        let inst = OperatorInstance::new(
            PotentialSpec::maryland(),
            w.clone(),
            HoppingKernel::laplacian(1),
            0.13,
            0.05,
        )
        .unwrap();
        let mut levels = BTreeMap::new();
        levels.insert(Site::d1(5), 1);
        (inst, DenominatorData::manual(w, levels, vec![0, 3]))
    }

    #[test]
    fn closed_form_for_repeated_returns() {
        let (inst, data) = engineered();
        let ctx = PathWeightContext::new(&inst);
        let v0 = High::from_real(inst.v0().unwrap());
        let den = |n: i32| v0.clone() - High::from_real(inst.v(&Site::d1(n)).unwrap());
        let base: High = cont_with(&PathString::parse("(123454321)").unwrap(), &ctx).unwrap();
        let factor = (High::one() / den(4) - High::one() / den(-1)) / den(5);
        let mut want = base;
        for k in 2..=8usize {
            want = want * factor.clone();
            let q = PathString::parse(&format!("(12345{}4321)", "45".repeat(k - 1))).unwrap();
            let direct: High = cont_class_with(&q, &ctx, &data, ClassRoute::Direct).unwrap();
            let rel = ((direct - want.clone()) / want.clone()).to_f64().abs();
            assert!(rel <= 1e-12, "k={k} direct: {rel:e}");
            let product: f64 = cont_class_with(&q, &ctx, &data, ClassRoute::Product).unwrap();
            let rel = (product / want.to_f64() - 1.0).abs();
            assert!(rel <= 1e-12, "k={k} product: {rel:e}");
        }
    }

    #[test]
    fn singleton_class_matches_path() {
        let (inst, data) = engineered();
        let ctx = PathWeightContext::new(&inst);
        let q = PathString::parse("(1234321)").unwrap();
        assert_eq!(cont_class(&q, &ctx, &data).unwrap(), cont(&q, &ctx).unwrap());
    }

    #[test]
    fn regrouping_identity() {
        let w = FrequencyVector::new(vec![1.0 / 3.0 + 0.01], 50, None, None).unwrap();
        let inst = OperatorInstance::new(
            PotentialSpec::maryland(),
            w.clone(),
            HoppingKernel::laplacian(1),
            0.1,
            0.05,
        )
        .unwrap();
        let data = DenominatorData::bands(w, 0.1, 3.0);
        assert_eq!(data.level_of(&Site::d1(3)), 1);
        let ctx = PathWeightContext::new(&inst);
        let e = PathEnumerator::new(&inst.hopping, 8);
        let mut nontrivial = 0;
        for s in 2..=8 {
            let paths = e.eigenvalue(s).unwrap();
            let groups = group_by_class(&paths, &data).unwrap();
            let mut by_path = High::zero();
            for p in &paths {
                by_path = by_path + cont_with::<High>(p, &ctx).unwrap();
            }
            let mut by_class = High::zero();
            let mut by_product = 0.0;
            for members in groups.values() {
                let class = equivalence_class(&members[0], &data).unwrap();
                assert_eq!(class.len(), members.len());
                assert!(class.len().is_power_of_two());
                nontrivial += usize::from(class.len() > 1);
                by_class = by_class + cont_class_with::<High>(&members[0], &ctx, &data, ClassRoute::Direct).unwrap();
                by_product += cont_class_with::<f64>(&members[0], &ctx, &data, ClassRoute::Product).unwrap();
            }
            let diff = (by_class.clone() - by_path.clone()).to_f64().abs();
            assert!(diff <= 1e-25 * by_path.to_f64().abs(), "s={s}: {diff}");
            assert!((by_product - by_path.to_f64()).abs() <= 1e-10 * by_path.to_f64().abs());
        }
        assert!(nontrivial > 0);
    }
}
