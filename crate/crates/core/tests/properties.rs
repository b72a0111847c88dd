use proptest::prelude::*;
use qpseries::cancel::{
    canonical_translation, cont_class_with, decompose_stacks, equivalence_class, factorized_cont, group_by_class,
    ClassRoute, DenominatorData,
};
use qpseries::flatseg::{interpolate, step1_block, FlatWindow};
use qpseries::model::{
    golden_mean, FrequencyVector, HopFn, HoppingKernel, HoppingTerm, OperatorInstance, PotentialKind, PotentialSpec,
};
use qpseries::paths::{PathEnumerator, PathString, PathWeightContext};
use qpseries::series::compute_series_recursive;
use qpseries::spectra::{build_truncated, jacobi_eigen, HermitianMatrix};
use qpseries::{Site, C64};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

fn potentials() -> Vec<PotentialSpec> {
    vec![
        PotentialSpec::maryland(),
        PotentialSpec::new(PotentialKind::MeromorphicMonotoneSample { kappa: 1.0 }).unwrap(),
        PotentialSpec::flat_segment(0.1, 0.03, 0.02).unwrap(),
    ]
}

fn eight() -> &'static Vec<PathString> {
    static PATHS: OnceLock<Vec<PathString>> = OnceLock::new();
    PATHS.get_or_init(|| {
        let e = PathEnumerator::new(&HoppingKernel::laplacian(1), 8);
        (2..=8).flat_map(|s| e.eigenvalue(s).unwrap()).collect()
    })
}

/// One or two level-one denominators at short distance.
fn manual_data(sites: &[i32], safedist: u32) -> DenominatorData {
    let levels: BTreeMap<Site, u32> = sites.iter().map(|&n| (Site::d1(n), 1)).collect();
    DenominatorData::manual(FrequencyVector::golden(), levels, vec![0, safedist])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_is_periodic(x in -0.49f64..0.49, k in 0usize..3) {
        let f = &potentials()[k];
        if let (Ok(a), Ok(b)) = (f.value(x), f.value(x + 1.0)) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn potential_is_monotone_on_a_branch(x in -0.49f64..0.49, dx in 0.0f64..0.4, k in 0usize..3) {
        let y = (x + dx).min(0.49);
        let f = &potentials()[k];
        prop_assert!(f.value(x).unwrap() <= f.value(y).unwrap());
    }

    #[test]
    fn hopping_is_covariant(x in 0.0f64..1.0, a in -5i32..=5, m in -4i32..=4, re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let c = C64::new(re, im);
        let terms = vec![
            HoppingTerm { order: 1, offset: vec![1], func: HopFn::Fourier(vec![(0, C64::new(1.0, 0.0)), (1, c)]) },
            HoppingTerm { order: 1, offset: vec![-1], func: HopFn::Fourier(vec![(0, C64::new(1.0, 0.0)), (-1, c.conj())]) },
        ];
        let k = HoppingKernel::from_terms(1, 1, terms).unwrap();
        let w = FrequencyVector::golden();
        let inst = OperatorInstance::new_allow_resonance(PotentialSpec::maryland(), w, k, x, 0.05).unwrap();
        let shifted = inst.with_phase(x + a as f64 * golden_mean()).unwrap();
        let (mm, nn) = (Site::d1(m), Site::d1(m + 1));
        let lhs = inst.hop(1, &(mm + Site::d1(a)), &(nn + Site::d1(a)), 0.0);
        let rhs = shifted.hop(1, &mm, &nn, 0.0);
        prop_assert!((lhs - rhs).norm() <= 1e-12);
    }

    #[test]
    fn series_normalization_support_and_residual(x in -0.45f64..0.45) {
        let inst = OperatorInstance::maryland_golden(x, 0.05).unwrap();
        let r = compute_series_recursive(&inst, 8).unwrap();
        let origin = Site::d1(0);
        for s in 1..=8 {
            prop_assert!(r.psis[s].get(&origin).map_or(true, |z| *z == C64::new(0.0, 0.0)));
            prop_assert!(r.support_radius(s) <= s as i32);
        }
        prop_assert!(r.residuals().unwrap().iter().all(|e| *e <= 1e-10));
    }

    #[test]
    fn printed_paths_reparse(i in 0usize..10_000) {
        let all = eight();
        let p = &all[i % all.len()];
        prop_assert_eq!(&PathString::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn translation_is_idempotent(i in 0usize..10_000, site in 2i32..=4, sd in 3u32..=6) {
        let all = eight();
        let p = &all[i % all.len()];
        let data = manual_data(&[site], sd);
        if let Ok(t) = canonical_translation(p, &data) {
            prop_assert_eq!(canonical_translation(&t, &data).unwrap(), t);
        }
    }

    #[test]
    fn factorization_matches_class_sum(i in 0usize..10_000, site in 2i32..=3) {
        let all = eight();
        let data = manual_data(&[site], 3);
        let inst = OperatorInstance::new(
            PotentialSpec::maryland(),
            FrequencyVector::new(vec![0.203], 50, None, None).unwrap(),
            HoppingKernel::laplacian(1),
            0.13,
            0.05,
        ).unwrap();
        let ctx = PathWeightContext::new(&inst);
        let t = canonical_translation(&all[i % all.len()], &data).unwrap();
        let stacks = decompose_stacks(&t, &data).unwrap();
        if let Ok(f) = factorized_cont::<f64>(&stacks, &ctx, &data) {
            let direct: f64 = cont_class_with(&t, &ctx, &data, ClassRoute::Direct).unwrap();
            prop_assert!((f - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
        }
    }

    #[test]
    fn jacobi_eigenpairs(seed in any::<u64>(), n in 1usize..12) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut h = HermitianMatrix::zeros(n);
        for i in 0..n {
            h.set(i, i, C64::new(rng.gen_range(-3.0..3.0), 0.0));
            for j in 0..i {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                h.set(i, j, z);
                h.set(j, i, z.conj());
            }
        }
        let sys = jacobi_eigen(&h, 64).unwrap();
        prop_assert!(sys.max_residual(&h) <= 1e-10);
        prop_assert!(sys.orthonormality_defect() <= 1e-12);
        prop_assert!(sys.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn collar_blocks_are_unitary(t in 0.0f64..=1.0, x in -0.02f64..0.02) {
        let f = PotentialSpec::flat_segment(0.0, 0.014, 0.007).unwrap();
        let w = FrequencyVector::new(vec![golden_mean()], 50, None, None).unwrap();
        let inst = OperatorInstance::new_allow_resonance(f, w, HoppingKernel::laplacian(1), 0.0, 0.05).unwrap();
        let window = FlatWindow::from_potential(&inst.potential).unwrap();
        let b = step1_block(&inst, window.a + x).unwrap();
        prop_assert!(interpolate(&b, t, x).unwrap().unitarity_defect() <= 1e-12);
    }
}

#[test]
fn classes_partition_enumerated_paths() {
    let e = PathEnumerator::new(&HoppingKernel::laplacian(1), 10);
    for (sites, sd) in [(vec![3], 5u32), (vec![2, 5], 3), (vec![4], 4)] {
        let data = manual_data(&sites, sd);
        for s in [6, 8, 10] {
            let paths = e.eigenvalue(s).unwrap();
            let groups = group_by_class(&paths, &data).unwrap();
            let mut seen = BTreeSet::new();
            for members in groups.values() {
                let class: BTreeSet<String> = equivalence_class(&members[0], &data)
                    .unwrap()
                    .iter()
                    .map(|m| m.without_marks().to_string())
                    .collect();
                assert!(class.len().is_power_of_two());
                let listed: BTreeSet<String> = members.iter().map(|m| m.to_string()).collect();
                assert_eq!(class, listed);
                for m in listed {
                    assert!(seen.insert(m));
                }
            }
            assert_eq!(seen.len(), paths.len());
        }
    }
}

#[test]
fn zero_coupling_spectrum_is_the_diagonal() {
    let inst = OperatorInstance::maryland_golden(0.1, 0.0).unwrap();
    let op = build_truncated(&inst, 10).unwrap();
    let sys = op.diagonalize().unwrap();
    let mut diag: Vec<f64> = (0..op.len()).map(|i| inst.v(&op.site(i)).unwrap()).collect();
    diag.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(sys.values, diag);
}
