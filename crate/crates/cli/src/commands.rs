use crate::config::{Precision, RunConfig};
use crate::output::{num, Artifacts};
use anyhow::{bail, Context, Result};
use qpseries::cancel::{
    bisect_beta, canonical_marking, canonical_translation, check_stack_bound, cont_class_with, equivalence_class,
    group_by_class, sample_stacks, stack_population, verify_consistency, ClassRoute, DenominatorData,
    StackBoundParams,
};
use qpseries::flatseg::{
    f1_value, flatseg_report, h2_compatible, sing4_accounting, slope_scan, stacks_of, FlatWindow, RandomPaths,
};
use qpseries::lattice::reduce_half;
use qpseries::model::{probe_regularity, OperatorInstance};
use qpseries::paths::{cont_with, PathEnumerator, PathString, PathWeightContext};
use qpseries::scalar::{High, Scalar};
use qpseries::series::{compute_series_longrange, compute_series_recursive, evaluate_partial_sum, lambda_of_x};
use qpseries::spectra::{completeness_check, envelope_holds, halving_check, ids_check, localization_profile};
use qpseries::Site;
use serde::Serialize;
use serde_json::json;
use std::collections::BTreeMap;

/// Summary lines plus whether every checked invariant held.
pub struct Outcome {
    pub lines: Vec<String>,
    pub ok: bool,
}

impl Outcome {
    fn new() -> Self {
        Outcome { lines: vec![], ok: true }
    }

    fn line(&mut self, s: String) {
        self.lines.push(s);
    }

    fn require(&mut self, cond: bool, what: &str) {
        if !cond {
            self.ok = false;
            self.lines.push(format!("violated: {what}"));
        }
    }
}

pub struct ClassArgs {
    pub path: Option<String>,
    pub levels: Option<String>,
    pub safedist: Option<String>,
    pub family: Option<usize>,
}

fn sum_paths(paths: &[PathString], ctx: &PathWeightContext, precision: Precision) -> Result<f64> {
    Ok(match precision {
        Precision::Double => {
            let mut s = 0.0;
            for p in paths {
                s += cont_with::<f64>(p, ctx)?;
            }
            s
        }
        Precision::High => {
            let mut s = High::zero();
            for p in paths {
                s = s + cont_with::<High>(p, ctx)?;
            }
            s.to_f64()
        }
    })
}

fn class_sum(p: &PathString, ctx: &PathWeightContext, data: &DenominatorData, precision: Precision) -> Result<f64> {
    Ok(match precision {
        Precision::Double => cont_class_with::<f64>(p, ctx, data, ClassRoute::Direct)?,
        Precision::High => cont_class_with::<High>(p, ctx, data, ClassRoute::Direct)?.to_f64(),
    })
}

fn tolerance(precision: Precision) -> f64 {
    match precision {
        Precision::Double => 1e-10,
        Precision::High => 1e-25,
    }
}

fn series_of(inst: &OperatorInstance, order: usize) -> Result<qpseries::series::SeriesResult> {
    if inst.hopping.orders().all(|j| j == 1) {
        Ok(compute_series_recursive(inst, order)?)
    } else {
        Ok(compute_series_longrange(inst, order)?)
    }
}

pub fn series(cfg: &RunConfig, out: &Artifacts) -> Result<Outcome> {
    let inst = cfg.instance()?;
    let r = series_of(&inst, cfg.order)?;
    let residuals = r.residuals()?;
    let rows: Vec<Vec<String>> = (0..=cfg.order)
        .map(|s| vec![s.to_string(), num(r.lambdas[s]), num(r.lambda_imag[s]), num(residuals[s])])
        .collect();
    out.csv("series", &["s", "lambda", "lambda_imag", "residual"], &rows)?;
    let partial: Vec<_> = cfg
        .epsilons
        .iter()
        .map(|&e| json!({"epsilon": e, "lambda": evaluate_partial_sum(&r, e, cfg.s_used).0}))
        .collect();
    out.json(
        cfg,
        json!({
            "method": r.method,
            "lambdas": r.lambdas,
            "residuals": residuals,
            "partial_sums": partial,
            "radius_estimate": r.radius_estimate(),
        }),
    )?;
    let mut o = Outcome::new();
    for s in 0..=cfg.order {
        o.line(format!("lambda_{s:<2} = {:+.12e}", r.lambdas[s]));
    }
    o.require(residuals.iter().all(|x| *x <= 1e-10), "recursion residuals <= 1e-10");
    Ok(o)
}

pub fn paths(cfg: &RunConfig, out: &Artifacts) -> Result<Outcome> {
    let inst = cfg.instance()?;
    let rec = compute_series_recursive(&inst, cfg.order)?;
    let e = PathEnumerator::new(&inst.hopping, cfg.order as u32);
    let ctx = PathWeightContext::new(&inst);
    let mut rows = vec![];
    let mut worst: f64 = 0.0;
    for s in 1..=cfg.order as u32 {
        let ps = e.eigenvalue(s)?;
        let by_paths = sum_paths(&ps, &ctx, cfg.precision)?;
        let want = rec.lambdas[s as usize];
        let rel = if by_paths == 0.0 && want == 0.0 {
            0.0
        } else {
            (by_paths - want).abs() / want.abs().max(1e-300)
        };
        worst = worst.max(rel);
        rows.push(vec![s.to_string(), ps.len().to_string(), num(by_paths), num(want), num(rel)]);
    }
    out.csv("paths", &["s", "paths", "path_sum", "recursion", "rel_error"], &rows)?;
    out.json(cfg, json!({"max_rel_error": worst, "orders": cfg.order}))?;
    let mut o = Outcome::new();
    o.line(format!("path sums vs recursion, s <= {}: max rel error {worst:.3e}", cfg.order));
    o.require(worst <= 1e-10, "path sums match recursion to 1e-10");
    Ok(o)
}

fn parse_levels(text: &str) -> Result<BTreeMap<Site, u32>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (site, level) = item.split_once(':').context("levels take the form site:level,...")?;
        let coords: Vec<i32> = site
            .split(';')
            .map(|c| c.trim().parse::<i32>())
            .collect::<std::result::Result<_, _>>()
            .context("bad site coordinate")?;
        if coords.is_empty() || coords.len() > 3 {
            bail!("sites have 1 to 3 coordinates");
        }
        out.insert(Site::new(&coords), level.trim().parse().context("bad level")?);
    }
    Ok(out)
}

fn parse_list(text: &str) -> Result<Vec<u32>> {
    text.split(',').map(|s| s.trim().parse::<u32>().context("bad safedist entry")).collect()
}

fn band_data(cfg: &RunConfig, inst: &OperatorInstance) -> Result<(DenominatorData, f64)> {
    let f = cfg.frequency()?;
    let beta = match cfg.beta {
        Some(b) => b,
        None => bisect_beta(&f, &inst.hopping, cfg.c_safe, 100, 1e-3, 0.5, 30)
            .context("no beta in [1e-3, 0.5] passes the consistency check")?,
    };
    Ok((DenominatorData::bands(f, beta, cfg.c_safe), beta))
}

pub fn classes(cfg: &RunConfig, args: &ClassArgs, out: &Artifacts) -> Result<Outcome> {
    let inst = cfg.instance()?;
    let ctx = PathWeightContext::new(&inst);
    let manual = match (&args.levels, &args.safedist) {
        (Some(l), Some(s)) => Some(DenominatorData::manual(cfg.frequency()?, parse_levels(l)?, parse_list(s)?)),
        (None, None) => None,
        _ => bail!("--levels and --safedist go together"),
    };
    let mut o = Outcome::new();

    if let Some(text) = &args.path {
        let data = manual.context("--path needs --levels and --safedist")?;
        let p = PathString::parse(text)?;
        let marked = canonical_marking(&p, &data).to_string();
        let t = canonical_translation(&p, &data)?.to_string();
        let members: Vec<String> = equivalence_class(&p, &data)?
            .iter()
            .map(|m| m.without_marks().to_string())
            .collect();
        let rows: Vec<Vec<String>> = members.iter().map(|m| vec![m.clone()]).collect();
        out.csv("classes", &["member"], &rows)?;
        out.json(cfg, json!({"path": text, "marking": marked, "translation": t, "members": members}))?;
        o.line(format!("marking     {marked}"));
        o.line(format!("translation {t}"));
        o.line(format!("class of {} members", members.len()));
        return Ok(o);
    }

    if let Some(top) = args.family {
        // Repeated returns to one level-one denominator at site 5.
        let data = match manual {
            Some(d) => d,
            None => {
                let mut levels = BTreeMap::new();
                levels.insert(Site::d1(5), 1);
                DenominatorData::manual(cfg.frequency()?, levels, vec![0, 3])
            }
        };
        let v0 = High::from_real(inst.v0()?);
        let den = |n: i32| -> Result<High> { Ok(v0.clone() - High::from_real(inst.v(&Site::d1(n))?)) };
        let mut want: High = cont_with(&PathString::parse("(123454321)")?, &ctx)?;
        let factor = (High::one() / den(4)? - High::one() / den(-1)?) / den(5)?;
        let mut rows = vec![];
        let mut worst: f64 = 0.0;
        for k in 2..=top.max(2) {
            want = want * factor.clone();
            let q = PathString::parse(&format!("(12345{}4321)", "45".repeat(k - 1)))?;
            let members = equivalence_class(&q, &data)?.len();
            let direct = class_sum(&q, &ctx, &data, cfg.precision)?;
            let product: f64 = cont_class_with(&q, &ctx, &data, ClassRoute::Product)?;
            let w = want.to_f64();
            let rel = ((direct / w) - 1.0).abs().max((product / w - 1.0).abs());
            worst = worst.max(rel);
            rows.push(vec![k.to_string(), members.to_string(), num(direct), num(product), num(w), num(rel)]);
            o.require(members == 1 << (k - 1), "class of P_k has 2^(k-1) members");
        }
        out.csv("classes", &["k", "members", "direct", "product", "closed_form", "rel_error"], &rows)?;
        out.json(cfg, json!({"family_max_rel_error": worst}))?;
        o.line(format!("P_k family, k <= {top}: max rel error {worst:.3e}"));
        o.require(worst <= 1e-12, "class sums match the closed form to 1e-12");
        return Ok(o);
    }

    let (data, beta) = match manual {
        Some(d) => (d, f64::NAN),
        None => band_data(cfg, &inst)?,
    };
    let e = PathEnumerator::new(&inst.hopping, cfg.order as u32);
    let mut rows = vec![];
    let mut totals = vec![];
    let tol = tolerance(cfg.precision);
    let mut worst: f64 = 0.0;
    for s in 2..=cfg.order as u32 {
        let ps = e.eigenvalue(s)?;
        let groups = group_by_class(&ps, &data)?;
        let ungrouped = sum_paths(&ps, &ctx, cfg.precision)?;
        let mut grouped = 0.0;
        for (key, members) in &groups {
            let c = class_sum(&members[0], &ctx, &data, cfg.precision)?;
            grouped += c;
            rows.push(vec![s.to_string(), key.clone(), members.len().to_string(), num(c)]);
        }
        let diff = grouped - ungrouped;
        let rel = diff.abs() / ungrouped.abs().max(1e-300);
        worst = worst.max(if diff == 0.0 { 0.0 } else { rel });
        totals.push(json!({"s": s, "classes": groups.len(), "grouped": grouped, "ungrouped": ungrouped, "difference": diff}));
        o.line(format!(
            "s={s:<2} classes {:>5}  grouped {grouped:+.6e}  ungrouped {ungrouped:+.6e}  diff {diff:+.1e}",
            groups.len()
        ));
    }
    out.csv("classes", &["s", "class", "members", "class_sum"], &rows)?;
    out.json(cfg, json!({"beta": beta, "orders": totals, "max_rel_difference": worst}))?;
    o.require(worst <= tol, "grouped and ungrouped sums agree");
    Ok(o)
}

pub fn denominators(cfg: &RunConfig, out: &Artifacts) -> Result<Outcome> {
    let inst = cfg.instance()?;
    let (data, beta) = band_data(cfg, &inst)?;
    let rep = verify_consistency(&data, &inst.hopping, cfg.radius);
    let control = verify_consistency(
        &DenominatorData::bands(cfg.frequency()?, 0.5, cfg.c_safe),
        &inst.hopping,
        cfg.radius,
    );
    let rows: Vec<Vec<String>> = Site::ball(inst.dim(), cfg.radius)
        .into_iter()
        .filter(|n| !n.is_zero() && data.level_of(n) >= 1)
        .map(|n| {
            vec![
                n.to_string(),
                num(data.frequency.norm(&n)),
                data.level_of(&n).to_string(),
                data.safedist_at(&n).to_string(),
            ]
        })
        .collect();
    out.csv("denominators", &["site", "norm", "level", "safedist"], &rows)?;
    out.json(cfg, json!({"beta": beta, "report": rep, "control_beta": 0.5, "control": control}))?;
    let mut o = Outcome::new();
    o.line(format!(
        "beta {beta:.6}: {} small denominators, max level {}, c1 violations {}, c2 violations {}",
        rep.small_denominators, rep.max_level, rep.c1_violations, rep.c2_violations
    ));
    o.line(format!(
        "control beta 0.5: c1 violations {}, c2 violations {}",
        control.c1_violations, control.c2_violations
    ));
    o.require(rep.pass, "consistency axioms hold");
    Ok(o)
}

pub fn spectrum(cfg: &RunConfig, out: &Artifacts) -> Result<Outcome> {
    let inst = cfg.instance()?;
    let eps = cfg.epsilon;
    let mut o = Outcome::new();

    let h = halving_check(&inst, cfg.radius, eps, cfg.s_used, cfg.order)?;
    let c_fit = 2.0 * h.coarse.tail_coefficient;
    let bound = c_fit * eps.powi(cfg.s_used as i32 + 1);
    let s = cfg.s_used as i32;
    let (lo, hi) = (2f64.powi(s) / 2.0, 2f64.powi(s + 2) * 2.0);
    o.line(format!(
        "eigenvalue: |delta| {:.3e} (bound {bound:.3e}), halving ratio {:.2}, overlap {:.6}",
        h.coarse.delta, h.ratio, h.coarse.overlap
    ));
    o.require(h.coarse.delta <= bound, "|partial sum - eigenvalue| <= C eps^(S+1)");
    o.require((lo..=hi).contains(&h.ratio), "halving ratio within range");
    o.require(h.coarse.overlap >= 0.999, "eigenvector overlap >= 0.999");

    let r = compute_series_longrange(&inst, cfg.s_used)?;
    let (_, psi) = evaluate_partial_sum(&r, eps, cfg.s_used);
    let origin = Site::zero(inst.dim());
    let fit = localization_profile(&psi, &origin, eps, &inst.hopping);
    let envelope = envelope_holds(&psi, &origin, eps, fit.envelope_c * (1.0 + 1e-9), 1e-9, &inst.hopping);
    let inner = 8;
    let coarse = completeness_check(&inst, eps, inner, cfg.s_used)?;
    let fine = completeness_check(&inst, eps / 2.0, inner, cfg.s_used)?;
    let dev = |c: &qpseries::spectra::CompletenessReport| c.gram_deviation.max(c.frame_deviation);
    let c_complete = dev(&coarse) / eps;
    o.line(format!(
        "localization: C {:.4}, rate {:.3}; completeness {:.3e} at eps, {:.3e} at eps/2",
        fit.envelope_c,
        fit.rate,
        dev(&coarse),
        dev(&fine)
    ));
    o.require(envelope, "localization envelope");
    o.require(dev(&fine) <= 1.5 * c_complete * eps / 2.0, "completeness deviation scales at most linearly");

    let grid: Vec<f64> = (0..cfg.grid)
        .map(|i| -0.45 + 0.9 * i as f64 / (cfg.grid - 1) as f64)
        .collect();
    let curve = lambda_of_x(&inst, cfg.s_used, eps, &grid);
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| vec![num(p.x), p.lambda.map(num).unwrap_or_default(), p.error.clone().unwrap_or_default()])
        .collect();
    out.csv("spectrum", &["x", "lambda", "error"], &rows)?;
    let energies: Vec<f64> = (0..21).map(|i| -4.0 + 0.4 * i as f64).collect();
    let ids = ids_check(&inst, cfg.radius, &energies, cfg.s_used)?;
    let ids_tol = 2.0 / cfg.radius as f64;
    o.line(format!(
        "lambda(x): min increment {:.4e} on {} points; IDS max error {:.4} (tolerance {ids_tol:.4})",
        curve.min_increment, cfg.grid, ids.max_error
    ));
    o.require(curve.strictly_increasing, "lambda(x) strictly increasing");
    o.require(ids.max_error <= ids_tol, "IDS within 2/N");

    #[derive(Serialize)]
    struct Report<'a> {
        halving: &'a qpseries::spectra::HalvingReport,
        fitted_c: f64,
        localization: &'a qpseries::spectra::LocalizationFit,
        completeness: [&'a qpseries::spectra::CompletenessReport; 2],
        min_increment: f64,
        ids: &'a qpseries::spectra::IdsReport,
    }
    out.json(
        cfg,
        Report {
            halving: &h,
            fitted_c: c_fit,
            localization: &fit,
            completeness: [&coarse, &fine],
            min_increment: curve.min_increment,
            ids: &ids,
        },
    )?;
    Ok(o)
}

pub fn flatseg(cfg: &RunConfig, out: &Artifacts) -> Result<Outcome> {
    let base = cfg.instance()?;
    let window = FlatWindow::from_potential(&base.potential).context("flatseg needs a flat_segment potential")?;
    if cfg.epsilons.len() != 2 {
        bail!("flatseg compares exactly two epsilon values");
    }
    let mut o = Outcome::new();
    let scans = cfg
        .epsilons
        .iter()
        .map(|&e| slope_scan(&base.with_epsilon(e), cfg.grid))
        .collect::<qpseries::Result<Vec<_>>>()?;
    let ratio = scans[0].min_quotient / scans[1].min_quotient;
    let expected = (cfg.epsilons[0] / cfg.epsilons[1]).powi(2);
    let mut rows = vec![];
    for &e in &cfg.epsilons {
        let inst = base.with_epsilon(e);
        for i in 0..cfg.grid {
            let x = window.a - window.h + 2.0 * window.h * i as f64 / (cfg.grid - 1) as f64;
            rows.push(vec![num(e), num(x), num(f1_value(&inst, x)?)]);
        }
    }
    out.csv("flatseg", &["epsilon", "x", "f1"], &rows)?;
    let rep = flatseg_report(&base, cfg.radius, Some(cfg.radius / 4))?;

    // Singular-vertex accounting on random paths compatible with the reduced kernel.
    let omega = base.omega().to_vec();
    let x0 = base.phase;
    let flat = move |s: &Site| window.contains(reduce_half(x0 + s.dot(&omega)));
    let singular = |s: &Site| !s.is_zero() && flat(s);
    let targets: Vec<Site> = Site::ball(base.dim(), 60).into_iter().filter(|s| singular(s)).collect();
    let sing4 = if targets.is_empty() {
        None
    } else {
        let gen = RandomPaths {
            dim: base.dim(),
            flat: &flat,
            targets,
            min_flat_order: 3,
            max_depth: 2,
        };
        let paths = gen.sample(cfg.samples, cfg.seed);
        let compatible = paths.iter().all(|p| h2_compatible(p, &flat, 3));
        let (data, _) = band_data(cfg, &base)?;
        let stacks = stacks_of(&paths, &data);
        let by_stack = sing4_accounting(&stacks, &data, &singular, 2.0, 1.0, 19.0 / 21.0);
        let whole = sing4_accounting(&paths, &data, &singular, 2.0, 1.0, 19.0 / 21.0);
        o.require(compatible, "sampled paths use only reduced-kernel jumps");
        o.require(by_stack.pass && whole.pass, "singular-vertex accounting");
        o.line(format!(
            "singular accounting: max exponent ratio {:.3} over stacks, {:.3} over paths",
            by_stack.max_exponent_ratio, whole.max_exponent_ratio
        ));
        Some(json!({"stacks": by_stack, "paths": whole}))
    };

    o.line(format!(
        "flat sites {}: phi1 rows zero {}, phi2 rows zero {}",
        rep.flat_sites.len(),
        rep.phi1_flat_rows_zero,
        rep.phi2_flat_rows_zero
    ));
    o.line(format!(
        "min slope {:.4e} at eps {}, {:.4e} at eps {}: ratio {ratio:.3} (expected {expected:.1})",
        scans[0].min_quotient, cfg.epsilons[0], scans[1].min_quotient, cfg.epsilons[1]
    ));
    o.line(format!("spectral shift H2 vs H: {:.3e}", rep.spectral_shift_h2));
    o.require(rep.phi1_flat_rows_zero && rep.phi2_flat_rows_zero, "flat rows vanish");
    o.require(
        (0.75 * expected..=1.25 * expected).contains(&ratio),
        "slope ratio within 25% of (eps1/eps2)^2",
    );
    o.require(rep.spectral_shift_h2 <= 1e-10, "conjugation preserves the spectrum");
    out.json(cfg, json!({"slope_scans": scans, "slope_ratio": ratio, "report": rep, "sing4": sing4}))?;
    Ok(o)
}

pub fn report(cfg: &RunConfig, out: &Artifacts) -> Result<Outcome> {
    let mut o = Outcome::new();
    let mut rows = vec![];
    let mut summary = vec![];
    for &phase in &cfg.phases {
        let inst = cfg.instance_at(phase)?;
        let (data, beta) = band_data(cfg, &inst)?;
        let reg = probe_regularity(&inst.potential, phase, 10_000)?;
        let population = stack_population(&inst, &data, 2..=cfg.order as u32)?;
        let (cal, hold) = sample_stacks(&population, &data, cfg.samples, cfg.seed);
        if hold.len() < cfg.samples {
            bail!(
                "{} stacks up to length {} cannot supply two samples of {}",
                population.len(),
                cfg.order,
                cfg.samples
            );
        }
        let ctx = PathWeightContext::new(&inst);
        let unit = StackBoundParams {
            c_reg: reg.c_reg,
            d_min: reg.d_min,
            phi_sup: 1.0,
            c_dist: 1.0,
        };
        let mut c_dist: f64 = 0.0;
        for (p, t) in &cal {
            c_dist = c_dist.max(check_stack_bound(p, &ctx, &data, unit, *t)?.implied_c_dist);
        }
        let fitted = StackBoundParams { c_dist, ..unit };
        let (mut worst, mut lip, mut failures) = (0.0f64, 0.0f64, 0usize);
        for (p, t) in &hold {
            let r = check_stack_bound(p, &ctx, &data, fitted, *t)?;
            worst = worst.max(r.ratio);
            lip = lip.max(r.lipschitz_ratio);
            failures += usize::from(!r.pass);
            rows.push(vec![
                num(phase),
                r.path.clone(),
                num(r.t),
                num(r.cont_abs),
                num(r.rhs),
                num(r.ratio),
                num(r.lipschitz_ratio),
                r.pass.to_string(),
            ]);
        }
        o.line(format!(
            "x0 {phase}: beta {beta:.4}, {} stacks, C_dist {c_dist:.4}, worst ratio {worst:.3}, Lipschitz {lip:.3}, {failures} failures",
            population.len()
        ));
        o.require(failures == 0, "stack bound on holdout stacks");
        summary.push(json!({
            "phase": phase, "beta": beta, "c_reg": reg.c_reg, "d_min": reg.d_min,
            "population": population.len(), "c_dist": c_dist, "worst_ratio": worst,
            "worst_lipschitz_ratio": lip, "failures": failures,
        }));
    }
    out.csv(
        "report",
        &["phase", "stack", "t", "cont_abs", "rhs", "ratio", "lipschitz_ratio", "pass"],
        &rows,
    )?;
    out.json(cfg, json!({"configs": summary}))?;
    Ok(o)
}
