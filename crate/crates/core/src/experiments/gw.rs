//! The gravitational-wave pipeline: training set, two greedy stages,
//! interpolation, ROQ rules and Monte Carlo validation.

use std::fmt::Write as _;

use super::fit::fit_decay_tail;
use super::montecarlo::{
    draw_parameters, reference_pairs, rule_error_scan, scan_rule, seeded_rng, smallest_size_meeting, validate_on_pairs,
    NestedRoq, ScanKind, ScanRow, ValidationOptions, ValidationReport,
};
use super::{parent_rule, ExperimentKind, RuleChoice, Run};
use crate::eim::{build_deim, interpolation_error_report, EimOperator, InterpolationErrorRow, LebesgueConstants};
use crate::error::Result;
use crate::families::{n_cycles, sample_family, scalar_parameters, FunctionFamily, SampledFunctionSet, SpaFamily};
use crate::greedy::{
    direct_product_greedy_with, rb_greedy_with, two_step_greedy_with, GreedyOptions, ProductMode, ReducedBasis,
};
use crate::linalg::{ComplexMatrix, C64};
use crate::quadrature::{trapezoidal_rule, QuadratureRule};
use crate::roq::{basis_integrals, build_roq, roq_new_grid, truncate_roq, verify_basis_integration, RoqRule};

/// Equidistant grid the product basis is resampled on.
pub const RESAMPLED_TRAPEZOID_NODES: usize = 20_000;

const INTEGRATION_TOL: f64 = 1e-12;
const FIRST_STAGE_BAND: (usize, usize) = (173, 183);
const PRODUCT_BAND: (usize, usize) = (329, 349);
const VALIDATION_TARGET: f64 = 1e-5;
const REFERENCE_CHANGE_LIMIT: f64 = 1e-8;
/// Pairs used for the trapezoid/Gauss–Legendre node-count scans.
const SCAN_PAIRS: usize = 2000;
/// Greedy errors (squared) above this belong to the slow initial phase.
const GREEDY_FIT_START: f64 = 1e-3;
/// ROQ errors above this belong to the pre-asymptotic phase.
const ROQ_FIT_START: f64 = 1e-1;

struct Pipeline {
    family: SpaFamily,
    rule: QuadratureRule,
    training: SampledFunctionSet,
    first: ReducedBasis,
}

fn is_standard(run: &Run) -> bool {
    let c = &run.config;
    c.k == 3000 && c.m == 1701 && c.rule_kind == RuleChoice::GaussLegendre && c.tolerance == 1e-6
}

fn first_stage(run: &mut Run) -> Result<Pipeline> {
    let c = run.config.clone();
    let family = SpaFamily::with_constants(c.constants);
    let rule = parent_rule(c.rule_kind, family.f_min, family.f_max, c.m)?;
    let mcs = family.training_chirp_masses(c.k)?;
    let training = sample_family(
        &FunctionFamily::Spa(family.clone()),
        &scalar_parameters(&mcs),
        &rule,
        true,
    )?;
    let first = rb_greedy_with(&training, GreedyOptions::new(c.tolerance).seed(c.seed_index))?;
    run.rule("parent_rule.csv", &rule)?;
    std::fs::write(run.dir.join("training.json"), training.metadata_json()?)?;
    run.wrote(&["training.json".into()]);
    run.write_basis(&first, "waveform_basis")?;

    let m_sun = family.constants.m_sun;
    run.metric("first_stage_size", first.len() as f64);
    run.metric("first_stage_error", first.final_error());
    run.metric("first_stage_orthonormality_defect", first.orthonormality_defect()?);
    run.metric(
        "cycles_lightest",
        n_cycles(family.mc_min, family.f_min, family.f_max, &family.constants)?,
    );
    run.metric(
        "cycles_heaviest",
        n_cycles(family.mc_max, family.f_min, family.f_max, &family.constants)?,
    );
    run.metric("chirp_mass_low_solar", family.mc_min / m_sun);
    if is_standard(run) {
        let n = first.len();
        run.check(
            "first_stage_size",
            n as f64,
            format!("in [{}, {}]", FIRST_STAGE_BAND.0, FIRST_STAGE_BAND.1),
            (FIRST_STAGE_BAND.0..=FIRST_STAGE_BAND.1).contains(&n),
        );
    }
    Ok(Pipeline {
        family,
        rule,
        training,
        first,
    })
}

fn squared(errors: &[f64]) -> Vec<f64> {
    errors.iter().map(|e| e * e).collect()
}

fn products(run: &mut Run, p: &Pipeline) -> Result<ReducedBasis> {
    let c = run.config.clone();
    let two = two_step_greedy_with(&p.first, GreedyOptions::new(c.tolerance), ProductMode::GreedyWaveforms)?;
    run.write_basis(&two, "product_basis")?;
    run.metric("product_size", two.len() as f64);
    run.metric("product_error", two.final_error());
    run.metric("product_orthonormality_defect", two.orthonormality_defect()?);
    if is_standard(run) {
        let m = two.len();
        run.check(
            "product_size",
            m as f64,
            format!("in [{}, {}]", PRODUCT_BAND.0, PRODUCT_BAND.1),
            (PRODUCT_BAND.0..=PRODUCT_BAND.1).contains(&m),
        );
    }
    if c.allow_direct_greedy {
        let k = p.training.len();
        let seed = c.seed_index * k + c.seed_index;
        let direct = direct_product_greedy_with(&p.training, GreedyOptions::new(c.tolerance).seed(seed), true)?;
        run.write_basis(&direct, "direct_product_basis")?;
        let gap = direct.len().abs_diff(two.len());
        run.metric("direct_size", direct.len() as f64);
        run.check("direct_vs_two_step_size", gap as f64, "<= 10", gap <= 10);
        for (name, basis) in [("two_step", &two), ("direct", &direct)] {
            let tail = fit_decay_tail(&squared(&basis.greedy_errors), GREEDY_FIT_START)?;
            let fit = tail.fit;
            run.metric(&format!("{name}_fit_onset"), tail.onset as f64);
            run.metric(&format!("{name}_fit_c"), fit.c);
            run.metric(&format!("{name}_fit_c0"), fit.c0);
            run.metric(&format!("{name}_fit_alpha"), fit.alpha);
            run.metric(&format!("{name}_fit_rms"), fit.rms_residual);
            run.check(
                &format!("{name}_fit_alpha"),
                fit.alpha,
                "in [0.7, 1.1]",
                (0.7..=1.1).contains(&fit.alpha) && !fit.poor_fit,
            );
        }
    }
    Ok(two)
}

fn report_csv(rows: &[InterpolationErrorRow], params: &[Vec<f64>]) -> String {
    let mut body = String::new();
    for (r, p) in rows.iter().zip(params) {
        let ps: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(
            body,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.index,
            ps.join(" "),
            r.projection_error,
            r.interpolation_error,
            r.lebesgue_bound,
            r.product_bound
        )
        .expect("String write");
    }
    body
}

fn lebesgue_metrics(run: &mut Run, prefix: &str, lc: &LebesgueConstants) {
    run.metric(&format!("{prefix}_lambda_2"), lc.lambda_2);
    run.metric(&format!("{prefix}_lambda_2_bound"), lc.lambda_2_bound);
    run.metric(&format!("{prefix}_lambda_inf"), lc.lambda_inf);
}

fn interpolation(run: &mut Run, p: &Pipeline, two: &ReducedBasis) -> Result<EimOperator> {
    let c = run.config.clone();
    let family = FunctionFamily::Spa(p.family.clone());
    let domain = family.parameter_domain();
    let factors = p.family.node_factors(p.rule.nodes())?;
    let w = p.rule.weights();
    let normalize = |h: Vec<C64>| -> Vec<C64> {
        let n = h.iter().zip(w).map(|(z, wk)| z.norm_sqr() * wk).sum::<f64>().sqrt();
        h.into_iter().map(|z| z / n).collect()
    };

    let eim_first = build_deim(&p.first.basis, &p.rule)?;
    let eim_prod = build_deim(&two.basis, &p.rule)?;
    run.write_eim(&eim_first, "waveform_eim")?;
    run.write_eim(&eim_prod, "product_eim")?;

    let mut rng = seeded_rng(c.rng_seed);
    let singles = draw_parameters(&family, &domain, c.bound_draws, &mut rng)?;
    let cols: Vec<Vec<C64>> = singles
        .iter()
        .map(|q| normalize(factors.weighted_waveform(q[0])))
        .collect();
    let (lc1, rows1) =
        interpolation_error_report(&eim_first, &p.first, &ComplexMatrix::from_columns(p.rule.len(), &cols)?)?;

    let pair_params = draw_parameters(&family, &domain, 2 * c.bound_draws, &mut rng)?;
    let pairs: Vec<Vec<f64>> = pair_params.chunks(2).map(|q| vec![q[0][0], q[1][0]]).collect();
    let cols: Vec<Vec<C64>> = pairs
        .iter()
        .map(|q| {
            let a = factors.weighted_waveform(q[0]);
            let b = factors.weighted_waveform(q[1]);
            normalize(a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect())
        })
        .collect();
    let (lc2, rows2) = interpolation_error_report(&eim_prod, two, &ComplexMatrix::from_columns(p.rule.len(), &cols)?)?;

    let header = "index,parameters,projection_error,interpolation_error,lebesgue_bound,product_bound";
    run.csv(
        "waveform_interpolation_errors.csv",
        header,
        &report_csv(&rows1, &singles),
    )?;
    run.csv("product_interpolation_errors.csv", header, &report_csv(&rows2, &pairs))?;
    lebesgue_metrics(run, "waveform", &lc1);
    lebesgue_metrics(run, "product", &lc2);
    for (name, rows) in [("waveform", &rows1), ("product", &rows2)] {
        let bad = rows.iter().filter(|r| !r.ordered(0.0)).count();
        let worst = rows.iter().map(|r| r.interpolation_error).fold(0.0, f64::max);
        run.metric(&format!("{name}_max_interpolation_error"), worst);
        run.metric(&format!("{name}_bound_samples"), rows.len() as f64);
        run.check(
            &format!("{name}_bound_ordering"),
            bad as f64,
            "no sample with interpolation error > Lebesgue bound > product bound",
            bad == 0 && rows.len() >= c.bound_draws,
        );
    }
    Ok(eim_prod)
}

/// ROQ rebuilt on the equidistant grid.
type Resampled = (ReducedBasis, EimOperator, RoqRule);

fn resample_products(p: &Pipeline, two: &ReducedBasis, rule: &QuadratureRule) -> Result<SampledFunctionSet> {
    let factors = p.family.node_factors(rule.nodes())?;
    let cols: Vec<Vec<C64>> = two
        .greedy_parameters
        .iter()
        .map(|q| {
            let a = factors.weighted_waveform(q[0]);
            let b = factors.weighted_waveform(q[1]);
            a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect()
        })
        .collect();
    let mut set = SampledFunctionSet::from_columns(
        "spa_products",
        ComplexMatrix::from_columns(rule.len(), &cols)?,
        two.greedy_parameters.clone(),
        rule.clone(),
        true,
    )?;
    set.constants = Some(p.family.constants);
    Ok(set)
}

fn rules(run: &mut Run, p: &Pipeline, two: &ReducedBasis, eim: &EimOperator) -> Result<Option<Resampled>> {
    let c = run.config.clone();
    let roq = build_roq(two, eim)?;
    run.write_roq(&roq, "roq")?;
    let dev = verify_basis_integration(&roq, two)?;
    run.check("basis_integration", dev, "<= 1e-12", dev <= INTEGRATION_TOL);
    run.metric("roq_condition_number", roq.condition_number());
    run.metric("roq_size", roq.len() as f64);
    if let Some(mp) = c.m_prime {
        let t = truncate_roq(two, eim, mp.min(roq.len()))?;
        run.write_roq(&t, &format!("roq_m{}", t.len()))?;
        let dev = verify_basis_integration(&t, &two.truncated(t.len()))?;
        run.check("truncated_basis_integration", dev, "<= 1e-12", dev <= INTEGRATION_TOL);
    }
    let resampled = if c.rule_kind == RuleChoice::GaussLegendre {
        let trap = trapezoidal_rule(p.family.f_min, p.family.f_max, RESAMPLED_TRAPEZOID_NODES)?;
        let set = resample_products(p, two, &trap)?;
        let (basis, op, r) = roq_new_grid(&set, &trap)?;
        run.write_roq(&r, "roq_trapezoid")?;
        let dev = verify_basis_integration(&r, &basis)?;
        run.check("trapezoid_basis_integration", dev, "<= 1e-12", dev <= INTEGRATION_TOL);
        run.metric("trapezoid_roq_condition_number", r.condition_number());
        Some((basis, op, r))
    } else {
        None
    };
    Ok(resampled)
}

fn write_validation(run: &mut Run, stem: &str, report: &ValidationReport) -> Result<()> {
    let csv = report.to_csv(&run.hash);
    std::fs::write(run.dir.join(format!("{stem}.csv")), csv)?;
    run.wrote(&[format!("{stem}.csv")]);
    #[derive(serde::Serialize)]
    struct Summary<'a> {
        label: &'a str,
        draws: usize,
        rng_seed: u64,
        reference_nodes: usize,
        reference_self_change: f64,
        parent_weight_sum: f64,
        wall_clock_seconds: f64,
    }
    run.json(
        &format!("{stem}.json"),
        &Summary {
            label: &report.label,
            draws: report.draws,
            rng_seed: report.rng_seed,
            reference_nodes: report.reference_nodes,
            reference_self_change: report.reference_self_change,
            parent_weight_sum: report.parent_weight_sum,
            wall_clock_seconds: report.wall_clock_seconds,
        },
    )
}

fn validate(
    run: &mut Run,
    p: &Pipeline,
    two: &ReducedBasis,
    eim: &EimOperator,
    resampled: Option<&Resampled>,
) -> Result<()> {
    let c = run.config.clone();
    let family = FunctionFamily::Spa(p.family.clone());
    let options = ValidationOptions::default();
    let (pairs, self_change) = reference_pairs(&family, &p.rule, c.mc_draws, c.rng_seed, &options)?;
    let gl = validate_on_pairs(
        &NestedRoq {
            label: "roq_parent".into(),
            basis: two,
            eim,
            integrals: basis_integrals(two),
        },
        &family,
        &pairs,
        self_change,
        c.rng_seed,
        &options,
    )?;
    write_validation(run, "validation_roq", &gl)?;
    let full = gl.rows.last().expect("nonempty rule");
    run.metric("validation_max_roq_error", full.max_roq_error);
    run.metric("validation_max_parent_error", full.max_parent_error);
    run.metric("reference_self_change", gl.reference_self_change);
    run.check(
        "reference_self_change",
        gl.reference_self_change,
        "< 1e-8",
        gl.reference_self_change < REFERENCE_CHANGE_LIMIT,
    );
    let standard = is_standard(run);
    if standard {
        run.check(
            "roq_max_error",
            full.max_roq_error,
            "<= 1e-5",
            full.max_roq_error <= VALIDATION_TARGET,
        );
    } else {
        run.warn("accuracy, decay-fit and savings targets apply to the standard configuration only");
    }
    let violations = gl.total_monitor_violations();
    run.check(
        "error_monitor",
        violations as f64,
        "no pair above its monitor bound",
        violations == 0,
    );

    let curve = gl.roq_error_curve();
    match fit_decay_tail(&curve, ROQ_FIT_START) {
        Ok(tail) => {
            let fit = tail.fit;
            run.metric("roq_fit_c", fit.c);
            run.metric("roq_fit_c0", fit.c0);
            run.metric("roq_fit_alpha", fit.alpha);
            run.metric("roq_fit_rms", fit.rms_residual);
            run.metric("roq_fit_onset", tail.onset as f64);
            if standard {
                run.check(
                    "roq_fit_alpha",
                    fit.alpha,
                    "in [0.6, 1.2]",
                    (0.6..=1.2).contains(&fit.alpha) && !fit.poor_fit,
                );
            }
        }
        Err(e) if standard => return Err(e),
        Err(e) => run.warn(format!("no decay fit: {e}")),
    }

    let Some((tb, te, _)) = resampled else {
        run.warn("trapezoid comparison needs a Gauss-Legendre parent");
        return Ok(());
    };
    // same pairs and reference values as the parent-grid rule
    let trap = validate_on_pairs(
        &NestedRoq {
            label: "roq_trapezoid".into(),
            basis: tb,
            eim: te,
            integrals: basis_integrals(tb),
        },
        &family,
        &pairs,
        self_change,
        c.rng_seed,
        &options,
    )?;
    write_validation(run, "validation_roq_trapezoid", &trap)?;
    run.metric(
        "trapezoid_validation_max_roq_error",
        trap.rows.last().expect("nonempty").max_roq_error,
    );

    // the two ROQ curves should stay within a decade of each other past m = 150,
    // until one of them reaches ten times the trapezoid parent's own error
    let floor = 10.0 * trap.rows.last().expect("nonempty").max_parent_error;
    let worst_ratio = gl
        .rows
        .iter()
        .zip(&trap.rows)
        .filter(|(a, b)| a.m > 150 && a.max_roq_error.min(b.max_roq_error) > floor)
        .map(|(a, b)| (a.max_roq_error / b.max_roq_error).log10().abs())
        .fold(0.0, f64::max);
    run.soft_check(
        "roq_curves_agree",
        worst_ratio,
        "|log10 ratio| <= 1 for m > 150",
        worst_ratio <= 1.0,
    );

    // node counts of the plain rules at the same accuracy
    let all_pairs = pairs;
    let pairs = all_pairs.subset(SCAN_PAIRS);
    let domain = (p.family.f_min, p.family.f_max);
    let mut trap_scan = Vec::new();
    let mut n = 100usize;
    // stop two decades past the target
    while n <= 80_000 {
        let max_error = pairs.max_error_on(&family, &scan_rule(ScanKind::Trapezoid, domain, n)?)?;
        trap_scan.push(ScanRow { nodes: n, max_error });
        if max_error <= 1e-2 * VALIDATION_TARGET {
            break;
        }
        n = (n as f64 * 1.25).round() as usize;
    }
    let gl_sizes: Vec<usize> = (1..=34).map(|k| 50 * k).collect();
    let gl_scan = rule_error_scan(&pairs, &family, ScanKind::GaussLegendre, domain, &gl_sizes)?;
    let mut body = String::new();
    for (kind, scan) in [("trapezoid", &trap_scan), ("gauss_legendre", &gl_scan)] {
        for row in scan.iter() {
            writeln!(body, "{kind},{},{:.16e}", row.nodes, row.max_error).expect("String write");
        }
    }
    run.csv("rule_scans.csv", "rule,nodes,max_error", &body)?;

    let m_trap = trap.nodes_for(VALIDATION_TARGET);
    let m_gl = gl.nodes_for(VALIDATION_TARGET);
    run.metric("roq_nodes_at_1e-5", m_gl.map_or(f64::NAN, |m| m as f64));
    run.metric("trapezoid_roq_nodes_at_1e-5", m_trap.map_or(f64::NAN, |m| m as f64));
    // the subset scan brackets the count; the count itself uses every validated pair
    let full_error = |n: usize| all_pairs.max_error_on(&family, &scan_rule(ScanKind::Trapezoid, domain, n)?);
    let n_trap = match trap_scan.iter().position(|r| r.max_error <= VALIDATION_TARGET) {
        None => None,
        Some(i) => {
            let mut lo = if i == 0 { 2 } else { trap_scan[i - 1].nodes };
            let mut hi = trap_scan[i].nodes;
            let mut found = true;
            while full_error(hi)? > VALIDATION_TARGET {
                lo = hi;
                hi = (hi as f64 * 1.1).ceil() as usize;
                if hi > 200_000 {
                    found = false;
                    break;
                }
            }
            if found {
                Some(smallest_size_meeting(VALIDATION_TARGET, lo, hi, full_error)?)
            } else {
                None
            }
        }
    };
    run.metric("trapezoid_nodes_at_1e-5", n_trap.map_or(f64::NAN, |n| n as f64));
    let savings = match (n_trap, m_trap) {
        (Some(n), Some(m)) => n as f64 / m as f64,
        _ => f64::NAN,
    };
    run.metric("trapezoid_savings", savings);
    if standard {
        run.check("trapezoid_savings", savings, ">= 25", savings >= 25.0);
    }
    Ok(())
}

pub(super) fn run(run: &mut Run, kind: ExperimentKind) -> Result<()> {
    let p = first_stage(run)?;
    if kind == ExperimentKind::GwBasis {
        return Ok(());
    }
    let two = products(run, &p)?;
    if kind == ExperimentKind::GwProducts {
        return Ok(());
    }
    let eim = interpolation(run, &p, &two)?;
    if kind == ExperimentKind::GwDeim {
        return Ok(());
    }
    let resampled = rules(run, &p, &two, &eim)?;
    if kind == ExperimentKind::GwRoq {
        return Ok(());
    }
    validate(run, &p, &two, &eim, resampled.as_ref())
}
