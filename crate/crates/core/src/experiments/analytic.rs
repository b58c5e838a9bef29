//! Drivers for the polynomial, Runge and inverse-distance experiments.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt::Write as _;

use rayon::prelude::*;

use super::{parent_rule, Run};
use crate::eim::build_deim;
use crate::error::Result;
use crate::families::{sample_family, scalar_parameters, FunctionFamily, INV_DIST_SOFTENING};
use crate::greedy::{rb_greedy_with, GreedyOptions, ReducedBasis};
use crate::linalg::{gram_schmidt_append, weighted_dot, ComplexMatrix, C64, DEFAULT_GS_PASSES};
use crate::quadrature::{condition_number, gauss_legendre_rule, tensor_product_rule, QuadratureRule};
use crate::roq::{
    basis_integrals, build_roq, build_roq_with, nested_roq_weights, override_basis_integrals, verify_basis_integration,
};

/// Node and weight read off the equidistant 24-polynomial rule.
const DATUM_NODE: f64 = 0.775775775775776;
const DATUM_WEIGHT: f64 = -0.00496089441576999;

const CONDITION_LIMIT: f64 = 2.25;
const INTEGRATION_TOL: f64 = 1e-12;
/// Basis sizes from which the trapezoid-parent Runge error is on its plateau.
const RUNGE_PLATEAU_FROM: usize = 30;
const RUNGE_CONVERGED_BY: usize = 60;
const MATCHED_ERROR: f64 = 1e-4;
/// Gauss–Legendre nodes for the outer integral of the 2D reference values.
const REFERENCE_NODES_2D: usize = 1200;

/// The first `m` normalized Legendre polynomials sampled on `rule` and
/// re-orthonormalized in the discrete inner product. Gram-Schmidt keeps every
/// leading span, so the points and weights are those of the raw polynomials.
pub fn legendre_basis(rule: &QuadratureRule, m: usize) -> Result<ReducedBasis> {
    let params: Vec<Vec<f64>> = (0..m).map(|l| vec![l as f64]).collect();
    let set = sample_family(&FunctionFamily::Legendre, &params, rule, false)?;
    let mut basis = ComplexMatrix::with_rows(rule.len());
    for col in set.samples.columns() {
        let step = gram_schmidt_append(&basis, col, rule, DEFAULT_GS_PASSES)?;
        basis.push_column(&step.residual)?;
    }
    Ok(ReducedBasis {
        basis,
        snapshots: set.samples,
        greedy_indices: (0..m).collect(),
        greedy_parameters: params,
        greedy_errors: Vec::new(),
        rule: rule.clone(),
        tolerance: f64::NAN,
        seed_index: 0,
        passes: DEFAULT_GS_PASSES,
        family: "legendre".into(),
        constants: None,
    })
}

/// Continuum integrals over `[-1, 1]` of the columns of [`legendre_basis`].
///
/// The raw polynomials integrate to `√2 δ_{0j}` and `P_j = Σ_{i≤j} ⟨e_i, P_j⟩_d e_i`,
/// so the integrals follow by forward substitution.
pub fn legendre_exact_integrals(basis: &ReducedBasis) -> Vec<C64> {
    let w = basis.rule.weights();
    let mut out: Vec<C64> = Vec::with_capacity(basis.len());
    for j in 0..basis.len() {
        let raw = basis.snapshots.column(j);
        let mut acc = C64::new(if j == 0 { SQRT_2 } else { 0.0 }, 0.0);
        for (i, li) in out.iter().enumerate() {
            acc -= weighted_dot(w, basis.basis.column(i), raw) * li;
        }
        out.push(acc / weighted_dot(w, basis.basis.column(j), raw));
    }
    out
}

pub(super) fn legendre_weights(run: &mut Run) -> Result<()> {
    let c = run.config.clone();
    let rule = parent_rule(c.rule_kind, -1.0, 1.0, c.m)?;
    let basis = legendre_basis(&rule, c.k)?;
    let eim = build_deim(&basis.basis, &rule)?;
    let roq = build_roq(&basis, &eim)?;
    run.rule("parent_rule.csv", &rule)?;
    run.write_basis(&basis, "legendre")?;
    run.write_eim(&eim, "eim")?;
    run.write_roq(&roq, "roq")?;

    let dev = verify_basis_integration(&roq, &basis)?;
    run.check("basis_integration", dev, "<= 1e-12", dev <= INTEGRATION_TOL);
    let negative = roq.weights.iter().filter(|w| w.re < 0.0).count();
    run.metric("negative_weights", negative as f64);
    run.metric("condition_number", roq.condition_number());

    let standard = c.rule_kind == super::RuleChoice::Trapezoid && c.m == 1000 && c.k == 24;
    if standard {
        let nearest = (0..rule.len())
            .min_by(|&a, &b| {
                (rule.nodes()[a] - DATUM_NODE)
                    .abs()
                    .total_cmp(&(rule.nodes()[b] - DATUM_NODE).abs())
            })
            .expect("nonempty rule");
        let node_gap = (rule.nodes()[nearest] - DATUM_NODE).abs();
        let slot = roq.point_indices.iter().position(|&p| p == nearest);
        run.metric("datum_node_index", nearest as f64);
        run.check(
            "weight_datum_node",
            node_gap,
            "selected, |node - 0.775775775775776| <= 1e-15",
            slot.is_some() && node_gap <= 1e-15,
        );
        let weight_gap = slot.map_or(f64::INFINITY, |s| (roq.weights[s] - C64::new(DATUM_WEIGHT, 0.0)).norm());
        run.check("weight_datum_weight", weight_gap, "<= 1e-11", weight_gap <= 1e-11);
    } else {
        run.warn("weight datum only applies to 24 polynomials on the 1000-node trapezoid rule");
    }
    Ok(())
}

pub(super) fn conditioning(run: &mut Run) -> Result<()> {
    let c = run.config.clone();
    let rule = parent_rule(c.rule_kind, -1.0, 1.0, c.m)?;
    let basis = legendre_basis(&rule, c.k)?;
    let eim = build_deim(&basis.basis, &rule)?;
    let nested = nested_roq_weights(&basis, &eim, &basis_integrals(&basis))?;
    let roq = build_roq(&basis, &eim)?;
    run.rule("parent_rule.csv", &rule)?;
    run.write_roq(&roq, "roq")?;

    let mut body = String::new();
    let mut worst_roq = 0.0f64;
    let mut worst_gl = 0.0f64;
    for (i, w) in nested.iter().enumerate() {
        let m = i + 1;
        let roq_cond = condition_number(w);
        let gl_cond = condition_number(gauss_legendre_rule(m)?.weights());
        worst_roq = worst_roq.max(roq_cond);
        worst_gl = worst_gl.max((gl_cond - 2.0).abs());
        writeln!(body, "{m},{roq_cond:.16e},{gl_cond:.16e}").expect("String write");
    }
    run.csv(
        "condition_numbers.csv",
        "m,roq_condition,gauss_legendre_condition",
        &body,
    )?;
    run.metric("max_roq_condition", worst_roq);
    run.check("roq_condition", worst_roq, "<= 2.25", worst_roq <= CONDITION_LIMIT);
    run.check(
        "gauss_legendre_condition",
        worst_gl,
        "|cond - 2| <= 1e-12",
        worst_gl <= 1e-12,
    );
    let dev = verify_basis_integration(&roq, &basis)?;
    run.check("basis_integration", dev, "<= 1e-12", dev <= INTEGRATION_TOL);
    Ok(())
}

pub(super) fn runge(run: &mut Run) -> Result<()> {
    let c = run.config.clone();
    let rule = parent_rule(c.rule_kind, -1.0, 1.0, c.m)?;
    let basis = legendre_basis(&rule, c.k)?;
    let eim = build_deim(&basis.basis, &rule)?;
    let parent_integrals = basis_integrals(&basis);
    let by_hand = override_basis_integrals(&basis, legendre_exact_integrals(&basis))?;
    let nested_parent = nested_roq_weights(&basis, &eim, &parent_integrals)?;
    let nested_hand = nested_roq_weights(&basis, &eim, &by_hand)?;
    let f: Vec<f64> = eim.nodes.iter().map(|x| 1.0 / (1.0 + x[0] * x[0])).collect();
    let integral = |w: &[C64]| -> f64 { (w.iter().zip(&f).map(|(a, b)| a * *b).sum::<C64>() - FRAC_PI_2).norm() };
    let err_parent: Vec<f64> = nested_parent.iter().map(|w| integral(w)).collect();
    let err_hand: Vec<f64> = nested_hand.iter().map(|w| integral(w)).collect();

    let mut body = String::new();
    for (i, (a, b)) in err_parent.iter().zip(&err_hand).enumerate() {
        writeln!(body, "{},{a:.16e},{b:.16e}", i + 1).expect("String write");
    }
    run.csv(
        "runge_errors.csv",
        "m,error_parent_integrals,error_exact_integrals",
        &body,
    )?;

    let roq = build_roq(&basis, &eim)?;
    let roq_hand = build_roq_with(&basis, &eim, &by_hand)?;
    run.rule("parent_rule.csv", &rule)?;
    run.write_roq(&roq, "roq")?;
    run.write_roq(&roq_hand, "roq_exact_integrals")?;
    let dev = verify_basis_integration(&roq, &basis)?.max(verify_basis_integration(&roq_hand, &basis)?);
    run.check("basis_integration", dev, "<= 1e-12", dev <= INTEGRATION_TOL);

    let best = |e: &[f64], upto: usize| e.iter().take(upto).copied().fold(f64::INFINITY, f64::min);
    run.metric("min_error_parent_integrals", best(&err_parent, c.k));
    let hand_best = best(&err_hand, c.k);
    run.check(
        "exact_integrals_converge",
        hand_best,
        "min over m <= 1e-12",
        hand_best <= 1e-12,
    );
    match c.rule_kind {
        super::RuleChoice::GaussLegendre => {
            let v = best(&err_parent, RUNGE_CONVERGED_BY);
            run.check(
                "gauss_legendre_parent_converges",
                v,
                "min over m <= 60 is <= 1e-12",
                v <= 1e-12,
            );
        }
        super::RuleChoice::Trapezoid => {
            if c.k > RUNGE_PLATEAU_FROM {
                let tail = &err_parent[RUNGE_PLATEAU_FROM - 1..];
                let hi = tail.iter().copied().fold(0.0, f64::max);
                let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
                run.metric("plateau_min", lo);
                run.metric("plateau_max", hi);
                run.check("trapezoid_plateau_upper", hi, "<= 1e-8 for m >= 30", hi <= 1e-8);
                run.check("trapezoid_plateau_lower", lo, ">= 1e-10 for m >= 30", lo >= 1e-10);
            } else {
                run.warn("plateau check needs more than 30 basis functions");
            }
        }
    }
    Ok(())
}

/// `∫_{-1}^{1} ((x−μ)² + a²)^{-1/2} dx`.
pub fn inv_dist_integral_1d(mu: f64) -> f64 {
    let a = INV_DIST_SOFTENING;
    ((1.0 - mu) / a).asinh() + ((1.0 + mu) / a).asinh()
}

/// `∫∫_{[-1,1]²} ((x−μ₁)² + (y−μ₂)² + a²)^{-1/2}`: the `x` integral in closed
/// form, the `y` integral by Gauss–Legendre on `outer`.
pub fn inv_dist_integral_2d(mu: [f64; 2], outer: &QuadratureRule) -> f64 {
    let a2 = INV_DIST_SOFTENING * INV_DIST_SOFTENING;
    outer
        .nodes()
        .iter()
        .zip(outer.weights())
        .map(|(y, w)| {
            let s = ((y - mu[1]).powi(2) + a2).sqrt();
            w * (((1.0 - mu[0]) / s).asinh() + ((1.0 + mu[0]) / s).asinh())
        })
        .sum()
}

fn inv_dist_gl_value(mu: &[f64], x: &[f64], w: &[f64]) -> f64 {
    let a2 = INV_DIST_SOFTENING * INV_DIST_SOFTENING;
    if mu.len() == 1 {
        x.iter()
            .zip(w)
            .map(|(xi, wi)| wi / ((xi - mu[0]).powi(2) + a2).sqrt())
            .sum()
    } else {
        let dy: Vec<f64> = x.iter().map(|y| (y - mu[1]).powi(2) + a2).collect();
        x.iter()
            .zip(w)
            .map(|(xi, wi)| {
                let dx = (xi - mu[0]).powi(2);
                wi * dy.iter().zip(w).map(|(d, wj)| wj / (dx + d).sqrt()).sum::<f64>()
            })
            .sum()
    }
}

pub(super) fn inverse_distance(run: &mut Run, dim: usize) -> Result<()> {
    let c = run.config.clone();
    let axis = parent_rule(c.rule_kind, -1.0, 1.0, c.m)?;
    let (family, rule) = if dim == 1 {
        (FunctionFamily::InvDist1d, axis.clone())
    } else {
        (FunctionFamily::InvDist2d, tensor_product_rule(&axis, &axis)?)
    };
    let grid: Vec<f64> = if c.k == 1 {
        vec![0.0]
    } else {
        (0..c.k).map(|i| -0.1 + 0.2 * i as f64 / (c.k - 1) as f64).collect()
    };
    let params: Vec<Vec<f64>> = if dim == 1 {
        scalar_parameters(&grid)
    } else {
        grid.iter()
            .flat_map(|&a| grid.iter().map(move |&b| vec![a, b]))
            .collect()
    };
    let outer = gauss_legendre_rule(REFERENCE_NODES_2D)?;
    let exact: Vec<f64> = params
        .par_iter()
        .map(|p| {
            if dim == 1 {
                inv_dist_integral_1d(p[0])
            } else {
                inv_dist_integral_2d([p[0], p[1]], &outer)
            }
        })
        .collect();

    let set = sample_family(&family, &params, &rule, true)?;
    let rb = rb_greedy_with(&set, GreedyOptions::new(c.tolerance).seed(c.seed_index))?;
    let eim = build_deim(&rb.basis, &rule)?;
    let nested = nested_roq_weights(&rb, &eim, &basis_integrals(&rb))?;
    let roq = build_roq(&rb, &eim)?;
    let dev = verify_basis_integration(&roq, &rb)?;
    run.check("basis_integration", dev, "<= 1e-12", dev <= INTEGRATION_TOL);
    run.metric("basis_size", rb.len() as f64);

    // values of every training function at the selected points, unnormalized
    let at_points = ComplexMatrix::from_columns(
        eim.len(),
        &(0..set.len())
            .map(|j| {
                eim.point_indices
                    .iter()
                    .map(|&p| set.samples.column(j)[p] * set.norms[j])
                    .collect::<Vec<C64>>()
            })
            .collect::<Vec<_>>(),
    )?;
    let roq_curve: Vec<f64> = nested
        .par_iter()
        .map(|w| {
            (0..set.len())
                .map(|j| {
                    let v: C64 = w.iter().zip(at_points.column(j)).map(|(a, b)| a * b).sum();
                    (v - exact[j]).norm()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let gl_curve: Vec<(usize, f64)> = (1..=c.m)
        .into_par_iter()
        .map(|n| {
            let g = gauss_legendre_rule(n)?;
            let worst = params
                .iter()
                .zip(&exact)
                .map(|(p, e)| (inv_dist_gl_value(p, g.nodes(), g.weights()) - e).abs())
                .fold(0.0, f64::max);
            Ok((n.pow(dim as u32), worst))
        })
        .collect::<Result<_>>()?;

    let mut body = String::new();
    for (i, e) in roq_curve.iter().enumerate() {
        writeln!(body, "{},{e:.16e}", i + 1).expect("String write");
    }
    run.csv("roq_errors.csv", "nodes,max_error", &body)?;
    let mut body = String::new();
    for (n, e) in &gl_curve {
        writeln!(body, "{n},{e:.16e}").expect("String write");
    }
    run.csv("gauss_legendre_errors.csv", "nodes,max_error", &body)?;
    let mut body = String::new();
    for (r, (idx, p)) in rb.greedy_indices.iter().zip(&rb.greedy_parameters).enumerate() {
        let ps: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(body, "{r},{idx},{},{:.16e}", ps.join(" "), rb.greedy_errors[r + 1]).expect("String write");
    }
    run.csv("greedy.csv", "rank,training_index,parameters,greedy_error", &body)?;
    run.rule("parent_rule.csv", &rule)?;
    run.write_roq(&roq, "roq")?;
    if dim == 1 {
        run.write_eim(&eim, "eim")?;
    }

    let n_roq = roq_curve.iter().position(|&e| e <= MATCHED_ERROR).map(|i| i + 1);
    let n_gl = gl_curve.iter().find(|(_, e)| *e <= MATCHED_ERROR).map(|(n, _)| *n);
    let ratio = match (n_gl, n_roq) {
        (Some(g), Some(r)) => g as f64 / r as f64,
        _ => f64::NAN,
    };
    run.metric("gauss_legendre_nodes_at_1e-4", n_gl.map_or(f64::NAN, |n| n as f64));
    run.metric("roq_nodes_at_1e-4", n_roq.map_or(f64::NAN, |n| n as f64));
    run.metric("node_ratio", ratio);
    let (needed, label) = if dim == 1 { (3.0, ">= 3") } else { (10.0, ">= 10") };
    run.check("node_savings", ratio, label, ratio >= needed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_quadrature_1d() {
        let g = gauss_legendre_rule(2000).unwrap();
        for mu in [-0.1, -0.03, 0.0, 0.07, 0.1] {
            let q = inv_dist_gl_value(&[mu], g.nodes(), g.weights());
            assert!((q - inv_dist_integral_1d(mu)).abs() < 1e-12, "{mu}");
        }
    }

    #[test]
    fn reference_2d_agrees_with_tensor_rule() {
        let g = gauss_legendre_rule(400).unwrap();
        let outer = gauss_legendre_rule(REFERENCE_NODES_2D).unwrap();
        for mu in [[0.0, 0.0], [-0.1, 0.05], [0.1, 0.1]] {
            let q = inv_dist_gl_value(&mu, g.nodes(), g.weights());
            let r = inv_dist_integral_2d(mu, &outer);
            assert!((q - r).abs() < 1e-11, "{mu:?}: {q} vs {r}");
        }
    }

    #[test]
    fn legendre_basis_is_orthonormal_on_gauss_rule() {
        let rule = gauss_legendre_rule(40).unwrap();
        let b = legendre_basis(&rule, 20).unwrap();
        assert!(b.orthonormality_defect().unwrap() < 1e-13);
    }

    #[test]
    fn exact_integrals_survive_orthonormalization() {
        // Gauss-Legendre integrates these degrees exactly, so both agree
        let rule = gauss_legendre_rule(40).unwrap();
        let b = legendre_basis(&rule, 20).unwrap();
        let parent = basis_integrals(&b).values;
        for (a, e) in parent.iter().zip(legendre_exact_integrals(&b)) {
            assert!((a - e).norm() < 1e-13);
        }
    }
}
