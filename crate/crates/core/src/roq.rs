//! Reduced order quadrature rules: weight assembly, evaluation, nested
//! truncation and regeneration on a new grid.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::eim::{build_deim, EimOperator};
use crate::error::{check_len, Result, RoqError};
use crate::families::SampledFunctionSet;
use crate::greedy::ReducedBasis;
use crate::hashing::{matrix_hash, rule_hash};
use crate::linalg::{gram_schmidt_append, solve_lower_transposed, ComplexMatrix, LuDecomposition, C64};
use crate::quadrature::{condition_number, QuadratureRule};

/// The integrals `ωᵀṼ` the ROQ weights must reproduce, computed or supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisIntegrals {
    pub values: Vec<C64>,
    pub overridden: bool,
}

/// `Σ_k ω_k ẽ_j(x_k)` for every basis column (no conjugation).
pub fn basis_integrals(basis: &ReducedBasis) -> BasisIntegrals {
    let w = basis.rule.weights();
    let values = basis
        .basis
        .columns()
        .map(|col| col.iter().zip(w).map(|(z, wk)| z * *wk).sum())
        .collect();
    BasisIntegrals {
        values,
        overridden: false,
    }
}

/// Replaces the parent-rule basis integrals by externally known values.
pub fn override_basis_integrals(basis: &ReducedBasis, integrals: Vec<C64>) -> Result<BasisIntegrals> {
    check_len(basis.len(), integrals.len(), "overridden basis integrals")?;
    Ok(BasisIntegrals {
        values: integrals,
        overridden: true,
    })
}

#[derive(Debug, Clone)]
pub struct RoqRule {
    /// Parent-rule node indices in selection order.
    pub point_indices: Vec<usize>,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<C64>,
    pub parent_rule: QuadratureRule,
    pub basis_ref: String,
    /// Integrals the weights were fitted to, when they did not come from the parent rule.
    pub by_hand_override: Option<Vec<C64>>,
}

impl RoqRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn condition_number(&self) -> f64 {
        condition_number(&self.weights)
    }

    /// Values of a parent-grid vector at the ROQ points.
    pub fn restrict(&self, samples: &[C64]) -> Result<Vec<C64>> {
        check_len(self.parent_rule.len(), samples.len(), "parent-grid samples")?;
        Ok(self.point_indices.iter().map(|&p| samples[p]).collect())
    }

    /// `(node, weight)` pairs sorted by the first node coordinate, for display.
    pub fn sorted_view(&self) -> Vec<(Vec<f64>, C64)> {
        let mut v: Vec<(Vec<f64>, C64)> = self.points.iter().cloned().zip(self.weights.iter().copied()).collect();
        v.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
        v
    }

    /// JSON provenance header and CSV `rank,node_index,node_value,weight_re,weight_im`.
    pub fn write(&self, dir: &Path, stem: &str, config_hash: &str) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            config_hash: &'a str,
            parent_rule_hash: String,
            basis_hash: &'a str,
            by_hand_override: bool,
            m: usize,
            condition_number: f64,
        }
        let header = Header {
            config_hash,
            parent_rule_hash: rule_hash(&self.parent_rule),
            basis_hash: &self.basis_ref,
            by_hand_override: self.by_hand_override.is_some(),
            m: self.len(),
            condition_number: self.condition_number(),
        };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&header)?)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv(config_hash))?;
        Ok(())
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let two_d = self.parent_rule.dimension() == 2;
        let mut csv = format!("# config_hash={config_hash}\n");
        csv.push_str(if two_d {
            "rank,node_index,node_value,node_value_y,weight_re,weight_im\n"
        } else {
            "rank,node_index,node_value,weight_re,weight_im\n"
        });
        for (r, ((idx, p), w)) in self
            .point_indices
            .iter()
            .zip(&self.points)
            .zip(&self.weights)
            .enumerate()
        {
            let coords: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(csv, "{r},{idx},{},{:.16e},{:.16e}", coords.join(","), w.re, w.im).expect("String write");
        }
        csv
    }
}

fn leading_weights(v: &ComplexMatrix, eim: &EimOperator, k: usize, integrals: &[C64]) -> Result<Vec<C64>> {
    let b = &integrals[..k];
    // ω_ROQᵀ = bᵀ (PᵀV)⁻¹ = bᵀ T L⁻¹, i.e. Lᵀ ω_ROQ = Tᵀ b
    let tb = eim.t.leading_block(k).transpose_mul_vec(b)?;
    let weights = match solve_lower_transposed(&eim.l.leading_block(k), &tb) {
        Ok(w) => w,
        Err(RoqError::Singular { .. }) => {
            let pv = v.leading_columns(k).select_rows(&eim.point_indices[..k]);
            LuDecomposition::new(&pv)?.solve_transpose(b)?
        }
        Err(e) => return Err(e),
    };
    if weights.iter().any(|w| !(w.re.is_finite() && w.im.is_finite())) {
        return Err(RoqError::Singular {
            index: 0,
            magnitude: f64::NAN,
        });
    }
    Ok(weights)
}

fn assemble(basis: &ReducedBasis, eim: &EimOperator, integrals: &BasisIntegrals) -> Result<RoqRule> {
    let m = eim.len();
    check_len(basis.len(), m, "basis size vs interpolation points")?;
    check_len(m, integrals.values.len(), "basis integrals")?;
    let weights = leading_weights(&basis.basis, eim, m, &integrals.values)?;
    Ok(RoqRule {
        point_indices: eim.point_indices.clone(),
        points: eim.nodes.clone(),
        weights,
        parent_rule: basis.rule.clone(),
        basis_ref: matrix_hash(&basis.basis),
        by_hand_override: integrals.overridden.then(|| integrals.values.clone()),
    })
}

/// ROQ weights `(ω_ROQ)ᵀ = ωᵀṼ (PᵀṼ)⁻¹` for a product basis and its points.
pub fn build_roq(basis: &ReducedBasis, eim: &EimOperator) -> Result<RoqRule> {
    assemble(basis, eim, &basis_integrals(basis))
}

/// Same as [`build_roq`] with the basis integrals taken from `integrals`.
pub fn build_roq_with(basis: &ReducedBasis, eim: &EimOperator, integrals: &BasisIntegrals) -> Result<RoqRule> {
    assemble(basis, eim, integrals)
}

/// `max_j |Σ_ℓ ω_ℓ ẽ_j(p_ℓ) − target_j|` with targets from the parent rule
/// or from the override recorded in `roq`.
pub fn verify_basis_integration(roq: &RoqRule, basis: &ReducedBasis) -> Result<f64> {
    check_len(basis.len(), roq.len(), "basis size vs ROQ size")?;
    let targets = match &roq.by_hand_override {
        Some(v) => v.clone(),
        None => basis_integrals(basis).values,
    };
    let mut worst = 0.0f64;
    for (col, target) in basis.basis.columns().zip(&targets) {
        let q: C64 = roq
            .point_indices
            .iter()
            .zip(&roq.weights)
            .map(|(&p, w)| w * col[p])
            .sum();
        worst = worst.max((q - target).norm());
    }
    Ok(worst)
}

/// `Σ_ℓ ω_ℓ conj(h_i(p_ℓ)) h_j(p_ℓ)`.
pub fn roq_inner_product(roq: &RoqRule, hi: &[C64], hj: &[C64]) -> Result<C64> {
    check_len(roq.len(), hi.len(), "left samples at ROQ points")?;
    check_len(roq.len(), hj.len(), "right samples at ROQ points")?;
    Ok(roq
        .weights
        .iter()
        .zip(hi)
        .zip(hj)
        .map(|((w, a), b)| w * (a.conj() * b))
        .sum())
}

/// `Σ_ℓ ω_ℓ f(p_ℓ)` for a single integrand.
pub fn roq_integrate(roq: &RoqRule, f: &[C64]) -> Result<C64> {
    check_len(roq.len(), f.len(), "samples at ROQ points")?;
    Ok(roq.weights.iter().zip(f).map(|(w, v)| w * v).sum())
}

/// Rule from the leading `m_prime` basis vectors and points.
pub fn truncate_roq(basis: &ReducedBasis, eim: &EimOperator, m_prime: usize) -> Result<RoqRule> {
    truncate_roq_with(basis, eim, m_prime, &basis_integrals(basis))
}

pub fn truncate_roq_with(
    basis: &ReducedBasis,
    eim: &EimOperator,
    m_prime: usize,
    integrals: &BasisIntegrals,
) -> Result<RoqRule> {
    if m_prime == 0 || m_prime > eim.len() {
        return Err(RoqError::Argument(format!(
            "truncation size {m_prime} outside 1..={}",
            eim.len()
        )));
    }
    let sub = BasisIntegrals {
        values: integrals.values[..m_prime].to_vec(),
        overridden: integrals.overridden,
    };
    assemble(&basis.truncated(m_prime), &eim.truncated(m_prime), &sub)
}

/// Weights of every nested rule `m' = 1..=m`, entry `m' − 1` holding `m'` weights.
pub fn nested_roq_weights(
    basis: &ReducedBasis,
    eim: &EimOperator,
    integrals: &BasisIntegrals,
) -> Result<Vec<Vec<C64>>> {
    let m = eim.len();
    check_len(basis.len(), m, "basis size vs interpolation points")?;
    check_len(m, integrals.values.len(), "basis integrals")?;
    (1..=m)
        .map(|k| leading_weights(&basis.basis, eim, k, &integrals.values))
        .collect()
}

/// Rebuilds an ROQ rule on `new_rule` from the greedy product functions
/// re-sampled there, in greedy order.
pub fn roq_new_grid(
    products: &SampledFunctionSet,
    new_rule: &QuadratureRule,
) -> Result<(ReducedBasis, EimOperator, RoqRule)> {
    check_len(new_rule.len(), products.samples.rows(), "resampled product rows")?;
    let mut v = ComplexMatrix::with_rows(new_rule.len());
    for (j, col) in products.samples.columns().enumerate() {
        match gram_schmidt_append(&v, col, new_rule, crate::linalg::DEFAULT_GS_PASSES) {
            Ok(step) => v.push_column(&step.residual)?,
            Err(RoqError::LinearDependence { residual, threshold }) => {
                return Err(RoqError::ResolutionInsufficient(format!(
                    "product {j} is dependent on its predecessors (residual {residual:e} < {threshold:e})"
                )))
            }
            Err(e) => return Err(e),
        }
    }
    let m = v.cols();
    let basis = ReducedBasis {
        snapshots: products.samples.clone(),
        basis: v,
        greedy_indices: (0..m).collect(),
        greedy_parameters: products.parameters.clone(),
        greedy_errors: Vec::new(),
        rule: new_rule.clone(),
        tolerance: f64::NAN,
        seed_index: 0,
        passes: crate::linalg::DEFAULT_GS_PASSES,
        family: products.family.clone(),
        constants: products.constants,
    };
    let eim = build_deim(&basis.basis, new_rule).map_err(|e| match e {
        RoqError::DependentColumns { step, residual } => RoqError::ResolutionInsufficient(format!(
            "interpolation points dependent at step {step} (residual {residual:e})"
        )),
        other => other,
    })?;
    let roq = build_roq(&basis, &eim)?;
    Ok((basis, eim, roq))
}
