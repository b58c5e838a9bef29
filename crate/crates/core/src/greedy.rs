//! Reduced-basis greedy construction, product training spaces and the
//! two-step greedy for products.
//!
//! The sweep keeps `Σ_ℓ |⟨e_ℓ, h_k⟩_d|²` for every training column and reads
//! the squared projection error of a normalized column as one minus that sum.
//! Each new basis vector therefore costs a single pass over the training space.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, RoqError};
use crate::families::{PhysicalConstants, SampledFunctionSet};
use crate::linalg::{
    dot_conj, gram_schmidt_weighted, weighted_dot, weighted_norm_sq, ComplexMatrix, C64, DEFAULT_GS_PASSES,
};
use crate::quadrature::QuadratureRule;

/// Product spaces larger than this many columns need an explicit override.
pub const DIRECT_GREEDY_COLUMN_LIMIT: usize = 10_000_000;

/// A set of normalized training columns the greedy can sweep.
pub trait TrainingSpace: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn node_count(&self) -> usize;

    /// Normalized column `k`.
    fn column(&self, k: usize) -> Vec<C64>;

    fn parameters(&self, k: usize) -> Vec<f64>;

    /// `⟨e, g_k⟩_d` for every column `g_k`, in column order.
    fn inner_products(&self, e: &[C64], weights: &[f64]) -> Vec<C64>;
}

impl TrainingSpace for SampledFunctionSet {
    fn len(&self) -> usize {
        self.samples.cols()
    }

    fn node_count(&self) -> usize {
        self.samples.rows()
    }

    fn column(&self, k: usize) -> Vec<C64> {
        self.samples.column(k).to_vec()
    }

    fn parameters(&self, k: usize) -> Vec<f64> {
        self.parameters[k].clone()
    }

    fn inner_products(&self, e: &[C64], weights: &[f64]) -> Vec<C64> {
        let we: Vec<C64> = e.iter().zip(weights).map(|(z, w)| z * *w).collect();
        (0..self.samples.cols())
            .into_par_iter()
            .map(|k| dot_conj(&we, self.samples.column(k)))
            .collect()
    }
}

/// How the two-step greedy forms its product training space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductMode {
    /// Products of the selected (normalized) training functions.
    #[default]
    GreedyWaveforms,
    /// Products of the orthonormal basis vectors.
    OrthonormalBasis,
}

/// The `n²` normalized products `conj(h_i) ∘ h_j`, evaluated on demand.
///
/// Column `k = i * n + j` holds `conj(h_i) h_j / ‖conj(h_i) h_j‖_d`.
pub struct ProductTrainingSpace {
    n: usize,
    m: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    inv_norms: Vec<f64>,
    factor_parameters: Vec<Vec<f64>>,
}

impl ProductTrainingSpace {
    pub fn new(factors: &ComplexMatrix, parameters: &[Vec<f64>], rule: &QuadratureRule) -> Result<Self> {
        let (m, n) = (factors.rows(), factors.cols());
        check_len(rule.len(), m, "product factor rows")?;
        check_len(n, parameters.len(), "product factor parameters")?;
        let mut re = Vec::with_capacity(n * m);
        let mut im = Vec::with_capacity(n * m);
        for col in factors.columns() {
            re.extend(col.iter().map(|z| z.re));
            im.extend(col.iter().map(|z| z.im));
        }
        // ‖conj(h_i) h_j‖² = Σ_k w_k |h_i|² |h_j|²
        let w = rule.weights();
        let sq: Vec<Vec<f64>> = factors
            .columns()
            .map(|c| c.iter().zip(w).map(|(z, wk)| z.norm_sqr() * wk).collect())
            .collect();
        let abs2: Vec<Vec<f64>> = factors
            .columns()
            .map(|c| c.iter().map(|z| z.norm_sqr()).collect())
            .collect();
        let rows: Vec<Result<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let s: f64 = sq[i].iter().zip(&abs2[j]).map(|(a, b)| a * b).sum();
                        let norm = s.sqrt();
                        if norm > 0.0 && norm.is_finite() {
                            Ok(1.0 / norm)
                        } else {
                            Err(RoqError::DegenerateProduct { i, j })
                        }
                    })
                    .collect()
            })
            .collect();
        let mut inv_norms = Vec::with_capacity(n * n);
        for r in rows {
            inv_norms.extend(r?);
        }
        Ok(ProductTrainingSpace {
            n,
            m,
            re,
            im,
            inv_norms,
            factor_parameters: parameters.to_vec(),
        })
    }

    pub fn factor_count(&self) -> usize {
        self.n
    }

    /// `(i, j)` of product column `k`.
    pub fn pair(&self, k: usize) -> (usize, usize) {
        (k / self.n, k % self.n)
    }

    fn factor(&self, i: usize) -> (&[f64], &[f64]) {
        let r = i * self.m..(i + 1) * self.m;
        (&self.re[r.clone()], &self.im[r])
    }

    /// Materializes all columns, in product order.
    pub fn materialize(&self, rule: &QuadratureRule) -> Result<SampledFunctionSet> {
        let mut samples = ComplexMatrix::with_rows(self.m);
        let mut params = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            samples.push_column(&self.column(k))?;
            params.push(self.parameters(k));
        }
        Ok(SampledFunctionSet {
            family: "products".into(),
            samples,
            parameters: params,
            rule: rule.clone(),
            normalized: true,
            norms: self.inv_norms.iter().map(|v| 1.0 / v).collect(),
            constants: None,
        })
    }
}

/// `Σ_k a_k b_k` for four `a` vectors against one `b`, split storage.
#[inline]
fn dot4_unconj(a: [(&[f64], &[f64]); 4], br: &[f64], bi: &[f64]) -> [C64; 4] {
    const L: usize = 4;
    let mut acc_re = [[0.0f64; L]; 4];
    let mut acc_im = [[0.0f64; L]; 4];
    let chunks = br.len() / L;
    for c in 0..chunks {
        let o = c * L;
        let (xr, xi) = (&br[o..o + L], &bi[o..o + L]);
        for (q, (ar, ai)) in a.iter().enumerate() {
            let (ar, ai) = (&ar[o..o + L], &ai[o..o + L]);
            for l in 0..L {
                acc_re[q][l] += ar[l] * xr[l] - ai[l] * xi[l];
                acc_im[q][l] += ar[l] * xi[l] + ai[l] * xr[l];
            }
        }
    }
    let mut out = [C64::new(0.0, 0.0); 4];
    for q in 0..4 {
        let (ar, ai) = a[q];
        let mut re: f64 = acc_re[q].iter().sum();
        let mut im: f64 = acc_im[q].iter().sum();
        for k in chunks * L..br.len() {
            re += ar[k] * br[k] - ai[k] * bi[k];
            im += ar[k] * bi[k] + ai[k] * br[k];
        }
        out[q] = C64::new(re, im);
    }
    out
}

impl TrainingSpace for ProductTrainingSpace {
    fn len(&self) -> usize {
        self.n * self.n
    }

    fn node_count(&self) -> usize {
        self.m
    }

    fn column(&self, k: usize) -> Vec<C64> {
        let (i, j) = self.pair(k);
        let (ir, ii) = self.factor(i);
        let (jr, ji) = self.factor(j);
        let s = self.inv_norms[k];
        (0..self.m)
            .map(|x| C64::new(ir[x], -ii[x]) * C64::new(jr[x], ji[x]) * s)
            .collect()
    }

    fn parameters(&self, k: usize) -> Vec<f64> {
        let (i, j) = self.pair(k);
        let mut p = self.factor_parameters[i].clone();
        p.extend_from_slice(&self.factor_parameters[j]);
        p
    }

    fn inner_products(&self, e: &[C64], weights: &[f64]) -> Vec<C64> {
        let m = self.m;
        // ⟨e, conj(h_i) h_j⟩ = Σ_x [w conj(e) conj(h_i)]_x h_j(x)
        let ur: Vec<f64> = e.iter().zip(weights).map(|(z, w)| w * z.re).collect();
        let ui: Vec<f64> = e.iter().zip(weights).map(|(z, w)| -w * z.im).collect();
        let blocks: Vec<usize> = (0..self.n).step_by(4).collect();
        let rows: Vec<Vec<C64>> = blocks
            .par_iter()
            .map(|&i0| {
                let count = (self.n - i0).min(4);
                let mut ar = vec![vec![0.0; m]; 4];
                let mut ai = vec![vec![0.0; m]; 4];
                for q in 0..count {
                    let (hr, hi) = self.factor(i0 + q);
                    for x in 0..m {
                        ar[q][x] = ur[x] * hr[x] + ui[x] * hi[x];
                        ai[q][x] = ui[x] * hr[x] - ur[x] * hi[x];
                    }
                }
                let a = [
                    (&ar[0][..], &ai[0][..]),
                    (&ar[1][..], &ai[1][..]),
                    (&ar[2][..], &ai[2][..]),
                    (&ar[3][..], &ai[3][..]),
                ];
                let mut out = vec![C64::new(0.0, 0.0); count * self.n];
                for j in 0..self.n {
                    let (br, bi) = self.factor(j);
                    let d = dot4_unconj(a, br, bi);
                    for q in 0..count {
                        let k = (i0 + q) * self.n + j;
                        out[q * self.n + j] = d[q] * self.inv_norms[k];
                    }
                }
                out
            })
            .collect();
        rows.into_iter().flatten().collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedBasis {
    /// Orthonormal columns under `rule`.
    pub basis: ComplexMatrix,
    /// The normalized training columns that were selected, in order.
    pub snapshots: ComplexMatrix,
    pub greedy_indices: Vec<usize>,
    pub greedy_parameters: Vec<Vec<f64>>,
    /// `[1, σ_1, …, σ_final]`; the last entry is below `tolerance`.
    pub greedy_errors: Vec<f64>,
    pub rule: QuadratureRule,
    pub tolerance: f64,
    pub seed_index: usize,
    pub passes: usize,
    pub family: String,
    pub constants: Option<PhysicalConstants>,
}

impl ReducedBasis {
    pub fn len(&self) -> usize {
        self.basis.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.cols() == 0
    }

    /// Final greedy error.
    pub fn final_error(&self) -> f64 {
        *self.greedy_errors.last().unwrap_or(&1.0)
    }

    /// Basis restricted to its first `k` vectors.
    pub fn truncated(&self, k: usize) -> ReducedBasis {
        let k = k.min(self.len());
        let mut out = self.clone();
        out.basis = self.basis.leading_columns(k);
        out.snapshots = self.snapshots.leading_columns(k);
        out.greedy_indices.truncate(k);
        out.greedy_parameters.truncate(k);
        out.greedy_errors.truncate(k + 1);
        out
    }

    /// `max |V†ΩV − I|`.
    pub fn orthonormality_defect(&self) -> Result<f64> {
        let g = self.basis.weighted_gram(self.rule.weights())?;
        let mut worst = 0.0f64;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        Ok(worst)
    }

    /// Projection coefficients `⟨e_ℓ, h⟩_d`.
    pub fn coefficients(&self, h: &[C64]) -> Result<Vec<C64>> {
        check_len(self.rule.len(), h.len(), "projected function")?;
        let w = self.rule.weights();
        Ok(self.basis.columns().map(|e| weighted_dot(w, e, h)).collect())
    }

    /// JSON metadata, basis CSV and greedy-selection CSV.
    pub fn write(&self, dir: &Path, stem: &str, config_hash: &str) -> Result<()> {
        #[derive(Serialize)]
        struct Meta<'a> {
            config_hash: &'a str,
            family: &'a str,
            size: usize,
            tolerance: f64,
            seed_index: usize,
            tie_break: &'static str,
            gram_schmidt_passes: usize,
            constants: Option<PhysicalConstants>,
            rule_kind: crate::quadrature::RuleKind,
            rule_nodes: usize,
            rule_domain: &'a [(f64, f64)],
            greedy_errors: &'a [f64],
        }
        let meta = Meta {
            config_hash,
            family: &self.family,
            size: self.len(),
            tolerance: self.tolerance,
            seed_index: self.seed_index,
            tie_break: "lowest index",
            gram_schmidt_passes: self.passes,
            constants: self.constants,
            rule_kind: self.rule.kind(),
            rule_nodes: self.rule.len(),
            rule_domain: self.rule.domain(),
            greedy_errors: &self.greedy_errors,
        };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&meta)?)?;

        let mut csv = format!("# config_hash={config_hash}\nnode_index,basis_index,re,im\n");
        for (j, col) in self.basis.columns().enumerate() {
            for (i, z) in col.iter().enumerate() {
                writeln!(csv, "{i},{j},{:.16e},{:.16e}", z.re, z.im).expect("String write");
            }
        }
        std::fs::write(dir.join(format!("{stem}_basis.csv")), csv)?;

        let mut csv = format!("# config_hash={config_hash}\nrank,training_index,parameters,greedy_error\n");
        for (r, (idx, p)) in self.greedy_indices.iter().zip(&self.greedy_parameters).enumerate() {
            let ps: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
            let sigma = self.greedy_errors.get(r + 1).copied().unwrap_or(f64::NAN);
            writeln!(csv, "{r},{idx},{},{sigma:.16e}", ps.join(" ")).expect("String write");
        }
        std::fs::write(dir.join(format!("{stem}_greedy.csv")), csv)?;
        Ok(())
    }
}

/// Residual norm `‖h − Σ_ℓ ⟨e_ℓ,h⟩_d e_ℓ‖_d` using the basis' pass count.
pub fn projection_error(h: &[C64], basis: &ReducedBasis) -> Result<f64> {
    check_len(basis.rule.len(), h.len(), "projected function")?;
    let w = basis.rule.weights();
    let mut r = h.to_vec();
    for _ in 0..basis.passes.max(1) {
        let coeffs: Vec<C64> = basis.basis.columns().map(|e| weighted_dot(w, e, &r)).collect();
        for (e, c) in basis.basis.columns().zip(&coeffs) {
            for (ri, ei) in r.iter_mut().zip(e) {
                *ri -= c * ei;
            }
        }
    }
    Ok(weighted_norm_sq(w, &r).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct GreedyOptions {
    pub tolerance: f64,
    pub seed_index: usize,
    pub passes: usize,
}

impl GreedyOptions {
    pub fn new(tolerance: f64) -> Self {
        GreedyOptions {
            tolerance,
            seed_index: 0,
            passes: DEFAULT_GS_PASSES,
        }
    }

    pub fn seed(mut self, seed_index: usize) -> Self {
        self.seed_index = seed_index;
        self
    }
}

/// Greedy sweep over any training space.
pub fn greedy<T: TrainingSpace + ?Sized>(
    space: &T,
    rule: &QuadratureRule,
    options: GreedyOptions,
) -> Result<ReducedBasis> {
    let GreedyOptions {
        tolerance,
        seed_index,
        passes,
    } = options;
    if !(tolerance > 0.0) {
        return Err(RoqError::Argument(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    if space.is_empty() {
        return Err(RoqError::Argument("empty training space".into()));
    }
    if seed_index >= space.len() {
        return Err(RoqError::Argument(format!(
            "seed index {seed_index} outside training space of {}",
            space.len()
        )));
    }
    check_len(rule.len(), space.node_count(), "training rows")?;
    let w = rule.weights();
    let m = rule.len();

    let mut basis = ComplexMatrix::with_rows(m);
    let mut snapshots = ComplexMatrix::with_rows(m);
    let mut indices = Vec::new();
    let mut params = Vec::new();
    let mut errors = vec![1.0];
    let mut captured = vec![0.0f64; space.len()];

    let mut next = seed_index;
    loop {
        let v = space.column(next);
        // The accumulated error loses resolution near machine precision; the
        // explicit Gram-Schmidt residual of the candidate has the final word.
        let step = match gram_schmidt_weighted(&basis, &v, w, passes) {
            Ok(step) if basis.cols() > 0 && step.residual_norm < tolerance => {
                *errors.last_mut().expect("seeded") = step.residual_norm;
                break;
            }
            Ok(step) => step,
            Err(RoqError::LinearDependence { residual, .. }) => {
                if basis.cols() > 0 && residual < tolerance {
                    *errors.last_mut().expect("seeded") = residual;
                    break;
                }
                return Err(RoqError::DegenerateTraining {
                    basis_size: basis.cols(),
                    greedy_error: *errors.last().unwrap_or(&1.0),
                });
            }
            Err(other) => return Err(other),
        };
        basis.push_column(&step.residual)?;
        snapshots.push_column(&v)?;
        indices.push(next);
        params.push(space.parameters(next));

        let c = space.inner_products(&step.residual, w);
        for (s, ck) in captured.iter_mut().zip(&c) {
            *s += ck.norm_sqr();
        }
        // argmax, ties to the lowest index
        let (mut best, mut best_sq) = (0usize, f64::NEG_INFINITY);
        for (k, s) in captured.iter().enumerate() {
            let sigma_sq = 1.0 - s;
            if sigma_sq > best_sq {
                best = k;
                best_sq = sigma_sq;
            }
        }
        let sigma = best_sq.max(0.0).sqrt();
        errors.push(sigma);
        if sigma < tolerance || basis.cols() == m {
            break;
        }
        next = best;
    }

    Ok(ReducedBasis {
        basis,
        snapshots,
        greedy_indices: indices,
        greedy_parameters: params,
        greedy_errors: errors,
        rule: rule.clone(),
        tolerance,
        seed_index,
        passes,
        family: String::new(),
        constants: None,
    })
}

/// Greedy reduced basis of a normalized training set.
pub fn rb_greedy(training: &SampledFunctionSet, tolerance: f64, seed_index: usize) -> Result<ReducedBasis> {
    rb_greedy_with(training, GreedyOptions::new(tolerance).seed(seed_index))
}

pub fn rb_greedy_with(training: &SampledFunctionSet, options: GreedyOptions) -> Result<ReducedBasis> {
    if !training.normalized {
        return Err(RoqError::Argument("greedy needs a normalized training set".into()));
    }
    let mut rb = greedy(training, &training.rule, options)?;
    rb.family = training.family.clone();
    rb.constants = training.constants;
    Ok(rb)
}

/// Materialized product training space of a normalized function set.
pub fn product_training_space(functions: &SampledFunctionSet) -> Result<SampledFunctionSet> {
    let space = ProductTrainingSpace::new(&functions.samples, &functions.parameters, &functions.rule)?;
    let mut set = space.materialize(&functions.rule)?;
    set.family = format!("{}_products", functions.family);
    set.constants = functions.constants;
    Ok(set)
}

/// Second greedy over products of the first-stage output.
pub fn two_step_greedy(first_stage: &ReducedBasis, tolerance: f64, mode: ProductMode) -> Result<ReducedBasis> {
    two_step_greedy_with(first_stage, GreedyOptions::new(tolerance), mode)
}

pub fn two_step_greedy_with(
    first_stage: &ReducedBasis,
    options: GreedyOptions,
    mode: ProductMode,
) -> Result<ReducedBasis> {
    let factors = match mode {
        ProductMode::GreedyWaveforms => &first_stage.snapshots,
        ProductMode::OrthonormalBasis => &first_stage.basis,
    };
    let space = ProductTrainingSpace::new(factors, &first_stage.greedy_parameters, &first_stage.rule)?;
    let mut rb = greedy(&space, &first_stage.rule, options)?;
    rb.family = format!("{}_products", first_stage.family);
    rb.constants = first_stage.constants;
    Ok(rb)
}

/// One-step greedy over all `K²` products of a normalized training set.
pub fn direct_product_greedy(training: &SampledFunctionSet, tolerance: f64, allow_large: bool) -> Result<ReducedBasis> {
    direct_product_greedy_with(training, GreedyOptions::new(tolerance), allow_large)
}

/// [`direct_product_greedy`] with explicit options; product `(i, j)` has index `i·K + j`.
pub fn direct_product_greedy_with(
    training: &SampledFunctionSet,
    options: GreedyOptions,
    allow_large: bool,
) -> Result<ReducedBasis> {
    let columns = training.len() * training.len();
    if columns > DIRECT_GREEDY_COLUMN_LIMIT && !allow_large {
        return Err(RoqError::MemoryGuard {
            columns,
            limit: DIRECT_GREEDY_COLUMN_LIMIT,
        });
    }
    if !training.normalized {
        return Err(RoqError::Argument("greedy needs a normalized training set".into()));
    }
    let space = ProductTrainingSpace::new(&training.samples, &training.parameters, &training.rule)?;
    let mut rb = greedy(&space, &training.rule, options)?;
    rb.family = format!("{}_products", training.family);
    rb.constants = training.constants;
    Ok(rb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{sample_family, scalar_parameters, FunctionFamily};
    use crate::quadrature::{gauss_legendre_rule, trapezoidal_rule};
    use proptest::prelude::*;

    fn lcg_vec(seed: u64, n: usize) -> Vec<C64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        (0..n).map(|_| C64::new(next(), next())).collect()
    }

    fn random_set(seed: u64, m: usize, k: usize) -> SampledFunctionSet {
        let rule = gauss_legendre_rule(m).unwrap();
        let cols: Vec<Vec<C64>> = (0..k).map(|j| lcg_vec(seed + j as u64 * 7919, m)).collect();
        let samples = ComplexMatrix::from_columns(m, &cols).unwrap();
        SampledFunctionSet::from_columns("random", samples, scalar_parameters(&vec![0.0; k]), rule, true).unwrap()
    }

    fn smooth_set(k: usize) -> SampledFunctionSet {
        let rule = gauss_legendre_rule(60).unwrap();
        let mus: Vec<f64> = (0..k).map(|i| -0.1 + 0.2 * i as f64 / (k - 1) as f64).collect();
        sample_family(&FunctionFamily::InvDist1d, &scalar_parameters(&mus), &rule, true).unwrap()
    }

    #[test]
    fn single_function_training() {
        let set = random_set(1, 10, 1);
        let rb = rb_greedy(&set, 1e-6, 0).unwrap();
        assert_eq!(rb.len(), 1);
        assert_eq!(rb.greedy_errors.len(), 2);
        assert_eq!(rb.greedy_errors[0], 1.0);
        assert!(rb.greedy_errors[1] < 1e-6);
    }

    #[test]
    fn orthonormal_training_is_exhausted() {
        let m = 12;
        let rule = trapezoidal_rule(-1.0, 1.0, m).unwrap();
        let mut samples = ComplexMatrix::zeros(m, 5);
        for j in 0..5 {
            samples[(j + 2, j)] = C64::new(1.0 / rule.weights()[j + 2].sqrt(), 0.0);
        }
        let set = SampledFunctionSet::from_columns("units", samples, vec![vec![]; 5], rule, true).unwrap();
        let rb = rb_greedy(&set, 0.5, 0).unwrap();
        assert_eq!(rb.len(), 5);
        assert_eq!(rb.greedy_indices, vec![0, 1, 2, 3, 4]);
        assert!(rb.greedy_errors[..5].iter().all(|&s| (s - 1.0).abs() < 1e-13));
    }

    #[test]
    fn bad_arguments() {
        let set = random_set(2, 10, 3);
        assert!(rb_greedy(&set, 0.0, 0).is_err());
        assert!(rb_greedy(&set, 1e-3, 3).is_err());
        let mut raw = set.clone();
        raw.normalized = false;
        assert!(rb_greedy(&raw, 1e-3, 0).is_err());
    }

    #[test]
    fn projection_error_cases() {
        let set = smooth_set(40);
        let rb = rb_greedy(&set, 1e-4, 0).unwrap();
        assert!(projection_error(rb.basis.column(0), &rb).unwrap() < 1e-13);

        // component orthogonal to the basis, normalized
        let step = crate::linalg::gram_schmidt_append(&rb.basis, &lcg_vec(5, 60), &rb.rule, 2).unwrap();
        assert!((projection_error(&step.residual, &rb).unwrap() - 1.0).abs() < 1e-13);
        assert!(projection_error(&[C64::new(1.0, 0.0); 3], &rb).is_err());
    }

    #[test]
    fn stopping_guarantee_and_monotonicity() {
        let set = smooth_set(200);
        let tol = 1e-6;
        let rb = rb_greedy(&set, tol, 0).unwrap();
        assert!(rb.final_error() < tol);
        assert!(rb.orthonormality_defect().unwrap() < 1e-12);
        for w in rb.greedy_errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let mut seen = rb.greedy_indices.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), rb.len());
        for k in 0..set.len() {
            assert!(projection_error(set.samples.column(k), &rb).unwrap() < tol + 1e-9);
        }
    }

    #[test]
    fn nested_bases() {
        let set = smooth_set(150);
        let coarse = rb_greedy(&set, 1e-3, 0).unwrap();
        let fine = rb_greedy(&set, 1e-7, 0).unwrap();
        assert!(fine.len() > coarse.len());
        assert_eq!(&fine.greedy_indices[..coarse.len()], &coarse.greedy_indices[..]);
        assert_eq!(fine.basis.leading_columns(coarse.len()), coarse.basis);
    }

    #[test]
    fn deterministic_reruns() {
        let set = smooth_set(120);
        let a = rb_greedy(&set, 1e-8, 3).unwrap();
        let b = rb_greedy(&set, 1e-8, 3).unwrap();
        assert_eq!(a.greedy_indices, b.greedy_indices);
        assert_eq!(a.greedy_errors, b.greedy_errors);
    }

    #[test]
    fn product_space_layout() {
        let set = random_set(9, 30, 3);
        let prods = product_training_space(&set).unwrap();
        assert_eq!(prods.len(), 9);
        for k in 0..9 {
            let n = crate::linalg::discrete_norm(prods.samples.column(k), &set.rule).unwrap();
            assert!((n - 1.0).abs() < 1e-12);
        }
        for i in 0..3 {
            for j in 0..3 {
                let a = prods.samples.column(i * 3 + j);
                let b = prods.samples.column(j * 3 + i);
                assert!(a.iter().zip(b).all(|(x, y)| (x - y.conj()).norm() < 1e-14));
            }
        }
        // explicit product check of column k(1,2)
        let h1 = set.samples.column(1);
        let h2 = set.samples.column(2);
        let raw: Vec<C64> = h1.iter().zip(h2).map(|(a, b)| a.conj() * b).collect();
        let n = crate::linalg::discrete_norm(&raw, &set.rule).unwrap();
        for (x, y) in prods.samples.column(5).iter().zip(&raw) {
            assert!((x - y / n).norm() < 1e-13);
        }

        let one = random_set(4, 20, 1);
        let p = product_training_space(&one).unwrap();
        let h = one.samples.column(0);
        let abs2: Vec<C64> = h.iter().map(|z| C64::new(z.norm_sqr(), 0.0)).collect();
        let n = crate::linalg::discrete_norm(&abs2, &one.rule).unwrap();
        for (x, y) in p.samples.column(0).iter().zip(&abs2) {
            assert!((x - y / n).norm() < 1e-13);
        }
    }

    #[test]
    fn degenerate_product_is_reported() {
        let rule = trapezoidal_rule(-1.0, 1.0, 4).unwrap();
        let mut samples = ComplexMatrix::zeros(4, 2);
        samples[(0, 0)] = C64::new(1.0, 0.0);
        samples[(3, 1)] = C64::new(1.0, 0.0);
        let set = SampledFunctionSet::from_columns("disjoint", samples, vec![vec![]; 2], rule, true).unwrap();
        assert!(matches!(
            product_training_space(&set),
            Err(RoqError::DegenerateProduct { i: 0, j: 1 })
        ));
    }

    #[test]
    fn lazy_products_match_materialized() {
        let set = random_set(21, 37, 6);
        let lazy = ProductTrainingSpace::new(&set.samples, &set.parameters, &set.rule).unwrap();
        let dense = lazy.materialize(&set.rule).unwrap();
        let e = lcg_vec(99, 37);
        let a = lazy.inner_products(&e, set.rule.weights());
        let b = dense.inner_products(&e, set.rule.weights());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn two_step_single_function() {
        let set = random_set(3, 16, 1);
        let rb = rb_greedy(&set, 1e-6, 0).unwrap();
        let two = two_step_greedy(&rb, 1e-6, ProductMode::GreedyWaveforms).unwrap();
        assert_eq!(two.len(), 1);
    }

    #[test]
    fn direct_equals_two_step_when_training_is_the_greedy_set() {
        let set = smooth_set(8);
        let rb = rb_greedy(&set, 1e-14, 0).unwrap();
        // keep only the selected functions, in selection order
        let sel = SampledFunctionSet::from_columns(
            "sel",
            rb.snapshots.clone(),
            rb.greedy_parameters.clone(),
            set.rule.clone(),
            true,
        )
        .unwrap();
        let rb_sel = rb_greedy(&sel, 1e-6, 0).unwrap();
        let direct = direct_product_greedy(&sel, 1e-6, false).unwrap();
        let two = two_step_greedy(&rb_sel, 1e-6, ProductMode::GreedyWaveforms).unwrap();
        if rb_sel.len() == sel.len() {
            assert_eq!(direct.len(), two.len());
        }
    }

    #[test]
    fn memory_guard() {
        let rule = gauss_legendre_rule(2).unwrap();
        let k = 3163; // k² just above the limit
        let samples = ComplexMatrix::from_column_major(2, k, vec![C64::new(0.5, 0.0); 2 * k]).unwrap();
        let set = SampledFunctionSet::from_columns("big", samples, vec![vec![]; k], rule, true).unwrap();
        assert!(matches!(
            direct_product_greedy(&set, 1e-3, false),
            Err(RoqError::MemoryGuard { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn greedy_invariants_on_random_data(seed in 0u64..1000, k in 2usize..25) {
            let set = random_set(seed, 30, k);
            let rb = rb_greedy(&set, 1e-3, 0).unwrap();
            prop_assert!(rb.orthonormality_defect().unwrap() < 1e-12);
            prop_assert!(rb.final_error() < 1e-3);
            for w in rb.greedy_errors.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
