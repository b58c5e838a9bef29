//! Monte Carlo validation of nested ROQ rules against refined reference integrals.

use std::fmt::Write as _;
use std::time::Instant;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::eim::{lebesgue_constants, EimOperator};
use crate::error::{Result, RoqError};
use crate::families::{FunctionFamily, SpaNodeFactors};
use crate::greedy::ReducedBasis;
use crate::linalg::C64;
use crate::quadrature::{gauss_legendre_on, tensor_product_rule, trapezoidal_rule, QuadratureRule};
use crate::roq::{nested_roq_weights, BasisIntegrals};

/// The portable generator behind every random draw.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on `[0, 1)` from the top 53 bits, independent of `rand`'s
/// distribution internals.
fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `count` parameter tuples drawn from `domain`; log-uniform for the waveform
/// family (as its training set), uniform otherwise.
pub fn draw_parameters(
    family: &FunctionFamily,
    domain: &[(f64, f64)],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    if domain
        .iter()
        .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
    {
        return Err(RoqError::Argument(format!("cannot sample parameters from {domain:?}")));
    }
    let log = matches!(family, FunctionFamily::Spa(_));
    Ok((0..count)
        .map(|_| {
            domain
                .iter()
                .map(|&(lo, hi)| {
                    let u = unit(rng);
                    if lo == hi {
                        lo
                    } else if log {
                        (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(lo, hi)
                    } else {
                        lo + u * (hi - lo)
                    }
                })
                .collect()
        })
        .collect())
}

/// Weighted samples of a family member at a fixed node set.
pub enum NodeSampler {
    Spa(SpaNodeFactors),
    Generic {
        family: FunctionFamily,
        nodes: Vec<Vec<f64>>,
        sqrt_weight: Vec<f64>,
    },
}

impl NodeSampler {
    pub fn new(family: &FunctionFamily, nodes: &[Vec<f64>]) -> Result<Self> {
        match family {
            FunctionFamily::Spa(spa) => {
                let f: Vec<f64> = nodes.iter().map(|n| n[0]).collect();
                Ok(NodeSampler::Spa(spa.node_factors(&f)?))
            }
            _ => Ok(NodeSampler::Generic {
                family: family.clone(),
                nodes: nodes.to_vec(),
                sqrt_weight: nodes
                    .iter()
                    .map(|n| family.weight(n).map(f64::sqrt))
                    .collect::<Result<_>>()?,
            }),
        }
    }

    pub fn for_rule(family: &FunctionFamily, rule: &QuadratureRule) -> Result<Self> {
        let nodes: Vec<Vec<f64>> = (0..rule.len()).map(|k| rule.node(k)).collect();
        Self::new(family, &nodes)
    }

    /// `Σ_k w_k conj(h_a) h_b` at the sampler's nodes.
    pub fn pair_integral(&self, a: &[f64], b: &[f64], weights: &[f64]) -> Result<C64> {
        match self {
            NodeSampler::Spa(f) => Ok(f.pair_integral(a[0], b[0], weights)),
            NodeSampler::Generic { .. } => Ok(pair_integral(weights, &self.sample(a)?, &self.sample(b)?)),
        }
    }

    pub fn sample(&self, parameter: &[f64]) -> Result<Vec<C64>> {
        match self {
            NodeSampler::Spa(f) => Ok(f.weighted_waveform(parameter[0])),
            NodeSampler::Generic {
                family,
                nodes,
                sqrt_weight,
            } => nodes
                .iter()
                .zip(sqrt_weight)
                .map(|(n, s)| family.evaluate(parameter, n).map(|v| v * *s))
                .collect(),
        }
    }
}

fn norm_on(rule: &QuadratureRule, h: &[C64]) -> f64 {
    h.iter()
        .zip(rule.weights())
        .map(|(z, w)| z.norm_sqr() * w)
        .sum::<f64>()
        .sqrt()
}

fn pair_integral(weights: &[f64], a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).zip(weights).map(|((x, y), w)| x.conj() * y * *w).sum()
}

/// Gauss–Legendre rule on the parent's domain with `scale` times its nodes
/// (per axis `√scale` in two dimensions).
pub fn refined_rule(parent: &QuadratureRule, scale: usize) -> Result<QuadratureRule> {
    let dom = parent.domain();
    match parent.factors() {
        Some((nx, ny)) => {
            let s = (scale as f64).sqrt().ceil() as usize;
            let rx = gauss_legendre_on(dom[0].0, dom[0].1, s * nx)?;
            let ry = gauss_legendre_on(dom[1].0, dom[1].1, s * ny)?;
            tensor_product_rule(&rx, &ry)
        }
        None => gauss_legendre_on(dom[0].0, dom[0].1, scale * parent.len()),
    }
}

/// Random pairs with their reference products `I_c = ⟨ĥ_a, ĥ_b⟩`, every
/// function normalized in the reference norm.
#[derive(Debug, Clone)]
pub struct PairSet {
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub reference: Vec<C64>,
    pub norms: Vec<(f64, f64)>,
    pub reference_rule: QuadratureRule,
}

impl PairSet {
    pub fn draw(
        family: &FunctionFamily,
        domain: &[(f64, f64)],
        draws: usize,
        rng_seed: u64,
        reference_rule: QuadratureRule,
    ) -> Result<Self> {
        let mut rng = seeded_rng(rng_seed);
        let params = draw_parameters(family, domain, 2 * draws, &mut rng)?;
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = params.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
        let sampler = NodeSampler::for_rule(family, &reference_rule)?;
        let w = reference_rule.weights();
        let out: Vec<(C64, (f64, f64))> = pairs
            .par_iter()
            .map(|(a, b)| {
                let ha = sampler.sample(a)?;
                let hb = sampler.sample(b)?;
                let (na, nb) = (norm_on(&reference_rule, &ha), norm_on(&reference_rule, &hb));
                if !(na > 0.0 && nb > 0.0) {
                    return Err(RoqError::DegenerateFunction { index: 0 });
                }
                Ok((pair_integral(w, &ha, &hb) / (na * nb), (na, nb)))
            })
            .collect::<Result<_>>()?;
        let (reference, norms) = out.into_iter().unzip();
        Ok(PairSet {
            pairs,
            reference,
            norms,
            reference_rule,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Leading `count` pairs only.
    pub fn subset(&self, count: usize) -> PairSet {
        let k = count.min(self.len());
        PairSet {
            pairs: self.pairs[..k].to_vec(),
            reference: self.reference[..k].to_vec(),
            norms: self.norms[..k].to_vec(),
            reference_rule: self.reference_rule.clone(),
        }
    }

    /// `max |I_c − I_rule|` over the pairs, with the reference normalization.
    pub fn max_error_on(&self, family: &FunctionFamily, rule: &QuadratureRule) -> Result<f64> {
        let sampler = NodeSampler::for_rule(family, rule)?;
        let w = rule.weights();
        let errs: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let (a, b) = &self.pairs[i];
                let (na, nb) = self.norms[i];
                let v = sampler.pair_integral(a, b, w)? / (na * nb);
                Ok((v - self.reference[i]).norm())
            })
            .collect::<Result<_>>()?;
        Ok(errs.into_iter().fold(0.0, f64::max))
    }
}

/// Rules of increasing size on the family's frequency or spatial interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Trapezoid,
    GaussLegendre,
}

pub fn scan_rule(kind: ScanKind, domain: (f64, f64), n: usize) -> Result<QuadratureRule> {
    match kind {
        ScanKind::Trapezoid => trapezoidal_rule(domain.0, domain.1, n),
        ScanKind::GaussLegendre => gauss_legendre_on(domain.0, domain.1, n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub nodes: usize,
    pub max_error: f64,
}

/// Max pair error for each rule size in `sizes`.
pub fn rule_error_scan(
    pairs: &PairSet,
    family: &FunctionFamily,
    kind: ScanKind,
    domain: (f64, f64),
    sizes: &[usize],
) -> Result<Vec<ScanRow>> {
    sizes
        .iter()
        .map(|&n| {
            Ok(ScanRow {
                nodes: n,
                max_error: pairs.max_error_on(family, &scan_rule(kind, domain, n)?)?,
            })
        })
        .collect()
}

/// Smallest `n` in `lo..=hi` with `error(n) ≤ target`, assuming the error
/// decreases with `n`; `error(hi)` must meet the target.
pub fn smallest_size_meeting<F: FnMut(usize) -> Result<f64>>(
    target: f64,
    mut lo: usize,
    mut hi: usize,
    mut error: F,
) -> Result<usize> {
    if error(hi)? > target {
        return Err(RoqError::Argument(format!("size {hi} does not reach {target:e}")));
    }
    if error(lo)? <= target {
        return Ok(lo);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if error(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// A basis, its interpolation operator and the integrals its nested rules reproduce.
pub struct NestedRoq<'a> {
    pub label: String,
    pub basis: &'a ReducedBasis,
    pub eim: &'a EimOperator,
    pub integrals: BasisIntegrals,
}

#[derive(Debug, Clone)]
pub struct ValidationOptions {
    /// Reference rule size as a multiple of the parent's.
    pub reference_scale: usize,
    /// Pairs re-integrated on a rule twice as fine to certify the reference.
    pub doubling_pairs: usize,
    /// Rows (besides the last) at which Lebesgue constants and the error monitor are evaluated.
    pub monitor_stride: usize,
    /// Parameter box to draw from; defaults to the family's own.
    pub domain: Option<Vec<(f64, f64)>>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            reference_scale: 4,
            doubling_pairs: 256,
            monitor_stride: 10,
            domain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub m: usize,
    /// `max |I_c − I_ROQ|` with the leading `m` points.
    pub max_roq_error: f64,
    /// `max |I_c − I_d|` on the parent rule.
    pub max_parent_error: f64,
    pub lebesgue_2: Option<f64>,
    pub greedy_error: Option<f64>,
    /// Largest `|Ω|_d Λ₂ σ_m ‖g‖_d` over the pairs.
    pub monitor_bound: Option<f64>,
    /// Pairs with `|I_d − I_ROQ|` above their monitor bound.
    pub monitor_violations: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub label: String,
    pub draws: usize,
    pub rng_seed: u64,
    pub reference_nodes: usize,
    /// Largest change of the reference values when the reference rule is refined.
    pub reference_self_change: f64,
    /// `Σ_k |ω_k|` of the parent rule.
    pub parent_weight_sum: f64,
    pub rows: Vec<ValidationRow>,
    pub wall_clock_seconds: f64,
}

impl ValidationReport {
    /// `errors[m]` for `m = 0..=len`, with `errors[0] = 1`.
    pub fn roq_error_curve(&self) -> Vec<f64> {
        std::iter::once(1.0)
            .chain(self.rows.iter().map(|r| r.max_roq_error))
            .collect()
    }

    pub fn total_monitor_violations(&self) -> usize {
        self.rows.iter().filter_map(|r| r.monitor_violations).sum()
    }

    /// Smallest `m` whose error is at most `target`.
    pub fn nodes_for(&self, target: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.max_roq_error <= target).map(|r| r.m)
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.16e}"));
        let mut csv = format!(
            "# config_hash={config_hash}\nm,max_roq_error,max_parent_error,lebesgue_2,greedy_error,monitor_bound,monitor_violations\n"
        );
        for r in &self.rows {
            writeln!(
                csv,
                "{},{:.16e},{:.16e},{},{},{},{}",
                r.m,
                r.max_roq_error,
                r.max_parent_error,
                opt(r.lebesgue_2),
                opt(r.greedy_error),
                opt(r.monitor_bound),
                r.monitor_violations.map_or_else(String::new, |v| v.to_string())
            )
            .expect("String write");
        }
        csv
    }
}

struct Accumulator {
    roq: Vec<f64>,
    parent: f64,
    bound: Vec<f64>,
    violations: Vec<usize>,
}

impl Accumulator {
    fn new(m: usize, rows: usize) -> Self {
        Accumulator {
            roq: vec![0.0; m],
            parent: 0.0,
            bound: vec![0.0; rows],
            violations: vec![0; rows],
        }
    }

    fn merge(mut self, other: Accumulator) -> Self {
        for (a, b) in self.roq.iter_mut().zip(other.roq) {
            *a = a.max(b);
        }
        for (a, b) in self.bound.iter_mut().zip(other.bound) {
            *a = a.max(b);
        }
        for (a, b) in self.violations.iter_mut().zip(other.violations) {
            *a += b;
        }
        self.parent = self.parent.max(other.parent);
        self
    }
}

/// Pairs with reference values on a rule `options.reference_scale` times finer
/// than `parent`, plus the largest change of the reference when that rule is
/// doubled again on a subset of the pairs.
pub fn reference_pairs(
    family: &FunctionFamily,
    parent: &QuadratureRule,
    draws: usize,
    rng_seed: u64,
    options: &ValidationOptions,
) -> Result<(PairSet, f64)> {
    if draws == 0 {
        return Err(RoqError::Argument("validation needs at least one draw".into()));
    }
    let domain = options.domain.clone().unwrap_or_else(|| family.parameter_domain());
    let reference = refined_rule(parent, options.reference_scale)?;
    let pairs = PairSet::draw(family, &domain, draws, rng_seed, reference)?;

    let doubled = refined_rule(parent, 2 * options.reference_scale)?;
    let check = pairs.subset(options.doubling_pairs.max(1));
    let finer = PairSet::draw(family, &domain, check.len(), rng_seed, doubled)?;
    let self_change = check
        .reference
        .iter()
        .zip(&finer.reference)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok((pairs, self_change))
}

/// Draws `draws` random pairs and tabulates, for every nested rule size, the
/// largest deviation of the ROQ value from a refined reference integral.
pub fn monte_carlo_validate(
    roq: &NestedRoq<'_>,
    family: &FunctionFamily,
    draws: usize,
    rng_seed: u64,
    options: &ValidationOptions,
) -> Result<ValidationReport> {
    let (pairs, self_change) = reference_pairs(family, &roq.basis.rule, draws, rng_seed, options)?;
    validate_on_pairs(roq, family, &pairs, self_change, rng_seed, options)
}

/// [`monte_carlo_validate`] against pairs whose reference values are already
/// known, so several rules can share one reference.
pub fn validate_on_pairs(
    roq: &NestedRoq<'_>,
    family: &FunctionFamily,
    pairs: &PairSet,
    reference_self_change: f64,
    rng_seed: u64,
    options: &ValidationOptions,
) -> Result<ValidationReport> {
    let start = Instant::now();
    if pairs.is_empty() {
        return Err(RoqError::Argument("validation needs at least one draw".into()));
    }
    let parent = &roq.basis.rule;
    let m = roq.eim.len();
    let weights = nested_roq_weights(roq.basis, roq.eim, &roq.integrals)?;
    let stride = options.monitor_stride.max(1);
    let have_sigma = roq.basis.greedy_errors.len() > m;
    let monitor_ms: Vec<usize> = if have_sigma {
        (1..=m).filter(|k| k % stride == 0 || *k == m).collect()
    } else {
        Vec::new()
    };
    let parent_weight_sum: f64 = parent.weights().iter().map(|w| w.abs()).sum();
    // |Ω|_d Λ₂ σ_m for each monitored size; without greedy errors there is nothing to monitor
    let monitor: Vec<(f64, f64, f64)> = monitor_ms
        .iter()
        .map(|&k| {
            let lc = lebesgue_constants(&roq.eim.truncated(k), &roq.basis.basis.leading_columns(k), parent)?;
            let sigma = roq.basis.greedy_errors[k];
            let factor = parent_weight_sum * lc.lambda_2 * sigma;
            Ok((lc.lambda_2, sigma, factor))
        })
        .collect::<Result<_>>()?;

    let parent_sampler = NodeSampler::for_rule(family, parent)?;
    let point_sampler = NodeSampler::new(family, &roq.eim.nodes)?;
    let w = parent.weights();
    let acc = (0..pairs.len())
        .into_par_iter()
        .map(|i| -> Result<Accumulator> {
            let (a, b) = &pairs.pairs[i];
            let (na, nb) = pairs.norms[i];
            let s = 1.0 / (na * nb);
            let ic = pairs.reference[i];
            let ha = parent_sampler.sample(a)?;
            let hb = parent_sampler.sample(b)?;
            let id = pair_integral(w, &ha, &hb) * s;
            let g_norm = ha
                .iter()
                .zip(&hb)
                .zip(w)
                .map(|((x, y), wk)| x.norm_sqr() * y.norm_sqr() * wk)
                .sum::<f64>()
                .sqrt()
                * s;
            let pa = point_sampler.sample(a)?;
            let pb = point_sampler.sample(b)?;
            let g: Vec<C64> = pa.iter().zip(&pb).map(|(x, y)| x.conj() * y * s).collect();
            let mut out = Accumulator::new(m, monitor_ms.len());
            out.parent = (ic - id).norm();
            let mut iroq = vec![C64::new(0.0, 0.0); m];
            for (k, wk) in weights.iter().enumerate() {
                let v: C64 = wk.iter().zip(&g).map(|(x, y)| x * y).sum();
                iroq[k] = v;
                out.roq[k] = (ic - v).norm();
            }
            for (r, (&k, &(_, _, factor))) in monitor_ms.iter().zip(&monitor).enumerate() {
                let bound = factor * g_norm;
                out.bound[r] = bound;
                if (id - iroq[k - 1]).norm() > bound {
                    out.violations[r] += 1;
                }
            }
            Ok(out)
        })
        .try_reduce(|| Accumulator::new(m, monitor_ms.len()), |x, y| Ok(x.merge(y)))?;

    let mut rows: Vec<ValidationRow> = (1..=m)
        .map(|k| ValidationRow {
            m: k,
            max_roq_error: acc.roq[k - 1],
            max_parent_error: acc.parent,
            lebesgue_2: None,
            greedy_error: None,
            monitor_bound: None,
            monitor_violations: None,
        })
        .collect();
    for (r, (&k, &(lambda, sigma, _))) in monitor_ms.iter().zip(&monitor).enumerate() {
        let row = &mut rows[k - 1];
        row.lebesgue_2 = Some(lambda);
        row.greedy_error = Some(sigma);
        row.monitor_bound = Some(acc.bound[r]);
        row.monitor_violations = Some(acc.violations[r]);
    }
    Ok(ValidationReport {
        label: roq.label.clone(),
        draws: pairs.len(),
        rng_seed,
        reference_nodes: pairs.reference_rule.len(),
        reference_self_change,
        parent_weight_sum,
        rows,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eim::build_deim;
    use crate::families::{sample_family, scalar_parameters};
    use crate::greedy::{rb_greedy, two_step_greedy, ProductMode};
    use crate::quadrature::gauss_legendre_rule;
    use crate::roq::{basis_integrals, roq_inner_product, truncate_roq};

    #[test]
    fn draws_are_reproducible_and_in_range() {
        let fam = FunctionFamily::Spa(Default::default());
        let dom = fam.parameter_domain();
        let a = draw_parameters(&fam, &dom, 500, &mut seeded_rng(7)).unwrap();
        let b = draw_parameters(&fam, &dom, 500, &mut seeded_rng(7)).unwrap();
        let c = draw_parameters(&fam, &dom, 500, &mut seeded_rng(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|p| p[0] >= dom[0].0 && p[0] <= dom[0].1));
        // log-uniform: about half the draws fall below the geometric midpoint
        let mid = (dom[0].0 * dom[0].1).sqrt();
        let below = a.iter().filter(|p| p[0] < mid).count();
        assert!((200..300).contains(&below), "{below}");
    }

    #[test]
    fn unbounded_domains_are_rejected() {
        let fam = FunctionFamily::Legendre;
        assert!(draw_parameters(&fam, &fam.parameter_domain(), 3, &mut seeded_rng(1)).is_err());
    }

    #[test]
    fn bisection_finds_threshold() {
        let n = smallest_size_meeting(1e-3, 1, 1000, |n| Ok(1.0 / n as f64)).unwrap();
        assert_eq!(n, 1000);
        let n = smallest_size_meeting(0.01, 1, 1000, |n| Ok(1.0 / n as f64)).unwrap();
        assert_eq!(n, 100);
        assert!(smallest_size_meeting(1e-4, 1, 1000, |n| Ok(1.0 / n as f64)).is_err());
    }

    fn small_pipeline() -> (ReducedBasis, EimOperator) {
        let rule = gauss_legendre_rule(80).unwrap();
        let mus: Vec<f64> = (0..41).map(|i| -0.1 + 0.005 * i as f64).collect();
        let set = sample_family(&FunctionFamily::InvDist1d, &scalar_parameters(&mus), &rule, true).unwrap();
        let rb = rb_greedy(&set, 1e-6, 0).unwrap();
        let prod = two_step_greedy(&rb, 1e-8, ProductMode::GreedyWaveforms).unwrap();
        let eim = build_deim(&prod.basis, &rule).unwrap();
        (prod, eim)
    }

    #[test]
    fn single_parameter_value_gives_single_pair_error() {
        let (basis, eim) = small_pipeline();
        let fam = FunctionFamily::InvDist1d;
        let nested = NestedRoq {
            label: "gl".into(),
            basis: &basis,
            eim: &eim,
            integrals: basis_integrals(&basis),
        };
        let opts = ValidationOptions {
            domain: Some(vec![(0.03, 0.03)]),
            ..Default::default()
        };
        let report = monte_carlo_validate(&nested, &fam, 5, 1, &opts).unwrap();
        let m = eim.len();
        // direct single-pair computation
        let reference = refined_rule(&basis.rule, 4).unwrap();
        let h_ref = fam.sample_weighted(&[0.03], &reference).unwrap();
        let n = norm_on(&reference, &h_ref);
        let ic = pair_integral(reference.weights(), &h_ref, &h_ref) / (n * n);
        let roq = truncate_roq(&basis, &eim, m).unwrap();
        let h = fam.sample_weighted(&[0.03], &basis.rule).unwrap();
        let hp = roq.restrict(&h).unwrap();
        let iroq = roq_inner_product(&roq, &hp, &hp).unwrap() / (n * n);
        let last = report.rows.last().unwrap();
        assert!((last.max_roq_error - (ic - iroq).norm()).abs() < 1e-14, "{last:?}");
        assert_eq!(report.rows.len(), m);
    }

    #[test]
    fn rerun_is_bit_identical() {
        let (basis, eim) = small_pipeline();
        let fam = FunctionFamily::InvDist1d;
        let nested = NestedRoq {
            label: "gl".into(),
            basis: &basis,
            eim: &eim,
            integrals: basis_integrals(&basis),
        };
        let opts = ValidationOptions::default();
        let a = monte_carlo_validate(&nested, &fam, 200, 42, &opts).unwrap();
        let b = monte_carlo_validate(&nested, &fam, 200, 42, &opts).unwrap();
        assert_eq!(a.to_csv("h"), b.to_csv("h"));
        assert!(a.reference_self_change < 1e-10);
        assert_eq!(a.total_monitor_violations(), 0);
        // the full rule integrates these analytic products nearly exactly
        assert!(a.rows.last().unwrap().max_roq_error < 1e-6, "{:?}", a.rows.last());
    }
}
