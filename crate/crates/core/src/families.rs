//! Parameterized function families, weight absorption and training-set sampling.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result, RoqError};
use crate::linalg::{weighted_norm_sq, ComplexMatrix, C64};
use crate::quadrature::{legendre_all, QuadratureRule};

/// Softening length of the inverse-distance families.
pub const INV_DIST_SOFTENING: f64 = 0.1;

/// Chirp-mass bounds of the standard waveform band, in solar masses.
pub const MC_LOW_SOLAR: f64 = 2.611651689888372;
pub const MC_HIGH_SOLAR: f64 = 26.11651689888372;
/// Frequency band of the standard waveform family, in Hz.
pub const F_LOW_HZ: f64 = 40.0;
pub const F_HIGH_HZ: f64 = 366.3383434841933;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Newton's constant in m³ kg⁻¹ s⁻².
    pub g: f64,
    /// Speed of light in m/s.
    pub c: f64,
    /// Solar mass in kg.
    pub m_sun: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            g: 6.67384e-11,
            c: 299_792_458.0,
            m_sun: 1.98892e30,
        }
    }
}

impl PhysicalConstants {
    /// `G / c³` in s/kg.
    pub fn time_per_mass(&self) -> f64 {
        self.g / (self.c * self.c * self.c)
    }
}

fn positive(value: f64, what: &str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(RoqError::Domain(format!(
            "{what} must be positive and finite, got {value}"
        )))
    }
}

/// Leading-order stationary-phase waveform in the frequency domain.
pub fn spa_waveform(mc: f64, f: f64, amplitude: f64, constants: &PhysicalConstants) -> Result<C64> {
    positive(f, "frequency")?;
    positive(mc, "chirp mass")?;
    let v = PI * constants.time_per_mass() * f * mc;
    let phase = -PI / 4.0 + 3.0 / 128.0 * v.powf(-5.0 / 3.0);
    Ok(C64::from_polar(amplitude * f.powf(-7.0 / 6.0), phase))
}

pub fn chirp_mass(m1: f64, m2: f64) -> Result<f64> {
    positive(m1, "mass")?;
    positive(m2, "mass")?;
    Ok((m1 * m2).powf(0.6) * (m1 + m2).powf(-0.2))
}

/// Analytic model of the detector noise power spectral density.
pub fn ligo_psd(f: f64) -> Result<f64> {
    positive(f, "frequency")?;
    let y = f / 150.0;
    Ok(9e-46 * ((4.49 * y).powf(-56.0) + 0.16 * y.powf(-4.52) + 0.52 + 0.32 * y * y))
}

/// `{ a (b/a)^{i/(k-1)} : i = 0..k-1 }`.
pub fn log_training_set(a: f64, b: f64, k: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && a < b && b.is_finite()) {
        return Err(RoqError::Argument(format!("need 0 < a < b, got a={a}, b={b}")));
    }
    if k < 2 {
        return Err(RoqError::Argument(format!("training set needs K >= 2, got {k}")));
    }
    let ratio = b / a;
    let last = (k - 1) as f64;
    Ok((0..k)
        .map(|i| match i {
            0 => a,
            i if i == k - 1 => b,
            i => a * ratio.powf(i as f64 / last),
        })
        .collect())
}

/// Number of waveform cycles accumulated between `fmin` and `fmax`.
pub fn n_cycles(mc: f64, fmin: f64, fmax: f64, constants: &PhysicalConstants) -> Result<f64> {
    positive(mc, "chirp mass")?;
    positive(fmin, "frequency")?;
    positive(fmax, "frequency")?;
    if fmin > fmax {
        return Err(RoqError::Argument(format!("fmin {fmin} exceeds fmax {fmax}")));
    }
    let prefactor = (constants.time_per_mass() * mc).powf(-5.0 / 3.0) / (32.0 * PI.powf(8.0 / 3.0));
    Ok(prefactor * (fmin.powf(-5.0 / 3.0) - fmax.powf(-5.0 / 3.0)))
}

/// Pointwise multiplication by `√W`.
pub fn absorb_weight(h: &[C64], weight: &[f64]) -> Result<Vec<C64>> {
    check_len(h.len(), weight.len(), "weight samples")?;
    if let Some(k) = weight.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(RoqError::Domain(format!("weight at node {k} is {}", weight[k])));
    }
    Ok(h.iter().zip(weight).map(|(v, w)| v * w.sqrt()).collect())
}

/// Waveform family over a chirp-mass interval, weighted by the inverse PSD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaFamily {
    pub constants: PhysicalConstants,
    pub f_min: f64,
    pub f_max: f64,
    /// Chirp-mass bounds in kg.
    pub mc_min: f64,
    pub mc_max: f64,
    pub amplitude: f64,
}

impl Default for SpaFamily {
    fn default() -> Self {
        Self::with_constants(PhysicalConstants::default())
    }
}

impl SpaFamily {
    /// The standard 40 Hz band and 3-30 solar-mass equal-mass binaries.
    pub fn with_constants(constants: PhysicalConstants) -> Self {
        SpaFamily {
            constants,
            f_min: F_LOW_HZ,
            f_max: F_HIGH_HZ,
            mc_min: MC_LOW_SOLAR * constants.m_sun,
            mc_max: MC_HIGH_SOLAR * constants.m_sun,
            amplitude: 1.0,
        }
    }

    pub fn training_chirp_masses(&self, k: usize) -> Result<Vec<f64>> {
        log_training_set(self.mc_min, self.mc_max, k)
    }

    /// Per-node factors so a column costs one `sincos` per node.
    pub fn node_factors(&self, frequencies: &[f64]) -> Result<SpaNodeFactors> {
        let tpm = self.constants.time_per_mass();
        let mut modulus = Vec::with_capacity(frequencies.len());
        let mut phase_scale = Vec::with_capacity(frequencies.len());
        for &f in frequencies {
            positive(f, "frequency")?;
            let w = 1.0 / ligo_psd(f)?;
            modulus.push(self.amplitude * f.powf(-7.0 / 6.0) * w.sqrt());
            phase_scale.push(3.0 / 128.0 * (PI * tpm * f).powf(-5.0 / 3.0));
        }
        Ok(SpaNodeFactors { modulus, phase_scale })
    }
}

/// Precomputed `√W(f) A f^{-7/6}` and `(3/128)(π G f / c³)^{-5/3}` at each node.
#[derive(Debug, Clone)]
pub struct SpaNodeFactors {
    pub modulus: Vec<f64>,
    pub phase_scale: Vec<f64>,
}

impl SpaNodeFactors {
    /// Weighted waveform samples for one chirp mass.
    pub fn weighted_waveform(&self, mc: f64) -> Vec<C64> {
        let s = mc.powf(-5.0 / 3.0);
        self.modulus
            .iter()
            .zip(&self.phase_scale)
            .map(|(&a, &q)| C64::from_polar(a, q * s - PI / 4.0))
            .collect()
    }

    /// `Σ_k w_k conj(h_a(f_k)) h_b(f_k)` of the weighted waveforms, using that
    /// only the phase difference enters.
    pub fn pair_integral(&self, mc_a: f64, mc_b: f64, weights: &[f64]) -> C64 {
        let ds = mc_b.powf(-5.0 / 3.0) - mc_a.powf(-5.0 / 3.0);
        self.modulus
            .iter()
            .zip(&self.phase_scale)
            .zip(weights)
            .map(|((&a, &q), &w)| C64::from_polar(w * a * a, q * ds))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum FunctionFamily {
    /// Normalized Legendre polynomials; the parameter is the degree.
    Legendre,
    Runge,
    /// `((x-μ)² + 0.1²)^{-1/2}`.
    InvDist1d,
    /// `((x-μ₁)² + (y-μ₂)² + 0.1²)^{-1/2}`.
    InvDist2d,
    Spa(SpaFamily),
}

pub fn analytic_family(name: &str) -> Result<FunctionFamily> {
    match name {
        "legendre" => Ok(FunctionFamily::Legendre),
        "runge" => Ok(FunctionFamily::Runge),
        "inv_dist_1d" => Ok(FunctionFamily::InvDist1d),
        "inv_dist_2d" => Ok(FunctionFamily::InvDist2d),
        "spa" | "gw" => Ok(FunctionFamily::Spa(SpaFamily::default())),
        other => Err(RoqError::Argument(format!("unknown function family '{other}'"))),
    }
}

impl FunctionFamily {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionFamily::Legendre => "legendre",
            FunctionFamily::Runge => "runge",
            FunctionFamily::InvDist1d => "inv_dist_1d",
            FunctionFamily::InvDist2d => "inv_dist_2d",
            FunctionFamily::Spa(_) => "spa",
        }
    }

    /// Number of spatial dimensions the evaluator expects.
    pub fn spatial_dimension(&self) -> usize {
        match self {
            FunctionFamily::InvDist2d => 2,
            _ => 1,
        }
    }

    /// Parameter box, one interval per parameter component.
    pub fn parameter_domain(&self) -> Vec<(f64, f64)> {
        match self {
            FunctionFamily::Legendre => vec![(0.0, f64::INFINITY)],
            FunctionFamily::Runge => vec![],
            FunctionFamily::InvDist1d => vec![(-0.1, 0.1)],
            FunctionFamily::InvDist2d => vec![(-0.1, 0.1), (-0.1, 0.1)],
            FunctionFamily::Spa(s) => vec![(s.mc_min, s.mc_max)],
        }
    }

    pub fn weight(&self, node: &[f64]) -> Result<f64> {
        match self {
            FunctionFamily::Spa(_) => Ok(1.0 / ligo_psd(node[0])?),
            _ => Ok(1.0),
        }
    }

    /// Unweighted value `h_μ(x)`.
    pub fn evaluate(&self, parameter: &[f64], node: &[f64]) -> Result<C64> {
        self.check_parameter(parameter)?;
        check_len(self.spatial_dimension(), node.len(), "node coordinates")?;
        let x = node[0];
        let real = |v: f64| Ok(C64::new(v, 0.0));
        match self {
            FunctionFamily::Legendre => {
                let l = parameter[0] as usize;
                real(legendre_all(l, x)[l] * ((2 * l + 1) as f64 / 2.0).sqrt())
            }
            FunctionFamily::Runge => real(1.0 / (1.0 + x * x)),
            FunctionFamily::InvDist1d => {
                let d = x - parameter[0];
                real(1.0 / (d * d + INV_DIST_SOFTENING * INV_DIST_SOFTENING).sqrt())
            }
            FunctionFamily::InvDist2d => {
                let (dx, dy) = (x - parameter[0], node[1] - parameter[1]);
                real(1.0 / (dx * dx + dy * dy + INV_DIST_SOFTENING * INV_DIST_SOFTENING).sqrt())
            }
            FunctionFamily::Spa(s) => spa_waveform(parameter[0], x, s.amplitude, &s.constants),
        }
    }

    fn check_parameter(&self, parameter: &[f64]) -> Result<()> {
        let domain = self.parameter_domain();
        check_len(domain.len(), parameter.len(), "parameter components")?;
        for (&p, &(lo, hi)) in parameter.iter().zip(&domain) {
            // log-spaced endpoints can land an ulp outside the box
            let scale = [lo, hi]
                .iter()
                .filter(|v| v.is_finite())
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let slack = 1e-12 * scale;
            if !(p >= lo - slack && p <= hi + slack) {
                return Err(RoqError::Domain(format!(
                    "parameter {p} outside [{lo}, {hi}] for family {}",
                    self.name()
                )));
            }
        }
        if matches!(self, FunctionFamily::Legendre) && parameter[0].fract() != 0.0 {
            return Err(RoqError::Domain(format!(
                "Legendre degree {} is not an integer",
                parameter[0]
            )));
        }
        Ok(())
    }

    /// Weighted samples `√W h_μ` at every node of `rule`.
    pub fn sample_weighted(&self, parameter: &[f64], rule: &QuadratureRule) -> Result<Vec<C64>> {
        self.check_parameter(parameter)?;
        let raw: Vec<C64> = (0..rule.len())
            .map(|k| self.evaluate(parameter, &rule.node(k)))
            .collect::<Result<_>>()?;
        match self {
            FunctionFamily::Spa(_) => {
                let w: Vec<f64> = (0..rule.len())
                    .map(|k| self.weight(&rule.node(k)))
                    .collect::<Result<_>>()?;
                absorb_weight(&raw, &w)
            }
            _ => Ok(raw),
        }
    }
}

/// Training space: weighted samples of many family members on one rule.
#[derive(Debug, Clone)]
pub struct SampledFunctionSet {
    pub family: String,
    pub samples: ComplexMatrix,
    pub parameters: Vec<Vec<f64>>,
    pub rule: QuadratureRule,
    pub normalized: bool,
    /// Discrete norms before normalization.
    pub norms: Vec<f64>,
    pub constants: Option<PhysicalConstants>,
}

impl SampledFunctionSet {
    /// Wraps already-sampled columns, normalizing them if asked.
    pub fn from_columns(
        family: impl Into<String>,
        mut samples: ComplexMatrix,
        parameters: Vec<Vec<f64>>,
        rule: QuadratureRule,
        normalize: bool,
    ) -> Result<Self> {
        check_len(rule.len(), samples.rows(), "sample rows")?;
        check_len(samples.cols(), parameters.len(), "parameter list")?;
        let mut norms = Vec::with_capacity(samples.cols());
        for j in 0..samples.cols() {
            let n = weighted_norm_sq(rule.weights(), samples.column(j)).sqrt();
            if normalize {
                if !(n > 0.0 && n.is_finite()) {
                    return Err(RoqError::DegenerateFunction { index: j });
                }
                samples.column_mut(j).iter_mut().for_each(|z| *z /= n);
            }
            norms.push(n);
        }
        Ok(SampledFunctionSet {
            family: family.into(),
            samples,
            parameters,
            rule,
            normalized: normalize,
            norms,
            constants: None,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.cols() == 0
    }

    /// Metadata as JSON: family, parameters, rule, flags and constants.
    pub fn metadata_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Meta<'a> {
            family: &'a str,
            parameters: &'a [Vec<f64>],
            normalized: bool,
            rule_kind: crate::quadrature::RuleKind,
            rule_nodes: usize,
            rule_domain: &'a [(f64, f64)],
            constants: Option<PhysicalConstants>,
        }
        Ok(serde_json::to_string_pretty(&Meta {
            family: &self.family,
            parameters: &self.parameters,
            normalized: self.normalized,
            rule_kind: self.rule.kind(),
            rule_nodes: self.rule.len(),
            rule_domain: self.rule.domain(),
            constants: self.constants,
        })?)
    }

    /// CSV `node_index,param_index,re,im`.
    pub fn matrix_csv(&self) -> String {
        let mut out = String::from("node_index,param_index,re,im\n");
        for j in 0..self.samples.cols() {
            for (i, z) in self.samples.column(j).iter().enumerate() {
                writeln!(out, "{i},{j},{:.16e},{:.16e}", z.re, z.im).expect("String write");
            }
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::write(dir.join(format!("{stem}.json")), self.metadata_json()?)?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.matrix_csv())?;
        Ok(())
    }
}

/// Samples `family` at `parameters` on `rule`, absorbing the weight and
/// optionally normalizing every column.
pub fn sample_family(
    family: &FunctionFamily,
    parameters: &[Vec<f64>],
    rule: &QuadratureRule,
    normalize: bool,
) -> Result<SampledFunctionSet> {
    if rule.dimension() != family.spatial_dimension() {
        return Err(RoqError::Argument(format!(
            "family {} needs a {}-dimensional rule",
            family.name(),
            family.spatial_dimension()
        )));
    }
    let columns: Vec<Vec<C64>> = match family {
        FunctionFamily::Spa(spa) => {
            for p in parameters {
                family.check_parameter(p)?;
            }
            let factors = spa.node_factors(rule.nodes())?;
            parameters.par_iter().map(|p| factors.weighted_waveform(p[0])).collect()
        }
        _ => parameters
            .par_iter()
            .map(|p| family.sample_weighted(p, rule))
            .collect::<Result<_>>()?,
    };
    let samples = ComplexMatrix::from_columns(rule.len(), &columns)?;
    let mut set =
        SampledFunctionSet::from_columns(family.name(), samples, parameters.to_vec(), rule.clone(), normalize)?;
    if let FunctionFamily::Spa(spa) = family {
        set.constants = Some(spa.constants);
    }
    Ok(set)
}

/// Scalar parameters wrapped as one-component tuples.
pub fn scalar_parameters(values: &[f64]) -> Vec<Vec<f64>> {
    values.iter().map(|&v| vec![v]).collect()
}
