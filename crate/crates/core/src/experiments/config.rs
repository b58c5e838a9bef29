use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, RoqError};
use crate::families::PhysicalConstants;
use crate::hashing::bytes_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LegendreWeights,
    Conditioning,
    Runge,
    Dim1,
    Dim2,
    GwBasis,
    GwProducts,
    GwDeim,
    GwRoq,
    GwValidate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::LegendreWeights,
        ExperimentKind::Conditioning,
        ExperimentKind::Runge,
        ExperimentKind::Dim1,
        ExperimentKind::Dim2,
        ExperimentKind::GwBasis,
        ExperimentKind::GwProducts,
        ExperimentKind::GwDeim,
        ExperimentKind::GwRoq,
        ExperimentKind::GwValidate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LegendreWeights => "legendre_weights",
            ExperimentKind::Conditioning => "conditioning",
            ExperimentKind::Runge => "runge",
            ExperimentKind::Dim1 => "dim1",
            ExperimentKind::Dim2 => "dim2",
            ExperimentKind::GwBasis => "gw_basis",
            ExperimentKind::GwProducts => "gw_products",
            ExperimentKind::GwDeim => "gw_deim",
            ExperimentKind::GwRoq => "gw_roq",
            ExperimentKind::GwValidate => "gw_validate",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| RoqError::Argument(format!("unknown experiment '{name}'")))
    }

    pub fn is_gw(self) -> bool {
        matches!(
            self,
            ExperimentKind::GwBasis
                | ExperimentKind::GwProducts
                | ExperimentKind::GwDeim
                | ExperimentKind::GwRoq
                | ExperimentKind::GwValidate
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleChoice {
    #[serde(alias = "trap")]
    Trapezoid,
    #[serde(alias = "gl")]
    GaussLegendre,
}

impl RuleChoice {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "trap" | "trapezoid" => Ok(RuleChoice::Trapezoid),
            "gl" | "gauss_legendre" => Ok(RuleChoice::GaussLegendre),
            other => Err(RoqError::Argument(format!("unknown rule '{other}' (use gl or trap)"))),
        }
    }
}

/// Settings of one experiment run. `k` counts training samples (or basis
/// functions for the Legendre experiments), `m` counts parent-rule nodes per
/// axis, and `tolerance` bounds the greedy error itself, not its square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub tolerance: f64,
    #[serde(alias = "K")]
    pub k: usize,
    #[serde(alias = "M")]
    pub m: usize,
    pub rule_kind: RuleChoice,
    pub seed_index: usize,
    pub mc_draws: usize,
    /// Samples used for the interpolation-bound checks.
    pub bound_draws: usize,
    pub rng_seed: u64,
    pub output_dir: PathBuf,
    pub constants: PhysicalConstants,
    /// Size of the truncated rule written next to the full one.
    pub m_prime: Option<usize>,
    pub allow_direct_greedy: bool,
}

impl ExperimentConfig {
    /// Full-scale settings for `kind`.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let (tolerance, k, m, rule_kind, mc_draws) = match kind {
            ExperimentKind::LegendreWeights => (1e-12, 24, 1000, RuleChoice::Trapezoid, 1),
            ExperimentKind::Conditioning => (1e-12, 200, 1000, RuleChoice::Trapezoid, 1),
            ExperimentKind::Runge => (1e-12, 80, 400, RuleChoice::GaussLegendre, 1),
            ExperimentKind::Dim1 => (1e-8, 201, 150, RuleChoice::GaussLegendre, 1),
            ExperimentKind::Dim2 => (1e-8, 21, 150, RuleChoice::GaussLegendre, 1),
            ExperimentKind::GwValidate => (1e-6, 3000, 1701, RuleChoice::GaussLegendre, 20_000),
            _ => (1e-6, 3000, 1701, RuleChoice::GaussLegendre, 1000),
        };
        ExperimentConfig {
            experiment: kind,
            tolerance,
            k,
            m,
            rule_kind,
            seed_index: 0,
            mc_draws,
            bound_draws: 1000,
            rng_seed: 20_130_101,
            output_dir: PathBuf::from("out").join(kind.name()),
            constants: PhysicalConstants::default(),
            m_prime: None,
            allow_direct_greedy: false,
        }
    }

    /// Parses a flat JSON object; keys it omits keep the defaults of its experiment.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| RoqError::Argument("config must be a JSON object".into()))?;
        let kind = obj
            .get("experiment")
            .and_then(|v| v.as_str())
            .ok_or_else(|| RoqError::Argument("config needs an \"experiment\" key".into()))?;
        let mut merged = serde_json::to_value(Self::defaults(ExperimentKind::parse(kind)?))?;
        let target = merged.as_object_mut().expect("struct serializes to an object");
        for (key, v) in obj {
            let key = match key.as_str() {
                "K" => "k",
                "M" => "m",
                other => other,
            };
            if key == "constants" {
                if let (Some(dst), Some(src)) = (
                    target.get_mut("constants").and_then(|c| c.as_object_mut()),
                    v.as_object(),
                ) {
                    for (ck, cv) in src {
                        dst.insert(ck.to_lowercase(), cv.clone());
                    }
                    continue;
                }
            }
            target.insert(key.to_string(), v.clone());
        }
        let config: Self = serde_json::from_value(merged)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RoqError::from(e).context(format!("reading {}", path.display())))?;
        Self::from_json(&text).map_err(|e| e.context(format!("parsing {}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(RoqError::Argument(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        for (name, v) in [
            ("k", self.k),
            ("m", self.m),
            ("mc_draws", self.mc_draws),
            ("bound_draws", self.bound_draws),
        ] {
            if v == 0 {
                return Err(RoqError::Argument(format!("{name} must be at least 1")));
            }
        }
        if self.m_prime == Some(0) {
            return Err(RoqError::Argument("m_prime must be at least 1".into()));
        }
        let c = &self.constants;
        if !(c.g > 0.0 && c.c > 0.0 && c.m_sun > 0.0) {
            return Err(RoqError::Argument("physical constants must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring where output goes.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value.as_object_mut().expect("object").remove("output_dir");
        bytes_hash(value.to_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_keeps_defaults() {
        let c = ExperimentConfig::from_json(r#"{"experiment":"gw_basis","K":300,"rule_kind":"gl"}"#).unwrap();
        assert_eq!(c.k, 300);
        assert_eq!(c.m, 1701);
        assert_eq!(c.rule_kind, RuleChoice::GaussLegendre);
        let d = ExperimentConfig::from_json(r#"{"experiment":"runge","rule_kind":"trap","M":10000}"#).unwrap();
        assert_eq!(d.rule_kind, RuleChoice::Trapezoid);
        assert_eq!(d.m, 10000);
    }

    #[test]
    fn constants_are_merged_case_insensitively() {
        let c = ExperimentConfig::from_json(r#"{"experiment":"gw_basis","constants":{"G":6.674e-11}}"#).unwrap();
        assert_eq!(c.constants.g, 6.674e-11);
        assert_eq!(c.constants.c, PhysicalConstants::default().c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"experiment":"dim1","tolerance":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"dim1","mc_draws":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"dim3"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"experiment":"dim1","bogus":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"k":3}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = ExperimentConfig::defaults(ExperimentKind::Dim1);
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.rng_seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
