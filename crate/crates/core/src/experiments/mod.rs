//! Experiment drivers, artifact output and the pass/fail summary.

mod analytic;
pub mod config;
pub mod fit;
mod gw;
pub mod montecarlo;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Result, RoqError};
use crate::quadrature::{gauss_legendre_on, trapezoidal_rule, QuadratureRule};

pub use analytic::{inv_dist_integral_1d, inv_dist_integral_2d, legendre_basis};
pub use config::{ExperimentConfig, ExperimentKind, RuleChoice};
pub use fit::{fit_decay_tail, fit_exponential_decay, fit_exponential_decay_range, DecayFit, TailFit};
pub use gw::RESAMPLED_TRAPEZOID_NODES;
pub use montecarlo::{
    monte_carlo_validate, reference_pairs, validate_on_pairs, NestedRoq, ValidationOptions, ValidationReport,
    ValidationRow,
};

/// One checked threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub passed: bool,
    /// Soft checks only warn.
    pub hard: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
    pub metrics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    pub elapsed_seconds: f64,
}

impl ExperimentReport {
    pub fn criterion(&self, name: &str) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

/// Output directory plus the bookkeeping every driver shares.
pub(crate) struct Run {
    pub config: ExperimentConfig,
    pub hash: String,
    pub dir: PathBuf,
    criteria: Vec<CriterionResult>,
    metrics: BTreeMap<String, f64>,
    warnings: Vec<String>,
    files: Vec<String>,
}

impl Run {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&config.output_dir)
            .map_err(|e| RoqError::from(e).context(format!("creating {}", config.output_dir.display())))?;
        Ok(Run {
            config: config.clone(),
            hash: config.hash(),
            dir: config.output_dir.clone(),
            criteria: Vec::new(),
            metrics: BTreeMap::new(),
            warnings: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn check(&mut self, name: &str, value: f64, threshold: impl Into<String>, passed: bool) {
        self.criteria.push(CriterionResult {
            name: name.into(),
            value,
            threshold: threshold.into(),
            passed,
            hard: true,
        });
    }

    pub fn soft_check(&mut self, name: &str, value: f64, threshold: impl Into<String>, passed: bool) {
        let threshold = threshold.into();
        if !passed {
            self.warnings.push(format!("{name}: {value:e} outside {threshold}"));
        }
        self.criteria.push(CriterionResult {
            name: name.into(),
            value,
            threshold,
            passed,
            hard: false,
        });
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    /// Records files written by a module writer under `stem`.
    pub fn wrote(&mut self, names: &[String]) {
        self.files.extend(names.iter().cloned());
    }

    /// Writes a CSV whose first line carries the config hash.
    pub fn csv(&mut self, name: &str, header: &str, body: &str) -> Result<()> {
        let text = format!("# config_hash={}\n{header}\n{body}", self.hash);
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            config_hash: &'a str,
            #[serde(flatten)]
            value: &'a T,
        }
        let text = serde_json::to_string_pretty(&Wrapped {
            config_hash: &self.hash,
            value,
        })?;
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn rule(&mut self, name: &str, rule: &QuadratureRule) -> Result<()> {
        let text = format!("# config_hash={}\n{}", self.hash, rule.to_csv());
        std::fs::write(self.dir.join(name), text)?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn write_basis(&mut self, basis: &crate::greedy::ReducedBasis, stem: &str) -> Result<()> {
        basis.write(&self.dir, stem, &self.hash)?;
        self.wrote(&written(stem, &[".json", "_basis.csv", "_greedy.csv"]));
        Ok(())
    }

    pub fn write_eim(&mut self, eim: &crate::eim::EimOperator, stem: &str) -> Result<()> {
        eim.write(&self.dir, stem, &self.hash)?;
        self.wrote(&written(stem, &[".json", "_triangular.csv"]));
        Ok(())
    }

    pub fn write_roq(&mut self, roq: &crate::roq::RoqRule, stem: &str) -> Result<()> {
        roq.write(&self.dir, stem, &self.hash)?;
        self.wrote(&written(stem, &[".json", ".csv"]));
        Ok(())
    }

    fn finish(self, elapsed: f64) -> Result<ExperimentReport> {
        let passed = self.criteria.iter().all(|c| c.passed || !c.hard);
        let mut files = self.files;
        files.push("report.json".into());
        let report = ExperimentReport {
            experiment: self.config.experiment,
            config_hash: self.hash,
            config: self.config,
            passed,
            criteria: self.criteria,
            metrics: self.metrics,
            warnings: self.warnings,
            files,
            elapsed_seconds: elapsed,
        };
        std::fs::write(self.dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        Ok(report)
    }
}

fn written(stem: &str, suffixes: &[&str]) -> Vec<String> {
    suffixes.iter().map(|s| format!("{stem}{s}")).collect()
}

/// Parent rule of the configured kind with `m` nodes on `[a, b]`.
pub fn parent_rule(kind: RuleChoice, a: f64, b: f64, m: usize) -> Result<QuadratureRule> {
    match kind {
        RuleChoice::Trapezoid => trapezoidal_rule(a, b, m),
        RuleChoice::GaussLegendre => gauss_legendre_on(a, b, m),
    }
}

/// Runs one experiment end to end, writing its artifacts and `report.json`
/// into `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let mut run = Run::new(config)?;
    let outcome = match config.experiment {
        ExperimentKind::LegendreWeights => analytic::legendre_weights(&mut run),
        ExperimentKind::Conditioning => analytic::conditioning(&mut run),
        ExperimentKind::Runge => analytic::runge(&mut run),
        ExperimentKind::Dim1 => analytic::inverse_distance(&mut run, 1),
        ExperimentKind::Dim2 => analytic::inverse_distance(&mut run, 2),
        kind => gw::run(&mut run, kind),
    };
    outcome.map_err(|e| e.context(format!("experiment {}", config.experiment.name())))?;
    run.finish(start.elapsed().as_secs_f64())
}

/// Reads a `report.json` back.
pub fn read_report_value(dir: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(dir.join("report.json"))?;
    Ok(serde_json::from_str(&text)?)
}
