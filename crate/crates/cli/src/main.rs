use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use roq_core::experiments::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport};
use serde_json::{Map, Value};

/// Builds reduced order quadrature rules and checks them against their
/// reference experiments.
///
/// Exit status: 0 when every hard check passes, 1 when one fails, 2 on errors.
#[derive(Debug, Parser)]
#[command(name = "roq-kit", version)]
struct Cli {
    /// legendre_weights, conditioning, runge, dim1, dim2, gw_basis,
    /// gw_products, gw_deim, gw_roq or gw_validate
    experiment: String,

    /// JSON config; keys it leaves out take the experiment's defaults
    #[arg(long)]
    config: Option<PathBuf>,

    /// Greedy stopping tolerance on the projection error σ (not σ²)
    #[arg(long)]
    tolerance: Option<f64>,

    /// Training-set size (parameter samples per axis)
    #[arg(long = "k", short = 'k')]
    k: Option<usize>,

    /// Parent rule size (per axis)
    #[arg(long = "m", short = 'm')]
    m: Option<usize>,

    /// Also write the ROQ truncated to this many nodes
    #[arg(long)]
    m_prime: Option<usize>,

    /// Parent rule: gl or trap
    #[arg(long)]
    rule: Option<String>,

    /// Training index the greedy starts from
    #[arg(long)]
    seed_index: Option<usize>,

    /// Random pairs for the Monte Carlo validation
    #[arg(long)]
    mc_draws: Option<usize>,

    /// Random samples for the error-bound ordering checks
    #[arg(long)]
    bound_draws: Option<usize>,

    #[arg(long)]
    rng_seed: Option<u64>,

    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// Run the direct product greedy next to the two-step one
    #[arg(long)]
    allow_direct_greedy: bool,

    /// Print the full report as JSON instead of the summary
    #[arg(long)]
    json: bool,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig> {
        let kind = ExperimentKind::parse(&self.experiment)?;
        let mut obj = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))? {
                    Value::Object(map) => map,
                    _ => bail!("{} must hold a JSON object", path.display()),
                }
            }
            None => Map::new(),
        };
        if let Some(Value::String(named)) = obj.get("experiment") {
            if ExperimentKind::parse(named)? != kind {
                bail!("config names experiment '{named}' but '{}' was requested", kind.name());
            }
        }
        obj.insert("experiment".into(), kind.name().into());
        let mut set = |key: &str, v: Value| {
            // CLI flags win over the file, including its K/M spellings
            obj.remove(&key.to_uppercase());
            obj.insert(key.into(), v);
        };
        if let Some(v) = self.tolerance {
            set("tolerance", v.into());
        }
        if let Some(v) = self.k {
            set("k", v.into());
        }
        if let Some(v) = self.m {
            set("m", v.into());
        }
        if let Some(v) = self.m_prime {
            set("m_prime", v.into());
        }
        if let Some(v) = &self.rule {
            let rule = roq_core::experiments::RuleChoice::parse(v)?;
            set("rule_kind", serde_json::to_value(rule)?);
        }
        if let Some(v) = self.seed_index {
            set("seed_index", v.into());
        }
        if let Some(v) = self.mc_draws {
            set("mc_draws", v.into());
        }
        if let Some(v) = self.bound_draws {
            set("bound_draws", v.into());
        }
        if let Some(v) = self.rng_seed {
            set("rng_seed", v.into());
        }
        if let Some(v) = &self.out {
            set("output_dir", v.to_string_lossy().into_owned().into());
        }
        if self.allow_direct_greedy {
            set("allow_direct_greedy", true.into());
        }
        Ok(ExperimentConfig::from_json(&Value::Object(obj).to_string())?)
    }
}

fn print_summary(report: &ExperimentReport) {
    println!("experiment   {}", report.experiment.name());
    println!("config_hash  {}", report.config_hash);
    println!("output       {}", report.config.output_dir.display());
    for c in &report.criteria {
        let status = match (c.passed, c.hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        println!("{status}  {:<34} {:<14.6e} {}", c.name, c.value, c.threshold);
    }
    for (name, value) in &report.metrics {
        println!("      {name:<34} {value:.6e}");
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
    println!("elapsed      {:.1} s", report.elapsed_seconds);
    println!(
        "{}",
        if report.passed {
            "all checks passed"
        } else {
            "some checks FAILED"
        }
    );
}

fn run(cli: &Cli) -> Result<bool> {
    let config = cli.config()?;
    let report = run_experiment(&config)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_summary(&report);
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
