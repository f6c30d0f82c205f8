//! `ultranet`: classification, embedding and microlocal experiments on
//! sampled Gevrey nets.
//!
//! Exit status: 0 when every check passes, 2 when a check fails, 1 on a
//! usage, configuration or runtime error.

mod config;
mod lemma;
mod plots;
mod report;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ultranet::classify::ClosedForm;
use ultranet::embedding::{Axis, BoundaryRepr, DistributionSpec};
use ultranet::net::{GevreyOrder, Grid};

use config::{ExperimentConfig, LadderSpec, ProductCase, StageKind, StageSpec, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error in {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Library(#[from] ultranet::Error),
    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<RunError>,
    },
}

#[derive(Parser, Debug)]
#[command(name = "ultranet", version, about = "Experiments on generalized Gevrey ultradistributions")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Gevrey order s > 1.
    #[arg(long, global = true)]
    s: Option<f64>,
    /// Grid points per axis.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    /// Finest ladder exponent: ε_j = 2^-j up to this j.
    #[arg(long, global = true)]
    ladder_jmax: Option<i32>,
    /// Direction bins.
    #[arg(long, global = true)]
    bins: Option<usize>,
    #[arg(long, global = true, default_value = "ultranet-out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Distribution: a preset name or a JSON spec; repeatable.
    #[arg(long = "spec", global = true)]
    specs: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Classify closed-form nets, or embedded specs when --spec is given.
    Classify,
    /// Build the mollifier and report moments and transform bounds.
    Mollifier,
    /// Embed specs and write slices.
    Embed,
    /// Global and localized Σ cones.
    Sigma,
    /// Wave front estimates.
    Wavefront,
    /// Check the product wave front theorem for two specs.
    ProductCheck,
    /// Seeded trials of the cone closure formula.
    LemmaTrials {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 64)]
        lemma_bins: usize,
    },
    /// Run a JSON experiment configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn usage(field: &str, reason: impl Into<String>) -> RunError {
    RunError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

fn preset(name: &str) -> Result<DistributionSpec, RunError> {
    let bv = |minus: bool, representation| {
        if minus {
            DistributionSpec::BoundaryValueMinus { location: 0.0, representation }
        } else {
            DistributionSpec::BoundaryValuePlus { location: 0.0, representation }
        }
    };
    Ok(match name {
        "dirac" => DistributionSpec::dirac(&[0.0]),
        "dirac_2d" => DistributionSpec::dirac(&[0.0, 0.0]),
        "heaviside" => DistributionSpec::Heaviside { location: 0.0 },
        "boundary_value_minus" => bv(true, BoundaryRepr::Analytic),
        "boundary_value_minus_mollified" => bv(true, BoundaryRepr::Mollified),
        "boundary_value_plus" => bv(false, BoundaryRepr::Analytic),
        "boundary_value_plus_mollified" => bv(false, BoundaryRepr::Mollified),
        "line_delta_2d" => DistributionSpec::LineDelta2d { axis: Axis::X, offset: 0.0 },
        "line_delta_2d_y" => DistributionSpec::LineDelta2d { axis: Axis::Y, offset: 0.0 },
        "gevrey_bump_function" => DistributionSpec::bump(&[0.0], 1.0),
        "box" => DistributionSpec::box_function(0.0, 0.5),
        s if s.trim_start().starts_with('{') => serde_json::from_str(s).map_err(|e| usage("--spec", e.to_string()))?,
        other => return Err(usage("--spec", format!("unknown preset {other}"))),
    })
}

fn base_config(pipeline: Vec<StageKind>) -> Result<ExperimentConfig, RunError> {
    let text = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "s": 2.0,
        "pipeline": pipeline.into_iter().map(|kind| StageSpec { name: None, grid: None, ladder: None, kind }).collect::<Vec<_>>(),
    });
    ExperimentConfig::from_json(&text.to_string())
}

fn specs(g: &Global) -> Result<Vec<DistributionSpec>, RunError> {
    g.specs.iter().map(|s| preset(s)).collect()
}

fn config_for(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let g = &cli.global;
    let need_specs = |name: &str| -> Result<Vec<DistributionSpec>, RunError> {
        let v = specs(g)?;
        if v.is_empty() {
            return Err(usage("--spec", format!("{name} needs at least one --spec")));
        }
        Ok(v)
    };
    let kind = match &cli.command {
        Command::Run { config } => return ExperimentConfig::from_path(config),
        Command::Classify => {
            let specs = specs(g)?;
            let closed_forms = if specs.is_empty() {
                vec![
                    ClosedForm::ExpNegInv,
                    ClosedForm::One,
                    ClosedForm::Power { p: 3.0 },
                    ClosedForm::ExpGrowthRate,
                    ClosedForm::ExpInv,
                ]
            } else {
                Vec::new()
            };
            StageKind::Classify { closed_forms, specs }
        }
        Command::Mollifier => StageKind::Mollifier,
        Command::Embed => StageKind::Embed { specs: need_specs("embed")? },
        Command::Sigma => StageKind::Sigma { specs: need_specs("sigma")? },
        Command::Wavefront => StageKind::Wavefront {
            specs: need_specs("wavefront")?,
        },
        Command::ProductCheck => {
            let v = specs(g)?;
            let [f, gs] = <[DistributionSpec; 2]>::try_from(v).map_err(|_| usage("--spec", "product-check needs exactly two --spec"))?;
            StageKind::Hormander {
                cases: vec![ProductCase { f, g: gs, expect: None }],
            }
        }
        Command::LemmaTrials { trials, lemma_bins } => StageKind::LemmaTrials {
            trials: *trials,
            seed: None,
            bins: *lemma_bins,
        },
    };
    base_config(vec![kind])
}

/// Applies command-line overrides on top of a parsed configuration.
fn apply_overrides(g: &Global, cfg: &mut ExperimentConfig) -> Result<(), RunError> {
    if let Some(s) = g.s {
        cfg.s = GevreyOrder::new(s).map_err(|e| usage("--s", e.to_string()))?;
    }
    if let Some(b) = g.bins {
        if b < 4 || b % 2 != 0 {
            return Err(usage("--bins", format!("need an even count ≥ 4, got {b}")));
        }
        cfg.bins = b;
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(())
}

/// Writes --grid-n and --ladder-jmax into every stage so the echoed
/// configuration reproduces the run.
fn apply_stage_overrides(g: &Global, cfg: &mut ExperimentConfig) -> Result<(), RunError> {
    if g.grid_n.is_none() && g.ladder_jmax.is_none() {
        return Ok(());
    }
    let resolved = cfg.resolve()?;
    for (st, r) in cfg.pipeline.iter_mut().zip(&resolved) {
        if let Some(n) = g.grid_n {
            st.grid = Some(Grid::new(r.grid.dim(), r.grid.half_length(), n).map_err(|e| usage("--grid-n", e.to_string()))?);
        }
        if let Some(j_max) = g.ladder_jmax {
            let v = r.ladder.values();
            let base = if v.len() > 1 { v[0] / v[1] } else { 2.0 };
            let j_min = (-v[0].ln() / base.ln()).round() as i32;
            let spec = LadderSpec { base, j_min, j_max };
            spec.build().map_err(|e| usage("--ladder-jmax", e.to_string()))?;
            st.ladder = Some(spec);
        }
    }
    Ok(())
}

fn init_threads() -> Result<(), RunError> {
    if let Ok(v) = std::env::var("ULTRANET_THREADS") {
        let n: usize = v.parse().map_err(|_| usage("ULTRANET_THREADS", format!("not a count: {v}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage("ULTRANET_THREADS", e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<bool, RunError> {
    init_threads()?;
    let mut cfg = config_for(cli)?;
    apply_overrides(&cli.global, &mut cfg)?;
    apply_stage_overrides(&cli.global, &mut cfg)?;
    let stages = cfg.resolve()?;
    let outcome = report::run_pipeline(&cfg, &stages, &cli.global.out_dir)?;
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(outcome.passed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("FAILED: one or more checks failed; see {}", report::report_path(&cli.global.out_dir).display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
