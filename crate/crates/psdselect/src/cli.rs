//! Command-line surface.
//!
//! Five commands wire the library into reproducible runs: `generate`
//! synthesizes datasets, `select` ranks the catalog on one observation,
//! `oracle` integrates the evidence by brute force, `confusion` runs the
//! replicated selection experiment, and `trace` exports chain states.
//! Every command reads a JSON config, honors `--seed`/`--jobs`
//! overrides, and writes a manifest beside its outputs. Exit status: 0
//! on success, 1 for configuration or usage problems, 2 for numerical
//! failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::bench::{self, ChainPlan, ExperimentPlan};
use crate::error::{Error, Result};
use crate::evidence::{chib_log_evidence, posterior_model_probs, EvidenceReport};
use crate::gibbs::run_gibbs;
use crate::io;
use crate::model::{CatalogConfig, ModelCatalog, ModelSpec};
use crate::numeric::fmt_g17;
use crate::oracle::{grid_log_evidence, IntegrationGrid};
use crate::spectral::Grid;
use crate::synth::{generate_dataset, TruthConfig};

#[derive(Parser)]
#[command(
    name = "psdselect",
    version,
    about = "Bayesian model selection workbench for image deconvolution"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a ground-truth image and its blurred noisy observation
    Generate(CommonArgs),
    /// Rank every catalog model on one observation
    Select(ObservationArgs),
    /// Integrate one model's evidence by 2-D quadrature
    Oracle(ObservationArgs),
    /// Replicated selection experiment producing a confusion matrix
    Confusion(ConfusionArgs),
    /// Export one chain's per-iteration states, optionally with a
    /// running-evidence trace against the quadrature reference
    Trace(ObservationArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    /// Override the configuration's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 means all cores. Results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ObservationArgs {
    /// Observation image (.f64 file with its JSON sidecar)
    y: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ConfusionArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also re-run the plan sequentially, recording wall-clock per task
    #[arg(long)]
    time: bool,
}

fn default_model_id() -> usize {
    1
}

fn default_gamma_x() -> f64 {
    6.0
}

fn default_gamma_e() -> f64 {
    4.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GenerateConfig {
    catalog: CatalogConfig,
    /// Catalog id the data is drawn from.
    #[serde(default = "default_model_id")]
    true_model: usize,
    #[serde(default = "default_gamma_x")]
    gamma_x_true: f64,
    #[serde(default = "default_gamma_e")]
    gamma_e_true: f64,
    #[serde(default)]
    seed: u64,
    /// Additionally export min-max scaled PGM previews.
    #[serde(default)]
    pgm: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SelectConfig {
    catalog: CatalogConfig,
    chain: ChainPlan,
    #[serde(default)]
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OracleConfig {
    catalog: CatalogConfig,
    #[serde(default = "default_model_id")]
    model: usize,
    #[serde(default)]
    integration: IntegrationGrid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TraceConfig {
    catalog: CatalogConfig,
    #[serde(default = "default_model_id")]
    model: usize,
    chain: ChainPlan,
    #[serde(default)]
    seed: u64,
    /// Chain lengths at which to re-estimate the evidence; enables the
    /// trace.csv output and the quadrature column.
    #[serde(default)]
    checkpoints: Option<Vec<usize>>,
    #[serde(default)]
    integration: IntegrationGrid,
}

/// Process exit status for the binary; clap's help and version paths
/// keep their conventional success code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Confusion(args) => cmd_confusion(&args),
        Command::Trace(args) => cmd_trace(&args),
    }
}

fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::config(format!("{}: {e}", dir.display())))
}

fn manifest<C: Serialize>(command: &str, config: &C) -> Result<serde_json::Value> {
    Ok(serde_json::json!({
        "artifact": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": serde_json::to_value(config)?,
    }))
}

fn lookup_model(catalog: &ModelCatalog, id: usize) -> Result<&ModelSpec> {
    catalog
        .model(id)
        .ok_or_else(|| Error::config(format!("model {id} is not in the catalog")))
}

fn check_grid(observed: Grid, catalog: &CatalogConfig) -> Result<()> {
    let expected = catalog.grid()?;
    if observed != expected {
        return Err(Error::config(format!(
            "observation is {}x{} but the catalog expects {}x{}",
            observed.width(),
            observed.height(),
            expected.width(),
            expected.height()
        )));
    }
    Ok(())
}

fn cmd_generate(args: &CommonArgs) -> Result<()> {
    let mut config: GenerateConfig = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let catalog = config.catalog.build()?;
    let model = lookup_model(&catalog, config.true_model)?;
    let truth = TruthConfig {
        gamma_x_true: config.gamma_x_true,
        gamma_e_true: config.gamma_e_true,
        seed: config.seed,
    };
    let (x, y) = generate_dataset(model, &truth)?;

    ensure_out(&args.out)?;
    let grid = model.grid();
    io::write_image(&args.out, "x", grid, &x, "image")?;
    io::write_image(&args.out, "y", grid, &y, "observation")?;
    if config.pgm {
        io::write_pgm(&args.out.join("x.pgm"), grid, &x)?;
        io::write_pgm(&args.out.join("y.pgm"), grid, &y)?;
    }
    io::write_manifest(&args.out, &manifest("generate", &config)?)?;
    println!(
        "generated {}x{} dataset from model {} into {}",
        grid.width(),
        grid.height(),
        model.id(),
        args.out.display()
    );
    Ok(())
}

/// One chain and one evidence report per candidate; the shared seed is
/// split per model inside the sampler.
fn run_selection(
    y: &[f64],
    catalog: &ModelCatalog,
    chain: &ChainPlan,
    seed: u64,
    jobs: usize,
) -> Result<Vec<EvidenceReport>> {
    bench::worker_pool(jobs)?.install(|| {
        catalog
            .models()
            .par_iter()
            .map(|model| {
                let chain = run_gibbs(y, model, &chain.to_config(seed))?;
                chib_log_evidence(y, model, &chain)
            })
            .collect()
    })
}

fn cmd_select(args: &ObservationArgs) -> Result<()> {
    let mut config: SelectConfig = load_config(&args.common.config)?;
    if let Some(seed) = args.common.seed {
        config.seed = seed;
    }
    let catalog = config.catalog.build()?;
    let (grid, y, _) = io::read_image(&args.y)?;
    check_grid(grid, &config.catalog)?;

    let jobs = args.common.jobs.unwrap_or(0);
    let reports = run_selection(&y, &catalog, &config.chain, config.seed, jobs)?;
    let posterior = posterior_model_probs(&reports, catalog.priors())?;

    ensure_out(&args.common.out)?;
    io::write_report_csv(&args.common.out.join("evidences.csv"), &reports)?;
    io::write_posterior_csv(&args.common.out.join("posterior.csv"), &posterior)?;
    io::write_manifest(&args.common.out, &manifest("select", &config)?)?;

    let best = posterior
        .model_ids
        .iter()
        .position(|&id| id == posterior.selected)
        .expect("selected id is listed");
    println!(
        "selected model {} with posterior probability {:.4}",
        posterior.selected, posterior.probabilities[best]
    );
    Ok(())
}

fn cmd_oracle(args: &ObservationArgs) -> Result<()> {
    let config: OracleConfig = load_config(&args.common.config)?;
    let catalog = config.catalog.build()?;
    let model = lookup_model(&catalog, config.model)?;
    let (grid, y, _) = io::read_image(&args.y)?;
    check_grid(grid, &config.catalog)?;

    let value = grid_log_evidence(&y, model, &config.integration)?;
    ensure_out(&args.common.out)?;
    io::write_oracle_csv(&args.common.out.join("oracle.csv"), model.id(), value)?;
    io::write_manifest(&args.common.out, &manifest("oracle", &config)?)?;
    println!("model {} log evidence {}", model.id(), fmt_g17(value));
    Ok(())
}

fn cmd_confusion(args: &ConfusionArgs) -> Result<()> {
    let mut plan: ExperimentPlan = load_config(&args.common.config)?;
    if let Some(seed) = args.common.seed {
        plan.base_seed = seed;
    }
    if let Some(jobs) = args.common.jobs {
        plan.jobs = jobs;
    }

    ensure_out(&args.common.out)?;
    let journal = io::EvidenceJournal::new(args.common.out.join("evidence_log.csv"));
    let completed = journal.load()?;
    let resumed = completed.len();
    let journal = Mutex::new(journal);
    let outcome = bench::run_confusion_resumable(&plan, completed, &|row| {
        journal.lock().expect("journal lock").append(row)
    })?;

    io::write_evidence_rows_csv(&args.common.out.join("evidences.csv"), &outcome.rows)?;
    io::write_confusion_csv(&args.common.out.join("confusion.csv"), &outcome.matrix)?;
    if args.time {
        let timing = bench::time_report(&plan)?;
        io::write_timing_csv(&args.common.out.join("timing.csv"), &timing)?;
        println!(
            "timing over {} tasks: median {:.3} s, p95 {:.3} s, total {:.3} s",
            timing.rows.len(),
            timing.median_seconds,
            timing.p95_seconds,
            timing.total_seconds
        );
    }
    io::write_manifest(&args.common.out, &manifest("confusion", &plan)?)?;

    if resumed > 0 {
        println!("resumed past {resumed} journaled evidences");
    }
    println!(
        "{} evidences, correct selection rate {:.1}%",
        outcome.rows.len(),
        100.0 * outcome.matrix.correct_rate()
    );
    Ok(())
}

fn cmd_trace(args: &ObservationArgs) -> Result<()> {
    let mut config: TraceConfig = load_config(&args.common.config)?;
    if let Some(seed) = args.common.seed {
        config.seed = seed;
    }
    let catalog = config.catalog.build()?;
    let model = lookup_model(&catalog, config.model)?;
    let (grid, y, _) = io::read_image(&args.y)?;
    check_grid(grid, &config.catalog)?;

    let chain_config = config.chain.to_config(config.seed);
    let chain = run_gibbs(&y, model, &chain_config)?;
    ensure_out(&args.common.out)?;
    io::write_chain_csv(&args.common.out.join("chain.csv"), &chain)?;
    if let Some(checkpoints) = &config.checkpoints {
        let points = bench::run_convergence_trace(
            &y,
            model,
            &chain_config,
            checkpoints,
            &config.integration,
        )?;
        io::write_trace_csv(&args.common.out.join("trace.csv"), &points)?;
    }
    io::write_manifest(&args.common.out, &manifest("trace", &config)?)?;
    println!(
        "traced {} iterations of model {} ({} retained)",
        chain.records().len(),
        model.id(),
        chain.retained().len()
    );
    Ok(())
}
