//! Experiment harness: confusion matrices over replicated synthetic
//! datasets, evidence-convergence traces, and per-task timing.
//!
//! Every task in a plan is the triple (true model, replicate, candidate)
//! and derives all of its randomness from the plan's base seed, so a
//! plan's outputs are identical however the task bag is scheduled.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{
    chib_log_evidence, chib_log_evidence_prefix, posterior_model_probs, EvidenceReport,
};
use crate::gibbs::{run_gibbs, ChainConfig};
use crate::model::{CatalogConfig, HyperState, ModelCatalog, ModelSpec};
use crate::oracle::{grid_log_evidence, IntegrationGrid};
use crate::seed::{derive_seed, DOMAIN_CHAIN, DOMAIN_DATA};
use crate::synth::{generate_dataset, TruthConfig};

/// (true model id, replicate index, candidate model id).
pub type TaskKey = (usize, usize, usize);

/// Chain length settings shared by every task of a plan; the per-task
/// seed is derived, never configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub iterations: usize,
    /// Defaults to one tenth of the run when absent.
    #[serde(default)]
    pub burn_in: Option<usize>,
}

impl ChainPlan {
    pub fn to_config(&self, seed: u64) -> ChainConfig {
        ChainConfig {
            iterations: self.iterations,
            burn_in: self.burn_in.unwrap_or(self.iterations / 10),
            seed,
            initial_gamma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub catalog: CatalogConfig,
    pub gamma_x_true: f64,
    pub gamma_e_true: f64,
    pub replicates: usize,
    pub chain: ChainPlan,
    /// True models to generate data from; None means every candidate.
    #[serde(default)]
    pub true_models: Option<Vec<usize>>,
    /// Worker threads; 0 picks the runtime default.
    #[serde(default)]
    pub jobs: usize,
    pub base_seed: u64,
}

impl ExperimentPlan {
    fn truth_for(&self, true_model: usize, replicate: usize) -> TruthConfig {
        TruthConfig {
            gamma_x_true: self.gamma_x_true,
            gamma_e_true: self.gamma_e_true,
            seed: derive_seed(
                self.base_seed,
                &[DOMAIN_DATA, true_model as u64, replicate as u64],
            ),
        }
    }

    fn chain_config_for(&self, true_model: usize, replicate: usize) -> ChainConfig {
        // run_gibbs mixes the candidate id into this seed, completing
        // the (base, true model, replicate, candidate) derivation.
        self.chain.to_config(derive_seed(
            self.base_seed,
            &[DOMAIN_CHAIN, true_model as u64, replicate as u64],
        ))
    }

    /// Resolve and validate against the built catalog; returns the true
    /// model ids in ascending order.
    fn true_ids(&self, catalog: &ModelCatalog) -> Result<Vec<usize>> {
        let mut ids = match &self.true_models {
            Some(list) => {
                let mut ids = list.clone();
                ids.sort_unstable();
                ids.dedup();
                for &id in &ids {
                    if catalog.model(id).is_none() {
                        return Err(Error::config(format!(
                            "plan references true model {id} which is not in the catalog"
                        )));
                    }
                }
                ids
            }
            None => catalog.models().iter().map(|m| m.id()).collect(),
        };
        ids.sort_unstable();
        Ok(ids)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::config("plan needs at least one replicate"));
        }
        self.chain.to_config(0).validate()?;
        TruthConfig {
            gamma_x_true: self.gamma_x_true,
            gamma_e_true: self.gamma_e_true,
            seed: 0,
        }
        .validate()?;
        Ok(())
    }
}

/// One completed evidence computation, flat enough for a CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub true_model: usize,
    pub replicate: usize,
    pub candidate: usize,
    pub log_evidence: f64,
    pub term_likelihood: f64,
    pub term_prior: f64,
    pub term_posterior_density: f64,
    pub gamma_bar_x: f64,
    pub gamma_bar_e: f64,
    pub sample_count: usize,
    pub std_error: f64,
}

impl EvidenceRow {
    fn from_report(true_model: usize, replicate: usize, report: &EvidenceReport) -> Self {
        Self {
            true_model,
            replicate,
            candidate: report.model_id,
            log_evidence: report.log_evidence,
            term_likelihood: report.term_likelihood,
            term_prior: report.term_prior,
            term_posterior_density: report.term_posterior_density,
            gamma_bar_x: report.gamma_bar.gamma_x,
            gamma_bar_e: report.gamma_bar.gamma_e,
            sample_count: report.sample_count,
            std_error: report.std_error,
        }
    }

    pub fn key(&self) -> TaskKey {
        (self.true_model, self.replicate, self.candidate)
    }

    fn to_report(self) -> EvidenceReport {
        EvidenceReport {
            model_id: self.candidate,
            log_evidence: self.log_evidence,
            term_likelihood: self.term_likelihood,
            term_prior: self.term_prior,
            term_posterior_density: self.term_posterior_density,
            gamma_bar: HyperState {
                gamma_x: self.gamma_bar_x,
                gamma_e: self.gamma_bar_e,
            },
            sample_count: self.sample_count,
            std_error: self.std_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    true_ids: Vec<usize>,
    candidate_ids: Vec<usize>,
    /// counts[i][j]: replicates of true_ids[i] that selected
    /// candidate_ids[j]. Every row sums to the replicate count.
    counts: Vec<Vec<usize>>,
    replicates: usize,
}

impl ConfusionMatrix {
    pub fn true_ids(&self) -> &[usize] {
        &self.true_ids
    }

    pub fn candidate_ids(&self) -> &[usize] {
        &self.candidate_ids
    }

    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    /// Row-normalized percentages.
    pub fn percentages(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| 100.0 * c as f64 / self.replicates as f64)
                    .collect()
            })
            .collect()
    }

    /// Fraction of replicates whose selected model is the true one.
    pub fn correct_rate(&self) -> f64 {
        let mut hit = 0usize;
        for (i, &t) in self.true_ids.iter().enumerate() {
            if let Some(j) = self.candidate_ids.iter().position(|&c| c == t) {
                hit += self.counts[i][j];
            }
        }
        hit as f64 / (self.true_ids.len() * self.replicates) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionOutcome {
    pub matrix: ConfusionMatrix,
    /// Every evidence row, sorted by (true model, replicate, candidate).
    pub rows: Vec<EvidenceRow>,
}

fn run_task(plan: &ExperimentPlan, catalog: &ModelCatalog, key: TaskKey) -> Result<EvidenceRow> {
    let (k_true, r, k_cand) = key;
    let inner = || -> Result<EvidenceRow> {
        let true_model = catalog
            .model(k_true)
            .ok_or_else(|| Error::config(format!("true model {k_true} left the catalog")))?;
        let candidate = catalog
            .model(k_cand)
            .ok_or_else(|| Error::config(format!("candidate {k_cand} left the catalog")))?;
        let (_, y) = generate_dataset(true_model, &plan.truth_for(k_true, r))?;
        let chain = run_gibbs(&y, candidate, &plan.chain_config_for(k_true, r))?;
        let report = chib_log_evidence(&y, candidate, &chain)?;
        Ok(EvidenceRow::from_report(k_true, r, &report))
    };
    inner().map_err(|source| Error::Task {
        true_model: k_true,
        replicate: r,
        candidate: k_cand,
        source: Box::new(source),
    })
}

pub(crate) fn worker_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("failed to start {jobs} worker threads: {e}")))
}

/// Run a plan from scratch.
pub fn run_confusion(plan: &ExperimentPlan) -> Result<ConfusionOutcome> {
    run_confusion_resumable(plan, BTreeMap::new(), &|_| Ok(()))
}

/// Run a plan, skipping tasks whose rows are already known. `on_row` is
/// called once per freshly computed row, possibly from worker threads,
/// so callers can journal progress for later resumption.
pub fn run_confusion_resumable(
    plan: &ExperimentPlan,
    completed: BTreeMap<TaskKey, EvidenceRow>,
    on_row: &(dyn Fn(&EvidenceRow) -> Result<()> + Sync),
) -> Result<ConfusionOutcome> {
    plan.validate()?;
    let catalog = plan.catalog.build()?;
    let true_ids = plan.true_ids(&catalog)?;
    let candidate_ids: Vec<usize> = catalog.models().iter().map(|m| m.id()).collect();

    let mut pending = Vec::new();
    for &k in &true_ids {
        for r in 0..plan.replicates {
            for &c in &candidate_ids {
                let key = (k, r, c);
                if !completed.contains_key(&key) {
                    pending.push(key);
                }
            }
        }
    }

    let fresh: Vec<EvidenceRow> = worker_pool(plan.jobs)?.install(|| {
        pending
            .par_iter()
            .map(|&key| {
                let row = run_task(plan, &catalog, key)?;
                on_row(&row)?;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut merged = completed;
    for row in fresh {
        merged.insert(row.key(), row);
    }

    let mut counts = vec![vec![0usize; candidate_ids.len()]; true_ids.len()];
    for (i, &k) in true_ids.iter().enumerate() {
        for r in 0..plan.replicates {
            let reports: Vec<EvidenceReport> = candidate_ids
                .iter()
                .map(|&c| {
                    merged
                        .get(&(k, r, c))
                        .map(|row| row.to_report())
                        .ok_or_else(|| {
                            Error::numerical(format!("missing evidence for ({k}, {r}, {c})"))
                        })
                })
                .collect::<Result<_>>()?;
            let posterior = posterior_model_probs(&reports, catalog.priors())?;
            let j = candidate_ids
                .iter()
                .position(|&c| c == posterior.selected)
                .expect("selected id comes from the candidate list");
            counts[i][j] += 1;
        }
    }
    debug_assert!(counts
        .iter()
        .all(|row| row.iter().sum::<usize>() == plan.replicates));

    Ok(ConfusionOutcome {
        matrix: ConfusionMatrix {
            true_ids: true_ids.clone(),
            candidate_ids,
            counts,
            replicates: plan.replicates,
        },
        rows: merged.into_values().collect(),
    })
}

/// Running evidence estimate at increasing chain-length checkpoints,
/// paired with the grid-integration reference for the same data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    /// Chain length this estimate pretends the run had.
    pub iterations: usize,
    pub retained: usize,
    pub log_evidence: f64,
    pub oracle_log_evidence: f64,
}

pub fn run_convergence_trace(
    y: &[f64],
    model: &ModelSpec,
    config: &ChainConfig,
    checkpoints: &[usize],
    igrid: &IntegrationGrid,
) -> Result<Vec<TracePoint>> {
    if checkpoints.is_empty() {
        return Err(Error::config("convergence trace needs checkpoints"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("checkpoints must be strictly increasing"));
    }
    let last = *checkpoints.last().expect("nonempty");
    if last > config.iterations || checkpoints[0] <= config.burn_in {
        return Err(Error::config(format!(
            "checkpoints must lie in ({}, {}]",
            config.burn_in, config.iterations
        )));
    }
    let oracle_log_evidence = grid_log_evidence(y, model, igrid)?;
    let chain = run_gibbs(y, model, config)?;
    checkpoints
        .iter()
        .map(|&g| {
            let keep = g - config.burn_in;
            let report = chib_log_evidence_prefix(y, model, &chain, keep)?;
            Ok(TracePoint {
                iterations: g,
                retained: keep,
                log_evidence: report.log_evidence,
                oracle_log_evidence,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingRow {
    pub true_model: usize,
    pub replicate: usize,
    pub candidate: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub median_seconds: f64,
    pub p95_seconds: f64,
    pub total_seconds: f64,
}

/// Wall-clock per evidence computation, running the plan's task bag
/// sequentially so measurements do not contend.
pub fn time_report(plan: &ExperimentPlan) -> Result<TimingReport> {
    plan.validate()?;
    let catalog = plan.catalog.build()?;
    let true_ids = plan.true_ids(&catalog)?;
    let candidate_ids: Vec<usize> = catalog.models().iter().map(|m| m.id()).collect();

    let mut rows = Vec::new();
    let mut total = 0.0;
    for &k in &true_ids {
        for r in 0..plan.replicates {
            for &c in &candidate_ids {
                let start = Instant::now();
                run_task(plan, &catalog, (k, r, c))?;
                let seconds = start.elapsed().as_secs_f64();
                total += seconds;
                rows.push(TimingRow {
                    true_model: k,
                    replicate: r,
                    candidate: c,
                    seconds,
                });
            }
        }
    }

    let mut sorted: Vec<f64> = rows.iter().map(|t| t.seconds).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (median_seconds, p95_seconds) = if sorted.is_empty() {
        (0.0, 0.0)
    } else {
        let mid = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        let idx = ((0.95 * sorted.len() as f64).ceil() as usize).max(1) - 1;
        (mid, sorted[idx.min(sorted.len() - 1)])
    };
    Ok(TimingReport {
        rows,
        median_seconds,
        p95_seconds,
        total_seconds: total,
    })
}
