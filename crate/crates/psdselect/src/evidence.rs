//! Marginal likelihood from one chain and posterior model probabilities.
//!
//! The estimator rearranges Bayes' rule at a single evaluation point:
//! log p(y|M) = log p(y|gamma, M) + log p(gamma|M) - log p(gamma|y, M),
//! with the posterior density replaced by a Rao-Blackwellized average of
//! the exact gamma conditionals over the chain's retained sweeps. All
//! sums of densities run in the log domain; per-sample log terms reach
//! magnitude 1e4 on large grids.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{conditional_shape, ChainRecord, GibbsChain};
use crate::model::{self, HyperState, ModelSpec};
use crate::numeric::{gamma_logpdf_unchecked, log_sum_exp_pairwise};
use crate::spectral::Dft;

/// Fewer retained sweeps than this make the density estimate unusable.
pub const MIN_RETAINED: usize = 100;

/// The three log terms of the estimate and their assembly. The identity
/// log_evidence = term_likelihood + term_prior - term_posterior_density
/// holds exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvidenceReport {
    pub model_id: usize,
    pub log_evidence: f64,
    pub term_likelihood: f64,
    pub term_prior: f64,
    pub term_posterior_density: f64,
    /// Evaluation point, normally the retained-sample mean of gamma.
    pub gamma_bar: HyperState,
    pub sample_count: usize,
    /// Blocked standard error of the density term in nats.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelPosterior {
    pub model_ids: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub log_evidences: Vec<f64>,
    /// Winning model id; exact score ties go to the lowest id.
    pub selected: usize,
}

/// Normalized gamma log-density in shape/rate form.
pub fn gamma_logpdf(value: f64, shape: f64, rate: f64) -> Result<f64> {
    if !(value > 0.0 && shape > 0.0 && rate > 0.0) {
        return Err(Error::usage(format!(
            "gamma log-density needs positive value/shape/rate, got {value}, {shape}, {rate}"
        )));
    }
    Ok(gamma_logpdf_unchecked(value, shape, rate))
}

/// Mean of the recorded precisions.
pub fn posterior_mean(records: &[ChainRecord]) -> Result<HyperState> {
    if records.is_empty() {
        return Err(Error::usage("posterior mean of an empty record set"));
    }
    let n = records.len() as f64;
    let state = HyperState {
        gamma_x: records.iter().map(|r| r.gamma.gamma_x).sum::<f64>() / n,
        gamma_e: records.iter().map(|r| r.gamma.gamma_e).sum::<f64>() / n,
    };
    state.validate()?;
    Ok(state)
}

/// Log of the averaged exact gamma conditionals at `at`, and the blocked
/// standard error of that average on the log scale (block length
/// ceil(sqrt(n)), delta method through the log).
pub fn posterior_density_log(
    at: &HyperState,
    records: &[ChainRecord],
    model: &ModelSpec,
) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::usage("posterior density estimate needs samples"));
    }
    at.validate()?;
    let hp = model.hyperprior();
    let pixels = model.grid().len();
    let shape_e = conditional_shape(hp.alpha_e, pixels);
    let shape_x = conditional_shape(hp.alpha_x, pixels);
    let ell: Vec<f64> = records
        .iter()
        .map(|r| {
            gamma_logpdf_unchecked(at.gamma_e, shape_e, hp.beta_e + r.stat_e)
                + gamma_logpdf_unchecked(at.gamma_x, shape_x, hp.beta_x + r.stat_x)
        })
        .collect();
    let n = ell.len();
    let log_density = log_sum_exp_pairwise(&ell) - (n as f64).ln();
    if !log_density.is_finite() {
        return Err(Error::numerical(format!(
            "posterior density estimate is not finite for model {}",
            model.id()
        )));
    }

    let peak = ell.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ell.iter().map(|l| (l - peak).exp()).collect();
    let block = (n as f64).sqrt().ceil() as usize;
    let blocks = n / block;
    let se = if blocks >= 2 {
        let means: Vec<f64> = (0..blocks)
            .map(|i| w[i * block..(i + 1) * block].iter().sum::<f64>() / block as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / blocks as f64;
        let var =
            means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (blocks as f64 - 1.0);
        (var / blocks as f64).sqrt() / grand
    } else {
        f64::INFINITY
    };
    Ok((log_density, se))
}

fn assemble(
    y: &[f64],
    model: &ModelSpec,
    records: &[ChainRecord],
    at: &HyperState,
) -> Result<EvidenceReport> {
    let y_hat = Dft::new(model.grid()).forward_real(y)?;
    let term_likelihood = model::log_likelihood(&y_hat, at, model)?;
    let term_prior = model::log_hyperprior(at, model);
    let (term_posterior_density, std_error) = posterior_density_log(at, records, model)?;
    let log_evidence = term_likelihood + term_prior - term_posterior_density;
    if !log_evidence.is_finite() {
        return Err(Error::numerical(format!(
            "log evidence is not finite for model {}",
            model.id()
        )));
    }
    Ok(EvidenceReport {
        model_id: model.id(),
        log_evidence,
        term_likelihood,
        term_prior,
        term_posterior_density,
        gamma_bar: *at,
        sample_count: records.len(),
        std_error,
    })
}

fn checked_retained<'a>(
    model: &ModelSpec,
    chain: &'a GibbsChain,
    keep: usize,
) -> Result<&'a [ChainRecord]> {
    if chain.model_id() != model.id() {
        return Err(Error::usage(format!(
            "chain was run for model {} but evaluated against model {}",
            chain.model_id(),
            model.id()
        )));
    }
    let retained = chain.retained();
    if keep > retained.len() {
        return Err(Error::usage(format!(
            "requested {keep} retained samples but the chain kept {}",
            retained.len()
        )));
    }
    if keep < MIN_RETAINED {
        return Err(Error::InsufficientSamples {
            retained: keep,
            required: MIN_RETAINED,
        });
    }
    Ok(&retained[..keep])
}

/// Full estimate from all retained sweeps, evaluated at their mean.
pub fn chib_log_evidence(
    y: &[f64],
    model: &ModelSpec,
    chain: &GibbsChain,
) -> Result<EvidenceReport> {
    chib_log_evidence_prefix(y, model, chain, chain.retained().len())
}

/// Estimate from the first `keep` retained sweeps; feeds convergence
/// traces of the running estimate.
pub fn chib_log_evidence_prefix(
    y: &[f64],
    model: &ModelSpec,
    chain: &GibbsChain,
    keep: usize,
) -> Result<EvidenceReport> {
    let records = checked_retained(model, chain, keep)?;
    let at = posterior_mean(records)?;
    assemble(y, model, records, &at)
}

/// Estimate with a caller-chosen evaluation point. The result shifts by
/// Monte-Carlo error only; the identity holds at any interior point.
pub fn chib_log_evidence_at(
    y: &[f64],
    model: &ModelSpec,
    chain: &GibbsChain,
    at: &HyperState,
) -> Result<EvidenceReport> {
    let records = checked_retained(model, chain, chain.retained().len())?;
    assemble(y, model, records, at)
}

/// Softmax over log evidence + log prior, computed against the argmax
/// score so that a common additive shift of the evidences cannot change
/// any output bit.
pub fn posterior_model_probs(reports: &[EvidenceReport], priors: &[f64]) -> Result<ModelPosterior> {
    if reports.is_empty() {
        return Err(Error::usage("posterior over an empty model list"));
    }
    if reports.len() != priors.len() {
        return Err(Error::usage(format!(
            "{} evidence reports but {} prior weights",
            reports.len(),
            priors.len()
        )));
    }
    let sum: f64 = priors.iter().sum();
    if priors
        .iter()
        .any(|&w| w.is_nan() || w < 0.0 || !w.is_finite())
        || (sum - 1.0).abs() > 1e-6
    {
        return Err(Error::usage(format!(
            "prior weights must be nonnegative and sum to 1, got sum {sum}"
        )));
    }
    let mut ids = std::collections::BTreeSet::new();
    for r in reports {
        if !ids.insert(r.model_id) {
            return Err(Error::usage(format!(
                "duplicate evidence report for model {}",
                r.model_id
            )));
        }
    }

    let log_prior: Vec<f64> = priors.iter().map(|w| w.ln()).collect();
    let mut best = 0usize;
    let mut best_score = f64::NEG_INFINITY;
    for (i, r) in reports.iter().enumerate() {
        let score = r.log_evidence + log_prior[i];
        if score > best_score || (score == best_score && r.model_id < reports[best].model_id) {
            best = i;
            best_score = score;
        }
    }
    if !best_score.is_finite() {
        return Err(Error::numerical(
            "no model has a finite posterior score".to_string(),
        ));
    }

    // Differences against the winner, term by term: an exact common
    // shift of the evidences cancels before any rounding can differ.
    let weights: Vec<f64> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            ((r.log_evidence - reports[best].log_evidence) + (log_prior[i] - log_prior[best])).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
    Ok(ModelPosterior {
        model_ids: reports.iter().map(|r| r.model_id).collect(),
        probabilities,
        log_evidences: reports.iter().map(|r| r.log_evidence).collect(),
        selected: reports[best].model_id,
    })
}
