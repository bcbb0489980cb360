//! Acceptance gate. One test per numbered criterion; each prints a single
//! pass/fail line (visible with `--nocapture`) and asserts the bound.
//! A shared lock serializes the tests so the timed criteria always see an
//! otherwise idle process, whatever the test-thread count.

use std::sync::{Mutex, MutexGuard, PoisonError};
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use psdselect::bench::{
    run_confusion, run_convergence_trace, time_report, ChainPlan, ExperimentPlan,
};
use psdselect::evidence::{chib_log_evidence, posterior_model_probs, EvidenceReport};
use psdselect::gibbs::{
    run_gibbs, sample_gamma_e, sample_gamma_x, sample_x_conditional, ChainConfig,
};
use psdselect::io::{write_confusion_csv, write_evidence_rows_csv};
use psdselect::model::{log_likelihood, CatalogConfig, HyperPrior, HyperState, ModelSpec};
use psdselect::oracle::{dense_gaussian_logpdf, grid_log_evidence, IntegrationGrid};
use psdselect::psd::{evaluate_psd, BlurTransfer, PsdFamily, PsdKind};
use psdselect::spectral::{check_hermitian, Dft, Grid};
use psdselect::synth::{generate_dataset, TruthConfig};

static GATE: Mutex<()> = Mutex::new(());

const KINDS: [PsdFamily; 4] = [
    PsdFamily::Lorentz,
    PsdFamily::Gauss,
    PsdFamily::Laplace,
    PsdFamily::White,
];

fn gate() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(PoisonError::into_inner)
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn report(criterion: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("acceptance {criterion}: pass ({detail})"),
        Err(detail) => {
            println!("acceptance {criterion}: FAIL ({detail})");
            panic!("acceptance {criterion} failed: {detail}");
        }
    }
}

/// Full 4x4 candidate catalog at the benchmark blur width. Width 2.0 is a
/// genuine half-band low-pass; the unit-width default is the identity on
/// the integer lattice, under which (K image, White noise) and
/// (White image, K noise) have identical evidences by symmetry.
fn benchmark_catalog(width: usize, height: usize) -> CatalogConfig {
    CatalogConfig {
        width,
        height,
        image_kinds: KINDS.iter().map(|&k| PsdKind::new(k)).collect(),
        noise_kinds: KINDS.iter().map(|&k| PsdKind::new(k)).collect(),
        blur_width: 2.0,
        blur_psf: None,
        hyperprior: HyperPrior::default(),
    }
}

fn single_model(
    id: usize,
    image: PsdKind,
    noise: PsdKind,
    blur_width: f64,
    grid: Grid,
) -> Result<ModelSpec, String> {
    let blur = if blur_width == 1.0 {
        BlurTransfer::identity(grid)
    } else {
        BlurTransfer::sinc(blur_width, grid).map_err(s)?
    };
    ModelSpec::new(
        id,
        evaluate_psd(image, grid).map_err(s)?,
        evaluate_psd(noise, grid).map_err(s)?,
        blur,
        HyperPrior::default(),
        grid,
    )
    .map_err(s)
}

#[test]
fn c1_spectral_likelihood_matches_dense_reference() {
    let _gate = gate();
    let started = Instant::now();
    let outcome = (|| {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x0AC1);
        let mut worst: f64 = 0.0;
        let mut checks = 0usize;
        for &(w, h) in &[(4usize, 4usize), (8usize, 8usize)] {
            let grid = Grid::new(w, h).map_err(s)?;
            let dft = Dft::new(grid);
            for (i, &ik) in KINDS.iter().enumerate() {
                for (j, &nk) in KINDS.iter().enumerate() {
                    // omega 0.25 keeps every family's spectrum well inside
                    // f64 range on these tiny grids, so the dense Cholesky
                    // reference stays well conditioned.
                    let model = single_model(
                        i * KINDS.len() + j + 1,
                        PsdKind::with_omega(ik, 0.25),
                        PsdKind::with_omega(nk, 0.25),
                        1.5,
                        grid,
                    )?;
                    for _ in 0..5 {
                        let gamma =
                            HyperState::new(rng.random_range(0.5..4.0), rng.random_range(0.5..4.0))
                                .map_err(s)?;
                        let y: Vec<f64> = (0..grid.len())
                            .map(|_| rng.random_range(-1.0..1.0))
                            .collect();
                        let dense = dense_gaussian_logpdf(&y, &model, &gamma).map_err(s)?;
                        let y_hat = dft.forward_real(&y).map_err(s)?;
                        let spectral = log_likelihood(&y_hat, &gamma, &model).map_err(s)?;
                        let rel = ((dense - spectral) / dense).abs();
                        worst = worst.max(rel);
                        checks += 1;
                        if rel > 1e-8 {
                            return Err(format!(
                                "model ({ik:?} image, {nk:?} noise) on {w}x{h}: \
                                 dense {dense:.12} vs spectral {spectral:.12}, rel err {rel:.3e}"
                            ));
                        }
                    }
                }
            }
        }
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= 10.0 {
            return Err(format!("took {elapsed:.1} s, budget 10 s"));
        }
        Ok(format!(
            "max rel err {worst:.2e} over {checks} draws, {elapsed:.1} s"
        ))
    })();
    report(
        "criterion 1 (spectral likelihood vs dense reference)",
        outcome,
    );
}

#[test]
fn c2_chib_estimate_matches_quadrature_and_stabilizes() {
    let _gate = gate();
    let started = Instant::now();
    let outcome = (|| {
        let grid = Grid::new(32, 32).map_err(s)?;
        let igrid = IntegrationGrid::default();
        let mut max_gap: f64 = 0.0;
        let mut first: Option<(Vec<f64>, ModelSpec)> = None;
        for (k, &ik) in KINDS.iter().enumerate() {
            let model = single_model(
                k + 1,
                PsdKind::new(ik),
                PsdKind::new(PsdFamily::White),
                2.0,
                grid,
            )?;
            let truth = TruthConfig {
                gamma_x_true: 6.0,
                gamma_e_true: 4.0,
                seed: 9000 + k as u64,
            };
            let (_x, y) = generate_dataset(&model, &truth).map_err(s)?;
            let oracle = grid_log_evidence(&y, &model, &igrid).map_err(s)?;
            let chain = run_gibbs(&y, &model, &ChainConfig::new(5000, 71 + k as u64)).map_err(s)?;
            let estimate = chib_log_evidence(&y, &model, &chain)
                .map_err(s)?
                .log_evidence;
            let gap = (estimate - oracle).abs();
            max_gap = max_gap.max(gap);
            if gap > 1.0 {
                return Err(format!(
                    "{ik:?}-image model: sampler estimate {estimate:.3} vs quadrature \
                     {oracle:.3}, gap {gap:.3} nats"
                ));
            }
            if first.is_none() {
                first = Some((y, model));
            }
        }
        // Running estimate on one model: past ~10^3 sweeps the prefix
        // estimates must stay inside a 0.5 nat band.
        let (y, model) = first.expect("loop ran");
        let mut checkpoints = vec![1100];
        checkpoints.extend((3..=20).map(|k| k * 500));
        let points = run_convergence_trace(
            &y,
            &model,
            &ChainConfig::new(10_000, 404),
            &checkpoints,
            &igrid,
        )
        .map_err(s)?;
        let lo = points
            .iter()
            .map(|p| p.log_evidence)
            .fold(f64::INFINITY, f64::min);
        let hi = points
            .iter()
            .map(|p| p.log_evidence)
            .fold(f64::NEG_INFINITY, f64::max);
        if hi - lo >= 0.5 {
            return Err(format!(
                "running estimate wanders {:.3} nats over sweeps {}..={}",
                hi - lo,
                checkpoints.first().unwrap(),
                checkpoints.last().unwrap()
            ));
        }
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= 120.0 {
            return Err(format!("took {elapsed:.1} s, budget 120 s"));
        }
        Ok(format!(
            "max |estimate - quadrature| {max_gap:.3} nats at 5000 sweeps, \
             running-band {:.3} nats past 1100, {elapsed:.1} s",
            hi - lo
        ))
    })();
    report(
        "criterion 2 (evidence vs quadrature, stabilization)",
        outcome,
    );
}

#[test]
fn c3_desk_scale_confusion_recovers_true_models() {
    let _gate = gate();
    let started = Instant::now();
    let outcome = (|| {
        let plan = ExperimentPlan {
            catalog: benchmark_catalog(64, 64),
            gamma_x_true: 6.0,
            gamma_e_true: 4.0,
            replicates: 10,
            chain: ChainPlan {
                iterations: 4000,
                burn_in: None,
            },
            // One true model per image kind, White noise: ids 4, 8, 12, 16
            // in the image-major catalog order.
            true_models: Some(vec![4, 8, 12, 16]),
            jobs: 4,
            base_seed: 20260814,
        };
        let outcome = run_confusion(&plan).map_err(s)?;
        if let Some(bad) = outcome.rows.iter().find(|r| !r.log_evidence.is_finite()) {
            return Err(format!(
                "non-finite evidence for true model {} replicate {} candidate {}",
                bad.true_model, bad.replicate, bad.candidate
            ));
        }
        let rate = outcome.matrix.correct_rate();
        if rate < 0.80 {
            return Err(format!("correct-selection rate {:.1}%", rate * 100.0));
        }
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= 1800.0 {
            return Err(format!("took {elapsed:.0} s, budget 1800 s"));
        }
        Ok(format!(
            "correct-selection rate {:.1}% over {} evidences, {elapsed:.0} s",
            rate * 100.0,
            outcome.rows.len()
        ))
    })();
    report("criterion 3 (desk-scale confusion accuracy)", outcome);
}

/// Histogram unimodality after light smoothing: exactly one interior
/// maximum above a tenth of the mode.
fn unimodal(samples: &[f64], bins: usize) -> bool {
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return true;
    }
    let mut counts = vec![0.0f64; bins];
    for &v in samples {
        let i = (((v - min) / (max - min)) * bins as f64) as usize;
        counts[i.min(bins - 1)] += 1.0;
    }
    let smooth: Vec<f64> = (0..bins)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(bins - 1);
            counts[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let peak = smooth.iter().cloned().fold(0.0, f64::max);
    let mut modes = 0usize;
    for i in 0..bins {
        let left = if i == 0 {
            f64::NEG_INFINITY
        } else {
            smooth[i - 1]
        };
        let right = if i + 1 == bins {
            f64::NEG_INFINITY
        } else {
            smooth[i + 1]
        };
        if smooth[i] > left && smooth[i] >= right && smooth[i] > 0.1 * peak {
            modes += 1;
        }
    }
    modes == 1
}

#[test]
fn c4_chain_recovers_generating_precisions() {
    let _gate = gate();
    let started = Instant::now();
    let outcome = (|| {
        let grid = Grid::new(128, 128).map_err(s)?;
        let model = single_model(
            4,
            PsdKind::new(PsdFamily::Lorentz),
            PsdKind::new(PsdFamily::White),
            2.0,
            grid,
        )?;
        let truth = TruthConfig {
            gamma_x_true: 6.0,
            gamma_e_true: 4.0,
            seed: 128_128,
        };
        let (_x, y) = generate_dataset(&model, &truth).map_err(s)?;
        let chain = run_gibbs(&y, &model, &ChainConfig::new(10_000, 77)).map_err(s)?;
        let kept = chain.retained();
        let n = kept.len() as f64;
        let mean_x = kept.iter().map(|r| r.gamma.gamma_x).sum::<f64>() / n;
        let mean_e = kept.iter().map(|r| r.gamma.gamma_e).sum::<f64>() / n;
        let err_x = (mean_x - 6.0).abs() / 6.0;
        let err_e = (mean_e - 4.0).abs() / 4.0;
        if err_x > 0.25 || err_e > 0.25 {
            return Err(format!(
                "post-burn-in means ({mean_x:.3}, {mean_e:.3}) vs truth (6, 4): \
                 off by {:.0}% / {:.0}%",
                err_x * 100.0,
                err_e * 100.0
            ));
        }
        let xs: Vec<f64> = kept.iter().map(|r| r.gamma.gamma_x).collect();
        let es: Vec<f64> = kept.iter().map(|r| r.gamma.gamma_e).collect();
        if !unimodal(&xs, 20) || !unimodal(&es, 20) {
            return Err("posterior histogram is multimodal".into());
        }
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= 30.0 {
            return Err(format!("took {elapsed:.1} s, budget 30 s"));
        }
        Ok(format!(
            "means ({mean_x:.3}, {mean_e:.3}) vs truth (6, 4), unimodal histograms, {elapsed:.1} s"
        ))
    })();
    report("criterion 4 (precision recovery at 128x128)", outcome);
}

#[test]
fn c5_sixteen_candidate_selection_fits_time_budget() {
    let _gate = gate();
    let outcome = (|| {
        let plan = ExperimentPlan {
            catalog: benchmark_catalog(128, 128),
            gamma_x_true: 6.0,
            gamma_e_true: 4.0,
            replicates: 1,
            chain: ChainPlan {
                iterations: 10_000,
                burn_in: None,
            },
            true_models: Some(vec![4]),
            jobs: 1,
            base_seed: 41,
        };
        let timing = time_report(&plan).map_err(s)?;
        if timing.rows.len() != 16 {
            return Err(format!(
                "expected 16 timed evidences, got {}",
                timing.rows.len()
            ));
        }
        if timing.total_seconds > 15.0 {
            return Err(format!(
                "16 evidences took {:.2} s single-threaded, budget 15 s",
                timing.total_seconds
            ));
        }
        Ok(format!(
            "16 evidences at 10^4 sweeps on 128x128 in {:.2} s single-threaded \
             (median {:.2} s each)",
            timing.total_seconds, timing.median_seconds
        ))
    })();
    report("criterion 5 (selection time budget)", outcome);
}

#[test]
fn c6_numerical_invariants_hold() {
    let _gate = gate();
    let outcome = (|| {
        // Parseval and Hermitian symmetry of the unitary transform.
        let grid = Grid::new(64, 64).map_err(s)?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x0AC6);
        let y: Vec<f64> = (0..grid.len())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let y_hat = Dft::new(grid).forward_real(&y).map_err(s)?;
        let space: f64 = y.iter().map(|v| v * v).sum();
        let freq: f64 = y_hat.iter().map(|v| v.norm_sqr()).sum();
        let parseval = (space - freq).abs() / space;
        if parseval > 1e-10 {
            return Err(format!("Parseval residual {parseval:.3e}"));
        }
        check_hermitian(grid, &y_hat, 1e-10).map_err(s)?;

        // Posterior weights: sum to one and shift-invariant bit for bit.
        let evidences = [1.5f64, 0.5, -2.25, 0.0];
        let reports: Vec<EvidenceReport> = evidences
            .iter()
            .enumerate()
            .map(|(i, &le)| EvidenceReport {
                model_id: i + 1,
                log_evidence: le,
                term_likelihood: 0.0,
                term_prior: 0.0,
                term_posterior_density: 0.0,
                gamma_bar: HyperState::new(1.0, 1.0).unwrap(),
                sample_count: 100,
                std_error: 0.0,
            })
            .collect();
        let priors = [0.25f64; 4];
        let base = posterior_model_probs(&reports, &priors).map_err(s)?;
        let sum: f64 = base.probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(format!("probabilities sum to 1{:+.3e}", sum - 1.0));
        }
        // 1e6 is exactly representable and so are the shifted evidences,
        // so the weights must not move by a single bit.
        let shifted: Vec<EvidenceReport> = reports
            .iter()
            .map(|r| EvidenceReport {
                log_evidence: r.log_evidence + 1e6,
                ..*r
            })
            .collect();
        let moved = posterior_model_probs(&shifted, &priors).map_err(s)?;
        for (a, b) in base.probabilities.iter().zip(&moved.probabilities) {
            if a.to_bits() != b.to_bits() {
                return Err(format!("shift changed a weight: {a:.17e} vs {b:.17e}"));
            }
        }
        if base.selected != moved.selected {
            return Err("shift changed the selected model".into());
        }

        // Confusion bookkeeping and scheduling determinism on a small plan.
        let mut plan = ExperimentPlan {
            catalog: CatalogConfig {
                width: 16,
                height: 16,
                image_kinds: vec![PsdKind::new(PsdFamily::Lorentz)],
                noise_kinds: vec![
                    PsdKind::new(PsdFamily::Lorentz),
                    PsdKind::new(PsdFamily::White),
                ],
                blur_width: 2.0,
                blur_psf: None,
                hyperprior: HyperPrior::default(),
            },
            gamma_x_true: 6.0,
            gamma_e_true: 4.0,
            replicates: 3,
            chain: ChainPlan {
                iterations: 1500,
                burn_in: None,
            },
            true_models: None,
            jobs: 1,
            base_seed: 99,
        };
        let serial = run_confusion(&plan).map_err(s)?;
        for (i, row) in serial.matrix.counts().iter().enumerate() {
            let total: usize = row.iter().sum();
            if total != plan.replicates {
                return Err(format!(
                    "confusion row for true model {} sums to {total}, expected {}",
                    serial.matrix.true_ids()[i],
                    plan.replicates
                ));
            }
        }
        plan.jobs = 4;
        let pooled = run_confusion(&plan).map_err(s)?;
        let dir = tempfile::tempdir().map_err(s)?;
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_evidence_rows_csv(&a, &serial.rows).map_err(s)?;
        write_evidence_rows_csv(&b, &pooled.rows).map_err(s)?;
        if std::fs::read(&a).map_err(s)? != std::fs::read(&b).map_err(s)? {
            return Err("evidence CSV differs between --jobs 1 and --jobs 4".into());
        }
        let ca = dir.path().join("ca.csv");
        let cb = dir.path().join("cb.csv");
        write_confusion_csv(&ca, &serial.matrix).map_err(s)?;
        write_confusion_csv(&cb, &pooled.matrix).map_err(s)?;
        if std::fs::read(&ca).map_err(s)? != std::fs::read(&cb).map_err(s)? {
            return Err("confusion CSV differs between --jobs 1 and --jobs 4".into());
        }

        Ok(format!(
            "Parseval {parseval:.1e}, Hermitian ok, weight sum 1{:+.1e}, \
             bit-exact under +1e6 shift, rows sum to R, byte-identical CSVs at jobs 1 and 4",
            sum - 1.0
        ))
    })();
    report("criterion 6 (invariant suite)", outcome);
}

#[test]
fn c7_sampler_moments_match_conditionals() {
    let _gate = gate();
    let outcome = (|| {
        let grid = Grid::new(16, 16).map_err(s)?;
        let model = single_model(
            1,
            PsdKind::new(PsdFamily::Lorentz),
            PsdKind::new(PsdFamily::White),
            1.5,
            grid,
        )?;
        let truth = TruthConfig {
            gamma_x_true: 2.0,
            gamma_e_true: 3.0,
            seed: 1616,
        };
        let (_x, y) = generate_dataset(&model, &truth).map_err(s)?;
        let y_hat = Dft::new(grid).forward_real(&y).map_err(s)?;
        let gamma = HyperState::new(2.0, 3.0).map_err(s)?;

        let p = grid.len();
        let gain2 = model.blur().gain2();
        let s_x = model.image_psd().values();
        let s_e = model.noise_psd().values();
        let tau: Vec<f64> = (0..p)
            .map(|q| gamma.gamma_e * gain2[q] / s_e[q] + gamma.gamma_x / s_x[q])
            .collect();

        let draws = 20_000usize;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x0AC7);
        let mut sum = vec![num_complex::Complex64::new(0.0, 0.0); p];
        let mut sumsq = vec![0.0f64; p];
        for _ in 0..draws {
            let x_hat = sample_x_conditional(&y_hat, &gamma, &model, &mut rng).map_err(s)?;
            for q in 0..p {
                sum[q] += x_hat[q];
                sumsq[q] += x_hat[q].norm_sqr();
            }
        }
        let n = draws as f64;
        let mut worst_sigmas: f64 = 0.0;
        for q in 0..p {
            let mean = sum[q] / n;
            let var = (sumsq[q] / n - mean.norm_sqr()).max(0.0);
            let target = 1.0 / tau[q];
            // Total complex variance is chi-square distributed; one real
            // component doubles the relative spread of the estimate.
            let se = if grid.is_self_conjugate(q) {
                target * (2.0 / n).sqrt()
            } else {
                target / n.sqrt()
            };
            let sigmas = (var - target).abs() / se;
            worst_sigmas = worst_sigmas.max(sigmas);
            if sigmas > 5.0 {
                return Err(format!(
                    "bin {q}: empirical variance {var:.6e} vs 1/tau {target:.6e} \
                     ({sigmas:.1} standard errors)"
                ));
            }
        }

        // Precision conditionals: empirical means against shape/rate.
        let x_hat = sample_x_conditional(&y_hat, &gamma, &model, &mut rng).map_err(s)?;
        let hp = model.hyperprior();
        let gdraws = 100_000usize;
        let mut acc_e = 0.0f64;
        let mut acc_x = 0.0f64;
        let mut stat_e = 0.0f64;
        let mut stat_x = 0.0f64;
        for _ in 0..gdraws {
            let (ge, se_stat) = sample_gamma_e(&y_hat, &x_hat, &model, &mut rng).map_err(s)?;
            let (gx, sx_stat) = sample_gamma_x(&x_hat, &model, &mut rng).map_err(s)?;
            acc_e += ge;
            acc_x += gx;
            stat_e = se_stat;
            stat_x = sx_stat;
        }
        let m = gdraws as f64;
        let half_p = p as f64 / 2.0;
        let checks = [
            (
                "noise precision",
                acc_e / m,
                hp.alpha_e + half_p,
                hp.beta_e + stat_e,
            ),
            (
                "image precision",
                acc_x / m,
                hp.alpha_x + half_p,
                hp.beta_x + stat_x,
            ),
        ];
        let mut worst_gamma_sigmas: f64 = 0.0;
        for (label, mean, shape, rate) in checks {
            let expect = shape / rate;
            let se = shape.sqrt() / rate / m.sqrt();
            let sigmas = (mean - expect).abs() / se;
            worst_gamma_sigmas = worst_gamma_sigmas.max(sigmas);
            if sigmas > 5.0 {
                return Err(format!(
                    "{label}: draw mean {mean:.6} vs shape/rate {expect:.6} \
                     ({sigmas:.1} standard errors)"
                ));
            }
        }

        Ok(format!(
            "per-bin variance within {worst_sigmas:.1} SE of 1/tau over {p} bins, \
             precision means within {worst_gamma_sigmas:.1} SE of shape/rate"
        ))
    })();
    report("criterion 7 (sampler moment checks)", outcome);
}
