//! Fourier-domain Gibbs sampler over (x, gamma_e, gamma_x).
//!
//! The image conditional factorizes over frequency bins, so one sweep
//! draws every spectral coefficient independently, then the two
//! precisions from their gamma conditionals. Chains never store image
//! samples: the two quadratic statistics of x recorded per iteration are
//! all the evidence estimator needs.

use num_complex::Complex64;
use rand::{Rng, RngExt, SeedableRng};
use rand_distr::{Distribution, Gamma, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HyperState, ModelSpec};
use crate::seed::{derive_seed, DOMAIN_CHAIN};
use crate::spectral::Dft;

/// Initial precisions drawn from a vague hyperprior are clamped into
/// this range; the tiny-shape draw underflows otherwise.
const INIT_GAMMA_MIN: f64 = 1e-2;
const INIT_GAMMA_MAX: f64 = 1e2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total sweeps G, burn-in included.
    pub iterations: usize,
    /// Leading sweeps excluded from estimation.
    pub burn_in: usize,
    pub seed: u64,
    /// Starting precisions; drawn from the hyperprior when absent.
    #[serde(default)]
    pub initial_gamma: Option<HyperState>,
}

impl ChainConfig {
    /// Default burn-in: one tenth of the run.
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in: iterations / 10,
            seed,
            initial_gamma: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "chain needs iterations > burn_in >= 0, got {} and {}",
                self.iterations, self.burn_in
            )));
        }
        if let Some(g) = &self.initial_gamma {
            g.validate()?;
        }
        Ok(())
    }
}

/// Per-sweep state: the precisions after the sweep and the two quadratic
/// statistics of the image sample drawn in it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRecord {
    pub gamma: HyperState,
    /// Half the noise-whitened residual energy of (y - blur * x).
    pub stat_e: f64,
    /// Half the prior-whitened energy of x.
    pub stat_x: f64,
}

#[derive(Debug, Clone)]
pub struct GibbsChain {
    records: Vec<ChainRecord>,
    config: ChainConfig,
    model_id: usize,
}

impl GibbsChain {
    pub fn records(&self) -> &[ChainRecord] {
        &self.records
    }

    /// Post-burn-in slice used for every estimate.
    pub fn retained(&self) -> &[ChainRecord] {
        &self.records[self.config.burn_in..]
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn model_id(&self) -> usize {
        self.model_id
    }
}

/// Shape of the gamma conditionals: every pixel contributes half a count.
pub(crate) fn conditional_shape(alpha: f64, pixels: usize) -> f64 {
    alpha + pixels as f64 / 2.0
}

/// Gamma draw in shape/rate convention. A grossly mismatched model can
/// push the conditional rate past f64 range; the clamps keep the draw
/// strictly positive instead of panicking, so such chains stay alive and
/// settle wherever the data puts them.
fn draw_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let scale = (1.0 / rate.min(f64::MAX)).max(f64::MIN_POSITIVE);
    Gamma::new(shape, scale)
        .expect("gamma conditional shape exceeds 1")
        .sample(rng)
        .max(f64::MIN_POSITIVE)
}

/// Hyperprior draw that survives shapes far below 1: boost through
/// Gamma(shape + 1) times U^(1/shape) in the log domain, clamp to a sane
/// starting window. The window matters: vague hyperpriors put nearly all
/// mass at exp(-1/shape)-scale values, and a chain launched that low can
/// overflow its residual statistic on large grids before the data pulls
/// gamma back.
fn draw_initial_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let boosted: f64 = Gamma::new(shape + 1.0, 1.0)
        .expect("hyperprior parameters are positive")
        .sample(rng);
    let u: f64 = rng.random();
    let log_gamma = boosted.ln() + u.ln() / shape - rate.ln();
    log_gamma
        .clamp(INIT_GAMMA_MIN.ln(), INIT_GAMMA_MAX.ln())
        .exp()
}

/// One exact draw of the image spectrum given data and precisions.
///
/// Per bin the posterior precision is tau(p) = gamma_e gain2(p)/s_e(p) +
/// gamma_x/s_x(p) and the mean is gamma_e conj(s_h(p)) y_hat(p) /
/// (s_e(p) tau(p)). Each conjugate pair is drawn once at its canonical
/// bin with component variance 1/(2 tau); self-conjugate bins are real
/// with variance 1/tau. The result is exactly Hermitian.
pub fn sample_x_conditional<R: Rng + ?Sized>(
    y_hat: &[Complex64],
    gamma: &HyperState,
    model: &ModelSpec,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    model.check_spectrum_len(y_hat.len())?;
    gamma.validate()?;
    let grid = model.grid();
    let gain2 = model.blur().gain2();
    let s_h = model.blur().coeffs();
    let s_e = model.noise_psd().values();
    let s_x = model.image_psd().values();

    let mut spec = vec![Complex64::default(); grid.len()];
    for p in 0..grid.len() {
        let q = grid.conjugate_partner(p);
        if p > q {
            continue;
        }
        let tau = gamma.gamma_e * gain2[p] / s_e[p] + gamma.gamma_x / s_x[p];
        let mean = s_h[p].conj() * y_hat[p] * (gamma.gamma_e / (s_e[p] * tau));
        if p == q {
            let z: f64 = StandardNormal.sample(rng);
            spec[p] = Complex64::new(mean.re + z / tau.sqrt(), 0.0);
        } else {
            let sd = (0.5 / tau).sqrt();
            let zr: f64 = StandardNormal.sample(rng);
            let zi: f64 = StandardNormal.sample(rng);
            spec[p] = mean + Complex64::new(sd * zr, sd * zi);
            spec[q] = spec[p].conj();
        }
    }
    Ok(spec)
}

/// Half the noise-whitened residual energy of the pair (y_hat, x_hat).
fn residual_stat(y_hat: &[Complex64], x_hat: &[Complex64], model: &ModelSpec) -> f64 {
    let s_h = model.blur().coeffs();
    let s_e = model.noise_psd().values();
    let acc: f64 = (0..y_hat.len())
        .map(|p| (y_hat[p] - s_h[p] * x_hat[p]).norm_sqr() / s_e[p])
        .sum();
    (0.5 * acc).max(0.0)
}

/// Half the prior-whitened energy of x_hat.
fn prior_stat(x_hat: &[Complex64], model: &ModelSpec) -> f64 {
    let s_x = model.image_psd().values();
    let acc: f64 = x_hat.iter().zip(s_x).map(|(x, s)| x.norm_sqr() / s).sum();
    (0.5 * acc).max(0.0)
}

/// Draw the noise precision given the current image sample. Returns the
/// draw and the residual statistic that parameterized it.
pub fn sample_gamma_e<R: Rng + ?Sized>(
    y_hat: &[Complex64],
    x_hat: &[Complex64],
    model: &ModelSpec,
    rng: &mut R,
) -> Result<(f64, f64)> {
    model.check_spectrum_len(y_hat.len())?;
    model.check_spectrum_len(x_hat.len())?;
    let stat_e = residual_stat(y_hat, x_hat, model);
    let hp = model.hyperprior();
    let shape = conditional_shape(hp.alpha_e, model.grid().len());
    Ok((draw_gamma(shape, hp.beta_e + stat_e, rng), stat_e))
}

/// Draw the image precision given the current image sample. Returns the
/// draw and the prior statistic that parameterized it.
pub fn sample_gamma_x<R: Rng + ?Sized>(
    x_hat: &[Complex64],
    model: &ModelSpec,
    rng: &mut R,
) -> Result<(f64, f64)> {
    model.check_spectrum_len(x_hat.len())?;
    let stat_x = prior_stat(x_hat, model);
    let hp = model.hyperprior();
    let shape = conditional_shape(hp.alpha_x, model.grid().len());
    Ok((draw_gamma(shape, hp.beta_x + stat_x, rng), stat_x))
}

/// Per-bin constants of one (y, model) pair, reduced to canonical bins.
///
/// A conjugate pair contributes twice to each statistic but its partner
/// term is determined by the canonical draw, so the pair's two weights
/// collapse into we = 1/s_e(p) + 1/s_e(q) and wx = 1/s_x(p) + 1/s_x(q)
/// (the residual and the coefficient have equal moduli at p and q).
struct SweepPlan {
    // Conjugate pairs, canonical side.
    a: Vec<f64>,    // gain2/s_e at the canonical bin, scales gamma_e in tau
    b: Vec<f64>,    // 1/s_x at the canonical bin, scales gamma_x in tau
    nr: Vec<f64>,   // Re conj(s_h) y_hat / s_e, mean numerator
    ni: Vec<f64>,   // Im conj(s_h) y_hat / s_e
    cr: Vec<f64>,   // Re conj(y_hat) s_h * we, residual cross term
    ci: Vec<f64>,   // Im conj(y_hat) s_h * we
    y2we: Vec<f64>, // |y_hat|^2 * we
    g2we: Vec<f64>, // gain2 * we
    wx: Vec<f64>,
    // The four self-conjugate bins (real coefficients).
    s_a: Vec<f64>,
    s_b: Vec<f64>,
    s_n: Vec<f64>,  // real mean numerator
    s_c: Vec<f64>,  // real cross term / s_e
    s_y2: Vec<f64>, // |y_hat|^2 / s_e
    s_g2: Vec<f64>, // gain2 / s_e
    s_wx: Vec<f64>,
}

impl SweepPlan {
    fn new(y_hat: &[Complex64], model: &ModelSpec) -> Self {
        let grid = model.grid();
        let gain2 = model.blur().gain2();
        let s_h = model.blur().coeffs();
        let s_e = model.noise_psd().values();
        let s_x = model.image_psd().values();

        let mut plan = SweepPlan {
            a: Vec::new(),
            b: Vec::new(),
            nr: Vec::new(),
            ni: Vec::new(),
            cr: Vec::new(),
            ci: Vec::new(),
            y2we: Vec::new(),
            g2we: Vec::new(),
            wx: Vec::new(),
            s_a: Vec::new(),
            s_b: Vec::new(),
            s_n: Vec::new(),
            s_c: Vec::new(),
            s_y2: Vec::new(),
            s_g2: Vec::new(),
            s_wx: Vec::new(),
        };
        for p in 0..grid.len() {
            let q = grid.conjugate_partner(p);
            if p > q {
                continue;
            }
            let numer = s_h[p].conj() * y_hat[p] / s_e[p];
            if p == q {
                plan.s_a.push(gain2[p] / s_e[p]);
                plan.s_b.push(1.0 / s_x[p]);
                plan.s_n.push(numer.re);
                plan.s_c.push((y_hat[p].conj() * s_h[p]).re / s_e[p]);
                plan.s_y2.push(y_hat[p].norm_sqr() / s_e[p]);
                plan.s_g2.push(gain2[p] / s_e[p]);
                plan.s_wx.push(1.0 / s_x[p]);
            } else {
                let we = 1.0 / s_e[p] + 1.0 / s_e[q];
                let cross = y_hat[p].conj() * s_h[p] * we;
                plan.a.push(gain2[p] / s_e[p]);
                plan.b.push(1.0 / s_x[p]);
                plan.nr.push(numer.re);
                plan.ni.push(numer.im);
                plan.cr.push(cross.re);
                plan.ci.push(cross.im);
                plan.y2we.push(y_hat[p].norm_sqr() * we);
                plan.g2we.push(gain2[p] * we);
                plan.wx.push(1.0 / s_x[p] + 1.0 / s_x[q]);
            }
        }
        plan
    }

    fn normals_needed(&self) -> usize {
        2 * self.a.len() + self.s_a.len()
    }

    /// Draw x once and return (stat_e, stat_x) of the draw.
    fn sweep(&self, gamma: &HyperState, normals: &[f64]) -> (f64, f64) {
        let ge = gamma.gamma_e;
        let gx = gamma.gamma_x;
        let n = self.a.len();
        let (z1, rest) = normals.split_at(n);
        let (z2, zs) = rest.split_at(n);

        let a = &self.a[..n];
        let b = &self.b[..n];
        let nr = &self.nr[..n];
        let ni = &self.ni[..n];
        let cr = &self.cr[..n];
        let ci = &self.ci[..n];
        let y2we = &self.y2we[..n];
        let g2we = &self.g2we[..n];
        let wx = &self.wx[..n];

        let mut se = 0.0f64;
        let mut sx = 0.0f64;
        for i in 0..n {
            let tau = ge * a[i] + gx * b[i];
            let inv = 1.0 / tau;
            let mr = ge * nr[i] * inv;
            let mi = ge * ni[i] * inv;
            let sd = (0.5 * inv).sqrt();
            let xr = mr + sd * z1[i];
            let xi = mi + sd * z2[i];
            let n2 = xr * xr + xi * xi;
            se += y2we[i] - 2.0 * (cr[i] * xr - ci[i] * xi) + g2we[i] * n2;
            sx += wx[i] * n2;
        }
        for (i, &z) in zs.iter().enumerate().take(self.s_a.len()) {
            let tau = ge * self.s_a[i] + gx * self.s_b[i];
            let inv = 1.0 / tau;
            let x = ge * self.s_n[i] * inv + inv.sqrt() * z;
            se += self.s_y2[i] - 2.0 * self.s_c[i] * x + self.s_g2[i] * x * x;
            sx += self.s_wx[i] * x * x;
        }
        ((0.5 * se).max(0.0), (0.5 * sx).max(0.0))
    }
}

/// Run one chain: sweep x, then gamma_e, then gamma_x, recording the
/// statistics of each image draw. Pure function of (y, model, config).
pub fn run_gibbs(y: &[f64], model: &ModelSpec, config: &ChainConfig) -> Result<GibbsChain> {
    config.validate()?;
    model.check_spectrum_len(y.len())?;
    let grid = model.grid();
    let y_hat = Dft::new(grid).forward_real(y)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(
        config.seed,
        &[DOMAIN_CHAIN, model.id() as u64],
    ));

    let hp = model.hyperprior();
    let mut gamma = match config.initial_gamma {
        Some(g) => g,
        None => HyperState {
            gamma_x: draw_initial_gamma(hp.alpha_x, hp.beta_x, &mut rng),
            gamma_e: draw_initial_gamma(hp.alpha_e, hp.beta_e, &mut rng),
        },
    };

    let plan = SweepPlan::new(&y_hat, model);
    let shape_e = conditional_shape(hp.alpha_e, grid.len());
    let shape_x = conditional_shape(hp.alpha_x, grid.len());
    let mut normals = vec![0.0f64; plan.normals_needed()];
    let mut records = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        for z in normals.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
        let (stat_e, stat_x) = plan.sweep(&gamma, &normals);
        gamma.gamma_e = draw_gamma(shape_e, hp.beta_e + stat_e, &mut rng);
        gamma.gamma_x = draw_gamma(shape_x, hp.beta_x + stat_x, &mut rng);
        records.push(ChainRecord {
            gamma,
            stat_e,
            stat_x,
        });
    }
    Ok(GibbsChain {
        records,
        config: *config,
        model_id: model.id(),
    })
}
