//! Ground-truth data generation.
//!
//! Images and noise are drawn by Fourier coloring: a Hermitian complex
//! Gaussian spectrum with per-bin variance s(p)/gamma, inverse
//! transformed. Generation reuses the exact density fields the
//! candidates are scored with, so "data from model k" means the
//! candidate k itself, not a lookalike.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::seed::{derive_seed, DOMAIN_IMAGE, DOMAIN_NOISE};
use crate::spectral::{Dft, Grid};

/// True precisions and the seed all replicate randomness derives from.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TruthConfig {
    pub gamma_x_true: f64,
    pub gamma_e_true: f64,
    pub seed: u64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            gamma_x_true: 6.0,
            gamma_e_true: 4.0,
            seed: 0,
        }
    }
}

impl TruthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_x_true > 0.0 && self.gamma_x_true.is_finite())
            || !(self.gamma_e_true > 0.0 && self.gamma_e_true.is_finite())
        {
            return Err(Error::config(format!(
                "true precisions must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Zero-mean Hermitian Gaussian spectrum with per-bin variance
/// variance[p]. Canonical bins are drawn in ascending index order; the
/// partner carries the conjugate, self-conjugate bins are real with full
/// variance, pair components get half each.
fn hermitian_gaussian_spectrum(
    grid: Grid,
    variance: impl Fn(usize) -> f64,
    rng: &mut Xoshiro256PlusPlus,
) -> Vec<Complex64> {
    let mut spec = vec![Complex64::default(); grid.len()];
    for p in 0..grid.len() {
        let q = grid.conjugate_partner(p);
        if p > q {
            continue;
        }
        if p == q {
            let z: f64 = StandardNormal.sample(rng);
            spec[p] = Complex64::new(variance(p).sqrt() * z, 0.0);
        } else {
            let sd = (0.5 * variance(p)).sqrt();
            let zr: f64 = StandardNormal.sample(rng);
            let zi: f64 = StandardNormal.sample(rng);
            spec[p] = Complex64::new(sd * zr, sd * zi);
            spec[q] = spec[p].conj();
        }
    }
    spec
}

/// Draw a ground-truth image from the model's image prior at the true
/// precision. Bit-reproducible per (model, truth).
pub fn generate_image(model: &ModelSpec, truth: &TruthConfig) -> Result<Vec<f64>> {
    truth.validate()?;
    let grid = model.grid();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(truth.seed, &[DOMAIN_IMAGE]));
    let s_x = model.image_psd().values();
    let spec = hermitian_gaussian_spectrum(grid, |p| s_x[p] / truth.gamma_x_true, &mut rng);
    Dft::new(grid).inverse_real(&spec)
}

/// Blur the image and add colored noise at the true noise precision:
/// y = (blur * x) + e.
pub fn generate_observation(x: &[f64], model: &ModelSpec, truth: &TruthConfig) -> Result<Vec<f64>> {
    truth.validate()?;
    model.check_spectrum_len(x.len())?;
    let grid = model.grid();
    let dft = Dft::new(grid);
    let x_hat = dft.forward_real(x)?;
    let blurred = dft.inverse_real(&model.blur().apply_spectrum(&x_hat))?;

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(derive_seed(truth.seed, &[DOMAIN_NOISE]));
    let s_e = model.noise_psd().values();
    let noise_spec = hermitian_gaussian_spectrum(grid, |p| s_e[p] / truth.gamma_e_true, &mut rng);
    let noise = dft.inverse_real(&noise_spec)?;

    Ok(blurred.iter().zip(&noise).map(|(b, n)| b + n).collect())
}

/// Image plus observation in one call.
pub fn generate_dataset(model: &ModelSpec, truth: &TruthConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = generate_image(model, truth)?;
    let y = generate_observation(&x, model, truth)?;
    Ok((x, y))
}
