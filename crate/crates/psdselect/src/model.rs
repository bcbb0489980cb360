//! Candidate models and their closed-form densities.
//!
//! A model is an (image density, noise density, blur, hyperprior) tuple
//! on a common grid. Because every covariance involved is circulant, the
//! observation's covariance is diagonal in the Fourier basis with
//! per-bin variance s_y(p) = gain2(p) s_x(p)/gamma_x + s_e(p)/gamma_e,
//! and the log-likelihood is a plain sum over bins. All densities leave
//! this module in log scale only.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::gamma_logpdf_unchecked;
use crate::psd::{evaluate_psd, BlurTransfer, PsdField, PsdKind};
use crate::spectral::Grid;

/// Gamma shape/rate pairs for the two precision scale factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperPrior {
    pub alpha_x: f64,
    pub beta_x: f64,
    pub alpha_e: f64,
    pub beta_e: f64,
}

impl Default for HyperPrior {
    /// Proper but vague conjugate prior.
    fn default() -> Self {
        Self {
            alpha_x: 1e-3,
            beta_x: 1e-3,
            alpha_e: 1e-3,
            beta_e: 1e-3,
        }
    }
}

impl HyperPrior {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha_x, self.beta_x, self.alpha_e, self.beta_e];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config(format!(
                "hyperprior parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Current values of the two precisions (inverse-variance scale factors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperState {
    pub gamma_x: f64,
    pub gamma_e: f64,
}

impl HyperState {
    pub fn new(gamma_x: f64, gamma_e: f64) -> Result<Self> {
        let s = Self { gamma_x, gamma_e };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_x.is_finite() && self.gamma_x > 0.0)
            || !(self.gamma_e.is_finite() && self.gamma_e > 0.0)
        {
            return Err(Error::config(format!(
                "precisions must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }
}

/// One candidate model, fully evaluated on its grid.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    id: usize,
    image_psd: PsdField,
    noise_psd: PsdField,
    blur: BlurTransfer,
    hyperprior: HyperPrior,
    grid: Grid,
}

impl ModelSpec {
    pub fn new(
        id: usize,
        image_psd: PsdField,
        noise_psd: PsdField,
        blur: BlurTransfer,
        hyperprior: HyperPrior,
        grid: Grid,
    ) -> Result<Self> {
        hyperprior.validate()?;
        let p = grid.len();
        if image_psd.len() != p || noise_psd.len() != p || blur.gain2().len() != p {
            return Err(Error::config(format!(
                "model {id}: component lengths {}/{}/{} do not match grid {}x{}",
                image_psd.len(),
                noise_psd.len(),
                blur.gain2().len(),
                grid.width(),
                grid.height()
            )));
        }
        Ok(Self {
            id,
            image_psd,
            noise_psd,
            blur,
            hyperprior,
            grid,
        })
    }

    pub fn from_kinds(
        id: usize,
        image_kind: PsdKind,
        noise_kind: PsdKind,
        blur: BlurTransfer,
        hyperprior: HyperPrior,
        grid: Grid,
    ) -> Result<Self> {
        Self::new(
            id,
            evaluate_psd(image_kind, grid)?,
            evaluate_psd(noise_kind, grid)?,
            blur,
            hyperprior,
            grid,
        )
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn image_psd(&self) -> &PsdField {
        &self.image_psd
    }

    pub fn noise_psd(&self) -> &PsdField {
        &self.noise_psd
    }

    pub fn blur(&self) -> &BlurTransfer {
        &self.blur
    }

    pub fn hyperprior(&self) -> HyperPrior {
        self.hyperprior
    }

    pub fn image_kind(&self) -> PsdKind {
        self.image_psd.kind()
    }

    pub fn noise_kind(&self) -> PsdKind {
        self.noise_psd.kind()
    }

    pub(crate) fn check_spectrum_len(&self, len: usize) -> Result<()> {
        if len != self.grid.len() {
            return Err(Error::config(format!(
                "spectrum has {len} bins, model {} grid needs {}",
                self.id,
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// Observation variance at one bin for the given precisions.
    #[inline]
    pub fn data_psd_at(&self, p: usize, gamma: &HyperState) -> f64 {
        self.blur.gain2()[p] * self.image_psd.values()[p] / gamma.gamma_x
            + self.noise_psd.values()[p] / gamma.gamma_e
    }
}

/// Per-bin variance profile of the observation under `model` at `gamma`.
pub fn data_psd(model: &ModelSpec, gamma: &HyperState) -> Result<Vec<f64>> {
    gamma.validate()?;
    Ok((0..model.grid().len())
        .map(|p| model.data_psd_at(p, gamma))
        .collect())
}

/// Log-density of the observed spectrum given the precisions:
/// -(P/2) log 2pi - 1/2 sum_p [log s_y(p) + |y_hat(p)|^2 / s_y(p)].
pub fn log_likelihood(y_hat: &[Complex64], gamma: &HyperState, model: &ModelSpec) -> Result<f64> {
    model.check_spectrum_len(y_hat.len())?;
    gamma.validate()?;
    let mut acc = 0.0;
    for (p, y) in y_hat.iter().enumerate() {
        let s_y = model.data_psd_at(p, gamma);
        acc += s_y.ln() + y.norm_sqr() / s_y;
    }
    let p_half = y_hat.len() as f64 / 2.0;
    let value = -p_half * (2.0 * PI).ln() - 0.5 * acc;
    if !value.is_finite() {
        return Err(Error::numerical(format!(
            "log-likelihood accumulated a non-finite value for model {}",
            model.id()
        )));
    }
    Ok(value)
}

/// Log-density of the precisions under the model's gamma hyperprior.
/// Factorizes exactly as factor(gamma_x) + factor(gamma_e).
pub fn log_hyperprior(gamma: &HyperState, model: &ModelSpec) -> f64 {
    let hp = model.hyperprior();
    gamma_logpdf_unchecked(gamma.gamma_x, hp.alpha_x, hp.beta_x)
        + gamma_logpdf_unchecked(gamma.gamma_e, hp.alpha_e, hp.beta_e)
}

/// The full candidate set with its prior weights.
#[derive(Debug, Clone)]
pub struct ModelCatalog {
    models: Vec<ModelSpec>,
    priors: Vec<f64>,
}

impl ModelCatalog {
    pub fn models(&self) -> &[ModelSpec] {
        &self.models
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Look up a model by its 1-based id.
    pub fn model(&self, id: usize) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.id() == id)
    }

    /// JSON snapshot of what each candidate is, for run provenance.
    pub fn description(&self) -> serde_json::Value {
        let models: Vec<serde_json::Value> = self
            .models
            .iter()
            .map(|m| {
                serde_json::json!({
                    "id": m.id(),
                    "image": m.image_kind(),
                    "noise": m.noise_kind(),
                    "hyperprior": m.hyperprior(),
                })
            })
            .collect();
        serde_json::json!({ "models": models })
    }
}

/// Cross image kinds with noise kinds into a uniformly weighted catalog.
/// Ordering is image-kind major, noise-kind minor; ids run from 1.
pub fn build_catalog(
    image_kinds: &[PsdKind],
    noise_kinds: &[PsdKind],
    blur: &BlurTransfer,
    hyperprior: HyperPrior,
    grid: Grid,
) -> Result<ModelCatalog> {
    if image_kinds.is_empty() || noise_kinds.is_empty() {
        return Err(Error::config(
            "catalog needs at least one image kind and one noise kind".to_string(),
        ));
    }
    let mut models = Vec::with_capacity(image_kinds.len() * noise_kinds.len());
    let mut id = 1;
    for &image in image_kinds {
        for &noise in noise_kinds {
            models.push(ModelSpec::from_kinds(
                id,
                image,
                noise,
                blur.clone(),
                hyperprior,
                grid,
            )?);
            id += 1;
        }
    }
    let k = models.len();
    Ok(ModelCatalog {
        models,
        priors: vec![1.0 / k as f64; k],
    })
}

fn default_blur_width() -> f64 {
    1.0
}

/// Serializable catalog recipe, the JSON form used by run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogConfig {
    pub width: usize,
    pub height: usize,
    pub image_kinds: Vec<PsdKind>,
    pub noise_kinds: Vec<PsdKind>,
    /// Separable sinc blur width in pixels; 1.0 is the exact identity.
    #[serde(default = "default_blur_width")]
    pub blur_width: f64,
    /// Path of a raw `.f64` impulse-response file (sidecar beside it,
    /// same layout as generated images); overrides `blur_width`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_psf: Option<PathBuf>,
    #[serde(default)]
    pub hyperprior: HyperPrior,
}

impl CatalogConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.width, self.height)
    }

    fn blur(&self, grid: Grid) -> Result<BlurTransfer> {
        let Some(path) = &self.blur_psf else {
            return BlurTransfer::sinc(self.blur_width, grid);
        };
        let (psf_grid, response, _) = crate::io::read_image(path)?;
        if psf_grid != grid {
            return Err(Error::config(format!(
                "{}: PSF is {}x{} but the catalog grid is {}x{}",
                path.display(),
                psf_grid.width(),
                psf_grid.height(),
                grid.width(),
                grid.height()
            )));
        }
        BlurTransfer::from_impulse_response(&response, grid)
    }

    pub fn build(&self) -> Result<ModelCatalog> {
        let grid = self.grid()?;
        build_catalog(
            &self.image_kinds,
            &self.noise_kinds,
            &self.blur(grid)?,
            self.hyperprior,
            grid,
        )
    }
}
