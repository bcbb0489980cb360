//! C ABI for the model-selection workbench.
//!
//! Conventions: handles are opaque and owned by the library; every
//! fallible call returns a [`PselStatus`] and records a message
//! retrievable with [`psel_last_error`] on failure. Buffers are caller
//! allocated, row-major, `width * height` doubles. Panics are caught at
//! the boundary and surfaced as [`PselStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use psdselect::evidence::{chib_log_evidence, posterior_model_probs, ModelPosterior};
use psdselect::gibbs::{run_gibbs, ChainConfig};
use psdselect::model::{CatalogConfig, ModelCatalog};
use psdselect::oracle::{grid_log_evidence, IntegrationGrid};
use psdselect::synth::{generate_dataset, TruthConfig};

/// Status code of every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PselStatus {
    /// Call succeeded.
    Ok = 0,
    /// Rejected configuration or arguments.
    Config = 1,
    /// Numerical failure while computing.
    Numerical = 2,
    /// A required pointer was null.
    NullArgument = 3,
    /// Internal panic caught at the boundary.
    Panic = 4,
}

/// Candidate-model catalog built from a JSON description.
pub struct PselCatalog {
    inner: ModelCatalog,
}

/// Selection result: per-model probabilities and the winning id.
pub struct PselPosterior {
    inner: ModelPosterior,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl std::fmt::Display) {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(err: &psdselect::Error) -> PselStatus {
    set_error(err);
    match err.exit_code() {
        2 => PselStatus::Numerical,
        _ => PselStatus::Config,
    }
}

fn null_argument(name: &str) -> PselStatus {
    set_error(format!("{name} is null"));
    PselStatus::NullArgument
}

fn guarded(f: impl FnOnce() -> PselStatus) -> PselStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|m| m.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in library call".to_string());
            set_error(message);
            PselStatus::Panic
        }
    }
}

/// Message for the most recent failure on the calling thread. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn psel_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a catalog from the same JSON object the CLI configs use under
/// `"catalog"`: width, height, image_kinds, noise_kinds, and optional
/// blur_width, blur_psf, and hyperprior. On success writes a handle to
/// `out`; release it with [`psel_catalog_free`].
///
/// # Safety
/// `json` must point to a NUL-terminated string; `out` must be valid
/// for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn psel_catalog_from_json(
    json: *const c_char,
    out: *mut *mut PselCatalog,
) -> PselStatus {
    guarded(|| {
        if json.is_null() {
            return null_argument("json");
        }
        if out.is_null() {
            return null_argument("out");
        }
        let text = match std::ffi::CStr::from_ptr(json).to_str() {
            Ok(text) => text,
            Err(e) => {
                set_error(format!("catalog JSON is not UTF-8: {e}"));
                return PselStatus::Config;
            }
        };
        let config: CatalogConfig = match serde_json::from_str(text) {
            Ok(config) => config,
            Err(e) => {
                set_error(format!("catalog JSON: {e}"));
                return PselStatus::Config;
            }
        };
        match config.build() {
            Ok(inner) => {
                out.write(Box::into_raw(Box::new(PselCatalog { inner })));
                PselStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a catalog handle; a null handle is a no-op.
///
/// # Safety
/// `catalog` must be null or a pointer returned by
/// [`psel_catalog_from_json`] that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn psel_catalog_free(catalog: *mut PselCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Number of candidate models; 0 for a null handle.
///
/// # Safety
/// `catalog` must be null or a live catalog handle.
#[no_mangle]
pub unsafe extern "C" fn psel_catalog_models(catalog: *const PselCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.inner.models().len())
}

/// Pixels per image (`width * height`), the length every buffer below
/// must have; 0 for a null handle.
///
/// # Safety
/// `catalog` must be null or a live catalog handle.
#[no_mangle]
pub unsafe extern "C" fn psel_catalog_pixels(catalog: *const PselCatalog) -> usize {
    catalog
        .as_ref()
        .and_then(|c| c.inner.models().first())
        .map_or(0, |m| m.grid().len())
}

/// Draws one synthetic scene and observation from catalog model
/// `model_id` at precisions (`gamma_x`, `gamma_e`). `observation` is
/// required; pass a null `image` to skip the ground-truth copy. Both
/// buffers hold `len == psel_catalog_pixels` doubles.
///
/// # Safety
/// `catalog` must be a live catalog handle; non-null buffers must be
/// valid for `len` double writes.
#[no_mangle]
pub unsafe extern "C" fn psel_generate(
    catalog: *const PselCatalog,
    model_id: usize,
    gamma_x: f64,
    gamma_e: f64,
    seed: u64,
    image: *mut f64,
    observation: *mut f64,
    len: usize,
) -> PselStatus {
    guarded(|| {
        let Some(catalog) = catalog.as_ref() else {
            return null_argument("catalog");
        };
        if observation.is_null() {
            return null_argument("observation");
        }
        let Some(model) = catalog.inner.model(model_id) else {
            set_error(format!("model {model_id} is not in the catalog"));
            return PselStatus::Config;
        };
        let pixels = model.grid().len();
        if len != pixels {
            set_error(format!(
                "buffer holds {len} doubles but the grid has {pixels} pixels"
            ));
            return PselStatus::Config;
        }
        let truth = TruthConfig {
            gamma_x_true: gamma_x,
            gamma_e_true: gamma_e,
            seed,
        };
        match generate_dataset(model, &truth) {
            Ok((x, y)) => {
                if !image.is_null() {
                    std::ptr::copy_nonoverlapping(x.as_ptr(), image, pixels);
                }
                std::ptr::copy_nonoverlapping(y.as_ptr(), observation, pixels);
                PselStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Ranks every catalog model on one observation: runs a Gibbs chain of
/// `iterations` sweeps per candidate (one tenth burn-in), combines the
/// evidences with the catalog's model priors, and writes a posterior
/// handle to `out`. Candidates run sequentially on the calling thread.
///
/// # Safety
/// `catalog` must be a live catalog handle, `observation` valid for
/// `len` double reads, and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn psel_select(
    catalog: *const PselCatalog,
    observation: *const f64,
    len: usize,
    iterations: usize,
    seed: u64,
    out: *mut *mut PselPosterior,
) -> PselStatus {
    guarded(|| {
        let Some(catalog) = catalog.as_ref() else {
            return null_argument("catalog");
        };
        if observation.is_null() {
            return null_argument("observation");
        }
        if out.is_null() {
            return null_argument("out");
        }
        let y = std::slice::from_raw_parts(observation, len);
        let config = ChainConfig::new(iterations, seed);
        let mut reports = Vec::with_capacity(catalog.inner.models().len());
        for model in catalog.inner.models() {
            let chain = match run_gibbs(y, model, &config) {
                Ok(chain) => chain,
                Err(e) => return status_of(&e),
            };
            match chib_log_evidence(y, model, &chain) {
                Ok(report) => reports.push(report),
                Err(e) => return status_of(&e),
            }
        }
        match posterior_model_probs(&reports, catalog.inner.priors()) {
            Ok(inner) => {
                out.write(Box::into_raw(Box::new(PselPosterior { inner })));
                PselStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Integrates one model's evidence on the default quadrature grid and
/// writes the log value to `out`.
///
/// # Safety
/// `catalog` must be a live catalog handle, `observation` valid for
/// `len` double reads, and `out` valid for one double write.
#[no_mangle]
pub unsafe extern "C" fn psel_log_evidence_quadrature(
    catalog: *const PselCatalog,
    model_id: usize,
    observation: *const f64,
    len: usize,
    out: *mut f64,
) -> PselStatus {
    guarded(|| {
        let Some(catalog) = catalog.as_ref() else {
            return null_argument("catalog");
        };
        if observation.is_null() {
            return null_argument("observation");
        }
        if out.is_null() {
            return null_argument("out");
        }
        let Some(model) = catalog.inner.model(model_id) else {
            set_error(format!("model {model_id} is not in the catalog"));
            return PselStatus::Config;
        };
        let y = std::slice::from_raw_parts(observation, len);
        match grid_log_evidence(y, model, &IntegrationGrid::default()) {
            Ok(value) => {
                out.write(value);
                PselStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a posterior handle; a null handle is a no-op.
///
/// # Safety
/// `posterior` must be null or a pointer returned by [`psel_select`]
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn psel_posterior_free(posterior: *mut PselPosterior) {
    if !posterior.is_null() {
        drop(Box::from_raw(posterior));
    }
}

/// Number of ranked models; 0 for a null handle.
///
/// # Safety
/// `posterior` must be null or a live posterior handle.
#[no_mangle]
pub unsafe extern "C" fn psel_posterior_models(posterior: *const PselPosterior) -> usize {
    posterior.as_ref().map_or(0, |p| p.inner.model_ids.len())
}

/// Winning model id; 0 for a null handle.
///
/// # Safety
/// `posterior` must be null or a live posterior handle.
#[no_mangle]
pub unsafe extern "C" fn psel_posterior_selected(posterior: *const PselPosterior) -> usize {
    posterior.as_ref().map_or(0, |p| p.inner.selected)
}

/// Model id at `index` in ranking storage order; 0 when out of range.
///
/// # Safety
/// `posterior` must be null or a live posterior handle.
#[no_mangle]
pub unsafe extern "C" fn psel_posterior_model_id(
    posterior: *const PselPosterior,
    index: usize,
) -> usize {
    posterior
        .as_ref()
        .and_then(|p| p.inner.model_ids.get(index))
        .copied()
        .unwrap_or(0)
}

/// Posterior probability at `index`; NaN when out of range.
///
/// # Safety
/// `posterior` must be null or a live posterior handle.
#[no_mangle]
pub unsafe extern "C" fn psel_posterior_probability(
    posterior: *const PselPosterior,
    index: usize,
) -> f64 {
    posterior
        .as_ref()
        .and_then(|p| p.inner.probabilities.get(index))
        .copied()
        .unwrap_or(f64::NAN)
}

/// Log evidence at `index`; NaN when out of range.
///
/// # Safety
/// `posterior` must be null or a live posterior handle.
#[no_mangle]
pub unsafe extern "C" fn psel_posterior_log_evidence(
    posterior: *const PselPosterior,
    index: usize,
) -> f64 {
    posterior
        .as_ref()
        .and_then(|p| p.inner.log_evidences.get(index))
        .copied()
        .unwrap_or(f64::NAN)
}
