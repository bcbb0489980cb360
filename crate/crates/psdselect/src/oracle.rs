//! Brute-force reference computations.
//!
//! Two independent paths for cross-checking the fast spectral code: a
//! 2-D quadrature of the evidence over the precisions, and a dense-matrix
//! Gaussian log-density for grids small enough to factorize explicitly.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{data_psd, log_hyperprior, HyperState, ModelSpec};
use crate::numeric::log_sum_exp_pairwise;
use crate::spectral::{Dft, Grid};

/// Boundary nodes this close (in nats) to the peak of the integrand
/// trigger the widen-your-bounds error.
const BOUNDARY_MARGIN: f64 = 3.0;

/// Largest pixel count the dense path will factorize (O(P^3)).
pub const DENSE_PIXEL_LIMIT: usize = 256;

/// Log-spaced quadrature nodes for one precision axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AxisGrid {
    pub min: f64,
    pub max: f64,
    pub nodes: usize,
}

impl Default for AxisGrid {
    fn default() -> Self {
        Self {
            min: 1e-3,
            max: 1e3,
            nodes: 200,
        }
    }
}

impl AxisGrid {
    fn validate(&self, axis: &str) -> Result<()> {
        if !(self.min > 0.0 && self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::config(format!(
                "{axis} integration bounds must be positive and finite, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.min >= self.max {
            return Err(Error::config(format!(
                "{axis} integration bounds must satisfy min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.nodes < 16 {
            return Err(Error::config(format!(
                "{axis} integration grid needs at least 16 nodes, got {}",
                self.nodes
            )));
        }
        Ok(())
    }

    /// Node positions in t = log(gamma).
    fn log_nodes(&self) -> Vec<f64> {
        let (lo, hi) = (self.min.ln(), self.max.ln());
        let h = (hi - lo) / (self.nodes - 1) as f64;
        (0..self.nodes).map(|i| lo + h * i as f64).collect()
    }

    /// Trapezoid weight in the t variable for node i.
    fn log_weight(&self, i: usize) -> f64 {
        let h = (self.max.ln() - self.min.ln()) / (self.nodes - 1) as f64;
        if i == 0 || i == self.nodes - 1 {
            (0.5 * h).ln()
        } else {
            h.ln()
        }
    }
}

/// 2-D integration domain over (gamma_x, gamma_e).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationGrid {
    pub x: AxisGrid,
    pub e: AxisGrid,
}

impl IntegrationGrid {
    pub fn validate(&self) -> Result<()> {
        self.x.validate("gamma_x")?;
        self.e.validate("gamma_e")
    }
}

/// log of the joint density p(y, gamma | model) at one precision pair,
/// from precomputed per-bin arrays. a = gain2 * s_x, b = s_e,
/// y2 = |y_hat|^2.
fn log_joint_at(
    a: &[f64],
    b: &[f64],
    y2: &[f64],
    model: &ModelSpec,
    gamma: HyperState,
    neg_half_p_log2pi: f64,
) -> f64 {
    let mut acc = 0.0;
    for p in 0..a.len() {
        let s_y = a[p] / gamma.gamma_x + b[p] / gamma.gamma_e;
        acc += s_y.ln() + y2[p] / s_y;
    }
    neg_half_p_log2pi - 0.5 * acc + log_hyperprior(&gamma, model)
}

/// Brute-force log-evidence by trapezoid quadrature of
/// p(y | gamma, model) p(gamma | model) over a log-spaced grid, with the
/// log-measure Jacobian e^{t_x + t_e}. Fails loudly when the boundary of
/// the domain carries non-negligible integrand mass.
pub fn grid_log_evidence(y: &[f64], model: &ModelSpec, igrid: &IntegrationGrid) -> Result<f64> {
    igrid.validate()?;
    model.check_spectrum_len(y.len())?;

    let grid = model.grid();
    let y_hat = Dft::new(grid).forward_real(y)?;
    let y2: Vec<f64> = y_hat.iter().map(|v| v.norm_sqr()).collect();
    let a: Vec<f64> = model
        .blur()
        .gain2()
        .iter()
        .zip(model.image_psd().values())
        .map(|(g, s)| g * s)
        .collect();
    let b = model.noise_psd().values().to_vec();
    let neg_half_p_log2pi = -(grid.len() as f64 / 2.0) * (2.0 * std::f64::consts::PI).ln();

    let tx = igrid.x.log_nodes();
    let te = igrid.e.log_nodes();

    // Node values in row-major (x-major) order; rows are independent, so
    // they parallelize freely while the collected layout stays fixed.
    let rows: Vec<Vec<f64>> = tx
        .par_iter()
        .map(|&txi| {
            te.iter()
                .map(|&tej| {
                    let gamma = HyperState {
                        gamma_x: txi.exp(),
                        gamma_e: tej.exp(),
                    };
                    log_joint_at(&a, &b, &y2, model, gamma, neg_half_p_log2pi) + txi + tej
                })
                .collect()
        })
        .collect();

    let nx = tx.len();
    let ne = te.len();
    let mut global_max = f64::NEG_INFINITY;
    let mut boundary_max = f64::NEG_INFINITY;
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            global_max = global_max.max(v);
            if i == 0 || i == nx - 1 || j == 0 || j == ne - 1 {
                boundary_max = boundary_max.max(v);
            }
        }
    }
    if boundary_max > global_max - BOUNDARY_MARGIN {
        return Err(Error::BoundaryMass {
            boundary_max,
            interior_max: global_max,
            margin: BOUNDARY_MARGIN,
        });
    }

    let weighted: Vec<f64> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            let wi = igrid.x.log_weight(i);
            row.iter()
                .enumerate()
                .map(move |(j, &v)| v + wi + igrid.e.log_weight(j))
        })
        .collect();
    let value = log_sum_exp_pairwise(&weighted);
    if !value.is_finite() {
        return Err(Error::numerical(
            "quadrature accumulated a non-finite log-evidence".to_string(),
        ));
    }
    Ok(value)
}

/// Unitary DFT matrix for a grid: entry (k, n) couples bin k = (kr, kc)
/// with pixel n = (nr, nc) through exp(-2 pi i (kr nr / H + kc nc / W)),
/// scaled by 1/sqrt(P).
pub(crate) fn dft_matrix(grid: Grid) -> DMatrix<Complex64> {
    let p = grid.len();
    let scale = 1.0 / (p as f64).sqrt();
    DMatrix::from_fn(p, p, |k, n| {
        let (kr, kc) = grid.coords(k);
        let (nr, nc) = grid.coords(n);
        let phase = -2.0
            * std::f64::consts::PI
            * ((kr * nr) as f64 / grid.height() as f64 + (kc * nc) as f64 / grid.width() as f64);
        Complex64::from_polar(scale, phase)
    })
}

/// Gaussian log-density of y under the model at fixed precisions, via the
/// explicit covariance R_y = F^H diag(s_y) F and a Cholesky
/// factorization. Deliberately ignorant of the spectral shortcut.
pub fn dense_gaussian_logpdf(y: &[f64], model: &ModelSpec, gamma: &HyperState) -> Result<f64> {
    let p = model.grid().len();
    if p > DENSE_PIXEL_LIMIT {
        return Err(Error::DenseTooLarge {
            pixels: p,
            limit: DENSE_PIXEL_LIMIT,
        });
    }
    model.check_spectrum_len(y.len())?;
    let s_y = data_psd(model, gamma)?;

    let f = dft_matrix(model.grid());
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        p,
        s_y.iter().map(|&v| Complex64::new(v, 0.0)),
    ));
    let r_y = f.adjoint() * d * &f;

    let chol = r_y.cholesky().ok_or(Error::Definiteness)?;
    let log_det: f64 = chol.l().diagonal().iter().map(|c| 2.0 * c.re.ln()).sum();
    let y_c = DVector::from_iterator(p, y.iter().map(|&v| Complex64::new(v, 0.0)));
    let quad = y_c.dotc(&chol.solve(&y_c)).re;

    Ok(-(p as f64 / 2.0) * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * quad)
}
