//! Periodic grid geometry and the unitary 2-D DFT.
//!
//! Everything downstream (priors, likelihood, sampler, oracle) works on
//! flattened row-major fields and their spectra. The transform is the
//! symmetric 1/sqrt(P) convention, so it is its own adjoint inverse and
//! Parseval holds without bookkeeping factors.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative Hermitian-symmetry tolerance applied when a spectrum is about
/// to be interpreted as a real field.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-10;

/// Rectangular periodic pixel grid. `width` columns, `height` rows,
/// row-major flat index p = row * width + col. Dimensions are even so
/// every axis has a Nyquist bin and the self-conjugate set is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    width: usize,
    height: usize,
}

impl Grid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 || !width.is_multiple_of(2) || !height.is_multiple_of(2) {
            return Err(Error::config(format!(
                "grid dimensions must be even and at least 2, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels P. Never zero: the constructor requires both
    /// dimensions to be at least 2.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    pub fn coords(&self, p: usize) -> (usize, usize) {
        debug_assert!(p < self.len());
        (p / self.width, p % self.width)
    }

    /// Signed normalized frequency of sample index i on an axis of n
    /// samples: i/n for i < n/2, else (i-n)/n.
    fn axis_frequency(n: usize, i: usize) -> f64 {
        if i < n.div_ceil(2) {
            i as f64 / n as f64
        } else {
            (i as f64 - n as f64) / n as f64
        }
    }

    /// (nu_h, nu_v) for flat bin p; horizontal from the column, vertical
    /// from the row. Both lie in [-1/2, 1/2).
    pub fn frequency(&self, p: usize) -> (f64, f64) {
        let (row, col) = self.coords(p);
        (
            Self::axis_frequency(self.width, col),
            Self::axis_frequency(self.height, row),
        )
    }

    /// Flat index of the bin carrying the conjugate coefficient of p for
    /// spectra of real fields: (row, col) -> (-row mod H, -col mod W).
    pub fn conjugate_partner(&self, p: usize) -> usize {
        let (row, col) = self.coords(p);
        self.index(
            (self.height - row) % self.height,
            (self.width - col) % self.width,
        )
    }

    /// Bins that are their own conjugate partner carry purely real
    /// coefficients for real fields. Exactly four per even grid: the
    /// DC/Nyquist combinations.
    pub fn is_self_conjugate(&self, p: usize) -> bool {
        self.conjugate_partner(p) == p
    }

    /// Canonical representative of each conjugate pair: the smaller flat
    /// index. Iterating canonical bins visits every pair exactly once.
    pub fn is_canonical(&self, p: usize) -> bool {
        p <= self.conjugate_partner(p)
    }
}

/// Planned unitary 2-D DFT for one grid shape. Plans are reusable and the
/// handle is cheap to clone.
#[derive(Clone)]
pub struct Dft {
    grid: Grid,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Dft {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            row_fwd: planner.plan_fft_forward(grid.width),
            col_fwd: planner.plan_fft_forward(grid.height),
            row_inv: planner.plan_fft_inverse(grid.width),
            col_inv: planner.plan_fft_inverse(grid.height),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.grid.len() {
            return Err(Error::config(format!(
                "field has {len} samples but grid {}x{} needs {}",
                self.grid.width,
                self.grid.height,
                self.grid.len()
            )));
        }
        Ok(())
    }

    /// Row pass, transpose, column pass, transpose back, then one global
    /// 1/sqrt(P) rescale.
    fn transform(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        let (w, h) = (self.grid.width, self.grid.height);
        let mut scratch = vec![
            Complex64::default();
            row.get_inplace_scratch_len()
                .max(col.get_inplace_scratch_len())
        ];
        for r in data.chunks_exact_mut(w) {
            row.process_with_scratch(r, &mut scratch);
        }
        let mut t = vec![Complex64::default(); w * h];
        for r in 0..h {
            for c in 0..w {
                t[c * h + r] = data[r * w + c];
            }
        }
        for r in t.chunks_exact_mut(h) {
            col.process_with_scratch(r, &mut scratch);
        }
        for r in 0..h {
            for c in 0..w {
                data[r * w + c] = t[c * h + r];
            }
        }
        let scale = 1.0 / (self.grid.len() as f64).sqrt();
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub fn forward(&self, field: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(field.len())?;
        let mut data = field.to_vec();
        self.transform(&mut data, &self.row_fwd, &self.col_fwd);
        Ok(data)
    }

    pub fn inverse(&self, spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(spectrum.len())?;
        let mut data = spectrum.to_vec();
        self.transform(&mut data, &self.row_inv, &self.col_inv);
        Ok(data)
    }

    pub fn forward_real(&self, field: &[f64]) -> Result<Vec<Complex64>> {
        self.check_len(field.len())?;
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.row_fwd, &self.col_fwd);
        Ok(data)
    }

    /// Inverse transform of a spectrum claimed to come from a real field.
    /// Rejects spectra whose Hermitian residual exceeds the tolerance
    /// instead of silently discarding imaginary mass.
    pub fn inverse_real(&self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        self.check_len(spectrum.len())?;
        check_hermitian(self.grid, spectrum, DEFAULT_SYMMETRY_TOL)?;
        let data = self.inverse(spectrum)?;
        Ok(data.into_iter().map(|v| v.re).collect())
    }
}

/// Largest |s(p) - conj(s(partner))| over all bins.
pub fn hermitian_residual(grid: Grid, spectrum: &[Complex64]) -> f64 {
    let mut worst = 0.0f64;
    for p in 0..spectrum.len() {
        let q = grid.conjugate_partner(p);
        worst = worst.max((spectrum[p] - spectrum[q].conj()).norm());
    }
    worst
}

/// Enforce Hermitian symmetry up to `tol` relative to the spectrum's peak
/// magnitude (absolute for the zero spectrum).
pub fn check_hermitian(grid: Grid, spectrum: &[Complex64], tol: f64) -> Result<()> {
    let residual = hermitian_residual(grid, spectrum);
    let peak = spectrum.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let tolerance = tol * peak.max(1.0);
    if residual > tolerance {
        return Err(Error::SymmetryViolation {
            residual,
            tolerance,
        });
    }
    Ok(())
}
