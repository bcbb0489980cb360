//! Spectral density families and blur transfer functions evaluated on a
//! grid.
//!
//! Four stationary prior shapes (Lorentz, Gauss, Laplace, White) give the
//! per-frequency variance profiles for images and noise. Blur is defined
//! by a spatial impulse response on the periodic grid and carried around
//! as its transfer function, so convolution is a pointwise product on
//! spectra.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Dft, Grid};

/// Bandwidth used when a configuration does not specify one.
pub const DEFAULT_OMEGA: f64 = 0.05;

/// Values below 1e-12 of the field maximum are clamped up to it, keeping
/// every 1/s finite when Gauss/Laplace tails underflow.
pub const PSD_FLOOR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsdFamily {
    Lorentz,
    Gauss,
    Laplace,
    White,
}

impl PsdFamily {
    pub const ALL: [PsdFamily; 4] = [
        PsdFamily::Lorentz,
        PsdFamily::Gauss,
        PsdFamily::Laplace,
        PsdFamily::White,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PsdFamily::Lorentz => "Lorentz",
            PsdFamily::Gauss => "Gauss",
            PsdFamily::Laplace => "Laplace",
            PsdFamily::White => "White",
        }
    }
}

impl std::fmt::Display for PsdFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One density shape plus its bandwidth. `gauss_isotropic` swaps the
/// Gauss exponent (nu_h + nu_v)^2 for nu_h^2 + nu_v^2; it is off by
/// default and ignored by the other families.
///
/// Deserializes from either a bare family name (`"lorentz"`, defaults
/// applied) or the full form (`{"family": "gauss", "omega": 0.1}`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdKind {
    pub family: PsdFamily,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub gauss_isotropic: bool,
}

fn default_omega() -> f64 {
    DEFAULT_OMEGA
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PsdKindRepr {
    Name(PsdFamily),
    Full {
        family: PsdFamily,
        #[serde(default = "default_omega")]
        omega: f64,
        #[serde(default)]
        gauss_isotropic: bool,
    },
}

impl<'de> Deserialize<'de> for PsdKind {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        Ok(match PsdKindRepr::deserialize(de)? {
            PsdKindRepr::Name(family) => PsdKind::new(family),
            PsdKindRepr::Full {
                family,
                omega,
                gauss_isotropic,
            } => PsdKind {
                family,
                omega,
                gauss_isotropic,
            },
        })
    }
}

impl PsdKind {
    pub fn new(family: PsdFamily) -> Self {
        Self {
            family,
            omega: DEFAULT_OMEGA,
            gauss_isotropic: false,
        }
    }

    pub fn with_omega(family: PsdFamily, omega: f64) -> Self {
        Self {
            family,
            omega,
            gauss_isotropic: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.family != PsdFamily::White && !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::config(format!(
                "{} density needs a positive bandwidth, got {}",
                self.family, self.omega
            )));
        }
        Ok(())
    }

    fn value(&self, nu_h: f64, nu_v: f64) -> f64 {
        let w = self.omega;
        match self.family {
            PsdFamily::Lorentz => {
                1.0 / ((PI * w * w) * (1.0 + (nu_h / w).powi(2)) * (1.0 + (nu_v / w).powi(2)))
            }
            PsdFamily::Gauss => {
                let q = if self.gauss_isotropic {
                    nu_h * nu_h + nu_v * nu_v
                } else {
                    (nu_h + nu_v).powi(2)
                };
                (-q / (2.0 * w * w)).exp() / (2.0 * PI * w * w)
            }
            PsdFamily::Laplace => (-(nu_h.abs() + nu_v.abs()) / w).exp() / (4.0 * w * w),
            PsdFamily::White => 1.0,
        }
    }
}

/// A density profile evaluated on every bin of a grid, floored so all
/// entries are strictly positive.
#[derive(Debug, Clone)]
pub struct PsdField {
    kind: PsdKind,
    values: Vec<f64>,
}

impl PsdField {
    /// Wrap precomputed values, bypassing evaluation and the floor.
    /// Test scaffolding for exercising density formulas with hand-picked
    /// spectra.
    #[cfg(test)]
    pub(crate) fn from_raw(kind: PsdKind, values: Vec<f64>) -> Self {
        Self { kind, values }
    }

    pub fn kind(&self) -> PsdKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Evaluate `kind` at every bin frequency and clamp at the relative
/// floor.
pub fn evaluate_psd(kind: PsdKind, grid: Grid) -> Result<PsdField> {
    kind.validate()?;
    let raw: Vec<f64> = (0..grid.len())
        .map(|p| {
            let (nu_h, nu_v) = grid.frequency(p);
            kind.value(nu_h, nu_v)
        })
        .collect();
    // A real circulant covariance is Re(F' diag(s) F), whose spectrum is
    // the conjugate-partner average of s. The formulas are already
    // partner-symmetric except for the anisotropic Gauss on Nyquist
    // lines, where nu and -nu are not congruent; averaging there keeps
    // sampling, likelihood, and brute-force references on one field.
    let mut values: Vec<f64> = (0..grid.len())
        .map(|p| 0.5 * (raw[p] + raw[grid.conjugate_partner(p)]))
        .collect();
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if !max.is_finite() || max <= 0.0 {
        return Err(Error::numerical(format!(
            "density field for {} degenerated (max {max})",
            kind.family
        )));
    }
    let floor = PSD_FLOOR_REL * max;
    for v in values.iter_mut() {
        if *v < floor {
            *v = floor;
        }
    }
    Ok(PsdField { kind, values })
}

/// Transfer function of a periodic convolution by a real impulse
/// response. `gain2` caches |s_h|^2 for the precision updates.
#[derive(Debug, Clone)]
pub struct BlurTransfer {
    s_h: Vec<Complex64>,
    gain2: Vec<f64>,
}

impl BlurTransfer {
    /// No-op blur: s_h(p) = 1 everywhere.
    pub fn identity(grid: Grid) -> Self {
        Self {
            s_h: vec![Complex64::new(1.0, 0.0); grid.len()],
            gain2: vec![1.0; grid.len()],
        }
    }

    /// Build from a spatial impulse response laid out on the full grid
    /// (origin at pixel (0,0), negative offsets wrapped). The response is
    /// normalized to unit sum, so the DC gain is 1 and blurring preserves
    /// mean intensity.
    pub fn from_impulse_response(h: &[f64], grid: Grid) -> Result<Self> {
        if h.len() != grid.len() {
            return Err(Error::config(format!(
                "impulse response has {} samples, grid needs {}",
                h.len(),
                grid.len()
            )));
        }
        let sum: f64 = h.iter().sum();
        if !sum.is_finite() || sum.abs() < 1e-30 {
            return Err(Error::config(format!(
                "impulse response sum {sum} cannot be normalized to unit gain"
            )));
        }
        let normalized: Vec<f64> = h.iter().map(|v| v / sum).collect();
        let scale = (grid.len() as f64).sqrt();
        let s_h: Vec<Complex64> = Dft::new(grid)
            .forward_real(&normalized)?
            .into_iter()
            .map(|v| v * scale)
            .collect();
        let gain2 = s_h.iter().map(|v| v.norm_sqr()).collect();
        Ok(Self { s_h, gain2 })
    }

    /// Separable cardinal-sine response h(m,n) = sinc(m/w) sinc(n/w)
    /// sampled over the whole periodic grid. w = 1 lands every nonzero
    /// integer offset on a sinc zero, giving the identity exactly.
    pub fn sinc(width: f64, grid: Grid) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::config(format!(
                "sinc blur width must be positive, got {width}"
            )));
        }
        let (w, h) = (grid.width(), grid.height());
        let mut response = vec![0.0f64; grid.len()];
        for r in 0..h {
            let m = centered_offset(r, h);
            let row_factor = sinc(m / width);
            for c in 0..w {
                let n = centered_offset(c, w);
                response[r * w + c] = row_factor * sinc(n / width);
            }
        }
        Self::from_impulse_response(&response, grid)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.s_h
    }

    pub fn gain2(&self) -> &[f64] {
        &self.gain2
    }

    /// Pointwise product with a spectrum: convolution in image space.
    pub fn apply_spectrum(&self, x_hat: &[Complex64]) -> Vec<Complex64> {
        x_hat.iter().zip(&self.s_h).map(|(x, s)| x * s).collect()
    }
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        let pt = PI * t;
        pt.sin() / pt
    }
}

/// Signed sample offset with the origin at index 0 and the wrap at half
/// the axis length, matching the frequency convention.
fn centered_offset(i: usize, n: usize) -> f64 {
    if i < n.div_ceil(2) {
        i as f64
    } else {
        i as f64 - n as f64
    }
}
