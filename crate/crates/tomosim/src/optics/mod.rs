//! Pupil-based defocus and aberration transfer functions.
//!
//! Depth is expressed in diopters throughout; the defocus between an
//! accommodation plane `z_s` and an image plane `z_img` is
//! `delta = z_s - z_img`, which maps to the pupil-edge optical path
//! difference `W20 = delta * (d/2)^2 / 2` (meters). Retinal spatial
//! frequencies are object-side angular frequencies in cycles per degree;
//! the pupil autocorrelation shear for a frequency `f` is
//! `s = lambda * f * (180/pi)`.

mod pupil;
pub mod zernike;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use zernike::MAX_ANSI_INDEX;

/// Cycles per radian in one cycle per degree.
pub const CYCLES_PER_RADIAN_PER_CPD: f64 = 180.0 / std::f64::consts::PI;

/// Directions averaged for OTFs of non-rotationally-symmetric pupils.
const AZIMUTHAL_DIRECTIONS: usize = 8;

#[derive(Debug, Error)]
pub enum OpticsError {
    #[error("invalid optical config: {0}")]
    InvalidConfig(String),
    #[error("pupil sampling too coarse for the requested defocus/aberration: need pupil_grid >= {required}, have {actual}")]
    Sampling { required: usize, actual: usize },
    #[error("unsupported Zernike index {0} (ANSI indices 0..=90 are supported)")]
    UnsupportedZernike(usize),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("depth grid must be strictly increasing: {0}")]
    GridNotIncreasing(&'static str),
}

/// Pupil, wavelength, and frequency-band parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalConfig {
    /// Wavelength in meters.
    pub wavelength: f64,
    /// Pupil diameter in meters.
    pub pupil_diameter: f64,
    /// Quadrature samples per side for pupil integrals (>= 64, even).
    pub pupil_grid: usize,
    /// Upper edge of the frequency band, cycles per degree.
    pub max_frequency: f64,
    /// Samples across `[0, max_frequency]`, endpoint inclusive.
    pub frequency_samples: usize,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self {
            wavelength: 550e-9,
            pupil_diameter: 6e-3,
            pupil_grid: 256,
            max_frequency: 10.0,
            frequency_samples: 64,
        }
    }
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(OpticsError::InvalidConfig("wavelength must be > 0".into()));
        }
        if !(self.pupil_diameter > 0.0 && self.pupil_diameter.is_finite()) {
            return Err(OpticsError::InvalidConfig(
                "pupil_diameter must be > 0".into(),
            ));
        }
        if self.pupil_grid < 64 || self.pupil_grid % 2 != 0 {
            return Err(OpticsError::InvalidConfig(
                "pupil_grid must be >= 64 and even".into(),
            ));
        }
        if !(self.max_frequency > 0.0 && self.max_frequency.is_finite()) {
            return Err(OpticsError::InvalidConfig(
                "max_frequency must be > 0".into(),
            ));
        }
        if self.frequency_samples < 2 {
            return Err(OpticsError::InvalidConfig(
                "frequency_samples must be >= 2".into(),
            ));
        }
        Ok(())
    }

    /// Pupil radius in meters.
    pub fn pupil_radius(&self) -> f64 {
        self.pupil_diameter / 2.0
    }

    /// The frequency grid in cycles per degree, starting exactly at 0.
    pub fn frequency_grid(&self) -> Vec<f64> {
        let n = self.frequency_samples;
        (0..n)
            .map(|k| self.max_frequency * k as f64 / (n - 1) as f64)
            .collect()
    }

    /// Incoherent diffraction cutoff d / lambda, in cycles per degree.
    pub fn cutoff_cpd(&self) -> f64 {
        self.pupil_diameter / self.wavelength / CYCLES_PER_RADIAN_PER_CPD
    }

    /// Autocorrelation shear (meters) for a frequency in cycles per degree.
    fn shear_for(&self, f_cpd: f64) -> f64 {
        self.wavelength * f_cpd * CYCLES_PER_RADIAN_PER_CPD
    }
}

/// Pupil-phase aberrations: Zernike coefficients plus the Seidel field
/// curvature coefficient used for off-axis depth offsets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AberrationSpec {
    /// (ANSI index, coefficient in waves) pairs; empty means aberration-free.
    pub zernike: Vec<(usize, f64)>,
    /// Seidel field curvature W220 in waves at full field.
    pub field_curvature_waves: f64,
}

impl AberrationSpec {
    pub fn validate(&self) -> Result<(), OpticsError> {
        if !self.field_curvature_waves.is_finite() {
            return Err(OpticsError::NonFinite("field_curvature_waves"));
        }
        for &(j, c) in &self.zernike {
            zernike::ansi_to_nm(j)?;
            if !c.is_finite() {
                return Err(OpticsError::NonFinite("zernike coefficient"));
            }
        }
        Ok(())
    }

    /// Zernike terms that contribute pupil phase; piston is a global phase
    /// and drops out of the autocorrelation.
    fn active_terms(&self) -> Vec<(usize, f64)> {
        self.zernike
            .iter()
            .copied()
            .filter(|&(j, c)| j != 0 && c != 0.0)
            .collect()
    }
}

/// Complex transfer function sampled on a radial frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Otf {
    frequencies: Vec<f64>,
    values: Vec<Complex64>,
    source_depth: f64,
    image_depth: f64,
}

impl Otf {
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Accommodation-plane depth z_s in diopters.
    pub fn source_depth(&self) -> f64 {
        self.source_depth
    }

    /// Layer/image depth in diopters.
    pub fn image_depth(&self) -> f64 {
        self.image_depth
    }

    /// MTF (modulus) samples.
    pub fn mtf(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Linear interpolation of the complex profile at an arbitrary
    /// frequency; zero beyond the sampled band.
    pub fn value_at(&self, f_cpd: f64) -> Complex64 {
        let f = f_cpd.abs();
        let grid = &self.frequencies;
        if f >= *grid.last().unwrap() {
            return if (f - grid.last().unwrap()).abs() < 1e-12 {
                *self.values.last().unwrap()
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        let hi = grid.partition_point(|&g| g <= f).min(grid.len() - 1);
        let lo = hi - 1;
        let t = (f - grid[lo]) / (grid[hi] - grid[lo]);
        self.values[lo] * (1.0 - t) + self.values[hi] * t
    }

    /// First sign change of the real part, linearly interpolated; `None`
    /// when the profile never crosses zero. For a symmetric pupil the OTF is
    /// real, so this is the first MTF null.
    pub fn first_null_cpd(&self) -> Option<f64> {
        for i in 0..self.values.len() - 1 {
            let (a, b) = (self.values[i].re, self.values[i + 1].re);
            if a > 0.0 && b <= 0.0 {
                let t = a / (a - b);
                return Some(self.frequencies[i] + t * (self.frequencies[i + 1] - self.frequencies[i]));
            }
        }
        None
    }
}

/// Ideal-pupil OTF: zero defocus, no aberrations. Real, non-negative, and
/// radially non-increasing over the band.
pub fn diffraction_limited_otf(config: &OpticalConfig) -> Result<Otf, OpticsError> {
    defocus_otf(0.0, 0.0, config, &AberrationSpec::default())
}

/// OTF for an accommodation plane `z_s` viewing an image plane at `z_img`
/// (both diopters) through the configured pupil with the given aberrations.
pub fn defocus_otf(
    z_s: f64,
    z_img: f64,
    config: &OpticalConfig,
    aberr: &AberrationSpec,
) -> Result<Otf, OpticsError> {
    config.validate()?;
    aberr.validate()?;
    if !z_s.is_finite() || !z_img.is_finite() {
        return Err(OpticsError::NonFinite("depth"));
    }

    let a = config.pupil_radius();
    let lambda = config.wavelength;
    let k = 2.0 * std::f64::consts::PI / lambda;
    let delta = z_s - z_img;
    let w20 = delta * a * a / 2.0;
    let terms = aberr.active_terms();
    let freqs = config.frequency_grid();
    let samples_1d = config.pupil_grid * pupil::DEFOCUS_OVERSAMPLE;

    let max_shear = config.shear_for(config.max_frequency).min(2.0 * a);
    let max_rate = 2.0 * k * w20.abs() * max_shear / (a * a);
    pupil::check_defocus_sampling(a, max_shear, max_rate, samples_1d, config.pupil_grid)?;

    let values = if terms.is_empty() {
        let norm = pupil::quadrature_area(a, samples_1d);
        freqs
            .iter()
            .map(|&f| {
                let s = config.shear_for(f);
                let rate = 2.0 * k * w20 * s / (a * a);
                pupil::defocus_autocorr(a, s, rate, samples_1d) / norm
            })
            .collect()
    } else {
        check_general_sampling(a, k, w20, &terms, config.pupil_grid)?;
        let nu = config.pupil_grid;
        let nv = config.pupil_grid;
        let norm = pupil::general_area(a, nu);
        let directions = if zernike::all_rotationally_symmetric(&terms) {
            1
        } else {
            AZIMUTHAL_DIRECTIONS
        };
        let mut vals = Vec::with_capacity(freqs.len());
        for &f in &freqs {
            let s = config.shear_for(f);
            let mut acc = Complex64::new(0.0, 0.0);
            for dir in 0..directions {
                let theta = std::f64::consts::PI * dir as f64 / directions as f64;
                let (ct, st) = (theta.cos(), theta.sin());
                let phase = |x: f64, y: f64| {
                    // rotate shear-aligned coordinates into the pupil frame
                    let px = x * ct - y * st;
                    let py = x * st + y * ct;
                    let rho2 = (px * px + py * py) / (a * a);
                    let zern = zernike::zernike_sum(&terms, px / a, py / a)
                        .expect("terms validated above");
                    k * w20 * rho2 + 2.0 * std::f64::consts::PI * zern
                };
                acc += pupil::general_autocorr(a, s, nu, nv, phase);
            }
            vals.push(acc / (directions as f64 * norm));
        }
        vals
    };

    Ok(Otf {
        frequencies: freqs,
        values,
        source_depth: z_s,
        image_depth: z_img,
    })
}

/// Phase-step check for the general path: finite-difference estimate of the
/// steepest pupil-phase gradient against the quadrature pitch.
fn check_general_sampling(
    a: f64,
    k: f64,
    w20: f64,
    terms: &[(usize, f64)],
    pupil_grid: usize,
) -> Result<(), OpticsError> {
    let probe = 64usize;
    let mut max_grad = 0.0f64; // radians per normalized pupil unit
    for iy in 0..probe {
        for ix in 0..probe {
            let x = -1.0 + 2.0 * (ix as f64 + 0.5) / probe as f64;
            let y = -1.0 + 2.0 * (iy as f64 + 0.5) / probe as f64;
            if x * x + y * y > 1.0 {
                continue;
            }
            let h = 1.0 / probe as f64;
            let phi = |px: f64, py: f64| -> Result<f64, OpticsError> {
                Ok(k * w20 * (px * px + py * py)
                    + 2.0 * std::f64::consts::PI * zernike::zernike_sum(terms, px, py)?)
            };
            let gx = (phi((x + h).min(1.0), y)? - phi(x, y)?) / h;
            let gy = (phi(x, (y + h).min(1.0))? - phi(x, y)?) / h;
            max_grad = max_grad.max(gx.abs()).max(gy.abs());
        }
    }
    // Quadrature pitch in normalized units is ~2/pupil_grid along each axis.
    let step = max_grad * 2.0 / pupil_grid as f64;
    if step >= std::f64::consts::PI {
        let required = ((2.0 * max_grad / std::f64::consts::PI).ceil() as usize + 1)
            .next_multiple_of(2);
        return Err(OpticsError::Sampling {
            required,
            actual: pupil_grid,
        });
    }
    let _ = a;
    Ok(())
}

/// Sampled pupil phase map over the unit square, radians; zero outside the
/// unit disk.
#[derive(Debug, Clone)]
pub struct PhaseMap {
    pub resolution: usize,
    /// Row-major samples over [-1, 1]^2 at pixel centers.
    pub values: Vec<f64>,
}

/// Samples the summed Zernike phase over the unit pupil. Coefficients are in
/// waves; the returned map is in radians.
pub fn zernike_phase(
    coeffs: &[(usize, f64)],
    config: &OpticalConfig,
) -> Result<PhaseMap, OpticsError> {
    config.validate()?;
    let n = config.pupil_grid;
    let mut values = vec![0.0; n * n];
    for iy in 0..n {
        let y = -1.0 + 2.0 * (iy as f64 + 0.5) / n as f64;
        for ix in 0..n {
            let x = -1.0 + 2.0 * (ix as f64 + 0.5) / n as f64;
            if x * x + y * y <= 1.0 {
                values[iy * n + ix] =
                    2.0 * std::f64::consts::PI * zernike::zernike_sum(coeffs, x, y)?;
            }
        }
    }
    Ok(PhaseMap {
        resolution: n,
        values,
    })
}

/// Dioptric defocus offset induced by Seidel field curvature at a relative
/// field position. The OPD scales with the square of the field fraction and
/// converts through the inverse of `W20 = delta * (d/2)^2 / 2`.
pub fn field_curvature_offset(
    field_fraction: f64,
    aberr: &AberrationSpec,
    config: &OpticalConfig,
) -> f64 {
    let ff = field_fraction.clamp(0.0, 1.0);
    let w20 = ff * ff * aberr.field_curvature_waves * config.wavelength;
    let a = config.pupil_radius();
    2.0 * w20 / (a * a)
}

/// Complete table of OTFs over accommodation planes x tomographic layers.
/// Immutable after construction; entries are pure functions of the inputs so
/// construction order is irrelevant.
#[derive(Debug, Clone)]
pub struct OtfBank {
    accommodation_depths: Vec<f64>,
    layer_depths: Vec<f64>,
    config: OpticalConfig,
    aberration: AberrationSpec,
    table: Vec<Otf>, // index i * n + j
}

impl OtfBank {
    pub fn build(
        accommodation_depths: &[f64],
        layer_depths: &[f64],
        config: &OpticalConfig,
        aberr: &AberrationSpec,
    ) -> Result<Self, OpticsError> {
        config.validate()?;
        aberr.validate()?;
        ensure_strictly_increasing(accommodation_depths, "accommodation depths")?;
        ensure_strictly_increasing(layer_depths, "layer depths")?;
        let m = accommodation_depths.len();
        let n = layer_depths.len();
        let table: Result<Vec<Otf>, OpticsError> = (0..m * n)
            .into_par_iter()
            .map(|idx| {
                let i = idx / n;
                let j = idx % n;
                defocus_otf(accommodation_depths[i], layer_depths[j], config, aberr)
            })
            .collect();
        Ok(Self {
            accommodation_depths: accommodation_depths.to_vec(),
            layer_depths: layer_depths.to_vec(),
            config: config.clone(),
            aberration: aberr.clone(),
            table: table?,
        })
    }

    pub fn accommodation_depths(&self) -> &[f64] {
        &self.accommodation_depths
    }

    pub fn layer_depths(&self) -> &[f64] {
        &self.layer_depths
    }

    pub fn config(&self) -> &OpticalConfig {
        &self.config
    }

    pub fn aberration(&self) -> &AberrationSpec {
        &self.aberration
    }

    pub fn frequencies(&self) -> &[f64] {
        self.table[0].frequencies()
    }

    /// OTF for accommodation plane `i` and layer `j`.
    pub fn otf(&self, i: usize, j: usize) -> &Otf {
        &self.table[i * self.layer_depths.len() + j]
    }

    pub fn plane_count(&self) -> usize {
        self.accommodation_depths.len()
    }

    pub fn layer_count(&self) -> usize {
        self.layer_depths.len()
    }

    /// OTFs from every accommodation plane to an arbitrary image depth. When
    /// the depth coincides with a layer the stored column is reused, which
    /// keeps on-grid targets bit-identical to the bank entries.
    pub fn target_column(&self, z_d: f64) -> Result<Vec<Otf>, OpticsError> {
        if let Some(j) = self
            .layer_depths
            .iter()
            .position(|&z| z == z_d)
        {
            return Ok((0..self.plane_count())
                .map(|i| self.otf(i, j).clone())
                .collect());
        }
        (0..self.plane_count())
            .into_par_iter()
            .map(|i| {
                defocus_otf(
                    self.accommodation_depths[i],
                    z_d,
                    &self.config,
                    &self.aberration,
                )
            })
            .collect()
    }
}

pub(crate) fn ensure_strictly_increasing(
    values: &[f64],
    what: &'static str,
) -> Result<(), OpticsError> {
    if values.is_empty() {
        return Err(OpticsError::GridNotIncreasing(what));
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) || values.iter().any(|v| !v.is_finite()) {
        return Err(OpticsError::GridNotIncreasing(what));
    }
    Ok(())
}

/// Uniform layer grid: `count` layers starting at `min_diopters` with
/// spacing `(max - min) / count`. The far endpoint `min` (largest viewing
/// distance) is included; the top of the range is the upper edge of the last
/// layer interval.
pub fn layer_grid(count: usize, min_diopters: f64, max_diopters: f64) -> Vec<f64> {
    let spacing = (max_diopters - min_diopters) / count as f64;
    (0..count).map(|j| min_diopters + j as f64 * spacing).collect()
}
