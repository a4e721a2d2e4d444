//! TOML configuration shared by the CLI and the examples. Every section and
//! field has a default, so an empty file (or no file) is a valid
//! configuration describing the naive display: 80 layers over 0-5.5 D, no
//! leakage, no brightness bound.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{layer_grid, AberrationSpec, OpticalConfig, OtfBank};
use crate::perception::CsfModel;
use crate::render::Waveform;
use crate::sim::{NormalizationMode, SimulationConfig};
use crate::strategy::{
    brightness_bound_from_fraction, GaParams, GammaMode, ProblemTemplate, SpectrumMode,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub optics: OpticsSection,
    #[serde(default)]
    pub aberrations: AberrationsSection,
    #[serde(default)]
    pub layers: LayersSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub brightness: BrightnessSection,
    #[serde(default)]
    pub ga: GaSection,
    #[serde(default)]
    pub csf: CsfSection,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub simulate: SimulateSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsSection {
    pub wavelength: f64,
    pub pupil_diameter: f64,
    pub pupil_grid: usize,
    pub max_frequency: f64,
    pub frequency_samples: usize,
    /// Optional per-channel wavelengths (R, G, B) for simulation.
    pub channel_wavelengths: Option<[f64; 3]>,
}

impl Default for OpticsSection {
    fn default() -> Self {
        let o = OpticalConfig::default();
        Self {
            wavelength: o.wavelength,
            pupil_diameter: o.pupil_diameter,
            pupil_grid: o.pupil_grid,
            max_frequency: o.max_frequency,
            frequency_samples: o.frequency_samples,
            channel_wavelengths: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AberrationsSection {
    /// Inline (ANSI index, waves) pairs.
    pub zernike: Vec<(usize, f64)>,
    /// Optional plain-text preset of "index waves" lines, applied on top of
    /// the inline terms.
    pub preset_file: Option<String>,
    pub field_curvature_waves: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayersSection {
    pub count: usize,
    pub min_diopters: f64,
    pub max_diopters: f64,
}

impl Default for LayersSection {
    fn default() -> Self {
        Self {
            count: 80,
            min_diopters: 0.0,
            max_diopters: 5.5,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrightnessSection {
    /// A_low as a fraction of the layer count; 0 disables the bound.
    pub a_low_fraction: f64,
    /// "auto" derives gamma from the problem; "fixed" uses `gamma`.
    pub gamma_mode: String,
    pub gamma: f64,
}

impl Default for BrightnessSection {
    fn default() -> Self {
        Self {
            a_low_fraction: 0.0,
            gamma_mode: "auto".to_string(),
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSection {
    pub population_size: usize,
    pub max_generations: usize,
    pub mutation_rate: Option<f64>,
    pub crossover_probability: f64,
    pub tournament_size: usize,
    pub elitism: usize,
}

impl Default for GaSection {
    fn default() -> Self {
        let p = GaParams::default();
        Self {
            population_size: p.population_size,
            max_generations: p.max_generations,
            mutation_rate: p.mutation_rate,
            crossover_probability: p.crossover_probability,
            tournament_size: p.tournament_size,
            elitism: p.elitism,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsfSection {
    pub peak_frequency: f64,
    pub peak_sensitivity: f64,
    pub low_freq_exponent: f64,
    pub high_freq_decay: f64,
    /// "complex" compares complex spectra; "magnitude" compares moduli.
    pub spectrum_mode: String,
}

impl Default for CsfSection {
    fn default() -> Self {
        let m = CsfModel::default();
        Self {
            peak_frequency: m.peak_frequency,
            peak_sensitivity: m.peak_sensitivity,
            low_freq_exponent: m.low_freq_exponent,
            high_freq_decay: m.high_freq_decay,
            spectrum_mode: "complex".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSection {
    /// "diopters" or "meters" for float depth inputs.
    pub depth_units: String,
    /// Affine remap of the input depth range onto the layer range, for
    /// content whose absolute depth scale is arbitrary.
    pub remap_to_range: bool,
    pub waveform: String,
    pub cycle_rate_hz: f64,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            depth_units: "diopters".to_string(),
            remap_to_range: false,
            waveform: "ramp".to_string(),
            cycle_rate_hz: 60.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub accommodation_depths: Vec<f64>,
    pub field_of_view_degrees: f64,
    /// "per_pixel" or "cycle_average".
    pub normalization: String,
    pub field_bins: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            accommodation_depths: vec![0.0, 0.91667, 1.83333, 2.75, 3.66667, 4.58333, 5.5],
            field_of_view_degrees: 30.0,
            normalization: "per_pixel".to_string(),
            field_bins: 0,
        }
    }
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(toml::from_str(&text)?)
    }

    pub fn optical_config(&self) -> OpticalConfig {
        OpticalConfig {
            wavelength: self.optics.wavelength,
            pupil_diameter: self.optics.pupil_diameter,
            pupil_grid: self.optics.pupil_grid,
            max_frequency: self.optics.max_frequency,
            frequency_samples: self.optics.frequency_samples,
        }
    }

    pub fn aberration_spec(&self) -> Result<AberrationSpec, ConfigError> {
        let mut zernike = self.aberrations.zernike.clone();
        if let Some(preset) = &self.aberrations.preset_file {
            let extra =
                crate::io::read_zernike_preset(Path::new(preset)).map_err(|e| {
                    ConfigError::Invalid(format!("zernike preset {preset}: {e}"))
                })?;
            zernike.extend(extra);
        }
        Ok(AberrationSpec {
            zernike,
            field_curvature_waves: self.aberrations.field_curvature_waves,
        })
    }

    pub fn layer_depths(&self) -> Result<Vec<f64>, ConfigError> {
        if self.layers.count == 0 {
            return Err(ConfigError::Invalid("layers.count must be >= 1".into()));
        }
        if !(self.layers.min_diopters < self.layers.max_diopters) {
            return Err(ConfigError::Invalid(
                "layers.min_diopters must be below layers.max_diopters".into(),
            ));
        }
        Ok(layer_grid(
            self.layers.count,
            self.layers.min_diopters,
            self.layers.max_diopters,
        ))
    }

    /// Accommodation planes for optimization: the layer grid plus one plane
    /// at the top of the depth range, so the sweep covers [min, max]
    /// inclusive.
    pub fn accommodation_depths(&self) -> Result<Vec<f64>, ConfigError> {
        let mut planes = self.layer_depths()?;
        planes.push(self.layers.max_diopters);
        Ok(planes)
    }

    pub fn csf_model(&self) -> CsfModel {
        CsfModel {
            peak_frequency: self.csf.peak_frequency,
            peak_sensitivity: self.csf.peak_sensitivity,
            low_freq_exponent: self.csf.low_freq_exponent,
            high_freq_decay: self.csf.high_freq_decay,
        }
    }

    pub fn spectrum_mode(&self) -> Result<SpectrumMode, ConfigError> {
        match self.csf.spectrum_mode.as_str() {
            "complex" => Ok(SpectrumMode::Complex),
            "magnitude" => Ok(SpectrumMode::Magnitude),
            other => Err(ConfigError::Invalid(format!(
                "csf.spectrum_mode must be \"complex\" or \"magnitude\", got {other:?}"
            ))),
        }
    }

    pub fn gamma_mode(&self) -> Result<GammaMode, ConfigError> {
        match self.brightness.gamma_mode.as_str() {
            "auto" => Ok(GammaMode::Auto),
            "fixed" => Ok(GammaMode::Fixed(self.brightness.gamma)),
            other => Err(ConfigError::Invalid(format!(
                "brightness.gamma_mode must be \"auto\" or \"fixed\", got {other:?}"
            ))),
        }
    }

    pub fn brightness_bound(&self) -> usize {
        brightness_bound_from_fraction(self.brightness.a_low_fraction, self.layers.count)
    }

    pub fn ga_params(&self, seed: u64) -> GaParams {
        GaParams {
            population_size: self.ga.population_size,
            max_generations: self.ga.max_generations,
            mutation_rate: self.ga.mutation_rate,
            crossover_probability: self.ga.crossover_probability,
            tournament_size: self.ga.tournament_size,
            elitism: self.ga.elitism,
            rng_seed: seed,
        }
    }

    pub fn waveform(&self) -> Result<Waveform, ConfigError> {
        match self.render.waveform.as_str() {
            "ramp" => Ok(Waveform::Ramp),
            "triangle" => Ok(Waveform::Triangle),
            other => Err(ConfigError::Invalid(format!(
                "render.waveform must be \"ramp\" or \"triangle\", got {other:?}"
            ))),
        }
    }

    /// Builds the OTF bank for optimization (accommodation planes x layers)
    /// and wraps it into a problem template. This is the expensive step;
    /// reuse the template across targets.
    pub fn problem_template(&self) -> Result<ProblemTemplate, ConfigError> {
        let layers = self.layer_depths()?;
        let planes = self.accommodation_depths()?;
        let bank = OtfBank::build(
            &planes,
            &layers,
            &self.optical_config(),
            &self.aberration_spec()?,
        )?;
        Ok(ProblemTemplate {
            bank: Arc::new(bank),
            dc_noise: self.noise.c,
            brightness_bound: self.brightness_bound(),
            gamma: self.gamma_mode()?,
            csf: self.csf_model(),
            spectrum_mode: self.spectrum_mode()?,
        })
    }

    pub fn simulation_config(&self) -> Result<SimulationConfig, ConfigError> {
        let normalization = match self.simulate.normalization.as_str() {
            "per_pixel" => NormalizationMode::PerPixel,
            "cycle_average" => NormalizationMode::CycleAverage,
            other => {
                return Err(ConfigError::Invalid(format!(
                    "simulate.normalization must be \"per_pixel\" or \"cycle_average\", got {other:?}"
                )))
            }
        };
        Ok(SimulationConfig {
            accommodation_depths: self.simulate.accommodation_depths.clone(),
            optics: self.optical_config(),
            aberrations: self.aberration_spec()?,
            dc_noise: self.noise.c,
            field_of_view_degrees: self.simulate.field_of_view_degrees,
            normalization,
            field_bins: self.simulate.field_bins,
            channel_wavelengths: self.optics.channel_wavelengths,
        })
    }
}
