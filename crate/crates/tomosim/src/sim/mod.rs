//! Retinal-image and focal-stack simulation, plus contrast and
//! contrast-error maps over (target depth, accommodation depth) grids.
//!
//! A backlight sequence is simulated as an incoherent superposition: every
//! subframe contributes its masked display image blurred by the OTF between
//! the viewer's accommodation plane and that subframe's layer depth.
//! Convolution runs through the DFT with symmetric boundary padding by the
//! blur support, and per-channel in linear light.

mod fft;

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{
    defocus_otf, field_curvature_offset, AberrationSpec, OpticalConfig, OpticsError, Otf,
};
use crate::perception::PerceptionError;
use crate::raster::{ColorImage, Grid2};
use crate::render::BacklightSequence;
use crate::strategy::{
    reconstruction_spectrum, ProblemTemplate, StrategyError, StrategyTable,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("at least one accommodation depth is required")]
    EmptyDepthList,
    #[error("accommodation depths must be strictly increasing and finite")]
    DepthsNotIncreasing,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("contrast map grids do not match: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

/// Output normalization of the simulated image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Divide by the per-pixel illumination `sum_k (mask_k + c)`; the
    /// display-referred image, independent of illumination time.
    PerPixel,
    /// Divide by the subframe count: the radiometric cycle average, where a
    /// pixel lit for A of n subframes is A/n as bright as a fully lit one.
    CycleAverage,
}

/// Inputs of a retinal-image simulation.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub accommodation_depths: Vec<f64>,
    pub optics: OpticalConfig,
    pub aberrations: AberrationSpec,
    /// Backlight leakage added to off subframes.
    pub dc_noise: f64,
    /// Horizontal field of view mapped across the scene width.
    pub field_of_view_degrees: f64,
    pub normalization: NormalizationMode,
    /// Radial bins for field-curvature-dependent blur; 0 picks a bin count
    /// fine enough for a quarter layer spacing.
    pub field_bins: usize,
    /// Per-channel wavelengths (R, G, B); `None` uses the monochromatic
    /// optics wavelength for all channels.
    pub channel_wavelengths: Option<[f64; 3]>,
}

impl SimulationConfig {
    pub fn new(accommodation_depths: Vec<f64>, optics: OpticalConfig) -> Self {
        Self {
            accommodation_depths,
            optics,
            aberrations: AberrationSpec::default(),
            dc_noise: 0.0,
            field_of_view_degrees: 30.0,
            normalization: NormalizationMode::PerPixel,
            field_bins: 0,
            channel_wavelengths: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.accommodation_depths.is_empty() {
            return Err(SimError::EmptyDepthList);
        }
        if self
            .accommodation_depths
            .windows(2)
            .any(|w| !(w[0] < w[1]))
            || self.accommodation_depths.iter().any(|d| !d.is_finite())
        {
            return Err(SimError::DepthsNotIncreasing);
        }
        if !(self.dc_noise >= 0.0 && self.dc_noise.is_finite()) {
            return Err(SimError::InvalidConfig("dc_noise must be >= 0".into()));
        }
        if !(self.field_of_view_degrees > 0.0) {
            return Err(SimError::InvalidConfig(
                "field_of_view_degrees must be > 0".into(),
            ));
        }
        self.optics.validate()?;
        self.aberrations.validate()?;
        Ok(())
    }

    fn pitch_degrees(&self, width: usize) -> f64 {
        self.field_of_view_degrees / width as f64
    }
}

/// Simulated images of one sequence at increasing accommodation depths.
#[derive(Debug, Clone)]
pub struct FocalStack {
    pub entries: Vec<(f64, ColorImage)>,
    pub sequence_id: String,
    pub optics_id: String,
}

/// Simulates the retinal image of a backlight sequence for an eye
/// accommodated at `z_s` diopters. Values are linear light and are not
/// clipped; clipping happens only at export.
pub fn simulate_retinal_image(
    seq: &BacklightSequence,
    z_s: f64,
    config: &SimulationConfig,
) -> Result<ColorImage, SimError> {
    config.validate()?;
    let (w, h) = (seq.width(), seq.height());
    let c = config.dc_noise;
    let pitch = config.pitch_degrees(w);
    let subframes = seq.schedule.subframes_per_cycle();

    // Field-curvature bins: pixels grouped by their dioptric offset.
    let bins = field_bins(seq, config, w, h);

    // Pad by the worst-case geometric blur support plus a diffraction skirt.
    let max_delta = bins
        .offsets
        .iter()
        .flat_map(|&off| {
            seq.schedule
                .layer_depths
                .iter()
                .map(move |&zl| (z_s - (zl + off)).abs())
        })
        .fold(0.0f64, f64::max);
    let blur_px = blur_radius_pixels(max_delta, &config.optics, pitch);
    let pad = (blur_px + 16).min(w.max(h));
    let pw = fft::next_fast_len(w + 2 * pad);
    let ph = fft::next_fast_len(h + 2 * pad);

    // Frequency band required by the padded DFT grid.
    let f_nyquist = 0.5 / pitch;
    let profile_cfg_base = OpticalConfig {
        max_frequency: f_nyquist * std::f64::consts::SQRT_2 * 1.001,
        frequency_samples: 512,
        ..config.optics.clone()
    };

    let wavelengths: [f64; 3] = config
        .channel_wavelengths
        .unwrap_or([config.optics.wavelength; 3]);
    let distinct_wavelengths: Vec<f64> = {
        let mut v = wavelengths.to_vec();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v
    };

    // One job per (subframe, populated field bin); jobs that share an
    // effective depth share a cached transfer grid.
    struct Job {
        subframe: usize,
        bin: usize,
        depth_bits: u64,
    }
    let mut jobs: Vec<Job> = Vec::new();
    let mut depths_needed: BTreeMap<u64, f64> = BTreeMap::new();
    for k in 0..subframes {
        let zl = seq.schedule.depth_of_subframe(k);
        for (b, &off) in bins.offsets.iter().enumerate() {
            if bins.population[b] == 0 {
                continue;
            }
            let z_eff = zl + off;
            depths_needed.insert(z_eff.to_bits(), z_eff);
            jobs.push(Job {
                subframe: k,
                bin: b,
                depth_bits: z_eff.to_bits(),
            });
        }
    }
    let mut transfer_cache: BTreeMap<(usize, u64), Arc<Vec<Complex64>>> = BTreeMap::new();
    for (wl_idx, &wl) in distinct_wavelengths.iter().enumerate() {
        let cfg = OpticalConfig {
            wavelength: wl,
            ..profile_cfg_base.clone()
        };
        let profiles: Result<Vec<(u64, Otf)>, OpticsError> = depths_needed
            .par_iter()
            .map(|(&bits, &z_eff)| {
                defocus_otf(z_s, z_eff, &cfg, &no_field_curvature(&config.aberrations))
                    .map(|otf| (bits, otf))
            })
            .collect();
        for (bits, otf) in profiles? {
            let grid = fft::radial_transfer_grid(pw, ph, pitch, |f| otf.value_at(f));
            transfer_cache.insert((wl_idx, bits), Arc::new(grid));
        }
    }
    let wl_index = |ch: usize| -> usize {
        distinct_wavelengths
            .iter()
            .position(|&w| w == wavelengths[ch])
            .unwrap()
    };

    // Accumulate per (subframe, bin, channel); contributions summed in job
    // order for determinism.
    let mut accum = [
        Grid2::filled(w, h, 0.0f64),
        Grid2::filled(w, h, 0.0),
        Grid2::filled(w, h, 0.0),
    ];
    for ch in 0..3 {
        let plane = &seq.display_image.planes[ch];
        let contributions: Vec<Option<Grid2<f64>>> = jobs
            .par_iter()
            .map(|job| {
                let mask = &seq.masks[job.subframe];
                let mut src = Grid2::filled(w, h, 0.0);
                let mut any = false;
                for i in 0..w * h {
                    if bins.of_pixel.data()[i] as usize != job.bin {
                        continue;
                    }
                    let weight = if mask.data()[i] { 1.0 + c } else { c };
                    if weight == 0.0 {
                        continue;
                    }
                    let v = weight * plane.data()[i];
                    if v != 0.0 {
                        any = true;
                    }
                    src.data_mut()[i] = v;
                }
                if !any {
                    return None;
                }
                let transfer = &transfer_cache[&(wl_index(ch), job.depth_bits)];
                Some(fft::convolve_with_transfer(&src, transfer, pw, ph, pad))
            })
            .collect();
        for contribution in contributions.into_iter().flatten() {
            for (dst, src) in accum[ch].data_mut().iter_mut().zip(contribution.data()) {
                *dst += src;
            }
        }
    }

    // Per-pixel normalizer sum_k (mask_k + c).
    match config.normalization {
        NormalizationMode::PerPixel => {
            let mut a_map = Grid2::filled(w, h, subframes as f64 * c);
            for mask in &seq.masks {
                for (dst, &m) in a_map.data_mut().iter_mut().zip(mask.data()) {
                    if m {
                        *dst += 1.0;
                    }
                }
            }
            for plane in accum.iter_mut() {
                for (v, &a) in plane.data_mut().iter_mut().zip(a_map.data()) {
                    if a > 0.0 {
                        *v /= a;
                    }
                }
            }
        }
        NormalizationMode::CycleAverage => {
            let scale = 1.0 / subframes as f64;
            for plane in accum.iter_mut() {
                for v in plane.data_mut() {
                    *v *= scale;
                }
            }
        }
    }

    Ok(ColorImage::from_planes(accum))
}

struct FieldBins {
    /// Dioptric offset of each bin (bin 0 = on-axis).
    offsets: Vec<f64>,
    of_pixel: Grid2<u16>,
    population: Vec<usize>,
}

/// The field-curvature offset is applied through the binned effective
/// depths; the per-OTF aberration must not apply it a second time.
fn no_field_curvature(aberr: &AberrationSpec) -> AberrationSpec {
    AberrationSpec {
        zernike: aberr.zernike.clone(),
        field_curvature_waves: 0.0,
    }
}

fn field_bins(
    seq: &BacklightSequence,
    config: &SimulationConfig,
    w: usize,
    h: usize,
) -> FieldBins {
    let w220 = config.aberrations.field_curvature_waves;
    if w220 == 0.0 {
        return FieldBins {
            offsets: vec![0.0],
            of_pixel: Grid2::filled(w, h, 0u16),
            population: vec![w * h],
        };
    }
    let max_offset = field_curvature_offset(1.0, &config.aberrations, &config.optics).abs();
    let spacing = seq
        .schedule
        .layer_depths
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(f64::INFINITY, f64::min);
    let auto = if spacing.is_finite() && spacing > 0.0 {
        (max_offset / (0.25 * spacing)).ceil() as usize
    } else {
        16
    };
    let count = if config.field_bins > 0 {
        config.field_bins
    } else {
        auto.clamp(4, 64)
    };
    let full = field_curvature_offset(1.0, &config.aberrations, &config.optics);
    let offsets: Vec<f64> = (0..count)
        .map(|b| full * (b as f64 + 0.5) / count as f64)
        .collect();
    let mut of_pixel = Grid2::filled(w, h, 0u16);
    let mut population = vec![0usize; count];
    for y in 0..h {
        for x in 0..w {
            let ff = crate::render::field_fraction(x, y, w, h);
            let off = field_curvature_offset(ff, &config.aberrations, &config.optics);
            let frac = if full == 0.0 { 0.0 } else { off / full };
            let b = ((frac * count as f64) as usize).min(count - 1);
            *of_pixel.get_mut(x, y) = b as u16;
            population[b] += 1;
        }
    }
    FieldBins {
        offsets,
        of_pixel,
        population,
    }
}

/// Geometric blur radius in pixels for a dioptric defocus.
fn blur_radius_pixels(delta: f64, optics: &OpticalConfig, pitch_deg: f64) -> usize {
    let blur_rad = delta.abs() * optics.pupil_diameter / 2.0; // radians
    let blur_deg = blur_rad.to_degrees();
    (blur_deg / pitch_deg).ceil() as usize
}

/// One simulated image per accommodation depth.
pub fn simulate_focal_stack(
    seq: &BacklightSequence,
    depths: &[f64],
    config: &SimulationConfig,
) -> Result<FocalStack, SimError> {
    if depths.is_empty() {
        return Err(SimError::EmptyDepthList);
    }
    if depths.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(SimError::DepthsNotIncreasing);
    }
    let entries: Result<Vec<(f64, ColorImage)>, SimError> = depths
        .iter()
        .map(|&z| simulate_retinal_image(seq, z, config).map(|img| (z, img)))
        .collect();
    Ok(FocalStack {
        entries: entries?,
        sequence_id: seq.table_id.clone(),
        optics_id: optics_id(&config.optics),
    })
}

fn optics_id(optics: &OpticalConfig) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for bytes in [
        optics.wavelength.to_le_bytes(),
        optics.pupil_diameter.to_le_bytes(),
        optics.max_frequency.to_le_bytes(),
        (optics.pupil_grid as f64).to_le_bytes(),
    ] {
        for b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    format!("{hash:016x}")
}

/// Reduction of a reconstructed spectrum to a single contrast number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastReduction {
    /// CSF-weighted mean of |P(f)| over the band.
    WeightedMean,
    /// Maximum of |P(f)| over the band, excluding the DC sample.
    Max,
    /// |P| at a fixed frequency (cpd), linearly interpolated.
    AtFrequency(f64),
}

impl Default for ContrastReduction {
    fn default() -> Self {
        ContrastReduction::WeightedMean
    }
}

/// Normalized contrast over (target depth, accommodation depth).
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMap {
    pub target_depths: Vec<f64>,
    pub accommodation_depths: Vec<f64>,
    /// Row-major: rows are target depths, columns accommodation depths.
    pub values: Grid2<f64>,
}

impl ContrastMap {
    pub fn value(&self, target_idx: usize, plane_idx: usize) -> f64 {
        *self.values.get(plane_idx, target_idx)
    }
}

fn reduce_spectrum(
    spectrum: &[Complex64],
    frequencies: &[f64],
    weights: &[f64],
    reduction: ContrastReduction,
) -> f64 {
    match reduction {
        ContrastReduction::WeightedMean => {
            let num: f64 = spectrum
                .iter()
                .zip(weights)
                .map(|(p, w)| w * p.norm())
                .sum();
            let den: f64 = weights.iter().sum();
            num / den
        }
        ContrastReduction::Max => spectrum
            .iter()
            .zip(frequencies)
            .filter(|(_, &f)| f > 0.0)
            .map(|(p, _)| p.norm())
            .fold(0.0, f64::max),
        ContrastReduction::AtFrequency(f0) => {
            // linear interpolation on the radial grid
            let f = f0.abs();
            let last = *frequencies.last().unwrap();
            if f >= last {
                return spectrum.last().unwrap().norm();
            }
            let hi = frequencies.partition_point(|&g| g <= f).min(frequencies.len() - 1);
            let lo = hi - 1;
            let t = (f - frequencies[lo]) / (frequencies[hi] - frequencies[lo]);
            spectrum[lo].norm() * (1.0 - t) + spectrum[hi].norm() * t
        }
    }
}

/// Contrast achieved by a strategy table: for each (target depth z_d,
/// accommodation depth z_s) cell, the reconstructed spectrum of the table's
/// strategy for z_d is reduced over frequency, then the whole map is
/// normalized to a global maximum of 1.
pub fn contrast_map(
    table: &StrategyTable,
    template: &ProblemTemplate,
    reduction: ContrastReduction,
) -> Result<ContrastMap, SimError> {
    let bank = &template.bank;
    if table.layer_depths != bank.layer_depths() {
        return Err(SimError::GridMismatch(
            "table layer grid does not match the bank".into(),
        ));
    }
    let weights = template.csf.weights_for(bank.frequencies())?;
    let m = bank.plane_count();
    let nt = table.entries.len();
    let mut values = Grid2::filled(m, nt, 0.0);
    for (t, entry) in table.entries.iter().enumerate() {
        for i in 0..m {
            let p = reconstruction_spectrum(&entry.strategy, bank, template.dc_noise, i)?;
            *values.get_mut(i, t) =
                reduce_spectrum(&p, bank.frequencies(), &weights, reduction);
        }
    }
    normalize_map(&mut values);
    Ok(ContrastMap {
        target_depths: table.entries.iter().map(|e| e.target_depth).collect(),
        accommodation_depths: bank.accommodation_depths().to_vec(),
        values,
    })
}

/// The ideal single-layer reference: each cell reduces |H(f; z_s, z_d)|
/// directly, i.e. a point displayed perfectly at its target depth.
pub fn ideal_contrast_map(
    template: &ProblemTemplate,
    reduction: ContrastReduction,
) -> Result<ContrastMap, SimError> {
    let bank = &template.bank;
    let weights = template.csf.weights_for(bank.frequencies())?;
    let m = bank.plane_count();
    let n = bank.layer_count();
    let mut values = Grid2::filled(m, n, 0.0);
    for t in 0..n {
        for i in 0..m {
            let h = bank.otf(i, t).values();
            *values.get_mut(i, t) = reduce_spectrum(h, bank.frequencies(), &weights, reduction);
        }
    }
    normalize_map(&mut values);
    Ok(ContrastMap {
        target_depths: bank.layer_depths().to_vec(),
        accommodation_depths: bank.accommodation_depths().to_vec(),
        values,
    })
}

fn normalize_map(values: &mut Grid2<f64>) {
    let max = values.data().iter().cloned().fold(0.0f64, f64::max);
    if max > 0.0 {
        for v in values.data_mut() {
            *v /= max;
        }
    }
}

/// Signed difference `target - reconstructed`, cell by cell.
pub fn contrast_error(
    reconstructed: &ContrastMap,
    target: &ContrastMap,
) -> Result<ContrastMap, SimError> {
    if reconstructed.target_depths != target.target_depths
        || reconstructed.accommodation_depths != target.accommodation_depths
    {
        return Err(SimError::GridMismatch(
            "contrast maps were built on different depth grids".into(),
        ));
    }
    let mut values = target.values.clone();
    for (v, r) in values.data_mut().iter_mut().zip(reconstructed.values.data()) {
        *v -= r;
    }
    Ok(ContrastMap {
        target_depths: target.target_depths.clone(),
        accommodation_depths: target.accommodation_depths.clone(),
        values,
    })
}

/// Sum of |cell| over an error map.
pub fn summed_error_magnitude(map: &ContrastMap) -> f64 {
    map.values.data().iter().map(|v| v.abs()).sum()
}

/// Local band-limited contrast of a luminance image: the magnitude envelope
/// of an annular band-pass around `center_cpd`, smoothed over roughly one
/// period. Used to compare sharpness between simulated images.
pub fn local_band_contrast(
    luminance: &Grid2<f64>,
    pitch_deg: f64,
    center_cpd: f64,
) -> Grid2<f64> {
    let (w, h) = (luminance.width(), luminance.height());
    let pw = fft::next_fast_len(w);
    let ph = fft::next_fast_len(h);
    let mut buf = fft::mirror_pad(luminance, 0, pw, ph);
    fft::fft_2d(&mut buf, pw, ph, false);
    let band = fft::radial_transfer_grid(pw, ph, pitch_deg, |f| {
        let lo = center_cpd / std::f64::consts::SQRT_2;
        let hi = center_cpd * std::f64::consts::SQRT_2;
        if f >= lo && f <= hi {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    for (v, t) in buf.iter_mut().zip(&band) {
        *v *= t;
    }
    fft::fft_2d(&mut buf, pw, ph, true);
    // envelope magnitude, then a Gaussian smooth of about one period
    let mut env = Grid2::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            *env.get_mut(x, y) = buf[y * pw + x].norm();
        }
    }
    let sigma_px = (1.0 / center_cpd) / pitch_deg;
    let mut smooth = fft::mirror_pad(&env, 0, pw, ph);
    fft::fft_2d(&mut smooth, pw, ph, false);
    let gauss = fft::radial_transfer_grid(pw, ph, pitch_deg, |f| {
        // FT of a spatial Gaussian with sigma_px pixels
        let sigma_deg = sigma_px * pitch_deg;
        let arg = 2.0 * std::f64::consts::PI * f * sigma_deg;
        Complex64::new((-(arg * arg) / 2.0).exp(), 0.0)
    });
    for (v, t) in smooth.iter_mut().zip(&gauss) {
        *v *= t;
    }
    fft::fft_2d(&mut smooth, pw, ph, true);
    let mut out = Grid2::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            *out.get_mut(x, y) = smooth[y * pw + x].re.max(0.0);
        }
    }
    out
}

/// Mean band-limited contrast of an image; a scalar sharpness score.
pub fn band_contrast_score(luminance: &Grid2<f64>, pitch_deg: f64, center_cpd: f64) -> f64 {
    let local = local_band_contrast(luminance, pitch_deg, center_cpd);
    local.data().iter().sum::<f64>() / local.len() as f64
}
