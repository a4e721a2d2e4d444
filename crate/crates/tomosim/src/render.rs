//! Compiles RGB-D scenes into per-subframe binary backlight masks.
//!
//! Rendering is per-pixel local: a pixel's depth is quantized to the layer
//! grid, the strategy table supplies its subframe bitstring, and each mask
//! holds the bit of the layer scheduled for that subframe. The display
//! panel shows the unchanged color image for the whole cycle.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{field_curvature_offset, AberrationSpec, OpticalConfig};
use crate::raster::{ColorImage, Grid2};
use crate::strategy::{
    nearest_layer_index, CostEvaluator, ProblemTemplate, StrategyError,
    StrategyTable,
};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("table/schedule configuration mismatch: {0}")]
    GridMismatch(String),
    #[error("infeasible schedule: {subframes} subframes cannot cover {layers} layers")]
    InfeasibleSchedule { layers: usize, subframes: usize },
    #[error("non-finite depth at pixel ({0}, {1})")]
    NonFiniteDepth(usize, usize),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// Color image plus per-pixel depth in diopters.
#[derive(Debug, Clone)]
pub struct RgbdScene {
    pub color: ColorImage,
    pub depth: Grid2<f64>,
}

impl RgbdScene {
    pub fn new(color: ColorImage, depth: Grid2<f64>) -> Result<Self, RenderError> {
        if color.width() != depth.width() || color.height() != depth.height() {
            return Err(RenderError::DimensionMismatch(format!(
                "color {}x{} vs depth {}x{}",
                color.width(),
                color.height(),
                depth.width(),
                depth.height()
            )));
        }
        for y in 0..depth.height() {
            for x in 0..depth.width() {
                if !depth.get(x, y).is_finite() {
                    return Err(RenderError::NonFiniteDepth(x, y));
                }
            }
        }
        Ok(Self { color, depth })
    }

    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }
}

/// Focal-sweep waveform driving the tunable optics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waveform {
    /// Ascending ramp: subframe k shows layer k.
    Ramp,
    /// Triangle: even layers on the ascending half-sweep, odd layers on the
    /// descending half; each layer once per cycle.
    Triangle,
}

/// Subframe-to-layer assignment for one backlight cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubframeSchedule {
    pub waveform: Waveform,
    pub cycle_rate_hz: f64,
    pub layer_depths: Vec<f64>,
    /// `mapping[k]` is the layer index shown in subframe k.
    pub mapping: Vec<usize>,
}

impl SubframeSchedule {
    pub fn subframes_per_cycle(&self) -> usize {
        self.mapping.len()
    }

    pub fn subframes_per_second(&self) -> f64 {
        self.cycle_rate_hz * self.mapping.len() as f64
    }

    /// Depth of the layer shown in subframe `k`.
    pub fn depth_of_subframe(&self, k: usize) -> f64 {
        self.layer_depths[self.mapping[k]]
    }
}

/// Builds the subframe schedule. `subframe_count` defaults to the layer
/// count; fewer subframes than layers cannot show every depth and is
/// rejected, and this schedule family visits each layer exactly once per
/// cycle so a surplus is rejected too.
pub fn build_subframe_schedule(
    waveform: Waveform,
    cycle_rate_hz: f64,
    layer_depths: &[f64],
    subframe_count: Option<usize>,
) -> Result<SubframeSchedule, RenderError> {
    let n = layer_depths.len();
    let subframes = subframe_count.unwrap_or(n);
    if subframes < n {
        return Err(RenderError::InfeasibleSchedule {
            layers: n,
            subframes,
        });
    }
    if subframes > n {
        return Err(RenderError::GridMismatch(format!(
            "schedule visits each layer once per cycle; {subframes} subframes for {n} layers"
        )));
    }
    let mapping = match waveform {
        Waveform::Ramp => (0..n).collect(),
        Waveform::Triangle => {
            let ascending = (0..n).step_by(2);
            let descending = (1..n).step_by(2).rev();
            ascending.chain(descending).collect()
        }
    };
    Ok(SubframeSchedule {
        waveform,
        cycle_rate_hz,
        layer_depths: layer_depths.to_vec(),
        mapping,
    })
}

/// Per-pixel nearest layer indices plus the count of out-of-range pixels
/// that were clamped to an end of the grid.
#[derive(Debug, Clone)]
pub struct QuantizedDepth {
    pub indices: Grid2<usize>,
    pub clamped: usize,
}

/// Quantizes a diopter depth map to nearest layer indices; exact midpoints
/// go to the lower index and out-of-range depths clamp (counted).
pub fn quantize_depth(scene: &RgbdScene, layer_depths: &[f64]) -> QuantizedDepth {
    let (w, h) = (scene.width(), scene.height());
    let lo = layer_depths[0];
    let hi = *layer_depths.last().unwrap();
    let mut indices = Grid2::filled(w, h, 0usize);
    let mut clamped = 0;
    for y in 0..h {
        for x in 0..w {
            let z = *scene.depth.get(x, y);
            if z < lo || z > hi {
                clamped += 1;
            }
            *indices.get_mut(x, y) = nearest_layer_index(layer_depths, z);
        }
    }
    QuantizedDepth { indices, clamped }
}

/// Ordered binary masks (one per subframe) plus the panel image.
#[derive(Debug, Clone)]
pub struct BacklightSequence {
    pub masks: Vec<Grid2<bool>>,
    pub display_image: ColorImage,
    pub schedule: SubframeSchedule,
    pub table_id: String,
    pub hdr: bool,
}

impl BacklightSequence {
    pub fn width(&self) -> usize {
        self.display_image.width()
    }

    pub fn height(&self) -> usize {
        self.display_image.height()
    }

    /// Number of subframes lighting a pixel.
    pub fn lit_count(&self, x: usize, y: usize) -> usize {
        self.masks.iter().filter(|m| *m.get(x, y)).count()
    }
}

fn check_table_schedule(
    table: &StrategyTable,
    schedule: &SubframeSchedule,
) -> Result<(), RenderError> {
    if table.layer_depths != schedule.layer_depths {
        return Err(RenderError::GridMismatch(
            "strategy table and schedule were built on different layer grids".into(),
        ));
    }
    Ok(())
}

/// Compiles a scene into its backlight mask sequence:
/// `mask_k(pixel) = b_{layer(k)}(z_d(pixel))`.
pub fn render_backlight_sequence(
    scene: &RgbdScene,
    table: &StrategyTable,
    schedule: &SubframeSchedule,
) -> Result<BacklightSequence, RenderError> {
    check_table_schedule(table, schedule)?;
    let quant = quantize_depth(scene, &table.layer_depths);
    let masks = masks_from_bits(&quant.indices, schedule, |q| {
        table.entry(q).strategy.bits()
    });
    Ok(BacklightSequence {
        masks,
        display_image: scene.color.clone(),
        schedule: schedule.clone(),
        table_id: table.table_id.clone(),
        hdr: false,
    })
}

fn masks_from_bits<'a, F>(
    indices: &Grid2<usize>,
    schedule: &SubframeSchedule,
    bits_for: F,
) -> Vec<Grid2<bool>>
where
    F: Fn(usize) -> &'a [bool] + 'a,
{
    let (w, h) = (indices.width(), indices.height());
    schedule
        .mapping
        .iter()
        .map(|&layer| {
            let mut mask = Grid2::filled(w, h, false);
            for (dst, &q) in mask.data_mut().iter_mut().zip(indices.data()) {
                *dst = bits_for(q)[layer];
            }
            mask
        })
        .collect()
}

/// Desired relative luminance per pixel for HDR rendering.
#[derive(Debug, Clone)]
pub struct HdrOptions {
    /// Relative luminance; values are mapped (clamped) into [0.5, 1.5].
    pub intensity: Grid2<f64>,
}

impl HdrOptions {
    /// Linear mapping of a [0, 1] grayscale map onto the [0.5, 1.5] range.
    pub fn from_unit_map(map: &Grid2<f64>) -> Self {
        Self {
            intensity: map.map(|&v| 0.5 + v.clamp(0.0, 1.0)),
        }
    }
}

/// HDR rendering: per-pixel lit count becomes `round(intensity * A_opt)`,
/// clamped to [ceil(0.5 A_opt), floor(1.5 A_opt)] and at least 1. Extra
/// subframes are added (or removed) one at a time, picking the flip with
/// the smallest strategy-cost increase for that pixel's target layer.
pub fn render_hdr_sequence(
    scene: &RgbdScene,
    table: &StrategyTable,
    schedule: &SubframeSchedule,
    hdr: &HdrOptions,
    template: &ProblemTemplate,
) -> Result<BacklightSequence, RenderError> {
    check_table_schedule(table, schedule)?;
    if hdr.intensity.width() != scene.width() || hdr.intensity.height() != scene.height() {
        return Err(RenderError::DimensionMismatch(
            "intensity map does not match the scene".into(),
        ));
    }
    let n = table.layer_count();
    let quant = quantize_depth(scene, &table.layer_depths);

    // Per-pixel target counts; solve each distinct (layer, count) pair once.
    let mut targets = Grid2::filled(scene.width(), scene.height(), 0usize);
    let mut needed: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (dst, (&q, &raw)) in targets
        .data_mut()
        .iter_mut()
        .zip(quant.indices.data().iter().zip(hdr.intensity.data()))
    {
        let a_opt = table.entry(q).strategy.lit_count();
        let t = hdr_target_count(raw, a_opt, n);
        *dst = t;
        needed.insert((q, t));
    }

    let mut solved: BTreeMap<(usize, usize), Vec<bool>> = BTreeMap::new();
    let mut by_layer: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(q, t) in &needed {
        by_layer.entry(q).or_default().push(t);
    }
    for (q, counts) in by_layer {
        let base = table.entry(q).strategy.bits().to_vec();
        let base_lit = base.iter().filter(|&&b| b).count();
        if counts.iter().all(|&t| t == base_lit) {
            for t in counts {
                solved.insert((q, t), base.clone());
            }
            continue;
        }
        let problem = template.problem_for(table.layer_depths[q])?;
        let evaluator = CostEvaluator::new(&problem)?;
        for t in counts {
            let bits = adjust_lit_count(&base, t, &evaluator);
            solved.insert((q, t), bits);
        }
    }

    let masks = {
        let (w, h) = (scene.width(), scene.height());
        schedule
            .mapping
            .iter()
            .map(|&layer| {
                let mut mask = Grid2::filled(w, h, false);
                for (dst, (&q, &t)) in mask
                    .data_mut()
                    .iter_mut()
                    .zip(quant.indices.data().iter().zip(targets.data()))
                {
                    *dst = solved[&(q, t)][layer];
                }
                mask
            })
            .collect()
    };

    Ok(BacklightSequence {
        masks,
        display_image: scene.color.clone(),
        schedule: schedule.clone(),
        table_id: table.table_id.clone(),
        hdr: true,
    })
}

fn hdr_target_count(intensity: f64, a_opt: usize, n: usize) -> usize {
    let i = intensity.clamp(0.5, 1.5);
    let a = a_opt as f64;
    let lo = (0.5 * a).ceil() as usize;
    let hi = (1.5 * a).floor() as usize;
    ((i * a).round() as usize).clamp(lo, hi).clamp(1, n)
}

/// Greedy cost-ranked bit flips until the lit count matches `target`.
fn adjust_lit_count(base: &[bool], target: usize, evaluator: &CostEvaluator) -> Vec<bool> {
    let mut bits = base.to_vec();
    let mut lit = bits.iter().filter(|&&b| b).count();
    while lit < target {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..bits.len() {
            if bits[j] {
                continue;
            }
            bits[j] = true;
            let c = evaluator.evaluate_bits(&bits);
            bits[j] = false;
            if best.map_or(true, |(bc, _)| c < bc) {
                best = Some((c, j));
            }
        }
        let (_, j) = best.expect("target <= n leaves an unlit bit");
        bits[j] = true;
        lit += 1;
    }
    while lit > target {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..bits.len() {
            if !bits[j] {
                continue;
            }
            bits[j] = false;
            let c = evaluator.evaluate_bits(&bits);
            bits[j] = true;
            if best.map_or(true, |(bc, _)| c < bc) {
                best = Some((c, j));
            }
        }
        let (_, j) = best.expect("target >= 1 leaves a lit bit");
        bits[j] = false;
        lit -= 1;
    }
    bits
}

/// Normalized radial field fraction of a pixel: distance from the image
/// center over the half-diagonal, so corners sit at exactly 1.
pub fn field_fraction(x: usize, y: usize, width: usize, height: usize) -> f64 {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let dx = x as f64 - cx;
    let dy = y as f64 - cy;
    let half_diag = (cx * cx + cy * cy).sqrt();
    if half_diag == 0.0 {
        0.0
    } else {
        (dx * dx + dy * dy).sqrt() / half_diag
    }
}

/// Biases the depth map against the display's field curvature so that the
/// curved image surface lands back on the intended depths. Returns the
/// corrected scene and the number of pixels clamped to the layer range.
pub fn precompensate_depth_map(
    scene: &RgbdScene,
    aberr: &AberrationSpec,
    config: &OpticalConfig,
    layer_depths: &[f64],
) -> (RgbdScene, usize) {
    let (w, h) = (scene.width(), scene.height());
    let lo = layer_depths[0];
    let hi = *layer_depths.last().unwrap();
    let mut depth = scene.depth.clone();
    let mut clamped = 0;
    for y in 0..h {
        for x in 0..w {
            let ff = field_fraction(x, y, w, h);
            let offset = field_curvature_offset(ff, aberr, config);
            let target = *scene.depth.get(x, y) - offset;
            let bounded = target.clamp(lo, hi);
            if bounded != target {
                clamped += 1;
            }
            *depth.get_mut(x, y) = bounded;
        }
    }
    (
        RgbdScene {
            color: scene.color.clone(),
            depth,
        },
        clamped,
    )
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::optics::{layer_grid, OtfBank};
    use crate::perception::CsfModel;
    use crate::strategy::{identity_table, GammaMode, SpectrumMode};

    fn flat_scene(w: usize, h: usize, depth: f64) -> RgbdScene {
        RgbdScene::new(
            ColorImage::filled(w, h, [0.5, 0.5, 0.5]),
            Grid2::filled(w, h, depth),
        )
        .unwrap()
    }

    fn test_template(layers: &[f64], c: f64) -> ProblemTemplate {
        test_template_bounded(layers, c, 0)
    }

    fn test_template_bounded(layers: &[f64], c: f64, a_low: usize) -> ProblemTemplate {
        let cfg = OpticalConfig {
            pupil_grid: 64,
            ..Default::default()
        };
        let planes: Vec<f64> = (0..5).map(|i| 5.5 * i as f64 / 4.0).collect();
        let bank =
            Arc::new(OtfBank::build(&planes, layers, &cfg, &AberrationSpec::default()).unwrap());
        ProblemTemplate {
            bank,
            dc_noise: c,
            brightness_bound: a_low,
            gamma: GammaMode::Auto,
            csf: CsfModel::default(),
            spectrum_mode: SpectrumMode::Complex,
        }
    }

    #[test]
    fn ramp_schedule_is_identity() {
        let layers = [0.0, 1.0, 2.0];
        let s = build_subframe_schedule(Waveform::Ramp, 60.0, &layers, None).unwrap();
        assert_eq!(s.mapping, vec![0, 1, 2]);
    }

    #[test]
    fn triangle_schedule_splits_halves() {
        let layers = [0.0, 1.0, 2.0, 3.0];
        let s = build_subframe_schedule(Waveform::Triangle, 60.0, &layers, None).unwrap();
        // 1-based layers [1,3] ascending then [4,2] descending
        assert_eq!(s.mapping, vec![0, 2, 3, 1]);
        let mut seen = s.mapping.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3], "each layer exactly once");
    }

    #[test]
    fn schedule_rate_metadata() {
        let layers = layer_grid(80, 0.0, 5.5);
        let s = build_subframe_schedule(Waveform::Ramp, 60.0, &layers, None).unwrap();
        assert_eq!(s.subframes_per_cycle(), 80);
        assert_eq!(s.subframes_per_second(), 4800.0);
    }

    #[test]
    fn too_few_subframes_is_infeasible() {
        let layers = [0.0, 1.0, 2.0];
        assert!(matches!(
            build_subframe_schedule(Waveform::Ramp, 60.0, &layers, Some(2)),
            Err(RenderError::InfeasibleSchedule { .. })
        ));
    }

    #[test]
    fn quantize_constant_depth() {
        let layers = layer_grid(10, 0.0, 5.5);
        let scene = flat_scene(4, 3, layers[5]);
        let q = quantize_depth(&scene, &layers);
        assert!(q.indices.data().iter().all(|&i| i == 5));
        assert_eq!(q.clamped, 0);
    }

    #[test]
    fn quantize_out_of_range_clamps_and_counts() {
        let layers = layer_grid(80, 0.0, 5.5);
        let scene = flat_scene(4, 4, 9.9);
        let q = quantize_depth(&scene, &layers);
        assert!(q.indices.data().iter().all(|&i| i == 79));
        assert_eq!(q.clamped, 16);
    }

    #[test]
    fn quantize_on_grid_round_trip_is_lossless() {
        let layers = layer_grid(16, 0.0, 5.5);
        let mut depth = Grid2::filled(8, 2, 0.0);
        for (i, d) in depth.data_mut().iter_mut().enumerate() {
            *d = layers[i % 16];
        }
        let scene = RgbdScene::new(ColorImage::filled(8, 2, [1.0; 3]), depth.clone()).unwrap();
        let q = quantize_depth(&scene, &layers);
        for (idx, d) in q.indices.data().iter().zip(depth.data()) {
            assert_eq!(layers[*idx], *d);
        }
    }

    #[test]
    fn identity_render_lights_one_mask() {
        let layers = layer_grid(6, 0.0, 5.5);
        let table = identity_table(&layers);
        let schedule = build_subframe_schedule(Waveform::Ramp, 60.0, &layers, None).unwrap();
        let scene = flat_scene(5, 4, layers[2]);
        let seq = render_backlight_sequence(&scene, &table, &schedule).unwrap();
        for (k, mask) in seq.masks.iter().enumerate() {
            let want = k == 2;
            assert!(mask.data().iter().all(|&b| b == want), "mask {k}");
        }
    }

    #[test]
    fn two_region_scene_splits_masks() {
        let layers = layer_grid(6, 0.0, 5.5);
        let table = identity_table(&layers);
        let schedule = build_subframe_schedule(Waveform::Ramp, 60.0, &layers, None).unwrap();
        let mut depth = Grid2::filled(4, 2, layers[1]);
        for x in 2..4 {
            for y in 0..2 {
                *depth.get_mut(x, y) = layers[4];
            }
        }
        let scene = RgbdScene::new(ColorImage::filled(4, 2, [1.0; 3]), depth).unwrap();
        let seq = render_backlight_sequence(&scene, &table, &schedule).unwrap();
        assert!(*seq.masks[1].get(0, 0) && !*seq.masks[1].get(3, 0));
        assert!(!*seq.masks[4].get(0, 0) && *seq.masks[4].get(3, 0));
    }

    #[test]
    fn mask_energy_matches_table_lit_count() {
        let layers = layer_grid(8, 0.0, 5.5);
        let template = test_template(&layers, 0.05);
        let table = crate::strategy::build_strategy_table(
            &template,
            &crate::strategy::GaParams {
                population_size: 60,
                max_generations: 30,
                rng_seed: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let schedule = build_subframe_schedule(Waveform::Triangle, 60.0, &layers, None).unwrap();
        let mut depth = Grid2::filled(6, 3, 0.0);
        for (i, d) in depth.data_mut().iter_mut().enumerate() {
            *d = layers[(i * 3) % 8];
        }
        let scene = RgbdScene::new(ColorImage::filled(6, 3, [1.0; 3]), depth).unwrap();
        let seq = render_backlight_sequence(&scene, &table, &schedule).unwrap();
        let quant = quantize_depth(&scene, &layers);
        for y in 0..3 {
            for x in 0..6 {
                let q = *quant.indices.get(x, y);
                assert_eq!(
                    seq.lit_count(x, y),
                    table.entry(q).strategy.lit_count(),
                    "pixel ({x},{y})"
                );
            }
        }
    }

    #[test]
    fn hdr_neutral_intensity_is_bit_exact() {
        let layers = layer_grid(8, 0.0, 5.5);
        let template = test_template(&layers, 0.05);
        let table = crate::strategy::build_strategy_table(
            &template,
            &crate::strategy::GaParams {
                population_size: 60,
                max_generations: 30,
                rng_seed: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let schedule = build_subframe_schedule(Waveform::Ramp, 60.0, &layers, None).unwrap();
        let scene = flat_scene(4, 4, layers[3]);
        let base = render_backlight_sequence(&scene, &table, &schedule).unwrap();
        let hdr = HdrOptions {
            intensity: Grid2::filled(4, 4, 1.0),
        };
        let seq = render_hdr_sequence(&scene, &table, &schedule, &hdr, &template).unwrap();
        for (a, b) in base.masks.iter().zip(&seq.masks) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn hdr_counts_scale_and_floor() {
        // A_opt = 10 at 1.5x -> 15 subframes
        assert_eq!(hdr_target_count(1.5, 10, 80), 15);
        // A_opt = 1 at 0.5x floors at 1
        assert_eq!(hdr_target_count(0.5, 1, 80), 1);
        assert_eq!(hdr_target_count(1.0, 7, 80), 7);
        // clamp into [ceil(.5A), floor(1.5A)]
        assert_eq!(hdr_target_count(9.0, 10, 80), 15);
        assert_eq!(hdr_target_count(0.0, 10, 80), 5);
    }

    #[test]
    fn hdr_bright_region_gets_more_subframes() {
        let layers = layer_grid(8, 0.0, 5.5);
        // bound the illumination time away from 1 so the HDR range is wide
        let template = test_template_bounded(&layers, 0.05, 3);
        let table = crate::strategy::build_strategy_table(
            &template,
            &crate::strategy::GaParams {
                population_size: 60,
                max_generations: 40,
                rng_seed: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let schedule = build_subframe_schedule(Waveform::Ramp, 60.0, &layers, None).unwrap();
        let scene = flat_scene(2, 1, layers[4]);
        let mut intensity = Grid2::filled(2, 1, 0.5);
        *intensity.get_mut(1, 0) = 1.5;
        let seq =
            render_hdr_sequence(&scene, &table, &schedule, &HdrOptions { intensity }, &template)
                .unwrap();
        let a_opt = table.entry(4).strategy.lit_count();
        assert_eq!(seq.lit_count(0, 0), hdr_target_count(0.5, a_opt, 8));
        assert_eq!(seq.lit_count(1, 0), hdr_target_count(1.5, a_opt, 8));
        assert!(seq.lit_count(1, 0) > seq.lit_count(0, 0));
    }

    #[test]
    fn precompensation_zero_coefficient_is_identity() {
        let layers = layer_grid(8, 0.0, 5.5);
        let scene = flat_scene(5, 5, 2.0);
        let (out, clamped) = precompensate_depth_map(
            &scene,
            &AberrationSpec::default(),
            &OpticalConfig::default(),
            &layers,
        );
        assert_eq!(out.depth.data(), scene.depth.data());
        assert_eq!(clamped, 0);
    }

    #[test]
    fn precompensation_center_unchanged_corner_shifted() {
        let layers = layer_grid(80, 0.0, 5.5);
        let aberr = AberrationSpec {
            zernike: vec![],
            field_curvature_waves: 10.0,
        };
        let scene = flat_scene(9, 9, 3.0);
        let (out, _) =
            precompensate_depth_map(&scene, &aberr, &OpticalConfig::default(), &layers);
        assert_eq!(*out.depth.get(4, 4), 3.0, "on-axis pixel unchanged");
        let corner = *out.depth.get(0, 0);
        assert!(
            (corner - (3.0 - 1.2222222222222223)).abs() < 1e-9,
            "corner offset applied: {corner}"
        );
    }

    #[test]
    fn rendering_is_pixel_local() {
        let layers = layer_grid(6, 0.0, 5.5);
        let table = identity_table(&layers);
        let schedule = build_subframe_schedule(Waveform::Ramp, 60.0, &layers, None).unwrap();
        let mut depth = Grid2::filled(4, 1, 0.0);
        for (i, d) in depth.data_mut().iter_mut().enumerate() {
            *d = layers[i + 1];
        }
        let scene = RgbdScene::new(ColorImage::filled(4, 1, [1.0; 3]), depth.clone()).unwrap();
        let seq = render_backlight_sequence(&scene, &table, &schedule).unwrap();

        // reverse the pixels; outputs must reverse identically
        let rev: Vec<f64> = depth.data().iter().rev().copied().collect();
        let scene_rev = RgbdScene::new(
            ColorImage::filled(4, 1, [1.0; 3]),
            Grid2::from_vec(4, 1, rev),
        )
        .unwrap();
        let seq_rev = render_backlight_sequence(&scene_rev, &table, &schedule).unwrap();
        for (m, mr) in seq.masks.iter().zip(&seq_rev.masks) {
            let flipped: Vec<bool> = mr.data().iter().rev().copied().collect();
            assert_eq!(m.data(), flipped.as_slice());
        }
    }
}
