//! Simulation and optimization toolkit for tomographic displays.
//!
//! A tomographic display synchronizes a fast binary backlight with
//! focus-tunable optics, sweeping the image plane through a stack of depth
//! layers every video frame; each pixel is lit only in the subframes whose
//! layer should carry it. This crate implements the full software side of
//! such a display:
//!
//! * [`optics`] — defocus/aberration pupil transfer functions and the
//!   precomputed OTF banks every cost and simulation is built on;
//! * [`perception`] — contrast-sensitivity weighting and the spectral
//!   visual-difference metric;
//! * [`strategy`] — the per-depth binary illumination-strategy problem:
//!   cost, primitive baseline, genetic optimizer, exhaustive oracle, and
//!   strategy tables;
//! * [`render`] — compiling RGB-D scenes into per-subframe binary backlight
//!   masks, HDR illumination-time modulation, and field-curvature
//!   pre-compensation;
//! * [`sim`] — retinal-image and focal-stack simulation plus contrast and
//!   contrast-error maps;
//! * [`config`], [`io`], [`cli`] — TOML configuration, file formats, and
//!   the `tomosim` command-line front end.
//!
//! The `examples/` directory holds one runnable example per capability;
//! start with `optimize_strategy` and `focal_stack`.

pub mod cli;
pub mod config;
pub mod io;
pub mod optics;
pub mod perception;
pub mod raster;
pub mod render;
pub mod sim;
pub mod strategy;

pub use optics::{
    defocus_otf, diffraction_limited_otf, field_curvature_offset, layer_grid, zernike_phase,
    AberrationSpec, OpticalConfig, Otf, OtfBank,
};
pub use perception::{csf_weight, weighted_spectral_distance, CsfModel};
pub use strategy::{
    brute_force_optimum, build_strategy_table, cost, optimize_ga, primitive_strategy,
    reconstructed_profile, GaParams, IlluminationStrategy, ProblemTemplate, StrategyProblem,
    StrategyTable,
};
