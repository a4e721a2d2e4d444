//! Per-layer strategy tables: one optimized bitstring per quantized target
//! depth, with a versioned binary file format and a CSV export.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluator::BankQuadratic;
use super::ga::optimize_ga_shared;
use super::{
    GaParams, IlluminationStrategy, ProblemTemplate, SpectrumMode, StrategyError,
};

const MAGIC: &[u8; 8] = b"TOMOTAB1";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTableEntry {
    pub target_depth: f64,
    pub strategy: IlluminationStrategy,
    pub fidelity: f64,
    pub penalty: f64,
    pub cost: f64,
}

/// Mapping from each layer-grid target depth to its illumination strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTable {
    pub layer_depths: Vec<f64>,
    pub dc_noise: f64,
    pub brightness_bound: usize,
    pub entries: Vec<StrategyTableEntry>,
    pub table_id: String,
}

impl StrategyTable {
    /// Strategy for an arbitrary target depth, quantized to the layer grid.
    pub fn strategy_for(&self, z_d: f64) -> &StrategyTableEntry {
        let idx = super::nearest_layer_index(&self.layer_depths, z_d);
        &self.entries[idx]
    }

    pub fn entry(&self, layer_index: usize) -> &StrategyTableEntry {
        &self.entries[layer_index]
    }

    pub fn layer_count(&self) -> usize {
        self.layer_depths.len()
    }

    /// Largest Hamming distance between strategies of adjacent target
    /// depths; a smoothness diagnostic for the built table.
    pub fn max_adjacent_hamming(&self) -> usize {
        self.entries
            .windows(2)
            .map(|w| w[0].strategy.hamming_distance(&w[1].strategy))
            .max()
            .unwrap_or(0)
    }

    pub fn write_binary(&self, path: &Path) -> std::io::Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let header = serde_json::json!({
            "version": FORMAT_VERSION,
            "layer_count": self.layer_depths.len(),
            "layer_depths": self.layer_depths,
            "dc_noise": self.dc_noise,
            "brightness_bound": self.brightness_bound,
            "table_id": self.table_id,
        });
        let header_bytes = serde_json::to_vec(&header).expect("header serializes");
        out.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for entry in &self.entries {
            out.extend_from_slice(&entry.target_depth.to_le_bytes());
            out.extend_from_slice(&entry.fidelity.to_le_bytes());
            out.extend_from_slice(&entry.penalty.to_le_bytes());
            out.extend_from_slice(&entry.cost.to_le_bytes());
            let bits = entry.strategy.bits();
            out.extend_from_slice(&(bits.len() as u32).to_le_bytes());
            let mut packed = vec![0u8; bits.len().div_ceil(8)];
            for (j, &b) in bits.iter().enumerate() {
                if b {
                    packed[j / 8] |= 1 << (j % 8);
                }
            }
            out.extend_from_slice(&packed);
        }
        std::fs::write(path, out)
    }

    pub fn read_binary(path: &Path) -> Result<Self, TableFormatError> {
        let data = std::fs::read(path)?;
        let mut cursor = std::io::Cursor::new(&data);
        let mut magic = [0u8; 8];
        cursor.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(TableFormatError::BadMagic);
        }
        let mut len4 = [0u8; 4];
        cursor.read_exact(&mut len4)?;
        let header_len = u32::from_le_bytes(len4) as usize;
        let mut header_bytes = vec![0u8; header_len];
        cursor.read_exact(&mut header_bytes)?;
        let header: serde_json::Value = serde_json::from_slice(&header_bytes)?;
        let version = header["version"].as_u64().unwrap_or(0) as u32;
        if version != FORMAT_VERSION {
            return Err(TableFormatError::BadVersion(version));
        }
        let layer_depths: Vec<f64> = serde_json::from_value(header["layer_depths"].clone())?;
        let dc_noise = header["dc_noise"].as_f64().ok_or(TableFormatError::Corrupt)?;
        let brightness_bound =
            header["brightness_bound"].as_u64().ok_or(TableFormatError::Corrupt)? as usize;
        let table_id = header["table_id"]
            .as_str()
            .ok_or(TableFormatError::Corrupt)?
            .to_string();

        let mut entries = Vec::with_capacity(layer_depths.len());
        for _ in 0..layer_depths.len() {
            let mut f8 = [0u8; 8];
            cursor.read_exact(&mut f8)?;
            let target_depth = f64::from_le_bytes(f8);
            cursor.read_exact(&mut f8)?;
            let fidelity = f64::from_le_bytes(f8);
            cursor.read_exact(&mut f8)?;
            let penalty = f64::from_le_bytes(f8);
            cursor.read_exact(&mut f8)?;
            let cost = f64::from_le_bytes(f8);
            cursor.read_exact(&mut len4)?;
            let bit_len = u32::from_le_bytes(len4) as usize;
            let mut packed = vec![0u8; bit_len.div_ceil(8)];
            cursor.read_exact(&mut packed)?;
            let bits: Vec<bool> = (0..bit_len).map(|j| packed[j / 8] >> (j % 8) & 1 == 1).collect();
            entries.push(StrategyTableEntry {
                target_depth,
                strategy: IlluminationStrategy::new(bits),
                fidelity,
                penalty,
                cost,
            });
        }
        Ok(Self {
            layer_depths,
            dc_noise,
            brightness_bound,
            entries,
            table_id,
        })
    }

    /// CSV rows: target_depth_diopters, bitstring, A, cost.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "target_depth_diopters,bitstring,a,cost")?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{}",
                e.target_depth,
                e.strategy.bitstring(),
                e.strategy.lit_count(),
                e.cost
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TableFormatError {
    #[error("not a strategy table file (bad magic)")]
    BadMagic,
    #[error("unsupported strategy table version {0}")]
    BadVersion(u32),
    #[error("corrupt strategy table header")]
    Corrupt,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Solves one strategy problem per layer depth. Entries are independent:
/// each gets its own derived seed (`rng_seed + layer index`) and they share
/// only the immutable bank, so they are solved in parallel.
pub fn build_strategy_table(
    template: &ProblemTemplate,
    params: &GaParams,
) -> Result<StrategyTable, StrategyError> {
    let layer_depths = template.bank.layer_depths().to_vec();
    let shared = if template.spectrum_mode == SpectrumMode::Complex {
        let probe = template.problem_for(layer_depths[0])?;
        Some(Arc::new(BankQuadratic::build(&probe)))
    } else {
        None
    };

    let entries: Result<Vec<StrategyTableEntry>, StrategyError> = layer_depths
        .par_iter()
        .enumerate()
        .map(|(j, &z_d)| {
            let problem = template.problem_for(z_d)?;
            let entry_params = GaParams {
                rng_seed: params.rng_seed.wrapping_add(j as u64),
                ..params.clone()
            };
            let result = optimize_ga_shared(&problem, &entry_params, shared.clone())?;
            Ok(StrategyTableEntry {
                target_depth: z_d,
                strategy: result.strategy,
                fidelity: result.cost.fidelity,
                penalty: result.cost.penalty,
                cost: result.cost.total,
            })
        })
        .collect();
    let entries = entries?;

    let table_id = table_id(&layer_depths, template, params);
    Ok(StrategyTable {
        layer_depths,
        dc_noise: template.dc_noise,
        brightness_bound: template.brightness_bound,
        entries,
        table_id,
    })
}

/// FNV-1a hash of the build parameters; stable across platforms so repeated
/// builds of the same configuration share an id.
fn table_id(layer_depths: &[f64], template: &ProblemTemplate, params: &GaParams) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for &d in layer_depths {
        eat(&d.to_le_bytes());
    }
    eat(&template.dc_noise.to_le_bytes());
    eat(&(template.brightness_bound as u64).to_le_bytes());
    eat(&params.rng_seed.to_le_bytes());
    eat(&(params.population_size as u64).to_le_bytes());
    eat(&(params.max_generations as u64).to_le_bytes());
    format!("{h:016x}")
}

/// Table with exactly one lit subframe per entry (the c = 0 optimum);
/// useful as a baseline and for tests.
pub fn identity_table(layer_depths: &[f64]) -> StrategyTable {
    let n = layer_depths.len();
    let entries = layer_depths
        .iter()
        .enumerate()
        .map(|(j, &z)| StrategyTableEntry {
            target_depth: z,
            strategy: IlluminationStrategy::unit(n, j),
            fidelity: 0.0,
            penalty: 0.0,
            cost: 0.0,
        })
        .collect();
    StrategyTable {
        layer_depths: layer_depths.to_vec(),
        dc_noise: 0.0,
        brightness_bound: 0,
        entries,
        table_id: "identity".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::small_bank;
    use super::*;
    use crate::perception::CsfModel;
    use crate::strategy::GammaMode;

    fn quick_template(c: f64, a_low: usize) -> ProblemTemplate {
        ProblemTemplate {
            bank: small_bank(8, 6),
            dc_noise: c,
            brightness_bound: a_low,
            gamma: GammaMode::Auto,
            csf: CsfModel::default(),
            spectrum_mode: SpectrumMode::Complex,
        }
    }

    fn quick_params() -> GaParams {
        GaParams {
            population_size: 80,
            max_generations: 40,
            rng_seed: 0,
            ..Default::default()
        }
    }

    #[test]
    fn naive_table_is_identity_mapping() {
        let table = build_strategy_table(&quick_template(0.0, 0), &quick_params()).unwrap();
        for (j, entry) in table.entries.iter().enumerate() {
            assert_eq!(entry.strategy.lit_count(), 1, "entry {j}");
            assert!(entry.strategy.bits()[j], "entry {j} lights its own layer");
            assert_eq!(entry.cost, 0.0);
        }
    }

    #[test]
    fn builds_are_deterministic() {
        let t1 = build_strategy_table(&quick_template(0.05, 3), &quick_params()).unwrap();
        let t2 = build_strategy_table(&quick_template(0.05, 3), &quick_params()).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn adjacent_entries_stay_close() {
        let table = build_strategy_table(&quick_template(0.05, 3), &quick_params()).unwrap();
        let h = table.max_adjacent_hamming();
        assert!(h <= table.layer_count(), "diagnostic in range: {h}");
    }

    #[test]
    fn binary_round_trip() {
        let table = build_strategy_table(&quick_template(0.05, 3), &quick_params()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.bin");
        table.write_binary(&path).unwrap();
        let back = StrategyTable::read_binary(&path).unwrap();
        assert_eq!(table, back);
    }

    #[test]
    fn csv_has_one_row_per_layer() {
        let table = identity_table(&[0.0, 0.5, 1.0]);
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.trim().lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "target_depth_diopters,bitstring,a,cost");
        assert_eq!(lines[1], "0,100,1,0");
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.bin");
        std::fs::write(&path, b"NOTATAB!xxxx").unwrap();
        assert!(matches!(
            StrategyTable::read_binary(&path),
            Err(TableFormatError::BadMagic)
        ));
    }

    #[test]
    fn lookup_quantizes_to_nearest_layer() {
        let table = identity_table(&[0.0, 1.0, 2.0]);
        assert_eq!(table.strategy_for(0.4).target_depth, 0.0);
        assert_eq!(table.strategy_for(0.6).target_depth, 1.0);
        assert_eq!(table.strategy_for(0.5).target_depth, 0.0, "tie to lower");
        assert_eq!(table.strategy_for(99.0).target_depth, 2.0, "clamp");
    }
}
