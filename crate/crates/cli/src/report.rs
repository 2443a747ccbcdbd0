//! Versioned JSON artifacts written by the command-line tool.

use ess_stab::certify::{analyze, Analysis, CertifyOptions, DensityStats};
use ess_stab::model::{reduce_game, EssField, PayoffGame};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    /// The game as given, when the input was a game.
    pub game: Option<PayoffGame>,
    /// The field that was analyzed.
    pub field: EssField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: Option<u64>,
    pub options: CertifyOptions,
    pub tool: String,
    pub version: String,
}

impl RunMeta {
    pub fn new(seed: Option<u64>, options: CertifyOptions) -> Self {
        RunMeta {
            seed,
            options,
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub input: InputEcho,
    pub analysis: Analysis,
    pub meta: RunMeta,
}

impl AnalysisReport {
    pub fn run(input: InputEcho, options: CertifyOptions, seed: Option<u64>) -> Self {
        let analysis = analyze(&input.field, &options);
        AnalysisReport {
            schema_version: SCHEMA_VERSION,
            input,
            analysis,
            meta: RunMeta::new(seed, options),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub stats: DensityStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbReport {
    pub schema_version: u32,
    pub construction: Construction,
    pub source: EssField,
    pub perturbed: EssField,
    /// Coefficient distance between source and perturbed field.
    pub distance: f64,
    pub lambda_invariant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Construction {
    Rotation { eps: f64, lambda: f64 },
    AlgebraicCycle { eps: f64, delta1: i8, delta2: i8 },
}

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid model in {path}: {message}")]
    Model { path: String, message: String },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, InputError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io { path: name.clone(), source })?;
    serde_json::from_str(&text).map_err(|source| InputError::Parse { path: name, source })
}

pub fn read_field(path: &Path) -> Result<InputEcho, InputError> {
    let field: EssField = read_json(path)?;
    Ok(InputEcho { game: None, field })
}

pub fn read_game(path: &Path) -> Result<InputEcho, InputError> {
    let game: PayoffGame = read_json(path)?;
    let field = reduce_game(&game).map_err(|e| InputError::Model {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(InputEcho { game: Some(game), field })
}

pub fn read_poly(path: &Path) -> Result<ess_stab::poly::Poly2, InputError> {
    read_json(path)
}
