//! Model checkpoints.
//!
//! A checkpoint is a single magic line followed by one JSON document:
//!
//! ```text
//! TREEAUG-TAGGER 1
//! {"config": {...}, "chars": {"symbols": [...], "counts": [...]},
//!  "tags": [...], "tensors": [{"name": ..., "shape": [...], "data": [...]}, ...]}
//! ```
//!
//! Floats are written with enough digits to round-trip exactly.

use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::TaggerModel;
use super::vocab::{CharVocab, TagVocab};
use super::TaggerConfig;

pub const CHECKPOINT_MAGIC: &str = "TREEAUG-TAGGER";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a tagger checkpoint (bad magic header)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(String),
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("tensor `{name}`: expected shape {expected:?}, found {found:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor `{0}` missing or out of order")]
    MissingTensor(String),
}

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    config: TaggerConfig,
    chars: CharVocab,
    tags: TagVocab,
    tensors: Vec<Tensor>,
}

pub fn write_checkpoint<W: Write>(model: &TaggerModel, mut out: W) -> Result<(), CheckpointError> {
    writeln!(out, "{CHECKPOINT_MAGIC} {VERSION}")?;
    let tensors = model
        .params
        .tensors()
        .into_iter()
        .zip(model.params.shapes())
        .map(|((name, data), (_, shape))| Tensor {
            name: name.to_owned(),
            shape,
            data: data.to_vec(),
        })
        .collect();
    let doc = Document {
        config: model.config.clone(),
        chars: model.chars.clone(),
        tags: model.tags.clone(),
        tensors,
    };
    serde_json::to_writer(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<TaggerModel, CheckpointError> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let version = header
        .trim_end()
        .strip_prefix(CHECKPOINT_MAGIC)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or(CheckpointError::BadMagic)?;
    if version != VERSION.to_string() {
        return Err(CheckpointError::Version(version.to_owned()));
    }

    let mut doc: Document = serde_json::from_reader(input)?;
    doc.chars.reindex();
    let mut model = TaggerModel::with_vocab(doc.chars, doc.tags, &doc.config);
    let shapes = model.params.shapes();
    let mut stored = doc.tensors.into_iter();
    for ((name, slot), (_, expected)) in model.params.tensors_mut().into_iter().zip(shapes) {
        let tensor = stored
            .next()
            .filter(|t| t.name == name)
            .ok_or_else(|| CheckpointError::MissingTensor(name.to_owned()))?;
        if tensor.shape != expected || tensor.data.len() != slot.len() {
            return Err(CheckpointError::Shape {
                name: name.to_owned(),
                expected,
                found: tensor.shape,
            });
        }
        slot.copy_from_slice(&tensor.data);
    }
    Ok(model)
}

pub fn save_checkpoint(model: &TaggerModel, path: &Path) -> Result<(), CheckpointError> {
    let file = std::fs::File::create(path)?;
    let mut writer = io::BufWriter::new(file);
    write_checkpoint(model, &mut writer)?;
    writer.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TaggerModel, CheckpointError> {
    let file = std::fs::File::open(path)?;
    read_checkpoint(io::BufReader::new(file))
}
