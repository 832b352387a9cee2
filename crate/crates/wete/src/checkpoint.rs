//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "WETE1"
//! u32 V, u32 H, u32 K, u32 trunk width
//! u8 mode (0 fixed, 1 finetune, 2 scratch)
//! u8 input transform (0 identity, 1 log1p)
//! u32 term count, then per term: u32 byte length, UTF-8 bytes
//! u32 array count, then per array:
//!     u8 name length, name, u32 rows, u32 cols, rows*cols f32 (row-major)
//! ```
//!
//! Vectors are stored as `1 x n` arrays.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use wete_core::embedding::EmbeddingMatrix;
use wete_core::model::{EncoderParams, Linear, ParamId, TopicEmbeddings};
use wete_core::{InputTransform, Matrix, ModelConfig, TrainingMode, Vocabulary, WeteModel};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 5] = b"WETE1";

fn mode_byte(mode: TrainingMode) -> u8 {
    match mode {
        TrainingMode::Fixed => 0,
        TrainingMode::Finetune => 1,
        TrainingMode::Scratch => 2,
    }
}

fn transform_byte(t: InputTransform) -> u8 {
    match t {
        InputTransform::Identity => 0,
        InputTransform::Log1p => 1,
    }
}

/// Serializes `model` and its vocabulary. Parameters are narrowed to `f32`.
pub fn encode(model: &WeteModel, vocab: &Vocabulary) -> Vec<u8> {
    let mut out = Vec::new();
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    out.extend_from_slice(MAGIC);
    u32le(&mut out, model.vocab_size());
    u32le(&mut out, model.embed_dim());
    u32le(&mut out, model.num_topics());
    u32le(&mut out, model.encoder.hidden());
    out.push(mode_byte(model.config.mode));
    out.push(transform_byte(model.config.input_transform));
    u32le(&mut out, vocab.len());
    for term in vocab.terms() {
        u32le(&mut out, term.len());
        out.extend_from_slice(term.as_bytes());
    }
    u32le(&mut out, ParamId::ALL.len());
    for id in ParamId::ALL {
        let name = id.name();
        out.push(name.len() as u8);
        out.extend_from_slice(name.as_bytes());
        let (rows, cols) = model.param_shape(id);
        u32le(&mut out, rows);
        u32le(&mut out, cols);
        for &v in model.param(id) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Writes the checkpoint through a temporary file in the same directory and
/// renames it into place, so an existing file is never left half-written.
pub fn save(path: &Path, model: &WeteModel, vocab: &Vocabulary) -> Result<()> {
    let bytes = encode(model, vocab);
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = dir.join(name);
    let write = || -> std::io::Result<()> {
        let mut f = File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(path, e)
    })
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn utf8(&mut self, n: usize) -> std::result::Result<String, String> {
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| format!("invalid UTF-8 at byte {at}"))
    }
}

/// Parses checkpoint bytes into a model (in its stored mode) and vocabulary.
pub fn decode(bytes: &[u8]) -> std::result::Result<(WeteModel, Vocabulary), String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err("bad magic".into());
    }
    let (v, h, k, width) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    if v == 0 || h == 0 || k < 2 || width == 0 {
        return Err(format!("invalid dimensions V={v} H={h} K={k} width={width}"));
    }
    let mode = match r.u8()? {
        0 => TrainingMode::Fixed,
        1 => TrainingMode::Finetune,
        2 => TrainingMode::Scratch,
        b => return Err(format!("unknown mode flag {b}")),
    };
    let input_transform = match r.u8()? {
        0 => InputTransform::Identity,
        1 => InputTransform::Log1p,
        b => return Err(format!("unknown input transform flag {b}")),
    };
    let n_terms = r.u32()?;
    if n_terms != v {
        return Err(format!("vocabulary has {n_terms} terms but V={v}"));
    }
    let mut terms = Vec::with_capacity(v.min(1 << 20));
    for _ in 0..n_terms {
        let len = r.u32()?;
        terms.push(r.utf8(len)?);
    }
    let vocab = Vocabulary::from_terms(&terms).map_err(|e| e.to_string())?;

    let config = ModelConfig {
        topics: k,
        embed_dim: h,
        hidden: width,
        mode,
        input_transform,
        ..ModelConfig::default()
    };
    let encoder = EncoderParams {
        trunk: Linear::zeros(v, width),
        head_shape: Linear::zeros(width, k),
        head_scale: Linear::zeros(width, k),
        input_transform,
    };
    let mut model = WeteModel::from_parts(
        config,
        EmbeddingMatrix::new(Matrix::zeros(v, h)).map_err(|e| e.to_string())?,
        TopicEmbeddings::new(Matrix::zeros(k, h)).map_err(|e| e.to_string())?,
        encoder,
    )
    .map_err(|e| e.to_string())?;

    let n_arrays = r.u32()?;
    let mut seen = BTreeSet::new();
    for _ in 0..n_arrays {
        let len = usize::from(r.u8()?);
        let name = r.utf8(len)?;
        let id = ParamId::from_name(&name).ok_or_else(|| format!("unknown array {name:?}"))?;
        if !seen.insert(id) {
            return Err(format!("duplicate array {name:?}"));
        }
        let shape = (r.u32()?, r.u32()?);
        if shape != model.param_shape(id) {
            let want = model.param_shape(id);
            return Err(format!("array {name:?} has shape {shape:?}, expected {want:?}"));
        }
        let raw = r.take(shape.0 * shape.1 * 4)?;
        for (dst, chunk) in model.param_mut(id).iter_mut().zip(raw.chunks_exact(4)) {
            let x = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !x.is_finite() {
                return Err(format!("array {name:?} contains a non-finite value"));
            }
            *dst = f64::from(x);
        }
    }
    if let Some(missing) = ParamId::ALL.iter().find(|id| !seen.contains(id)) {
        return Err(format!("missing array {:?}", missing.name()));
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok((model, vocab))
}

pub fn load(path: &Path) -> Result<(WeteModel, Vocabulary)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|reason| CliError::Corrupt {
        path: path.to_path_buf(),
        reason,
    })
}
