//! Layer embedding dumps and feature construction.
//!
//! A dump holds, for one model, the token-embedding matrix of every probed
//! layer for every instance, plus the token-to-character alignment needed to
//! pool over connective or argument tokens. Layers are numbered from 1; the
//! embedding layer is never stored.

mod align;
mod format;
mod pool;

pub use align::{tokens_in_span, TokenAlignment};
pub use format::{
    decode_dump, encode_dump, read_dump, write_dump, DumpReader, FORMAT_VERSION, MAGIC,
};
pub use pool::{
    feature_token_indices, feature_vector, pool_mean, FeatureError, FeatureVariant, PoolingOptions,
};

use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("bad magic at offset 0: expected DPRB0001")]
    BadMagic,
    #[error("unsupported format version {found} at offset 8")]
    UnsupportedVersion { found: u8 },
    #[error("file truncated at offset {offset} while reading {section} (needed {needed} bytes)")]
    Truncated {
        offset: u64,
        needed: u64,
        section: &'static str,
    },
    #[error("{count} trailing bytes after offset {offset}")]
    TrailingBytes { offset: u64, count: u64 },
    #[error("manifest at offset {offset}: {message}")]
    Manifest { offset: u64, message: String },
    #[error("instance `{id}`: {token_count} token rows but {alignment_len} alignment entries")]
    AlignmentMismatch {
        id: String,
        token_count: usize,
        alignment_len: usize,
    },
    #[error("instance `{id}`, layer {layer}: non-finite value at byte offset {offset}")]
    NonFinite {
        id: String,
        layer: usize,
        offset: u64,
    },
    #[error("invalid dump: {0}")]
    Invalid(String),
    #[error("instance `{0}` is not in the dump")]
    UnknownInstance(String),
    #[error("layer {layer} outside 1..={layer_count}")]
    LayerOutOfRange { layer: usize, layer_count: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

/// Which half of the network a layer belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerRole {
    #[serde(rename = "encoder")]
    Encoder,
    #[serde(rename = "decoder")]
    Decoder,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl LayerRole {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerRole::Encoder => "encoder",
            LayerRole::Decoder => "decoder",
            LayerRole::NotApplicable => "n/a",
        }
    }
}

/// Model-level part of a dump manifest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub model_id: String,
    pub layer_count: usize,
    pub hidden_dim: usize,
    /// One role per layer, index 0 describing layer 1.
    pub layer_roles: Vec<LayerRole>,
    /// Row of the classifier token, when the model has one.
    pub cls_position: Option<usize>,
}

impl DumpHeader {
    /// Roles for a model with `encoder_layers` encoder layers followed by
    /// decoder layers, e.g. 6 + 6 gives layers 1-6 encoder and 7-12 decoder.
    pub fn encoder_decoder_roles(encoder_layers: usize, decoder_layers: usize) -> Vec<LayerRole> {
        std::iter::repeat_n(LayerRole::Encoder, encoder_layers)
            .chain(std::iter::repeat_n(LayerRole::Decoder, decoder_layers))
            .collect()
    }

    pub fn role(&self, layer: usize) -> Option<LayerRole> {
        layer
            .checked_sub(1)
            .and_then(|i| self.layer_roles.get(i))
            .copied()
    }

    pub fn check_layer(&self, layer: usize) -> Result<()> {
        if layer == 0 || layer > self.layer_count {
            return Err(EmbeddingError::LayerOutOfRange {
                layer,
                layer_count: self.layer_count,
            });
        }
        Ok(())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.layer_count == 0 || self.hidden_dim == 0 {
            return Err(EmbeddingError::Invalid(
                "layer_count and hidden_dim must be positive".into(),
            ));
        }
        if self.layer_roles.len() != self.layer_count {
            return Err(EmbeddingError::Invalid(format!(
                "{} layer roles for {} layers",
                self.layer_roles.len(),
                self.layer_count
            )));
        }
        // An encoder-decoder model lists all encoder layers first.
        if let Some(first_dec) = self
            .layer_roles
            .iter()
            .position(|r| *r == LayerRole::Decoder)
        {
            if self.layer_roles[first_dec..]
                .iter()
                .any(|r| *r != LayerRole::Decoder)
            {
                return Err(EmbeddingError::Invalid(
                    "decoder layers must follow encoder layers".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Row-major `rows x cols` matrix of 32-bit floats.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(EmbeddingError::Invalid(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(EmbeddingError::Invalid("ragged rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0` and comparing NaN
    /// payloads.
    pub fn bit_eq(&self, other: &Matrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// All layers of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceDump {
    pub id: String,
    pub alignment: TokenAlignment,
    /// Set when the extractor had to cut the input to the model's limit.
    pub truncated: bool,
    /// `layers[l - 1]` is the `token_count x hidden_dim` matrix of layer `l`.
    pub layers: Vec<Matrix>,
}

impl InstanceDump {
    pub fn token_count(&self) -> usize {
        self.alignment.len()
    }
}

/// A complete dump held in memory.
#[derive(Clone, Debug)]
pub struct Dump {
    header: DumpHeader,
    instances: Vec<InstanceDump>,
    index: HashMap<String, usize>,
}

impl Dump {
    pub fn new(header: DumpHeader, instances: Vec<InstanceDump>) -> Result<Self> {
        header.validate()?;
        let mut index = HashMap::with_capacity(instances.len());
        for (i, inst) in instances.iter().enumerate() {
            if index.insert(inst.id.clone(), i).is_some() {
                return Err(EmbeddingError::Invalid(format!(
                    "duplicate instance id `{}`",
                    inst.id
                )));
            }
            if inst.layers.len() != header.layer_count {
                return Err(EmbeddingError::Invalid(format!(
                    "instance `{}` has {} layers, expected {}",
                    inst.id,
                    inst.layers.len(),
                    header.layer_count
                )));
            }
            inst.alignment
                .validate()
                .map_err(|m| EmbeddingError::Invalid(format!("instance `{}`: {m}", inst.id)))?;
            for (l, m) in inst.layers.iter().enumerate() {
                if m.rows() != inst.alignment.len() {
                    return Err(EmbeddingError::AlignmentMismatch {
                        id: inst.id.clone(),
                        token_count: m.rows(),
                        alignment_len: inst.alignment.len(),
                    });
                }
                if m.cols() != header.hidden_dim {
                    return Err(EmbeddingError::Invalid(format!(
                        "instance `{}` layer {} has width {}, expected {}",
                        inst.id,
                        l + 1,
                        m.cols(),
                        header.hidden_dim
                    )));
                }
                if let Some(pos) = m.as_slice().iter().position(|v| !v.is_finite()) {
                    return Err(EmbeddingError::NonFinite {
                        id: inst.id.clone(),
                        layer: l + 1,
                        offset: (pos * 4) as u64,
                    });
                }
            }
            if let Some(cls) = header.cls_position {
                if cls >= inst.alignment.len() {
                    return Err(EmbeddingError::Invalid(format!(
                        "instance `{}` has no row at cls position {cls}",
                        inst.id
                    )));
                }
            }
        }
        Ok(Dump {
            header,
            instances,
            index,
        })
    }

    pub fn header(&self) -> &DumpHeader {
        &self.header
    }

    pub fn instances(&self) -> &[InstanceDump] {
        &self.instances
    }

    pub fn get(&self, id: &str) -> Option<&InstanceDump> {
        self.index.get(id).map(|&i| &self.instances[i])
    }

    /// Bitwise equality of two dumps.
    pub fn bit_eq(&self, other: &Dump) -> bool {
        self.header == other.header
            && self.instances.len() == other.instances.len()
            && self.instances.iter().zip(&other.instances).all(|(a, b)| {
                a.id == b.id
                    && a.alignment == b.alignment
                    && a.truncated == b.truncated
                    && a.layers.len() == b.layers.len()
                    && a.layers.iter().zip(&b.layers).all(|(x, y)| x.bit_eq(y))
            })
    }
}

/// Read access to per-layer token embeddings, whatever backs them.
pub trait EmbeddingSource: Sync {
    fn header(&self) -> &DumpHeader;

    fn alignment(&self, id: &str) -> Option<&TokenAlignment>;

    fn matrix(&self, id: &str, layer: usize) -> Result<Cow<'_, Matrix>>;

    /// Whether the extractor cut this instance short.
    fn is_truncated(&self, _id: &str) -> bool {
        false
    }
}

impl EmbeddingSource for Dump {
    fn header(&self) -> &DumpHeader {
        &self.header
    }

    fn alignment(&self, id: &str) -> Option<&TokenAlignment> {
        self.get(id).map(|i| &i.alignment)
    }

    fn matrix(&self, id: &str, layer: usize) -> Result<Cow<'_, Matrix>> {
        self.header.check_layer(layer)?;
        let inst = self
            .get(id)
            .ok_or_else(|| EmbeddingError::UnknownInstance(id.to_string()))?;
        Ok(Cow::Borrowed(&inst.layers[layer - 1]))
    }

    fn is_truncated(&self, id: &str) -> bool {
        self.get(id).is_some_and(|i| i.truncated)
    }
}
