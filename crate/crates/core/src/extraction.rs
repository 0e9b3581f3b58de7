//! Hand-off to an external embedding extractor.
//!
//! The extractor receives an [`ExtractionManifest`] (JSON) listing the
//! instances to encode and the dump parameters it must honour, and returns a
//! dump file. [`check_dump`] verifies that a returned dump matches the
//! manifest it was produced from.

use crate::embedding::{DumpHeader, EmbeddingError, EmbeddingSource, LayerRole};
use crate::pdtb::{DiscourseInstance, RelationType};
use crate::span::CharSpan;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("model descriptor: {0}")]
    Descriptor(String),
    #[error("dump does not match the manifest: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

pub type Result<T> = std::result::Result<T, ExtractionError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    BidirectionalEncoder,
    AutoregressiveDecoder,
    EncoderDecoder,
}

/// Model description supplied by the user, usually as TOML.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub model_id: String,
    /// Checkpoint name or path understood by the extractor.
    pub checkpoint: String,
    pub family: ModelFamily,
    /// Transformer layers to dump, embedding output excluded.
    pub layer_count: usize,
    pub hidden_dim: usize,
    #[serde(default)]
    pub has_cls: bool,
    pub max_length: usize,
    /// Encoder layers of an encoder-decoder model; defaults to half.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder_layers: Option<usize>,
}

impl ModelDescriptor {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let d: ModelDescriptor =
            toml::from_str(text).map_err(|e| ExtractionError::Descriptor(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ExtractionError::Descriptor(m.to_string()));
        if self.model_id.is_empty() {
            return bad("model_id must not be empty");
        }
        if self.layer_count == 0 || self.hidden_dim == 0 || self.max_length == 0 {
            return bad("layer_count, hidden_dim and max_length must be positive");
        }
        if self.has_cls && self.family == ModelFamily::AutoregressiveDecoder {
            return bad("an autoregressive decoder has no classifier token");
        }
        match (self.family, self.encoder_layers) {
            (ModelFamily::EncoderDecoder, Some(e)) if e == 0 || e >= self.layer_count => {
                bad("encoder_layers must leave at least one layer on each side")
            }
            (ModelFamily::EncoderDecoder, None) if self.layer_count < 2 => {
                bad("an encoder-decoder needs two layers")
            }
            (ModelFamily::EncoderDecoder, _) | (_, None) => Ok(()),
            (_, Some(_)) => bad("encoder_layers only applies to encoder-decoder models"),
        }
    }

    /// Encoder-decoder layers are numbered encoder first, then decoder.
    pub fn layer_roles(&self) -> Vec<LayerRole> {
        match self.family {
            ModelFamily::BidirectionalEncoder => vec![LayerRole::Encoder; self.layer_count],
            ModelFamily::AutoregressiveDecoder => vec![LayerRole::Decoder; self.layer_count],
            ModelFamily::EncoderDecoder => {
                let e = self.encoder_layers.unwrap_or(self.layer_count / 2);
                DumpHeader::encoder_decoder_roles(e, self.layer_count - e)
            }
        }
    }

    /// Header every dump of this model must carry.
    pub fn expected_header(&self) -> DumpHeader {
        DumpHeader {
            model_id: self.model_id.clone(),
            layer_count: self.layer_count,
            hidden_dim: self.hidden_dim,
            layer_roles: self.layer_roles(),
            cls_position: self.has_cls.then_some(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestInstance {
    pub id: String,
    pub serialized_text: String,
    pub relation_type: RelationType,
    pub arg1_char_span: CharSpan,
    pub arg2_char_span: CharSpan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connective_char_span: Option<CharSpan>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionManifest {
    pub manifest_version: u32,
    pub dump_format_version: u8,
    pub model: ModelDescriptor,
    pub header: DumpHeader,
    pub instances: Vec<ManifestInstance>,
}

pub fn build_manifest(
    instances: &[DiscourseInstance],
    model: &ModelDescriptor,
) -> Result<ExtractionManifest> {
    model.validate()?;
    Ok(ExtractionManifest {
        manifest_version: MANIFEST_VERSION,
        dump_format_version: crate::embedding::FORMAT_VERSION,
        model: model.clone(),
        header: model.expected_header(),
        instances: instances
            .iter()
            .map(|i| ManifestInstance {
                id: i.id.clone(),
                serialized_text: i.serialized_text.clone(),
                relation_type: i.relation_type,
                arg1_char_span: i.arg1_char_span,
                arg2_char_span: i.arg2_char_span,
                connective_char_span: i.connective_char_span,
            })
            .collect(),
    })
}

/// Checks header equality, instance coverage and alignment bounds.
pub fn check_dump(manifest: &ExtractionManifest, dump: &dyn EmbeddingSource) -> Result<()> {
    if dump.header() != &manifest.header {
        return Err(ExtractionError::Mismatch(format!(
            "header {:?} differs from expected {:?}",
            dump.header(),
            manifest.header
        )));
    }
    for inst in &manifest.instances {
        let alignment = dump
            .alignment(&inst.id)
            .ok_or_else(|| ExtractionError::Mismatch(format!("instance `{}` missing", inst.id)))?;
        alignment
            .validate_against(inst.serialized_text.chars().count())
            .map_err(|e| ExtractionError::Mismatch(format!("instance `{}`: {e}", inst.id)))?;
    }
    Ok(())
}
