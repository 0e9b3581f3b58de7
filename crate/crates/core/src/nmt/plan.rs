use super::{NmtError, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Embedding,
    Encoder,
    Decoder,
    Head,
}

/// Half of the translation model a group belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stack {
    Encoder,
    Decoder,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub side: Side,
    pub stack: Stack,
    /// 1-based index within the stack for transformer layers.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub layer: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    groups: Vec<ParamGroup>,
}

impl Architecture {
    pub fn new(groups: Vec<ParamGroup>) -> Result<Self> {
        let mut seen = HashSet::new();
        for g in &groups {
            if !seen.insert(g.name.as_str()) {
                return Err(NmtError::DuplicateGroup(g.name.clone()));
            }
        }
        Ok(Architecture { groups })
    }

    /// Encoder embeddings, `encoder_layers` encoder layers, decoder
    /// embeddings, `decoder_layers` decoder layers and the output head.
    pub fn transformer(encoder_layers: usize, decoder_layers: usize) -> Self {
        let mut groups = vec![ParamGroup {
            name: "encoder.embed".into(),
            side: Side::Embedding,
            stack: Stack::Encoder,
            layer: None,
        }];
        groups.extend((1..=encoder_layers).map(|l| ParamGroup {
            name: format!("encoder.layer.{l}"),
            side: Side::Encoder,
            stack: Stack::Encoder,
            layer: Some(l),
        }));
        groups.push(ParamGroup {
            name: "decoder.embed".into(),
            side: Side::Embedding,
            stack: Stack::Decoder,
            layer: None,
        });
        groups.extend((1..=decoder_layers).map(|l| ParamGroup {
            name: format!("decoder.layer.{l}"),
            side: Side::Decoder,
            stack: Stack::Decoder,
            layer: Some(l),
        }));
        groups.push(ParamGroup {
            name: "decoder.head".into(),
            side: Side::Head,
            stack: Stack::Decoder,
            layer: None,
        });
        Architecture { groups }
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }
}

/// Architecture family of the pretrained model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlmKind {
    EncoderOnly,
    DecoderOnly,
    EncoderDecoder,
}

impl FromStr for PlmKind {
    type Err = NmtError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "encoder" | "encoder-only" | "bert" => Ok(PlmKind::EncoderOnly),
            "decoder" | "decoder-only" | "gpt2" | "gpt-2" => Ok(PlmKind::DecoderOnly),
            "seq2seq" | "encoder-decoder" | "bart" => Ok(PlmKind::EncoderDecoder),
            _ => Err(NmtError::UnknownPlmKind(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    EncoderInit,
    DecoderInit,
    Seq2seqInit,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::EncoderInit => "encoder_init",
            Strategy::DecoderInit => "decoder_init",
            Strategy::Seq2seqInit => "seq2seq_init",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSource {
    FromPlm,
    Random,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAction {
    #[serde(flatten)]
    pub group: ParamGroup,
    pub init: InitSource,
    pub trainable: bool,
}

/// One initialization source and trainability flag per parameter group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitPlan {
    pub strategy: Strategy,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub single_layer: Option<usize>,
    pub groups: Vec<GroupAction>,
}

impl InitPlan {
    /// Transformer-layer groups initialized from the pretrained model, in
    /// pretrained-layer order: encoder layers first, then decoder layers.
    pub fn pretrained_layers(&self) -> Vec<&GroupAction> {
        let mut layers: Vec<&GroupAction> = self
            .groups
            .iter()
            .filter(|a| a.group.layer.is_some() && a.init == InitSource::FromPlm)
            .collect();
        layers.sort_by_key(|a| (a.group.stack == Stack::Decoder, a.group.layer));
        layers
    }

    pub fn count(&self, init: InitSource) -> usize {
        self.groups.iter().filter(|a| a.init == init).count()
    }
}

/// Encoder-only models initialize the encoder side, decoder-only models the
/// decoder side, encoder-decoder models everything. Embeddings and the head
/// follow the stack they sit in. All groups start trainable.
pub fn make_init_plan(architecture: &Architecture, plm_kind: PlmKind) -> InitPlan {
    let (strategy, from_plm): (Strategy, fn(Stack) -> bool) = match plm_kind {
        PlmKind::EncoderOnly => (Strategy::EncoderInit, |s| s == Stack::Encoder),
        PlmKind::DecoderOnly => (Strategy::DecoderInit, |s| s == Stack::Decoder),
        PlmKind::EncoderDecoder => (Strategy::Seq2seqInit, |_| true),
    };
    InitPlan {
        strategy,
        single_layer: None,
        groups: architecture
            .groups()
            .iter()
            .map(|g| GroupAction {
                group: g.clone(),
                init: if from_plm(g.stack) {
                    InitSource::FromPlm
                } else {
                    InitSource::Random
                },
                trainable: true,
            })
            .collect(),
    }
}

/// Freezes everything except the groups of pretrained layer `layer`.
///
/// Pretrained layers are numbered from 1 over the plan's from-PLM transformer
/// layers, encoder before decoder; for a 6+6 encoder-decoder model, layer 7
/// is the first decoder layer.
pub fn single_layer_plan(plan: &InitPlan, layer: usize) -> Result<InitPlan> {
    let layers = plan.pretrained_layers();
    if layer == 0 || layer > layers.len() {
        return Err(NmtError::LayerOutOfRange {
            layer,
            max: layers.len(),
        });
    }
    let target = layers[layer - 1].group.name.clone();
    let mut out = plan.clone();
    out.single_layer = Some(layer);
    for a in &mut out.groups {
        a.trainable = a.group.name == target;
    }
    Ok(out)
}
