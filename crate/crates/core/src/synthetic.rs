//! Seeded stand-ins for a real corpus and real layer dumps.
//!
//! [`synthetic_corpus`] produces PDTB-shaped instances through the regular
//! relation-to-instance path. [`SyntheticDump`] tokenizes each instance on
//! whitespace (splitting long words into two subword pieces) and fills every
//! layer with Gaussian noise. If a planted layer is configured, every token row
//! of that layer is shifted by a fixed per-class mean vector, so only that
//! layer carries a linearly decodable label signal.

use crate::embedding::{
    Dump, DumpHeader, EmbeddingError, EmbeddingSource, InstanceDump, LayerRole, Matrix, Result,
    TokenAlignment,
};
use crate::pdtb::{build_instance, DiscourseInstance, RawRelation, RelationType, SenseMap, Split};
use crate::seed::derive_seed;
use crate::span::CharSpan;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::borrow::Cow;
use std::collections::HashMap;

const WORDS: &[&str] = &[
    "market",
    "shares",
    "investors",
    "company",
    "quarter",
    "profit",
    "board",
    "analysts",
    "prices",
    "bank",
    "rates",
    "growth",
    "sales",
    "traders",
    "fund",
    "bonds",
    "deal",
    "lenders",
    "cash",
    "flow",
    "reported",
    "rose",
    "fell",
    "said",
    "expects",
    "plans",
    "sold",
    "bought",
    "steady",
    "sharply",
    "yesterday",
    "recently",
    "the",
    "a",
    "its",
    "their",
    "new",
    "more",
    "less",
    "higher",
    "lower",
    "collateral",
    "management",
];

const CONNECTIVES: &[&str] = &[
    "because", "but", "and", "since", "while", "although", "when", "if", "so", "however", "then",
    "instead",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusConfig {
    pub seed: u64,
    /// Instances per label in each split, in train/valid/test order.
    pub per_label: [usize; 3],
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        SyntheticCorpusConfig {
            seed: 0,
            per_label: [30, 8, 8],
        }
    }
}

/// Generates instances covering every label of `map`, split as configured.
///
/// Labels of sense-bearing relations are drawn from the first 19 inventory
/// entries; each relation gets the label name as its sense path, so the
/// sense map must map those names to themselves (the bundled one does).
pub fn synthetic_corpus(config: &SyntheticCorpusConfig, map: &SenseMap) -> Vec<DiscourseInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let entrel = map.label_index("EntRel");
    let norel = map.label_index("NoRel");
    let mut out = Vec::new();
    let mut line = 0;
    for (split, &n) in Split::ALL.iter().zip(&config.per_label) {
        for label in 0..map.label_count() {
            for k in 0..n {
                line += 1;
                let relation_type = if Some(label) == entrel {
                    RelationType::EntRel
                } else if Some(label) == norel {
                    RelationType::NoRel
                } else {
                    [
                        RelationType::Explicit,
                        RelationType::Explicit,
                        RelationType::Implicit,
                        RelationType::AltLex,
                    ][(k + label) % 4]
                };
                let raw = random_relation(
                    &mut rng,
                    relation_type,
                    map.label_name(label).unwrap_or_default(),
                    line,
                );
                let mut inst =
                    build_instance(&raw, map).expect("synthetic relation is well-formed");
                inst.split = Some(*split);
                out.push(inst);
            }
        }
    }
    out
}

fn phrase(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n)
        .map(|_| *WORDS.choose(rng).expect("non-empty"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_relation(
    rng: &mut ChaCha8Rng,
    relation_type: RelationType,
    sense: &str,
    line: usize,
) -> RawRelation {
    let arg1 = phrase(rng, 3, 8);
    let mut arg2 = phrase(rng, 3, 8);
    let connective = match relation_type {
        RelationType::Explicit | RelationType::Implicit => {
            Some(CONNECTIVES.choose(rng).expect("non-empty").to_string())
        }
        RelationType::AltLex => {
            let expr = format!("this {}", phrase(rng, 1, 2));
            arg2 = format!("{expr} {arg2}");
            Some(expr)
        }
        _ => None,
    };
    let senses = if relation_type.has_sense() {
        vec![sense.to_string()]
    } else {
        vec![]
    };
    let a1 = CharSpan::new(0, arg1.len());
    let a2 = CharSpan::new(a1.end + 1, a1.end + 1 + arg2.len());
    RawRelation {
        doc_id: format!("syn_{:04}", line / 50),
        line,
        relation_type,
        connective_char_span: (relation_type == RelationType::Explicit).then(|| vec![a1]),
        altlex_char_span: (relation_type == RelationType::AltLex).then(|| vec![a2]),
        connective_text: connective,
        sense_paths: senses,
        arg1_text: arg1,
        arg2_text: arg2,
        arg1_spans: vec![a1],
        arg2_spans: vec![a2],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticDumpConfig {
    pub model_id: String,
    pub layer_count: usize,
    pub hidden_dim: usize,
    /// Emit `[CLS]`/`[SEP]` sentinel rows around the text and record the
    /// classifier position.
    pub has_cls: bool,
    /// Number of leading encoder layers; the rest are decoder layers. `None`
    /// marks every layer `n/a`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder_layers: Option<usize>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted_layer: Option<usize>,
    /// Scale of the per-class mean vectors (per-dimension standard deviation).
    pub signal_strength: f64,
    pub noise_std: f64,
    pub class_count: usize,
}

impl SyntheticDumpConfig {
    pub fn new(model_id: &str, layer_count: usize, hidden_dim: usize) -> Self {
        SyntheticDumpConfig {
            model_id: model_id.to_string(),
            layer_count,
            hidden_dim,
            has_cls: false,
            encoder_layers: None,
            seed: 0,
            planted_layer: None,
            signal_strength: 1.0,
            noise_std: 1.0,
            class_count: 21,
        }
    }
}

impl Default for SyntheticDumpConfig {
    fn default() -> Self {
        SyntheticDumpConfig::new("synthetic", 12, 16)
    }
}

/// Embedding source that generates matrices on demand.
pub struct SyntheticDump {
    config: SyntheticDumpConfig,
    header: DumpHeader,
    ids: Vec<String>,
    alignments: HashMap<String, TokenAlignment>,
    labels: HashMap<String, usize>,
    class_means: Vec<Vec<f64>>,
}

impl SyntheticDump {
    pub fn new(config: SyntheticDumpConfig, instances: &[DiscourseInstance]) -> Result<Self> {
        let layer_roles = match config.encoder_layers {
            Some(e) if e <= config.layer_count => {
                DumpHeader::encoder_decoder_roles(e, config.layer_count - e)
            }
            Some(e) => {
                return Err(EmbeddingError::Invalid(format!(
                    "{e} encoder layers in a {}-layer model",
                    config.layer_count
                )))
            }
            None => vec![LayerRole::NotApplicable; config.layer_count],
        };
        if let Some(l) = config.planted_layer {
            if l == 0 || l > config.layer_count {
                return Err(EmbeddingError::LayerOutOfRange {
                    layer: l,
                    layer_count: config.layer_count,
                });
            }
        }
        let header = DumpHeader {
            model_id: config.model_id.clone(),
            layer_count: config.layer_count,
            hidden_dim: config.hidden_dim,
            layer_roles,
            cls_position: config.has_cls.then_some(0),
        };
        header.validate()?;

        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(&[&config.seed.to_string(), "class-means"]));
        let class_means = (0..config.class_count)
            .map(|_| {
                (0..config.hidden_dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z * config.signal_strength
                    })
                    .collect()
            })
            .collect();

        let mut ids = Vec::with_capacity(instances.len());
        let mut alignments = HashMap::with_capacity(instances.len());
        let mut labels = HashMap::with_capacity(instances.len());
        for inst in instances {
            ids.push(inst.id.clone());
            alignments.insert(
                inst.id.clone(),
                tokenize(&inst.serialized_text, config.has_cls),
            );
            labels.insert(inst.id.clone(), inst.label_index);
        }
        Ok(SyntheticDump {
            config,
            header,
            ids,
            alignments,
            labels,
            class_means,
        })
    }

    fn generate(&self, id: &str, layer: usize) -> Result<Matrix> {
        self.header.check_layer(layer)?;
        let alignment = self
            .alignments
            .get(id)
            .ok_or_else(|| EmbeddingError::UnknownInstance(id.to_string()))?;
        let rows = alignment.len();
        let dim = self.config.hidden_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
            &self.config.seed.to_string(),
            id,
            &layer.to_string(),
        ]));
        let noise = Normal::new(0.0, self.config.noise_std)
            .map_err(|e| EmbeddingError::Invalid(format!("noise_std: {e}")))?;
        let shift = match self.config.planted_layer {
            Some(l) if l == layer => self.labels.get(id).and_then(|&c| self.class_means.get(c)),
            _ => None,
        };
        let mut data = Vec::with_capacity(rows * dim);
        for _ in 0..rows {
            for d in 0..dim {
                let v: f64 = noise.sample(&mut rng) + shift.map_or(0.0, |m| m[d]);
                data.push(v as f32);
            }
        }
        Matrix::new(rows, dim, data)
    }

    /// Materializes every instance and layer, e.g. to write a dump file.
    pub fn to_dump(&self) -> Result<Dump> {
        let instances = self
            .ids
            .iter()
            .map(|id| {
                Ok(InstanceDump {
                    id: id.clone(),
                    alignment: self.alignments[id].clone(),
                    truncated: false,
                    layers: (1..=self.header.layer_count)
                        .map(|l| self.generate(id, l))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dump::new(self.header.clone(), instances)
    }
}

impl EmbeddingSource for SyntheticDump {
    fn header(&self) -> &DumpHeader {
        &self.header
    }

    fn alignment(&self, id: &str) -> Option<&TokenAlignment> {
        self.alignments.get(id)
    }

    fn matrix(&self, id: &str, layer: usize) -> Result<Cow<'_, Matrix>> {
        self.generate(id, layer).map(Cow::Owned)
    }
}

/// Whitespace tokens; words longer than six characters become two pieces.
pub fn tokenize(text: &str, with_specials: bool) -> TokenAlignment {
    let mut offsets = Vec::new();
    if with_specials {
        offsets.push(None);
    }
    let mut start = None;
    let chars: Vec<char> = text.chars().collect();
    for i in 0..=chars.len() {
        let boundary = i == chars.len() || chars[i].is_whitespace();
        match (start, boundary) {
            (None, false) => start = Some(i),
            (Some(s), true) => {
                if i - s > 6 {
                    let mid = s + (i - s) / 2;
                    offsets.push(Some(CharSpan::new(s, mid)));
                    offsets.push(Some(CharSpan::new(mid, i)));
                } else {
                    offsets.push(Some(CharSpan::new(s, i)));
                }
                start = None;
            }
            _ => {}
        }
    }
    if with_specials {
        offsets.push(None);
    }
    TokenAlignment::new(offsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{feature_vector, FeatureVariant, PoolingOptions};

    #[test]
    fn tokenizer_offsets() {
        let a = tokenize("A since investors", true);
        let spans: Vec<_> = a.offsets().to_vec();
        assert_eq!(
            spans,
            vec![
                None,
                Some(CharSpan::new(0, 1)),
                Some(CharSpan::new(2, 7)),
                Some(CharSpan::new(8, 12)),
                Some(CharSpan::new(12, 17)),
                None
            ]
        );
        assert!(tokenize("  ", false).is_empty());
    }

    #[test]
    fn corpus_covers_all_labels_and_splits() {
        let map = SenseMap::default();
        let corpus = synthetic_corpus(
            &SyntheticCorpusConfig {
                seed: 3,
                per_label: [4, 2, 1],
            },
            &map,
        );
        assert_eq!(corpus.len(), 21 * 7);
        for inst in &corpus {
            inst.validate(21).unwrap();
            if inst.relation_type == RelationType::Explicit {
                assert!(inst.connective_char_span.is_some());
            }
        }
        assert!(corpus
            .iter()
            .any(|i| i.relation_type == RelationType::AltLex && i.altlex_char_span.is_some()));
        assert_eq!(
            corpus
                .iter()
                .filter(|i| i.split == Some(Split::Test))
                .count(),
            21
        );
    }

    #[test]
    fn generation_is_deterministic_and_planted_only_at_its_layer() {
        let map = SenseMap::default();
        let corpus = synthetic_corpus(
            &SyntheticCorpusConfig {
                seed: 1,
                per_label: [1, 0, 0],
            },
            &map,
        );
        let mut cfg = SyntheticDumpConfig::new("toy", 3, 4);
        cfg.planted_layer = Some(2);
        cfg.noise_std = 1e-6;
        cfg.signal_strength = 10.0;
        let a = SyntheticDump::new(cfg.clone(), &corpus).unwrap();
        let b = SyntheticDump::new(cfg, &corpus).unwrap();
        let id = &corpus[0].id;
        assert!(a.matrix(id, 1).unwrap().bit_eq(&b.matrix(id, 1).unwrap()));

        let opts = PoolingOptions::default();
        let v1 = feature_vector(&corpus[0], &a, 1, FeatureVariant::WholeMean, opts).unwrap();
        let v2 = feature_vector(&corpus[0], &a, 2, FeatureVariant::WholeMean, opts).unwrap();
        assert!(v1.iter().all(|v| v.abs() < 1e-3));
        assert!(v2.iter().any(|v| v.abs() > 1e-2));
        let dump = a.to_dump().unwrap();
        assert!(dump
            .matrix(id, 2)
            .unwrap()
            .bit_eq(&a.matrix(id, 2).unwrap()));
    }

    #[test]
    fn encoder_decoder_roles() {
        let mut cfg = SyntheticDumpConfig::new("bart", 12, 2);
        cfg.encoder_layers = Some(6);
        let d = SyntheticDump::new(cfg, &[]).unwrap();
        assert_eq!(d.header().role(6), Some(LayerRole::Encoder));
        assert_eq!(d.header().role(7), Some(LayerRole::Decoder));
        assert_eq!(d.header().role(13), None);
    }
}
