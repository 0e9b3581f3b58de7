//! Translation-side preparation: context-augmented source lines, parameter
//! initialization and freezing plans, and the recorded training settings.

mod context;
mod plan;

pub use context::{
    build_doc_pairs, read_parallel_tsv, write_parallel, DocPair, Document, SentencePair,
    DEFAULT_SEPARATOR,
};
pub use plan::{
    make_init_plan, single_layer_plan, Architecture, GroupAction, InitPlan, InitSource, ParamGroup,
    PlmKind, Side, Stack, Strategy,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NmtError {
    #[error("unknown PLM kind `{0}` (expected encoder, decoder or seq2seq)")]
    UnknownPlmKind(String),
    #[error("layer {layer} outside 1..={max} of the pretrained layers")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("duplicate parameter group `{0}`")]
    DuplicateGroup(String),
    #[error("document `{doc_id}`, sentence {index}: {message}")]
    BadSentence {
        doc_id: String,
        index: usize,
        message: String,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NmtError>;

/// Settings handed to an external translation trainer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub dataset: String,
    pub source_language: String,
    pub target_language: String,
    pub dev_sets: Vec<String>,
    pub test_sets: Vec<String>,
    pub max_steps: u64,
    pub batch_size: usize,
    pub optimizer: String,
    pub learning_rate: f64,
    pub length_penalty: f64,
    pub beam_size: usize,
    pub context_sentences: usize,
    pub separator: String,
}

pub fn training_config() -> TrainingConfig {
    TrainingConfig {
        dataset: "IWSLT2017".into(),
        source_language: "zh".into(),
        target_language: "en".into(),
        dev_sets: vec!["dev2010".into()],
        test_sets: ["tst2010", "tst2011", "tst2012", "tst2013"]
            .map(String::from)
            .to_vec(),
        max_steps: 200_000,
        batch_size: 16,
        optimizer: "adam".into(),
        learning_rate: 2e-5,
        length_penalty: 1.0,
        beam_size: 4,
        context_sentences: 1,
        separator: DEFAULT_SEPARATOR.into(),
    }
}
