//! PDTB 2.0 shallow discourse annotations.
//!
//! Raw pipe-delimited relations ([`RawRelation`]) are turned into probe
//! instances ([`DiscourseInstance`]) whose text is what the pretrained model
//! sees: `arg1 [connective] arg2`, single-space separated, with the
//! connective present only for explicit relations.

mod instance;
mod pipe;
mod sense;
mod split;

pub use instance::{build_instance, build_instances, DiscourseInstance, MultiSensePolicy};
pub use pipe::{parse_pdtb, to_pipe_line, write_pdtb, RawRelation, PIPE_COLUMNS};
pub use sense::{SenseMap, LABEL_COUNT, PDTB2_SENSE_PATHS};
pub use split::{
    assign_splits, corpus_stats, CorpusStats, Split, SplitConfig, SplitRule, SplitStats,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// The five PDTB relation types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationType {
    Explicit,
    Implicit,
    AltLex,
    EntRel,
    NoRel,
}

impl RelationType {
    pub const ALL: [RelationType; 5] = [
        RelationType::Explicit,
        RelationType::Implicit,
        RelationType::AltLex,
        RelationType::EntRel,
        RelationType::NoRel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::Explicit => "Explicit",
            RelationType::Implicit => "Implicit",
            RelationType::AltLex => "AltLex",
            RelationType::EntRel => "EntRel",
            RelationType::NoRel => "NoRel",
        }
    }

    /// Relation types annotated with a sense hierarchy.
    pub fn has_sense(self) -> bool {
        matches!(
            self,
            RelationType::Explicit | RelationType::Implicit | RelationType::AltLex
        )
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        RelationType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Error)]
pub enum PdtbError {
    #[error("{doc_id}: line {line}, column {column}: {message}")]
    Malformed {
        doc_id: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{doc_id}: line {line}: unknown relation type `{token}`")]
    UnknownRelationType {
        doc_id: String,
        line: usize,
        token: String,
    },
    #[error("relation {relation}: sense path `{path}` is not in the sense map")]
    UnmappedSense { relation: String, path: String },
    #[error("relation {0}: sense annotation missing")]
    MissingSense(String),
    #[error("relation {relation}: {which} text is empty")]
    EmptyArgument {
        relation: String,
        which: &'static str,
    },
    #[error("relation {relation}: field `{field}` cannot be written to a pipe line")]
    Unrepresentable {
        relation: String,
        field: &'static str,
    },
    #[error("sense map line {line}: {message}")]
    SenseMap { line: usize, message: String },
    #[error("split config: {0}")]
    SplitConfig(String),
    #[error("document `{0}` is not covered by the split config")]
    UncoveredDocument(String),
    #[error("instance file line {line}: {message}")]
    InstanceFile { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PdtbError>;

/// Writes one JSON object per instance and line.
pub fn write_instances<W: std::io::Write>(
    mut out: W,
    instances: &[DiscourseInstance],
) -> Result<()> {
    for inst in instances {
        let line = serde_json::to_string(inst).map_err(|e| PdtbError::InstanceFile {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads instances written by [`write_instances`], checking each against
/// `label_count`. Blank lines are ignored.
pub fn read_instances<R: std::io::BufRead>(
    reader: R,
    label_count: usize,
) -> Result<Vec<DiscourseInstance>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| PdtbError::InstanceFile {
            line: i + 1,
            message,
        };
        let inst: DiscourseInstance =
            serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        inst.validate(label_count).map_err(bad)?;
        out.push(inst);
    }
    Ok(out)
}
