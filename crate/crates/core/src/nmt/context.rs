use super::{NmtError, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};

pub const DEFAULT_SEPARATOR: &str = " [SEP] ";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: String,
    pub target: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub pairs: Vec<SentencePair>,
}

/// One translation example with at most one previous source sentence as
/// context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocPair {
    pub doc_id: String,
    /// 0-based position within the document.
    pub index: usize,
    pub context_sentence: Option<String>,
    pub current_sentence: String,
    pub target_sentence: String,
    /// Model input: `context + separator + current`, or `current` alone at
    /// the start of a document.
    pub source_line: String,
}

/// Pairs every sentence with its predecessor in the same document.
///
/// Empty documents are skipped with a warning. Sentences containing the
/// trimmed separator or a line break are rejected, since either would break
/// the one-separator-per-line and line-alignment contracts.
pub fn build_doc_pairs(documents: &[Document], separator: &str) -> Result<Vec<DocPair>> {
    let marker = separator.trim();
    let mut out = Vec::with_capacity(documents.iter().map(|d| d.pairs.len()).sum());
    for doc in documents {
        if doc.pairs.is_empty() {
            log::warn!("skipping empty document `{}`", doc.doc_id);
            continue;
        }
        for (index, pair) in doc.pairs.iter().enumerate() {
            let bad = |message: String| NmtError::BadSentence {
                doc_id: doc.doc_id.clone(),
                index,
                message,
            };
            for text in [&pair.source, &pair.target] {
                if text.contains(['\n', '\r']) {
                    return Err(bad("line break inside a sentence".into()));
                }
            }
            if !marker.is_empty() && pair.source.contains(marker) {
                return Err(bad(format!("source already contains `{marker}`")));
            }
            let context = index.checked_sub(1).map(|i| doc.pairs[i].source.clone());
            let source_line = match &context {
                Some(c) => format!("{c}{separator}{}", pair.source),
                None => pair.source.clone(),
            };
            out.push(DocPair {
                doc_id: doc.doc_id.clone(),
                index,
                context_sentence: context,
                current_sentence: pair.source.clone(),
                target_sentence: pair.target.clone(),
                source_line,
            });
        }
    }
    Ok(out)
}

/// Reads `doc_id<TAB>source<TAB>target` lines. Rows of one document keep
/// their order; documents appear in order of first occurrence. Blank lines
/// are ignored.
pub fn read_parallel_tsv<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs: Vec<Document> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [doc_id, source, target] = fields[..] else {
            return Err(NmtError::Malformed {
                line: i + 1,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        };
        let pair = SentencePair {
            source: source.to_string(),
            target: target.to_string(),
        };
        match index.get(doc_id) {
            Some(&k) => docs[k].pairs.push(pair),
            None => {
                index.insert(doc_id.to_string(), docs.len());
                docs.push(Document {
                    doc_id: doc_id.to_string(),
                    pairs: vec![pair],
                });
            }
        }
    }
    Ok(docs)
}

/// Writes line-aligned source and target files.
pub fn write_parallel<S: Write, T: Write>(
    pairs: &[DocPair],
    mut source: S,
    mut target: T,
) -> Result<()> {
    for p in pairs {
        writeln!(source, "{}", p.source_line)?;
        writeln!(target, "{}", p.target_sentence)?;
    }
    source.flush()?;
    target.flush()?;
    Ok(())
}
