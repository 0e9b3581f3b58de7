//! PDTB 2.0 pipe-delimited annotation files.
//!
//! Each non-blank line holds one relation in 48 `|`-separated columns. Only
//! the columns below are interpreted (0-based); the rest are carried by the
//! format but ignored here:
//!
//! | col | content                                                  |
//! |-----|----------------------------------------------------------|
//! | 0   | relation type (`Explicit`, `Implicit`, `AltLex`, `EntRel`, `NoRel`) |
//! | 1   | section number                                           |
//! | 2   | file number                                              |
//! | 3   | connective / AltLex span list                            |
//! | 5   | connective / AltLex raw text                             |
//! | 9   | first implicit connective                                |
//! | 11  | first sense of connective 1                              |
//! | 12  | second sense of connective 1                             |
//! | 13  | first sense of connective 2                              |
//! | 14  | second sense of connective 2                             |
//! | 22  | Arg1 span list                                           |
//! | 24  | Arg1 raw text                                            |
//! | 32  | Arg2 span list                                           |
//! | 34  | Arg2 raw text                                            |
//!
//! Span lists are `start..end` intervals joined by `;`, in characters of the
//! source document.

use super::{PdtbError, RelationType, Result};
use crate::span::CharSpan;
use serde::{Deserialize, Serialize};
use std::io::BufRead;

pub const PIPE_COLUMNS: usize = 48;

const COL_TYPE: usize = 0;
const COL_SECTION: usize = 1;
const COL_FILE: usize = 2;
const COL_CONN_SPANS: usize = 3;
const COL_CONN_TEXT: usize = 5;
const COL_IMPLICIT_CONN: usize = 9;
const COL_SENSES: [usize; 4] = [11, 12, 13, 14];
const COL_ARG1_SPANS: usize = 22;
const COL_ARG1_TEXT: usize = 24;
const COL_ARG2_SPANS: usize = 32;
const COL_ARG2_TEXT: usize = 34;

/// One annotated relation as it appears in a pipe file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRelation {
    pub doc_id: String,
    /// 1-based line number in the source file.
    pub line: usize,
    pub relation_type: RelationType,
    /// Explicit connective, AltLex expression, or the annotated implicit
    /// connective, depending on `relation_type`.
    pub connective_text: Option<String>,
    pub connective_char_span: Option<Vec<CharSpan>>,
    pub altlex_char_span: Option<Vec<CharSpan>>,
    pub sense_paths: Vec<String>,
    pub arg1_text: String,
    pub arg2_text: String,
    pub arg1_spans: Vec<CharSpan>,
    pub arg2_spans: Vec<CharSpan>,
}

impl RawRelation {
    /// Stable identifier, `doc_id:line`.
    pub fn id(&self) -> String {
        format!("{}:{}", self.doc_id, self.line)
    }

    /// Re-derives both argument texts from the source document, joining
    /// discontiguous pieces in document order with single spaces.
    pub fn resolve_arguments(&mut self, document: &str) -> Result<()> {
        self.arg1_text = join_pieces(document, &self.arg1_spans).ok_or_else(|| {
            self.malformed(COL_ARG1_SPANS, "Arg1 span list runs past the document end")
        })?;
        self.arg2_text = join_pieces(document, &self.arg2_spans).ok_or_else(|| {
            self.malformed(COL_ARG2_SPANS, "Arg2 span list runs past the document end")
        })?;
        Ok(())
    }

    fn malformed(&self, column: usize, message: &str) -> PdtbError {
        PdtbError::Malformed {
            doc_id: self.doc_id.clone(),
            line: self.line,
            column: column + 1,
            message: message.to_string(),
        }
    }
}

fn join_pieces(document: &str, spans: &[CharSpan]) -> Option<String> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    let pieces = sorted
        .iter()
        .map(|s| s.slice(document))
        .collect::<Option<Vec<_>>>()?;
    Some(pieces.join(" "))
}

/// Parses a whole pipe file. Blank lines are skipped.
pub fn parse_pdtb<R: BufRead>(reader: R, doc_id: &str) -> Result<Vec<RawRelation>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(line, doc_id, idx + 1)?);
    }
    Ok(out)
}

fn parse_line(text: &str, doc_id: &str, line: usize) -> Result<RawRelation> {
    let malformed = |column: usize, message: String| PdtbError::Malformed {
        doc_id: doc_id.to_string(),
        line,
        column: column + 1,
        message,
    };

    let cols: Vec<&str> = text.split('|').collect();
    if cols.len() != PIPE_COLUMNS {
        return Err(malformed(
            cols.len().min(PIPE_COLUMNS),
            format!("expected {PIPE_COLUMNS} columns, found {}", cols.len()),
        ));
    }

    let relation_type: RelationType =
        cols[COL_TYPE]
            .trim()
            .parse()
            .map_err(|token| PdtbError::UnknownRelationType {
                doc_id: doc_id.to_string(),
                line,
                token,
            })?;

    let spans = |col: usize| -> Result<Vec<CharSpan>> {
        parse_span_list(cols[col]).map_err(|m| malformed(col, m))
    };
    let optional = |col: usize| -> Option<String> {
        let v = cols[col].trim();
        (!v.is_empty()).then(|| v.to_string())
    };

    let mut sense_paths: Vec<String> = COL_SENSES.iter().filter_map(|&c| optional(c)).collect();
    // Some releases repeat the relation type in the sense column.
    if !relation_type.has_sense() {
        sense_paths.retain(|s| s != relation_type.as_str());
        if !sense_paths.is_empty() {
            return Err(malformed(
                COL_SENSES[0],
                format!("{relation_type} relation carries a sense annotation"),
            ));
        }
    }

    let conn_spans = spans(COL_CONN_SPANS)?;
    let (connective_text, connective_char_span, altlex_char_span) = match relation_type {
        RelationType::Explicit => {
            let text = optional(COL_CONN_TEXT).ok_or_else(|| {
                malformed(COL_CONN_TEXT, "explicit relation without connective".into())
            })?;
            if conn_spans.is_empty() {
                return Err(malformed(
                    COL_CONN_SPANS,
                    "explicit relation without connective span".into(),
                ));
            }
            (Some(text), Some(conn_spans), None)
        }
        RelationType::AltLex => {
            if conn_spans.is_empty() {
                return Err(malformed(
                    COL_CONN_SPANS,
                    "AltLex relation without span".into(),
                ));
            }
            (optional(COL_CONN_TEXT), None, Some(conn_spans))
        }
        RelationType::Implicit => (optional(COL_IMPLICIT_CONN), None, None),
        RelationType::EntRel | RelationType::NoRel => (None, None, None),
    };

    Ok(RawRelation {
        doc_id: doc_id.to_string(),
        line,
        relation_type,
        connective_text,
        connective_char_span,
        altlex_char_span,
        sense_paths,
        arg1_text: cols[COL_ARG1_TEXT].to_string(),
        arg2_text: cols[COL_ARG2_TEXT].to_string(),
        arg1_spans: spans(COL_ARG1_SPANS)?,
        arg2_spans: spans(COL_ARG2_SPANS)?,
    })
}

fn parse_span_list(field: &str) -> std::result::Result<Vec<CharSpan>, String> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field
        .split(';')
        .map(|piece| {
            let (a, b) = piece
                .split_once("..")
                .ok_or_else(|| format!("span `{piece}` is not of the form start..end"))?;
            let start: usize = a
                .trim()
                .parse()
                .map_err(|_| format!("bad span start `{a}`"))?;
            let end: usize = b
                .trim()
                .parse()
                .map_err(|_| format!("bad span end `{b}`"))?;
            if start >= end {
                return Err(format!("span `{piece}` is empty or reversed"));
            }
            Ok(CharSpan::new(start, end))
        })
        .collect()
}

fn format_span_list(spans: &[CharSpan]) -> String {
    spans
        .iter()
        .map(|s| format!("{}..{}", s.start, s.end))
        .collect::<Vec<_>>()
        .join(";")
}

/// Section and file number columns for `wsj_SSFF` style ids.
fn section_and_file(doc_id: &str) -> (String, String) {
    match doc_id.strip_prefix("wsj_") {
        Some(num) if num.len() == 4 && num.bytes().all(|b| b.is_ascii_digit()) => {
            (num[..2].to_string(), num[2..].to_string())
        }
        _ => (String::new(), String::new()),
    }
}

/// Renders a relation back into a 48-column pipe line.
pub fn to_pipe_line(rel: &RawRelation) -> Result<String> {
    let mut cols = vec![String::new(); PIPE_COLUMNS];
    let (section, file) = section_and_file(&rel.doc_id);
    cols[COL_TYPE] = rel.relation_type.as_str().to_string();
    cols[COL_SECTION] = section;
    cols[COL_FILE] = file;

    let conn_spans = rel
        .connective_char_span
        .as_ref()
        .or(rel.altlex_char_span.as_ref());
    if let Some(spans) = conn_spans {
        cols[COL_CONN_SPANS] = format_span_list(spans);
    }
    if let Some(text) = &rel.connective_text {
        let col = if rel.relation_type == RelationType::Implicit {
            COL_IMPLICIT_CONN
        } else {
            COL_CONN_TEXT
        };
        cols[col] = text.clone();
    }
    if rel.sense_paths.len() > COL_SENSES.len() {
        return Err(PdtbError::Unrepresentable {
            relation: rel.id(),
            field: "sense_paths",
        });
    }
    for (col, sense) in COL_SENSES.iter().zip(&rel.sense_paths) {
        cols[*col] = sense.clone();
    }
    if !rel.relation_type.has_sense() {
        // The corpus repeats the type name in the sense column.
        cols[COL_SENSES[0]] = rel.relation_type.as_str().to_string();
    }
    cols[COL_ARG1_SPANS] = format_span_list(&rel.arg1_spans);
    cols[COL_ARG1_TEXT] = rel.arg1_text.clone();
    cols[COL_ARG2_SPANS] = format_span_list(&rel.arg2_spans);
    cols[COL_ARG2_TEXT] = rel.arg2_text.clone();

    if let Some(bad) = cols.iter().position(|c| c.contains(['|', '\n', '\r'])) {
        let field = match bad {
            COL_ARG1_TEXT => "arg1_text",
            COL_ARG2_TEXT => "arg2_text",
            _ if COL_SENSES.contains(&bad) => "sense_paths",
            _ => "connective_text",
        };
        return Err(PdtbError::Unrepresentable {
            relation: rel.id(),
            field,
        });
    }
    Ok(cols.join("|"))
}

/// Writes relations as a pipe file, one line each, in the given order.
pub fn write_pdtb<W: std::io::Write>(mut out: W, relations: &[RawRelation]) -> Result<()> {
    for rel in relations {
        writeln!(out, "{}", to_pipe_line(rel)?)?;
    }
    Ok(())
}
