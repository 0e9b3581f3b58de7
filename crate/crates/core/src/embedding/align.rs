use crate::span::CharSpan;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Character interval of every token row; `None` marks special tokens, which
/// are stored on disk as the sentinel `[-1, -1]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenAlignment {
    offsets: Vec<Option<CharSpan>>,
}

impl TokenAlignment {
    pub fn new(offsets: Vec<Option<CharSpan>>) -> Self {
        TokenAlignment { offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[Option<CharSpan>] {
        &self.offsets
    }

    pub fn is_special(&self, row: usize) -> bool {
        matches!(self.offsets.get(row), Some(None))
    }

    /// Rows of all non-special tokens.
    pub fn content_rows(&self) -> Vec<usize> {
        self.offsets
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.map(|_| i))
            .collect()
    }

    /// Non-special intervals must be non-empty and non-decreasing in start.
    pub fn validate(&self) -> Result<(), String> {
        let mut last_start = 0;
        for (row, span) in self.offsets.iter().enumerate() {
            if let Some(s) = span {
                if s.start >= s.end {
                    return Err(format!("token {row} has empty interval {s}"));
                }
                if s.start < last_start {
                    return Err(format!(
                        "token {row} starts at {} before {last_start}",
                        s.start
                    ));
                }
                last_start = s.start;
            }
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate), and additionally every interval must
    /// end within a text of `text_len` characters.
    pub fn validate_against(&self, text_len: usize) -> Result<(), String> {
        self.validate()?;
        if let Some((row, s)) = self
            .offsets
            .iter()
            .enumerate()
            .find_map(|(i, o)| o.filter(|s| s.end > text_len).map(|s| (i, s)))
        {
            return Err(format!(
                "token {row} interval {s} exceeds text length {text_len}"
            ));
        }
        Ok(())
    }
}

impl Serialize for TokenAlignment {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[i64; 2]> = self
            .offsets
            .iter()
            .map(|o| match o {
                Some(s) => [s.start as i64, s.end as i64],
                None => [-1, -1],
            })
            .collect();
        pairs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TokenAlignment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let pairs = Vec::<[i64; 2]>::deserialize(deserializer)?;
        let offsets = pairs
            .into_iter()
            .map(|[a, b]| match (a, b) {
                (-1, -1) => Ok(None),
                (a, b) if a >= 0 && b >= 0 => Ok(Some(CharSpan::new(a as usize, b as usize))),
                _ => Err(serde::de::Error::custom(format!(
                    "invalid token interval [{a}, {b}]"
                ))),
            })
            .collect::<Result<_, _>>()?;
        Ok(TokenAlignment { offsets })
    }
}

/// Rows of the non-special tokens whose interval intersects `span`, ascending.
pub fn tokens_in_span(alignment: &TokenAlignment, span: CharSpan) -> Vec<usize> {
    alignment
        .offsets
        .iter()
        .enumerate()
        .filter_map(|(i, o)| o.filter(|t| t.intersects(&span)).map(|_| i))
        .collect()
}
