use super::{tokens_in_span, EmbeddingError, EmbeddingSource, Matrix, TokenAlignment};
use crate::pdtb::{DiscourseInstance, RelationType};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// The four ways an instance is turned into one vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureVariant {
    /// Row of the classifier token.
    #[serde(rename = "WHOLE_CLS")]
    WholeCls,
    /// Mean over all content tokens.
    #[serde(rename = "WHOLE_MEAN")]
    WholeMean,
    /// Mean over the connective tokens of an explicit relation.
    #[serde(rename = "CON")]
    Con,
    /// Mean over both arguments, connective tokens removed.
    #[serde(rename = "ARG")]
    Arg,
}

impl FeatureVariant {
    pub const ALL: [FeatureVariant; 4] = [
        FeatureVariant::WholeCls,
        FeatureVariant::WholeMean,
        FeatureVariant::Con,
        FeatureVariant::Arg,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureVariant::WholeCls => "WHOLE_CLS",
            FeatureVariant::WholeMean => "WHOLE_MEAN",
            FeatureVariant::Con => "CON",
            FeatureVariant::Arg => "ARG",
        }
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureVariant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown feature variant `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolingOptions {
    /// Average special tokens into `WHOLE_MEAN` as well.
    #[serde(default)]
    pub include_special_in_mean: bool,
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("variant {variant} does not apply to instance `{instance}`: {reason}")]
    NotApplicable {
        variant: FeatureVariant,
        instance: String,
        reason: String,
    },
    #[error("variant {variant} selects no tokens of instance `{instance}`")]
    EmptyTokenSet {
        variant: FeatureVariant,
        instance: String,
    },
    #[error("cannot pool over an empty index list")]
    EmptyPool,
    #[error("token row {row} out of range for {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("instance `{0}` has no alignment in the dump")]
    MissingAlignment(String),
    #[error(transparent)]
    Store(#[from] EmbeddingError),
}

/// Arithmetic mean of the selected rows, accumulated in f64.
pub fn pool_mean(matrix: &Matrix, rows: &[usize]) -> Result<Vec<f64>, FeatureError> {
    if rows.is_empty() {
        return Err(FeatureError::EmptyPool);
    }
    let mut acc = vec![0.0f64; matrix.cols()];
    for &r in rows {
        if r >= matrix.rows() {
            return Err(FeatureError::RowOutOfRange {
                row: r,
                rows: matrix.rows(),
            });
        }
        for (a, &v) in acc.iter_mut().zip(matrix.row(r)) {
            *a += f64::from(v);
        }
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Token rows a variant pools over for one instance.
pub fn feature_token_indices(
    instance: &DiscourseInstance,
    alignment: &TokenAlignment,
    cls_position: Option<usize>,
    variant: FeatureVariant,
    options: PoolingOptions,
) -> Result<Vec<usize>, FeatureError> {
    let not_applicable = |reason: &str| FeatureError::NotApplicable {
        variant,
        instance: instance.id.clone(),
        reason: reason.to_string(),
    };
    let rows = match variant {
        FeatureVariant::WholeCls => {
            vec![cls_position.ok_or_else(|| not_applicable("model has no classifier token"))?]
        }
        FeatureVariant::WholeMean if options.include_special_in_mean => {
            (0..alignment.len()).collect()
        }
        FeatureVariant::WholeMean => alignment.content_rows(),
        FeatureVariant::Con => {
            if instance.relation_type != RelationType::Explicit {
                return Err(not_applicable(&format!(
                    "{} relation has no connective",
                    instance.relation_type
                )));
            }
            let span = instance
                .connective_char_span
                .ok_or_else(|| not_applicable("explicit instance lacks a connective span"))?;
            tokens_in_span(alignment, span)
        }
        FeatureVariant::Arg => {
            let connective = instance
                .connective_char_span
                .map(|s| tokens_in_span(alignment, s))
                .unwrap_or_default();
            let mut rows = tokens_in_span(alignment, instance.arg1_char_span);
            rows.extend(tokens_in_span(alignment, instance.arg2_char_span));
            rows.sort_unstable();
            rows.dedup();
            rows.retain(|r| !connective.contains(r));
            rows
        }
    };
    if rows.is_empty() {
        return Err(FeatureError::EmptyTokenSet {
            variant,
            instance: instance.id.clone(),
        });
    }
    Ok(rows)
}

/// Pooled vector of one instance at one layer.
pub fn feature_vector(
    instance: &DiscourseInstance,
    source: &dyn EmbeddingSource,
    layer: usize,
    variant: FeatureVariant,
    options: PoolingOptions,
) -> Result<Vec<f64>, FeatureError> {
    let alignment = source
        .alignment(&instance.id)
        .ok_or_else(|| FeatureError::MissingAlignment(instance.id.clone()))?;
    let rows = feature_token_indices(
        instance,
        alignment,
        source.header().cls_position,
        variant,
        options,
    )?;
    let matrix = source.matrix(&instance.id, layer)?;
    pool_mean(&matrix, &rows)
}
