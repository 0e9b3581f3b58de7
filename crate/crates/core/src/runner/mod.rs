//! Experiment matrix: planning, execution and reporting.
//!
//! A cell probes one layer of one model with one feature variant on one
//! relation subset. Each cell trains its own probe with a seed derived from
//! the master seed and the cell identity, so cells can run in any order or in
//! parallel and still produce identical rows.

mod report;

pub use report::{emit_report, layer_curves, CurveKey, LayerPoint, ReportFiles};

use crate::embedding::{feature_vector, EmbeddingSource, FeatureVariant, PoolingOptions};
use crate::pdtb::{DiscourseInstance, RelationType, Split};
use crate::probe::{train, Dataset, OptimizerKind, ProbeConfig, ProbeError, SplitData};
use crate::seed::{derive_seed, fnv1a};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("subset {subset} has no {split} instances")]
    EmptySubset { subset: Subset, split: Split },
    #[error("{} instance(s) failed feature extraction: {}", failures.len(), summarize(failures))]
    Features { failures: Vec<(String, String)> },
    #[error("no embedding source for model `{0}`")]
    UnknownModel(String),
    #[error("layer {layer} outside 1..={layer_count} of model `{model_id}`")]
    MissingLayer {
        model_id: String,
        layer: usize,
        layer_count: usize,
    },
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error("layer coverage: {0}")]
    Coverage(String),
    #[error("invalid runner settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn summarize(failures: &[(String, String)]) -> String {
    const SHOWN: usize = 10;
    let mut s: Vec<String> = failures
        .iter()
        .take(SHOWN)
        .map(|(id, e)| format!("{id} ({e})"))
        .collect();
    if failures.len() > SHOWN {
        s.push(format!("and {} more", failures.len() - SHOWN));
    }
    s.join("; ")
}

pub type Result<T> = std::result::Result<T, RunnerError>;

/// Relation subset a cell is trained and evaluated on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subset {
    #[serde(rename = "ALL")]
    All,
    #[serde(rename = "EXP")]
    Exp,
    #[serde(rename = "IMP")]
    Imp,
    #[serde(rename = "ALT")]
    Alt,
}

impl Subset {
    pub const ALL: [Subset; 4] = [Subset::All, Subset::Exp, Subset::Imp, Subset::Alt];

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::All => "ALL",
            Subset::Exp => "EXP",
            Subset::Imp => "IMP",
            Subset::Alt => "ALT",
        }
    }

    /// `ALL` keeps every relation type, EntRel and NoRel included.
    pub fn contains(self, relation_type: RelationType) -> bool {
        match self {
            Subset::All => true,
            Subset::Exp => relation_type == RelationType::Explicit,
            Subset::Imp => relation_type == RelationType::Implicit,
            Subset::Alt => relation_type == RelationType::AltLex,
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Subset::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown subset `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_id: String,
    pub layer_count: usize,
    /// Whether the model has a classifier token, enabling `WHOLE_CLS` cells.
    pub has_cls: bool,
}

/// Which probing tasks to plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSelection {
    /// Whole-sentence features over all relations.
    pub whole_sentence: bool,
    /// Connective/argument features on explicit relations, plus the
    /// implicit and AltLex subsets.
    pub components: bool,
}

impl TaskSelection {
    pub const BOTH: TaskSelection = TaskSelection {
        whole_sentence: true,
        components: true,
    };

    /// Parses `1`, `2` or `all`.
    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(TaskSelection {
                whole_sentence: true,
                components: false,
            }),
            "2" => Ok(TaskSelection {
                whole_sentence: false,
                components: true,
            }),
            "all" | "1,2" | "both" => Ok(TaskSelection::BOTH),
            other => Err(format!(
                "unknown task selection `{other}` (expected 1, 2 or all)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub model_id: String,
    /// 1-based layer index.
    pub layer: usize,
    pub variant: FeatureVariant,
    pub subset: Subset,
    /// 0-based repeat index; repeats differ only in their seed.
    pub repeat: usize,
    pub seed: u64,
}

impl fmt::Display for ExperimentCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/L{}/{}/{}/r{}",
            self.model_id, self.layer, self.variant, self.subset, self.repeat
        )
    }
}

/// Seed of one cell: [`derive_seed`] over master seed, model id, layer,
/// variant, subset and repeat index, in that order.
pub fn cell_seed(
    master_seed: u64,
    model_id: &str,
    layer: usize,
    variant: FeatureVariant,
    subset: Subset,
    repeat: usize,
) -> u64 {
    derive_seed(&[
        &master_seed.to_string(),
        model_id,
        &layer.to_string(),
        variant.as_str(),
        subset.as_str(),
        &repeat.to_string(),
    ])
}

fn planned_pairs(model: &ModelSpec, tasks: TaskSelection) -> Vec<(Subset, FeatureVariant)> {
    let mut pairs = Vec::new();
    if tasks.whole_sentence {
        if model.has_cls {
            pairs.push((Subset::All, FeatureVariant::WholeCls));
        }
        pairs.push((Subset::All, FeatureVariant::WholeMean));
    }
    if tasks.components {
        pairs.extend([
            (Subset::Exp, FeatureVariant::WholeMean),
            (Subset::Exp, FeatureVariant::Con),
            (Subset::Exp, FeatureVariant::Arg),
            (Subset::Imp, FeatureVariant::WholeMean),
            (Subset::Alt, FeatureVariant::WholeMean),
        ]);
    }
    pairs
}

/// Enumerates cells ordered by model, subset and variant, then layer and
/// repeat.
pub fn plan_matrix(
    models: &[ModelSpec],
    tasks: TaskSelection,
    master_seed: u64,
    repeats: usize,
) -> Vec<ExperimentCell> {
    let mut cells = Vec::new();
    for model in models {
        for (subset, variant) in planned_pairs(model, tasks) {
            for layer in 1..=model.layer_count {
                for repeat in 0..repeats {
                    cells.push(ExperimentCell {
                        model_id: model.model_id.clone(),
                        layer,
                        variant,
                        subset,
                        repeat,
                        seed: cell_seed(
                            master_seed,
                            &model.model_id,
                            layer,
                            variant,
                            subset,
                            repeat,
                        ),
                    });
                }
            }
        }
    }
    cells
}

/// Probe settings shared by every cell; the cell supplies seed and input size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub optimizer: OptimizerKind,
    pub standardize: bool,
    pub class_count: usize,
    pub pooling: PoolingOptions,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        let base = ProbeConfig::new(1, crate::pdtb::LABEL_COUNT);
        ProbeSettings {
            hidden_dim: base.hidden_dim,
            learning_rate: base.learning_rate,
            batch_size: base.batch_size,
            max_epochs: base.max_epochs,
            patience: base.patience,
            optimizer: base.optimizer,
            standardize: base.standardize,
            class_count: base.class_count,
            pooling: PoolingOptions::default(),
        }
    }
}

impl ProbeSettings {
    pub fn probe_config(&self, input_dim: usize, seed: u64) -> ProbeConfig {
        ProbeConfig {
            input_dim,
            hidden_dim: self.hidden_dim,
            class_count: self.class_count,
            seed,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            optimizer: self.optimizer,
            standardize: self.standardize,
        }
    }

    /// FNV-1a over the JSON form of the settings, as 16 hex digits.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("settings serialize");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    /// Subset members skipped because the dump flags them truncated.
    pub truncated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub cell: ExperimentCell,
    pub dev_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub epochs_run: Option<usize>,
    pub best_epoch: Option<usize>,
    pub counts: InstanceCounts,
    pub config_digest: String,
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(cell: ExperimentCell, settings: &ProbeSettings, error: &RunnerError) -> Self {
        ResultRow {
            cell,
            dev_accuracy: None,
            test_accuracy: None,
            epochs_run: None,
            best_epoch: None,
            counts: InstanceCounts::default(),
            config_digest: settings.digest(),
            error: Some(error.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Trains and evaluates the probe of one cell.
///
/// Instances outside the cell's subset, without a split, or flagged truncated
/// by the source are skipped. Any feature failure aborts the cell and the
/// error lists the offending instance ids.
pub fn run_cell(
    cell: &ExperimentCell,
    instances: &[DiscourseInstance],
    source: &dyn EmbeddingSource,
    settings: &ProbeSettings,
) -> Result<ResultRow> {
    let header = source.header();
    if cell.layer == 0 || cell.layer > header.layer_count {
        return Err(RunnerError::MissingLayer {
            model_id: cell.model_id.clone(),
            layer: cell.layer,
            layer_count: header.layer_count,
        });
    }

    let mut counts = InstanceCounts::default();
    let mut members: [Vec<&DiscourseInstance>; 3] = Default::default();
    for inst in instances
        .iter()
        .filter(|i| cell.subset.contains(i.relation_type))
    {
        let Some(split) = inst.split else { continue };
        if source.is_truncated(&inst.id) {
            counts.truncated += 1;
            continue;
        }
        members[split_slot(split)].push(inst);
    }
    for split in Split::ALL {
        if members[split_slot(split)].is_empty() {
            return Err(RunnerError::EmptySubset {
                subset: cell.subset,
                split,
            });
        }
    }
    counts.train = members[0].len();
    counts.dev = members[1].len();
    counts.test = members[2].len();

    let mut failures = Vec::new();
    let mut sets = Vec::with_capacity(3);
    for group in &members {
        let mut rows = Vec::with_capacity(group.len());
        let mut labels = Vec::with_capacity(group.len());
        for inst in group {
            match feature_vector(inst, source, cell.layer, cell.variant, settings.pooling) {
                Ok(v) => {
                    rows.push(v);
                    labels.push(inst.label_index);
                }
                Err(e) => failures.push((inst.id.clone(), e.to_string())),
            }
        }
        sets.push((rows, labels));
    }
    if !failures.is_empty() {
        return Err(RunnerError::Features { failures });
    }

    let mut sets = sets
        .into_iter()
        .map(|(rows, labels)| Dataset::from_rows(&rows, labels));
    let data = SplitData {
        train: sets.next().expect("three splits")?,
        dev: sets.next().expect("three splits")?,
        test: sets.next().expect("three splits")?,
    };
    let config = settings.probe_config(data.train.dim(), cell.seed);
    let (_, report) = train(&data, &config)?;
    Ok(ResultRow {
        cell: cell.clone(),
        dev_accuracy: Some(report.best_dev_accuracy),
        test_accuracy: Some(report.test_accuracy),
        epochs_run: Some(report.epochs_run),
        best_epoch: Some(report.best_epoch),
        counts,
        config_digest: settings.digest(),
        error: None,
    })
}

fn split_slot(split: Split) -> usize {
    match split {
        Split::Train => 0,
        Split::Valid => 1,
        Split::Test => 2,
    }
}

/// Embedding sources keyed by model id.
pub type Sources<'a> = BTreeMap<String, &'a dyn EmbeddingSource>;

/// Runs every cell on a pool of `workers` threads and returns one row per
/// cell, in plan order. Failed cells yield rows carrying the error.
pub fn run_matrix(
    cells: &[ExperimentCell],
    instances: &[DiscourseInstance],
    sources: &Sources<'_>,
    settings: &ProbeSettings,
    workers: usize,
) -> Result<Vec<ResultRow>> {
    use rayon::prelude::*;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunnerError::Settings(e.to_string()))?;
    let run = |cell: &ExperimentCell| {
        let outcome = match sources.get(&cell.model_id) {
            Some(source) => run_cell(cell, instances, *source, settings),
            None => Err(RunnerError::UnknownModel(cell.model_id.clone())),
        };
        outcome.unwrap_or_else(|e| {
            log::warn!("cell {cell} failed: {e}");
            ResultRow::failed(cell.clone(), settings, &e)
        })
    };
    Ok(pool.install(|| cells.par_iter().map(run).collect()))
}

/// Layer with the highest test accuracy among `(layer, accuracy)` points,
/// which must cover layers `1..=n` exactly once. Ties go to the lowest layer.
pub fn best_layer(points: &[(usize, f64)]) -> Result<usize> {
    if points.is_empty() {
        return Err(RunnerError::Coverage("no layers".into()));
    }
    let mut seen = vec![false; points.len()];
    for &(layer, _) in points {
        if layer == 0 || layer > points.len() {
            return Err(RunnerError::Coverage(format!(
                "layer {layer} outside 1..={}",
                points.len()
            )));
        }
        if std::mem::replace(&mut seen[layer - 1], true) {
            return Err(RunnerError::Coverage(format!(
                "layer {layer} appears twice"
            )));
        }
    }
    let mut best = points[0];
    for &(layer, acc) in &points[1..] {
        if acc > best.1 || (acc == best.1 && layer < best.0) {
            best = (layer, acc);
        }
    }
    Ok(best.0)
}

/// Discourse-aware layer of rows sharing one model, variant and subset.
pub fn discourse_aware_layer(rows: &[ResultRow]) -> Result<usize> {
    let Some(first) = rows.first() else {
        return Err(RunnerError::Coverage("no rows".into()));
    };
    let mut points = Vec::with_capacity(rows.len());
    for row in rows {
        let c = &row.cell;
        if (c.model_id.as_str(), c.variant, c.subset)
            != (
                first.cell.model_id.as_str(),
                first.cell.variant,
                first.cell.subset,
            )
        {
            return Err(RunnerError::Coverage(format!(
                "rows mix cells {} and {}",
                first.cell, c
            )));
        }
        let acc = row
            .test_accuracy
            .ok_or_else(|| RunnerError::Coverage(format!("cell {c} has no result")))?;
        points.push((c.layer, acc));
    }
    best_layer(&points)
}
