//! Split assignment and corpus statistics.

use super::{DiscourseInstance, PdtbError, RelationType, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

const DEFAULT_CONFIG: &str = include_str!("../../data/splits.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sections and explicit document ids routed to one split.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRule {
    #[serde(default)]
    pub sections: Vec<String>,
    #[serde(default)]
    pub docs: Vec<String>,
}

/// Document-to-split routing. Document ids take precedence over sections;
/// documents matched by `exclude` are dropped from the corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default)]
    pub train: SplitRule,
    #[serde(default)]
    pub valid: SplitRule,
    #[serde(default)]
    pub test: SplitRule,
    #[serde(default)]
    pub exclude: SplitRule,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig::from_toml_str(DEFAULT_CONFIG).expect("bundled split config is valid")
    }
}

impl SplitConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: SplitConfig =
            toml::from_str(text).map_err(|e| PdtbError::SplitConfig(e.to_string()))?;
        config.check_disjoint()?;
        Ok(config)
    }

    /// Routes every document to `train`.
    pub fn all_train(doc_ids: &[&str]) -> Self {
        SplitConfig {
            train: SplitRule {
                sections: Vec::new(),
                docs: doc_ids.iter().map(|d| d.to_string()).collect(),
            },
            valid: SplitRule::default(),
            test: SplitRule::default(),
            exclude: SplitRule::default(),
        }
    }

    fn rules(&self) -> [(Option<Split>, &SplitRule); 4] {
        [
            (Some(Split::Train), &self.train),
            (Some(Split::Valid), &self.valid),
            (Some(Split::Test), &self.test),
            (None, &self.exclude),
        ]
    }

    fn check_disjoint(&self) -> Result<()> {
        let mut seen_sections = HashMap::new();
        let mut seen_docs = HashMap::new();
        for (target, rule) in self.rules() {
            for s in &rule.sections {
                if let Some(prev) = seen_sections.insert(s.as_str(), target) {
                    return Err(PdtbError::SplitConfig(format!(
                        "section {s} assigned to both {} and {}",
                        label(prev),
                        label(target)
                    )));
                }
            }
            for d in &rule.docs {
                if let Some(prev) = seen_docs.insert(d.as_str(), target) {
                    return Err(PdtbError::SplitConfig(format!(
                        "document {d} assigned to both {} and {}",
                        label(prev),
                        label(target)
                    )));
                }
            }
        }
        Ok(())
    }

    /// Split for a document, `None` when it is excluded.
    pub fn resolve(&self, doc_id: &str) -> Result<Option<Split>> {
        for (target, rule) in self.rules() {
            if rule.docs.iter().any(|d| d == doc_id) {
                return Ok(target);
            }
        }
        if let Some(section) = section_of(doc_id) {
            for (target, rule) in self.rules() {
                if rule.sections.iter().any(|s| s == section) {
                    return Ok(target);
                }
            }
        }
        Err(PdtbError::UncoveredDocument(doc_id.to_string()))
    }
}

fn label(target: Option<Split>) -> &'static str {
    target.map_or("exclude", Split::as_str)
}

/// WSJ section of a `wsj_SSFF` document id.
fn section_of(doc_id: &str) -> Option<&str> {
    let digits = doc_id.strip_prefix("wsj_")?;
    let section = digits.get(..2)?;
    section
        .bytes()
        .all(|b| b.is_ascii_digit())
        .then_some(section)
}

/// Sets the split of every instance; instances of excluded documents are
/// removed.
pub fn assign_splits(
    instances: Vec<DiscourseInstance>,
    config: &SplitConfig,
) -> Result<Vec<DiscourseInstance>> {
    let mut cache: HashMap<String, Option<Split>> = HashMap::new();
    let mut out = Vec::with_capacity(instances.len());
    for mut inst in instances {
        let split = match cache.get(&inst.doc_id) {
            Some(s) => *s,
            None => {
                let s = config.resolve(&inst.doc_id)?;
                cache.insert(inst.doc_id.clone(), s);
                s
            }
        };
        if let Some(split) = split {
            inst.split = Some(split);
            out.push(inst);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub total: usize,
    pub explicit: usize,
    pub by_type: BTreeMap<RelationType, usize>,
}

impl SplitStats {
    fn add(&mut self, t: RelationType) {
        self.total += 1;
        if t == RelationType::Explicit {
            self.explicit += 1;
        }
        *self.by_type.entry(t).or_default() += 1;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub train: SplitStats,
    pub valid: SplitStats,
    pub test: SplitStats,
    /// Instances without a split.
    pub unassigned: usize,
}

impl CorpusStats {
    /// Counts from the published PDTB 2.0 probing setup:
    /// (total, explicit) for train, valid and test.
    pub const TABLE2: [(Split, usize, usize); 3] = [
        (Split::Train, 32_535, 18_459),
        (Split::Valid, 1_436, 812),
        (Split::Test, 1_928, 1_090),
    ];

    pub fn split(&self, split: Split) -> &SplitStats {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, split: Split) -> &mut SplitStats {
        match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }

    /// Human-readable differences from [`CorpusStats::TABLE2`]; empty when
    /// the counts match exactly.
    pub fn table2_mismatches(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (split, total, explicit) in Self::TABLE2 {
            let s = self.split(split);
            if s.total != total {
                out.push(format!("{split}: total {} != expected {total}", s.total));
            }
            if s.explicit != explicit {
                out.push(format!(
                    "{split}: explicit {} != expected {explicit}",
                    s.explicit
                ));
            }
        }
        out
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "split   total  explicit")?;
        for split in Split::ALL {
            let s = self.split(split);
            writeln!(f, "{:<6} {:>6} {:>9}", split.as_str(), s.total, s.explicit)?;
        }
        if self.unassigned > 0 {
            writeln!(f, "unassigned {}", self.unassigned)?;
        }
        Ok(())
    }
}

pub fn corpus_stats(instances: &[DiscourseInstance]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for inst in instances {
        match inst.split {
            Some(split) => stats.split_mut(split).add(inst.relation_type),
            None => stats.unassigned += 1,
        }
    }
    stats
}
