//! Sense simplification table.

use super::{PdtbError, RelationType, Result};
use std::collections::BTreeMap;

const DEFAULT_TABLE: &str = include_str!("../../data/sense_map.tsv");

/// Number of labels a sense map must define.
pub const LABEL_COUNT: usize = 21;

const ENTREL: &str = "EntRel";
const NOREL: &str = "NoRel";

/// Every sense path of the PDTB 2.0 hierarchy (class, class.type and
/// class.type.subtype).
pub const PDTB2_SENSE_PATHS: &[&str] = &[
    "Temporal",
    "Temporal.Asynchronous",
    "Temporal.Asynchronous.Precedence",
    "Temporal.Asynchronous.Succession",
    "Temporal.Synchrony",
    "Contingency",
    "Contingency.Cause",
    "Contingency.Cause.Reason",
    "Contingency.Cause.Result",
    "Contingency.Pragmatic cause",
    "Contingency.Pragmatic cause.Justification",
    "Contingency.Condition",
    "Contingency.Condition.Hypothetical",
    "Contingency.Condition.General",
    "Contingency.Condition.Unreal present",
    "Contingency.Condition.Unreal past",
    "Contingency.Condition.Factual present",
    "Contingency.Condition.Factual past",
    "Contingency.Pragmatic condition",
    "Contingency.Pragmatic condition.Relevance",
    "Contingency.Pragmatic condition.Implicit assertion",
    "Comparison",
    "Comparison.Contrast",
    "Comparison.Contrast.Juxtaposition",
    "Comparison.Contrast.Opposition",
    "Comparison.Pragmatic contrast",
    "Comparison.Concession",
    "Comparison.Concession.Expectation",
    "Comparison.Concession.Contra-expectation",
    "Comparison.Pragmatic concession",
    "Expansion",
    "Expansion.Conjunction",
    "Expansion.Instantiation",
    "Expansion.Restatement",
    "Expansion.Restatement.Specification",
    "Expansion.Restatement.Equivalence",
    "Expansion.Restatement.Generalization",
    "Expansion.Alternative",
    "Expansion.Alternative.Conjunctive",
    "Expansion.Alternative.Disjunctive",
    "Expansion.Alternative.Chosen alternative",
    "Expansion.Exception",
    "Expansion.List",
];

/// Mapping from raw sense paths to an ordered label inventory.
///
/// The inventory order defines class indices. `EntRel` and `NoRel` are part of
/// the inventory but never targets of the table: those relations carry no
/// sense and map to their own labels directly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenseMap {
    entries: BTreeMap<String, usize>,
    labels: Vec<String>,
}

impl Default for SenseMap {
    fn default() -> Self {
        SenseMap::parse(DEFAULT_TABLE).expect("bundled sense map is valid")
    }
}

impl SenseMap {
    /// Parses the tab-separated table format: `@label<TAB>name` lines give the
    /// inventory in order, `raw<TAB>label` lines the mapping, `#` starts a
    /// comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| PdtbError::SenseMap { line, message };
        let mut labels: Vec<String> = Vec::new();
        let mut raw_entries: Vec<(usize, String, String)> = Vec::new();

        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('\t')
                .ok_or_else(|| err(lineno, "expected two tab-separated fields".into()))?;
            let value = value.trim();
            if key == "@label" {
                if labels.iter().any(|l| l == value) {
                    return Err(err(lineno, format!("duplicate label `{value}`")));
                }
                labels.push(value.to_string());
            } else {
                raw_entries.push((lineno, key.trim().to_string(), value.to_string()));
            }
        }

        if labels.len() != LABEL_COUNT {
            return Err(err(
                0,
                format!(
                    "label inventory has {} labels, expected {LABEL_COUNT}",
                    labels.len()
                ),
            ));
        }
        for reserved in [ENTREL, NOREL] {
            if !labels.iter().any(|l| l == reserved) {
                return Err(err(0, format!("label inventory lacks `{reserved}`")));
            }
        }

        let mut entries = BTreeMap::new();
        for (lineno, raw, target) in raw_entries {
            if target == ENTREL || target == NOREL {
                return Err(err(lineno, format!("`{target}` cannot be a sense target")));
            }
            let index = labels
                .iter()
                .position(|l| *l == target)
                .ok_or_else(|| err(lineno, format!("target `{target}` is not in the inventory")))?;
            if entries.insert(raw.clone(), index).is_some() {
                return Err(err(lineno, format!("sense path `{raw}` mapped twice")));
            }
        }
        Ok(SenseMap { entries, labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label_name(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    /// Index of the simplified label for one raw sense path.
    pub fn lookup(&self, path: &str) -> Option<usize> {
        self.entries.get(path).copied()
    }

    /// Raw paths known to the table, in sorted order.
    pub fn raw_paths(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Label index of a relation. Sense-bearing relations use their first
    /// sense path; EntRel and NoRel map to their reserved labels.
    pub fn simplify(
        &self,
        relation_type: RelationType,
        sense_paths: &[String],
        relation: &str,
    ) -> Result<usize> {
        match relation_type {
            RelationType::EntRel => Ok(self.label_index(ENTREL).expect("checked at parse")),
            RelationType::NoRel => Ok(self.label_index(NOREL).expect("checked at parse")),
            _ => {
                let first = sense_paths
                    .first()
                    .ok_or_else(|| PdtbError::MissingSense(relation.to_string()))?;
                self.simplify_path(first, relation)
            }
        }
    }

    pub fn simplify_path(&self, path: &str, relation: &str) -> Result<usize> {
        self.lookup(path).ok_or_else(|| PdtbError::UnmappedSense {
            relation: relation.to_string(),
            path: path.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn default_map_is_total_over_pdtb2() {
        let map = SenseMap::default();
        for path in PDTB2_SENSE_PATHS {
            let idx = map.simplify_path(path, "t").unwrap();
            assert!(idx < LABEL_COUNT);
        }
        let raw: BTreeSet<&str> = map.raw_paths().collect();
        let inventory: BTreeSet<&str> = PDTB2_SENSE_PATHS.iter().copied().collect();
        assert_eq!(raw, inventory);
    }

    #[test]
    fn default_inventory_has_nineteen_senses_plus_two() {
        let map = SenseMap::default();
        assert_eq!(map.label_count(), 21);
        let targets: BTreeSet<usize> = PDTB2_SENSE_PATHS
            .iter()
            .map(|p| map.lookup(p).unwrap())
            .collect();
        assert_eq!(targets.len(), 19);
        assert_eq!(map.label_index("EntRel"), Some(19));
        assert_eq!(map.label_index("NoRel"), Some(20));
    }

    #[test]
    fn contingency_cause_reason_keeps_its_label() {
        let map = SenseMap::default();
        let idx = map
            .simplify(
                RelationType::Implicit,
                &["Contingency.Cause.Reason".into()],
                "t",
            )
            .unwrap();
        assert_eq!(map.label_name(idx), Some("Contingency.Cause.Reason"));
    }

    #[test]
    fn first_sense_wins() {
        let map = SenseMap::default();
        let senses = vec![
            "Temporal.Synchrony".to_string(),
            "Expansion.List".to_string(),
        ];
        let idx = map.simplify(RelationType::Explicit, &senses, "t").unwrap();
        assert_eq!(map.label_name(idx), Some("Temporal.Synchrony"));
    }

    #[test]
    fn norel_and_entrel_bypass_table() {
        let map = SenseMap::default();
        assert_eq!(map.simplify(RelationType::NoRel, &[], "t").unwrap(), 20);
        assert_eq!(map.simplify(RelationType::EntRel, &[], "t").unwrap(), 19);
    }

    #[test]
    fn identity_entry() {
        let mut table = String::new();
        for i in 0..19 {
            table.push_str(&format!("@label\tL{i}\n"));
        }
        table.push_str("@label\tEntRel\n@label\tNoRel\nL7\tL7\n");
        let map = SenseMap::parse(&table).unwrap();
        assert_eq!(
            map.simplify(RelationType::AltLex, &["L7".into()], "t")
                .unwrap(),
            7
        );
    }

    #[test]
    fn unmapped_path_is_named() {
        let map = SenseMap::default();
        match map.simplify(
            RelationType::Explicit,
            &["Temporal.Bogus".into()],
            "wsj_0001:3",
        ) {
            Err(PdtbError::UnmappedSense { path, relation }) => {
                assert_eq!(path, "Temporal.Bogus");
                assert_eq!(relation, "wsj_0001:3");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            map.simplify(RelationType::Explicit, &[], "x"),
            Err(PdtbError::MissingSense(_))
        ));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(SenseMap::parse("@label\tA\n").is_err());
        let mut table = String::new();
        for i in 0..19 {
            table.push_str(&format!("@label\tL{i}\n"));
        }
        table.push_str("@label\tEntRel\n@label\tNoRel\n");
        assert!(SenseMap::parse(&format!("{table}X\tMissing\n")).is_err());
        assert!(SenseMap::parse(&format!("{table}X\tEntRel\n")).is_err());
        assert!(SenseMap::parse(&format!("{table}X\tL1\nX\tL2\n")).is_err());
        assert!(SenseMap::parse(&format!("{table}no tab here\n")).is_err());
    }
}
