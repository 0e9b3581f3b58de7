use super::{PdtbError, RawRelation, RelationType, Result, SenseMap, Split};
use crate::span::{char_len, CharSpan};
use serde::{Deserialize, Serialize};

/// A relation serialized into the text a pretrained model is fed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscourseInstance {
    pub id: String,
    pub doc_id: String,
    pub serialized_text: String,
    pub arg1_char_span: CharSpan,
    pub arg2_char_span: CharSpan,
    /// Present exactly for explicit relations.
    pub connective_char_span: Option<CharSpan>,
    /// Position of the AltLex expression inside Arg2, when it can be found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub altlex_char_span: Option<CharSpan>,
    pub relation_type: RelationType,
    pub label_index: usize,
    #[serde(default)]
    pub split: Option<Split>,
}

/// How relations annotated with more than one sense become instances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiSensePolicy {
    /// Keep only the first listed sense.
    #[default]
    FirstSense,
    /// One instance per listed sense; ids get a `#k` suffix for k > 0.
    DuplicatePerSense,
}

impl DiscourseInstance {
    /// Checks the structural invariants of an instance.
    pub fn validate(&self, label_count: usize) -> std::result::Result<(), String> {
        let len = char_len(&self.serialized_text);
        let mut spans = vec![("arg1", self.arg1_char_span), ("arg2", self.arg2_char_span)];
        if let Some(c) = self.connective_char_span {
            spans.push(("connective", c));
        }
        for (name, s) in &spans {
            if s.is_empty() || s.end > len {
                return Err(format!("{name} span {s} outside text of length {len}"));
            }
        }
        for (i, (a, sa)) in spans.iter().enumerate() {
            for (b, sb) in &spans[i + 1..] {
                if sa.intersects(sb) {
                    return Err(format!("{a} span {sa} overlaps {b} span {sb}"));
                }
            }
        }
        match (self.relation_type, self.connective_char_span) {
            (RelationType::Explicit, None) => {
                return Err("explicit instance without connective span".into())
            }
            (RelationType::Explicit, Some(_)) => {}
            (t, Some(_)) => return Err(format!("{t} instance has a connective span")),
            (_, None) => {}
        }
        if self.label_index >= label_count {
            return Err(format!("label index {} out of range", self.label_index));
        }
        Ok(())
    }

    pub fn text_at(&self, span: CharSpan) -> Option<&str> {
        span.slice(&self.serialized_text)
    }
}

/// Serializes one relation using its first sense.
pub fn build_instance(raw: &RawRelation, map: &SenseMap) -> Result<DiscourseInstance> {
    let label = map.simplify(raw.relation_type, &raw.sense_paths, &raw.id())?;
    serialize(raw, label, raw.id())
}

/// Serializes one relation under the given multi-sense policy.
pub fn build_instances(
    raw: &RawRelation,
    map: &SenseMap,
    policy: MultiSensePolicy,
) -> Result<Vec<DiscourseInstance>> {
    if policy == MultiSensePolicy::FirstSense
        || !raw.relation_type.has_sense()
        || raw.sense_paths.len() < 2
    {
        return Ok(vec![build_instance(raw, map)?]);
    }
    raw.sense_paths
        .iter()
        .enumerate()
        .map(|(k, path)| {
            let label = map.simplify_path(path, &raw.id())?;
            let id = if k == 0 {
                raw.id()
            } else {
                format!("{}#{k}", raw.id())
            };
            serialize(raw, label, id)
        })
        .collect()
}

fn serialize(raw: &RawRelation, label_index: usize, id: String) -> Result<DiscourseInstance> {
    for (which, text) in [("arg1", &raw.arg1_text), ("arg2", &raw.arg2_text)] {
        if text.trim().is_empty() {
            return Err(PdtbError::EmptyArgument {
                relation: raw.id(),
                which,
            });
        }
    }

    let mut text = String::new();
    let arg1 = append(&mut text, &raw.arg1_text);
    let connective = match raw.relation_type {
        RelationType::Explicit => {
            let conn = raw
                .connective_text
                .as_deref()
                .filter(|c| !c.trim().is_empty())
                .ok_or_else(|| PdtbError::EmptyArgument {
                    relation: raw.id(),
                    which: "connective",
                })?;
            text.push(' ');
            Some(append(&mut text, conn))
        }
        _ => None,
    };
    text.push(' ');
    let arg2 = append(&mut text, &raw.arg2_text);

    let altlex_char_span = match (raw.relation_type, raw.connective_text.as_deref()) {
        (RelationType::AltLex, Some(expr)) if !expr.is_empty() => {
            raw.arg2_text.find(expr).map(|byte| {
                let start = arg2.start + char_len(&raw.arg2_text[..byte]);
                CharSpan::new(start, start + char_len(expr))
            })
        }
        _ => None,
    };

    Ok(DiscourseInstance {
        id,
        doc_id: raw.doc_id.clone(),
        serialized_text: text,
        arg1_char_span: arg1,
        arg2_char_span: arg2,
        connective_char_span: connective,
        altlex_char_span,
        relation_type: raw.relation_type,
        label_index,
        split: None,
    })
}

fn append(buf: &mut String, piece: &str) -> CharSpan {
    let start = char_len(buf);
    buf.push_str(piece);
    CharSpan::new(start, start + char_len(piece))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(
        relation_type: RelationType,
        arg1: &str,
        conn: Option<&str>,
        arg2: &str,
        senses: &[&str],
    ) -> RawRelation {
        RawRelation {
            doc_id: "wsj_0201".into(),
            line: 4,
            relation_type,
            connective_text: conn.map(str::to_string),
            connective_char_span: (relation_type == RelationType::Explicit)
                .then(|| vec![CharSpan::new(2, 7)]),
            altlex_char_span: (relation_type == RelationType::AltLex)
                .then(|| vec![CharSpan::new(2, 7)]),
            sense_paths: senses.iter().map(|s| s.to_string()).collect(),
            arg1_text: arg1.into(),
            arg2_text: arg2.into(),
            arg1_spans: vec![CharSpan::new(0, 1)],
            arg2_spans: vec![CharSpan::new(8, 9)],
        }
    }

    #[test]
    fn explicit_connective_sits_between_arguments() {
        let map = SenseMap::default();
        let inst = build_instance(
            &raw(
                RelationType::Explicit,
                "A",
                Some("since"),
                "B",
                &["Contingency.Cause.Reason"],
            ),
            &map,
        )
        .unwrap();
        assert_eq!(inst.serialized_text, "A since B");
        assert_eq!(inst.connective_char_span, Some(CharSpan::new(2, 7)));
        assert_eq!(inst.arg1_char_span, CharSpan::new(0, 1));
        assert_eq!(inst.arg2_char_span, CharSpan::new(8, 9));
        assert_eq!(inst.id, "wsj_0201:4");
        inst.validate(21).unwrap();
    }

    #[test]
    fn implicit_connective_is_invisible() {
        let map = SenseMap::default();
        let inst = build_instance(
            &raw(
                RelationType::Implicit,
                "A",
                Some("BECAUSE"),
                "B",
                &["Contingency.Cause.Reason"],
            ),
            &map,
        )
        .unwrap();
        assert_eq!(inst.serialized_text, "A B");
        assert_eq!(inst.connective_char_span, None);
        assert!(!inst.serialized_text.contains("BECAUSE"));
    }

    #[test]
    fn lenders_example_serializes_with_connective() {
        let map = SenseMap::default();
        let arg1 = "It was a far safer deal for lenders";
        let arg2 = "NWA had a healthier cash flow and more collateral on hand.";
        let inst = build_instance(
            &raw(
                RelationType::Explicit,
                arg1,
                Some("since"),
                arg2,
                &["Contingency.Cause.Reason"],
            ),
            &map,
        )
        .unwrap();
        assert_eq!(inst.serialized_text, format!("{arg1} since {arg2}"));
        assert_eq!(
            inst.text_at(inst.connective_char_span.unwrap()),
            Some("since")
        );
        assert_eq!(inst.text_at(inst.arg1_char_span), Some(arg1));
        assert_eq!(inst.text_at(inst.arg2_char_span), Some(arg2));
    }

    #[test]
    fn altlex_span_is_found_inside_arg2() {
        let map = SenseMap::default();
        let arg2 = "Mayhap this metaphorical connection made the committee think so.";
        let inst = build_instance(
            &raw(
                RelationType::AltLex,
                "Her work took gardens as its subject.",
                Some("Mayhap this metaphorical connection made"),
                arg2,
                &["Contingency.Cause.Result"],
            ),
            &map,
        )
        .unwrap();
        assert_eq!(inst.connective_char_span, None);
        let span = inst.altlex_char_span.unwrap();
        assert_eq!(
            inst.text_at(span),
            Some("Mayhap this metaphorical connection made")
        );
        assert_eq!(span.start, inst.arg2_char_span.start);
    }

    #[test]
    fn norel_serializes_arguments_only() {
        let map = SenseMap::default();
        let inst = build_instance(
            &raw(
                RelationType::NoRel,
                "Zwölf Boxkämpfer",
                None,
                "jagen Viktor",
                &[],
            ),
            &map,
        )
        .unwrap();
        assert_eq!(inst.serialized_text, "Zwölf Boxkämpfer jagen Viktor");
        assert_eq!(inst.label_index, 20);
        assert_eq!(inst.arg2_char_span, CharSpan::new(17, 29));
    }

    #[test]
    fn empty_argument_is_rejected() {
        let map = SenseMap::default();
        let err =
            build_instance(&raw(RelationType::EntRel, " ", None, "B", &[]), &map).unwrap_err();
        assert!(matches!(
            err,
            PdtbError::EmptyArgument { which: "arg1", .. }
        ));
    }

    #[test]
    fn duplicate_policy_emits_one_instance_per_sense() {
        let map = SenseMap::default();
        let r = raw(
            RelationType::Explicit,
            "A",
            Some("and"),
            "B",
            &["Expansion.Conjunction", "Temporal.Synchrony"],
        );
        let first = build_instances(&r, &map, MultiSensePolicy::FirstSense).unwrap();
        assert_eq!(first.len(), 1);
        let dup = build_instances(&r, &map, MultiSensePolicy::DuplicatePerSense).unwrap();
        assert_eq!(dup.len(), 2);
        assert_eq!(dup[1].id, "wsj_0201:4#1");
        assert_eq!(
            map.label_name(dup[1].label_index),
            Some("Temporal.Synchrony")
        );
    }

    #[test]
    fn validate_catches_bad_spans() {
        let map = SenseMap::default();
        let mut inst = build_instance(
            &raw(
                RelationType::Explicit,
                "A",
                Some("since"),
                "B",
                &["Contingency.Cause.Reason"],
            ),
            &map,
        )
        .unwrap();
        inst.arg2_char_span = CharSpan::new(6, 9);
        assert!(inst.validate(21).is_err());
        inst.arg2_char_span = CharSpan::new(8, 10);
        assert!(inst.validate(21).is_err());
        inst.arg2_char_span = CharSpan::new(8, 9);
        inst.connective_char_span = None;
        assert!(inst.validate(21).is_err());
    }
}
