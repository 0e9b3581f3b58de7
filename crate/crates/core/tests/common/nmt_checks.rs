//! Property checks for translation data preparation, shared by the
//! integration tests and the acceptance harness.

#![allow(dead_code)]

use discprobe::nmt::{
    build_doc_pairs, make_init_plan, single_layer_plan, Architecture, Document, InitSource,
    PlmKind, SentencePair, Stack, DEFAULT_SEPARATOR,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Documents of 1 to 30 sentences, `sentences` in total.
pub fn synthetic_documents(sentences: usize, seed: u64) -> Vec<Document> {
    const CHARS: &[char] = &[
        '我', '们', '今', '天', '去', '学', '校', '他', '很', '好', '。', 'a', 'b', ' ',
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut left = sentences;
    while left > 0 {
        let n = rng.random_range(1..=30).min(left);
        let pairs = (0..n)
            .map(|i| {
                let len = rng.random_range(1..15);
                let body: String = (0..len)
                    .map(|_| CHARS[rng.random_range(0..CHARS.len())])
                    .collect();
                SentencePair {
                    source: format!("{}{body}", docs.len()),
                    target: format!("doc {} sentence {i}", docs.len()),
                }
            })
            .collect();
        docs.push(Document {
            doc_id: format!("talk{:04}", docs.len()),
            pairs,
        });
        left -= n;
    }
    docs
}

/// Violated DocPair properties on a synthetic set of `sentences` sentences.
pub fn doc_pair_violations(sentences: usize, seed: u64) -> Vec<String> {
    let docs = synthetic_documents(sentences, seed);
    let pairs = build_doc_pairs(&docs, DEFAULT_SEPARATOR).unwrap();
    let mut bad = Vec::new();
    if pairs.len() != sentences {
        bad.push(format!("{} pairs for {sentences} sentences", pairs.len()));
    }
    let mut expected = docs
        .iter()
        .flat_map(|d| d.pairs.iter().enumerate().map(move |(i, p)| (d, i, p)));
    for pair in &pairs {
        let Some((doc, i, sentence)) = expected.next() else {
            bad.push("more pairs than sentences".into());
            break;
        };
        let seps = pair.source_line.matches(DEFAULT_SEPARATOR).count();
        let want_context = (i > 0).then(|| doc.pairs[i - 1].source.clone());
        if pair.doc_id != doc.doc_id || pair.index != i {
            bad.push(format!("pair {}:{} out of order", pair.doc_id, pair.index));
        }
        if pair.context_sentence != want_context {
            bad.push(format!(
                "{}:{} context does not come from the previous sentence",
                pair.doc_id, i
            ));
        }
        if seps != usize::from(i > 0) {
            bad.push(format!("{}:{} has {seps} separators", pair.doc_id, i));
        }
        let rebuilt = match &want_context {
            Some(c) => format!("{c}{DEFAULT_SEPARATOR}{}", sentence.source),
            None => sentence.source.clone(),
        };
        if pair.source_line != rebuilt || pair.target_sentence != sentence.target {
            bad.push(format!(
                "{}:{} source or target line differs",
                pair.doc_id, i
            ));
        }
    }
    bad
}

/// Violated initialization-plan properties for a 12 + 12 layer transformer.
pub fn init_plan_violations() -> Vec<String> {
    let arch = Architecture::transformer(12, 12);
    let mut bad = Vec::new();
    let enc = make_init_plan(&arch, PlmKind::EncoderOnly);
    let dec_from_plm = enc
        .groups
        .iter()
        .filter(|a| a.group.stack == Stack::Decoder && a.init == InitSource::FromPlm)
        .count();
    if dec_from_plm != 0 {
        bad.push(format!(
            "encoder init loads {dec_from_plm} decoder groups from the PLM"
        ));
    }
    let s2s = make_init_plan(&arch, PlmKind::EncoderDecoder);
    if s2s.count(InitSource::Random) != 0 {
        bad.push(format!(
            "seq2seq init leaves {} random groups",
            s2s.count(InitSource::Random)
        ));
    }
    for plan in [&enc, &s2s, &make_init_plan(&arch, PlmKind::DecoderOnly)] {
        for layer in [1, 6, 9, 12] {
            let single = match single_layer_plan(plan, layer) {
                Ok(p) => p,
                Err(e) => {
                    bad.push(format!("{} layer {layer}: {e}", plan.strategy));
                    continue;
                }
            };
            let trainable: Vec<_> = single.groups.iter().filter(|a| a.trainable).collect();
            if trainable.len() != 1
                || trainable[0].group.layer.is_none()
                || trainable[0].init != InitSource::FromPlm
            {
                bad.push(format!(
                    "{} layer {layer}: {} trainable groups",
                    plan.strategy,
                    trainable.len()
                ));
            }
            if single_layer_plan(&single, layer).ok().as_ref() != Some(&single) {
                bad.push(format!("{} layer {layer}: not idempotent", plan.strategy));
            }
        }
    }
    bad
}
