//! Acceptance checks, one PASS/FAIL line each. Exits non-zero on any FAIL.
//!
//! The real-corpus check runs only when `PDTB_DIR` points at a PDTB 2.0 pipe
//! corpus; otherwise it reports SKIP.

#[path = "../../core/tests/common/nmt_checks.rs"]
mod nmt_checks;
#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use discprobe::embedding::{
    decode_dump, encode_dump, feature_token_indices, read_dump, write_dump, Dump, DumpHeader,
    EmbeddingSource, FeatureVariant, InstanceDump, Matrix, PoolingOptions, TokenAlignment,
};
use discprobe::pdtb::{build_instance, parse_pdtb, write_pdtb, RelationType, SenseMap};
use discprobe::probe::{loss, train, ProbeConfig};
use discprobe::runner::{
    discourse_aware_layer, emit_report, plan_matrix, run_matrix, ModelSpec, ProbeSettings, Sources,
    TaskSelection,
};
use discprobe::synthetic::{
    synthetic_corpus, tokenize, SyntheticCorpusConfig, SyntheticDump, SyntheticDumpConfig,
};
use discprobe::CharSpan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::*;

type Check = (&'static str, fn() -> Outcome);

fn check(cond: bool, pass: String, fail: String) -> Outcome {
    if cond {
        Pass(pass)
    } else {
        Fail(fail)
    }
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut resamples = 0;
    for seed in 0..20 {
        let draw = oracle::grad_draw(seed);
        resamples += draw.resamples;
        worst = worst.max(oracle::max_gradient_error(&draw));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail =
        format!("max rel err {worst:.2e} over 20 draws ({resamples} resampled), {secs:.2}s");
    check(
        worst < oracle::GRAD_REL_TOL && secs < 5.0,
        detail.clone(),
        detail,
    )
}

fn loss_anchors() -> Outcome {
    let uniform = loss(&[0.0; 21], 0).unwrap();
    let two = loss(&[0.0, 3f64.ln()], 0).unwrap();
    let (e1, e2) = ((uniform - 21f64.ln()).abs(), (two - 4f64.ln()).abs());
    let detail = format!("|L - ln 21| = {e1:.1e}, |L - ln 4| = {e2:.1e}");
    check(e1 <= 1e-6 && e2 <= 1e-6, detail.clone(), detail)
}

fn separable_data() -> Outcome {
    let start = Instant::now();
    let mut cfg = ProbeConfig::new(32, 21);
    cfg.seed = 5;
    let (_, clean) = train(&oracle::blobs(21, 32, [40, 10, 20], 11), &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let shuffled = oracle::shuffle_labels(oracle::blobs(21, 32, [40, 10, 20], 11), 3);
    let (_, noise) = train(&shuffled, &cfg).unwrap();
    let gap = (noise.test_accuracy - 1.0 / 21.0).abs();
    let detail = format!(
        "separable test acc {:.4} in {} epochs, {secs:.2}s; shuffled {:.4} (|gap to chance| {gap:.4})",
        clean.test_accuracy, clean.epochs_run, noise.test_accuracy
    );
    check(
        clean.test_accuracy >= 0.99 && clean.epochs_run <= 50 && secs < 30.0 && gap <= 0.05,
        detail.clone(),
        detail,
    )
}

fn synthetic_sources(
    planted: Option<usize>,
    has_cls: bool,
    corpus_seed: u64,
) -> (Vec<discprobe::pdtb::DiscourseInstance>, SyntheticDump) {
    let instances = synthetic_corpus(
        &SyntheticCorpusConfig {
            seed: corpus_seed,
            per_label: [40, 10, 10],
        },
        &SenseMap::default(),
    );
    let mut cfg = SyntheticDumpConfig::new("synthetic", 12, 16);
    cfg.planted_layer = planted;
    cfg.has_cls = has_cls;
    cfg.seed = corpus_seed + 100;
    let dump = SyntheticDump::new(cfg, &instances).unwrap();
    (instances, dump)
}

fn spec(has_cls: bool) -> ModelSpec {
    ModelSpec {
        model_id: "synthetic".into(),
        layer_count: 12,
        has_cls,
    }
}

fn planted_layer() -> Outcome {
    let mut found = Vec::new();
    for k in [1, 6, 9, 12] {
        let (instances, dump) = synthetic_sources(Some(k), false, k as u64);
        let cells = plan_matrix(&[spec(false)], TaskSelection::parse("1").unwrap(), 2024, 1);
        let mut sources = Sources::new();
        sources.insert("synthetic".into(), &dump as &dyn EmbeddingSource);
        let rows = run_matrix(&cells, &instances, &sources, &ProbeSettings::default(), 4).unwrap();
        found.push((k, discourse_aware_layer(&rows).ok()));
    }
    let hits = found.iter().filter(|(k, got)| Some(*k) == *got).count();
    let detail = format!("{hits}/4 correct: {found:?}");
    check(hits == 4, detail.clone(), detail)
}

fn full_matrix_report(dir: &Path, workers: usize) -> Vec<u8> {
    let (instances, dump) = synthetic_sources(Some(9), true, 7);
    let cells = plan_matrix(&[spec(true)], TaskSelection::BOTH, 99, 1);
    let mut sources = Sources::new();
    sources.insert("synthetic".into(), &dump as &dyn EmbeddingSource);
    let rows = run_matrix(
        &cells,
        &instances,
        &sources,
        &ProbeSettings::default(),
        workers,
    )
    .unwrap();
    let files = emit_report(&rows, dir).unwrap();
    let mut bytes = std::fs::read(&files.results).unwrap();
    for curve in &files.curves {
        bytes.extend(std::fs::read(curve).unwrap());
    }
    bytes
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let a = full_matrix_report(&dir.path().join("a"), 1);
    let b = full_matrix_report(&dir.path().join("b"), 4);
    check(
        a == b,
        format!(
            "{} report bytes identical across runs (1 vs 4 workers)",
            a.len()
        ),
        "reports differ".into(),
    )
}

fn random_dump(rng: &mut ChaCha8Rng) -> Dump {
    let layers = rng.random_range(1..6);
    let dim = rng.random_range(1..9);
    let cls = rng.random_bool(0.5);
    let header = DumpHeader {
        model_id: format!("m{}", rng.random::<u16>()),
        layer_count: layers,
        hidden_dim: dim,
        layer_roles: DumpHeader::encoder_decoder_roles(layers / 2, layers - layers / 2),
        cls_position: cls.then_some(0),
    };
    let instances = (0..rng.random_range(0..6))
        .map(|i| {
            let tokens = rng.random_range(1..8);
            InstanceDump {
                id: format!("wsj_{i:04}:{}", rng.random::<u8>()),
                alignment: TokenAlignment::new(
                    (0..tokens)
                        .map(|t| (t > 0 || !cls).then(|| CharSpan::new(3 * t, 3 * t + 2)))
                        .collect(),
                ),
                truncated: rng.random_bool(0.2),
                layers: (0..layers)
                    .map(|_| {
                        let data = (0..tokens * dim)
                            .map(|_| f32::from_bits(rng.random::<u32>() & 0xBFFF_FFFF))
                            .collect();
                        Matrix::new(tokens, dim, data).unwrap()
                    })
                    .collect(),
            }
        })
        .collect();
    Dump::new(header, instances).unwrap()
}

fn format_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.dprb");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..100 {
        let dump = random_dump(&mut rng);
        write_dump(&dump, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = read_dump(&path).unwrap();
        if !back.bit_eq(&dump) || encode_dump(&back).unwrap() != bytes {
            return Fail(format!("trial {trial} not byte-identical"));
        }
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/tiny.dprb");
    let bytes = std::fs::read(&golden).unwrap();
    if decode_dump(&bytes).is_err() {
        return Fail("golden file does not decode".into());
    }
    if let Some(k) = (0..bytes.len()).find(|&k| decode_dump(&bytes[..k]).is_ok()) {
        return Fail(format!("golden prefix of {k} bytes accepted"));
    }
    Pass(format!(
        "100 random dumps byte-identical; all {} golden prefixes rejected",
        bytes.len()
    ))
}

fn fixture_files() -> Vec<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/pdtb");
    let mut files: Vec<PathBuf> = std::fs::read_dir(root)
        .unwrap()
        .flat_map(|s| std::fs::read_dir(s.unwrap().path()).unwrap())
        .map(|f| f.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "pipe"))
        .collect();
    files.sort();
    files
}

fn corpus_invariants() -> Outcome {
    let map = SenseMap::default();
    let opts = PoolingOptions::default();
    let (mut files, mut implicit, mut explicit) = (0, 0, 0);
    for path in fixture_files() {
        let text = std::fs::read_to_string(&path).unwrap();
        let doc_id = path.file_stem().unwrap().to_str().unwrap();
        let rels = parse_pdtb(Cursor::new(&text), doc_id).unwrap();
        let mut out = Vec::new();
        write_pdtb(&mut out, &rels).unwrap();
        if out != text.as_bytes() {
            return Fail(format!("{} does not round-trip", path.display()));
        }
        files += 1;
        for rel in &rels {
            let inst = build_instance(rel, &map).unwrap();
            match rel.relation_type {
                RelationType::Implicit => {
                    let conn = rel.connective_text.as_deref().unwrap_or("");
                    let plain = format!("{} {}", rel.arg1_text, rel.arg2_text);
                    if inst.serialized_text != plain
                        || inst.connective_char_span.is_some()
                        || conn.is_empty()
                    {
                        return Fail(format!("{}: implicit connective `{conn}` leaked", inst.id));
                    }
                    implicit += 1;
                }
                RelationType::Explicit => {
                    let alignment = tokenize(&inst.serialized_text, true);
                    let con = feature_token_indices(
                        &inst,
                        &alignment,
                        Some(0),
                        FeatureVariant::Con,
                        opts,
                    )
                    .unwrap();
                    let arg = feature_token_indices(
                        &inst,
                        &alignment,
                        Some(0),
                        FeatureVariant::Arg,
                        opts,
                    )
                    .unwrap();
                    if con.iter().any(|r| arg.contains(r)) {
                        return Fail(format!("{}: CON and ARG overlap", inst.id));
                    }
                    explicit += 1;
                }
                _ => {}
            }
        }
    }
    Pass(format!(
        "{files} fixture files round-trip; {implicit} implicit without connective; {explicit} explicit with disjoint CON/ARG"
    ))
}

fn published_split_counts() -> Outcome {
    let Some(dir) = std::env::var_os("PDTB_DIR") else {
        return Skip("set PDTB_DIR to a PDTB 2.0 pipe corpus to run".into());
    };
    let out_dir = tempfile::tempdir().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_discprobe"))
        .env("RUST_LOG", "warn")
        .arg("convert")
        .arg("--corpus")
        .arg(&dir)
        .arg("--out")
        .arg(out_dir.path().join("instances.jsonl"))
        .arg("--expect-table2")
        .output()
        .unwrap();
    let detail = String::from_utf8_lossy(&output.stdout)
        .lines()
        .take(3)
        .collect::<Vec<_>>()
        .join("; ");
    let code = output.status.code();
    check(
        code == Some(0),
        detail,
        format!(
            "exit {code:?}: {}",
            String::from_utf8_lossy(&output.stderr).trim()
        ),
    )
}

fn init_plan() -> Outcome {
    let bad = nmt_checks::init_plan_violations();
    check(
        bad.is_empty(),
        "encoder init loads no decoder groups; seq2seq has no random groups; layers 1, 6, 9, 12 each leave one trainable group".into(),
        bad.join("; "),
    )
}

fn doc_pairs() -> Outcome {
    let bad = nmt_checks::doc_pair_violations(1000, 42);
    check(
        bad.is_empty(),
        "1000 sentences give 1000 pairs, one separator per context line, no cross-document context"
            .into(),
        bad.join("; "),
    )
}

fn main() -> ExitCode {
    let checks: [Check; 10] = [
        ("gradient oracle", gradient_oracle),
        ("loss anchors", loss_anchors),
        ("separable data", separable_data),
        ("planted layer", planted_layer),
        ("determinism", determinism),
        ("format round trip", format_round_trip),
        ("corpus invariants", corpus_invariants),
        ("published split counts", published_split_counts),
        ("init plan", init_plan),
        ("doc pairs", doc_pairs),
    ];
    let mut failed = 0;
    for (name, f) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        match outcome {
            Pass(d) => println!("PASS {name}: {d}"),
            Skip(d) => println!("SKIP {name}: {d}"),
            Fail(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
