use discprobe::embedding::{EmbeddingSource, FeatureVariant};
use discprobe::pdtb::{DiscourseInstance, RelationType, SenseMap};
use discprobe::runner::{
    discourse_aware_layer, emit_report, plan_matrix, run_cell, run_matrix, ModelSpec,
    ProbeSettings, ResultRow, RunnerError, Sources, Subset, TaskSelection,
};
use discprobe::synthetic::{
    synthetic_corpus, SyntheticCorpusConfig, SyntheticDump, SyntheticDumpConfig,
};
use std::fs;
use std::path::Path;

fn settings() -> ProbeSettings {
    ProbeSettings {
        hidden_dim: 32,
        max_epochs: 30,
        ..ProbeSettings::default()
    }
}

fn corpus(per_label: [usize; 3]) -> Vec<DiscourseInstance> {
    synthetic_corpus(
        &SyntheticCorpusConfig { seed: 5, per_label },
        &SenseMap::default(),
    )
}

fn dump(instances: &[DiscourseInstance], planted: Option<usize>, has_cls: bool) -> SyntheticDump {
    let mut cfg = SyntheticDumpConfig::new("toy", 12, 16);
    cfg.planted_layer = planted;
    cfg.has_cls = has_cls;
    cfg.seed = 11;
    SyntheticDump::new(cfg, instances).unwrap()
}

fn toy(has_cls: bool) -> ModelSpec {
    ModelSpec {
        model_id: "toy".into(),
        layer_count: 12,
        has_cls,
    }
}

fn run(
    cells_for: ModelSpec,
    instances: &[DiscourseInstance],
    source: &SyntheticDump,
    workers: usize,
) -> Vec<ResultRow> {
    let cells = plan_matrix(&[cells_for], TaskSelection::parse("1").unwrap(), 3, 1);
    let mut sources = Sources::new();
    sources.insert("toy".into(), source as &dyn EmbeddingSource);
    run_matrix(&cells, instances, &sources, &settings(), workers).unwrap()
}

#[test]
fn planted_layer_dominates() {
    let instances = corpus([40, 10, 10]);
    let source = dump(&instances, Some(9), false);
    let rows = run(toy(false), &instances, &source, 4);
    assert_eq!(rows.len(), 12);
    for r in &rows {
        let acc = r.test_accuracy.unwrap();
        if r.cell.layer == 9 {
            assert!(acc >= 0.95, "planted layer at {acc}");
        } else {
            assert!(acc <= 0.30, "noise layer {} at {acc}", r.cell.layer);
        }
    }
    assert_eq!(discourse_aware_layer(&rows).unwrap(), 9);
}

#[test]
fn worker_count_and_order_do_not_change_rows() {
    let instances = corpus([6, 2, 2]);
    let source = dump(&instances, Some(2), true);
    let serial = run(toy(true), &instances, &source, 1);
    let parallel = run(toy(true), &instances, &source, 8);
    assert_eq!(serial, parallel);

    let mut cells = plan_matrix(&[toy(true)], TaskSelection::parse("1").unwrap(), 3, 1);
    cells.reverse();
    let mut sources = Sources::new();
    sources.insert("toy".into(), &source as &dyn EmbeddingSource);
    let mut reversed = run_matrix(&cells, &instances, &sources, &settings(), 3).unwrap();
    reversed.reverse();
    assert_eq!(serial, reversed);
}

#[test]
fn same_cell_twice_is_identical() {
    let instances = corpus([6, 2, 2]);
    let source = dump(&instances, None, false);
    let cell = &plan_matrix(&[toy(false)], TaskSelection::BOTH, 1, 1)[0];
    let a = run_cell(cell, &instances, &source, &settings()).unwrap();
    let b = run_cell(cell, &instances, &source, &settings()).unwrap();
    assert_eq!(a, b);
    assert_eq!((a.counts.train, a.counts.dev, a.counts.test), (126, 42, 42));
}

#[test]
fn empty_subset_is_named() {
    let instances: Vec<_> = corpus([3, 1, 1])
        .into_iter()
        .filter(|i| i.relation_type != RelationType::Implicit)
        .collect();
    let source = dump(&instances, None, false);
    let cell = plan_matrix(&[toy(false)], TaskSelection::BOTH, 1, 1)
        .into_iter()
        .find(|c| c.subset == Subset::Imp)
        .unwrap();
    let err = run_cell(&cell, &instances, &source, &settings()).unwrap_err();
    assert!(matches!(
        err,
        RunnerError::EmptySubset {
            subset: Subset::Imp,
            ..
        }
    ));
    assert!(err.to_string().contains("IMP"));
}

#[test]
fn feature_failures_list_instances_and_matrix_continues() {
    let instances = corpus([3, 1, 1]);
    let source = dump(&instances[1..], None, false);
    let cells = plan_matrix(&[toy(false)], TaskSelection::parse("1").unwrap(), 1, 1);
    let err = run_cell(&cells[0], &instances, &source, &settings()).unwrap_err();
    assert!(err.to_string().contains(&instances[0].id), "{err}");

    let mut sources = Sources::new();
    sources.insert("toy".into(), &source as &dyn EmbeddingSource);
    let rows = run_matrix(&cells[..2], &instances, &sources, &settings(), 2).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| r.error.is_some() && r.test_accuracy.is_none()));

    let mut unknown = cells[0].clone();
    unknown.model_id = "other".into();
    let rows = run_matrix(&[unknown], &instances, &sources, &settings(), 1).unwrap();
    assert!(rows[0].error.as_deref().unwrap().contains("other"));
}

#[test]
fn missing_layer_is_an_error() {
    let instances = corpus([2, 1, 1]);
    let source = dump(&instances, None, false);
    let mut cell = plan_matrix(&[toy(false)], TaskSelection::BOTH, 1, 1)[0].clone();
    cell.layer = 13;
    assert!(matches!(
        run_cell(&cell, &instances, &source, &settings()),
        Err(RunnerError::MissingLayer { layer: 13, .. })
    ));
}

#[test]
fn full_plan_cell_count_matches_enumeration() {
    let models = [
        ModelSpec {
            model_id: "bert".into(),
            layer_count: 12,
            has_cls: true,
        },
        ModelSpec {
            model_id: "gpt2".into(),
            layer_count: 12,
            has_cls: false,
        },
        ModelSpec {
            model_id: "bart".into(),
            layer_count: 12,
            has_cls: false,
        },
    ];
    let cells = plan_matrix(&models, TaskSelection::BOTH, 0, 1);
    // Independent enumeration of the allowed (subset, variant) pairs.
    let mut expected = 0;
    for m in &models {
        for subset in Subset::ALL {
            for variant in FeatureVariant::ALL {
                let allowed = match (subset, variant) {
                    (Subset::All, FeatureVariant::WholeCls) => m.has_cls,
                    (Subset::All, FeatureVariant::WholeMean) => true,
                    (Subset::Exp, FeatureVariant::WholeCls) => false,
                    (Subset::Exp, _) => true,
                    (_, FeatureVariant::WholeMean) => true,
                    _ => false,
                };
                if allowed {
                    expected += m.layer_count;
                }
            }
        }
    }
    assert_eq!(cells.len(), expected);
    let mut ids: Vec<_> = cells.iter().map(|c| c.to_string()).collect();
    ids.dedup();
    assert_eq!(ids.len(), cells.len());
}

#[test]
fn golden_report() {
    let instances = corpus([20, 5, 5]);
    let source = dump(&instances, Some(4), true);
    let rows = run(toy(true), &instances, &source, 2);
    let dir = tempfile::tempdir().unwrap();
    let files = emit_report(&rows, dir.path()).unwrap();
    assert_eq!(files.curves.len(), 2);
    let actual = fs::read_to_string(&files.results).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report_results.csv");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden.parent().unwrap()).unwrap();
        fs::write(&golden, &actual).unwrap();
    }
    assert_eq!(actual, fs::read_to_string(&golden).unwrap());
    for curve in &files.curves {
        let layers: Vec<usize> = fs::read_to_string(curve)
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert!(layers.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(layers.len(), 12);
    }
}
