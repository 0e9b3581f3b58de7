use crate::corpus::{load_sense_map, read_instance_file};
use crate::{require_path, usage, write_resolved, CmdResult, Failure};
use anyhow::Context;
use clap::Args;
use discprobe::embedding::{DumpReader, EmbeddingSource};
use discprobe::runner::{
    emit_report, plan_matrix, run_matrix, ModelSpec, ProbeSettings, Sources, TaskSelection,
};
use discprobe::synthetic::{
    synthetic_corpus, SyntheticCorpusConfig, SyntheticDump, SyntheticDumpConfig,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// Instance file written by `convert`.
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Layer dump of one model, as `MODEL=PATH`; repeatable.
    #[arg(long = "dump", value_name = "MODEL=PATH")]
    dumps: Vec<String>,
    /// Probe the built-in synthetic backend instead of (or besides) dumps.
    #[arg(long)]
    synthetic: bool,
    #[arg(long, value_name = "N")]
    synthetic_layers: Option<usize>,
    #[arg(long, value_name = "N")]
    synthetic_dim: Option<usize>,
    /// Layer that carries the planted class signal.
    #[arg(long, value_name = "LAYER")]
    synthetic_planted: Option<usize>,
    /// Give the synthetic model a classifier token.
    #[arg(long)]
    synthetic_cls: bool,
    /// Synthetic corpus size as per-label `TRAIN,VALID,TEST` counts; used when
    /// no instance file is given.
    #[arg(long, value_name = "T,V,T")]
    synthetic_corpus: Option<String>,
    /// Probing task: 1, 2 or all.
    #[arg(long)]
    task: Option<String>,
    /// Independent probe runs per cell.
    #[arg(long)]
    repeats: Option<usize>,
    /// Worker threads; 0 uses every available core.
    #[arg(long)]
    workers: Option<usize>,
    /// Run configuration (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sense_map: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long)]
    out: PathBuf,
}

/// Everything a probe run depends on; written back as `config.toml`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub repeats: usize,
    pub task: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sense_map: Option<PathBuf>,
    pub dumps: BTreeMap<String, PathBuf>,
    pub probe: ProbeSettings,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticDumpConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic_corpus: Option<SyntheticCorpusConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 0,
            repeats: 1,
            task: "all".into(),
            instances: None,
            sense_map: None,
            dumps: BTreeMap::new(),
            probe: ProbeSettings::default(),
            synthetic: None,
            synthetic_corpus: None,
        }
    }
}

fn parse_counts(s: &str) -> Result<[usize; 3], Failure> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(format!("--synthetic-corpus `{s}`: {e}")))?;
    <[usize; 3]>::try_from(parts)
        .map_err(|_| usage(format!("--synthetic-corpus `{s}` needs three counts")))
}

fn resolve(args: &ProbeArgs, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        None => RunConfig::default(),
        Some(p) => {
            require_path(p, "config")?;
            let text = fs::read_to_string(p)
                .map_err(|e| usage(format!("config `{}`: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| usage(format!("config `{}`: {e}", p.display())))?
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    if let Some(t) = &args.task {
        cfg.task = t.clone();
    }
    if let Some(p) = &args.instances {
        cfg.instances = Some(p.clone());
    }
    if let Some(p) = &args.sense_map {
        cfg.sense_map = Some(p.clone());
    }
    for d in &args.dumps {
        let (model, path) = d
            .split_once('=')
            .ok_or_else(|| usage(format!("--dump `{d}` is not MODEL=PATH")))?;
        cfg.dumps.insert(model.to_string(), PathBuf::from(path));
    }
    let wants_synthetic = args.synthetic
        || args.synthetic_layers.is_some()
        || args.synthetic_dim.is_some()
        || args.synthetic_planted.is_some()
        || args.synthetic_cls;
    if wants_synthetic && cfg.synthetic.is_none() {
        cfg.synthetic = Some(SyntheticDumpConfig::default());
    }
    if let Some(syn) = cfg.synthetic.as_mut() {
        if let Some(n) = args.synthetic_layers {
            syn.layer_count = n;
        }
        if let Some(n) = args.synthetic_dim {
            syn.hidden_dim = n;
        }
        if args.synthetic_planted.is_some() {
            syn.planted_layer = args.synthetic_planted;
        }
        if args.synthetic_cls {
            syn.has_cls = true;
        }
        if let Some(s) = seed {
            syn.seed = s;
        }
        syn.class_count = cfg.probe.class_count;
    }
    if let Some(c) = &args.synthetic_corpus {
        let per_label = parse_counts(c)?;
        cfg.synthetic_corpus
            .get_or_insert_with(SyntheticCorpusConfig::default)
            .per_label = per_label;
    }
    if cfg.instances.is_none() && cfg.synthetic.is_some() && cfg.synthetic_corpus.is_none() {
        cfg.synthetic_corpus = Some(SyntheticCorpusConfig::default());
    }
    if let (Some(s), Some(corpus)) = (seed, cfg.synthetic_corpus.as_mut()) {
        corpus.seed = s;
    }

    if cfg.instances.is_some() && cfg.synthetic_corpus.is_some() {
        return Err(usage(
            "give either an instance file or a synthetic corpus, not both",
        ));
    }
    if cfg.instances.is_none() && cfg.synthetic_corpus.is_none() {
        return Err(usage(
            "no instances: pass --instances or --synthetic-corpus",
        ));
    }
    if cfg.dumps.is_empty() && cfg.synthetic.is_none() {
        return Err(usage(
            "no embedding source: pass --dump MODEL=PATH or --synthetic",
        ));
    }
    if i64::try_from(cfg.seed).is_err() {
        return Err(usage("seed must fit in a signed 64-bit integer"));
    }
    if cfg.repeats == 0 {
        return Err(usage("repeats must be positive"));
    }
    if let Some(syn) = &cfg.synthetic {
        if cfg.dumps.contains_key(&syn.model_id) {
            return Err(usage(format!("model id `{}` used twice", syn.model_id)));
        }
    }
    TaskSelection::parse(&cfg.task).map_err(usage)?;
    for (model, path) in &cfg.dumps {
        require_path(path, &format!("dump for `{model}`"))?;
    }
    Ok(cfg)
}

pub fn probe(args: ProbeArgs, seed: Option<u64>) -> CmdResult {
    let cfg = resolve(&args, seed)?;
    let tasks = TaskSelection::parse(&cfg.task).map_err(usage)?;
    let map = load_sense_map(cfg.sense_map.as_deref())?;
    if cfg.probe.class_count != map.label_count() {
        return Err(usage(format!(
            "probe class_count {} differs from the sense map's {} labels",
            cfg.probe.class_count,
            map.label_count()
        )));
    }
    let instances = match (&cfg.instances, &cfg.synthetic_corpus) {
        (Some(path), _) => read_instance_file(path, map.label_count())?,
        (None, Some(c)) => synthetic_corpus(c, &map),
        (None, None) => unreachable!("checked in resolve"),
    };

    let mut readers = Vec::new();
    for (model, path) in &cfg.dumps {
        let reader =
            DumpReader::open(path).with_context(|| format!("opening dump {}", path.display()))?;
        readers.push((model.clone(), reader));
    }
    let synthetic = match &cfg.synthetic {
        Some(c) => Some(SyntheticDump::new(c.clone(), &instances).map_err(usage)?),
        None => None,
    };

    let mut models = Vec::new();
    let mut sources = Sources::new();
    for (model, reader) in &readers {
        models.push(spec_of(model, reader));
        sources.insert(model.clone(), reader as &dyn EmbeddingSource);
    }
    if let (Some(dump), Some(c)) = (&synthetic, &cfg.synthetic) {
        models.push(spec_of(&c.model_id, dump));
        sources.insert(c.model_id.clone(), dump as &dyn EmbeddingSource);
    }

    let workers = match cfg.workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let cells = plan_matrix(&models, tasks, cfg.seed, cfg.repeats);
    log::info!("running {} cells on {workers} workers", cells.len());
    let rows =
        run_matrix(&cells, &instances, &sources, &cfg.probe, workers).context("running matrix")?;

    fs::create_dir_all(&args.out).context("creating output directory")?;
    let files = emit_report(&rows, &args.out).context("writing report")?;
    write_resolved(&args.out.join("config.toml"), &cfg)?;
    print!("{}", files.summary_text);
    println!("report written to {}", args.out.display());

    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        return Err(Failure::Cells {
            failed,
            total: rows.len(),
        });
    }
    Ok(())
}

fn spec_of(model_id: &str, source: &dyn EmbeddingSource) -> ModelSpec {
    let header = source.header();
    ModelSpec {
        model_id: model_id.to_string(),
        layer_count: header.layer_count,
        has_cls: header.cls_position.is_some(),
    }
}
