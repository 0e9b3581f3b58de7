use crate::{require_path, sibling, usage, write_resolved, CmdResult, Failure};
use anyhow::Context;
use clap::{Args, ValueEnum};
use discprobe::extraction::{build_manifest, ModelDescriptor};
use discprobe::pdtb::{
    assign_splits, build_instances, corpus_stats, parse_pdtb, read_instances, write_instances,
    MultiSensePolicy, PdtbError, SenseMap, SplitConfig,
};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use walkdir::WalkDir;

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiSense {
    /// Keep the first annotated sense.
    First,
    /// One instance per annotated sense.
    Duplicate,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    /// Directory searched recursively for `*.pipe` files.
    #[arg(long)]
    corpus: PathBuf,
    /// Sense simplification table; the bundled table when omitted.
    #[arg(long)]
    sense_map: Option<PathBuf>,
    /// Split configuration (TOML); the standard section split when omitted.
    #[arg(long)]
    split_config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "first")]
    multi_sense: MultiSense,
    /// Output instance file (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Exit with code 3 unless the split counts match the published ones.
    #[arg(long)]
    expect_table2: bool,
}

#[derive(Serialize)]
struct ResolvedConvert<'a> {
    corpus: &'a Path,
    sense_map: Option<&'a Path>,
    split_config: Option<&'a Path>,
    multi_sense: MultiSense,
    out: &'a Path,
    expect_table2: bool,
    seed: Option<u64>,
    documents: usize,
}

pub fn load_sense_map(path: Option<&Path>) -> Result<SenseMap, Failure> {
    match path {
        None => Ok(SenseMap::default()),
        Some(p) => {
            require_path(p, "sense map")?;
            let text = fs::read_to_string(p)
                .map_err(|e| usage(format!("sense map `{}`: {e}", p.display())))?;
            SenseMap::parse(&text).map_err(|e| usage(format!("sense map `{}`: {e}", p.display())))
        }
    }
}

fn pipe_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).follow_links(true) {
        let entry = entry?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "pipe") {
            files.push(entry.into_path());
        }
    }
    files.sort();
    Ok(files)
}

pub fn convert(args: ConvertArgs, seed: Option<u64>) -> CmdResult {
    require_path(&args.corpus, "corpus directory")?;
    let map = load_sense_map(args.sense_map.as_deref())?;
    let splits = match &args.split_config {
        None => SplitConfig::default(),
        Some(p) => {
            require_path(p, "split config")?;
            let text = fs::read_to_string(p)
                .map_err(|e| usage(format!("split config `{}`: {e}", p.display())))?;
            SplitConfig::from_toml_str(&text)
                .map_err(|e| usage(format!("`{}`: {e}", p.display())))?
        }
    };
    let policy = match args.multi_sense {
        MultiSense::First => MultiSensePolicy::FirstSense,
        MultiSense::Duplicate => MultiSensePolicy::DuplicatePerSense,
    };

    let files = pipe_files(&args.corpus).context("scanning corpus")?;
    if files.is_empty() {
        return Err(usage(format!(
            "no .pipe files under `{}`",
            args.corpus.display()
        )));
    }
    let mut instances = Vec::new();
    for path in &files {
        let doc_id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let reader = BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        );
        let relations =
            parse_pdtb(reader, &doc_id).with_context(|| format!("parsing {}", path.display()))?;
        for raw in &relations {
            instances.extend(build_instances(raw, &map, policy).context("building instances")?);
        }
    }
    let instances = assign_splits(instances, &splits).map_err(|e| match e {
        PdtbError::UncoveredDocument(_) | PdtbError::SplitConfig(_) => usage(e),
        other => Failure::Runtime(other.into()),
    })?;

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).context("creating output directory")?;
    }
    let out = BufWriter::new(
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?,
    );
    write_instances(out, &instances).context("writing instances")?;

    let stats = corpus_stats(&instances);
    fs::write(
        sibling(&args.out, ".stats.json"),
        serde_json::to_string_pretty(&stats).context("stats")?,
    )
    .context("writing stats")?;
    write_resolved(
        &sibling(&args.out, ".config.toml"),
        &ResolvedConvert {
            corpus: &args.corpus,
            sense_map: args.sense_map.as_deref(),
            split_config: args.split_config.as_deref(),
            multi_sense: args.multi_sense,
            out: &args.out,
            expect_table2: args.expect_table2,
            seed,
            documents: files.len(),
        },
    )?;

    print!("{stats}");
    println!(
        "{} instances from {} documents",
        instances.len(),
        files.len()
    );
    if args.expect_table2 {
        let mismatches = stats.table2_mismatches();
        if !mismatches.is_empty() {
            return Err(Failure::Expectation(mismatches.join("; ")));
        }
        println!("split counts match the expected table");
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct ManifestArgs {
    /// Instance file written by `convert`.
    #[arg(long)]
    instances: PathBuf,
    /// Model descriptor (TOML).
    #[arg(long)]
    model: PathBuf,
    /// Output manifest (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Sense map the instances were labelled with.
    #[arg(long)]
    sense_map: Option<PathBuf>,
}

pub fn read_instance_file(
    path: &Path,
    label_count: usize,
) -> Result<Vec<discprobe::pdtb::DiscourseInstance>, Failure> {
    require_path(path, "instance file")?;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_instances(BufReader::new(file), label_count)
        .with_context(|| format!("reading {}", path.display()))?)
}

pub fn manifest(args: ManifestArgs) -> CmdResult {
    require_path(&args.instances, "instance file")?;
    require_path(&args.model, "model descriptor")?;
    let map = load_sense_map(args.sense_map.as_deref())?;
    let text = fs::read_to_string(&args.model).context("reading model descriptor")?;
    let model = ModelDescriptor::from_toml_str(&text)
        .map_err(|e| usage(format!("`{}`: {e}", args.model.display())))?;
    let instances = read_instance_file(&args.instances, map.label_count())?;
    let manifest = build_manifest(&instances, &model).map_err(usage)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).context("creating output directory")?;
    }
    fs::write(
        &args.out,
        serde_json::to_string_pretty(&manifest).context("manifest")?,
    )
    .context("writing manifest")?;
    println!(
        "manifest for {} instances of `{}`",
        manifest.instances.len(),
        model.model_id
    );
    Ok(())
}
