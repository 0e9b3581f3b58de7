use crate::{require_path, usage, write_resolved, CmdResult};
use anyhow::Context;
use clap::{Args, ValueEnum};
use discprobe::nmt::{
    build_doc_pairs, make_init_plan, read_parallel_tsv, single_layer_plan, training_config,
    write_parallel, Architecture, PlmKind, DEFAULT_SEPARATOR,
};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyArg {
    /// Pretrained encoder, random decoder.
    Encoder,
    /// Random encoder, pretrained decoder.
    Decoder,
    /// Pretrained encoder and decoder.
    Seq2seq,
}

#[derive(Args, Debug)]
pub struct NmtPrepArgs {
    /// Parallel corpus with `doc_id<TAB>source<TAB>target` lines.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Only this pretrained layer stays trainable.
    #[arg(long)]
    layer: Option<usize>,
    #[arg(long, default_value_t = 12)]
    encoder_layers: usize,
    #[arg(long, default_value_t = 12)]
    decoder_layers: usize,
    /// Context separator placed between the previous and current sentence.
    #[arg(long, default_value = DEFAULT_SEPARATOR)]
    separator: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct Resolved<'a> {
    corpus: &'a std::path::Path,
    strategy: StrategyArg,
    #[serde(skip_serializing_if = "Option::is_none")]
    layer: Option<usize>,
    encoder_layers: usize,
    decoder_layers: usize,
    separator: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    documents: usize,
    pairs: usize,
}

pub fn nmt_prep(args: NmtPrepArgs, seed: Option<u64>) -> CmdResult {
    require_path(&args.corpus, "parallel corpus")?;
    if args.separator.trim().is_empty() {
        return Err(usage("separator must contain a visible marker"));
    }
    let kind = match args.strategy {
        StrategyArg::Encoder => PlmKind::EncoderOnly,
        StrategyArg::Decoder => PlmKind::DecoderOnly,
        StrategyArg::Seq2seq => PlmKind::EncoderDecoder,
    };
    let plan = make_init_plan(
        &Architecture::transformer(args.encoder_layers, args.decoder_layers),
        kind,
    );
    let plan = match args.layer {
        Some(layer) => single_layer_plan(&plan, layer).map_err(usage)?,
        None => plan,
    };

    let file =
        File::open(&args.corpus).with_context(|| format!("opening {}", args.corpus.display()))?;
    let documents = read_parallel_tsv(BufReader::new(file)).context("reading parallel corpus")?;
    let pairs = build_doc_pairs(&documents, &args.separator).context("building context pairs")?;

    fs::create_dir_all(&args.out).context("creating output directory")?;
    write_parallel(
        &pairs,
        BufWriter::new(File::create(args.out.join("source.txt")).context("creating source.txt")?),
        BufWriter::new(File::create(args.out.join("target.txt")).context("creating target.txt")?),
    )
    .context("writing parallel files")?;
    write_resolved(&args.out.join("init_plan.toml"), &plan)?;
    write_resolved(&args.out.join("training_config.toml"), &training_config())?;
    write_resolved(
        &args.out.join("config.toml"),
        &Resolved {
            corpus: &args.corpus,
            strategy: args.strategy,
            layer: args.layer,
            encoder_layers: args.encoder_layers,
            decoder_layers: args.decoder_layers,
            separator: &args.separator,
            seed,
            documents: documents.len(),
            pairs: pairs.len(),
        },
    )?;

    let trainable = plan.groups.iter().filter(|a| a.trainable).count();
    println!(
        "{} pairs from {} documents; plan {} with {} of {} groups trainable",
        pairs.len(),
        documents.len(),
        plan.strategy,
        trainable,
        plan.groups.len()
    );
    Ok(())
}
