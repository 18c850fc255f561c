use std::path::{Path, PathBuf};

use clap::Args;
use entrate_core::ingest::{read_units, stream_from_units, TextUnit};
use entrate_core::{scan_corpus, Granularity, Partition, TokenStream, DEFAULT_N_MAX};
use entrate_llmgen::{corpus_from_records, RecordFilter};
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::failure::Failure;

/// Input selection shared by `analyze` and `count`.
#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus directories, text files or generation JSONL files.
    pub inputs: Vec<PathBuf>,
    /// Token granularity: word or letter [default: word]
    #[arg(long)]
    pub granularity: Option<Granularity>,
    /// Longest context length [default: 6]
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Glob for files to read inside directories, repeatable [default: *.txt]
    #[arg(long)]
    pub include: Vec<String>,
    /// Glob for files to skip inside directories, repeatable
    #[arg(long)]
    pub exclude: Vec<String>,
    /// Declared partition recorded in outputs: written, spoken or generated
    #[arg(long)]
    pub partition: Option<Partition>,
    /// Keep only generation records whose model contains one of these
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Keep only generation records at these temperatures
    #[arg(long, value_delimiter = ',')]
    pub temps: Vec<f64>,
    /// Keep only generation records at or above this temperature
    #[arg(long)]
    pub min_temp: Option<f64>,
    /// Keep only generation records at or below this temperature
    #[arg(long)]
    pub max_temp: Option<f64>,
    /// Count in this many parallel chunks (results are identical)
    #[arg(long)]
    pub chunks: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub inputs: Vec<String>,
    pub granularity: Granularity,
    pub n_max: usize,
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub partition: Option<Partition>,
    pub filter: RecordFilter,
    pub chunks: usize,
}

impl CorpusConfig {
    pub fn resolve(args: CorpusArgs, s: &Settings) -> Result<CorpusConfig, Failure> {
        let inputs = s.pick_list(args.inputs, "inputs")?;
        let n_max = s.pick_or(args.n_max, "n-max", DEFAULT_N_MAX)?;
        if n_max == 0 {
            return Err(Failure::Usage("n-max must be at least 1".into()));
        }
        Ok(CorpusConfig {
            inputs: inputs.iter().map(|p: &PathBuf| slash(p)).collect(),
            granularity: s.pick_or(args.granularity, "granularity", Granularity::Word)?,
            n_max,
            include: s.pick_list(args.include, "include")?,
            exclude: s.pick_list(args.exclude, "exclude")?,
            partition: s.pick(args.partition, "partition")?,
            filter: RecordFilter {
                models: s.pick_list(args.models, "models")?,
                temperatures: s.pick_list(args.temps, "temps")?,
                min_temperature: s.pick(args.min_temp, "min-temp")?,
                max_temperature: s.pick(args.max_temp, "max-temp")?,
            },
            chunks: s.pick_or(args.chunks, "chunks", 0)?,
        })
    }
}

pub fn slash(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

fn is_jsonl(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "jsonl")
}

/// Concatenates every input, in argument order, into one token stream.
pub fn load(cfg: &CorpusConfig) -> Result<TokenStream, Failure> {
    if cfg.inputs.is_empty() {
        return Err(Failure::Usage("no input paths given".into()));
    }
    let mut units: Vec<TextUnit> = Vec::new();
    let mut files = 0usize;
    for input in &cfg.inputs {
        let manifest = scan_corpus(Path::new(input), &cfg.include, &cfg.exclude)?;
        for path in manifest.paths() {
            files += 1;
            if is_jsonl(&path) {
                units.extend(corpus_from_records(&[path], &cfg.filter)?);
            } else {
                units.extend(read_units(&path)?);
            }
        }
        log::info!("{input}: {} files, {} words", manifest.files.len(), manifest.word_count);
    }
    if units.iter().all(|u| u.text.trim().is_empty()) {
        return Err(entrate_core::Error::NoFilesMatched(PathBuf::from(&cfg.inputs[0])).into());
    }
    let mut stream = stream_from_units(&units, cfg.granularity)
        .with_meta("inputs", cfg.inputs.join(","))
        .with_meta("files", files.to_string());
    if let Some(p) = cfg.partition {
        stream = stream.with_meta("partition", p.to_string());
    }
    Ok(stream)
}

/// Default output stem: the first input's file name without extension.
pub fn source_name(cfg: &CorpusConfig) -> String {
    cfg.inputs
        .first()
        .map(|p| {
            let path = Path::new(p);
            path.file_stem()
                .or_else(|| path.file_name())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.clone())
        })
        .unwrap_or_else(|| "corpus".into())
}
