use std::path::PathBuf;

use clap::{Args, ValueEnum};
use entrate_core::source::{to_text, IidSource, MarkovSource};
use serde::Serialize;

use crate::config::Settings;
use crate::failure::{write_error, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Iid,
    Markov,
}

impl std::str::FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <SourceKind as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// iid or markov [default: iid]
    #[arg(long)]
    pub kind: Option<SourceKind>,
    /// Number of symbols [default: 2]
    #[arg(long)]
    pub alphabet: Option<usize>,
    /// Symbol probabilities for iid sources [default: uniform]
    #[arg(long, value_delimiter = ',')]
    pub probs: Vec<f64>,
    /// Markov order [default: 1]
    #[arg(long)]
    pub order: Option<usize>,
    /// First-order transition matrix, rows separated by ';', e.g. "0.9,0.1;0.5,0.5"
    #[arg(long)]
    pub matrix: Option<String>,
    /// Dirichlet concentration for random Markov rows [default: 0.5]
    #[arg(long)]
    pub concentration: Option<f64>,
    /// Symbols to emit [default: 1000000]
    #[arg(long)]
    pub length: Option<usize>,
    /// RNG seed; a fixed seed reproduces the text exactly [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Text file to write; the run description goes next to it as .json
    /// [default: simulated.txt]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SimulateConfig {
    kind: SourceKind,
    alphabet: usize,
    order: usize,
    length: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    probs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transitions: Option<Vec<Vec<f64>>>,
    entropy_rate_bits: f64,
}

fn parse_matrix(raw: &str) -> Result<Vec<Vec<f64>>, Failure> {
    raw.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Failure::Usage(format!("bad matrix entry {v:?}: {e}")))
                })
                .collect()
        })
        .collect()
}

pub fn run(args: SimulateArgs, s: &Settings) -> Result<(), Failure> {
    let kind = s.pick_or(args.kind, "kind", SourceKind::Iid)?;
    let length = s.pick_or(args.length, "length", 1_000_000)?;
    let seed = s.pick_or(args.seed, "seed", 0)?;
    let out: PathBuf = s.pick_or(args.out, "out", PathBuf::from("simulated.txt"))?;
    let probs: Vec<f64> = s.pick_list(args.probs, "probs")?;
    let matrix: Option<String> = s.pick(args.matrix, "matrix")?;
    let usage = Failure::Usage;

    let (symbols, config) = match kind {
        SourceKind::Iid => {
            let source = if probs.is_empty() {
                let alphabet = s.pick_or(args.alphabet, "alphabet", 2)?;
                if alphabet == 0 {
                    return Err(usage("alphabet must be at least 1".into()));
                }
                IidSource::uniform(alphabet)
            } else {
                IidSource::new(probs.clone()).map_err(usage)?
            };
            let config = SimulateConfig {
                kind,
                alphabet: source.alphabet(),
                order: 0,
                length,
                seed,
                probs: (!probs.is_empty()).then_some(probs),
                transitions: None,
                entropy_rate_bits: source.entropy_rate(),
            };
            (source.sample(length, seed), config)
        }
        SourceKind::Markov => {
            let source = match matrix {
                Some(m) => MarkovSource::from_matrix(parse_matrix(&m)?).map_err(usage)?,
                None => MarkovSource::random(
                    s.pick_or(args.order, "order", 1)?,
                    s.pick_or(args.alphabet, "alphabet", 2)?,
                    s.pick_or(args.concentration, "concentration", 0.5)?,
                    seed,
                )
                .map_err(usage)?,
            };
            let config = SimulateConfig {
                kind,
                alphabet: source.alphabet(),
                order: source.order(),
                length,
                seed,
                probs: None,
                transitions: Some(source.transitions().to_vec()),
                entropy_rate_bits: source.entropy_rate(),
            };
            (source.sample(length, seed), config)
        }
    };

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| write_error(dir, e))?;
    }
    let mut text = to_text(&symbols, config.alphabet);
    text.push('\n');
    std::fs::write(&out, text).map_err(|e| write_error(&out, e))?;
    let sidecar = out.with_extension("json");
    let json = serde_json::to_string_pretty(&config).expect("config serializes") + "\n";
    std::fs::write(&sidecar, json).map_err(|e| write_error(&sidecar, e))?;
    println!(
        "{}: {} symbols, entropy rate {:.6} bits/symbol",
        out.display(),
        length,
        config.entropy_rate_bits
    );
    Ok(())
}
