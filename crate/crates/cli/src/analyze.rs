use std::path::{Path, PathBuf};

use clap::Args;
use entrate_core::diagnose::undersampled;
use entrate_core::{
    count_ngrams_with, coverage_report, entropy_curve, estimate_rate, CountOptions, CoverageReport64, EntropyCurve64,
    FitOptions64, NgramTable, Thresholds64,
};
use serde::Serialize;

use crate::config::Settings;
use crate::corpus::{self, slash, CorpusArgs, CorpusConfig};
use crate::failure::{write_error, Failure};
use crate::report::{aligned, config_lines, FitReport};

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Analyze a table written by `count` instead of a corpus
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Source name used in outputs [default: first input's file stem]
    #[arg(long)]
    pub name: Option<String>,
    /// Output directory [default: analysis]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Flag orders whose Good-Turing missing mass exceeds this [default: 0.05]
    #[arg(long)]
    pub max_missing_mass: Option<f64>,
    /// Flag orders with fewer samples than this many per distinct n-gram [default: 10]
    #[arg(long)]
    pub min_samples_per_distinct: Option<f64>,
    /// Fit iteration cap [default: 200]
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeConfig {
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    pub n_max: usize,
    pub thresholds: Thresholds64,
    pub fit: FitOptions64,
}

pub fn counting_options(cfg: &CorpusConfig, prune: Option<u64>) -> CountOptions {
    CountOptions {
        chunks: cfg.chunks,
        prune_min_count: prune,
    }
}

fn truncate(
    mut curve: EntropyCurve64,
    mut coverage: CoverageReport64,
    n_max: usize,
) -> (EntropyCurve64, CoverageReport64) {
    curve.points.retain(|p| p.n <= n_max);
    coverage.orders.retain(|o| o.n <= n_max);
    (curve, coverage)
}

pub fn run(args: AnalyzeArgs, s: &Settings) -> Result<(), Failure> {
    let table_path: Option<PathBuf> = s.pick(args.table, "table")?;
    let explicit_n_max: Option<usize> = s.pick(args.corpus.n_max, "n-max")?;
    let defaults = Thresholds64::default();
    let thresholds = Thresholds64 {
        max_missing_mass: s.pick_or(args.max_missing_mass, "max-missing-mass", defaults.max_missing_mass)?,
        min_samples_per_distinct: s.pick_or(
            args.min_samples_per_distinct,
            "min-samples-per-distinct",
            defaults.min_samples_per_distinct,
        )?,
    };
    let fit_options = FitOptions64 {
        max_iterations: s.pick_or(args.max_iterations, "max-iterations", 200)?,
        ..FitOptions64::default()
    };
    let out: PathBuf = s.pick_or(args.out, "out", PathBuf::from("analysis"))?;
    let name: Option<String> = s.pick(args.name, "name")?;

    let table_str = table_path.as_deref().map(slash);
    let (table, corpus_cfg, n_max, source) = match table_path {
        Some(path) => {
            if !args.corpus.inputs.is_empty() {
                return Err(Failure::Usage("give either input paths or --table, not both".into()));
            }
            let table = NgramTable::load(&path)?;
            let n_max = explicit_n_max.unwrap_or(table.n_max());
            if n_max == 0 || n_max > table.n_max() {
                return Err(Failure::Usage(format!(
                    "n-max {n_max} outside 1..={} available in {}",
                    table.n_max(),
                    path.display()
                )));
            }
            let source = name.unwrap_or_else(|| {
                path.file_stem()
                    .map_or("table".into(), |s| s.to_string_lossy().into_owned())
            });
            (table, None, n_max, source)
        }
        None => {
            let cfg = CorpusConfig::resolve(args.corpus, s)?;
            let stream = corpus::load(&cfg)?;
            log::info!("{} tokens, vocabulary {}", stream.len(), stream.vocab.len());
            let table = count_ngrams_with(&stream, cfg.n_max, &counting_options(&cfg, None))?;
            let source = name.unwrap_or_else(|| corpus::source_name(&cfg));
            let n_max = cfg.n_max;
            (table, Some(cfg), n_max, source)
        }
    };

    let curve: EntropyCurve64 = entropy_curve(&table)?;
    let (curve, coverage) = truncate(curve, coverage_report(&table), n_max);
    let fit = estimate_rate(&curve, &coverage, &thresholds, &fit_options)?;
    let config = AnalyzeConfig {
        source: source.clone(),
        corpus: corpus_cfg,
        table: table_str,
        n_max,
        thresholds,
        fit: fit_options,
    };
    let config = serde_json::to_value(&config).expect("config serializes");
    let report = FitReport::new(
        source,
        &curve,
        coverage,
        &thresholds,
        fit,
        table.vocab_size() as u64,
        config,
    );
    write_outputs(&out, &curve, &report, &thresholds)?;
    println!(
        "{}: c = {:.4} {}{}",
        report.source,
        report.c,
        report.unit(),
        flag_suffix(&report)
    );
    Ok(())
}

fn flag_suffix(r: &FitReport) -> String {
    if r.flags.is_empty() {
        String::new()
    } else {
        format!(" [{}]", r.flag_list(", "))
    }
}

fn write_outputs(
    out: &Path,
    curve: &EntropyCurve64,
    report: &FitReport,
    thresholds: &Thresholds64,
) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| write_error(out, e))?;
    let echo = config_lines(&report.config);

    let mut csv = Vec::new();
    curve
        .write_csv(&mut csv, Some(&report.coverage), &echo)
        .expect("writing to memory");
    write(&out.join("curve.csv"), &csv)?;

    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    write(&out.join("fit.json"), json.as_bytes())?;

    write(&out.join("summary.txt"), summary(report, thresholds, &echo).as_bytes())
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| write_error(path, e))
}

fn summary(r: &FitReport, thresholds: &Thresholds64, echo: &[String]) -> String {
    let mut s = String::new();
    s.push_str(&format!("source: {}\n", r.source));
    s.push_str(&format!(
        "granularity: {}  tokens: {}  vocabulary: {}\n\n",
        r.granularity, r.tokens, r.vocabulary
    ));
    s.push_str(&format!("entropy rate estimate: c = {:.6} {}\n", r.c, r.unit()));
    s.push_str(&format!(
        "fit h(n) = a*exp(-b*n) + c: a = {:.6}, b = {:.6}, sse = {:.3e}, converged = {} ({} iterations)\n",
        r.a,
        r.b,
        r.sse,
        if r.converged { "yes" } else { "no" },
        r.iterations
    ));
    let flags = if r.flags.is_empty() {
        "none".to_owned()
    } else {
        r.flag_list(", ")
    };
    s.push_str(&format!("flags: {flags}\n"));
    if !r.undersampled_orders.is_empty() {
        let orders: Vec<String> = r.undersampled_orders.iter().map(|n| n.to_string()).collect();
        s.push_str(&format!(
            "undersampled orders: {} (missing mass > {} or fewer than {} samples per distinct n-gram)\n",
            orders.join(", "),
            thresholds.max_missing_mass,
            thresholds.min_samples_per_distinct
        ));
    }
    s.push('\n');
    let rows: Vec<Vec<String>> = r
        .curve
        .iter()
        .map(|p| {
            let cov = r.coverage.order(p.n);
            vec![
                p.n.to_string(),
                format!("{:.6}", p.h),
                format!("{:.6}", r.fitted(p.n as f64)),
                p.total.to_string(),
                p.distinct.to_string(),
                cov.map_or(String::new(), |o| format!("{:.4}", o.coverage)),
                cov.map_or(String::new(), |o| format!("{:.4}", o.missing_mass)),
                match undersampled(&r.coverage, p.n, thresholds) {
                    Ok(true) => "yes".into(),
                    _ => "no".into(),
                },
            ]
        })
        .collect();
    s.push_str(&aligned(
        &[
            "n",
            "h_bits",
            "fitted",
            "total",
            "distinct",
            "coverage",
            "missing_mass",
            "undersampled",
        ],
        &rows,
    ));
    s.push_str("\nconfig:\n");
    for line in echo {
        s.push_str(&format!("  {line}\n"));
    }
    s
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Table file to write [default: table.tsv]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Store a k-gram only if its (k-1)-prefix was seen at least this often
    /// (entropies from such tables are lower bounds)
    #[arg(long)]
    pub prune_min_count: Option<u64>,
}

#[derive(Debug, Serialize)]
struct CountConfig<'a> {
    corpus: &'a CorpusConfig,
    prune_min_count: Option<u64>,
}

pub fn count(args: CountArgs, s: &Settings) -> Result<(), Failure> {
    let out: PathBuf = s.pick_or(args.out, "out", PathBuf::from("table.tsv"))?;
    let prune: Option<u64> = s.pick(args.prune_min_count, "prune-min-count")?;
    let cfg = CorpusConfig::resolve(args.corpus, s)?;
    let stream = corpus::load(&cfg)?;
    let table = count_ngrams_with(&stream, cfg.n_max, &counting_options(&cfg, prune))?;
    let echo = config_lines(
        &serde_json::to_value(CountConfig {
            corpus: &cfg,
            prune_min_count: prune,
        })
        .expect("config serializes"),
    );
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| write_error(dir, e))?;
    }
    table.save_annotated(&out, &echo)?;
    println!(
        "{}: {} tokens, {} distinct {}-grams",
        out.display(),
        stream.len(),
        table.distinct(cfg.n_max)?,
        cfg.n_max
    );
    Ok(())
}
