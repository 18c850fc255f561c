use std::path::{Path, PathBuf};

use clap::Args;
use entrate_llmgen::items::{bundled, bundled_names, parse_items};
use entrate_llmgen::{plan, request_body, run_job, Backoff, GenerationJob, DEFAULT_API_KEY_ENV};

use crate::config::Settings;
use crate::failure::{write_error, Failure};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Chat-completions URL, e.g. https://host/v1/chat/completions
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model names; one output file per model
    #[arg(long, value_delimiter = ',')]
    pub model: Vec<String>,
    /// Item list file (one per line) or a bundled list: countries, capitals,
    /// apples, mammals, animals, constants
    #[arg(long)]
    pub items: Option<String>,
    /// Sampling temperatures in [0, 2] [default: 0.3,0.5,0.7]
    #[arg(long, value_delimiter = ',')]
    pub temps: Vec<f64>,
    /// Prompt with exactly one {item} [default: "Write an essay about {item}"]
    #[arg(long)]
    pub template: Option<String>,
    /// Requests in flight per model [default: 4]
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Retries after a rate limit, server error or timeout [default: 5]
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Per-request timeout in seconds [default: 300]
    #[arg(long)]
    pub timeout: Option<f64>,
    /// First retry delay in seconds, doubled per retry [default: 1]
    #[arg(long)]
    pub backoff_initial: Option<f64>,
    /// Longest retry delay in seconds [default: 60]
    #[arg(long)]
    pub backoff_max: Option<f64>,
    /// Environment variable holding the API key [default: ENTRATE_API_KEY]
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Output directory [default: generated]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Print the request plan without sending anything
    #[arg(long)]
    pub dry_run: bool,
}

fn load_items(spec: &str) -> Result<Vec<String>, Failure> {
    let path = Path::new(spec);
    if path.is_file() {
        let raw =
            std::fs::read_to_string(path).map_err(|e| Failure::Data(anyhow::anyhow!("{}: {e}", path.display())))?;
        return Ok(parse_items(&raw));
    }
    let name = spec.strip_prefix("bundled:").unwrap_or(spec);
    let name = name.strip_suffix(".txt").unwrap_or(name);
    bundled(name).ok_or_else(|| {
        Failure::Usage(format!(
            "items {spec:?} is neither a file nor a bundled list ({})",
            bundled_names().collect::<Vec<_>>().join(", ")
        ))
    })
}

/// File name for a model's records.
pub fn output_file(dir: &Path, model: &str) -> PathBuf {
    let safe: String = model
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    dir.join(format!("{safe}.jsonl"))
}

fn jobs(args: GenerateArgs, s: &Settings) -> Result<(Vec<GenerationJob>, bool), Failure> {
    let endpoint: String = s
        .pick(args.endpoint, "endpoint")?
        .ok_or_else(|| Failure::Usage("--endpoint is required".into()))?;
    let models: Vec<String> = s.pick_list(args.model, "model")?;
    if models.is_empty() {
        return Err(Failure::Usage("at least one --model is required".into()));
    }
    let items_spec: String = s
        .pick(args.items, "items")?
        .ok_or_else(|| Failure::Usage("--items is required".into()))?;
    let items = load_items(&items_spec)?;
    let out: PathBuf = s.pick_or(args.out, "out", PathBuf::from("generated"))?;
    let defaults = GenerationJob::new("", "", "");
    let mut temps: Vec<f64> = s.pick_list(args.temps, "temps")?;
    if temps.is_empty() {
        temps = defaults.temperatures.clone();
    }
    let template = s.pick_or(args.template, "template", defaults.prompt_template.clone())?;
    let backoff = Backoff {
        initial_secs: s.pick_or(args.backoff_initial, "backoff-initial", defaults.backoff.initial_secs)?,
        max_secs: s.pick_or(args.backoff_max, "backoff-max", defaults.backoff.max_secs)?,
        ..defaults.backoff
    };
    let concurrency = s.pick_or(args.concurrency, "concurrency", defaults.concurrency)?;
    let max_retries = s.pick_or(args.max_retries, "max-retries", defaults.max_retries)?;
    let timeout = s.pick_or(args.timeout, "timeout", defaults.request_timeout_secs)?;
    let key_env = s.pick_or(args.api_key_env, "api-key-env", DEFAULT_API_KEY_ENV.to_owned())?;
    let dry_run = s.flag(args.dry_run, "dry-run")?;

    let jobs = models
        .iter()
        .map(|model| GenerationJob {
            endpoint: endpoint.clone(),
            model: model.clone(),
            prompt_template: template.clone(),
            items: items.clone(),
            temperatures: temps.clone(),
            max_retries,
            request_timeout_secs: timeout,
            concurrency,
            backoff,
            api_key_env: key_env.clone(),
            output: output_file(&out, model),
        })
        .collect::<Vec<_>>();
    for job in &jobs {
        job.validate()?;
    }
    Ok((jobs, dry_run))
}

pub fn run(args: GenerateArgs, s: &Settings) -> Result<(), Failure> {
    let (jobs, dry_run) = jobs(args, s)?;
    if dry_run {
        for job in &jobs {
            let planned = plan(job)?;
            let done = planned.iter().filter(|r| r.done).count();
            println!(
                "# {} -> {} ({} requests, {} already done)",
                job.model,
                job.output.display(),
                planned.len(),
                done
            );
            for r in planned.iter().filter(|r| !r.done) {
                println!(
                    "POST {} {}",
                    job.endpoint,
                    request_body(&job.model, &r.prompt, r.temperature)
                );
            }
        }
        return Ok(());
    }

    if let Some(dir) = jobs[0].output.parent() {
        std::fs::create_dir_all(dir).map_err(|e| write_error(dir, e))?;
        let echo = serde_json::to_string_pretty(&jobs).expect("jobs serialize") + "\n";
        let path = dir.join("generate.json");
        std::fs::write(&path, echo).map_err(|e| write_error(&path, e))?;
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Data(e.into()))?;
    for job in &jobs {
        let summary = runtime.block_on(run_job(job))?;
        println!(
            "{}: {} written, {} failed, {} skipped -> {}",
            job.model,
            summary.succeeded,
            summary.failed,
            summary.skipped,
            job.output.display()
        );
    }
    Ok(())
}
