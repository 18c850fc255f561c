use std::path::Path;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use reqwest::StatusCode;
use serde::Serialize;
use tokio::io::AsyncWriteExt;

use crate::error::{Error, Result};
use crate::job::{plan, request_body, GenerationJob, PlannedRequest};
use crate::record::{GenerationRecord, TokenUsage};

/// Counts for one `run_job` invocation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub planned: usize,
    pub skipped: usize,
    pub succeeded: usize,
    pub failed: usize,
}

fn api_key(job: &GenerationJob) -> Result<String> {
    match std::env::var(&job.api_key_env) {
        Ok(k) if !k.trim().is_empty() => Ok(k),
        _ => Err(Error::Auth(format!(
            "environment variable {} is not set",
            job.api_key_env
        ))),
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn record(job: &GenerationJob, req: &PlannedRequest) -> GenerationRecord {
    GenerationRecord {
        model: job.model.clone(),
        temperature: req.temperature,
        item: req.item.clone(),
        prompt: req.prompt.clone(),
        text: String::new(),
        token_usage: None,
        timestamp: String::new(),
        http_status: None,
        attempts: 0,
        error: None,
    }
}

enum Outcome {
    Done(GenerationRecord),
    Retry(GenerationRecord),
}

fn completion(body: &serde_json::Value) -> Option<&str> {
    body.get("choices")?.get(0)?.get("message")?.get("content")?.as_str()
}

async fn attempt(
    client: &reqwest::Client,
    job: &GenerationJob,
    key: &str,
    mut rec: GenerationRecord,
) -> Result<Outcome> {
    let body = request_body(&job.model, &rec.prompt, rec.temperature);
    rec.attempts += 1;
    let sent = client.post(&job.endpoint).bearer_auth(key).json(&body).send().await;
    rec.timestamp = now();
    let resp = match sent {
        Ok(r) => r,
        Err(e) => {
            rec.error = Some(e.to_string());
            return Ok(Outcome::Retry(rec));
        }
    };
    let status = resp.status();
    rec.http_status = Some(status.as_u16());
    if matches!(status, StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN) {
        return Err(Error::Auth(format!("{} returned {status}", job.endpoint)));
    }
    if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
        rec.error = Some(format!("HTTP {status}"));
        return Ok(Outcome::Retry(rec));
    }
    let text = resp.text().await;
    if !status.is_success() {
        let detail = text.unwrap_or_default();
        rec.error = Some(format!(
            "HTTP {status}: {}",
            detail.chars().take(500).collect::<String>()
        ));
        return Ok(Outcome::Done(rec));
    }
    let parsed: std::result::Result<serde_json::Value, String> = match text {
        Ok(t) => serde_json::from_str(&t).map_err(|e| format!("bad response body: {e}")),
        Err(e) => Err(e.to_string()),
    };
    match parsed {
        Ok(v) => {
            rec.token_usage = v
                .get("usage")
                .and_then(|u| serde_json::from_value::<TokenUsage>(u.clone()).ok());
            match completion(&v) {
                Some(t) if !t.is_empty() => {
                    rec.text = t.to_owned();
                    rec.error = None;
                }
                _ => rec.error = Some("response has no completion text".into()),
            }
            Ok(Outcome::Done(rec))
        }
        // a 200 with a cut-off body is treated like a transport failure
        Err(e) => {
            rec.error = Some(e);
            Ok(Outcome::Retry(rec))
        }
    }
}

/// Sends one request, retrying rate limits, server errors and transport
/// failures with exponential backoff. Only authentication failures are
/// returned as errors.
async fn execute(
    client: &reqwest::Client,
    job: &GenerationJob,
    key: &str,
    req: PlannedRequest,
) -> Result<GenerationRecord> {
    let mut rec = record(job, &req);
    let mut retry = 0;
    loop {
        match attempt(client, job, key, rec).await? {
            Outcome::Done(r) => return Ok(r),
            Outcome::Retry(r) if retry >= job.max_retries => return Ok(r),
            Outcome::Retry(r) => {
                let delay = job.backoff.delay(retry);
                log::info!(
                    "{} @ {}: {}, retrying in {:.1}s",
                    r.item,
                    r.temperature,
                    r.error.as_deref().unwrap_or("error"),
                    delay.as_secs_f64()
                );
                tokio::time::sleep(delay).await;
                retry += 1;
                rec = r;
            }
        }
    }
}

async fn open_appender(path: &Path) -> Result<tokio::fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        tokio::fs::create_dir_all(dir).await.map_err(|e| Error::io(dir, e))?;
    }
    let file = tokio::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .await
        .map_err(|e| Error::io(path, e))?;
    // a previous run killed mid-write leaves a partial last line; cut it off
    let bytes = tokio::fs::read(path).await.map_err(|e| Error::io(path, e))?;
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        log::warn!(
            "{}: dropping {} bytes of a truncated record",
            path.display(),
            bytes.len() - keep
        );
        file.set_len(keep as u64).await.map_err(|e| Error::io(path, e))?;
    }
    Ok(file)
}

/// Runs every pending request of `job`, appending one JSONL record per
/// outcome to `job.output`. Pairs with a successful record already in the
/// file are skipped, so an interrupted run can simply be restarted.
pub async fn run_job(job: &GenerationJob) -> Result<RunSummary> {
    run_job_with(job, |_| {}).await
}

/// As [`run_job`], calling `on_record` after each record is written.
pub async fn run_job_with<F: FnMut(&GenerationRecord)>(job: &GenerationJob, mut on_record: F) -> Result<RunSummary> {
    let planned = plan(job)?;
    let key = api_key(job)?;
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs_f64(job.request_timeout_secs))
        .build()
        .map_err(|e| Error::Client(e.to_string()))?;
    let mut summary = RunSummary {
        planned: planned.len(),
        ..Default::default()
    };
    let pending: Vec<PlannedRequest> = planned.into_iter().filter(|r| !r.done).collect();
    summary.skipped = summary.planned - pending.len();
    let mut out = open_appender(&job.output).await?;

    let mut results = stream::iter(pending)
        .map(|req| execute(&client, job, &key, req))
        .buffer_unordered(job.concurrency);
    while let Some(rec) = results.next().await {
        let rec = rec?;
        let mut line = serde_json::to_string(&rec).expect("records serialize");
        line.push('\n');
        out.write_all(line.as_bytes())
            .await
            .map_err(|e| Error::io(&job.output, e))?;
        out.flush().await.map_err(|e| Error::io(&job.output, e))?;
        if rec.is_success() {
            summary.succeeded += 1;
        } else {
            summary.failed += 1;
            log::warn!(
                "{} @ {} failed after {} attempts: {}",
                rec.item,
                rec.temperature,
                rec.attempts,
                rec.error.as_deref().unwrap_or("")
            );
        }
        on_record(&rec);
    }
    Ok(summary)
}
