use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{completed_keys, RecordKey};

pub const PLACEHOLDER: &str = "{item}";
pub const DEFAULT_API_KEY_ENV: &str = "ENTRATE_API_KEY";
pub const DEFAULT_TEMPERATURES: [f64; 3] = [0.3, 0.5, 0.7];

/// Exponential retry delays: `initial · factor^k`, capped at `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Backoff {
    pub initial_secs: f64,
    pub factor: f64,
    pub max_secs: f64,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            initial_secs: 1.0,
            factor: 2.0,
            max_secs: 60.0,
        }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let secs = self.initial_secs * self.factor.powi(retry.min(1024) as i32);
        Duration::from_secs_f64(secs.min(self.max_secs).max(0.0))
    }
}

/// One model swept over items × temperatures. Only `model`, `messages` and
/// `temperature` are sent; every other sampling parameter is left to the
/// provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    pub prompt_template: String,
    pub items: Vec<String>,
    pub temperatures: Vec<f64>,
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub request_timeout_secs: f64,
    pub concurrency: usize,
    pub backoff: Backoff,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub output: PathBuf,
}

impl GenerationJob {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, output: impl Into<PathBuf>) -> Self {
        GenerationJob {
            endpoint: endpoint.into(),
            model: model.into(),
            prompt_template: "Write an essay about {item}".into(),
            items: Vec::new(),
            temperatures: DEFAULT_TEMPERATURES.to_vec(),
            max_retries: 5,
            request_timeout_secs: 300.0,
            concurrency: 4,
            backoff: Backoff::default(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            output: output.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_template(&self.prompt_template)?;
        if self.temperatures.is_empty() {
            return Err(Error::NoTemperatures);
        }
        if let Some(&t) = self.temperatures.iter().find(|t| !(0.0..=2.0).contains(*t)) {
            return Err(Error::Temperature(t));
        }
        if self.concurrency == 0 {
            return Err(Error::ZeroConcurrency);
        }
        Ok(())
    }

    pub fn prompt(&self, item: &str) -> String {
        self.prompt_template.replacen(PLACEHOLDER, item, 1)
    }
}

pub fn validate_template(template: &str) -> Result<()> {
    match template.matches(PLACEHOLDER).count() {
        1 => Ok(()),
        n => Err(Error::Placeholder(n)),
    }
}

/// The exact body sent for one request.
pub fn request_body(model: &str, prompt: &str, temperature: f64) -> serde_json::Value {
    serde_json::json!({
        "model": model,
        "messages": [{ "role": "user", "content": prompt }],
        "temperature": temperature,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedRequest {
    pub item: String,
    pub temperature: f64,
    pub prompt: String,
    /// A successful record for this pair already exists in the output.
    pub done: bool,
}

impl PlannedRequest {
    pub fn key(&self, model: &str) -> RecordKey {
        RecordKey::new(model, &self.item, self.temperature)
    }
}

/// Every (item, temperature) pair in item-major order, marked against the
/// records already present in the job's output file.
pub fn plan(job: &GenerationJob) -> Result<Vec<PlannedRequest>> {
    job.validate()?;
    let done = completed_keys(&job.output)?;
    Ok(job
        .items
        .iter()
        .flat_map(|item| job.temperatures.iter().map(move |&t| (item, t)))
        .map(|(item, temperature)| {
            let prompt = job.prompt(item);
            let done = done.contains(&RecordKey::new(&job.model, item, temperature));
            PlannedRequest {
                item: item.clone(),
                temperature,
                prompt,
                done,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job() -> GenerationJob {
        GenerationJob::new("http://localhost/v1/chat/completions", "m", "/nonexistent/out.jsonl")
    }

    #[test]
    fn essay_prompt() {
        assert_eq!(job().prompt("France"), "Write an essay about France");
    }

    #[test]
    fn placeholder_count() {
        assert!(validate_template("about {item}").is_ok());
        assert!(matches!(validate_template("about"), Err(Error::Placeholder(0))));
        assert!(matches!(
            validate_template("{item} and {item}"),
            Err(Error::Placeholder(2))
        ));
    }

    #[test]
    fn temperature_range() {
        let mut j = job();
        j.temperatures = vec![0.0, 2.0];
        assert!(j.validate().is_ok());
        j.temperatures = vec![0.5, 2.1];
        assert!(matches!(j.validate(), Err(Error::Temperature(t)) if t == 2.1));
        j.temperatures.clear();
        assert!(matches!(j.validate(), Err(Error::NoTemperatures)));
    }

    #[test]
    fn plan_is_item_major() {
        let mut j = job();
        j.items = vec!["a".into(), "b".into()];
        j.temperatures = vec![0.3, 0.7];
        let p = plan(&j).unwrap();
        let pairs: Vec<(&str, f64)> = p.iter().map(|r| (r.item.as_str(), r.temperature)).collect();
        assert_eq!(pairs, [("a", 0.3), ("a", 0.7), ("b", 0.3), ("b", 0.7)]);
        assert!(p.iter().all(|r| !r.done));
    }

    #[test]
    fn empty_items_plan_nothing() {
        assert!(plan(&job()).unwrap().is_empty());
    }

    #[test]
    fn body_has_three_fields() {
        let body = request_body("m", "hi", 0.5);
        let keys: Vec<&String> = body.as_object().unwrap().keys().collect();
        assert_eq!(keys.len(), 3);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["temperature"], 0.5);
    }

    #[test]
    fn backoff_doubles_to_cap() {
        let b = Backoff::default();
        let secs: Vec<f64> = (0..8).map(|k| b.delay(k).as_secs_f64()).collect();
        assert_eq!(secs, [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 60.0, 60.0]);
    }
}
