use std::collections::HashSet;
use std::path::{Path, PathBuf};

use entrate_core::ingest::TextUnit;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_tokens: Option<u64>,
}

/// One line of a generation JSONL file. Failures keep `text` empty and set
/// `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub model: String,
    pub temperature: f64,
    pub item: String,
    pub prompt: String,
    pub text: String,
    #[serde(default)]
    pub token_usage: Option<TokenUsage>,
    pub timestamp: String,
    #[serde(default)]
    pub http_status: Option<u16>,
    pub attempts: u32,
    #[serde(default)]
    pub error: Option<String>,
}

impl GenerationRecord {
    pub fn is_success(&self) -> bool {
        self.error.is_none() && !self.text.is_empty()
    }

    pub fn key(&self) -> RecordKey {
        RecordKey::new(&self.model, &self.item, self.temperature)
    }
}

/// Identity of a request within a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RecordKey {
    model: String,
    item: String,
    temperature_bits: u64,
}

impl RecordKey {
    pub fn new(model: &str, item: &str, temperature: f64) -> Self {
        RecordKey {
            model: model.to_owned(),
            item: item.to_owned(),
            // 0.0 and -0.0 are the same request
            temperature_bits: (temperature + 0.0).to_bits(),
        }
    }
}

fn parse_line(line: &str, path: &Path, line_no: usize) -> Result<GenerationRecord> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message: e.to_string(),
    })
}

/// All records of a JSONL file; blank lines are skipped.
pub fn read_records(path: &Path) -> Result<Vec<GenerationRecord>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_line(l, path, i + 1))
        .collect()
}

/// Keys of successful records in `path`. A missing file has none. An
/// unparsable final line is taken to be a write cut short by an interrupted
/// run and ignored; malformed lines elsewhere are errors.
pub fn completed_keys(path: &Path) -> Result<HashSet<RecordKey>> {
    let raw = match std::fs::read_to_string(path) {
        Ok(raw) => raw,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashSet::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let lines: Vec<(usize, &str)> = raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).collect();
    let mut keys = HashSet::new();
    for (pos, &(i, line)) in lines.iter().enumerate() {
        match parse_line(line, path, i + 1) {
            Ok(r) if r.is_success() => {
                keys.insert(r.key());
            }
            Ok(_) => {}
            Err(e) if pos + 1 == lines.len() && !raw.ends_with('\n') => {
                log::warn!("ignoring truncated last record: {e}");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(keys)
}

/// Selects records by model family and temperature. Empty lists and `None`
/// bounds accept everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordFilter {
    /// Case-insensitive substrings of the model name, e.g. `mistral`.
    #[serde(default)]
    pub models: Vec<String>,
    #[serde(default)]
    pub temperatures: Vec<f64>,
    #[serde(default)]
    pub min_temperature: Option<f64>,
    #[serde(default)]
    pub max_temperature: Option<f64>,
}

impl RecordFilter {
    pub fn matches(&self, r: &GenerationRecord) -> bool {
        let model = r.model.to_lowercase();
        let model_ok = self.models.is_empty() || self.models.iter().any(|m| model.contains(&m.to_lowercase()));
        let t = r.temperature;
        let listed = self.temperatures.is_empty() || self.temperatures.iter().any(|&x| (x - t).abs() < 1e-9);
        let above = self.min_temperature.is_none_or(|lo| t >= lo - 1e-9);
        let below = self.max_temperature.is_none_or(|hi| t <= hi + 1e-9);
        model_ok && listed && above && below
    }
}

/// Texts of the successful records in `paths` that pass `filter`, in file
/// order, carrying their model and temperature.
pub fn corpus_from_records(paths: &[PathBuf], filter: &RecordFilter) -> Result<Vec<TextUnit>> {
    let mut units = Vec::new();
    for path in paths {
        for r in read_records(path)? {
            if r.is_success() && filter.matches(&r) {
                units.push(TextUnit {
                    text: r.text,
                    model: Some(r.model),
                    temperature: Some(r.temperature),
                });
            }
        }
    }
    Ok(units)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn rec(model: &str, t: f64, item: &str, text: &str) -> GenerationRecord {
        GenerationRecord {
            model: model.into(),
            temperature: t,
            item: item.into(),
            prompt: format!("Write an essay about {item}"),
            text: text.into(),
            token_usage: None,
            timestamp: "2024-01-01T00:00:00Z".into(),
            http_status: Some(200),
            attempts: 1,
            error: (text.is_empty()).then(|| "boom".to_owned()),
        }
    }

    fn write(dir: &Path, name: &str, records: &[GenerationRecord]) -> PathBuf {
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        for r in records {
            writeln!(f, "{}", serde_json::to_string(r).unwrap()).unwrap();
        }
        path
    }

    #[test]
    fn accumulated_groupings() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.jsonl",
            &[
                rec("mistral-large", 0.3, "x", "one"),
                rec("mistral-large", 1.5, "x", "two"),
                rec("llama-3", 1.0, "x", "three"),
                rec("llama-3", 0.3, "y", ""),
            ],
        );
        let all_low = RecordFilter {
            max_temperature: Some(1.0),
            ..Default::default()
        };
        let texts: Vec<String> = corpus_from_records(std::slice::from_ref(&p), &all_low)
            .unwrap()
            .into_iter()
            .map(|u| u.text)
            .collect();
        assert_eq!(texts, ["one", "three"]);
        let mistral = RecordFilter {
            models: vec!["Mistral".into()],
            temperatures: vec![0.3],
            ..Default::default()
        };
        let units = corpus_from_records(&[p], &mistral).unwrap();
        assert_eq!(units.len(), 1);
        assert_eq!(units[0].model.as_deref(), Some("mistral-large"));
        assert_eq!(units[0].temperature, Some(0.3));
    }

    #[test]
    fn parse_error_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "a.jsonl", &[rec("m", 0.3, "x", "one")]);
        std::fs::OpenOptions::new()
            .append(true)
            .open(&p)
            .unwrap()
            .write_all(b"\n{not json}\n")
            .unwrap();
        match corpus_from_records(&[p], &RecordFilter::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn completed_keys_skip_failures_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.jsonl",
            &[rec("m", 0.3, "x", "one"), rec("m", 0.5, "x", "")],
        );
        std::fs::OpenOptions::new()
            .append(true)
            .open(&p)
            .unwrap()
            .write_all(b"{\"model\":\"m\",\"temp")
            .unwrap();
        let keys = completed_keys(&p).unwrap();
        assert_eq!(keys.len(), 1);
        assert!(keys.contains(&RecordKey::new("m", "x", 0.3)));
        assert!(completed_keys(&dir.path().join("missing.jsonl")).unwrap().is_empty());
    }

    #[test]
    fn record_json_fields() {
        let v = serde_json::to_value(rec("m", 0.7, "x", "t")).unwrap();
        for field in [
            "model",
            "temperature",
            "item",
            "prompt",
            "text",
            "token_usage",
            "timestamp",
            "http_status",
            "attempts",
            "error",
        ] {
            assert!(v.get(field).is_some(), "{field}");
        }
    }
}
