//! Corpus discovery and loading.
//!
//! A corpus is a directory tree of UTF-8 `.txt` files, or of generation JSONL
//! files whose records carry a `text` field. Files are processed in
//! lexicographic order of their `/`-separated paths relative to the root, and
//! their texts are joined with a single space before tokenization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::tokenize::{count_words, tokenize, Granularity, TokenStream};

pub const DEFAULT_INCLUDE: &str = "*.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Written,
    Spoken,
    Generated,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Written => "written",
            Partition::Spoken => "spoken",
            Partition::Generated => "generated",
        })
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "written" => Ok(Partition::Written),
            "spoken" => Ok(Partition::Spoken),
            "generated" => Ok(Partition::Generated),
            other => Err(format!("unknown partition {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    /// Path relative to the manifest root, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub words: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub root: PathBuf,
    pub include: Vec<String>,
    pub exclude: Vec<String>,
    pub declared_partition: Option<Partition>,
    pub files: Vec<ManifestFile>,
    pub word_count: u64,
}

/// One unit of analyzable text with optional generation provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextUnit {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl TextUnit {
    pub fn plain(text: impl Into<String>) -> Self {
        TextUnit {
            text: text.into(),
            model: None,
            temperature: None,
        }
    }
}

fn glob_set(patterns: &[String]) -> Result<GlobSet> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob = Glob::new(p).map_err(|e| Error::BadGlob {
            pattern: p.clone(),
            reason: e.to_string(),
        })?;
        builder.add(glob);
    }
    builder.build().map_err(|e| Error::BadGlob {
        pattern: patterns.join(","),
        reason: e.to_string(),
    })
}

fn relative_slash_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn is_jsonl(path: &str) -> bool {
    path.ends_with(".jsonl")
}

/// Reads the text units of one file: the whole payload for plain text, one
/// unit per non-empty `text` record for `.jsonl`.
pub fn read_units(path: &Path) -> Result<Vec<TextUnit>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if !path.to_string_lossy().ends_with(".jsonl") {
        return Ok(vec![TextUnit::plain(raw)]);
    }
    parse_jsonl_units(&raw, path)
}

/// Extracts `text`, `model` and `temperature` from JSONL records. Records
/// with an empty or missing `text` (failed generations) are skipped.
pub fn parse_jsonl_units(raw: &str, origin: &Path) -> Result<Vec<TextUnit>> {
    let mut units = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let text = value.get("text").and_then(|t| t.as_str()).unwrap_or_default();
        if text.is_empty() {
            continue;
        }
        units.push(TextUnit {
            text: text.to_owned(),
            model: value.get("model").and_then(|m| m.as_str()).map(str::to_owned),
            temperature: value.get("temperature").and_then(|t| t.as_f64()),
        });
    }
    Ok(units)
}

/// Recursively lists files under `root` matching `include` and not
/// `exclude`, sorted by relative path, with per-file word counts. An empty
/// `include` means `*.txt`. A `root` that is a single file yields a
/// one-file manifest rooted at its parent directory.
pub fn scan_corpus(root: &Path, include: &[String], exclude: &[String]) -> Result<CorpusManifest> {
    if !root.exists() {
        return Err(Error::RootNotFound(root.to_path_buf()));
    }
    let include: Vec<String> = if include.is_empty() {
        vec![DEFAULT_INCLUDE.to_owned()]
    } else {
        include.to_vec()
    };
    let inc = glob_set(&include)?;
    let exc = glob_set(exclude)?;

    let (base, mut rel_paths): (PathBuf, Vec<String>) = if root.is_file() {
        let base = root.parent().map(Path::to_path_buf).unwrap_or_default();
        (base.clone(), vec![relative_slash_path(&base, root)])
    } else {
        let mut found = Vec::new();
        for entry in WalkDir::new(root).follow_links(true) {
            let entry = entry.map_err(|e| {
                let path = e.path().unwrap_or(root).to_path_buf();
                Error::io(path, e.into())
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = relative_slash_path(root, entry.path());
            if inc.is_match(&rel) && !exc.is_match(&rel) {
                found.push(rel);
            }
        }
        (root.to_path_buf(), found)
    };
    rel_paths.sort();
    if rel_paths.is_empty() {
        return Err(Error::NoFilesMatched(root.to_path_buf()));
    }

    let files = rel_paths
        .into_par_iter()
        .map(|rel| {
            let full = base.join(&rel);
            let bytes = std::fs::metadata(&full).map_err(|e| Error::io(&full, e))?.len();
            let words = read_units(&full)?.iter().map(|u| count_words(&u.text) as u64).sum();
            Ok(ManifestFile {
                path: rel,
                bytes,
                words,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let word_count = files.iter().map(|f| f.words).sum();
    Ok(CorpusManifest {
        root: base,
        include,
        exclude: exclude.to_vec(),
        declared_partition: None,
        files,
        word_count,
    })
}

impl CorpusManifest {
    pub fn with_partition(mut self, partition: Partition) -> Self {
        self.declared_partition = Some(partition);
        self
    }

    pub fn paths(&self) -> impl Iterator<Item = PathBuf> + '_ {
        self.files.iter().map(|f| self.root.join(&f.path))
    }

    pub fn has_generated_records(&self) -> bool {
        self.files.iter().any(|f| is_jsonl(&f.path))
    }

    /// All text units in manifest order.
    pub fn read_units(&self) -> Result<Vec<TextUnit>> {
        let per_file = self
            .paths()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|p| read_units(&p))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_file.into_iter().flatten().collect())
    }
}

/// Joins `units` with single spaces and tokenizes the result. Models and
/// temperatures found in the units are recorded in the stream metadata as
/// sorted comma-separated lists.
pub fn stream_from_units(units: &[TextUnit], granularity: Granularity) -> TokenStream {
    let joined = units.iter().map(|u| u.text.as_str()).collect::<Vec<_>>().join(" ");
    let mut stream = tokenize(&joined, granularity);
    let models: BTreeSet<&str> = units.iter().filter_map(|u| u.model.as_deref()).collect();
    let temps: BTreeSet<String> = units
        .iter()
        .filter_map(|u| u.temperature)
        .map(|t| format!("{t}"))
        .collect();
    if !models.is_empty() {
        stream
            .source_meta
            .insert("model".into(), models.into_iter().collect::<Vec<_>>().join(","));
    }
    if !temps.is_empty() {
        let mut temps: Vec<String> = temps.into_iter().collect();
        temps.sort_by(|a, b| a.parse::<f64>().unwrap_or(0.0).total_cmp(&b.parse().unwrap_or(0.0)));
        stream.source_meta.insert("temperature".into(), temps.join(","));
    }
    stream.source_meta.insert("granularity".into(), granularity.to_string());
    stream
}

/// Loads every file of the manifest as one concatenated stream.
pub fn load_stream(manifest: &CorpusManifest, granularity: Granularity) -> Result<TokenStream> {
    if manifest.files.is_empty() {
        return Err(Error::NoFilesMatched(manifest.root.clone()));
    }
    let units = manifest.read_units()?;
    let mut stream = stream_from_units(&units, granularity);
    let meta: BTreeMap<String, String> = [
        ("corpus".to_owned(), manifest.root.to_string_lossy().replace('\\', "/")),
        ("files".to_owned(), manifest.files.len().to_string()),
    ]
    .into_iter()
    .chain(
        manifest
            .declared_partition
            .map(|p| ("partition".to_owned(), p.to_string())),
    )
    .collect();
    stream.source_meta.extend(meta);
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, rel: &str, body: &str) {
        let p = dir.join(rel);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, body).unwrap();
    }

    #[test]
    fn empty_dir_has_no_files() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(scan_corpus(d.path(), &[], &[]), Err(Error::NoFilesMatched(_))));
    }

    #[test]
    fn missing_root() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(
            scan_corpus(&d.path().join("nope"), &[], &[]),
            Err(Error::RootNotFound(_))
        ));
    }

    #[test]
    fn two_files_concatenate() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "b.txt", "c");
        write(d.path(), "a.txt", "a b");
        write(d.path(), "a.xml", "<ignored/>");
        let m = scan_corpus(d.path(), &[], &[]).unwrap();
        assert_eq!(
            m.files.iter().map(|f| f.path.as_str()).collect::<Vec<_>>(),
            ["a.txt", "b.txt"]
        );
        assert_eq!(m.word_count, 3);
        let s = load_stream(&m, Granularity::Word).unwrap();
        assert_eq!(s.surfaces().collect::<Vec<_>>(), ["a", "b", "c"]);
        assert_eq!(s, load_stream(&m, Granularity::Word).unwrap());
        assert_eq!(s.len() as u64, m.word_count);
        // letters: joiner contributes one space
        let l = load_stream(&m, Granularity::Letter).unwrap();
        assert_eq!(l.detokenize(), "a b c");
    }

    #[test]
    fn nested_sorted_and_excluded() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "z/1.txt", "one");
        write(d.path(), "a/2.txt", "two");
        write(d.path(), "a/skip/3.txt", "three");
        let m = scan_corpus(d.path(), &["**/*.txt".into()], &["**/skip/**".into()]).unwrap();
        let paths: Vec<_> = m.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["a/2.txt", "z/1.txt"]);
        assert!(matches!(
            scan_corpus(d.path(), &["[".into()], &[]),
            Err(Error::BadGlob { .. })
        ));
    }

    #[test]
    fn single_file_root() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "only.dat", "x y z");
        let m = scan_corpus(&d.path().join("only.dat"), &[], &[]).unwrap();
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.word_count, 3);
    }

    #[test]
    fn jsonl_records() {
        let d = tempfile::tempdir().unwrap();
        let body = [
            r#"{"model":"m1","temperature":0.3,"item":"France","text":"Paris is big."}"#,
            r#"{"model":"m1","temperature":0.3,"item":"Chad","text":"","error":"timeout"}"#,
            "",
            r#"{"model":"m2","temperature":0.7,"item":"Peru","text":"Lima."}"#,
        ]
        .join("\n");
        write(d.path(), "gen.jsonl", &body);
        let m = scan_corpus(d.path(), &["*.jsonl".into()], &[])
            .unwrap()
            .with_partition(Partition::Generated);
        assert_eq!(m.word_count, 4);
        let s = load_stream(&m, Granularity::Word).unwrap();
        assert_eq!(s.detokenize(), "paris is big lima");
        assert_eq!(s.source_meta["model"], "m1,m2");
        assert_eq!(s.source_meta["temperature"], "0.3,0.7");
        assert_eq!(s.source_meta["partition"], "generated");
    }

    #[test]
    fn jsonl_parse_error_names_line() {
        let err = parse_jsonl_units("{\"text\":\"a\"}\nnot json\n", Path::new("g.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn manifest_json() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "a.txt", "hello there");
        let m = scan_corpus(d.path(), &[], &[]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: CorpusManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
