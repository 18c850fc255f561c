use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use crate::config::Settings;
use crate::corpus::slash;
use crate::failure::{write_error, Failure};
use crate::report::{aligned, config_lines, FitReport, FIT_SCHEMA};

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// fit.json files, or analysis directories containing one
    pub inputs: Vec<PathBuf>,
    /// Output directory [default: comparison]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Evaluate fitted curves up to this n in the plot data [default: 12]
    #[arg(long)]
    pub extend: Option<usize>,
}

#[derive(Debug, Serialize)]
struct CompareConfig {
    inputs: Vec<String>,
    extend: usize,
}

fn schema_mismatch(path: &Path, why: impl std::fmt::Display) -> Failure {
    Failure::Data(anyhow::anyhow!("schema mismatch in {}: {why}", path.display()))
}

fn read_report(input: &Path) -> Result<FitReport, Failure> {
    let path = if input.is_dir() {
        input.join("fit.json")
    } else {
        input.to_path_buf()
    };
    let raw = std::fs::read_to_string(&path).map_err(|e| Failure::Data(anyhow::anyhow!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&raw).map_err(|e| schema_mismatch(&path, e))?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(FIT_SCHEMA) => {}
        Some(other) => return Err(schema_mismatch(&path, format!("expected {FIT_SCHEMA}, found {other}"))),
        None => return Err(schema_mismatch(&path, "not a fit report")),
    }
    serde_json::from_value(value).map_err(|e| schema_mismatch(&path, e))
}

fn csv_bytes(comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut buf = Vec::new();
    for c in comments {
        writeln!(buf, "# {c}").expect("writing to memory");
    }
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub fn run(args: CompareArgs, s: &Settings) -> Result<(), Failure> {
    let inputs: Vec<PathBuf> = s.pick_list(args.inputs, "inputs")?;
    let out: PathBuf = s.pick_or(args.out, "out", PathBuf::from("comparison"))?;
    let extend: usize = s.pick_or(args.extend, "extend", 12)?;
    if inputs.len() < 2 {
        return Err(Failure::Usage(format!(
            "too few inputs: compare needs at least 2 fit reports, got {}",
            inputs.len()
        )));
    }
    let reports = inputs.iter().map(|p| read_report(p)).collect::<Result<Vec<_>, _>>()?;
    if let Some(r) = reports
        .iter()
        .zip(&inputs)
        .find(|(r, _)| r.granularity != reports[0].granularity)
    {
        return Err(schema_mismatch(
            r.1,
            format!(
                "granularity {} differs from {}",
                r.0.granularity, reports[0].granularity
            ),
        ));
    }

    let config = CompareConfig {
        inputs: inputs.iter().map(|p| slash(p)).collect(),
        extend,
    };
    let echo = config_lines(&serde_json::to_value(&config).expect("config serializes"));
    let unit = reports[0].unit();

    let table_rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.source.clone(),
                r.granularity.to_string(),
                r.tokens.to_string(),
                r.curve.len().to_string(),
                r.c.to_string(),
                r.a.to_string(),
                r.b.to_string(),
                r.sse.to_string(),
                r.converged.to_string(),
                r.flag_list("|"),
            ]
        })
        .collect();
    let header = [
        "source",
        "granularity",
        "tokens",
        "n_max",
        "c",
        "a",
        "b",
        "sse",
        "converged",
        "flags",
    ];

    let text_rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.source.clone(),
                r.tokens.to_string(),
                format!("{:.3}", r.c),
                if r.flags.is_empty() {
                    "-".into()
                } else {
                    r.flag_list(", ")
                },
            ]
        })
        .collect();
    let mut text = aligned(&["source", "tokens", &format!("c [{unit}]"), "flags"], &text_rows);
    text.push_str("\nconfig:\n");
    for line in &echo {
        text.push_str(&format!("  {line}\n"));
    }

    let mut plot_rows = Vec::new();
    for r in &reports {
        let last = r.curve.iter().map(|p| p.n).max().unwrap_or(0).max(extend);
        for n in 1..=last {
            let h = r
                .curve
                .iter()
                .find(|p| p.n == n)
                .map_or(String::new(), |p| p.h.to_string());
            plot_rows.push(vec![r.source.clone(), n.to_string(), h, r.fitted(n as f64).to_string()]);
        }
    }

    std::fs::create_dir_all(&out).map_err(|e| write_error(&out, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = out.join(name);
        std::fs::write(&path, bytes).map_err(|e| write_error(&path, e))
    };
    write("comparison.csv", &csv_bytes(&echo, &header, &table_rows))?;
    write("comparison.txt", text.as_bytes())?;
    write(
        "plot_data.csv",
        &csv_bytes(&echo, &["source", "n", "h", "fitted"], &plot_rows),
    )?;
    print!(
        "{}",
        aligned(&["source", "tokens", &format!("c [{unit}]"), "flags"], &text_rows)
    );
    Ok(())
}
