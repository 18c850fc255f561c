use entrate_core::diagnose::undersampled_orders;
use entrate_core::fit::FitPoint;
use entrate_core::{CoverageReport64, CurvePoint, EntropyCurve64, ExpFit64, FitFlag, Granularity, Thresholds64};
use serde::{Deserialize, Serialize};

pub const FIT_SCHEMA: &str = "entrate-fit/1";

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: String,
    pub source: String,
    pub granularity: Granularity,
    /// Tokens in the analyzed stream.
    pub tokens: u64,
    pub vocabulary: u64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub sse: f64,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<FitFlag>,
    pub points: Vec<FitPoint<f64>>,
    pub curve: Vec<CurvePoint<f64>>,
    pub coverage: CoverageReport64,
    pub undersampled_orders: Vec<usize>,
    /// Effective configuration of the run that produced this report.
    pub config: serde_json::Value,
}

impl FitReport {
    pub fn new(
        source: String,
        curve: &EntropyCurve64,
        coverage: CoverageReport64,
        thresholds: &Thresholds64,
        fit: ExpFit64,
        vocabulary: u64,
        config: serde_json::Value,
    ) -> FitReport {
        FitReport {
            schema: FIT_SCHEMA.into(),
            source,
            granularity: curve.granularity,
            tokens: curve.points.first().map_or(0, |p| p.total),
            vocabulary,
            a: fit.a,
            b: fit.b,
            c: fit.c,
            sse: fit.sse,
            converged: fit.converged,
            iterations: fit.iterations,
            flags: fit.flags,
            points: fit.points,
            curve: curve.points.clone(),
            undersampled_orders: undersampled_orders(&coverage, thresholds),
            coverage,
            config,
        }
    }

    pub fn fitted(&self, n: f64) -> f64 {
        self.a * (-self.b * n).exp() + self.c
    }

    pub fn unit(&self) -> String {
        format!("bits/{}", self.granularity)
    }

    pub fn flag_list(&self, sep: &str) -> String {
        if self.flags.is_empty() {
            return String::new();
        }
        self.flags.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(sep)
    }
}

/// Renders rows as space-padded columns, numbers right-aligned.
pub fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let numeric = |s: &str| s.parse::<f64>().is_ok();
    // a column is right-aligned, header included, when every non-empty cell is a number
    let right: Vec<bool> = (0..widths.len())
        .map(|i| {
            let cells: Vec<&str> = rows.iter().filter_map(|r| r.get(i)).map(String::as_str).collect();
            cells.iter().any(|c| !c.is_empty()) && cells.iter().all(|c| c.is_empty() || numeric(c))
        })
        .collect();
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths.iter().zip(&right))
            .map(|(c, (&w, &r))| if r { format!("{c:>w$}") } else { format!("{c:<w$}") })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

/// Config echo as `key = value` lines, nested keys joined with `.`.
pub fn config_lines(config: &serde_json::Value) -> Vec<String> {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut Vec<String>) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, v) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, v, out);
                }
            }
            serde_json::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                out.push(format!("{prefix} = {}", parts.join(",")));
            }
            serde_json::Value::String(s) => out.push(format!("{prefix} = {s}")),
            serde_json::Value::Null => out.push(format!("{prefix} =")),
            other => out.push(format!("{prefix} = {other}")),
        }
    }
    let mut out = Vec::new();
    walk("", config, &mut out);
    out.iter().map(|l| l.trim_end().to_owned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment() {
        let t = aligned(
            &["source", "c"],
            &[vec!["x".into(), "0.5".into()], vec!["long name".into(), "12".into()]],
        );
        assert_eq!(t, "source       c\nx          0.5\nlong name   12\n");
    }

    #[test]
    fn flattened_config() {
        let v = serde_json::json!({"a": 1, "b": {"c": [1, 2], "d": null, "e": "x", "f": []}});
        assert_eq!(config_lines(&v), ["a = 1", "b.c = 1,2", "b.d =", "b.e = x", "b.f ="]);
    }
}
