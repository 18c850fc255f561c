use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn entrate(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entrate"))
        .args(args)
        .current_dir(cwd)
        .env_remove("ENTRATE_API_KEY")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = entrate(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], cwd: &Path) -> i32 {
    entrate(args, cwd).status.code().unwrap()
}

fn fit_json(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("fit.json")).unwrap()).unwrap()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["simulate", "-o", name];
    args.extend_from_slice(extra);
    ok(&args, dir);
    dir.join(name)
}

#[test]
fn uniform_binary_file_analyzes_to_one_bit() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        "u.txt",
        &["--alphabet", "2", "--length", "1000000", "--seed", "4"],
    );
    let stdout = ok(&["analyze", "u.txt", "-o", "out"], dir.path());
    assert!(stdout.starts_with("u: c = "));
    let fit = fit_json(&dir.path().join("out"));
    let c = fit["c"].as_f64().unwrap();
    assert!((c - 1.0).abs() <= 0.02, "c = {c}");
    for key in [
        "source",
        "a",
        "b",
        "c",
        "sse",
        "converged",
        "iterations",
        "flags",
        "points",
        "coverage",
        "config",
    ] {
        assert!(fit.get(key).is_some(), "fit.json lacks {key}");
    }
    assert_eq!(fit["points"].as_array().unwrap().len(), 6);
    let csv = std::fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "n,h_bits,total,distinct,coverage"));
    assert!(csv.lines().any(|l| l == "# corpus.inputs = u.txt"));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("entropy rate estimate: c = "));
    assert!(summary.contains("bits/word"));
}

#[test]
fn analysis_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        "m.txt",
        &[
            "--kind",
            "markov",
            "--alphabet",
            "3",
            "--length",
            "50000",
            "--seed",
            "2",
        ],
    );
    ok(&["analyze", "m.txt", "-o", "one", "--chunks", "4"], dir.path());
    ok(&["analyze", "m.txt", "-o", "two", "--chunks", "4"], dir.path());
    for f in ["curve.csv", "fit.json", "summary.txt"] {
        let a = std::fs::read(dir.path().join("one").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("two").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("text.txt"), "The cat sat on the mat. ".repeat(200)).unwrap();
    std::fs::write(
        dir.path().join("run.conf"),
        "# letters, short contexts\ngranularity = letter\nn_max = 4\nmax_missing_mass = 0.2\nout = from-config\n",
    )
    .unwrap();
    ok(
        &["--config", "run.conf", "analyze", "text.txt", "--n-max", "3"],
        dir.path(),
    );
    let fit = fit_json(&dir.path().join("from-config"));
    assert_eq!(fit["granularity"], "letter");
    assert_eq!(fit["config"]["n_max"], 3);
    assert_eq!(fit["config"]["corpus"]["granularity"], "letter");
    assert_eq!(fit["config"]["thresholds"]["max_missing_mass"], 0.2);
    assert_eq!(fit["curve"].as_array().unwrap().len(), 3);

    std::fs::write(dir.path().join("bad.conf"), "n_max = lots\n").unwrap();
    assert_eq!(code(&["--config", "bad.conf", "analyze", "text.txt"], dir.path()), 1);
}

#[test]
fn compare_merges_reports() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        "a.txt",
        &["--alphabet", "4", "--length", "100000", "--seed", "1"],
    );
    simulate(
        dir.path(),
        "b.txt",
        &["--kind", "markov", "--matrix", "0.9,0.1;0.5,0.5", "--length", "100000"],
    );
    ok(&["analyze", "a.txt", "-o", "ra"], dir.path());
    ok(
        &["analyze", "b.txt", "-o", "rb", "--name", "two-state, chain"],
        dir.path(),
    );
    ok(&["compare", "ra", "rb/fit.json", "ra", "-o", "cmp"], dir.path());

    let table = std::fs::read_to_string(dir.path().join("cmp/comparison.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "source,granularity,tokens,n_max,c,a,b,sse,converged,flags");
    assert_eq!(rows.len(), 4);
    assert!(rows[2].starts_with("\"two-state, chain\",word,100000,6,"));
    assert_eq!(rows[1], rows[3]);

    let text = std::fs::read_to_string(dir.path().join("cmp/comparison.txt")).unwrap();
    assert!(text.starts_with("source"));
    assert!(text.contains("c [bits/word]"));

    let plot = std::fs::read_to_string(dir.path().join("cmp/plot_data.csv")).unwrap();
    let plot_rows: Vec<&str> = plot.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(plot_rows[0], "source,n,h,fitted");
    assert_eq!(plot_rows.len(), 1 + 3 * 12);
    assert!(plot_rows[12].starts_with("a,12,,"));
}

#[test]
fn compare_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("t.txt"),
        "one two three four five six seven eight nine ten",
    )
    .unwrap();
    ok(&["analyze", "t.txt", "-o", "w"], dir.path());
    ok(&["analyze", "t.txt", "-o", "l", "--granularity", "letter"], dir.path());
    assert_eq!(code(&["compare", "w"], dir.path()), 1);
    assert_eq!(code(&["compare", "w", "l"], dir.path()), 2);

    let mut fit = fit_json(&dir.path().join("w"));
    fit["schema"] = "something-else/9".into();
    std::fs::write(dir.path().join("other.json"), fit.to_string()).unwrap();
    assert_eq!(code(&["compare", "w", "other.json"], dir.path()), 2);
    std::fs::write(dir.path().join("junk.json"), "{\"schema\": \"entrate-fit/1\"}").unwrap();
    assert_eq!(code(&["compare", "w", "junk.json"], dir.path()), 2);
}

#[test]
fn cached_table_gives_same_fit() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        "m.txt",
        &[
            "--kind",
            "markov",
            "--alphabet",
            "3",
            "--length",
            "30000",
            "--seed",
            "8",
        ],
    );
    ok(&["count", "m.txt", "-o", "cache/m.tsv"], dir.path());
    let table = std::fs::read_to_string(dir.path().join("cache/m.tsv")).unwrap();
    assert!(table.contains("# corpus.inputs = m.txt"));
    ok(&["analyze", "m.txt", "-o", "direct"], dir.path());
    ok(&["analyze", "--table", "cache/m.tsv", "-o", "cached"], dir.path());
    let (a, b) = (
        fit_json(&dir.path().join("direct")),
        fit_json(&dir.path().join("cached")),
    );
    assert_eq!(a["c"], b["c"]);
    assert_eq!(a["curve"], b["curve"]);
    assert_eq!(b["config"]["table"], "cache/m.tsv");
    assert_eq!(
        code(
            &["analyze", "--table", "cache/m.tsv", "--n-max", "7", "-o", "x"],
            dir.path()
        ),
        1
    );
}

#[test]
fn pruned_table_is_marked() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        "m.txt",
        &[
            "--kind",
            "markov",
            "--alphabet",
            "6",
            "--length",
            "20000",
            "--seed",
            "1",
        ],
    );
    ok(&["count", "m.txt", "-o", "p.tsv", "--prune-min-count", "3"], dir.path());
    ok(&["analyze", "--table", "p.tsv", "-o", "out"], dir.path());
    let flags = fit_json(&dir.path().join("out"))["flags"].to_string();
    assert!(flags.contains("LOWER_BOUND_BIASED"), "{flags}");
}

#[test]
fn short_sample_is_flagged_undersampled() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        "m8.txt",
        &[
            "--kind",
            "markov",
            "--alphabet",
            "8",
            "--length",
            "10000",
            "--seed",
            "3",
        ],
    );
    ok(&["analyze", "m8.txt", "-o", "out"], dir.path());
    let summary = std::fs::read_to_string(dir.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("UNDERSAMPLED"));
    assert!(summary.contains("undersampled orders:"));
}

#[test]
fn generation_records_are_filtered_by_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = String::new();
    for (i, t) in [0.3, 0.7, 0.3, 1.5].iter().enumerate() {
        let text = if i == 3 {
            String::new()
        } else {
            format!("essay number {i} about things and more things")
        };
        lines.push_str(&format!(
            "{{\"model\":\"fam-large\",\"temperature\":{t},\"item\":\"x{i}\",\"prompt\":\"p\",\"text\":\"{text}\",\"token_usage\":null,\"timestamp\":\"2024-01-01T00:00:00Z\",\"http_status\":200,\"attempts\":1,\"error\":null}}\n"
        ));
    }
    std::fs::create_dir(dir.path().join("gen")).unwrap();
    std::fs::write(dir.path().join("gen/fam-large.jsonl"), lines).unwrap();
    ok(
        &[
            "analyze",
            "gen",
            "--include",
            "*.jsonl",
            "--temps",
            "0.3",
            "--n-max",
            "3",
            "-o",
            "out",
        ],
        dir.path(),
    );
    let fit = fit_json(&dir.path().join("out"));
    assert_eq!(fit["tokens"], 16);
    assert_eq!(fit["config"]["corpus"]["filter"]["temperatures"][0], 0.3);

    assert_eq!(
        code(
            &[
                "analyze",
                "gen",
                "--include",
                "*.jsonl",
                "--models",
                "other",
                "-o",
                "none"
            ],
            dir.path()
        ),
        2
    );
    std::fs::write(dir.path().join("gen/broken.jsonl"), "{\"model\": \n").unwrap();
    let out = entrate(&["analyze", "gen", "--include", "*.jsonl", "-o", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.jsonl:1"));
}

#[test]
fn dry_run_prints_plan_without_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("items.txt"), "France\nChile\n").unwrap();
    let stdout = ok(
        &[
            "generate",
            "--endpoint",
            "http://127.0.0.1:9/v1/chat/completions",
            "--model",
            "m1,m2",
            "--items",
            "items.txt",
            "--temps",
            "0.3,0.5,0.7",
            "--dry-run",
        ],
        dir.path(),
    );
    let posts: Vec<&str> = stdout.lines().filter(|l| l.starts_with("POST ")).collect();
    assert_eq!(posts.len(), 12);
    assert!(posts[0].contains("\"content\":\"Write an essay about France\""));
    assert!(stdout.contains("m2.jsonl"));
    assert!(!dir.path().join("generated").exists());

    let bundled = ok(
        &[
            "generate",
            "--endpoint",
            "http://x/v1",
            "--model",
            "m",
            "--items",
            "constants",
            "--temps",
            "1.0",
            "--dry-run",
        ],
        dir.path(),
    );
    assert_eq!(bundled.lines().filter(|l| l.starts_with("POST ")).count(), 54);
}

#[test]
fn generate_usage_and_auth_errors() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "generate",
        "--endpoint",
        "http://127.0.0.1:9/v1/chat/completions",
        "--model",
        "m",
        "--items",
        "countries",
    ];
    let with = |extra: &[&str]| {
        let mut v = base.to_vec();
        v.extend_from_slice(extra);
        code(&v, dir.path())
    };
    assert_eq!(with(&[]), 3, "missing API key");
    assert_eq!(with(&["--temps", "2.5"]), 1);
    assert_eq!(with(&["--template", "no placeholder"]), 1);
    assert_eq!(
        code(&["generate", "--model", "m", "--items", "countries"], dir.path()),
        1
    );
    assert_eq!(
        code(
            &[
                "generate",
                "--endpoint",
                "http://x",
                "--model",
                "m",
                "--items",
                "planets"
            ],
            dir.path()
        ),
        1
    );
}

#[test]
fn simulate_writes_rate_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        "s.txt",
        &["--kind", "markov", "--matrix", "0.9,0.1;0.5,0.5", "--length", "100"],
    );
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert!((meta["entropy_rate_bits"].as_f64().unwrap() - 0.557497).abs() < 1e-6);
    let text = std::fs::read_to_string(dir.path().join("s.txt")).unwrap();
    assert_eq!(text.split_whitespace().count(), 100);
    assert_eq!(
        code(
            &["simulate", "--kind", "markov", "--matrix", "0.9,0.2;0.5,0.5"],
            dir.path()
        ),
        1
    );
}
