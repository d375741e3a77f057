//! End-to-end runs of the `anchored` binary: exit codes, determinism and the
//! preset summaries pinned in `tests/golden`. Regenerate the summaries with
//! `UPDATE_GOLDEN=1 cargo test -p anchored-cli`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
[problem]
kind = "almost_bilinear"
epsilon = 0.01

[execution]
max_iter = 300
seeds = [3, 4]
output = "out"

[[solver]]
family = "eag_moving"
anchor = "minus"

[[solver]]
family = "popov_v2"
anchor = "minus"
"#;

fn anchored(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anchored"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn run_then_verify_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = anchored(&["run", &cfg]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir
        .path()
        .join("out/traces/eag_moving_minus_seed3.csv")
        .exists());
    assert!(dir
        .path()
        .join("out/traces/popov_v2_minus_seed4.csv")
        .exists());
    assert!(dir.path().join("out/plot.py").exists());

    let out = anchored(&["verify", &cfg]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{text}");
    let descent = text
        .lines()
        .find(|l| l.contains("eag_moving_minus") && l.contains("descent"))
        .unwrap();
    assert!(descent.starts_with("PASS"), "{descent}");
    assert!(text.contains("precondition unmet, skipped"), "{text}");
}

#[test]
fn invalid_config_exits_2_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("seeds = [3, 4]", "seeds = []"));
    let out = anchored(&["run", &cfg]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("execution.seeds"));
    assert!(!dir.path().join("out").exists());

    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&anchored(&["run", missing.to_str().unwrap()])), 2);
    let cfg = write_config(dir.path(), "[problem\n");
    assert_eq!(code(&anchored(&["run", &cfg])), 2);
}

#[test]
fn divergence_exits_3_and_keeps_partial_traces() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG
        .replace("max_iter = 300", "max_iter = 100000")
        .replace(
            "family = \"popov_v2\"\nanchor = \"minus\"",
            "family = \"reflected\"\nreflected_eta = 50.0",
        );
    let cfg = write_config(dir.path(), &text);
    let out = anchored(&["run", &cfg]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("reflected_fixed"));
    let partial =
        fs::read_to_string(dir.path().join("out/traces/reflected_fixed_seed3.csv")).unwrap();
    assert!(partial.lines().count() > 5);
    assert!(dir.path().join("out/summary.csv").exists());
}

#[test]
fn missing_or_corrupt_traces_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = anchored(&["verify", &cfg]);
    assert_eq!(code(&out), 4);

    assert_eq!(code(&anchored(&["run", &cfg])), 0);
    let victim = dir.path().join("out/traces/popov_v2_minus_seed3.csv");
    let text = fs::read_to_string(&victim).unwrap();
    fs::write(&victim, &text[..text.len() / 2]).unwrap();
    let out = anchored(&["verify", &cfg]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("popov_v2_minus_seed3.csv"));
}

#[test]
fn unknown_preset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = anchored(&["preset", "figure4", "--out", dir.path().to_str().unwrap()]);
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("figure1"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

fn run_preset(name: &str, dir: &Path, extra: &[&str]) {
    let mut args = vec!["preset", name, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = anchored(&args);
    assert_eq!(
        code(&out),
        0,
        "{name}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn preset_output_is_independent_of_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_preset("figure1", a.path(), &[]);
    run_preset("figure1", b.path(), &["--workers", "4"]);
    let (fa, fb) = (files(a.path()), files(b.path()));
    // config.toml records the worker count, everything else must match.
    let strip = |v: Vec<(PathBuf, Vec<u8>)>| -> Vec<_> {
        v.into_iter()
            .filter(|(p, _)| p != Path::new("config.toml"))
            .collect()
    };
    let (fa, fb) = (strip(fa), strip(fb));
    assert_eq!(fa.len(), 3 * 32 + 3);
    assert!(fa == fb, "outputs differ between --workers 1 and 4");
}

#[test]
fn seed_base_shifts_the_seeds() {
    let dir = tempfile::tempdir().unwrap();
    run_preset("figure1", dir.path(), &["--seed-base", "1000"]);
    assert!(dir
        .path()
        .join("traces/eag_stochastic_minus_seed1000.csv")
        .exists());
    assert!(dir
        .path()
        .join("traces/eag_stochastic_minus_seed1031.csv")
        .exists());
    assert!(!dir
        .path()
        .join("traces/eag_stochastic_minus_seed0.csv")
        .exists());
    let config = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(config.contains("1031"), "{config}");
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn summary_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn preset_summaries_match_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for name in ["figure1", "figure2", "figure3"] {
        let dir = tempfile::tempdir().unwrap();
        run_preset(name, dir.path(), &[]);
        let summary = fs::read(dir.path().join("summary.csv")).unwrap();
        let path = golden(&format!("{name}_summary.csv"));
        if update {
            fs::write(&path, &summary).unwrap();
        } else {
            let stored = fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(
                stored == summary,
                "{name}: summary differs from {}",
                path.display()
            );
        }
        if name == "figure3" {
            // Both moving variants reach the tolerance; fixed Popov needs longer.
            let rows = summary_rows(&String::from_utf8(summary).unwrap());
            let iters = |label: &str| -> usize {
                let row = rows.iter().find(|r| r[0] == label).unwrap();
                row[3].parse().unwrap_or(usize::MAX)
            };
            let fixed = iters("popov_fixed_fixed");
            assert!(iters("popov_v1_minus") < fixed && iters("popov_v2_minus") < fixed);
        }
    }
}
