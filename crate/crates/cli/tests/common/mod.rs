#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    /// Run directory announced in the summary, or on stderr after a failure.
    pub fn run_dir(&self, cwd: &Path) -> PathBuf {
        let rel = self
            .stdout
            .lines()
            .chain(self.stderr.lines())
            .find_map(|l| l.strip_prefix("run directory: "))
            .unwrap_or_else(|| panic!("no run directory in {:?} / {:?}", self.stdout, self.stderr));
        cwd.join(rel)
    }

    pub fn result(&self, cwd: &Path) -> serde_json::Value {
        let text = fs::read_to_string(self.run_dir(cwd).join("result.json")).unwrap();
        serde_json::from_str(&text).unwrap()
    }
}

pub fn schedrag(cwd: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_schedrag"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

/// Runs and requires exit code 0.
pub fn ok(cwd: &Path, args: &[&str]) -> Output {
    let out = schedrag(cwd, args);
    assert_eq!(out.code, 0, "{args:?} failed: {}", out.stderr);
    out
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Copies the fixture files into `dir` so that runs can use relative paths.
pub fn stage_fixtures(dir: &Path) {
    fs::create_dir_all(dir.join("corpus")).unwrap();
    for name in ["chain.csv", "terms.tsv", "corpus/concrete.txt", "corpus/services.txt"] {
        fs::copy(fixture(name), dir.join(name)).unwrap();
    }
}

/// Relative path to every file under `root` mapped to its bytes.
pub fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_owned()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// The `generate → build-kb → sample-context → run-eval → collect-prefs →
/// train-scorer` pipeline with mock gateways, run inside `cwd` with relative
/// paths only.
pub fn full_pipeline(cwd: &Path, n: usize) {
    stage_fixtures(cwd);
    let n = n.to_string();
    let generated = ok(cwd, &["generate", "--n", &n, "--seed", "42"]);
    let schedule = generated.run_dir(cwd).join("schedule.csv");
    let schedule = schedule.strip_prefix(cwd).unwrap().to_str().unwrap().to_owned();
    let kb = ok(cwd, &["build-kb", "--corpus", "corpus", "--terms", "terms.tsv"]).run_dir(cwd).join("kb");
    let kb = kb.strip_prefix(cwd).unwrap().to_str().unwrap().to_owned();
    ok(cwd, &["sample-context", "--schedule", &schedule]);
    let eval = ok(
        cwd,
        &["run-eval", "--schedule", &schedule, "--kb", &kb, "--gateway", "mock:wrong", "--inference-seed", "12345"],
    );
    let outcomes = eval.run_dir(cwd).join("outcomes.jsonl");
    let outcomes = outcomes.strip_prefix(cwd).unwrap().to_str().unwrap().to_owned();
    let prefs = ok(cwd, &["collect-prefs", "--outcomes", &outcomes]).run_dir(cwd).join("preferences.jsonl");
    let prefs = prefs.strip_prefix(cwd).unwrap().to_str().unwrap().to_owned();
    ok(cwd, &["train-scorer", "--prefs", &prefs]);
}
