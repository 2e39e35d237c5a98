mod common;

use std::fs;

use common::{fixture, ok, schedrag, stage_fixtures, tree};

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ok(tmp.path(), &["generate", "--n", "100", "--seed", "42", "--out", "a"]);
    let b = ok(tmp.path(), &["generate", "--n", "100", "--seed", "42", "--out", "b"]);
    // Only the recorded output root differs between the two trees.
    let (ta, tb) = (tree(&a.run_dir(tmp.path())), tree(&b.run_dir(tmp.path())));
    for name in ["schedule.csv", "result.json"] {
        assert_eq!(ta[name], tb[name], "{name}");
    }
    assert_eq!(a.run_dir(tmp.path()).file_name(), b.run_dir(tmp.path()).file_name());
    let c = ok(tmp.path(), &["generate", "--n", "100", "--seed", "43", "--out", "a"]);
    assert_ne!(
        fs::read(a.run_dir(tmp.path()).join("schedule.csv")).unwrap(),
        fs::read(c.run_dir(tmp.path()).join("schedule.csv")).unwrap()
    );
    let r = a.result(tmp.path());
    assert_eq!(r["activities"], 100);
    assert_eq!(r["violations"], 0);
    assert_eq!(r["cycles"], 0);
}

#[test]
fn chain_fixture_statistics() {
    let tmp = tempfile::tempdir().unwrap();
    let chain = fixture("chain.csv");
    let out = ok(tmp.path(), &["analyze-graph", "--schedule", chain.to_str().unwrap()]);
    assert!(out.stdout.contains("degree mean 1.333"), "{}", out.stdout);
    assert!(out.stdout.contains("maxhop mean 1.000"), "{}", out.stdout);
    let r = out.result(tmp.path());
    assert!((r["degree_mean"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
    assert_eq!(r["maxhop_mean"].as_f64().unwrap(), 1.0);
    let hist = fs::read_to_string(out.run_dir(tmp.path()).join("degree_histogram.tsv")).unwrap();
    assert_eq!(hist, "1\t2\n2\t1\n");
    let either = ok(
        tmp.path(),
        &["analyze-graph", "--schedule", chain.to_str().unwrap(), "--direction", "either"],
    );
    // A: 2 down, B: 1 each way, C: 2 up.
    assert!((either.result(tmp.path())["maxhop_mean"].as_f64().unwrap() - 5.0 / 3.0).abs() < 1e-12);
}

#[test]
fn echo_gateway_scores_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let s = ok(tmp.path(), &["generate", "--n", "40"]).run_dir(tmp.path()).join("schedule.csv");
    let out = ok(tmp.path(), &["run-eval", "--schedule", s.to_str().unwrap(), "--gateway", "mock:echo"]);
    for kind in ["MVP", "DA", "AP"] {
        assert!(out.stdout.contains(&format!("{kind}: 100.0%")), "{}", out.stdout);
        assert_eq!(out.result(tmp.path())["accuracy"][kind], 100.0);
    }
    let out = ok(tmp.path(), &["run-eval", "--schedule", s.to_str().unwrap(), "--gateway", "mock:wrong"]);
    assert_eq!(out.result(tmp.path())["accuracy"]["MVP"], 0.0);
}

#[test]
fn recorded_transcript_replays_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    let s = ok(cwd, &["generate", "--n", "30"]).run_dir(cwd).join("schedule.csv");
    let s = s.to_str().unwrap();
    let first = ok(cwd, &["run-eval", "--schedule", s, "--gateway", "mock:echo", "--tasks", "MVP,AP"]);
    let transcript = first.run_dir(cwd).join("transcript.jsonl");
    let replay = ok(
        cwd,
        &["run-eval", "--schedule", s, "--gateway", "mock:replay", "--replay", transcript.to_str().unwrap(), "--tasks", "MVP,AP"],
    );
    for name in ["outcomes.jsonl", "report.json", "report.txt", "transcript.jsonl"] {
        assert_eq!(
            fs::read(first.run_dir(cwd).join(name)).unwrap(),
            fs::read(replay.run_dir(cwd).join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn exit_codes_by_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    assert_eq!(schedrag(cwd, &["generate", "--bogus"]).code, 1);
    assert_eq!(schedrag(cwd, &["frobnicate"]).code, 1);
    assert_eq!(schedrag(cwd, &["analyze-graph"]).code, 1);
    assert_eq!(schedrag(cwd, &["analyze-graph", "--schedule", "missing.csv"]).code, 1);
    assert_eq!(schedrag(cwd, &["generate", "--n", "10", "--target-degree", "50"]).code, 1);
    assert_eq!(schedrag(cwd, &["run-eval", "--schedule", fixture("chain.csv").to_str().unwrap(), "--gateway", "nope"]).code, 1);

    let malformed = schedrag(cwd, &["ingest", "--schedule", fixture("malformed.csv").to_str().unwrap()]);
    assert_eq!(malformed.code, 2);
    assert!(malformed.stderr.contains("malformed.csv") && malformed.stderr.contains("row 2"), "{}", malformed.stderr);
    let cyclic = schedrag(cwd, &["analyze-graph", "--schedule", fixture("cyclic.csv").to_str().unwrap()]);
    assert_eq!(cyclic.code, 2);
    assert!(cyclic.stderr.contains("cycle"), "{}", cyclic.stderr);

    fs::write(cwd.join("empty.jsonl"), "").unwrap();
    let s = ok(cwd, &["generate", "--n", "20"]).run_dir(cwd).join("schedule.csv");
    let replay = schedrag(
        cwd,
        &["run-eval", "--schedule", s.to_str().unwrap(), "--gateway", "mock:replay", "--replay", "empty.jsonl"],
    );
    assert_eq!(replay.code, 3, "{}", replay.stderr);
    // The partial run is still recorded.
    let result = fs::read_to_string(replay.run_dir(cwd).join("result.json")).unwrap();
    assert!(result.contains("\"class\": \"gateway\""), "{result}");
    assert!(result.contains("\"incomplete\": true"), "{result}");

    let help = schedrag(cwd, &["--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("run-eval"));
}

#[test]
fn manifest_describes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    stage_fixtures(cwd);
    let out = ok(cwd, &["build-kb", "--corpus", "corpus", "--terms", "terms.tsv", "--chunk-tokens", "20"]);
    let dir = out.run_dir(cwd);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "build-kb");
    assert_eq!(manifest["seeds"]["collection"], 42);
    assert_eq!(manifest["seeds"]["inference"], 12345);
    assert_eq!(manifest["versions"]["schedrag"], env!("CARGO_PKG_VERSION"));
    let hash = manifest["config_hash"].as_str().unwrap();
    assert!(dir.file_name().unwrap().to_str().unwrap().ends_with(&hash[..12]));
    let inputs: Vec<&str> = manifest["inputs"].as_array().unwrap().iter().map(|i| i["path"].as_str().unwrap()).collect();
    assert_eq!(inputs, ["terms.tsv", "corpus"]);
    let files = tree(&dir);
    for o in manifest["outputs"].as_array().unwrap() {
        let bytes = &files[o["path"].as_str().unwrap()];
        assert_eq!(o["sha256"].as_str().unwrap(), hex::encode(sha2::Sha256::digest(bytes)));
    }
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), files.len() - 1);
    assert!(out.result(cwd)["chunks"].as_u64().unwrap() > 2);

    // Re-running from the recorded config reproduces the directory.
    fs::copy(dir.join("config.toml"), cwd.join("recorded.toml")).unwrap();
    let before = tree(&dir);
    let again = ok(cwd, &["--config", "recorded.toml", "build-kb"]);
    assert_eq!(again.run_dir(cwd), dir);
    assert_eq!(tree(&dir), before);
}

use sha2::Digest;

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    fs::write(cwd.join("run.toml"), "[generate]\nn_activities = 12\n[seeds]\ncollection = 5\n").unwrap();
    let from_file = ok(cwd, &["--config", "run.toml", "generate"]);
    assert_eq!(from_file.result(cwd)["activities"], 12);
    let flagged = ok(cwd, &["--config", "run.toml", "generate", "--n", "15"]);
    assert_eq!(flagged.result(cwd)["activities"], 15);
    let recorded = fs::read_to_string(flagged.run_dir(cwd).join("config.toml")).unwrap();
    assert!(recorded.contains("n_activities = 15") && recorded.contains("collection = 5"), "{recorded}");
    fs::write(cwd.join("bad.toml"), "[generate]\nactivities = 3\n").unwrap();
    assert_eq!(schedrag(cwd, &["--config", "bad.toml", "generate"]).code, 1);
}

#[test]
fn preferences_train_and_polish() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    common::full_pipeline(cwd, 30);
    let train = cwd.join("runs").read_dir().unwrap().map(|e| e.unwrap().path()).find(|p| {
        p.file_name().unwrap().to_str().unwrap().starts_with("train-scorer-")
    }).unwrap();
    let result: serde_json::Value = serde_json::from_str(&fs::read_to_string(train.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["records"], 90);
    assert_eq!(result["epochs"], 20);
    assert!(train.join("scorer.bin").is_file());

    let s = fixture("chain.csv");
    let out = ok(cwd, &["polish", "--schedule", s.to_str().unwrap(), "--gateway", "mock:strip", "--tasks", "AP"]);
    let dir = out.run_dir(cwd);
    for line in fs::read_to_string(dir.join("polished.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["polished_tokens"].as_u64() <= v["raw_tokens"].as_u64());
    }
    assert!(dir.join("histogram_AP_raw.tsv").is_file() && dir.join("histogram_AP_polished.tsv").is_file());
}

#[test]
fn report_rescores_and_builds_matrices() {
    let tmp = tempfile::tempdir().unwrap();
    let cwd = tmp.path();
    let s = ok(cwd, &["generate", "--n", "40"]).run_dir(cwd).join("schedule.csv");
    let s = s.to_str().unwrap();
    let eval = ok(cwd, &["run-eval", "--schedule", s, "--gateway", "mock:echo", "--context", "row"]);
    let outcomes = eval.run_dir(cwd).join("outcomes.jsonl");
    let report = ok(cwd, &["report", "--outcomes", outcomes.to_str().unwrap(), "--mode", "rows", "--schedule", s]);
    let dir = report.run_dir(cwd);
    assert_eq!(report.result(cwd)["accuracy"]["DA"], 100.0);
    assert_eq!(report.result(cwd)["mode"], "rows");
    let pearson = fs::read_to_string(dir.join("pearson.tsv")).unwrap();
    assert!(pearson.starts_with("\tActivity Status\tDiscipline"));
    assert!(dir.join("cosine.tsv").is_file());
}
