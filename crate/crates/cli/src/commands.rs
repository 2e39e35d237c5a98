//! One function per subcommand, each delegating to a single library operation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use schedrag::alignment::{
    pairwise_accuracy, polish_context, preference_examples, train_scorer, ContextLengthStats, ContextRuleLoss,
    RuleApplicabilityLoss, ZeroRuleLoss,
};
use schedrag::eval::{
    collect_preferences, load_preferences, make_mask_tasks, preference_store_append, read_outcomes, run_eval,
    truth_table, write_outcomes, ContextPromptSource, EvalError, EvalOptions, EvalRun, MaskSpec, PreferenceOptions,
    PromptSource, RowOnlySource, ScoreReport,
};
use schedrag::gateway::{register_mock, sort_transcript_file, ChatBackend, Gateway, HttpBackend, MockData, MockKind};
use schedrag::graph::{analyze, build_graph, detect_cycles, ScheduleGraph};
use schedrag::knowledge::{load_corpus_dir, load_term_file, ChunkStore, HashedNgramEmbedder, KnowledgeBase, TermStore};
use schedrag::prompts::{PromptRegistry, TaskKind};
use schedrag::sampler::{combined_context, render_context};
use schedrag::schedule::{parse_schedule, validate, FormatSpec, Schedule, COL_AREA, COL_DISCIPLINE, COL_LEVEL, COL_STATUS, COL_ZONE};
use schedrag::synth::{cosine_matrix, generate_schedule, pearson_matrix};
use schedrag::text::token_count;

use crate::config::{ContextMode, RuleLossKind, RunConfig};
use crate::error::CliError;
use crate::rundir::RunDir;
use crate::{Cli, Command, GatewayArgs, ScoringArgs, SeedArg, TaskArgs};

/// What a finished subcommand reports.
pub struct Outcome {
    pub result: Value,
    pub summary: Vec<String>,
}

fn overlay<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn overlay_path(slot: &mut Option<PathBuf>, value: Option<PathBuf>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_seed(cfg: &mut RunConfig, arg: &SeedArg) {
    overlay(&mut cfg.seeds.collection, arg.seed);
}

fn apply_gateway(cfg: &mut RunConfig, args: &GatewayArgs) {
    overlay(&mut cfg.gateway.backend, args.gateway.clone());
    overlay_path(&mut cfg.paths.transcript, args.replay.clone());
    overlay_path(&mut cfg.paths.answers, args.answers.clone());
    overlay(&mut cfg.gateway.client.max_parallel, args.max_parallel);
    overlay(&mut cfg.seeds.inference, args.inference_seed);
}

fn apply_tasks(cfg: &mut RunConfig, args: &TaskArgs) {
    overlay(&mut cfg.eval.tasks, args.tasks.clone());
    overlay(&mut cfg.eval.context, args.context);
}

fn apply_scoring(cfg: &mut RunConfig, args: &ScoringArgs) {
    overlay(&mut cfg.eval.k, args.k);
    if args.tolerance_days.is_some() {
        cfg.eval.tolerance_days = args.tolerance_days;
    }
    overlay(&mut cfg.eval.mode, args.mode);
}

/// Folds the subcommand's flags into the configuration.
fn resolve(mut cfg: RunConfig, command: &Command) -> RunConfig {
    match command {
        Command::Generate(a) => {
            overlay(&mut cfg.generate.n_activities, a.n);
            overlay(&mut cfg.generate.target_mean_degree, a.target_degree);
            overlay(&mut cfg.generate.window, a.window);
            apply_seed(&mut cfg, &a.seed);
        }
        Command::Ingest(a) => overlay_path(&mut cfg.paths.schedule, a.schedule.schedule.clone()),
        Command::AnalyzeGraph(a) => overlay_path(&mut cfg.paths.schedule, a.schedule.schedule.clone()),
        Command::BuildKb(a) => {
            overlay_path(&mut cfg.paths.corpus_dir, a.corpus.clone());
            overlay_path(&mut cfg.paths.term_file, a.terms.clone());
            overlay(&mut cfg.knowledge.chunk_tokens, a.chunk_tokens);
        }
        Command::SampleContext(a) => {
            overlay_path(&mut cfg.paths.schedule, a.schedule.schedule.clone());
            overlay(&mut cfg.sampler.max_sequential_hops, a.max_hops);
            apply_seed(&mut cfg, &a.seed);
        }
        Command::RunEval(a) => {
            overlay_path(&mut cfg.paths.schedule, a.schedule.schedule.clone());
            overlay_path(&mut cfg.paths.kb_dir, a.kb.kb.clone());
            apply_tasks(&mut cfg, &a.tasks);
            apply_scoring(&mut cfg, &a.scoring);
            apply_gateway(&mut cfg, &a.gateway);
            apply_seed(&mut cfg, &a.seed);
        }
        Command::CollectPrefs(a) => {
            overlay_path(&mut cfg.paths.outcomes, a.outcomes.clone());
            overlay_path(&mut cfg.paths.preference_db, a.db.clone());
            apply_seed(&mut cfg, &a.seed);
        }
        Command::TrainScorer(a) => {
            overlay_path(&mut cfg.paths.preference_db, a.prefs.clone());
            overlay(&mut cfg.loss.sft_epochs, a.sft_epochs);
            overlay(&mut cfg.loss.align_epochs, a.align_epochs);
            overlay(&mut cfg.loss.learning_rate, a.learning_rate);
            overlay(&mut cfg.loss.alpha, a.alpha);
            overlay(&mut cfg.loss.beta, a.beta);
            overlay(&mut cfg.loss.rule_loss, a.rule_loss);
            apply_seed(&mut cfg, &a.seed);
        }
        Command::Polish(a) => {
            overlay_path(&mut cfg.paths.schedule, a.schedule.schedule.clone());
            overlay_path(&mut cfg.paths.kb_dir, a.kb.kb.clone());
            apply_tasks(&mut cfg, &a.tasks);
            apply_gateway(&mut cfg, &a.gateway);
            overlay(&mut cfg.polish.bin_width, a.bin_width);
            apply_seed(&mut cfg, &a.seed);
        }
        Command::Report(a) => {
            overlay_path(&mut cfg.paths.outcomes, a.outcomes.clone());
            overlay_path(&mut cfg.paths.schedule, a.schedule.schedule.clone());
            apply_scoring(&mut cfg, &a.scoring);
        }
    }
    cfg
}

/// Resolves configuration, runs the subcommand inside its run directory and
/// returns the human summary. A failure carries the run directory when one
/// was created.
pub fn execute(cli: Cli) -> Result<String, (CliError, Option<PathBuf>)> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| (e, None))?,
        None => RunConfig::default(),
    };
    overlay(&mut cfg.paths.output_dir, cli.out.clone());
    let cfg = resolve(cfg, &cli.command);
    let args = serde_json::to_value(&cli.command).expect("arguments serialize");
    let args = args.get(cli.command.name()).cloned().unwrap_or(args);
    let mut run = RunDir::create(cli.command.name(), args, cfg.clone()).map_err(|e| (e, None))?;
    let outcome = match &cli.command {
        Command::Generate(_) => generate(&mut run, &cfg),
        Command::Ingest(a) => ingest(&mut run, &cfg, a.format_spec.as_deref()),
        Command::AnalyzeGraph(a) => analyze_graph(&mut run, &cfg, a.direction),
        Command::BuildKb(_) => build_kb(&mut run, &cfg),
        Command::SampleContext(a) => sample_context(&mut run, &cfg, &a.target),
        Command::RunEval(_) => eval(&mut run, &cfg),
        Command::CollectPrefs(a) => collect_prefs(&mut run, &cfg, a.corrupt),
        Command::TrainScorer(_) => train(&mut run, &cfg),
        Command::Polish(a) => polish(&mut run, &cfg, a.limit),
        Command::Report(a) => report(&mut run, &cfg, a.attributes.as_deref()),
    };
    let mut summary = format!("run directory: {}\n", run.dir.display());
    match outcome {
        Ok(o) => {
            run.finish(&o.result).map_err(|e| (e, Some(run.dir.clone())))?;
            for line in o.summary {
                summary.push_str(&line);
                summary.push('\n');
            }
            Ok(summary)
        }
        Err((e, partial)) => {
            let mut result = partial.unwrap_or_else(|| json!({}));
            result["error"] = json!({ "class": e.class(), "message": e.message() });
            let dir = Some(run.dir.clone());
            match run.finish(&result) {
                Ok(()) => Err((e, dir)),
                Err(io) => Err((io, dir)),
            }
        }
    }
}

type Failure = (CliError, Option<Value>);
type CmdResult = Result<Outcome, Failure>;

fn fail(e: impl Into<CliError>) -> Failure {
    (e.into(), None)
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a Path, Failure> {
    path.as_deref()
        .ok_or_else(|| fail(CliError::Usage(format!("missing {what}: pass {flag} or set it in the config file"))))
}

fn load_schedule(run: &mut RunDir, cfg: &RunConfig) -> Result<Schedule, Failure> {
    let path = required(&cfg.paths.schedule, "schedule", "--schedule")?.to_owned();
    run.input(&path).map_err(fail)?;
    read_schedule(&path, &FormatSpec::default()).map_err(fail)
}

fn read_schedule(path: &Path, spec: &FormatSpec) -> Result<Schedule, CliError> {
    let raw = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    parse_schedule(&raw, spec, &path.display().to_string()).map_err(|e| CliError::from(e).at(path.display()))
}

fn checked_graph(schedule: &Schedule) -> Result<ScheduleGraph, Failure> {
    let graph = build_graph(schedule).map_err(|e| {
        let mut msg = e.to_string();
        if let schedrag::graph::GraphError::InvalidSchedule(report) = &e {
            if let Some(v) = report.violations.first() {
                let _ = write!(msg, "; first: row {} {}: {}", v.row, v.field, v.message);
            }
        }
        fail(CliError::Data(msg))
    })?;
    if let Some(cycle) = detect_cycles(&graph).first() {
        return Err(fail(CliError::Data(format!("dependency cycle {}", cycle.join(" -> ")))));
    }
    Ok(graph)
}

fn w(run: &RunDir, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
    run.write(name, contents).map_err(fail)
}

fn generate(run: &mut RunDir, cfg: &RunConfig) -> CmdResult {
    let schedule = generate_schedule(&cfg.generator_params()).map_err(fail)?;
    w(run, "schedule.csv", schedule.to_csv().map_err(fail)?)?;
    let violations = validate(&schedule).violations.len();
    let graph = build_graph(&schedule).map_err(fail)?;
    let cycles = detect_cycles(&graph).len();
    let mean_degree = 2.0 * graph.edge_count() as f64 / graph.node_count().max(1) as f64;
    Ok(Outcome {
        result: json!({
            "activities": schedule.activities.len(),
            "links": schedule.links.len(),
            "violations": violations,
            "cycles": cycles,
            "mean_degree": mean_degree,
            "schedule": "schedule.csv",
        }),
        summary: vec![format!(
            "generated {} activities, {} links, mean degree {mean_degree:.3}, {violations} violations, {cycles} cycles",
            schedule.activities.len(),
            schedule.links.len()
        )],
    })
}

fn ingest(run: &mut RunDir, cfg: &RunConfig, format_spec: Option<&Path>) -> CmdResult {
    let spec = match format_spec {
        Some(p) => {
            run.input(p).map_err(fail)?;
            let text = fs::read_to_string(p).map_err(|e| fail(CliError::Data(format!("{}: {e}", p.display()))))?;
            serde_json::from_str(&text).map_err(|e| fail(CliError::Data(format!("{}: {e}", p.display()))))?
        }
        None => FormatSpec::default(),
    };
    let path = required(&cfg.paths.schedule, "schedule", "--schedule")?.to_owned();
    run.input(&path).map_err(fail)?;
    let schedule = read_schedule(&path, &spec).map_err(fail)?;
    let report = validate(&schedule);
    w(run, "schedule.csv", schedule.to_csv().map_err(fail)?)?;
    w(run, "validation.json", format!("{}\n", serde_json::to_string_pretty(&report).expect("json")))?;
    let mut summary = vec![format!(
        "ingested {} activities and {} links, {} violations",
        schedule.activities.len(),
        schedule.links.len(),
        report.violations.len()
    )];
    summary.extend(
        report
            .violations
            .iter()
            .take(5)
            .map(|v| format!("  row {} {}: {}", v.row, v.field, v.message)),
    );
    Ok(Outcome {
        result: json!({
            "activities": schedule.activities.len(),
            "links": schedule.links.len(),
            "violations": report.violations.len(),
            "schedule": "schedule.csv",
        }),
        summary,
    })
}

fn analyze_graph(run: &mut RunDir, cfg: &RunConfig, direction: schedrag::graph::HopDirection) -> CmdResult {
    let schedule = load_schedule(run, cfg)?;
    let graph = checked_graph(&schedule)?;
    let stats = analyze(&graph, direction).map_err(fail)?;
    let degree = stats.degree.as_ref().expect("degree computed");
    let maxhop = stats.maxhop.as_ref().expect("maxhop computed");
    w(run, "graph_stats.jsonl", stats.to_jsonl())?;
    w(run, "degree_histogram.tsv", degree.histogram_text())?;
    w(run, "maxhop_histogram.tsv", maxhop.histogram_text())?;
    Ok(Outcome {
        result: json!({
            "nodes": stats.node_count,
            "edges": stats.edge_count,
            "degree_mean": degree.mean,
            "degree_max": degree.max,
            "maxhop_mean": maxhop.mean,
            "maxhop_max": maxhop.max,
        }),
        summary: vec![
            format!("{} nodes, {} edges", stats.node_count, stats.edge_count),
            format!("degree mean {:.3}, max {}", degree.mean, degree.max),
            format!("maxhop mean {:.3}, max {}", maxhop.mean, maxhop.max),
        ],
    })
}

fn embedder(cfg: &RunConfig) -> HashedNgramEmbedder {
    HashedNgramEmbedder::new(cfg.knowledge.dimension)
}

fn build_kb(run: &mut RunDir, cfg: &RunConfig) -> CmdResult {
    if cfg.paths.corpus_dir.is_none() && cfg.paths.term_file.is_none() {
        return Err(fail(CliError::Usage("build-kb needs --corpus, --terms or both".into())));
    }
    let embedder = embedder(cfg);
    let pairs = match &cfg.paths.term_file {
        Some(p) => {
            run.input(p).map_err(fail)?;
            load_term_file(p).map_err(fail)?
        }
        None => Vec::new(),
    };
    let documents = match &cfg.paths.corpus_dir {
        Some(d) => {
            run.input(d).map_err(fail)?;
            load_corpus_dir(d).map_err(fail)?
        }
        None => Vec::new(),
    };
    let kb = KnowledgeBase {
        terms: TermStore::build(&embedder, &pairs).map_err(fail)?,
        chunks: ChunkStore::build(&embedder, &documents, cfg.knowledge.chunk_tokens).map_err(fail)?,
    };
    kb.save(&run.path("kb")).map_err(fail)?;
    Ok(Outcome {
        result: json!({
            "terms": kb.terms.len(),
            "documents": documents.len(),
            "chunks": kb.chunks.len(),
            "dimension": cfg.knowledge.dimension,
            "kb": "kb",
        }),
        summary: vec![format!(
            "knowledge base: {} terms, {} chunks from {} documents",
            kb.terms.len(),
            kb.chunks.len(),
            documents.len()
        )],
    })
}

fn sample_context(run: &mut RunDir, cfg: &RunConfig, targets: &[String]) -> CmdResult {
    let schedule = load_schedule(run, cfg)?;
    let graph = checked_graph(&schedule)?;
    let sampler = cfg.sampler_config();
    sampler.check().map_err(fail)?;
    let targets: Vec<String> = if targets.is_empty() {
        graph.nodes().to_vec()
    } else {
        targets.to_vec()
    };
    let mut lines = String::new();
    let mut text = String::new();
    let mut members = 0usize;
    for t in &targets {
        let bundle = combined_context(&graph, &schedule, t, &sampler).map_err(fail)?;
        members += bundle.member_ids().len();
        lines.push_str(&bundle.to_json_line());
        lines.push('\n');
        let _ = write!(text, "## {t}\n{}\n", render_context(&bundle, &schedule));
    }
    w(run, "contexts.jsonl", lines)?;
    w(run, "contexts.txt", text)?;
    let mean = members as f64 / targets.len().max(1) as f64;
    Ok(Outcome {
        result: json!({ "targets": targets.len(), "mean_members": mean, "contexts": "contexts.jsonl" }),
        summary: vec![format!("sampled {} contexts, {mean:.2} members on average", targets.len())],
    })
}

fn registry(run: &mut RunDir, cfg: &RunConfig) -> Result<PromptRegistry, Failure> {
    match &cfg.paths.prompts_dir {
        Some(dir) => {
            run.input(dir).map_err(fail)?;
            PromptRegistry::load_dir(dir).map_err(fail)
        }
        None => Ok(PromptRegistry::builtin()),
    }
}

fn load_kb(run: &mut RunDir, cfg: &RunConfig) -> Result<Option<KnowledgeBase>, Failure> {
    match &cfg.paths.kb_dir {
        Some(dir) => {
            run.input(dir).map_err(fail)?;
            Ok(Some(KnowledgeBase::load(dir).map_err(|e| fail(CliError::from(e).at(dir.display())))?))
        }
        None => Ok(None),
    }
}

/// Builds the gateway named by `gateway.backend`, transcribing into the run
/// directory.
fn gateway(run: &mut RunDir, cfg: &RunConfig, schedule: &Schedule) -> Result<Gateway, Failure> {
    let client = cfg.gateway_config();
    let backend: Box<dyn ChatBackend> = match cfg.gateway.backend.split_once(':') {
        None if cfg.gateway.backend == "http" => Box::new(HttpBackend::new(&client).map_err(fail)?),
        Some(("mock", name)) => {
            let kind: MockKind = name.parse().map_err(|e: String| fail(CliError::Usage(e)))?;
            let mut data = MockData::default();
            match kind {
                MockKind::EchoOracle => data.truth = Some(truth_table(schedule)),
                MockKind::ScriptedTranscript => {
                    let p = required(&cfg.paths.transcript, "replay transcript", "--replay")?;
                    run.input(p).map_err(fail)?;
                    data.transcript = Some(p.to_owned());
                }
                MockKind::AnswerTable => {
                    let p = required(&cfg.paths.answers, "answer table", "--answers")?;
                    run.input(p).map_err(fail)?;
                    let text = fs::read_to_string(p).map_err(|e| fail(CliError::Data(format!("{}: {e}", p.display()))))?;
                    let answers: BTreeMap<String, String> = serde_json::from_str(&text)
                        .map_err(|e| fail(CliError::Data(format!("{}: {e}", p.display()))))?;
                    data.answers = Some(answers);
                }
                _ => {}
            }
            register_mock(kind, data).map_err(fail)?
        }
        _ => {
            return Err(fail(CliError::Usage(format!(
                "unknown gateway {:?}; expected http or mock:<name>",
                cfg.gateway.backend
            ))))
        }
    };
    Gateway::new(client, backend)
        .and_then(|g| g.with_transcript(&run.path("transcript.jsonl")))
        .map_err(fail)
}

fn mask_tasks(cfg: &RunConfig, schedule: &Schedule) -> Result<Vec<MaskSpec>, Failure> {
    let mut tasks = Vec::new();
    for kind in &cfg.eval.tasks {
        tasks.extend(make_mask_tasks(schedule, *kind, cfg.seeds.collection).map_err(fail)?);
    }
    Ok(tasks)
}

fn eval(run: &mut RunDir, cfg: &RunConfig) -> CmdResult {
    let schedule = load_schedule(run, cfg)?;
    let graph = checked_graph(&schedule)?;
    let kb = load_kb(run, cfg)?;
    let registry = registry(run, cfg)?;
    let gateway = gateway(run, cfg, &schedule)?;
    let tasks = mask_tasks(cfg, &schedule)?;
    let embedder = embedder(cfg);
    let rules = registry.default_rules_text();
    let source: Box<dyn PromptSource> = match cfg.eval.context {
        ContextMode::Row => Box::new(RowOnlySource { rules }),
        ContextMode::Graph => {
            let mut s = ContextPromptSource::new(&graph, &embedder, rules);
            s.knowledge = kb.as_ref();
            s.sampler = cfg.sampler_config();
            s.global_k = cfg.knowledge.global_k;
            Box::new(s)
        }
    };
    let options = EvalOptions {
        k: cfg.eval.k,
        tolerance_days: cfg.eval.tolerance_days,
        mode: cfg.eval.mode,
        registry,
    };
    let (eval_run, failure) = match run_eval(&schedule, &tasks, &gateway, source.as_ref(), &options) {
        Ok(r) => (r, None),
        Err(EvalError::Gateway {
            source,
            completed,
            total,
            partial,
        }) => (
            *partial,
            Some(CliError::Gateway(format!("gateway failed after {completed} of {total} tasks: {source}"))),
        ),
        Err(e) => return Err(fail(e)),
    };
    drop(gateway);
    sort_transcript_file(&run.path("transcript.jsonl")).map_err(fail)?;
    let outcome = write_eval(run, &eval_run, cfg.gateway.backend.as_str())?;
    match failure {
        None => Ok(outcome),
        Some(e) => Err((e, Some(outcome.result))),
    }
}

fn write_eval(run: &RunDir, eval_run: &EvalRun, backend: &str) -> Result<Outcome, Failure> {
    write_outcomes(&run.path("outcomes.jsonl"), &eval_run.outcomes).map_err(fail)?;
    let outcome = report_outputs(run, &eval_run.report)?;
    let mut result = outcome.result;
    result["tasks"] = json!(eval_run.outcomes.len());
    result["backend"] = json!(backend);
    result["outcomes"] = json!("outcomes.jsonl");
    result["transcript"] = json!("transcript.jsonl");
    Ok(Outcome {
        result,
        summary: outcome.summary,
    })
}

fn report_outputs(run: &RunDir, report: &ScoreReport) -> Result<Outcome, Failure> {
    w(run, "report.json", report.to_json())?;
    let table = report.to_table();
    w(run, "report.txt", &table)?;
    let accuracy: BTreeMap<String, Option<f64>> = TaskKind::SCORED
        .iter()
        .filter(|k| report.per_task.contains_key(k))
        .map(|k| (k.to_string(), report.accuracy(*k)))
        .collect();
    let mut summary: Vec<String> = accuracy
        .iter()
        .map(|(k, a)| match a {
            Some(a) => format!("{k}: {a:.1}%"),
            None => format!("{k}: n/a"),
        })
        .collect();
    if report.incomplete {
        summary.push(format!("incomplete: {} tasks failed", report.failed_tasks));
    }
    Ok(Outcome {
        result: json!({
            "accuracy": accuracy,
            "mode": report.mode,
            "incomplete": report.incomplete,
            "failed_tasks": report.failed_tasks,
            "report": "report.json",
        }),
        summary,
    })
}

fn collect_prefs(run: &mut RunDir, cfg: &RunConfig, corrupt: bool) -> CmdResult {
    let path = required(&cfg.paths.outcomes, "outcomes", "--outcomes")?.to_owned();
    run.input(&path).map_err(fail)?;
    let outcomes = read_outcomes(&path).map_err(fail)?;
    let records = collect_preferences(
        &outcomes,
        PreferenceOptions {
            corrupt,
            seed: cfg.seeds.collection,
        },
    );
    let db = cfg.paths.preference_db.clone().unwrap_or_else(|| run.path("preferences.jsonl"));
    if !db.exists() {
        if let Some(parent) = db.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| fail(CliError::Internal(format!("{}: {e}", parent.display()))))?;
        }
        fs::write(&db, "").map_err(|e| fail(CliError::Internal(format!("{}: {e}", db.display()))))?;
    }
    preference_store_append(&db, &records).map_err(fail)?;
    let synthesized = records
        .iter()
        .filter(|r| r.meta.get("source").map(String::as_str) == Some("synthesized"))
        .count();
    let db_label = db
        .strip_prefix(&run.dir)
        .map(|p| p.display().to_string())
        .unwrap_or_else(|_| db.display().to_string());
    Ok(Outcome {
        result: json!({
            "outcomes": outcomes.len(),
            "records": records.len(),
            "natural": records.len() - synthesized,
            "synthesized": synthesized,
            "preference_db": db_label,
        }),
        summary: vec![format!(
            "appended {} preference records ({} natural, {synthesized} synthesized) to {}",
            records.len(),
            records.len() - synthesized,
            db.display()
        )],
    })
}

fn train(run: &mut RunDir, cfg: &RunConfig) -> CmdResult {
    let path = required(&cfg.paths.preference_db, "preference store", "--prefs")?.to_owned();
    run.input(&path).map_err(fail)?;
    let records = load_preferences(&path).map_err(fail)?;
    let embedder = embedder(cfg);
    let rule_loss: &dyn ContextRuleLoss = match cfg.loss.rule_loss {
        RuleLossKind::Applicability => &RuleApplicabilityLoss,
        RuleLossKind::Zero => &ZeroRuleLoss,
    };
    let train_cfg = cfg.train_config();
    let scorer = train_scorer(&records, &embedder, &train_cfg, rule_loss).map_err(fail)?;
    let examples = preference_examples(&records, &embedder).map_err(fail)?;
    let accuracy = pairwise_accuracy(&scorer, &examples);
    scorer.save(&run.path("scorer.bin")).map_err(fail)?;
    w(run, "training_log.jsonl", scorer.training_log_jsonl())?;
    let last = scorer.training_log.last().map(|l| l.losses);
    Ok(Outcome {
        result: json!({
            "records": records.len(),
            "epochs": scorer.training_log.len(),
            "pairwise_accuracy": accuracy,
            "final_losses": last,
            "rule_loss": rule_loss.name(),
            "scorer": "scorer.bin",
        }),
        summary: vec![format!(
            "trained on {} pairs for {} epochs, pairwise accuracy {:.1}%",
            records.len(),
            scorer.training_log.len(),
            100.0 * accuracy
        )],
    })
}

fn polish(run: &mut RunDir, cfg: &RunConfig, limit: Option<usize>) -> CmdResult {
    if cfg.polish.bin_width == 0 {
        return Err(fail(CliError::Usage("bin width must be at least 1".into())));
    }
    let schedule = load_schedule(run, cfg)?;
    let graph = checked_graph(&schedule)?;
    let kb = load_kb(run, cfg)?;
    let registry = registry(run, cfg)?;
    let gateway = gateway(run, cfg, &schedule)?;
    let embedder = embedder(cfg);
    let mut source = ContextPromptSource::new(&graph, &embedder, registry.default_rules_text());
    source.knowledge = kb.as_ref();
    source.sampler = cfg.sampler_config();
    source.global_k = cfg.knowledge.global_k;
    let source: Box<dyn PromptSource> = match cfg.eval.context {
        ContextMode::Graph => Box::new(source),
        ContextMode::Row => Box::new(RowOnlySource {
            rules: registry.default_rules_text(),
        }),
    };

    let mut stats = ContextLengthStats::default();
    let mut lines = String::new();
    let mut count = 0usize;
    for kind in &cfg.eval.tasks {
        let tasks = make_mask_tasks(&schedule, *kind, cfg.seeds.collection).map_err(fail)?;
        for spec in tasks.iter().take(limit.unwrap_or(usize::MAX)) {
            let sections = source.sections(&schedule, spec).map_err(fail)?;
            let key = format!("polish/{}", spec.key());
            let polished = polish_context(&gateway, &registry, *kind, Some(&key), &sections, &mut stats).map_err(fail)?;
            let record = json!({
                "key": spec.key(),
                "task": kind,
                "raw_tokens": token_count(&sections.render()),
                "polished_tokens": token_count(&polished),
                "polished": polished,
            });
            lines.push_str(&record.to_string());
            lines.push('\n');
            count += 1;
        }
    }
    drop(gateway);
    sort_transcript_file(&run.path("transcript.jsonl")).map_err(fail)?;
    w(run, "polished.jsonl", lines)?;
    w(run, "context_lengths.json", stats.to_json())?;
    let mut summary = vec![format!("polished {count} contexts")];
    for kind in &cfg.eval.tasks {
        for polished in [false, true] {
            let name = format!("histogram_{}_{}.tsv", kind, if polished { "polished" } else { "raw" });
            w(run, &name, stats.histogram_text(*kind, polished, cfg.polish.bin_width))?;
        }
    }
    for s in stats.summaries() {
        summary.push(format!(
            "{}: raw mean {:.1} median {:.1}, polished mean {:.1} median {:.1}",
            s.kind, s.raw_mean, s.raw_median, s.polished_mean, s.polished_median
        ));
    }
    Ok(Outcome {
        result: json!({
            "contexts": count,
            "backend": cfg.gateway.backend,
            "summaries": stats.summaries(),
            "polished": "polished.jsonl",
            "transcript": "transcript.jsonl",
        }),
        summary,
    })
}

const DEFAULT_MATRIX_ATTRIBUTES: [&str; 5] = [COL_STATUS, COL_DISCIPLINE, COL_LEVEL, COL_AREA, COL_ZONE];

fn report(run: &mut RunDir, cfg: &RunConfig, attributes: Option<&[String]>) -> CmdResult {
    if cfg.paths.outcomes.is_none() && cfg.paths.schedule.is_none() {
        return Err(fail(CliError::Usage("report needs --outcomes, --schedule or both".into())));
    }
    let mut result = json!({});
    let mut summary = Vec::new();
    if let Some(path) = cfg.paths.outcomes.clone() {
        run.input(&path).map_err(fail)?;
        let outcomes = read_outcomes(&path).map_err(fail)?;
        let report = ScoreReport::from_outcomes(&outcomes, cfg.eval.k, cfg.eval.tolerance_days, cfg.eval.mode);
        let o = report_outputs(run, &report)?;
        result = o.result;
        summary.extend(o.summary);
    }
    if cfg.paths.schedule.is_some() {
        let schedule = load_schedule(run, cfg)?;
        let names: Vec<&str> = match attributes {
            Some(a) => a.iter().map(String::as_str).collect(),
            None => DEFAULT_MATRIX_ATTRIBUTES.to_vec(),
        };
        let pearson = pearson_matrix(&schedule, &names).map_err(fail)?;
        let cosine = cosine_matrix(&schedule, &names, &embedder(cfg)).map_err(fail)?;
        w(run, "pearson.tsv", pearson.to_text())?;
        w(run, "cosine.tsv", cosine.to_text())?;
        let constant: Vec<&String> = pearson
            .labels
            .iter()
            .zip(&pearson.constant)
            .filter_map(|(l, c)| c.then_some(l))
            .collect();
        result["matrices"] = json!({ "attributes": names, "pearson": "pearson.tsv", "cosine": "cosine.tsv", "constant": constant });
        summary.push(format!("attribute matrices over {} attributes", names.len()));
    }
    Ok(Outcome { result, summary })
}
