use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use super::report::{AccuracyMode, ScoreReport};
use super::{parse_values, score_completion, Completion, EvalError, MaskSpec, DEFAULT_K};
use crate::gateway::{ChatExchange, Gateway, GatewayError};
use crate::graph::ScheduleGraph;
use crate::knowledge::{Embedder, KnowledgeBase, DEFAULT_GLOBAL_K};
use crate::prompts::{render_row, PromptRegistry, PromptSections};
use crate::sampler::{combined_context, render_context, SamplerConfig};
use crate::schedule::Schedule;

/// Supplies the non-row sections of a task prompt.
pub trait PromptSource: Sync {
    fn sections(&self, schedule: &Schedule, spec: &MaskSpec) -> Result<PromptSections, EvalError>;
}

fn masked_row(schedule: &Schedule, spec: &MaskSpec) -> Result<(usize, String), EvalError> {
    let index = schedule
        .index_of(&spec.row_id)
        .ok_or_else(|| EvalError::UnknownRow(spec.row_id.clone()))?;
    let cells: Vec<(String, String)> = schedule
        .columns()
        .into_iter()
        .map(|c| {
            let v = schedule.cell(index, &c).unwrap_or_default();
            (c, v)
        })
        .collect();
    Ok((index, render_row(&cells, &spec.masked_columns)))
}

/// Row and rules only, with no retrieved knowledge or graph context.
#[derive(Clone, Debug)]
pub struct RowOnlySource {
    pub rules: String,
}

impl PromptSource for RowOnlySource {
    fn sections(&self, schedule: &Schedule, spec: &MaskSpec) -> Result<PromptSections, EvalError> {
        Ok(PromptSections {
            row: masked_row(schedule, spec)?.1,
            rules: self.rules.clone(),
            ..Default::default()
        })
    }
}

/// Row, retrieved static knowledge, sampled graph context and rules.
pub struct ContextPromptSource<'a> {
    pub graph: &'a ScheduleGraph,
    pub knowledge: Option<&'a KnowledgeBase>,
    pub embedder: &'a dyn Embedder,
    pub sampler: SamplerConfig,
    pub global_k: usize,
    pub rules: String,
}

impl<'a> ContextPromptSource<'a> {
    pub fn new(graph: &'a ScheduleGraph, embedder: &'a dyn Embedder, rules: String) -> Self {
        Self {
            graph,
            knowledge: None,
            embedder,
            sampler: SamplerConfig::default(),
            global_k: DEFAULT_GLOBAL_K,
            rules,
        }
    }
}

impl PromptSource for ContextPromptSource<'_> {
    fn sections(&self, schedule: &Schedule, spec: &MaskSpec) -> Result<PromptSections, EvalError> {
        let (index, row) = masked_row(schedule, spec)?;
        let static_knowledge = match self.knowledge {
            Some(kb) => {
                let visible: Vec<String> = schedule
                    .columns()
                    .iter()
                    .filter(|c| !spec.masked_columns.contains(c))
                    .filter_map(|c| schedule.cell(index, c))
                    .filter(|v| !v.is_empty())
                    .collect();
                kb.knowledge_text(self.embedder, &visible.join(" "), self.global_k)?
            }
            None => String::new(),
        };
        let bundle = combined_context(self.graph, schedule, &spec.row_id, &self.sampler)?;
        Ok(PromptSections {
            row,
            static_knowledge,
            context: render_context(&bundle, schedule),
            rules: self.rules.clone(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub k: usize,
    pub tolerance_days: Option<u32>,
    pub mode: AccuracyMode,
    pub registry: PromptRegistry,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            tolerance_days: None,
            mode: AccuracyMode::Cells,
            registry: PromptRegistry::builtin(),
        }
    }
}

/// Everything recorded about one masked task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub spec: MaskSpec,
    /// Grouping dimension to group value of the row.
    pub groups: BTreeMap<String, String>,
    pub system_text: String,
    pub user_text: String,
    pub completion: Option<Completion>,
    pub correct: Vec<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRun {
    pub report: ScoreReport,
    pub outcomes: Vec<TaskOutcome>,
}

fn row_groups(schedule: &Schedule, row_id: &str) -> BTreeMap<String, String> {
    let Some(a) = schedule.activity(row_id) else {
        return BTreeMap::new();
    };
    BTreeMap::from([
        ("discipline".to_owned(), a.discipline.clone()),
        ("level".to_owned(), a.level.to_string()),
        ("area".to_owned(), a.area.clone()),
    ])
}

/// Prompts every task through the gateway (fanned out over the gateway's
/// parallelism), parses and scores the answers. On the first gateway
/// failure no further tasks are dispatched and the partial run is returned
/// inside the error.
pub fn run_eval(
    schedule: &Schedule,
    tasks: &[MaskSpec],
    gateway: &Gateway,
    source: &dyn PromptSource,
    options: &EvalOptions,
) -> Result<EvalRun, EvalError> {
    let mut outcomes = Vec::with_capacity(tasks.len());
    for spec in tasks {
        let sections = source.sections(schedule, spec)?;
        let prompt = options
            .registry
            .build_task_prompt(spec.task_kind, &sections, &spec.masked_columns, options.k)?;
        outcomes.push(TaskOutcome {
            spec: spec.clone(),
            groups: row_groups(schedule, &spec.row_id),
            system_text: prompt.system_text,
            user_text: prompt.user_text,
            completion: None,
            correct: Vec::new(),
            error: None,
        });
    }

    let results: Mutex<Vec<Option<Result<ChatExchange, GatewayError>>>> =
        Mutex::new((0..outcomes.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let workers = gateway.config().max_parallel.min(outcomes.len()).max(1);
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(o) = outcomes.get(i) else {
                    break;
                };
                let result = gateway.complete_keyed(Some(&o.spec.key()), &o.system_text, &o.user_text);
                if result.is_err() {
                    failed.store(true, Ordering::SeqCst);
                }
                results.lock().expect("results lock")[i] = Some(result);
            });
        }
    });

    let mut first_error = None;
    let mut finished = Vec::with_capacity(outcomes.len());
    for (mut o, result) in outcomes.into_iter().zip(results.into_inner().expect("results lock")) {
        match result {
            None => continue,
            Some(Ok(exchange)) => {
                let completion = parse_values(
                    exchange.response_text.as_deref().unwrap_or_default(),
                    o.spec.masked_columns.len(),
                    options.k,
                );
                o.correct = score_completion(&o.spec, &completion, options.tolerance_days);
                o.completion = Some(completion);
            }
            Some(Err(e)) => {
                o.error = Some(e.to_string());
                first_error.get_or_insert(e);
            }
        }
        finished.push(o);
    }
    let report = ScoreReport::from_outcomes(&finished, options.k, options.tolerance_days, options.mode);
    let run = EvalRun {
        report,
        outcomes: finished,
    };
    match first_error {
        None => Ok(run),
        Some(source) => Err(EvalError::Gateway {
            source,
            completed: run.outcomes.iter().filter(|o| o.error.is_none()).count(),
            total: tasks.len(),
            partial: Box::new(EvalRun {
                report: ScoreReport {
                    incomplete: true,
                    ..run.report
                },
                outcomes: run.outcomes,
            }),
        }),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_outcomes(path: &Path, outcomes: &[TaskOutcome]) -> Result<(), EvalError> {
    let mut out = String::new();
    for o in outcomes {
        out.push_str(&serde_json::to_string(o).expect("outcome serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_error(path, e))
}

pub fn read_outcomes(path: &Path) -> Result<Vec<TaskOutcome>, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::CorruptRecord {
                path: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}
