use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{canonical_cell, ColumnKind, EvalError, TaskOutcome};
use crate::prompts::{render_values, TaskKind};
use crate::rng::stream;
use crate::text::token_count;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub prompt_text: String,
    pub chosen_text: String,
    pub rejected_text: String,
    pub task_kind: TaskKind,
    pub row_id: String,
    pub context_length_tokens: usize,
    pub meta: BTreeMap<String, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreferenceOptions {
    /// Pair correct answers against a synthesized corruption.
    pub corrupt: bool,
    pub seed: u64,
}

impl Default for PreferenceOptions {
    fn default() -> Self {
        Self { corrupt: false, seed: 42 }
    }
}

/// One record per wrong answer: the rendered ground truth is chosen and the
/// model's raw answer rejected. With `corrupt`, correct answers are paired
/// against a copy with one cell swapped for another row's value of the
/// same column.
pub fn collect_preferences(outcomes: &[TaskOutcome], options: PreferenceOptions) -> Vec<PreferenceRecord> {
    let mut pool: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    if options.corrupt {
        for o in outcomes {
            for (c, v) in &o.spec.ground_truth {
                pool.entry(c.as_str()).or_default().push(v.as_str());
            }
        }
        for values in pool.values_mut() {
            values.sort_unstable();
            values.dedup();
        }
    }

    let mut records = Vec::new();
    for o in outcomes {
        let Some(completion) = &o.completion else {
            continue;
        };
        let truth: Vec<Vec<&str>> = o.spec.truth_values().into_iter().map(|v| vec![v]).collect();
        let rendered_truth = render_values(&truth);
        let record = |chosen: String, rejected: String, meta: BTreeMap<String, String>| PreferenceRecord {
            context_length_tokens: token_count(&o.user_text),
            prompt_text: o.user_text.clone(),
            chosen_text: chosen,
            rejected_text: rejected,
            task_kind: o.spec.task_kind,
            row_id: o.spec.row_id.clone(),
            meta,
        };
        let correct = o.correct.iter().filter(|c| **c).count();
        let mut meta = BTreeMap::from([
            ("transcript_id".to_owned(), o.spec.key()),
            ("correct_cells".to_owned(), format!("{correct}/{}", o.correct.len())),
        ]);

        if o.correct.iter().any(|c| !c) {
            if completion.raw_text != rendered_truth {
                meta.insert("source".into(), "natural".into());
                records.push(record(rendered_truth, completion.raw_text.clone(), meta));
            }
        } else if options.corrupt {
            let mut rng = stream(options.seed, &format!("corrupt/{}", o.spec.key()));
            let columns = &o.spec.masked_columns;
            let start = rng.random_range(0..columns.len());
            for offset in 0..columns.len() {
                let at = (start + offset) % columns.len();
                let column = columns[at].as_str();
                let kind = ColumnKind::of(column);
                let truth_value = canonical_cell(o.spec.ground_truth.get(column).map_or("", String::as_str), kind);
                let others: Vec<&str> = pool
                    .get(column)
                    .map(|vs| vs.iter().copied().filter(|v| canonical_cell(v, kind) != truth_value).collect())
                    .unwrap_or_default();
                if others.is_empty() {
                    continue;
                }
                let replacement = others[rng.random_range(0..others.len())];
                let mut corrupted: Vec<Vec<&str>> = completion
                    .parsed_cells
                    .iter()
                    .map(|cands| cands.iter().map(String::as_str).collect())
                    .collect();
                corrupted[at] = vec![replacement];
                meta.insert("source".into(), "synthesized".into());
                meta.insert("corrupted_column".into(), column.to_owned());
                records.push(record(completion.raw_text.clone(), render_values(&corrupted), meta));
                break;
            }
        }
    }
    records
}

fn io_error(path: &Path, source: std::io::Error) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Appends records as JSON lines; each record is a single write.
pub fn preference_store_append(path: &Path, records: &[PreferenceRecord]) -> Result<(), EvalError> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_error(path, e))?;
    for r in records {
        let mut line = serde_json::to_string(r).expect("record serializes");
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(|e| io_error(path, e))?;
    }
    file.flush().map_err(|e| io_error(path, e))
}

pub fn load_preferences(path: &Path) -> Result<Vec<PreferenceRecord>, EvalError> {
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
