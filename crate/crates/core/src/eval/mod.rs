//! Masked-environment evaluation: hide ground-truth cells, ask a gateway to
//! fill them, score the answers with top-k matching and harvest preference
//! pairs from the mistakes.

mod prefs;
mod report;
mod run;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use prefs::{
    collect_preferences, load_preferences, preference_store_append, PreferenceOptions, PreferenceRecord,
};
pub use report::{AccuracyMode, ScoreReport, TaskScore, GROUP_DIMENSIONS};
pub use run::{
    read_outcomes, run_eval, write_outcomes, ContextPromptSource, EvalOptions, EvalRun, PromptSource, RowOnlySource,
    TaskOutcome,
};

use crate::gateway::{GatewayError, TruthTable};
use crate::knowledge::KnowledgeError;
use crate::prompts::{PromptError, TaskKind, CANDIDATE_SEPARATOR};
use crate::rng::stream;
use crate::sampler::SamplerError;
use crate::schedule::{
    Schedule, COL_AREA, COL_DISCIPLINE, COL_FINISH, COL_ID, COL_LEVEL, COL_NAME, COL_START, COL_STATUS, DATE_FORMAT,
};
use crate::text::canonical;

pub const DEFAULT_K: usize = 2;
pub const DEFAULT_MASK_SEED: u64 = 42;
pub const MVP_ARITY: usize = 3;

/// Columns masked by dependency analysis tasks.
pub const RELATIONAL_COLUMNS: [&str; 4] = [COL_STATUS, COL_LEVEL, COL_AREA, COL_DISCIPLINE];
/// Columns masked by planning tasks.
pub const DATE_COLUMNS: [&str; 2] = [COL_START, COL_FINISH];
/// Never masked: without them the row cannot be identified.
pub const IDENTITY_COLUMNS: [&str; 2] = [COL_ID, COL_NAME];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("only {available} maskable columns, need {needed}")]
    TooFewColumns { available: usize, needed: usize },
    #[error("{0} is not a scored task kind")]
    UnscoredKind(TaskKind),
    #[error("unknown row {0}")]
    UnknownRow(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("gateway failed after {completed} of {total} tasks: {source}")]
    Gateway {
        source: GatewayError,
        completed: usize,
        total: usize,
        partial: Box<EvalRun>,
    },
    #[error("{path}: line {line}: {reason}")]
    CorruptRecord { path: String, line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub row_id: String,
    pub task_kind: TaskKind,
    pub masked_columns: Vec<String>,
    /// Column to canonical cell text.
    pub ground_truth: BTreeMap<String, String>,
}

impl MaskSpec {
    /// Stable identifier, e.g. `MVP/A0001`.
    pub fn key(&self) -> String {
        format!("{}/{}", self.task_kind, self.row_id)
    }

    /// Ground truth in masked-column order.
    pub fn truth_values(&self) -> Vec<&str> {
        self.masked_columns
            .iter()
            .map(|c| self.ground_truth.get(c).map(String::as_str).unwrap_or_default())
            .collect()
    }
}

/// Columns eligible for missing-value masking, in canonical column order.
pub fn maskable_columns(schedule: &Schedule) -> Vec<String> {
    schedule
        .columns()
        .into_iter()
        .filter(|c| !IDENTITY_COLUMNS.contains(&c.as_str()))
        .collect()
}

/// Every cell of every row, keyed by row id then column, for oracle mocks.
pub fn truth_table(schedule: &Schedule) -> TruthTable {
    let columns = schedule.columns();
    schedule
        .activities
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let row = columns
                .iter()
                .map(|c| (c.clone(), schedule.cell(i, c).unwrap_or_default()))
                .collect();
            (a.activity_id.clone(), row)
        })
        .collect()
}

/// One mask per activity, in schedule order. Missing-value masks draw three
/// distinct columns uniformly per row from a stream keyed by the row id.
pub fn make_mask_tasks(schedule: &Schedule, kind: TaskKind, seed: u64) -> Result<Vec<MaskSpec>, EvalError> {
    let fixed: Vec<String> = match kind {
        TaskKind::DA => RELATIONAL_COLUMNS.iter().map(|c| (*c).to_owned()).collect(),
        TaskKind::AP => DATE_COLUMNS.iter().map(|c| (*c).to_owned()).collect(),
        TaskKind::MVP => Vec::new(),
        TaskKind::Polish => return Err(EvalError::UnscoredKind(kind)),
    };
    let maskable = maskable_columns(schedule);
    if kind == TaskKind::MVP && maskable.len() < MVP_ARITY {
        return Err(EvalError::TooFewColumns {
            available: maskable.len(),
            needed: MVP_ARITY,
        });
    }
    schedule
        .activities
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let masked_columns = if kind == TaskKind::MVP {
                let mut rng = stream(seed, &format!("mask/{}", a.activity_id));
                let mut picked = sample(&mut rng, maskable.len(), MVP_ARITY).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|j| maskable[j].clone()).collect()
            } else {
                fixed.clone()
            };
            let ground_truth = masked_columns
                .iter()
                .map(|c: &String| (c.clone(), schedule.cell(i, c).unwrap_or_default()))
                .collect();
            Ok(MaskSpec {
                row_id: a.activity_id.clone(),
                task_kind: kind,
                masked_columns,
                ground_truth,
            })
        })
        .collect()
}

/// A parsed model answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub raw_text: String,
    pub parsed_cells: Vec<Vec<String>>,
    pub parse_ok: bool,
}

const OPEN_TAG: &str = "[Value]";
const CLOSE_TAG: &str = "[/Value]";

/// Extracts `[Value]...[/Value]` items left to right, each split on the
/// candidate separator into at most `k` trimmed candidates.
pub fn parse_values(raw_text: &str, expected_arity: usize, k: usize) -> Completion {
    let mut cells = Vec::new();
    let mut rest = raw_text;
    while let Some(open) = rest.find(OPEN_TAG) {
        let after = &rest[open + OPEN_TAG.len()..];
        let Some(close) = after.find(CLOSE_TAG) else {
            break;
        };
        let candidates: Vec<String> = after[..close]
            .split(CANDIDATE_SEPARATOR)
            .map(|c| c.trim().to_owned())
            .take(k.max(1))
            .collect();
        cells.push(candidates);
        rest = &after[close + CLOSE_TAG.len()..];
    }
    Completion {
        raw_text: raw_text.to_owned(),
        parse_ok: cells.len() == expected_arity,
        parsed_cells: cells,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    Text,
    Date,
}

impl ColumnKind {
    pub fn of(column: &str) -> Self {
        if DATE_COLUMNS.contains(&column) {
            ColumnKind::Date
        } else {
            ColumnKind::Text
        }
    }
}

const DATE_INPUT_FORMATS: [&str; 3] = [DATE_FORMAT, "%Y/%m/%d", "%Y.%m.%d"];

pub fn parse_date_loose(text: &str) -> Option<NaiveDate> {
    let t = text.trim();
    DATE_INPUT_FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(t, f).ok())
}

/// Comparison form of a cell: dates reformatted to ISO, everything else
/// trimmed, case-folded and whitespace-collapsed.
pub fn canonical_cell(text: &str, kind: ColumnKind) -> String {
    if kind == ColumnKind::Date {
        if let Some(d) = parse_date_loose(text) {
            return d.format(DATE_FORMAT).to_string();
        }
    }
    canonical(text)
}

/// True when any candidate matches the truth. `tolerance_days` widens date
/// matches to `|candidate - truth| <= n` days.
pub fn score_cell(candidates: &[String], truth: &str, kind: ColumnKind, tolerance_days: Option<u32>) -> bool {
    let target = canonical_cell(truth, kind);
    candidates.iter().any(|c| {
        if canonical_cell(c, kind) == target {
            return true;
        }
        match (kind, tolerance_days, parse_date_loose(c), parse_date_loose(truth)) {
            (ColumnKind::Date, Some(n), Some(a), Some(b)) => (a - b).num_days().unsigned_abs() <= u64::from(n),
            _ => false,
        }
    })
}

/// Per-cell correctness of a completion against its mask. An answer with
/// the wrong number of items scores every cell wrong.
pub fn score_completion(spec: &MaskSpec, completion: &Completion, tolerance_days: Option<u32>) -> Vec<bool> {
    if !completion.parse_ok {
        return vec![false; spec.masked_columns.len()];
    }
    spec.masked_columns
        .iter()
        .zip(&completion.parsed_cells)
        .map(|(column, candidates)| {
            let truth = spec.ground_truth.get(column).map(String::as_str).unwrap_or_default();
            score_cell(candidates, truth, ColumnKind::of(column), tolerance_days)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parse_examples() {
        let p = parse_values("[Value]X[/Value],[Value]Y[/Value],[Value]Z[/Value]", 3, 2);
        assert!(p.parse_ok);
        assert_eq!(p.parsed_cells, vec![c(&["X"]), c(&["Y"]), c(&["Z"])]);

        let p = parse_values("noise [Value]A|B[/Value] noise", 1, 2);
        assert!(p.parse_ok);
        assert_eq!(p.parsed_cells, vec![c(&["A", "B"])]);

        let p = parse_values("[Value]A[/Value] [Value]B[/Value]", 3, 2);
        assert!(!p.parse_ok);
        assert_eq!(p.parsed_cells.len(), 2);

        let p = parse_values("[Value]A|B|C[/Value] [Value]unterminated", 1, 2);
        assert_eq!(p.parsed_cells, vec![c(&["A", "B"])]);
    }

    #[test]
    fn score_examples() {
        assert!(score_cell(&c(&["SF"]), "SF", ColumnKind::Text, None));
        assert!(score_cell(&c(&["UL", "SF"]), "SF", ColumnKind::Text, None));
        assert!(score_cell(&c(&["  north   wing "]), "North Wing", ColumnKind::Text, None));
        assert!(score_cell(&c(&["2024-1-5"]), "2024-01-05", ColumnKind::Date, None));
        assert!(score_cell(&c(&["2024/01/05"]), "2024-01-05", ColumnKind::Date, None));
        assert!(!score_cell(&c(&["2024-01-06"]), "2024-01-05", ColumnKind::Date, None));
        assert!(score_cell(&c(&["2024-01-06"]), "2024-01-05", ColumnKind::Date, Some(1)));
        assert!(!score_cell(&c(&["UL"]), "SF", ColumnKind::Text, None));
    }

    #[test]
    fn date_oracle() {
        // Independent civil-date computation (days from civil).
        fn days(y: i64, m: i64, d: i64) -> i64 {
            let y = if m <= 2 { y - 1 } else { y };
            let era = y.div_euclid(400);
            let yoe = y - era * 400;
            let mp = (m + 9) % 12;
            let doy = (153 * mp + 2) / 5 + d - 1;
            let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
            era * 146097 + doe - 719468
        }
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).unwrap();
        for (y, m, d) in [(2024, 1, 5), (2024, 2, 29), (2000, 12, 31), (2023, 3, 1)] {
            let parsed = parse_date_loose(&format!("{y}-{m}-{d}")).unwrap();
            assert_eq!((parsed - epoch).num_days(), days(y, m, d));
            assert_eq!(
                canonical_cell(&format!("{y}-{m}-{d}"), ColumnKind::Date),
                format!("{y:04}-{m:02}-{d:02}")
            );
        }
        assert!(parse_date_loose("2023-02-29").is_none());
    }
}
