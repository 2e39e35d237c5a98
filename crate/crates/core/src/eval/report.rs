use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::TaskOutcome;
use crate::prompts::TaskKind;

/// Grouping dimensions of the breakdown tables.
pub const GROUP_DIMENSIONS: [&str; 3] = ["discipline", "level", "area"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccuracyMode {
    /// Correct cells over masked cells.
    #[default]
    Cells,
    /// Rows with every masked cell correct over rows.
    Rows,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub cells_total: u64,
    pub cells_correct: u64,
    pub rows_total: u64,
    pub rows_correct: u64,
    pub cell_accuracy: f64,
    pub row_accuracy: f64,
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl TaskScore {
    fn add(&mut self, correct: &[bool]) {
        self.cells_total += correct.len() as u64;
        self.cells_correct += correct.iter().filter(|c| **c).count() as u64;
        self.rows_total += 1;
        self.rows_correct += u64::from(correct.iter().all(|c| *c));
        self.cell_accuracy = percent(self.cells_correct, self.cells_total);
        self.row_accuracy = percent(self.rows_correct, self.rows_total);
    }

    pub fn accuracy(&self, mode: AccuracyMode) -> f64 {
        match mode {
            AccuracyMode::Cells => self.cell_accuracy,
            AccuracyMode::Rows => self.row_accuracy,
        }
    }

    pub fn weight(&self, mode: AccuracyMode) -> u64 {
        match mode {
            AccuracyMode::Cells => self.cells_total,
            AccuracyMode::Rows => self.rows_total,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub k: usize,
    pub tolerance_days: Option<u32>,
    pub mode: AccuracyMode,
    pub incomplete: bool,
    pub failed_tasks: u64,
    pub per_task: BTreeMap<TaskKind, TaskScore>,
    /// dimension -> group -> task -> score.
    pub groups: BTreeMap<String, BTreeMap<String, BTreeMap<TaskKind, TaskScore>>>,
}

impl ScoreReport {
    /// Folds outcomes into counts. Outcomes that never got a completion are
    /// counted as failed and excluded.
    pub fn from_outcomes(
        outcomes: &[TaskOutcome],
        k: usize,
        tolerance_days: Option<u32>,
        mode: AccuracyMode,
    ) -> Self {
        let mut report = ScoreReport {
            k,
            tolerance_days,
            mode,
            ..Default::default()
        };
        for o in outcomes {
            if o.error.is_some() {
                report.failed_tasks += 1;
                report.incomplete = true;
                continue;
            }
            let kind = o.spec.task_kind;
            report.per_task.entry(kind).or_default().add(&o.correct);
            for (dim, group) in &o.groups {
                report
                    .groups
                    .entry(dim.clone())
                    .or_default()
                    .entry(group.clone())
                    .or_default()
                    .entry(kind)
                    .or_default()
                    .add(&o.correct);
            }
        }
        report
    }

    pub fn accuracy(&self, kind: TaskKind) -> Option<f64> {
        self.per_task.get(&kind).map(|s| s.accuracy(self.mode))
    }

    /// Weighted average of group accuracies along one dimension.
    pub fn recombined(&self, dimension: &str, kind: TaskKind) -> Option<f64> {
        let groups = self.groups.get(dimension)?;
        let mut weighted = 0.0;
        let mut total = 0u64;
        for scores in groups.values() {
            if let Some(s) = scores.get(&kind) {
                weighted += s.weight(self.mode) as f64 * s.accuracy(self.mode);
                total += s.weight(self.mode);
            }
        }
        (total > 0).then(|| weighted / total as f64)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text tables: overall accuracy per task, then one table per
    /// grouping dimension. Percentages to one decimal.
    pub fn to_table(&self) -> String {
        let kinds: Vec<TaskKind> = self.per_task.keys().copied().collect();
        let cell = |s: Option<&TaskScore>| match s {
            Some(s) => format!("{:>7.1}", s.accuracy(self.mode)),
            None => format!("{:>7}", "-"),
        };
        let header = |out: &mut String, first: &str| {
            let _ = write!(out, "{first:<28}");
            for k in &kinds {
                let _ = write!(out, "{:>7}", k.as_str());
            }
            out.push('\n');
        };
        let mut out = String::new();
        let _ = writeln!(
            out,
            "accuracy (%, {} mode, k = {}){}",
            match self.mode {
                AccuracyMode::Cells => "cell",
                AccuracyMode::Rows => "row",
            },
            self.k,
            if self.incomplete { " INCOMPLETE" } else { "" }
        );
        header(&mut out, "");
        let _ = write!(out, "{:<28}", "overall");
        for k in &kinds {
            out.push_str(&cell(self.per_task.get(k)));
        }
        out.push('\n');
        for (dim, groups) in &self.groups {
            out.push('\n');
            header(&mut out, dim);
            for (group, scores) in groups {
                let _ = write!(out, "{group:<28}");
                for k in &kinds {
                    out.push_str(&cell(scores.get(k)));
                }
                out.push('\n');
            }
        }
        out
    }
}
