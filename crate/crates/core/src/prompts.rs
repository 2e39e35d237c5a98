//! Prompt catalog: eight rule-generation categories and the task prompts
//! (missing values, dependency analysis, automated planning, polishing).
//!
//! Templates are plain-text fixtures under `prompts/`. Lines starting with
//! `#` are editorial comments and are stripped on load. A template may only
//! use `{placeholder}` names from [`DECLARED_PLACEHOLDERS`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HEADER_ROW: &str = "ROW:";
pub const HEADER_STATIC: &str = "STATIC KNOWLEDGE:";
pub const HEADER_CONTEXT: &str = "CONTEXT:";
pub const HEADER_RULES: &str = "RULES:";
pub const HEADER_ANSWER: &str = "ANSWER FORMAT:";

/// The section headers of a task prompt, in order.
pub const SECTION_HEADERS: [&str; 4] = [HEADER_ROW, HEADER_STATIC, HEADER_CONTEXT, HEADER_RULES];

/// Placeholders a template may reference. The shipped fixtures use none;
/// any `{name}` in a loaded template is rejected.
pub const DECLARED_PLACEHOLDERS: &[&str] = &[];

/// Candidate separator inside one `[Value]...[/Value]` item.
pub const CANDIDATE_SEPARATOR: char = '|';

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown prompt category {0:?}")]
    UnknownCategory(String),
    #[error("missing mandatory section `{0}`")]
    MissingSection(&'static str),
    #[error("template {template} references undeclared placeholder {{{name}}}")]
    UndeclaredPlaceholder { template: String, name: String },
    #[error("prompt registry is incomplete: {0}")]
    IncompleteRegistry(String),
    #[error("{kind} prompt needs {expected} answer columns, got {found}")]
    ArityMismatch {
        kind: TaskKind,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptCategory {
    ActivitySequenceAndTiming,
    CalculateActivityDuration,
    HierarchicalTreeStructure,
    AssessSequenceReconstruction,
    AnalyzeTimeRelationships,
    OverlappingDisciplines,
    InterDisciplinaryDependencies,
    AreaBasedDependencies,
}

impl PromptCategory {
    pub const ALL: [PromptCategory; 8] = [
        PromptCategory::ActivitySequenceAndTiming,
        PromptCategory::CalculateActivityDuration,
        PromptCategory::HierarchicalTreeStructure,
        PromptCategory::AssessSequenceReconstruction,
        PromptCategory::AnalyzeTimeRelationships,
        PromptCategory::OverlappingDisciplines,
        PromptCategory::InterDisciplinaryDependencies,
        PromptCategory::AreaBasedDependencies,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PromptCategory::ActivitySequenceAndTiming => "ActivitySequenceAndTiming",
            PromptCategory::CalculateActivityDuration => "CalculateActivityDuration",
            PromptCategory::HierarchicalTreeStructure => "HierarchicalTreeStructure",
            PromptCategory::AssessSequenceReconstruction => "AssessSequenceReconstruction",
            PromptCategory::AnalyzeTimeRelationships => "AnalyzeTimeRelationships",
            PromptCategory::OverlappingDisciplines => "OverlappingDisciplines",
            PromptCategory::InterDisciplinaryDependencies => "InterDisciplinaryDependencies",
            PromptCategory::AreaBasedDependencies => "AreaBasedDependencies",
        }
    }

    /// Fixture file stem under `prompts/rules/`.
    pub fn file_stem(self) -> &'static str {
        match self {
            PromptCategory::ActivitySequenceAndTiming => "activity_sequence_and_timing",
            PromptCategory::CalculateActivityDuration => "calculate_activity_duration",
            PromptCategory::HierarchicalTreeStructure => "hierarchical_tree_structure",
            PromptCategory::AssessSequenceReconstruction => "assess_sequence_reconstruction",
            PromptCategory::AnalyzeTimeRelationships => "analyze_time_relationships",
            PromptCategory::OverlappingDisciplines => "overlapping_disciplines",
            PromptCategory::InterDisciplinaryDependencies => "inter_disciplinary_dependencies",
            PromptCategory::AreaBasedDependencies => "area_based_dependencies",
        }
    }
}

impl FromStr for PromptCategory {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptCategory::ALL
            .into_iter()
            .find(|c| c.name() == s || c.file_stem() == s)
            .ok_or_else(|| PromptError::UnknownCategory(s.to_owned()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    MVP,
    DA,
    AP,
    Polish,
}

impl TaskKind {
    pub const SCORED: [TaskKind; 3] = [TaskKind::MVP, TaskKind::DA, TaskKind::AP];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::MVP => "MVP",
            TaskKind::DA => "DA",
            TaskKind::AP => "AP",
            TaskKind::Polish => "Polish",
        }
    }

    fn file_stem(self) -> &'static str {
        match self {
            TaskKind::MVP => "mvp",
            TaskKind::DA => "da",
            TaskKind::AP => "ap",
            TaskKind::Polish => "polish",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MVP" => Ok(TaskKind::MVP),
            "DA" => Ok(TaskKind::DA),
            "AP" => Ok(TaskKind::AP),
            "POLISH" => Ok(TaskKind::Polish),
            _ => Err(format!("unknown task kind {s:?}")),
        }
    }
}

/// Machine-checkable answer shape: `arity` `[Value]...[/Value]` items in
/// `columns` order, each holding up to `k` `|`-separated ranked candidates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerFormat {
    pub columns: Vec<String>,
    pub k: usize,
}

impl AnswerFormat {
    pub fn arity(&self) -> usize {
        self.columns.len()
    }
}

impl fmt::Display for AnswerFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.arity();
        write!(
            f,
            "Return exactly {n} value{} as a comma-separated list, each enclosed within [Value] and [/Value] tags, \
             in this column order: {}.",
            if n == 1 { "" } else { "s" },
            self.columns.join(", ")
        )?;
        if self.k > 1 {
            write!(
                f,
                " Inside each tag give up to {} ranked candidates separated by {CANDIDATE_SEPARATOR}, best first, \
                 e.g. [Value]best{CANDIDATE_SEPARATOR}second[/Value].",
                self.k
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPrompt {
    pub kind: TaskKind,
    pub system_text: String,
    pub user_text: String,
    pub answer_format: Option<AnswerFormat>,
}

/// Raw section bodies of a task prompt.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSections {
    pub row: String,
    pub static_knowledge: String,
    pub context: String,
    pub rules: String,
}

impl PromptSections {
    /// The four labeled sections in fixed order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (header, body) in SECTION_HEADERS
            .iter()
            .zip([&self.row, &self.static_knowledge, &self.context, &self.rules])
        {
            out.push_str(header);
            out.push('\n');
            let body = body.trim_end();
            if !body.is_empty() {
                out.push_str(body);
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct TaskTemplates {
    system: String,
    user: String,
}

/// All templates, validated on construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptRegistry {
    rules: BTreeMap<PromptCategory, String>,
    tasks: BTreeMap<TaskKind, TaskTemplates>,
}

macro_rules! fixture {
    ($path:literal) => {
        include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/prompts/", $path))
    };
}

const BUILTIN_RULES: [(&str, &str); 8] = [
    ("activity_sequence_and_timing", fixture!("rules/activity_sequence_and_timing.txt")),
    ("calculate_activity_duration", fixture!("rules/calculate_activity_duration.txt")),
    ("hierarchical_tree_structure", fixture!("rules/hierarchical_tree_structure.txt")),
    ("assess_sequence_reconstruction", fixture!("rules/assess_sequence_reconstruction.txt")),
    ("analyze_time_relationships", fixture!("rules/analyze_time_relationships.txt")),
    ("overlapping_disciplines", fixture!("rules/overlapping_disciplines.txt")),
    ("inter_disciplinary_dependencies", fixture!("rules/inter_disciplinary_dependencies.txt")),
    ("area_based_dependencies", fixture!("rules/area_based_dependencies.txt")),
];

const BUILTIN_TASKS: [(&str, &str); 8] = [
    ("mvp_system", fixture!("tasks/mvp_system.txt")),
    ("mvp_user", fixture!("tasks/mvp_user.txt")),
    ("da_system", fixture!("tasks/da_system.txt")),
    ("da_user", fixture!("tasks/da_user.txt")),
    ("ap_system", fixture!("tasks/ap_system.txt")),
    ("ap_user", fixture!("tasks/ap_user.txt")),
    ("polish_system", fixture!("tasks/polish_system.txt")),
    ("polish_user", fixture!("tasks/polish_user.txt")),
];

/// Drops `#` comment lines and trailing whitespace.
fn strip_comments(raw: &str) -> String {
    raw.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_owned()
}

fn placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) => {
                out.push(after[..close].to_owned());
                rest = &after[close + 1..];
            }
            None => break,
        }
    }
    out
}

fn check_placeholders(name: &str, template: &str) -> Result<(), PromptError> {
    for p in placeholders(template) {
        if !DECLARED_PLACEHOLDERS.contains(&p.as_str()) {
            return Err(PromptError::UndeclaredPlaceholder {
                template: name.to_owned(),
                name: p,
            });
        }
    }
    Ok(())
}

impl PromptRegistry {
    /// The catalog compiled into the library.
    pub fn builtin() -> Self {
        let mut files = BTreeMap::new();
        for (stem, text) in BUILTIN_RULES {
            files.insert(format!("rules/{stem}"), text.to_owned());
        }
        for (stem, text) in BUILTIN_TASKS {
            files.insert(format!("tasks/{stem}"), text.to_owned());
        }
        Self::from_files(&files).expect("builtin prompt fixtures are complete")
    }

    /// Loads `rules/*.txt` and `tasks/*.txt` from a `prompts/` directory.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut files = BTreeMap::new();
        for sub in ["rules", "tasks"] {
            let path = dir.join(sub);
            let entries = fs::read_dir(&path).map_err(|source| PromptError::Io {
                path: path.display().to_string(),
                source,
            })?;
            for entry in entries {
                let entry = entry.map_err(|source| PromptError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                let p = entry.path();
                if p.extension().and_then(|e| e.to_str()) != Some("txt") {
                    continue;
                }
                let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
                let text = fs::read_to_string(&p).map_err(|source| PromptError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                files.insert(format!("{sub}/{stem}"), text);
            }
        }
        Self::from_files(&files)
    }

    fn from_files(files: &BTreeMap<String, String>) -> Result<Self, PromptError> {
        let mut rules = BTreeMap::new();
        let mut tasks = BTreeMap::new();
        for (name, raw) in files {
            let text = strip_comments(raw);
            check_placeholders(name, &text)?;
            if let Some(stem) = name.strip_prefix("rules/") {
                let category: PromptCategory = stem.parse()?;
                rules.insert(category, text);
            }
        }
        if rules.len() != PromptCategory::ALL.len() {
            let missing: Vec<_> = PromptCategory::ALL
                .iter()
                .filter(|c| !rules.contains_key(c))
                .map(|c| c.name())
                .collect();
            return Err(PromptError::IncompleteRegistry(format!("missing rule categories {missing:?}")));
        }
        for kind in [TaskKind::MVP, TaskKind::DA, TaskKind::AP, TaskKind::Polish] {
            let get = |part: &str| {
                files
                    .get(&format!("tasks/{}_{part}", kind.file_stem()))
                    .map(|raw| strip_comments(raw))
                    .ok_or_else(|| PromptError::IncompleteRegistry(format!("missing {kind} {part} template")))
            };
            tasks.insert(
                kind,
                TaskTemplates {
                    system: get("system")?,
                    user: get("user")?,
                },
            );
        }
        Ok(Self { rules, tasks })
    }

    pub fn rule_template(&self, category: PromptCategory) -> &str {
        &self.rules[&category]
    }

    /// Template text followed by a `CONTEXT:` block.
    pub fn build_rule_prompt(&self, category: PromptCategory, context_text: &str) -> String {
        let mut out = self.rule_template(category).to_owned();
        out.push_str("\n\n");
        out.push_str(HEADER_CONTEXT);
        out.push('\n');
        let body = context_text.trim_end();
        if !body.is_empty() {
            out.push_str(body);
            out.push('\n');
        }
        out
    }

    /// All eight category instructions, one per line, as a default rules
    /// section.
    pub fn default_rules_text(&self) -> String {
        PromptCategory::ALL
            .iter()
            .map(|c| format!("- {}", self.rules[c].replace('\n', " ")))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Assembles a task prompt. `answer_columns` lists the masked columns for
    /// scored kinds and is ignored for [`TaskKind::Polish`].
    pub fn build_task_prompt(
        &self,
        kind: TaskKind,
        sections: &PromptSections,
        answer_columns: &[String],
        k: usize,
    ) -> Result<TaskPrompt, PromptError> {
        let templates = &self.tasks[&kind];
        let answer_format = match kind {
            TaskKind::Polish => {
                if sections.static_knowledge.trim().is_empty()
                    && sections.context.trim().is_empty()
                    && sections.rules.trim().is_empty()
                    && sections.row.trim().is_empty()
                {
                    return Err(PromptError::MissingSection(HEADER_CONTEXT));
                }
                None
            }
            scored => {
                if sections.row.trim().is_empty() {
                    return Err(PromptError::MissingSection(HEADER_ROW));
                }
                let expected = match scored {
                    TaskKind::MVP => Some(3),
                    TaskKind::AP => Some(2),
                    _ => None,
                };
                if let Some(expected) = expected.filter(|e| *e != answer_columns.len()) {
                    return Err(PromptError::ArityMismatch {
                        kind,
                        expected,
                        found: answer_columns.len(),
                    });
                }
                if answer_columns.is_empty() {
                    return Err(PromptError::ArityMismatch {
                        kind,
                        expected: 1,
                        found: 0,
                    });
                }
                Some(AnswerFormat {
                    columns: answer_columns.to_vec(),
                    k: k.max(1),
                })
            }
        };

        let mut user_text = templates.user.clone();
        user_text.push_str("\n\n");
        user_text.push_str(&sections.render());
        if let Some(format) = &answer_format {
            user_text.push_str(HEADER_ANSWER);
            user_text.push('\n');
            user_text.push_str(&format.to_string());
            user_text.push('\n');
        }
        Ok(TaskPrompt {
            kind,
            system_text: templates.system.clone(),
            user_text,
            answer_format,
        })
    }
}

/// Splits a rendered prompt into its four section bodies, if all headers
/// are present as whole lines.
pub fn extract_sections(user_text: &str) -> Option<PromptSections> {
    let lines: Vec<&str> = user_text.lines().collect();
    let find = |header: &str| lines.iter().position(|l| *l == header);
    let starts: Vec<usize> = SECTION_HEADERS.iter().map(|h| find(h)).collect::<Option<_>>()?;
    let end = find(HEADER_ANSWER).unwrap_or(lines.len());
    if !starts.windows(2).all(|w| w[0] < w[1]) || starts[3] >= end {
        return None;
    }
    let body = |from: usize, to: usize| lines[from + 1..to].join("\n").trim_end().to_owned();
    Some(PromptSections {
        row: body(starts[0], starts[1]),
        static_knowledge: body(starts[1], starts[2]),
        context: body(starts[2], starts[3]),
        rules: body(starts[3], end),
    })
}

/// Placeholder shown in place of a masked cell.
pub const MASK_TOKEN: &str = "[MASKED]";

/// Label of the row line listing the masked columns.
pub const MISSING_LABEL: &str = "Missing columns";

const MISSING_SEPARATOR: &str = "; ";

/// Renders a row as `column: value` lines, replacing masked cells with
/// [`MASK_TOKEN`] and appending the list of masked columns.
pub fn render_row(cells: &[(String, String)], masked: &[String]) -> String {
    let mut out = String::new();
    for (column, value) in cells {
        let shown = if masked.contains(column) { MASK_TOKEN } else { value.as_str() };
        out.push_str(&format!("{column}: {shown}\n"));
    }
    if !masked.is_empty() {
        out.push_str(&format!("{MISSING_LABEL}: {}\n", masked.join(MISSING_SEPARATOR)));
    }
    out
}

/// Row identity and masked columns recovered from a rendered row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowQuery {
    pub cells: Vec<(String, String)>,
    pub masked: Vec<String>,
}

impl RowQuery {
    pub fn value(&self, column: &str) -> Option<&str> {
        self.cells.iter().find(|(c, _)| c == column).map(|(_, v)| v.as_str())
    }
}

pub fn parse_row(row_text: &str) -> RowQuery {
    let mut cells = Vec::new();
    let mut masked = Vec::new();
    for line in row_text.lines() {
        let Some((column, value)) = line.split_once(": ") else {
            continue;
        };
        if column == MISSING_LABEL {
            masked = value.split(MISSING_SEPARATOR).map(|c| c.trim().to_owned()).collect();
        } else {
            cells.push((column.to_owned(), value.to_owned()));
        }
    }
    RowQuery { cells, masked }
}

/// Wire form of an answer: one `[Value]...[/Value]` item per cell, ranked
/// candidates joined by [`CANDIDATE_SEPARATOR`], items joined by commas.
pub fn render_values<S: AsRef<str>>(cells: &[Vec<S>]) -> String {
    cells
        .iter()
        .map(|candidates| {
            let joined: Vec<&str> = candidates.iter().map(AsRef::as_ref).collect();
            format!("[Value]{}[/Value]", joined.join(&CANDIDATE_SEPARATOR.to_string()))
        })
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sections() -> PromptSections {
        PromptSections {
            row: "Activity ID: A1".into(),
            static_knowledge: "TERM WBS: work breakdown structure".into(),
            context: "FIRST-ORDER:\nA0 | x".into(),
            rules: "- follow FS links".into(),
        }
    }

    fn cols(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("C{i}")).collect()
    }

    #[test]
    fn registry_has_every_category_once() {
        let r = PromptRegistry::builtin();
        for c in PromptCategory::ALL {
            assert!(!r.rule_template(c).is_empty());
            assert!(!r.rule_template(c).contains('#'));
        }
    }

    #[test]
    fn rule_prompt_appends_context() {
        let r = PromptRegistry::builtin();
        let p = r.build_rule_prompt(PromptCategory::AnalyzeTimeRelationships, "");
        assert!(p.ends_with("\n\nCONTEXT:\n"));
        assert_eq!(p, r.build_rule_prompt(PromptCategory::AnalyzeTimeRelationships, ""));
        assert!(matches!("Nope".parse::<PromptCategory>(), Err(PromptError::UnknownCategory(_))));
    }

    #[test]
    fn key_phrases() {
        let r = PromptRegistry::builtin();
        let expect = [
            (PromptCategory::ActivitySequenceAndTiming, "List the sequence of construction activities"),
            (PromptCategory::CalculateActivityDuration, "calculate the duration for each activity"),
            (PromptCategory::HierarchicalTreeStructure, "hierarchical tree structure"),
            (PromptCategory::AssessSequenceReconstruction, "sequence can be recovered"),
            (PromptCategory::AnalyzeTimeRelationships, "time domain relationship"),
            (PromptCategory::OverlappingDisciplines, "overlapping disciplines"),
            (PromptCategory::InterDisciplinaryDependencies, "inter-dependency between different disciplines"),
            (PromptCategory::AreaBasedDependencies, "area-based dependencies"),
        ];
        for (c, phrase) in expect {
            assert!(r.rule_template(c).contains(phrase), "{c:?}");
        }
    }

    #[test]
    fn mvp_has_each_header_once() {
        let r = PromptRegistry::builtin();
        let p = r.build_task_prompt(TaskKind::MVP, &sections(), &cols(3), 2).unwrap();
        for h in SECTION_HEADERS.iter().chain([&HEADER_ANSWER]) {
            assert_eq!(p.user_text.lines().filter(|l| l == h).count(), 1, "{h}");
        }
        assert!(p.system_text.contains("exactly three values"));
        assert_eq!(p.answer_format.as_ref().unwrap().arity(), 3);
        assert_eq!(extract_sections(&p.user_text).unwrap(), sections());
    }

    #[test]
    fn ap_and_polish_phrases() {
        let r = PromptRegistry::builtin();
        let ap = r.build_task_prompt(TaskKind::AP, &sections(), &cols(2), 2).unwrap();
        let all = format!("{}\n{}", ap.system_text, ap.user_text);
        assert!(all.contains("Current Start") && all.contains("Current Finish"));
        let polish = r.build_task_prompt(TaskKind::Polish, &sections(), &[], 2).unwrap();
        for name in ["Missing Value Prediction", "Dependency Analysis", "Schedule Automation"] {
            assert!(polish.system_text.contains(name), "{name}");
        }
        assert!(polish.answer_format.is_none());
    }

    #[test]
    fn missing_row_rejected() {
        let r = PromptRegistry::builtin();
        let s = PromptSections {
            row: "  ".into(),
            ..sections()
        };
        assert!(matches!(
            r.build_task_prompt(TaskKind::DA, &s, &cols(4), 2),
            Err(PromptError::MissingSection(HEADER_ROW))
        ));
        assert!(matches!(
            r.build_task_prompt(TaskKind::MVP, &sections(), &cols(2), 2),
            Err(PromptError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn undeclared_placeholder_rejected() {
        assert!(check_placeholders("t", "hello there").is_ok());
        assert!(matches!(
            check_placeholders("t", "hello {who}"),
            Err(PromptError::UndeclaredPlaceholder { .. })
        ));
    }

    #[test]
    fn load_dir_matches_builtin() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("prompts");
        assert_eq!(PromptRegistry::load_dir(&dir).unwrap(), PromptRegistry::builtin());
    }

    #[test]
    fn row_round_trip() {
        let cells = vec![
            ("Activity ID".to_owned(), "A1".to_owned()),
            ("Level".to_owned(), "UL".to_owned()),
            ("Area".to_owned(), "North".to_owned()),
        ];
        let masked = vec!["Level".to_owned()];
        let text = render_row(&cells, &masked);
        assert!(text.contains("Level: [MASKED]"));
        let q = parse_row(&text);
        assert_eq!(q.value("Activity ID"), Some("A1"));
        assert_eq!(q.masked, masked);
        assert_eq!(render_values(&[vec!["A", "B"], vec!["C"]]), "[Value]A|B[/Value],[Value]C[/Value]");
    }
}
