//! Construction schedules as tabular data with dependency columns.
//!
//! A schedule is read from comma- or tab-separated text. Dependency cells
//! hold a semicolon-separated list of `<id>[:<REL>[+<lag>|-<lag>]]` items;
//! a missing relation defaults to `FS` and a missing lag to `0`. The same
//! link may be declared from both ends (predecessor cell of the successor and
//! successor cell of the predecessor); identical declarations are merged.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COL_ID: &str = "Activity ID";
pub const COL_NAME: &str = "Activity Name";
pub const COL_STATUS: &str = "Activity Status";
pub const COL_WBS: &str = "WBS";
pub const COL_DISCIPLINE: &str = "Discipline";
pub const COL_LEVEL: &str = "Level";
pub const COL_AREA: &str = "Area";
pub const COL_ZONE: &str = "Zone";
pub const COL_START: &str = "Current Start";
pub const COL_FINISH: &str = "Current Finish";
pub const COL_PREDECESSORS: &str = "Predecessor Details";
pub const COL_SUCCESSORS: &str = "Successor Details";

/// Fixed column order of the canonical serialization. Extra attribute
/// columns follow in ascending name order.
pub const STANDARD_COLUMNS: [&str; 12] = [
    COL_ID,
    COL_NAME,
    COL_STATUS,
    COL_WBS,
    COL_DISCIPLINE,
    COL_LEVEL,
    COL_AREA,
    COL_ZONE,
    COL_START,
    COL_FINISH,
    COL_PREDECESSORS,
    COL_SUCCESSORS,
];

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: malformed date in `{column}`: {value:?} ({reason})")]
    MalformedDate {
        row: usize,
        column: String,
        value: String,
        reason: String,
    },
    #[error("row {row}: malformed dependency item {item:?} in `{column}`")]
    MalformedLink {
        row: usize,
        column: String,
        item: String,
    },
    #[error("row {row}: unknown level {value:?} (expected EQ, UL, SF or RF)")]
    InvalidLevel { row: usize, value: String },
    #[error("row {row}: `{column}` must not be empty")]
    EmptyField { row: usize, column: String },
    #[error("row {row}: duplicate activity id {id:?}")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}: dependency references unknown activity {reference:?}")]
    DanglingReference { row: usize, reference: String },
    #[error("row {row}: activity {id:?} depends on itself")]
    SelfLink { row: usize, id: String },
    #[error("conflicting lags for link {predecessor} -> {successor} ({relation})")]
    ConflictingLink {
        predecessor: String,
        successor: String,
        relation: Relation,
    },
    #[error("empty table (no header row)")]
    NoHeader,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    EQ,
    UL,
    SF,
    RF,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::EQ, Level::UL, Level::SF, Level::RF];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::EQ => "EQ",
            Level::UL => "UL",
            Level::SF => "SF",
            Level::RF => "RF",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EQ" => Ok(Level::EQ),
            "UL" => Ok(Level::UL),
            "SF" => Ok(Level::SF),
            "RF" => Ok(Level::RF),
            _ => Err(s.to_owned()),
        }
    }
}

/// Dependency relation between a predecessor and a successor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    FS,
    SS,
    FF,
    SF,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::FS => "FS",
            Relation::SS => "SS",
            Relation::FF => "FF",
            Relation::SF => "SF",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FS" => Ok(Relation::FS),
            "SS" => Ok(Relation::SS),
            "FF" => Ok(Relation::FF),
            "SF" => Ok(Relation::SF),
            _ => Err(s.to_owned()),
        }
    }
}

/// Recognized status values. The column itself is open vocabulary.
pub const CANONICAL_STATUSES: [&str; 3] = ["Not Started", "In Progress", "Completed"];

/// Maps case/whitespace variants of the canonical statuses onto their
/// canonical spelling; anything else is returned trimmed.
pub fn normalize_status(raw: &str) -> String {
    let folded = crate::text::canonical(raw);
    CANONICAL_STATUSES
        .iter()
        .find(|s| s.to_lowercase() == folded)
        .map(|s| (*s).to_owned())
        .unwrap_or_else(|| raw.trim().to_owned())
}

/// Work breakdown structure path, serialized with `.` separators.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WbsPath(pub Vec<String>);

impl WbsPath {
    pub fn parse(raw: &str) -> Self {
        WbsPath(
            raw.split('.')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect(),
        )
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn segments(&self) -> &[String] {
        &self.0
    }

    pub fn common_prefix_len(&self, other: &WbsPath) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }
}

impl fmt::Display for WbsPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("."))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Activity {
    pub activity_id: String,
    pub name: String,
    pub status: String,
    pub wbs: WbsPath,
    pub discipline: String,
    pub level: Level,
    pub area: String,
    pub zone: Option<String>,
    pub current_start: NaiveDate,
    pub current_finish: NaiveDate,
    pub extra_attributes: BTreeMap<String, String>,
}

impl Activity {
    /// Calendar days from start to finish (finish − start).
    pub fn duration_days(&self) -> u32 {
        let days = (self.current_finish - self.current_start).num_days();
        u32::try_from(days.max(0)).unwrap_or(u32::MAX)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DependencyLink {
    pub predecessor_id: String,
    pub successor_id: String,
    pub relation: Relation,
    pub lag_days: i32,
}

impl DependencyLink {
    pub fn new(predecessor: &str, successor: &str, relation: Relation, lag_days: i32) -> Self {
        Self {
            predecessor_id: predecessor.to_owned(),
            successor_id: successor.to_owned(),
            relation,
            lag_days,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub activities: Vec<Activity>,
    pub links: Vec<DependencyLink>,
    pub source_label: String,
}

/// Maps logical fields to header names in the input table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatSpec {
    pub id: String,
    pub name: String,
    pub status: String,
    pub wbs: String,
    pub discipline: String,
    pub level: String,
    pub area: String,
    pub zone: String,
    pub start: String,
    pub finish: String,
    pub predecessors: String,
    pub successors: String,
}

impl Default for FormatSpec {
    fn default() -> Self {
        Self {
            id: COL_ID.into(),
            name: COL_NAME.into(),
            status: COL_STATUS.into(),
            wbs: COL_WBS.into(),
            discipline: COL_DISCIPLINE.into(),
            level: COL_LEVEL.into(),
            area: COL_AREA.into(),
            zone: COL_ZONE.into(),
            start: COL_START.into(),
            finish: COL_FINISH.into(),
            predecessors: COL_PREDECESSORS.into(),
            successors: COL_SUCCESSORS.into(),
        }
    }
}

/// One item of a dependency cell, before it is tied to the owning row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkItem {
    pub reference: String,
    pub relation: Relation,
    pub lag_days: i32,
}

/// Parses a single dependency item `<id>[:<REL>[+<lag>|-<lag>]]`.
pub fn parse_link_item(item: &str) -> Option<LinkItem> {
    let item = item.trim();
    let (reference, rest) = match item.split_once(':') {
        Some((id, rest)) => (id.trim(), Some(rest.trim())),
        None => (item, None),
    };
    if reference.is_empty() || reference.contains(char::is_whitespace) {
        return None;
    }
    let (relation, lag_days) = match rest {
        None => (Relation::FS, 0),
        Some(rest) => {
            let split = rest.find(['+', '-']);
            let (rel, lag) = match split {
                Some(i) => (&rest[..i], Some(&rest[i..])),
                None => (rest, None),
            };
            let relation = rel.trim().parse::<Relation>().ok()?;
            let lag_days = match lag {
                None => 0,
                Some(lag) => {
                    let digits = &lag[1..];
                    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                        return None;
                    }
                    lag.parse::<i32>().ok()?
                }
            };
            (relation, lag_days)
        }
    };
    Some(LinkItem {
        reference: reference.to_owned(),
        relation,
        lag_days,
    })
}

pub fn parse_link_cell(cell: &str) -> Result<Vec<LinkItem>, String> {
    cell.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_link_item(s).ok_or_else(|| s.to_owned()))
        .collect()
}

fn format_link_item(reference: &str, relation: Relation, lag_days: i32) -> String {
    match lag_days {
        0 => format!("{reference}:{relation}"),
        lag if lag > 0 => format!("{reference}:{relation}+{lag}"),
        lag => format!("{reference}:{relation}{lag}"),
    }
}

fn detect_delimiter(raw: &str) -> u8 {
    let header = raw.lines().next().unwrap_or_default();
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn parse_date(row: usize, column: &str, value: &str) -> Result<NaiveDate, ScheduleError> {
    NaiveDate::parse_from_str(value.trim(), DATE_FORMAT).map_err(|e| ScheduleError::MalformedDate {
        row,
        column: column.to_owned(),
        value: value.to_owned(),
        reason: e.to_string(),
    })
}

/// Parses tabular text into a validated [`Schedule`].
///
/// Rows are numbered from 1 (the first data row after the header) in
/// every error locator.
pub fn parse_schedule(raw: &str, spec: &FormatSpec, source_label: &str) -> Result<Schedule, ScheduleError> {
    if raw.trim().is_empty() {
        return Err(ScheduleError::NoHeader);
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(raw))
        .has_headers(true)
        .flexible(false)
        .from_reader(raw.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();

    let mandatory = [
        &spec.id,
        &spec.start,
        &spec.finish,
        &spec.status,
        &spec.wbs,
        &spec.discipline,
        &spec.level,
        &spec.area,
        &spec.predecessors,
        &spec.successors,
    ];
    for col in mandatory {
        if !index.contains_key(col.as_str()) {
            return Err(ScheduleError::MissingColumn(col.clone()));
        }
    }
    let col = |name: &str| index.get(name).copied();
    let known: BTreeSet<usize> = [
        &spec.id,
        &spec.name,
        &spec.status,
        &spec.wbs,
        &spec.discipline,
        &spec.level,
        &spec.area,
        &spec.zone,
        &spec.start,
        &spec.finish,
        &spec.predecessors,
        &spec.successors,
    ]
    .iter()
    .filter_map(|c| col(c))
    .collect();

    let mut activities = Vec::new();
    // (row, predecessor, successor, relation, lag)
    let mut declared: Vec<(usize, String, String, Relation, i32)> = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let cell = |c: Option<usize>| c.and_then(|c| record.get(c)).unwrap_or("").trim().to_owned();
        let required = |name: &String| -> Result<String, ScheduleError> {
            let v = cell(col(name));
            if v.is_empty() {
                Err(ScheduleError::EmptyField {
                    row,
                    column: name.clone(),
                })
            } else {
                Ok(v)
            }
        };

        let activity_id = required(&spec.id)?;
        let wbs_raw = required(&spec.wbs)?;
        let discipline = required(&spec.discipline)?;
        let level_raw = required(&spec.level)?;
        let level = level_raw
            .parse::<Level>()
            .map_err(|value| ScheduleError::InvalidLevel { row, value })?;
        let start_raw = cell(col(&spec.start));
        let finish_raw = cell(col(&spec.finish));
        let current_start = parse_date(row, &spec.start, &start_raw)?;
        let current_finish = parse_date(row, &spec.finish, &finish_raw)?;
        if current_start > current_finish {
            return Err(ScheduleError::MalformedDate {
                row,
                column: spec.finish.clone(),
                value: finish_raw,
                reason: format!("finish precedes start {start_raw}"),
            });
        }
        let zone = Some(cell(col(&spec.zone))).filter(|z| !z.is_empty());

        let mut extra_attributes = BTreeMap::new();
        for (c, header) in headers.iter().enumerate() {
            if !known.contains(&c) {
                extra_attributes.insert(header.clone(), record.get(c).unwrap_or("").trim().to_owned());
            }
        }

        for (column, is_pred) in [(&spec.predecessors, true), (&spec.successors, false)] {
            let items = parse_link_cell(&cell(col(column))).map_err(|item| ScheduleError::MalformedLink {
                row,
                column: column.clone(),
                item,
            })?;
            for it in items {
                let (p, s) = if is_pred {
                    (it.reference, activity_id.clone())
                } else {
                    (activity_id.clone(), it.reference)
                };
                declared.push((row, p, s, it.relation, it.lag_days));
            }
        }

        activities.push(Activity {
            activity_id,
            name: cell(col(&spec.name)),
            status: normalize_status(&cell(col(&spec.status))),
            wbs: WbsPath::parse(&wbs_raw),
            discipline,
            level,
            area: required(&spec.area)?,
            zone,
            current_start,
            current_finish,
            extra_attributes,
        });
    }

    let mut ids = HashMap::new();
    for (i, a) in activities.iter().enumerate() {
        if ids.insert(a.activity_id.as_str(), i).is_some() {
            return Err(ScheduleError::DuplicateId {
                row: i + 1,
                id: a.activity_id.clone(),
            });
        }
    }

    let mut merged: BTreeMap<(String, String, Relation), i32> = BTreeMap::new();
    for (row, p, s, relation, lag) in declared {
        for end in [&p, &s] {
            if !ids.contains_key(end.as_str()) {
                return Err(ScheduleError::DanglingReference {
                    row,
                    reference: end.clone(),
                });
            }
        }
        if p == s {
            return Err(ScheduleError::SelfLink { row, id: p });
        }
        match merged.get(&(p.clone(), s.clone(), relation)) {
            Some(&existing) if existing != lag => {
                return Err(ScheduleError::ConflictingLink {
                    predecessor: p,
                    successor: s,
                    relation,
                })
            }
            Some(_) => {}
            None => {
                merged.insert((p, s, relation), lag);
            }
        }
    }
    let links = merged
        .into_iter()
        .map(|((predecessor_id, successor_id, relation), lag_days)| DependencyLink {
            predecessor_id,
            successor_id,
            relation,
            lag_days,
        })
        .collect();

    Ok(Schedule {
        activities,
        links,
        source_label: source_label.to_owned(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    EmptyId,
    DuplicateId,
    EmptyWbs,
    EmptyDiscipline,
    DateOrder,
    DanglingReference,
    SelfLink,
    DuplicateLink,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based activity row; links are located at their successor's row
    /// (or predecessor's, or 0 when neither endpoint exists).
    pub row: usize,
    pub field: String,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Checks every schedule invariant; violations are returned sorted by
/// `(row, field)`.
pub fn validate(schedule: &Schedule) -> ValidationReport {
    let mut violations = Vec::new();
    let mut rows: HashMap<&str, usize> = HashMap::new();

    for (i, a) in schedule.activities.iter().enumerate() {
        let row = i + 1;
        let mut push = |field: &str, kind, message: String| {
            violations.push(Violation {
                row,
                field: field.to_owned(),
                kind,
                message,
            })
        };
        if a.activity_id.trim().is_empty() {
            push(COL_ID, ViolationKind::EmptyId, "empty activity id".into());
        } else if rows.contains_key(a.activity_id.as_str()) {
            push(
                COL_ID,
                ViolationKind::DuplicateId,
                format!("duplicate activity id {:?}", a.activity_id),
            );
        } else {
            rows.insert(&a.activity_id, row);
        }
        if a.wbs.depth() == 0 {
            push(COL_WBS, ViolationKind::EmptyWbs, "WBS has no segments".into());
        }
        if a.discipline.split('.').all(|s| s.trim().is_empty()) {
            push(COL_DISCIPLINE, ViolationKind::EmptyDiscipline, "empty discipline".into());
        }
        if a.current_start > a.current_finish {
            push(
                COL_FINISH,
                ViolationKind::DateOrder,
                format!("finish {} precedes start {}", a.current_finish, a.current_start),
            );
        }
    }

    let mut seen = BTreeSet::new();
    for link in &schedule.links {
        let row = rows
            .get(link.successor_id.as_str())
            .or_else(|| rows.get(link.predecessor_id.as_str()))
            .copied()
            .unwrap_or(0);
        let mut push = |kind, message: String| {
            violations.push(Violation {
                row,
                field: COL_PREDECESSORS.to_owned(),
                kind,
                message,
            })
        };
        for end in [&link.predecessor_id, &link.successor_id] {
            if !rows.contains_key(end.as_str()) {
                push(ViolationKind::DanglingReference, format!("unknown activity {end:?}"));
            }
        }
        if link.predecessor_id == link.successor_id {
            push(ViolationKind::SelfLink, format!("{:?} depends on itself", link.successor_id));
        }
        if !seen.insert((&link.predecessor_id, &link.successor_id, link.relation)) {
            push(
                ViolationKind::DuplicateLink,
                format!(
                    "duplicate link {} -> {} ({})",
                    link.predecessor_id, link.successor_id, link.relation
                ),
            );
        }
    }

    violations.sort_by(|a, b| (a.row, &a.field).cmp(&(b.row, &b.field)));
    ValidationReport { violations }
}

/// Calendar days from start to finish.
pub fn duration_days(activity: &Activity) -> u32 {
    activity.duration_days()
}

impl Schedule {
    pub fn activity(&self, id: &str) -> Option<&Activity> {
        self.activities.iter().find(|a| a.activity_id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.activities.iter().position(|a| a.activity_id == id)
    }

    /// Extra attribute column names across all activities, ascending.
    pub fn extra_columns(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .activities
            .iter()
            .flat_map(|a| a.extra_attributes.keys())
            .collect();
        set.into_iter().cloned().collect()
    }

    /// All columns of the canonical serialization, in order.
    pub fn columns(&self) -> Vec<String> {
        STANDARD_COLUMNS
            .iter()
            .map(|c| (*c).to_owned())
            .chain(self.extra_columns())
            .collect()
    }

    pub fn predecessor_cell(&self, id: &str) -> String {
        let mut items: Vec<_> = self.links.iter().filter(|l| l.successor_id == id).collect();
        items.sort_by(|a, b| (&a.predecessor_id, a.relation).cmp(&(&b.predecessor_id, b.relation)));
        items
            .iter()
            .map(|l| format_link_item(&l.predecessor_id, l.relation, l.lag_days))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn successor_cell(&self, id: &str) -> String {
        let mut items: Vec<_> = self.links.iter().filter(|l| l.predecessor_id == id).collect();
        items.sort_by(|a, b| (&a.successor_id, a.relation).cmp(&(&b.successor_id, b.relation)));
        items
            .iter()
            .map(|l| format_link_item(&l.successor_id, l.relation, l.lag_days))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// The canonical cell text of `column` for the activity at `index`.
    pub fn cell(&self, index: usize, column: &str) -> Option<String> {
        let a = self.activities.get(index)?;
        let v = match column {
            COL_ID => a.activity_id.clone(),
            COL_NAME => a.name.clone(),
            COL_STATUS => a.status.clone(),
            COL_WBS => a.wbs.to_string(),
            COL_DISCIPLINE => a.discipline.clone(),
            COL_LEVEL => a.level.to_string(),
            COL_AREA => a.area.clone(),
            COL_ZONE => a.zone.clone().unwrap_or_default(),
            COL_START => a.current_start.format(DATE_FORMAT).to_string(),
            COL_FINISH => a.current_finish.format(DATE_FORMAT).to_string(),
            COL_PREDECESSORS => self.predecessor_cell(&a.activity_id),
            COL_SUCCESSORS => self.successor_cell(&a.activity_id),
            other => a.extra_attributes.get(other).cloned().unwrap_or_default(),
        };
        Some(v)
    }

    /// Canonical comma-separated serialization with a fixed column order.
    pub fn to_csv(&self) -> Result<String, ScheduleError> {
        let columns = self.columns();
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer.write_record(&columns)?;
        for i in 0..self.activities.len() {
            let row: Vec<String> = columns.iter().map(|c| self.cell(i, c).unwrap_or_default()).collect();
            writer.write_record(&row)?;
        }
        let bytes = writer.into_inner().map_err(|e| ScheduleError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
    }

    /// Line-delimited export: one JSON activity object per line.
    pub fn to_jsonl(&self) -> Result<String, ScheduleError> {
        #[derive(Serialize)]
        struct Record<'a> {
            #[serde(flatten)]
            activity: &'a Activity,
            predecessor_details: String,
            successor_details: String,
        }
        let mut out = String::new();
        for a in &self.activities {
            let rec = Record {
                activity: a,
                predecessor_details: self.predecessor_cell(&a.activity_id),
                successor_details: self.successor_cell(&a.activity_id),
            };
            out.push_str(&serde_json::to_string(&rec)?);
            out.push('\n');
        }
        Ok(out)
    }
}
