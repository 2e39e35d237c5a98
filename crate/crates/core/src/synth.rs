//! Seeded synthetic schedules and attribute association matrices.

use std::collections::BTreeMap;
use std::fmt::Write;

use chrono::{Duration, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::{cosine_similarity, Embedder, KnowledgeError};
use crate::rng::stream;
use crate::schedule::{Activity, DependencyLink, Level, Relation, Schedule, WbsPath};

pub const DEFAULT_TARGET_MEAN_DEGREE: f64 = 3.86;
pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_DISCIPLINES: [&str; 18] = [
    "CSA.Arch.Arch-D",
    "CSA.Arch.CRCs-D",
    "CSA.Arch.Metal",
    "CSA.Arch.RF",
    "CSA.Arch.WPRF",
    "CSA.Civil.Earthwork",
    "CSA.Struc.Concrete",
    "CSA.Struc.Modules",
    "CSA.Struc.Piers",
    "CSA.Struc.Steel",
    "CSA.Struc.Strut",
    "MEP.Mech.Dry",
    "MEP.Mech.Wet",
    "MEP.Proc.HP",
    "MEP.Proc.LP",
    "MEP.Proc.Vac",
    "MEP.Proc.Waste",
    "MEP.Proc.Water",
];
pub const DEFAULT_AREAS: [&str; 4] = ["6E", "9E", "SU", "10E"];
const ZONES: [&str; 4] = ["Z1", "Z2", "Z3", "Z4"];
const VERBS: [&str; 6] = ["Prepare", "Install", "Erect", "Inspect", "Test", "Complete"];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible generator parameters: {0}")]
    InfeasibleParams(String),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {0:?} has no values")]
    EmptyColumn(String),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub n_activities: usize,
    pub disciplines: Vec<(String, f64)>,
    pub levels: Vec<(Level, f64)>,
    pub areas: Vec<(String, f64)>,
    pub statuses: Vec<(String, f64)>,
    pub relation_mix: Vec<(Relation, f64)>,
    pub target_mean_degree: f64,
    /// Successors are drawn from this many following positions.
    pub window: usize,
    pub max_duration_days: u32,
    pub start_date: NaiveDate,
    pub seed: u64,
}

fn uniform<T: Clone>(items: &[T]) -> Vec<(T, f64)> {
    items.iter().map(|i| (i.clone(), 1.0)).collect()
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_activities: 100,
            disciplines: uniform(&DEFAULT_DISCIPLINES.map(str::to_owned)),
            levels: uniform(&[Level::EQ, Level::UL, Level::SF, Level::RF]),
            areas: uniform(&DEFAULT_AREAS.map(str::to_owned)),
            statuses: vec![
                ("Not Started".into(), 0.5),
                ("In Progress".into(), 0.2),
                ("Completed".into(), 0.3),
            ],
            relation_mix: vec![
                (Relation::FS, 0.80),
                (Relation::SS, 0.10),
                (Relation::FF, 0.08),
                (Relation::SF, 0.02),
            ],
            target_mean_degree: DEFAULT_TARGET_MEAN_DEGREE,
            window: DEFAULT_WINDOW,
            max_duration_days: 10,
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            seed: 42,
        }
    }
}

fn weights<T>(name: &str, items: &[(T, f64)]) -> Result<WeightedIndex<f64>, SynthError> {
    if items.iter().any(|(_, w)| !(w.is_finite() && *w > 0.0)) {
        return Err(SynthError::InfeasibleParams(format!("{name} weights must be positive and finite")));
    }
    WeightedIndex::new(items.iter().map(|(_, w)| *w))
        .map_err(|e| SynthError::InfeasibleParams(format!("{name}: {e}")))
}

impl GeneratorParams {
    pub fn check(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InfeasibleParams(m));
        if self.n_activities == 0 {
            return bad("n_activities must be at least 1".into());
        }
        if !(self.target_mean_degree.is_finite() && self.target_mean_degree >= 0.0) {
            return bad(format!("target_mean_degree {}", self.target_mean_degree));
        }
        if self.n_activities > 1 && self.target_mean_degree > (self.n_activities - 1) as f64 {
            return bad(format!(
                "target_mean_degree {} exceeds n - 1 = {}",
                self.target_mean_degree,
                self.n_activities - 1
            ));
        }
        if self.target_mean_degree > 0.0 && self.window == 0 {
            return bad("window must be at least 1".into());
        }
        weights("disciplines", &self.disciplines)?;
        weights("levels", &self.levels)?;
        weights("areas", &self.areas)?;
        weights("statuses", &self.statuses)?;
        weights("relation_mix", &self.relation_mix)?;
        Ok(())
    }
}

fn days(n: i64) -> Duration {
    Duration::days(n)
}

/// A random acyclic schedule: nodes are visited in a random permutation and
/// each links forward to a Poisson number of distinct nodes among the next
/// `window` positions. Dates come from a forward pass honoring every link.
pub fn generate_schedule(params: &GeneratorParams) -> Result<Schedule, SynthError> {
    params.check()?;
    let n = params.n_activities;
    let mut rng = stream(params.seed, "synth/schedule");
    let width = (n.max(10) as f64).log10().ceil() as usize + 1;
    let ids: Vec<String> = (1..=n).map(|i| format!("A{i:0width$}")).collect();

    let discipline_w = weights("disciplines", &params.disciplines)?;
    let level_w = weights("levels", &params.levels)?;
    let area_w = weights("areas", &params.areas)?;
    let status_w = weights("statuses", &params.statuses)?;
    let relation_w = weights("relation_mix", &params.relation_mix)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut out_links: Vec<Vec<(usize, Relation, i32)>> = vec![Vec::new(); n];
    let poisson = if params.target_mean_degree > 0.0 {
        Some(Poisson::new(params.target_mean_degree / 2.0).map_err(|e| SynthError::InfeasibleParams(e.to_string()))?)
    } else {
        None
    };
    for pos in 0..n {
        let Some(poisson) = &poisson else { break };
        let available = params.window.min(n - 1 - pos);
        let wanted = (poisson.sample(&mut rng) as usize).min(available);
        if wanted == 0 {
            continue;
        }
        let mut offsets = sample(&mut rng, available, wanted).into_vec();
        offsets.sort_unstable();
        for off in offsets {
            let relation = params.relation_mix[relation_w.sample(&mut rng)].0;
            let lag = if rng.random_bool(0.7) { 0 } else { rng.random_range(1..=3) };
            out_links[order[pos]].push((order[pos + 1 + off], relation, lag));
        }
    }

    let durations: Vec<i64> = (0..n)
        .map(|_| rng.random_range(1..=i64::from(params.max_duration_days.max(1))))
        .collect();
    let mut start: Vec<Option<NaiveDate>> = vec![None; n];
    let mut earliest: Vec<NaiveDate> = vec![params.start_date; n];
    for &node in &order {
        let s = earliest[node];
        start[node] = Some(s);
        let finish = s + days(durations[node]);
        for &(succ, rel, lag) in &out_links[node] {
            let lag = i64::from(lag);
            let bound = match rel {
                Relation::FS => finish + days(lag),
                Relation::SS => s + days(lag),
                Relation::FF => finish + days(lag) - days(durations[succ]),
                Relation::SF => s + days(lag) - days(durations[succ]),
            };
            earliest[succ] = earliest[succ].max(bound);
        }
    }

    let mut activities = Vec::with_capacity(n);
    for i in 0..n {
        let discipline = params.disciplines[discipline_w.sample(&mut rng)].0.clone();
        let level = params.levels[level_w.sample(&mut rng)].0;
        let area = params.areas[area_w.sample(&mut rng)].0.clone();
        let status = params.statuses[status_w.sample(&mut rng)].0.clone();
        let zone = ZONES[rng.random_range(0..ZONES.len())].to_owned();
        let verb = VERBS[rng.random_range(0..VERBS.len())];
        let subject = discipline.rsplit('.').next().unwrap_or(&discipline).to_owned();
        let s = start[i].expect("every node visited");
        activities.push(Activity {
            activity_id: ids[i].clone(),
            name: format!("{verb} {subject} {area} {level}"),
            status,
            wbs: WbsPath(vec!["PRJ".into(), area.clone(), discipline.replace('.', "-")]),
            discipline,
            level,
            area,
            zone: Some(zone),
            current_start: s,
            current_finish: s + days(durations[i]),
            extra_attributes: BTreeMap::new(),
        });
    }

    let mut links: Vec<DependencyLink> = out_links
        .iter()
        .enumerate()
        .flat_map(|(p, succs)| {
            let ids = &ids;
            succs
                .iter()
                .map(move |&(s, rel, lag)| DependencyLink::new(&ids[p], &ids[s], rel, lag))
        })
        .collect();
    links.sort_by(|a, b| {
        (&a.predecessor_id, &a.successor_id, a.relation).cmp(&(&b.predecessor_id, &b.successor_id, b.relation))
    });
    Ok(Schedule {
        activities,
        links,
        source_label: format!("synthetic(n={n}, seed={})", params.seed),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Pearson,
    Cosine,
}

/// Labeled square matrix of pairwise attribute associations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeMatrix {
    pub kind: MatrixKind,
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Constant columns (Pearson only); their row and column are all zero.
    pub constant: Vec<bool>,
}

impl AttributeMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }

    /// Tab-separated table with a header row, four decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in &self.labels {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (label, row) in self.labels.iter().zip(&self.values) {
            out.push_str(label);
            for v in row {
                let _ = write!(out, "\t{v:.4}");
            }
            out.push('\n');
        }
        out
    }
}

fn column_values(schedule: &Schedule, attribute: &str) -> Result<Vec<String>, SynthError> {
    if !schedule.columns().iter().any(|c| c == attribute) {
        return Err(SynthError::UnknownAttribute(attribute.to_owned()));
    }
    Ok((0..schedule.activities.len())
        .map(|i| schedule.cell(i, attribute).unwrap_or_default())
        .collect())
}

/// Integer codes by order of first appearance.
pub fn first_appearance_codes(values: &[String]) -> Vec<f64> {
    let mut codes: BTreeMap<&str, usize> = BTreeMap::new();
    values
        .iter()
        .map(|v| {
            let next = codes.len();
            *codes.entry(v.as_str()).or_insert(next) as f64
        })
        .collect()
}

/// Pearson correlation of two equally long samples; `None` when either is
/// constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson_matrix(schedule: &Schedule, attributes: &[&str]) -> Result<AttributeMatrix, SynthError> {
    let rows = schedule.activities.len();
    if rows < 2 {
        return Err(SynthError::TooFewRows(rows));
    }
    let coded: Vec<Vec<f64>> = attributes
        .iter()
        .map(|a| column_values(schedule, a).map(|v| first_appearance_codes(&v)))
        .collect::<Result<_, _>>()?;
    let constant: Vec<bool> = coded.iter().map(|c| c.iter().all(|v| *v == c[0])).collect();
    let m = attributes.len();
    let mut values = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let r = if i == j {
                if constant[i] {
                    0.0
                } else {
                    1.0
                }
            } else {
                pearson(&coded[i], &coded[j]).unwrap_or(0.0)
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(AttributeMatrix {
        kind: MatrixKind::Pearson,
        labels: attributes.iter().map(|a| (*a).to_owned()).collect(),
        values,
        constant,
    })
}

/// Each attribute is embedded as its name followed by its distinct values
/// in first-appearance order.
pub fn cosine_matrix(
    schedule: &Schedule,
    attributes: &[&str],
    embedder: &dyn Embedder,
) -> Result<AttributeMatrix, SynthError> {
    let mut texts = Vec::with_capacity(attributes.len());
    for a in attributes {
        let mut distinct: Vec<String> = Vec::new();
        for v in column_values(schedule, a)? {
            if !v.trim().is_empty() && !distinct.contains(&v) {
                distinct.push(v);
            }
        }
        if distinct.is_empty() {
            return Err(SynthError::EmptyColumn((*a).to_owned()));
        }
        texts.push(format!("{a} {}", distinct.join(" ")));
    }
    let vectors = embedder.embed_batch(&texts)?;
    let m = attributes.len();
    let mut values = vec![vec![0.0; m]; m];
    for i in 0..m {
        values[i][i] = 1.0;
        for j in i + 1..m {
            let s = cosine_similarity(&vectors[i], &vectors[j])?;
            values[i][j] = s;
            values[j][i] = s;
        }
    }
    Ok(AttributeMatrix {
        kind: MatrixKind::Cosine,
        labels: attributes.iter().map(|a| (*a).to_owned()).collect(),
        values,
        constant: vec![false; m],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, degree_distribution, detect_cycles};
    use crate::knowledge::HashedNgramEmbedder;
    use crate::schedule::{validate, Relation, COL_AREA, COL_DISCIPLINE, COL_LEVEL, COL_ZONE};

    fn params(n: usize) -> GeneratorParams {
        GeneratorParams {
            n_activities: n,
            ..Default::default()
        }
    }

    #[test]
    fn single_activity() {
        let s = generate_schedule(&params(1)).unwrap();
        assert_eq!(s.activities.len(), 1);
        assert!(s.links.is_empty());
    }

    #[test]
    fn deterministic() {
        let a = generate_schedule(&params(200)).unwrap().to_csv().unwrap();
        let b = generate_schedule(&params(200)).unwrap().to_csv().unwrap();
        assert_eq!(a, b);
        let c = generate_schedule(&GeneratorParams {
            seed: 7,
            ..params(200)
        })
        .unwrap()
        .to_csv()
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn structural_targets() {
        let s = generate_schedule(&params(1000)).unwrap();
        assert!(validate(&s).is_empty());
        let g = build_graph(&s).unwrap();
        assert!(detect_cycles(&g).is_empty());
        let mean = degree_distribution(&g).degree.unwrap().mean;
        assert!((3.28..=4.44).contains(&mean), "mean degree {mean}");
        for l in &s.links {
            let p = s.activity(&l.predecessor_id).unwrap();
            let q = s.activity(&l.successor_id).unwrap();
            let lag = Duration::days(l.lag_days.into());
            match l.relation {
                Relation::FS => assert!(q.current_start >= p.current_finish + lag),
                Relation::SS => assert!(q.current_start >= p.current_start + lag),
                Relation::FF => assert!(q.current_finish >= p.current_finish + lag),
                Relation::SF => assert!(q.current_finish >= p.current_start + lag),
            }
        }
    }

    #[test]
    fn infeasible_degree() {
        let p = GeneratorParams {
            target_mean_degree: 10.0,
            ..params(5)
        };
        assert!(matches!(generate_schedule(&p), Err(SynthError::InfeasibleParams(_))));
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[0.0, 1.0, 2.0], &[2.0, 1.0, 0.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!((pearson(&[0.0, 1.0, 2.0], &[3.0, 5.0, 7.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), None);
        let s = generate_schedule(&params(50)).unwrap();
        let attrs = [COL_DISCIPLINE, COL_LEVEL, COL_AREA, "WBS", COL_ZONE];
        let m = pearson_matrix(&s, &attrs).unwrap();
        assert_eq!(m.get(COL_LEVEL, COL_LEVEL), Some(1.0));
        for i in 0..attrs.len() {
            for j in 0..attrs.len() {
                assert!((m.values[i][j] - m.values[j][i]).abs() < 1e-12);
                assert!((-1.0..=1.0).contains(&m.values[i][j]));
            }
        }
        assert!(matches!(
            pearson_matrix(&s, &["Nope"]),
            Err(SynthError::UnknownAttribute(_))
        ));
    }

    #[test]
    fn constant_column_flagged() {
        let mut s = generate_schedule(&params(20)).unwrap();
        for a in &mut s.activities {
            a.area = "SU".into();
        }
        let m = pearson_matrix(&s, &[COL_AREA, COL_LEVEL]).unwrap();
        assert_eq!(m.constant, vec![true, false]);
        assert_eq!(m.values[0], vec![0.0, 0.0]);
    }

    #[test]
    fn cosine_examples() {
        let s = generate_schedule(&params(50)).unwrap();
        let e = HashedNgramEmbedder::default();
        let attrs = [COL_DISCIPLINE, COL_ZONE, COL_AREA];
        let a = cosine_matrix(&s, &attrs, &e).unwrap();
        let b = cosine_matrix(&s, &attrs, &e).unwrap();
        assert_eq!(a.get(COL_DISCIPLINE, COL_ZONE), b.get(COL_DISCIPLINE, COL_ZONE));
        assert_eq!(a.values[1][0], a.values[0][1]);
        assert_eq!(a.get(COL_AREA, COL_AREA), Some(1.0));
        assert!(a.to_text().starts_with("\tDiscipline\tZone\tArea\n"));
    }
}
