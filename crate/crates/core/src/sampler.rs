//! Per-activity context extraction from the dependency graph: first-order
//! neighbors, WBS-hierarchical relatives and randomly sampled sequential
//! paths, combined into a [`ContextBundle`].

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, ScheduleGraph};
use crate::schedule::{Schedule, DATE_FORMAT};

pub const MAX_SEQUENTIAL_HOPS_CAP: usize = 16;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("max_sequential_hops {0} exceeds the cap of {MAX_SEQUENTIAL_HOPS_CAP}")]
    InvalidConfig(usize),
}

impl From<GraphError> for SamplerError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::UnknownNode(id) => SamplerError::UnknownNode(id),
            other => SamplerError::UnknownNode(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub max_sequential_hops: usize,
    pub max_wbs_levels: usize,
    pub paths_per_direction: usize,
    pub rng_seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            max_sequential_hops: 3,
            max_wbs_levels: 2,
            paths_per_direction: 5,
            rng_seed: 42,
        }
    }
}

impl SamplerConfig {
    pub fn check(&self) -> Result<(), SamplerError> {
        if self.max_sequential_hops > MAX_SEQUENTIAL_HOPS_CAP {
            return Err(SamplerError::InvalidConfig(self.max_sequential_hops));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Along out-edges (towards successors).
    Forward,
    /// Along in-edges (towards predecessors).
    Backward,
}

/// A simple walk rooted at the target; `nodes[0]` is always the target.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SequentialPath {
    pub direction: Direction,
    pub nodes: Vec<String>,
}

impl SequentialPath {
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub target: String,
    pub first_order: BTreeSet<String>,
    pub hierarchical: BTreeSet<String>,
    pub sequential: BTreeSet<SequentialPath>,
    pub sampled_at_seed: u64,
}

impl ContextBundle {
    pub fn is_empty(&self) -> bool {
        self.first_order.is_empty() && self.hierarchical.is_empty() && self.sequential.is_empty()
    }

    /// Every activity id mentioned by the bundle other than the target.
    pub fn member_ids(&self) -> BTreeSet<&str> {
        self.first_order
            .iter()
            .chain(&self.hierarchical)
            .chain(self.sequential.iter().flat_map(|p| p.nodes.iter().skip(1)))
            .map(String::as_str)
            .collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }
}

/// Direct predecessors and successors of `target`.
pub fn first_order(graph: &ScheduleGraph, target: &str) -> Result<BTreeSet<String>, SamplerError> {
    let t = graph.require(target)?;
    Ok(graph
        .predecessors(t)
        .into_iter()
        .chain(graph.successors(t))
        .filter(|&v| v != t)
        .map(|v| graph.id(v).to_owned())
        .collect())
}

/// Random simple walks of at most `max_sequential_hops` edges in each
/// direction. Each step picks uniformly among neighbors not yet on the path;
/// a walk ends at the hop cap or a dead end. Duplicate walks collapse.
pub fn sample_sequential<R: Rng + ?Sized>(
    graph: &ScheduleGraph,
    target: &str,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<BTreeSet<SequentialPath>, SamplerError> {
    cfg.check()?;
    let t = graph.require(target)?;
    let mut paths = BTreeSet::new();
    for direction in [Direction::Forward, Direction::Backward] {
        for _ in 0..cfg.paths_per_direction {
            let mut walk = vec![t];
            let mut on_path: HashSet<usize> = HashSet::from([t]);
            while walk.len() <= cfg.max_sequential_hops {
                let current = *walk.last().expect("walk is never empty");
                let neighbors = match direction {
                    Direction::Forward => graph.successors(current),
                    Direction::Backward => graph.predecessors(current),
                };
                let open: Vec<usize> = neighbors.into_iter().filter(|v| !on_path.contains(v)).collect();
                if open.is_empty() {
                    break;
                }
                let next = open[rng.random_range(0..open.len())];
                on_path.insert(next);
                walk.push(next);
            }
            if walk.len() > 1 {
                paths.insert(SequentialPath {
                    direction,
                    nodes: walk.into_iter().map(|v| graph.id(v).to_owned()).collect(),
                });
            }
        }
    }
    Ok(paths)
}

/// Activities whose WBS path shares a prefix of at least
/// `depth(target) - max_wbs_levels` segments (never less than one) with the
/// target's path.
pub fn sample_hierarchical(
    schedule: &Schedule,
    target: &str,
    cfg: &SamplerConfig,
) -> Result<BTreeSet<String>, SamplerError> {
    let anchor = schedule
        .activity(target)
        .ok_or_else(|| SamplerError::UnknownNode(target.to_owned()))?;
    let required = anchor.wbs.depth().saturating_sub(cfg.max_wbs_levels).max(1);
    Ok(schedule
        .activities
        .iter()
        .filter(|a| a.activity_id != target)
        .filter(|a| a.wbs.common_prefix_len(&anchor.wbs) >= required)
        .map(|a| a.activity_id.clone())
        .collect())
}

/// The combined context of `target`. Sequential sampling uses a private
/// stream derived from `(cfg.rng_seed, target)`.
pub fn combined_context(
    graph: &ScheduleGraph,
    schedule: &Schedule,
    target: &str,
    cfg: &SamplerConfig,
) -> Result<ContextBundle, SamplerError> {
    let mut rng = crate::rng::stream(cfg.rng_seed, target);
    combined_context_with(graph, schedule, target, cfg, &mut rng)
}

pub fn combined_context_with<R: Rng + ?Sized>(
    graph: &ScheduleGraph,
    schedule: &Schedule,
    target: &str,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<ContextBundle, SamplerError> {
    Ok(ContextBundle {
        target: target.to_owned(),
        first_order: first_order(graph, target)?,
        hierarchical: sample_hierarchical(schedule, target, cfg)?,
        sequential: sample_sequential(graph, target, cfg, rng)?,
        sampled_at_seed: cfg.rng_seed,
    })
}

pub const SECTION_FIRST_ORDER: &str = "FIRST-ORDER:";
pub const SECTION_HIERARCHICAL: &str = "HIERARCHICAL:";
pub const SECTION_SEQUENTIAL: &str = "SEQUENTIAL:";

/// Human-readable rendering with three labeled sections. Rows are
/// `id | name | start | finish | role`, ids ascending.
pub fn render_context(bundle: &ContextBundle, schedule: &Schedule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "TARGET: {} (seed {})", bundle.target, bundle.sampled_at_seed);
    let by_id: HashMap<&str, _> = schedule.activities.iter().map(|a| (a.activity_id.as_str(), a)).collect();
    let row = |out: &mut String, id: &str, role: &str| {
        match by_id.get(id) {
            Some(a) => {
                let _ = writeln!(
                    out,
                    "{} | {} | {} | {} | {}",
                    id,
                    a.name,
                    a.current_start.format(DATE_FORMAT),
                    a.current_finish.format(DATE_FORMAT),
                    role
                );
            }
            None => {
                let _ = writeln!(out, "{id} | ? | ? | ? | {role}");
            }
        };
    };

    out.push_str(SECTION_FIRST_ORDER);
    out.push('\n');
    for id in &bundle.first_order {
        let is_pred = schedule
            .links
            .iter()
            .any(|l| l.predecessor_id == *id && l.successor_id == bundle.target);
        let is_succ = schedule
            .links
            .iter()
            .any(|l| l.successor_id == *id && l.predecessor_id == bundle.target);
        let role = match (is_pred, is_succ) {
            (true, true) => "predecessor+successor",
            (true, false) => "predecessor",
            (false, true) => "successor",
            (false, false) => "neighbor",
        };
        row(&mut out, id, role);
    }

    out.push_str(SECTION_HIERARCHICAL);
    out.push('\n');
    for id in &bundle.hierarchical {
        let role = by_id
            .get(id.as_str())
            .map(|a| format!("wbs {}", a.wbs))
            .unwrap_or_else(|| "wbs ?".into());
        row(&mut out, id, &role);
    }

    out.push_str(SECTION_SEQUENTIAL);
    out.push('\n');
    for path in &bundle.sequential {
        let (tag, arrow) = match path.direction {
            Direction::Forward => ("forward", " -> "),
            Direction::Backward => ("backward", " <- "),
        };
        let _ = writeln!(out, "[{tag}] {}", path.nodes.join(arrow));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::schedule::{Activity, DependencyLink, Level, Relation, WbsPath};
    use chrono::NaiveDate;
    use std::collections::BTreeMap;

    fn activity(id: &str, wbs: &[&str]) -> Activity {
        let d = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        Activity {
            activity_id: id.into(),
            name: format!("task {id}"),
            status: "Not Started".into(),
            wbs: WbsPath(wbs.iter().map(|s| s.to_string()).collect()),
            discipline: "CSA".into(),
            level: Level::SF,
            area: "6E".into(),
            zone: None,
            current_start: d,
            current_finish: d,
            extra_attributes: BTreeMap::new(),
        }
    }

    fn chain(ids: &[&str]) -> Schedule {
        Schedule {
            activities: ids.iter().map(|i| activity(i, &[i])).collect(),
            links: ids
                .windows(2)
                .map(|w| DependencyLink::new(w[0], w[1], Relation::FS, 0))
                .collect(),
            source_label: "t".into(),
        }
    }

    #[test]
    fn first_order_cases() {
        let s = chain(&["A", "B", "C"]);
        let g = build_graph(&s).unwrap();
        assert_eq!(first_order(&g, "B").unwrap(), BTreeSet::from(["A".into(), "C".into()]));
        let lone = chain(&["X"]);
        let g = build_graph(&lone).unwrap();
        assert!(first_order(&g, "X").unwrap().is_empty());
        assert!(matches!(first_order(&g, "nope"), Err(SamplerError::UnknownNode(_))));
    }

    #[test]
    fn hop_cap_on_chain() {
        let s = chain(&["A", "B", "C", "D", "E"]);
        let g = build_graph(&s).unwrap();
        let cfg = SamplerConfig::default();
        for seed in 0..20 {
            let mut rng = crate::rng::stream(seed, "A");
            let paths = sample_sequential(&g, "A", &cfg, &mut rng).unwrap();
            assert_eq!(paths.len(), 1);
            let p = paths.iter().next().unwrap();
            assert_eq!(p.nodes, ["A", "B", "C", "D"]);
        }
    }

    #[test]
    fn hierarchical_levels() {
        let s = Schedule {
            activities: vec![
                activity("X", &["P", "A", "X"]),
                activity("Y", &["P", "A", "Y"]),
                activity("Z", &["P", "B", "Z"]),
                activity("Q", &["R", "B", "Z"]),
            ],
            links: vec![],
            source_label: "t".into(),
        };
        let cfg = SamplerConfig::default();
        assert_eq!(
            sample_hierarchical(&s, "X", &cfg).unwrap(),
            BTreeSet::from(["Y".into(), "Z".into()])
        );
        let cfg1 = SamplerConfig {
            max_wbs_levels: 1,
            ..cfg
        };
        assert_eq!(sample_hierarchical(&s, "X", &cfg1).unwrap(), BTreeSet::from(["Y".into()]));
    }

    #[test]
    fn combined_tiny_chain() {
        let s = chain(&["A", "B", "C"]);
        let g = build_graph(&s).unwrap();
        let b = combined_context(&g, &s, "B", &SamplerConfig::default()).unwrap();
        assert_eq!(b.first_order.len(), 2);
        assert!(b.hierarchical.is_empty());
        let allowed = [vec!["B".to_string(), "C".into()], vec!["B".to_string(), "A".into()]];
        assert!(b.sequential.iter().all(|p| allowed.contains(&p.nodes)));
        assert_eq!(b.sampled_at_seed, 42);
    }

    #[test]
    fn render_sections() {
        let s = chain(&["A", "B"]);
        let empty = ContextBundle {
            target: "A".into(),
            first_order: BTreeSet::new(),
            hierarchical: BTreeSet::new(),
            sequential: BTreeSet::new(),
            sampled_at_seed: 42,
        };
        let text = render_context(&empty, &s);
        assert_eq!(text, "TARGET: A (seed 42)\nFIRST-ORDER:\nHIERARCHICAL:\nSEQUENTIAL:\n");
        let one = ContextBundle {
            first_order: BTreeSet::from(["B".into()]),
            ..empty
        };
        let text = render_context(&one, &s);
        assert!(text.contains("FIRST-ORDER:\nB | task B | 2024-01-01 | 2024-01-01 | successor\nHIERARCHICAL:"));
    }

    #[test]
    fn hop_cap_enforced() {
        let cfg = SamplerConfig {
            max_sequential_hops: 17,
            ..Default::default()
        };
        assert!(cfg.check().is_err());
    }
}
