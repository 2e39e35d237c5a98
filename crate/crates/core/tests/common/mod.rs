#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schedrag::graph::ScheduleGraph;
use schedrag::schedule::{Activity, DependencyLink, Level, Relation, Schedule, WbsPath};

pub fn activity(id: &str, wbs: &[String]) -> Activity {
    let d = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
    Activity {
        activity_id: id.into(),
        name: format!("task {id}"),
        status: "Not Started".into(),
        wbs: WbsPath(wbs.to_vec()),
        discipline: "CSA.Struc.Steel".into(),
        level: Level::SF,
        area: "6E".into(),
        zone: None,
        current_start: d,
        current_finish: d,
        extra_attributes: BTreeMap::new(),
    }
}

/// Random DAG: edges only from lower to higher index, WBS paths of depth
/// 1 to 4 over a small alphabet so prefixes collide.
pub fn random_dag(seed: u64, max_nodes: usize) -> Schedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_nodes);
    let density: f64 = rng.random_range(0.02..0.3);
    let ids: Vec<String> = (0..n).map(|i| format!("N{i:03}")).collect();
    let activities = ids
        .iter()
        .map(|id| {
            let depth = rng.random_range(1..=4);
            let wbs: Vec<String> = (0..depth).map(|_| ["P", "Q", "R"][rng.random_range(0..3)].to_owned()).collect();
            activity(id, &wbs)
        })
        .collect();
    let mut links = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                links.push(DependencyLink::new(&ids[i], &ids[j], Relation::FS, 0));
            }
        }
    }
    Schedule {
        activities,
        links,
        source_label: format!("dag-{seed}"),
    }
}

/// Nodes reachable from `target` in at most `hops` directed steps.
pub fn bfs_within(graph: &ScheduleGraph, target: &str, hops: usize, forward: bool) -> BTreeSet<String> {
    let start = graph.index_of(target).unwrap();
    let mut dist = vec![usize::MAX; graph.node_count()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        if dist[v] == hops {
            continue;
        }
        let next = if forward { graph.successors(v) } else { graph.predecessors(v) };
        for w in next {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (0..graph.node_count())
        .filter(|&v| dist[v] != usize::MAX)
        .map(|v| graph.id(v).to_owned())
        .collect()
}
