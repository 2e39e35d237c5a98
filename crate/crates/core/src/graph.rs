//! Directed dependency graph over schedule activities and its structural
//! analytics (degree and maximal-hop distributions).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedule::{validate, Activity, Relation, Schedule, ValidationReport};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("schedule fails validation with {} violation(s)", .0.violations.len())]
    InvalidSchedule(ValidationReport),
    #[error("graph contains a cycle through {}", .0.join(" -> "))]
    CyclicGraph(Vec<String>),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}

/// Half of a directed edge as stored in an adjacency list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    /// Index of the node at the other end.
    pub node: usize,
    pub relation: Relation,
    pub lag_days: i32,
}

/// `G = (V, E)` with nodes indexed in ascending activity-id order.
#[derive(Clone, Debug)]
pub struct ScheduleGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    out_edges: Vec<Vec<Edge>>,
    in_edges: Vec<Vec<Edge>>,
    activities: Vec<Activity>,
}

pub fn build_graph(schedule: &Schedule) -> Result<ScheduleGraph, GraphError> {
    let report = validate(schedule);
    if !report.is_empty() {
        return Err(GraphError::InvalidSchedule(report));
    }
    let mut activities = schedule.activities.clone();
    activities.sort_by(|a, b| a.activity_id.cmp(&b.activity_id));
    let ids: Vec<String> = activities.iter().map(|a| a.activity_id.clone()).collect();
    let index: HashMap<String, usize> = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();

    let mut out_edges = vec![Vec::new(); ids.len()];
    let mut in_edges = vec![Vec::new(); ids.len()];
    for link in &schedule.links {
        let u = index[&link.predecessor_id];
        let v = index[&link.successor_id];
        out_edges[u].push(Edge {
            node: v,
            relation: link.relation,
            lag_days: link.lag_days,
        });
        in_edges[v].push(Edge {
            node: u,
            relation: link.relation,
            lag_days: link.lag_days,
        });
    }
    for list in out_edges.iter_mut().chain(in_edges.iter_mut()) {
        list.sort();
    }
    Ok(ScheduleGraph {
        ids,
        index,
        out_edges,
        in_edges,
        activities,
    })
}

impl ScheduleGraph {
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    /// Node ids in ascending order.
    pub fn nodes(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize, GraphError> {
        self.index_of(id).ok_or_else(|| GraphError::UnknownNode(id.to_owned()))
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn activity(&self, id: &str) -> Option<&Activity> {
        self.index_of(id).map(|i| &self.activities[i])
    }

    pub fn out_edges(&self, index: usize) -> &[Edge] {
        &self.out_edges[index]
    }

    pub fn in_edges(&self, index: usize) -> &[Edge] {
        &self.in_edges[index]
    }

    /// Distinct successor indices of `index`, ascending.
    pub fn successors(&self, index: usize) -> Vec<usize> {
        distinct(&self.out_edges[index])
    }

    /// Distinct predecessor indices of `index`, ascending.
    pub fn predecessors(&self, index: usize) -> Vec<usize> {
        distinct(&self.in_edges[index])
    }

    pub fn successor_ids(&self, id: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.require(id)?;
        Ok(self.successors(i).into_iter().map(|j| self.id(j)).collect())
    }

    pub fn predecessor_ids(&self, id: &str) -> Result<Vec<&str>, GraphError> {
        let i = self.require(id)?;
        Ok(self.predecessors(i).into_iter().map(|j| self.id(j)).collect())
    }

    /// Whether every out-edge has its mirror in-edge and vice versa.
    pub fn mirrors_consistent(&self) -> bool {
        let mut forward: Vec<(usize, usize, Relation, i32)> = Vec::new();
        let mut backward: Vec<(usize, usize, Relation, i32)> = Vec::new();
        for (u, list) in self.out_edges.iter().enumerate() {
            forward.extend(list.iter().map(|e| (u, e.node, e.relation, e.lag_days)));
        }
        for (v, list) in self.in_edges.iter().enumerate() {
            backward.extend(list.iter().map(|e| (e.node, v, e.relation, e.lag_days)));
        }
        forward.sort();
        backward.sort();
        forward == backward
    }
}

fn distinct(edges: &[Edge]) -> Vec<usize> {
    let mut v: Vec<usize> = edges.iter().map(|e| e.node).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Upper bound on the number of cycles [`detect_cycles`] reports.
pub const DEFAULT_CYCLE_LIMIT: usize = 10_000;

/// Elementary cycles of the graph, each rotated to start at its smallest id,
/// sorted lexicographically. Empty iff the graph is a DAG.
pub fn detect_cycles(graph: &ScheduleGraph) -> Vec<Vec<String>> {
    detect_cycles_limited(graph, DEFAULT_CYCLE_LIMIT)
}

/// Johnson's elementary-circuit enumeration, stopping after `limit` cycles.
pub fn detect_cycles_limited(graph: &ScheduleGraph, limit: usize) -> Vec<Vec<String>> {
    let n = graph.node_count();
    let adjacency: Vec<Vec<usize>> = (0..n).map(|i| graph.successors(i)).collect();
    let mut found: Vec<Vec<usize>> = Vec::new();

    // DAG fast path.
    let all = vec![true; n];
    let components = strongly_connected(&adjacency, &all);
    if components.iter().all(|c| c.len() < 2) || limit == 0 {
        return Vec::new();
    }

    let mut allowed = vec![true; n];
    for start in 0..n {
        if found.len() >= limit {
            break;
        }
        let components = strongly_connected(&adjacency, &allowed);
        let component = components.into_iter().find(|c| c.contains(&start));
        if let Some(component) = component.filter(|c| c.len() > 1) {
            let mut in_scc = vec![false; n];
            for &v in &component {
                in_scc[v] = true;
            }
            let mut search = CircuitSearch {
                adjacency: &adjacency,
                in_scc: &in_scc,
                blocked: vec![false; n],
                blocked_by: vec![Vec::new(); n],
                stack: Vec::new(),
                start,
                found: &mut found,
                limit,
            };
            search.circuit(start);
        }
        allowed[start] = false;
    }

    let mut cycles: Vec<Vec<String>> = found
        .into_iter()
        .map(|c| c.into_iter().map(|i| graph.id(i).to_owned()).collect())
        .collect();
    cycles.sort();
    cycles
}

struct CircuitSearch<'a> {
    adjacency: &'a [Vec<usize>],
    in_scc: &'a [bool],
    blocked: Vec<bool>,
    blocked_by: Vec<Vec<usize>>,
    stack: Vec<usize>,
    start: usize,
    found: &'a mut Vec<Vec<usize>>,
    limit: usize,
}

impl CircuitSearch<'_> {
    fn unblock(&mut self, v: usize) {
        let mut pending = vec![v];
        while let Some(u) = pending.pop() {
            if self.blocked[u] {
                self.blocked[u] = false;
                pending.append(&mut self.blocked_by[u]);
            }
        }
    }

    fn circuit(&mut self, v: usize) -> bool {
        let mut closed = false;
        self.stack.push(v);
        self.blocked[v] = true;
        for &w in &self.adjacency[v] {
            if self.found.len() >= self.limit {
                break;
            }
            if !self.in_scc[w] {
                continue;
            }
            if w == self.start {
                self.found.push(self.stack.clone());
                closed = true;
            } else if !self.blocked[w] && self.circuit(w) {
                closed = true;
            }
        }
        if closed {
            self.unblock(v);
        } else {
            for &w in &self.adjacency[v] {
                if self.in_scc[w] && !self.blocked_by[w].contains(&v) {
                    self.blocked_by[w].push(v);
                }
            }
        }
        self.stack.pop();
        closed
    }
}

/// Tarjan's algorithm (iterative) restricted to nodes with `allowed[v]`.
fn strongly_connected(adjacency: &[Vec<usize>], allowed: &[bool]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;

    for root in 0..n {
        if !allowed[root] || index[root] != UNSEEN {
            continue;
        }
        let mut work: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut next)) = work.last_mut() {
            if let Some(&w) = adjacency[v].get(*next) {
                *next += 1;
                if !allowed[w] {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    components.push(component);
                }
            }
        }
    }
    components
}

/// Kahn's algorithm; ties are broken by ascending activity id.
pub fn topological_order(graph: &ScheduleGraph) -> Result<Vec<String>, GraphError> {
    topological_indices(graph).map(|order| order.into_iter().map(|i| graph.id(i).to_owned()).collect())
}

pub(crate) fn topological_indices(graph: &ScheduleGraph) -> Result<Vec<usize>, GraphError> {
    let n = graph.node_count();
    let mut indegree: Vec<usize> = (0..n).map(|v| graph.in_edges(v).len()).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| indegree[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for e in graph.out_edges(u) {
            indegree[e.node] -= 1;
            if indegree[e.node] == 0 {
                ready.push(Reverse(e.node));
            }
        }
    }
    if order.len() < n {
        let cycle = detect_cycles_limited(graph, 1).into_iter().next().unwrap_or_default();
        return Err(GraphError::CyclicGraph(cycle));
    }
    Ok(order)
}

/// Per-node values of one metric with their histogram summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub per_node: BTreeMap<String, usize>,
    pub histogram: BTreeMap<usize, usize>,
    /// Sum of the per-node values; `mean` is this divided by the node count.
    pub total: usize,
    pub mean: f64,
    pub max: usize,
}

impl Distribution {
    fn from_values(graph: &ScheduleGraph, values: &[usize]) -> Self {
        let mut histogram = BTreeMap::new();
        for &v in values {
            *histogram.entry(v).or_insert(0) += 1;
        }
        let sum: usize = values.iter().sum();
        let mean = if values.is_empty() {
            0.0
        } else {
            sum as f64 / values.len() as f64
        };
        Distribution {
            per_node: values
                .iter()
                .enumerate()
                .map(|(i, &v)| (graph.id(i).to_owned(), v))
                .collect(),
            histogram,
            total: sum,
            mean,
            max: values.iter().copied().max().unwrap_or(0),
        }
    }

    /// Two-column `value<TAB>count` text, one histogram bin per line.
    pub fn histogram_text(&self) -> String {
        self.histogram.iter().map(|(v, c)| format!("{v}\t{c}\n")).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub degree: Option<Distribution>,
    pub maxhop: Option<Distribution>,
}

impl GraphStats {
    /// Line-delimited JSON: a summary record per populated metric followed by
    /// one record per node.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (metric, dist) in [("degree", &self.degree), ("maxhop", &self.maxhop)] {
            let Some(dist) = dist else { continue };
            let summary = serde_json::json!({
                "metric": metric,
                "nodes": self.node_count,
                "edges": self.edge_count,
                "mean": dist.mean,
                "max": dist.max,
                "histogram": dist.histogram.iter().map(|(v, c)| [*v, *c]).collect::<Vec<_>>(),
            });
            out.push_str(&summary.to_string());
            out.push('\n');
            for (node, value) in &dist.per_node {
                let rec = serde_json::json!({ "metric": metric, "node": node, "value": value });
                out.push_str(&rec.to_string());
                out.push('\n');
            }
        }
        out
    }
}

/// Total degree (in + out) of every node.
pub fn degree_distribution(graph: &ScheduleGraph) -> GraphStats {
    let values: Vec<usize> = (0..graph.node_count())
        .map(|v| graph.in_edges(v).len() + graph.out_edges(v).len())
        .collect();
    GraphStats {
        node_count: graph.node_count(),
        edge_count: graph.edge_count(),
        degree: Some(Distribution::from_values(graph, &values)),
        maxhop: None,
    }
}

/// Which way hops are counted for the maximal-hop metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HopDirection {
    /// Longest path to any dependent (successor-side) node.
    #[default]
    Downstream,
    /// Larger of the downstream and upstream longest paths.
    Either,
}

/// Longest directed path (in edges) from each node to a reachable dependent.
pub fn maximal_hop_distribution(graph: &ScheduleGraph) -> Result<GraphStats, GraphError> {
    maximal_hop_distribution_with(graph, HopDirection::Downstream)
}

pub fn maximal_hop_distribution_with(graph: &ScheduleGraph, direction: HopDirection) -> Result<GraphStats, GraphError> {
    let order = topological_indices(graph)?;
    let n = graph.node_count();
    let mut down = vec![0usize; n];
    for &u in order.iter().rev() {
        down[u] = graph.out_edges(u).iter().map(|e| down[e.node] + 1).max().unwrap_or(0);
    }
    let values = match direction {
        HopDirection::Downstream => down,
        HopDirection::Either => {
            let mut up = vec![0usize; n];
            for &v in &order {
                up[v] = graph.in_edges(v).iter().map(|e| up[e.node] + 1).max().unwrap_or(0);
            }
            down.iter().zip(&up).map(|(d, u)| *d.max(u)).collect()
        }
    };
    Ok(GraphStats {
        node_count: n,
        edge_count: graph.edge_count(),
        degree: None,
        maxhop: Some(Distribution::from_values(graph, &values)),
    })
}

/// Both distributions at once.
pub fn analyze(graph: &ScheduleGraph, direction: HopDirection) -> Result<GraphStats, GraphError> {
    let mut stats = maximal_hop_distribution_with(graph, direction)?;
    stats.degree = degree_distribution(graph).degree;
    Ok(stats)
}
