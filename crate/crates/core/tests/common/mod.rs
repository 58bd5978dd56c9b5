#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use hinsearch::agents::{make_stub_backend, AgentConfig, Agents, PromptTemplates};
use hinsearch::evaluator::{EvalError, EvalResult, Evaluator, MetricKind, RecommendationEvaluator};
use hinsearch::hin::{
    binarize_ratings, make_recommendation_split, HinGraph, Schema, SplitRatio, SplitTag, DEFAULT_RATING_THRESHOLD,
};
use hinsearch::metastructure::MetaStructure;
use hinsearch::synthetic::{generate_planted_toy, PlantedParams, PlantedToy, RATES};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random valid structure with `2..=max_nodes` nodes, built by laying
/// random schema edges forward over a topological order and rejecting
/// anything invalid.
pub fn random_structure(schema: &Schema, max_nodes: usize, rng: &mut ChaCha8Rng) -> MetaStructure {
    loop {
        let n = rng.random_range(2..=max_nodes);
        let mut nodes = vec![rng.random_range(0..schema.node_types.len())];
        let mut edges = Vec::new();
        // every later node hangs off some earlier one
        for j in 1..n {
            let from = rng.random_range(0..j);
            let choices: Vec<_> = schema.edges_from(nodes[from]).collect();
            let Some(e) = choices.choose(rng) else { break };
            nodes.push(e.dst);
            edges.push((from, j, e.id));
        }
        if nodes.len() < n {
            continue;
        }
        // extra forward edges, including ones that reach the target
        for i in 0..n {
            for j in i + 1..n {
                if edges.iter().any(|&(a, b, _)| a == i && b == j) || !rng.random_bool(0.3) {
                    continue;
                }
                let between = schema.edges_between(nodes[i], nodes[j]);
                if let Some(&e) = between.choose(rng) {
                    edges.push((i, j, e));
                }
            }
        }
        // nodes with no way forward get an edge to the target when allowed
        for i in 0..n - 1 {
            if !edges.iter().any(|&(a, _, _)| a == i) {
                let between = schema.edges_between(nodes[i], nodes[n - 1]);
                if let Some(&e) = between.choose(rng) {
                    edges.push((i, n - 1, e));
                }
            }
        }
        let ms = MetaStructure {
            nodes,
            edges,
            source: 0,
            target: n - 1,
        };
        if ms.is_valid(schema) {
            return ms;
        }
    }
}

/// Every source-to-target walk as (node types, edge types), by plain
/// recursion over the edge list.
pub fn dfs_paths(ms: &MetaStructure) -> BTreeSet<(Vec<usize>, Vec<usize>)> {
    fn go(
        ms: &MetaStructure,
        at: usize,
        nodes: &mut Vec<usize>,
        edges: &mut Vec<usize>,
        out: &mut BTreeSet<(Vec<usize>, Vec<usize>)>,
    ) {
        if at == ms.target {
            out.insert((nodes.clone(), edges.clone()));
            return;
        }
        for &(u, v, e) in &ms.edges {
            if u == at {
                nodes.push(ms.nodes[v]);
                edges.push(e);
                go(ms, v, nodes, edges, out);
                nodes.pop();
                edges.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(ms, ms.source, &mut vec![ms.nodes[ms.source]], &mut Vec::new(), &mut out);
    out
}

/// Whether some walk from `s` follows `edge_types` and ends at `t`.
pub fn has_instance(graph: &HinGraph, edge_types: &[usize], s: usize, t: usize) -> bool {
    let mut frontier: BTreeSet<usize> = [s].into();
    for &e in edge_types {
        let adj = graph.adjacency(e);
        frontier = frontier.iter().flat_map(|&u| adj.row(u).map(|(v, _)| v)).collect();
    }
    frontier.contains(&t)
}

/// Random graph over `schema` with the given node counts; declared inverse
/// relations hold the transposes.
pub fn random_graph(schema: &Schema, counts: &[usize], density: f64, rng: &mut ChaCha8Rng) -> HinGraph {
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); schema.edge_types.len()];
    for e in &schema.edge_types {
        if e.inverse.is_some_and(|inv| inv < e.id) {
            continue;
        }
        for s in 0..counts[e.src] {
            for d in 0..counts[e.dst] {
                if rng.random_bool(density) {
                    edges[e.id].push((s, d));
                }
            }
        }
    }
    for e in &schema.edge_types {
        if let Some(inv) = e.inverse.filter(|&inv| inv < e.id) {
            edges[e.id] = edges[inv].iter().map(|&(s, d)| (d, s)).collect();
        }
    }
    HinGraph::from_edges(schema.clone(), counts.to_vec(), edges).unwrap()
}

pub struct PlantedTask {
    pub toy: PlantedToy,
    pub evaluator: RecommendationEvaluator,
}

pub fn planted_task() -> PlantedTask {
    let toy = generate_planted_toy(PlantedParams::default(), 0);
    let labeled = binarize_ratings(&toy.ratings, DEFAULT_RATING_THRESHOLD);
    let (graph, split) = make_recommendation_split(&toy.graph, RATES, &labeled, SplitRatio::default(), 0, 1).unwrap();
    PlantedTask {
        toy,
        evaluator: RecommendationEvaluator::new(Arc::new(graph), split),
    }
}

pub fn stub_agents() -> Agents {
    let config = AgentConfig {
        task: "recommendation: rank User-Business pairs by how likely the User rates the Business".into(),
        ..AgentConfig::default()
    };
    Agents::new(Arc::new(make_stub_backend(0)), PromptTemplates::default(), config)
}

/// Evaluator wrapper recording every structure it is asked to score.
pub struct CountingEvaluator<'a> {
    pub inner: &'a dyn Evaluator,
    pub calls: AtomicUsize,
    pub keys: Mutex<Vec<String>>,
}

impl<'a> CountingEvaluator<'a> {
    pub fn new(inner: &'a dyn Evaluator) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
            keys: Mutex::new(Vec::new()),
        }
    }

    /// Keys scored more than once on the validation split.
    pub fn repeats(&self) -> Vec<String> {
        let keys = self.keys.lock().unwrap();
        let mut seen = BTreeSet::new();
        keys.iter().filter(|k| !seen.insert(k.as_str())).cloned().collect()
    }
}

impl Evaluator for CountingEvaluator<'_> {
    fn metric(&self) -> MetricKind {
        self.inner.metric()
    }

    fn endpoint_types(&self) -> (usize, usize) {
        self.inner.endpoint_types()
    }

    fn evaluate(&self, ms: &MetaStructure, split: SplitTag) -> Result<EvalResult, EvalError> {
        if split == SplitTag::Val {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.keys.lock().unwrap().push(ms.canonical_key().0);
        }
        self.inner.evaluate(ms, split)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
