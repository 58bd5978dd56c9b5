//! Insertion, grafting and deletion, and one-step neighbor sampling.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hin::Schema;
use crate::metastructure::{CanonicalKey, MetaPath, MetaStructure, DEFAULT_MAX_NODES};

/// Default number of candidates kept per neighbor set.
pub const DEFAULT_CANDIDATE_CAP: usize = 20;

/// Upper bound on reconnection choices explored for one deleted node.
const MAX_RECONNECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentLimits {
    /// Interior nodes allowed in an insertion component.
    pub insertion_max_interior: usize,
    /// Total nodes allowed in a grafting component.
    pub grafting_max_nodes: usize,
    /// Largest structure a neighbor may grow to.
    pub max_structure_nodes: usize,
}

impl Default for ComponentLimits {
    fn default() -> Self {
        Self {
            insertion_max_interior: 1,
            grafting_max_nodes: 3,
            max_structure_nodes: DEFAULT_MAX_NODES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentLibrary {
    pub insertion: Vec<MetaPath>,
    pub grafting: Vec<MetaPath>,
    pub limits: ComponentLimits,
}

/// All schema meta-paths with at most `max_edges` edges, ordered by length
/// and then by type sequence.
fn schema_paths(schema: &Schema, max_edges: usize) -> Vec<MetaPath> {
    let mut out = Vec::new();
    let mut frontier: Vec<MetaPath> = schema
        .node_types
        .iter()
        .map(|t| MetaPath {
            node_types: vec![t.id],
            edge_types: vec![],
        })
        .collect();
    for _ in 0..max_edges {
        let mut next = Vec::new();
        for p in &frontier {
            for e in schema.edges_from(p.last()) {
                let mut q = p.clone();
                q.edge_types.push(e.id);
                q.node_types.push(e.dst);
                next.push(q);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.sort_by_key(|p| (p.len(), p.type_sequence()));
    out
}

pub fn build_component_library(schema: &Schema, limits: ComponentLimits) -> ComponentLibrary {
    log::debug!(
        "component limits: insertion <= {} interior nodes, grafting <= {} nodes",
        limits.insertion_max_interior,
        limits.grafting_max_nodes
    );
    ComponentLibrary {
        insertion: schema_paths(schema, limits.insertion_max_interior + 1),
        grafting: schema_paths(schema, limits.grafting_max_nodes.saturating_sub(1)),
        limits,
    }
}

/// What produced a neighbor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "detail", rename_all = "lowercase")]
pub enum Operation {
    Insertion {
        /// The replaced edge `(from, to, edge type)` of the origin.
        edge: (usize, usize, usize),
        component: MetaPath,
    },
    Grafting {
        from: usize,
        to: usize,
        component: MetaPath,
    },
    Deletion {
        node: usize,
        reconnect: Vec<(usize, usize, usize)>,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Insertion { .. } => "insertion",
            Operation::Grafting { .. } => "grafting",
            Operation::Deletion { .. } => "deletion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub structure: MetaStructure,
    pub operation: Operation,
    pub key: CanonicalKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub origin: MetaStructure,
    pub candidates: Vec<Candidate>,
    pub sampled: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NeighborError {
    #[error("structure has no valid one-step neighbors")]
    Empty,
}

/// Keeps valid, size-bounded, previously unseen structures.
struct Collector<'a> {
    schema: &'a Schema,
    max_nodes: usize,
    seen: HashSet<CanonicalKey>,
    out: Vec<Candidate>,
}

impl<'a> Collector<'a> {
    fn new(origin: &MetaStructure, schema: &'a Schema, max_nodes: usize) -> Self {
        let mut seen = HashSet::new();
        seen.insert(origin.canonical_key());
        Self {
            schema,
            max_nodes,
            seen,
            out: Vec::new(),
        }
    }

    fn offer(&mut self, structure: MetaStructure, operation: Operation) {
        if structure.node_count() > self.max_nodes || !structure.is_valid(self.schema) {
            return;
        }
        let key = structure.canonical_key();
        if self.seen.insert(key.clone()) {
            self.out.push(Candidate {
                structure,
                operation,
                key,
            });
        }
    }
}

/// Adds `(u, v, e)` unless an identical edge is already present.
fn add_edge(edges: &mut Vec<(usize, usize, usize)>, edge: (usize, usize, usize)) {
    if !edges.contains(&edge) {
        edges.push(edge);
    }
}

/// Splices the component between positions `from` and `to`, appending its
/// interior nodes as new positions.
fn splice(ms: &mut MetaStructure, from: usize, to: usize, component: &MetaPath) {
    let interior = &component.node_types[1..component.node_types.len() - 1];
    let mut chain = vec![from];
    for &t in interior {
        ms.nodes.push(t);
        chain.push(ms.nodes.len() - 1);
    }
    chain.push(to);
    for (i, &e) in component.edge_types.iter().enumerate() {
        add_edge(&mut ms.edges, (chain[i], chain[i + 1], e));
    }
}

fn insertion_into(ms: &MetaStructure, lib: &ComponentLibrary, collector: &mut Collector<'_>) {
    for (i, &(u, v, e)) in ms.edges.iter().enumerate() {
        for component in &lib.insertion {
            if component.first() != ms.nodes[u] || component.last() != ms.nodes[v] {
                continue;
            }
            let mut next = ms.clone();
            next.edges.remove(i);
            splice(&mut next, u, v, component);
            collector.offer(
                next,
                Operation::Insertion {
                    edge: (u, v, e),
                    component: component.clone(),
                },
            );
        }
    }
}

fn grafting_into(ms: &MetaStructure, lib: &ComponentLibrary, collector: &mut Collector<'_>) {
    for component in &lib.grafting {
        for u in (0..ms.node_count()).filter(|&p| ms.nodes[p] == component.first()) {
            for w in (0..ms.node_count()).filter(|&p| ms.nodes[p] == component.last()) {
                if u == w {
                    continue;
                }
                let mut next = ms.clone();
                splice(&mut next, u, w, component);
                collector.offer(
                    next,
                    Operation::Grafting {
                        from: u,
                        to: w,
                        component: component.clone(),
                    },
                );
            }
        }
    }
}

fn deletion_into(ms: &MetaStructure, schema: &Schema, collector: &mut Collector<'_>) {
    for v in 0..ms.node_count() {
        if v == ms.source || v == ms.target {
            continue;
        }
        let mut preds: Vec<usize> = ms.edges.iter().filter(|e| e.1 == v).map(|e| e.0).collect();
        let mut succs: Vec<usize> = ms.edges.iter().filter(|e| e.0 == v).map(|e| e.1).collect();
        preds.sort_unstable();
        preds.dedup();
        succs.sort_unstable();
        succs.dedup();

        // one list of admissible edge types per (pred, succ) pair that can be bridged
        let mut bridges: Vec<Vec<(usize, usize, usize)>> = Vec::new();
        for &p in &preds {
            for &s in &succs {
                let options: Vec<_> = schema
                    .edges_between(ms.nodes[p], ms.nodes[s])
                    .into_iter()
                    .map(|e| (p, s, e))
                    .collect();
                if !options.is_empty() {
                    bridges.push(options);
                }
            }
        }

        let kept: Vec<(usize, usize, usize)> = ms
            .edges
            .iter()
            .copied()
            .filter(|&(a, b, _)| a != v && b != v)
            .collect();
        let renumber = |p: usize| if p > v { p - 1 } else { p };

        let mut choice = vec![0usize; bridges.len()];
        for _ in 0..MAX_RECONNECTIONS {
            let reconnect: Vec<_> = bridges.iter().zip(&choice).map(|(opts, &c)| opts[c]).collect();
            let mut edges = kept.clone();
            for &edge in &reconnect {
                add_edge(&mut edges, edge);
            }
            let mut nodes = ms.nodes.clone();
            nodes.remove(v);
            let next = MetaStructure {
                nodes,
                edges: edges
                    .into_iter()
                    .map(|(a, b, e)| (renumber(a), renumber(b), e))
                    .collect(),
                source: renumber(ms.source),
                target: renumber(ms.target),
            };
            collector.offer(next, Operation::Deletion { node: v, reconnect });

            // odometer over the choice vector
            let mut i = 0;
            while i < choice.len() {
                choice[i] += 1;
                if choice[i] < bridges[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == choice.len() {
                break;
            }
        }
    }
}

pub fn neighbors_insertion(ms: &MetaStructure, lib: &ComponentLibrary, schema: &Schema) -> Vec<Candidate> {
    let mut c = Collector::new(ms, schema, lib.limits.max_structure_nodes);
    insertion_into(ms, lib, &mut c);
    c.out
}

pub fn neighbors_grafting(ms: &MetaStructure, lib: &ComponentLibrary, schema: &Schema) -> Vec<Candidate> {
    let mut c = Collector::new(ms, schema, lib.limits.max_structure_nodes);
    grafting_into(ms, lib, &mut c);
    c.out
}

pub fn neighbors_deletion(ms: &MetaStructure, schema: &Schema) -> Vec<Candidate> {
    let mut c = Collector::new(ms, schema, usize::MAX);
    deletion_into(ms, schema, &mut c);
    c.out
}

/// Every distinct one-step neighbor, in insertion, grafting, deletion order.
pub fn all_neighbors(ms: &MetaStructure, lib: &ComponentLibrary, schema: &Schema) -> Vec<Candidate> {
    let mut c = Collector::new(ms, schema, lib.limits.max_structure_nodes);
    insertion_into(ms, lib, &mut c);
    grafting_into(ms, lib, &mut c);
    deletion_into(ms, schema, &mut c);
    c.out
}

/// The deduplicated neighbor union, uniformly subsampled to `cap` entries
/// (original order kept) when larger.
pub fn one_step_neighbors<R: Rng + ?Sized>(
    ms: &MetaStructure,
    lib: &ComponentLibrary,
    schema: &Schema,
    rng: &mut R,
    cap: usize,
) -> Result<CandidateSet, NeighborError> {
    let all = all_neighbors(ms, lib, schema);
    if all.is_empty() {
        return Err(NeighborError::Empty);
    }
    let sampled = all.len() > cap;
    let candidates = if sampled {
        let mut picked = rand::seq::index::sample(rng, all.len(), cap).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| all[i].clone()).collect()
    } else {
        all
    };
    Ok(CandidateSet {
        origin: ms.clone(),
        candidates,
        sampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mp(nodes: &[usize], edges: &[usize]) -> MetaPath {
        MetaPath {
            node_types: nodes.to_vec(),
            edge_types: edges.to_vec(),
        }
    }

    fn structure(nodes: &[usize], edges: &[usize]) -> MetaStructure {
        MetaStructure::from_path(&mp(nodes, edges))
    }

    #[test]
    fn library_contents() {
        let schema = toy_schema();
        let lib = build_component_library(&schema, ComponentLimits::default());
        assert!(lib.grafting.contains(&mp(&[USER, BUSINESS], &[RATES])));
        assert!(lib.grafting.contains(&mp(&[USER, USER], &[FRIEND_OF])));
        assert!(lib.grafting.iter().all(|p| p.node_types.len() <= 3));
        assert!(lib.insertion.iter().all(|p| p.node_types.len() <= 3));

        let edges_only = build_component_library(
            &schema,
            ComponentLimits {
                insertion_max_interior: 0,
                ..ComponentLimits::default()
            },
        );
        let singles: Vec<_> = schema
            .edge_types
            .iter()
            .map(|e| mp(&[e.src, e.dst], &[e.id]))
            .collect();
        let mut got = edges_only.insertion.clone();
        got.sort();
        let mut want = singles;
        want.sort();
        assert_eq!(got, want);

        let bare = Schema::from_json(r#"{"node_types":[{"id":0,"name":"U","noun":"User"}],"edge_types":[]}"#).unwrap();
        let lib = build_component_library(&bare, ComponentLimits::default());
        assert!(lib.insertion.is_empty() && lib.grafting.is_empty());
    }

    #[test]
    fn insertion_splices_a_friend() {
        let schema = toy_schema();
        let lib = build_component_library(&schema, ComponentLimits::default());
        let origin = structure(&[USER, BUSINESS], &[RATES]);
        let target = structure(&[USER, USER, BUSINESS], &[FRIEND_OF, RATES]).canonical_key();
        let out = neighbors_insertion(&origin, &lib, &schema);
        assert!(out.iter().any(|c| c.key == target));
        assert!(out.iter().all(|c| c.key != origin.canonical_key()));
    }

    #[test]
    fn grafting_adds_a_parallel_branch() {
        let schema = toy_schema();
        let lib = build_component_library(&schema, ComponentLimits::default());
        let origin = structure(&[USER, USER, BUSINESS], &[FRIEND_OF, RATES]);
        let out = neighbors_grafting(&origin, &lib, &schema);
        let want = MetaStructure {
            nodes: vec![USER, USER, BUSINESS],
            edges: vec![(0, 1, FRIEND_OF), (1, 2, RATES), (0, 2, RATES)],
            source: 0,
            target: 2,
        }
        .canonical_key();
        assert!(out.iter().any(|c| c.key == want));
        // a friend edge into the source would give it an in-edge
        assert!(out.iter().all(|c| c.structure.is_valid(&schema)));
    }

    #[test]
    fn grafting_needs_matching_types() {
        let schema = toy_schema();
        let lib = ComponentLibrary {
            insertion: vec![],
            grafting: vec![mp(&[BUSINESS, CATEGORY], &[BELONGS_TO])],
            limits: ComponentLimits::default(),
        };
        let origin = structure(&[USER, USER], &[FRIEND_OF]);
        assert!(neighbors_grafting(&origin, &lib, &schema).is_empty());
    }

    #[test]
    fn deletion_reconnects() {
        let schema = toy_schema();
        let origin = structure(&[USER, USER, BUSINESS], &[FRIEND_OF, RATES]);
        let out = neighbors_deletion(&origin, &schema);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].key, structure(&[USER, BUSINESS], &[RATES]).canonical_key());
        assert!(neighbors_deletion(&structure(&[USER, BUSINESS], &[RATES]), &schema).is_empty());
    }

    #[test]
    fn sampling_respects_cap() {
        let schema = toy_schema();
        let lib = build_component_library(&schema, ComponentLimits::default());
        let origin = structure(&[USER, BUSINESS], &[RATES]);
        let total = all_neighbors(&origin, &lib, &schema).len();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = one_step_neighbors(&origin, &lib, &schema, &mut rng, 100).unwrap();
        assert_eq!(set.candidates.len(), total);
        assert!(!set.sampled);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(total >= 2);
        let capped = one_step_neighbors(&origin, &lib, &schema, &mut rng, total - 1).unwrap();
        assert_eq!(capped.candidates.len(), total - 1);
        assert!(capped.sampled);
    }

    #[test]
    fn descriptor_json_shape() {
        let op = Operation::Deletion {
            node: 1,
            reconnect: vec![(0, 1, 0)],
        };
        let v = serde_json::to_value(&op).unwrap();
        assert_eq!(v["op"], "deletion");
        assert_eq!(v["detail"]["node"], 1);
    }
}
