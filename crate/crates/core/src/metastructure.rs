//! Meta-structures: typed DAGs with one source and one target position.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hin::Schema;

/// Default cap on structure size, in nodes.
pub const DEFAULT_MAX_NODES: usize = 10;

/// Structures up to this many nodes get an exact canonical form.
pub const EXACT_CANONICAL_LIMIT: usize = 10;

/// A DAG over node positions. `nodes[i]` is the node type of position `i`;
/// edges are `(from, to, edge type)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetaStructure {
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize, usize)>,
    pub source: usize,
    pub target: usize,
}

/// An alternating sequence of node and edge types; `node_types` is one
/// longer than `edge_types`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MetaPath {
    pub node_types: Vec<usize>,
    pub edge_types: Vec<usize>,
}

impl MetaPath {
    pub fn len(&self) -> usize {
        self.edge_types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_types.is_empty()
    }

    pub fn first(&self) -> usize {
        self.node_types[0]
    }

    pub fn last(&self) -> usize {
        *self.node_types.last().expect("meta-path has nodes")
    }

    /// Interleaved type-id sequence `t1, e1, t2, e2, ...`, used for ordering.
    pub fn type_sequence(&self) -> Vec<usize> {
        let mut seq = Vec::with_capacity(self.node_types.len() * 2);
        for (i, &t) in self.node_types.iter().enumerate() {
            seq.push(t);
            if let Some(&e) = self.edge_types.get(i) {
                seq.push(e);
            }
        }
        seq
    }

    pub fn is_valid(&self, schema: &Schema) -> bool {
        self.node_types.len() == self.edge_types.len() + 1
            && !self.edge_types.is_empty()
            && self.edge_types.iter().enumerate().all(|(i, &e)| {
                schema.edge_types.get(e).is_some_and(|et| {
                    et.src == self.node_types[i] && et.dst == self.node_types[i + 1]
                })
            })
    }

    pub fn label(&self, schema: &Schema) -> String {
        let mut out = schema.node_type(self.node_types[0]).name.clone();
        for (i, &e) in self.edge_types.iter().enumerate() {
            out.push('-');
            out.push_str(&schema.edge_type(e).name);
            out.push('-');
            out.push_str(&schema.node_type(self.node_types[i + 1]).name);
        }
        out
    }
}

/// A source-to-target path through specific positions of a structure.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PositionPath {
    pub positions: Vec<usize>,
    pub edge_types: Vec<usize>,
}

impl PositionPath {
    pub fn to_meta_path(&self, ms: &MetaStructure) -> MetaPath {
        MetaPath {
            node_types: self.positions.iter().map(|&p| ms.nodes[p]).collect(),
            edge_types: self.edge_types.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoEdges,
    SourceOutOfRange,
    TargetOutOfRange,
    SourceIsTarget,
    EdgeOutOfRange { edge: usize },
    UnknownNodeType { position: usize },
    UnknownEdgeType { edge: usize },
    EndpointTypeMismatch { edge: usize },
    DuplicateEdge { edge: usize },
    SelfLoop { edge: usize },
    Cycle,
    SourceHasIncoming,
    TargetHasOutgoing,
    OffPath { position: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoEdges => write!(f, "structure has no edges"),
            Violation::SourceOutOfRange => write!(f, "source position out of range"),
            Violation::TargetOutOfRange => write!(f, "target position out of range"),
            Violation::SourceIsTarget => write!(f, "source and target are the same position"),
            Violation::EdgeOutOfRange { edge } => write!(f, "edge {edge} references a missing position"),
            Violation::UnknownNodeType { position } => {
                write!(f, "position {position} has an unknown node type")
            }
            Violation::UnknownEdgeType { edge } => write!(f, "edge {edge} has an unknown edge type"),
            Violation::EndpointTypeMismatch { edge } => {
                write!(f, "edge {edge} endpoint types do not match its edge type")
            }
            Violation::DuplicateEdge { edge } => write!(f, "edge {edge} duplicates an earlier edge"),
            Violation::SelfLoop { edge } => write!(f, "edge {edge} is a self-loop (cycle)"),
            Violation::Cycle => write!(f, "cycle"),
            Violation::SourceHasIncoming => write!(f, "source has incoming edges"),
            Violation::TargetHasOutgoing => write!(f, "target has outgoing edges"),
            Violation::OffPath { position } => {
                write!(f, "node {position} off all source-target paths")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("invalid meta-structure: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("no schema path from node type {source_type} to node type {target_type}")]
    Disconnected { source_type: usize, target_type: usize },
    #[error("bad structure JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl MetaStructure {
    pub fn from_path(path: &MetaPath) -> Self {
        let n = path.node_types.len();
        Self {
            nodes: path.node_types.clone(),
            edges: path
                .edge_types
                .iter()
                .enumerate()
                .map(|(i, &e)| (i, i + 1, e))
                .collect(),
            source: 0,
            target: n - 1,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, StructureError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("structure serializes")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn source_type(&self) -> usize {
        self.nodes[self.source]
    }

    pub fn target_type(&self) -> usize {
        self.nodes[self.target]
    }

    fn out_edges(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(u, v, e) in &self.edges {
            out[u].push((v, e));
        }
        for list in &mut out {
            list.sort_unstable();
        }
        out
    }

    /// Multiset of `(src type, edge type, dst type)` triples, sorted.
    pub fn typed_edges(&self) -> Vec<(usize, usize, usize)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v, e)| (self.nodes[u], e, self.nodes[v]))
            .collect();
        out.sort_unstable();
        out
    }

    /// Every violated invariant; empty iff the structure is valid.
    pub fn validate(&self, schema: &Schema) -> Vec<Violation> {
        let n = self.nodes.len();
        let mut violations = Vec::new();
        if self.edges.is_empty() {
            violations.push(Violation::NoEdges);
        }
        if self.source >= n {
            violations.push(Violation::SourceOutOfRange);
        }
        if self.target >= n {
            violations.push(Violation::TargetOutOfRange);
        }
        if self.source == self.target && self.source < n {
            violations.push(Violation::SourceIsTarget);
        }
        for (p, &t) in self.nodes.iter().enumerate() {
            if t >= schema.node_types.len() {
                violations.push(Violation::UnknownNodeType { position: p });
            }
        }
        let mut structural_ok = true;
        let mut seen = std::collections::HashSet::new();
        for (i, &(u, v, e)) in self.edges.iter().enumerate() {
            if u >= n || v >= n {
                violations.push(Violation::EdgeOutOfRange { edge: i });
                structural_ok = false;
                continue;
            }
            if u == v {
                violations.push(Violation::SelfLoop { edge: i });
                structural_ok = false;
            }
            match schema.edge_types.get(e) {
                None => violations.push(Violation::UnknownEdgeType { edge: i }),
                Some(et) => {
                    if et.src != self.nodes[u] || et.dst != self.nodes[v] {
                        violations.push(Violation::EndpointTypeMismatch { edge: i });
                    }
                }
            }
            if !seen.insert((u, v, e)) {
                violations.push(Violation::DuplicateEdge { edge: i });
            }
        }
        if !structural_ok || self.source >= n || self.target >= n {
            return violations;
        }

        if topological_order(n, &self.edges).is_none() {
            violations.push(Violation::Cycle);
        }
        if self.edges.iter().any(|&(_, v, _)| v == self.source) {
            violations.push(Violation::SourceHasIncoming);
        }
        if self.edges.iter().any(|&(u, _, _)| u == self.target) {
            violations.push(Violation::TargetHasOutgoing);
        }
        let from_source = reachable(n, &self.edges, self.source, false);
        let to_target = reachable(n, &self.edges, self.target, true);
        for p in 0..n {
            if !(from_source[p] && to_target[p]) {
                violations.push(Violation::OffPath { position: p });
            }
        }
        violations
    }

    pub fn is_valid(&self, schema: &Schema) -> bool {
        self.validate(schema).is_empty()
    }

    pub fn ensure_valid(&self, schema: &Schema) -> Result<(), StructureError> {
        let violations = self.validate(schema);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(StructureError::Invalid(violations))
        }
    }

    /// All directed source-to-target paths, ordered by position sequence and
    /// then edge types. Requires a valid (acyclic) structure.
    pub fn position_paths(&self) -> Vec<PositionPath> {
        let out = self.out_edges();
        let mut paths = Vec::new();
        let mut positions = vec![self.source];
        let mut edge_types = Vec::new();
        self.walk(&out, &mut positions, &mut edge_types, &mut paths);
        paths.sort();
        paths
    }

    fn walk(
        &self,
        out: &[Vec<(usize, usize)>],
        positions: &mut Vec<usize>,
        edge_types: &mut Vec<usize>,
        paths: &mut Vec<PositionPath>,
    ) {
        let here = *positions.last().expect("path is nonempty");
        if here == self.target {
            paths.push(PositionPath {
                positions: positions.clone(),
                edge_types: edge_types.clone(),
            });
            return;
        }
        for &(next, e) in &out[here] {
            positions.push(next);
            edge_types.push(e);
            self.walk(out, positions, edge_types, paths);
            positions.pop();
            edge_types.pop();
        }
    }

    /// The meta-paths this structure decomposes into, one per simple
    /// source-to-target path.
    pub fn enumerate_paths(&self) -> Vec<MetaPath> {
        self.position_paths()
            .iter()
            .map(|p| p.to_meta_path(self))
            .collect()
    }

    pub fn canonical_key(&self) -> CanonicalKey {
        canonical_form(self).key
    }

    /// Copy with positions renumbered so position `i` of the result is the
    /// position whose canonical index is `i`; edges sorted.
    pub fn canonicalized(&self) -> MetaStructure {
        let form = canonical_form(self);
        self.relabeled(&form.order)
    }

    /// Renumbers positions: old position `p` becomes `new_index[p]`.
    pub fn relabeled(&self, new_index: &[usize]) -> MetaStructure {
        let mut nodes = vec![0; self.nodes.len()];
        for (p, &t) in self.nodes.iter().enumerate() {
            nodes[new_index[p]] = t;
        }
        let mut edges: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v, e)| (new_index[u], new_index[v], e))
            .collect();
        edges.sort_unstable();
        MetaStructure {
            nodes,
            edges,
            source: new_index[self.source],
            target: new_index[self.target],
        }
    }
}

fn topological_order(n: usize, edges: &[(usize, usize, usize)]) -> Option<Vec<usize>> {
    let mut indegree = vec![0usize; n];
    let mut out = vec![Vec::new(); n];
    for &(u, v, _) in edges {
        indegree[v] += 1;
        out[u].push(v);
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&p| indegree[p] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &out[u] {
            indegree[v] -= 1;
            if indegree[v] == 0 {
                queue.push_back(v);
            }
        }
    }
    (order.len() == n).then_some(order)
}

fn reachable(n: usize, edges: &[(usize, usize, usize)], start: usize, reverse: bool) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v, _) in edges {
        if reverse {
            adj[v].push(u);
        } else {
            adj[u].push(v);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Isomorphism-invariant identifier of a meta-structure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalKey(pub String);

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Result of canonical labeling.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub key: CanonicalKey,
    /// Canonical index of each original position.
    pub order: Vec<usize>,
    /// False when the structure was too large for the exhaustive search and
    /// the key is only the refined color signature.
    pub exact: bool,
}

type Certificate = (usize, usize, Vec<usize>, Vec<(usize, usize, usize)>);

/// Color refinement: each round a position's color becomes the rank of
/// (old color, sorted typed out-neighbor colors, sorted typed in-neighbor
/// colors). Runs until the number of classes stops growing. Output colors
/// are dense ranks.
fn refine(ms: &MetaStructure, colors: &[usize]) -> Vec<usize> {
    let n = ms.nodes.len();
    let mut colors = rank(colors);
    let mut classes = count_classes(&colors);
    loop {
        let mut signatures: Vec<(usize, Vec<(usize, usize)>, Vec<(usize, usize)>)> = (0..n)
            .map(|p| (colors[p], Vec::new(), Vec::new()))
            .collect();
        for &(u, v, e) in &ms.edges {
            signatures[u].1.push((e, colors[v]));
            signatures[v].2.push((e, colors[u]));
        }
        for s in &mut signatures {
            s.1.sort_unstable();
            s.2.sort_unstable();
        }
        let next = rank(&signatures);
        let next_classes = count_classes(&next);
        colors = next;
        if next_classes == classes {
            return colors;
        }
        classes = next_classes;
    }
}

fn rank<T: Ord + Clone>(values: &[T]) -> Vec<usize> {
    let mut distinct: Vec<T> = values.to_vec();
    distinct.sort();
    distinct.dedup();
    values
        .iter()
        .map(|v| distinct.binary_search(v).expect("value present"))
        .collect()
}

fn count_classes(colors: &[usize]) -> usize {
    colors.iter().max().map_or(0, |m| m + 1)
}

fn certificate(ms: &MetaStructure, order: &[usize]) -> Certificate {
    let relabeled = ms.relabeled(order);
    (relabeled.source, relabeled.target, relabeled.nodes, relabeled.edges)
}

fn initial_colors(ms: &MetaStructure) -> Vec<usize> {
    let role = |p: usize| {
        if p == ms.source {
            0
        } else if p == ms.target {
            2
        } else {
            1
        }
    };
    let pairs: Vec<(usize, usize)> = (0..ms.nodes.len()).map(|p| (role(p), ms.nodes[p])).collect();
    rank(&pairs)
}

/// Individualization-refinement search for the lexicographically smallest
/// certificate over all leaves of the search tree.
fn search(ms: &MetaStructure, colors: &[usize], best: &mut Option<(Certificate, Vec<usize>)>) {
    let colors = refine(ms, colors);
    let n = colors.len();
    if count_classes(&colors) == n {
        let cert = certificate(ms, &colors);
        if best.as_ref().is_none_or(|(b, _)| cert < *b) {
            *best = Some((cert, colors));
        }
        return;
    }
    let mut sizes = vec![0usize; n];
    for &c in &colors {
        sizes[c] += 1;
    }
    let cell = (0..n).find(|&c| sizes[c] > 1).expect("a non-singleton cell exists");
    for v in (0..n).filter(|&p| colors[p] == cell) {
        let individualized: Vec<usize> = colors
            .iter()
            .enumerate()
            .map(|(p, &c)| 2 * c + usize::from(p != v))
            .collect();
        search(ms, &individualized, best);
    }
}

pub fn canonical_form(ms: &MetaStructure) -> CanonicalForm {
    let n = ms.nodes.len();
    if n <= EXACT_CANONICAL_LIMIT {
        let mut best = None;
        search(ms, &initial_colors(ms), &mut best);
        let (cert, order) = best.expect("search visits at least one leaf");
        return CanonicalForm {
            key: CanonicalKey(format_certificate(&cert)),
            order,
            exact: true,
        };
    }

    log::debug!("structure with {n} nodes canonicalized by refined signature only");
    let colors = refine(ms, &initial_colors(ms));
    let mut class_types: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for (p, &c) in colors.iter().enumerate() {
        let entry = class_types.entry(c).or_insert((ms.nodes[p], 0));
        entry.1 += 1;
    }
    let mut edges: Vec<_> = ms
        .edges
        .iter()
        .map(|&(u, v, e)| (colors[u], colors[v], e))
        .collect();
    edges.sort_unstable();
    let classes: Vec<String> = class_types
        .values()
        .map(|(t, count)| format!("{t}x{count}"))
        .collect();
    let key = format!(
        "wl:s{};t{};c{};e{}",
        colors[ms.source],
        colors[ms.target],
        classes.join(","),
        edges
            .iter()
            .map(|(u, v, e)| format!("{u}-{v}:{e}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    // ties inside a class broken by original position
    let mut by_color: Vec<usize> = (0..n).collect();
    by_color.sort_by_key(|&p| (colors[p], p));
    let mut order = vec![0; n];
    for (i, &p) in by_color.iter().enumerate() {
        order[p] = i;
    }
    CanonicalForm {
        key: CanonicalKey(key),
        order,
        exact: false,
    }
}

fn format_certificate((source, target, nodes, edges): &Certificate) -> String {
    format!(
        "s{source};t{target};n{};e{}",
        nodes.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        edges
            .iter()
            .map(|(u, v, e)| format!("{u}-{v}:{e}"))
            .collect::<Vec<_>>()
            .join(",")
    )
}

/// Shortest distinct meta-paths from `source_type` to `target_type`, found
/// breadth-first over the schema with edge types expanded in id order.
/// Returns exactly `size` structures, repeating the found paths cyclically
/// when fewer than `size` exist within `max_nodes`.
pub fn seed_population(
    schema: &Schema,
    source_type: usize,
    target_type: usize,
    size: usize,
    max_nodes: usize,
) -> Result<Vec<MetaStructure>, StructureError> {
    const FRONTIER_LIMIT: usize = 200_000;
    let disconnected = StructureError::Disconnected {
        source_type,
        target_type,
    };
    let mut found: Vec<MetaPath> = Vec::new();
    let mut frontier = vec![MetaPath {
        node_types: vec![source_type],
        edge_types: vec![],
    }];
    while found.len() < size && !frontier.is_empty() {
        let mut next = Vec::new();
        for path in &frontier {
            if path.node_types.len() >= max_nodes {
                continue;
            }
            for e in schema.edges_from(path.last()) {
                let mut extended = path.clone();
                extended.edge_types.push(e.id);
                extended.node_types.push(e.dst);
                if e.dst == target_type && found.len() < size {
                    found.push(extended.clone());
                }
                if next.len() < FRONTIER_LIMIT {
                    next.push(extended);
                }
            }
        }
        frontier = next;
    }
    if found.is_empty() {
        return Err(disconnected);
    }
    Ok((0..size)
        .map(|i| MetaStructure::from_path(&found[i % found.len()]))
        .collect())
}
