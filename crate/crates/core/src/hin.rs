//! Typed heterogeneous graph model, dataset ingestion, and task splits.
//!
//! A dataset directory holds one edge-list file per edge type, named
//! `<edge type name>.tsv`, with `src_index<TAB>dst_index` lines and `#`
//! comments. An optional `node_counts.tsv` (`type name<TAB>count`) fixes the
//! number of nodes per type; without it counts are inferred from the largest
//! index seen. A relation whose file is missing is loaded as the transpose of
//! its declared inverse when that file exists.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::{MatrixError, SparseMatrix};

#[derive(Debug, Error)]
pub enum HinError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid schema JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("schema declares no node types")]
    EmptyNodeTypes,
    #[error("{kind} ids must be dense 0..{expected}, found id {found}")]
    NonDenseIds {
        kind: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("edge type {edge} references unknown node type {node}")]
    DanglingNodeType { edge: String, node: usize },
    #[error("edge type {edge} references unknown inverse {inverse}")]
    DanglingInverse { edge: String, inverse: usize },
    #[error("edge type {edge} declares an asymmetric inverse")]
    AsymmetricInverse { edge: String },
    #[error("unknown node type {0:?}")]
    UnknownNodeType(String),
    #[error("unknown edge type {0:?}")]
    UnknownEdgeType(String),
    #[error("missing relation file {path}")]
    MissingRelation { path: PathBuf },
    #[error("{path}:{line}: node index {index} out of range for type {node_type} with {count} nodes")]
    NodeOutOfRange {
        path: PathBuf,
        line: usize,
        node_type: String,
        index: usize,
        count: usize,
    },
    #[error("relation {relation}: {source}")]
    Matrix {
        relation: String,
        source: MatrixError,
    },
    #[error("no positive pairs to split")]
    NoPositivePairs,
    #[error("split too small: {train}/{val}/{test} positives, need at least {minimum} in every part")]
    SplitTooSmall {
        train: usize,
        val: usize,
        test: usize,
        minimum: usize,
    },
    #[error("not enough unconnected pairs to sample {needed} negatives")]
    NegativeSpaceExhausted { needed: usize },
    #[error("label map is empty")]
    EmptyLabels,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeType {
    pub id: usize,
    pub name: String,
    /// Singular noun phrase used when the type is spoken about.
    pub noun: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeType {
    pub id: usize,
    pub name: String,
    pub src: usize,
    pub dst: usize,
    /// Verb phrase reading the edge from `src` to `dst`.
    pub verb: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<usize>,
}

/// Node and edge type vocabulary of a network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub node_types: Vec<NodeType>,
    pub edge_types: Vec<EdgeType>,
}

impl Schema {
    /// Validates and builds a schema; types are reordered by id.
    pub fn new(mut node_types: Vec<NodeType>, mut edge_types: Vec<EdgeType>) -> Result<Self, HinError> {
        if node_types.is_empty() {
            return Err(HinError::EmptyNodeTypes);
        }
        node_types.sort_by_key(|t| t.id);
        edge_types.sort_by_key(|e| e.id);
        for (i, t) in node_types.iter().enumerate() {
            if t.id != i {
                return Err(HinError::NonDenseIds {
                    kind: "node type",
                    expected: node_types.len(),
                    found: t.id,
                });
            }
        }
        for (i, e) in edge_types.iter().enumerate() {
            if e.id != i {
                return Err(HinError::NonDenseIds {
                    kind: "edge type",
                    expected: edge_types.len(),
                    found: e.id,
                });
            }
        }
        for e in &edge_types {
            for node in [e.src, e.dst] {
                if node >= node_types.len() {
                    return Err(HinError::DanglingNodeType {
                        edge: e.name.clone(),
                        node,
                    });
                }
            }
            if let Some(inv) = e.inverse {
                let Some(other) = edge_types.get(inv) else {
                    return Err(HinError::DanglingInverse {
                        edge: e.name.clone(),
                        inverse: inv,
                    });
                };
                if other.inverse != Some(e.id) || other.src != e.dst || other.dst != e.src {
                    return Err(HinError::AsymmetricInverse {
                        edge: e.name.clone(),
                    });
                }
            }
        }
        Ok(Self {
            node_types,
            edge_types,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        #[derive(Deserialize)]
        struct Raw {
            node_types: Vec<NodeType>,
            #[serde(default)]
            edge_types: Vec<EdgeType>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Schema::new(raw.node_types, raw.edge_types).map_err(serde::de::Error::custom)
    }

    pub fn node_type(&self, id: usize) -> &NodeType {
        &self.node_types[id]
    }

    pub fn edge_type(&self, id: usize) -> &EdgeType {
        &self.edge_types[id]
    }

    pub fn node_type_by_name(&self, name: &str) -> Result<usize, HinError> {
        self.node_types
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.id)
            .ok_or_else(|| HinError::UnknownNodeType(name.to_string()))
    }

    pub fn edge_type_by_name(&self, name: &str) -> Result<usize, HinError> {
        self.edge_types
            .iter()
            .find(|e| e.name == name)
            .map(|e| e.id)
            .ok_or_else(|| HinError::UnknownEdgeType(name.to_string()))
    }

    /// Edge types leading from node type `src` to node type `dst`, by id.
    pub fn edges_between(&self, src: usize, dst: usize) -> Vec<usize> {
        self.edge_types
            .iter()
            .filter(|e| e.src == src && e.dst == dst)
            .map(|e| e.id)
            .collect()
    }

    pub fn edges_from(&self, src: usize) -> impl Iterator<Item = &EdgeType> {
        self.edge_types.iter().filter(move |e| e.src == src)
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema, HinError> {
    let path = path.as_ref();
    let text = read_text(path)?;
    Schema::from_json(&text).map_err(|source| HinError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// A heterogeneous network: schema plus one binary adjacency matrix per edge
/// type, shaped `count(src type) x count(dst type)`.
#[derive(Debug, Clone)]
pub struct HinGraph {
    schema: Schema,
    node_counts: Vec<usize>,
    adjacency: Vec<SparseMatrix>,
}

impl HinGraph {
    /// Builds a graph from per-edge-type pair lists. Repeated pairs collapse.
    pub fn from_edges(
        schema: Schema,
        node_counts: Vec<usize>,
        edges: Vec<Vec<(usize, usize)>>,
    ) -> Result<Self, HinError> {
        assert_eq!(node_counts.len(), schema.node_types.len());
        assert_eq!(edges.len(), schema.edge_types.len());
        let adjacency = schema
            .edge_types
            .iter()
            .zip(edges)
            .map(|(e, pairs)| {
                SparseMatrix::from_pairs(node_counts[e.src], node_counts[e.dst], pairs).map_err(
                    |source| HinError::Matrix {
                        relation: e.name.clone(),
                        source,
                    },
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            schema,
            node_counts,
            adjacency,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_count(&self, node_type: usize) -> usize {
        self.node_counts[node_type]
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.node_counts
    }

    pub fn adjacency(&self, edge_type: usize) -> &SparseMatrix {
        &self.adjacency[edge_type]
    }

    /// Copy of the graph with `edge_type` (and its inverse, if declared)
    /// holding exactly `pairs`.
    pub fn with_relation(&self, edge_type: usize, pairs: &[(usize, usize)]) -> Result<Self, HinError> {
        let e = self.schema.edge_type(edge_type);
        let matrix = SparseMatrix::from_pairs(
            self.node_counts[e.src],
            self.node_counts[e.dst],
            pairs.iter().copied(),
        )
        .map_err(|source| HinError::Matrix {
            relation: e.name.clone(),
            source,
        })?;
        let mut out = self.clone();
        if let Some(inv) = e.inverse {
            out.adjacency[inv] = matrix.transpose();
        }
        out.adjacency[edge_type] = matrix;
        Ok(out)
    }
}

pub fn load_graph(schema: &Schema, dir: impl AsRef<Path>) -> Result<HinGraph, HinError> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(HinError::Io {
            path: dir.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        });
    }

    let mut raw: Vec<Option<(PathBuf, Vec<(usize, usize, usize)>)>> = Vec::new();
    for e in &schema.edge_types {
        let path = dir.join(format!("{}.tsv", e.name));
        if path.exists() {
            raw.push(Some((path.clone(), read_pairs(&path)?)));
        } else {
            raw.push(None);
        }
    }
    for (e, entry) in schema.edge_types.iter().zip(&raw) {
        let has_inverse_file = e.inverse.is_some_and(|inv| raw[inv].is_some());
        if entry.is_none() && !has_inverse_file {
            return Err(HinError::MissingRelation {
                path: dir.join(format!("{}.tsv", e.name)),
            });
        }
    }

    let counts_path = dir.join("node_counts.tsv");
    let node_counts = if counts_path.exists() {
        read_node_counts(schema, &counts_path)?
    } else {
        let mut counts = vec![0usize; schema.node_types.len()];
        for (e, entry) in schema.edge_types.iter().zip(&raw) {
            if let Some((_, pairs)) = entry {
                for &(s, d, _) in pairs {
                    counts[e.src] = counts[e.src].max(s + 1);
                    counts[e.dst] = counts[e.dst].max(d + 1);
                }
            }
        }
        counts
    };

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); schema.edge_types.len()];
    for (e, entry) in schema.edge_types.iter().zip(&raw) {
        if let Some((path, pairs)) = entry {
            for &(s, d, line) in pairs {
                for (index, node_type) in [(s, e.src), (d, e.dst)] {
                    if index >= node_counts[node_type] {
                        return Err(HinError::NodeOutOfRange {
                            path: path.clone(),
                            line,
                            node_type: schema.node_type(node_type).name.clone(),
                            index,
                            count: node_counts[node_type],
                        });
                    }
                }
                edges[e.id].push((s, d));
            }
        }
    }
    for (e, entry) in schema.edge_types.iter().zip(&raw) {
        if entry.is_none() {
            let inv = e.inverse.expect("checked above");
            edges[e.id] = edges[inv].iter().map(|&(s, d)| (d, s)).collect();
        }
    }
    HinGraph::from_edges(schema.clone(), node_counts, edges)
}

fn read_text(path: &Path) -> Result<String, HinError> {
    fs::read_to_string(path).map_err(|source| HinError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-comment, non-blank lines split on tabs, with 1-based line numbers.
fn data_lines(path: &Path) -> Result<Vec<(usize, Vec<String>)>, HinError> {
    let text = read_text(path)?;
    Ok(text
        .lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                None
            } else {
                Some((i + 1, line.split('\t').map(|f| f.trim().to_string()).collect()))
            }
        })
        .collect())
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str) -> Result<T, HinError> {
    field.parse().map_err(|_| HinError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("expected a nonnegative integer, found {field:?}"),
    })
}

fn expect_fields(path: &Path, line: usize, fields: &[String], n: usize) -> Result<(), HinError> {
    if fields.len() != n {
        return Err(HinError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected {n} tab-separated fields, found {}", fields.len()),
        });
    }
    Ok(())
}

fn read_pairs(path: &Path) -> Result<Vec<(usize, usize, usize)>, HinError> {
    data_lines(path)?
        .into_iter()
        .map(|(line, fields)| {
            expect_fields(path, line, &fields, 2)?;
            Ok((
                parse_field(path, line, &fields[0])?,
                parse_field(path, line, &fields[1])?,
                line,
            ))
        })
        .collect()
}

fn read_node_counts(schema: &Schema, path: &Path) -> Result<Vec<usize>, HinError> {
    let mut counts = vec![0usize; schema.node_types.len()];
    for (line, fields) in data_lines(path)? {
        expect_fields(path, line, &fields, 2)?;
        let t = schema.node_type_by_name(&fields[0])?;
        counts[t] = parse_field(path, line, &fields[1])?;
    }
    Ok(counts)
}

/// Reads `src<TAB>dst<TAB>rating` lines.
pub fn read_ratings(path: impl AsRef<Path>) -> Result<Vec<(usize, usize, u32)>, HinError> {
    let path = path.as_ref();
    data_lines(path)?
        .into_iter()
        .map(|(line, fields)| {
            expect_fields(path, line, &fields, 3)?;
            Ok((
                parse_field(path, line, &fields[0])?,
                parse_field(path, line, &fields[1])?,
                parse_field(path, line, &fields[2])?,
            ))
        })
        .collect()
}

/// Reads `node_index<TAB>class_id` lines.
pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<usize, usize>, HinError> {
    let path = path.as_ref();
    let mut labels = BTreeMap::new();
    for (line, fields) in data_lines(path)? {
        expect_fields(path, line, &fields, 2)?;
        labels.insert(
            parse_field(path, line, &fields[0])?,
            parse_field(path, line, &fields[1])?,
        );
    }
    Ok(labels)
}

/// Assigns dense 0-based indices to raw node identifiers in first-seen order.
#[derive(Debug, Default, Clone)]
pub struct IdMap {
    index: HashMap<String, usize>,
    raw: Vec<String>,
}

impl IdMap {
    pub fn intern(&mut self, raw: &str) -> usize {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        let i = self.raw.len();
        self.index.insert(raw.to_string(), i);
        self.raw.push(raw.to_string());
        i
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw_id(&self, index: usize) -> Option<&str> {
        self.raw.get(index).map(String::as_str)
    }

    /// Sidecar contents: `index<TAB>original id` per line.
    pub fn to_sidecar(&self) -> String {
        self.raw
            .iter()
            .enumerate()
            .map(|(i, r)| format!("{i}\t{r}\n"))
            .collect()
    }
}

/// How a rating is compared against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// label 1 iff rating > threshold
    #[default]
    Above,
    /// label 1 iff rating >= threshold
    AtLeast,
}

pub const DEFAULT_RATING_THRESHOLD: u32 = 2;

/// Converts ratings to binary preference labels; rating == threshold maps to 0.
pub fn binarize_ratings(ratings: &[(usize, usize, u32)], threshold: u32) -> Vec<(usize, usize, u8)> {
    binarize_ratings_with(ratings, threshold, ThresholdRule::Above)
}

pub fn binarize_ratings_with(
    ratings: &[(usize, usize, u32)],
    threshold: u32,
    rule: ThresholdRule,
) -> Vec<(usize, usize, u8)> {
    ratings
        .iter()
        .map(|&(s, d, r)| {
            let positive = match rule {
                ThresholdRule::Above => r > threshold,
                ThresholdRule::AtLeast => r >= threshold,
            };
            (s, d, u8::from(positive))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Test => "test",
        })
    }
}

impl std::str::FromStr for SplitTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" | "validation" => Ok(SplitTag::Val),
            "test" => Ok(SplitTag::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPairs {
    pub train: Vec<(usize, usize)>,
    pub val: Vec<(usize, usize)>,
    pub test: Vec<(usize, usize)>,
}

impl SplitPairs {
    pub fn get(&self, tag: SplitTag) -> &[(usize, usize)] {
        match tag {
            SplitTag::Train => &self.train,
            SplitTag::Val => &self.val,
            SplitTag::Test => &self.test,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationSplit {
    pub relation: usize,
    pub positives: SplitPairs,
    pub negatives: SplitPairs,
    /// Positive pairs kept in the target relation for network construction.
    pub reserved: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitRatio {
    fn default() -> Self {
        Self {
            train: 3,
            val: 1,
            test: 1,
        }
    }
}

impl SplitRatio {
    /// Part sizes for `n` items: validation and test are floored, training
    /// takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let total = self.train + self.val + self.test;
        let val = n * self.val / total;
        let test = n * self.test / total;
        (n - val - test, val, test)
    }
}

fn cut<T: Clone>(items: &[T], sizes: (usize, usize, usize)) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (a, b, _) = sizes;
    (
        items[..a].to_vec(),
        items[a..a + b].to_vec(),
        items[a + b..].to_vec(),
    )
}

/// Builds a recommendation split over `relation` and returns the
/// construction graph whose target relation holds only the reserved pairs.
///
/// Half of the label-1 pairs (rounded down) become split positives, cut by
/// `ratio`; the rest are reserved. Label-0 pairs are paired with positives,
/// topped up with uniformly sampled unconnected pairs when there are too few.
pub fn make_recommendation_split(
    graph: &HinGraph,
    relation: usize,
    labeled: &[(usize, usize, u8)],
    ratio: SplitRatio,
    seed: u64,
    min_per_split: usize,
) -> Result<(HinGraph, RecommendationSplit), HinError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut ones = Vec::new();
    let mut zeros = Vec::new();
    for &(s, d, label) in labeled {
        if seen.insert((s, d)) {
            if label == 1 {
                ones.push((s, d));
            } else {
                zeros.push((s, d));
            }
        }
    }
    if ones.is_empty() {
        return Err(HinError::NoPositivePairs);
    }
    ones.shuffle(&mut rng);
    let n_split = ones.len() / 2;
    let (split_pos, reserved) = ones.split_at(n_split);
    let sizes = ratio.sizes(n_split);
    if sizes.0 < min_per_split || sizes.1 < min_per_split || sizes.2 < min_per_split {
        return Err(HinError::SplitTooSmall {
            train: sizes.0,
            val: sizes.1,
            test: sizes.2,
            minimum: min_per_split,
        });
    }

    zeros.shuffle(&mut rng);
    zeros.truncate(n_split);
    if zeros.len() < n_split {
        let e = graph.schema().edge_type(relation);
        let rows = graph.node_count(e.src);
        let cols = graph.node_count(e.dst);
        let adjacency = graph.adjacency(relation);
        let mut taken: HashSet<(usize, usize)> = seen.clone();
        let needed = n_split - zeros.len();
        let space = (rows * cols).saturating_sub(adjacency.nnz());
        let mut attempts = 0usize;
        let max_attempts = 100 * (needed + 1) + 10 * rows * cols;
        while zeros.len() < n_split {
            attempts += 1;
            if attempts > max_attempts || taken.len() >= space + seen.len() {
                return Err(HinError::NegativeSpaceExhausted { needed });
            }
            let pair = (rng.random_range(0..rows), rng.random_range(0..cols));
            if adjacency.get(pair.0, pair.1) != 0.0 || !taken.insert(pair) {
                continue;
            }
            zeros.push(pair);
        }
    }

    let (tr, va, te) = cut(split_pos, sizes);
    let (ntr, nva, nte) = cut(&zeros, sizes);
    let split = RecommendationSplit {
        relation,
        positives: SplitPairs {
            train: tr,
            val: va,
            test: te,
        },
        negatives: SplitPairs {
            train: ntr,
            val: nva,
            test: nte,
        },
        reserved: reserved.to_vec(),
    };
    let construction = graph.with_relation(relation, &split.reserved)?;
    Ok((construction, split))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLabelSplit {
    pub node_type: usize,
    pub labels: BTreeMap<usize, usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub classes: usize,
}

impl NodeLabelSplit {
    pub fn indices(&self, tag: SplitTag) -> &[usize] {
        match tag {
            SplitTag::Train => &self.train,
            SplitTag::Val => &self.val,
            SplitTag::Test => &self.test,
        }
    }
}

pub fn make_node_label_split(
    node_type: usize,
    labels: &BTreeMap<usize, usize>,
    ratio: SplitRatio,
    seed: u64,
) -> Result<NodeLabelSplit, HinError> {
    if labels.is_empty() {
        return Err(HinError::EmptyLabels);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes: Vec<usize> = labels.keys().copied().collect();
    nodes.shuffle(&mut rng);
    let (train, val, test) = cut(&nodes, ratio.sizes(nodes.len()));
    let classes = labels.values().max().map_or(0, |m| m + 1);
    Ok(NodeLabelSplit {
        node_type,
        labels: labels.clone(),
        train,
        val,
        test,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;

    #[test]
    fn toy_schema_parses() {
        let schema = Schema::from_json(toy::TOY_SCHEMA_JSON).unwrap();
        assert_eq!(schema.node_types.len(), 4);
        assert_eq!(schema.edge_types.len(), 4);
        assert_eq!(schema.edge_type_by_name("rates").unwrap(), 0);
    }

    #[test]
    fn dangling_node_type_is_rejected() {
        let json = r#"{"node_types":[{"id":0,"name":"U","noun":"User"}],
            "edge_types":[{"id":0,"name":"x","src":0,"dst":7,"verb":"likes"}]}"#;
        let err = Schema::from_json(json).unwrap_err();
        assert!(err.to_string().contains("unknown node type 7"), "{err}");
    }

    #[test]
    fn empty_node_types_are_rejected() {
        let err = Schema::from_json(r#"{"node_types":[],"edge_types":[]}"#).unwrap_err();
        assert!(err.to_string().contains("no node types"));
    }

    #[test]
    fn inverse_must_be_symmetric() {
        let json = r#"{"node_types":[{"id":0,"name":"U","noun":"User"},{"id":1,"name":"B","noun":"Business"}],
            "edge_types":[{"id":0,"name":"rates","src":0,"dst":1,"verb":"rates","inverse":1},
                          {"id":1,"name":"rated_by","src":1,"dst":0,"verb":"is rated by"}]}"#;
        let err = Schema::from_json(json).unwrap_err();
        assert!(err.to_string().contains("asymmetric"), "{err}");
    }

    #[test]
    fn rating_threshold_is_strict() {
        let labels = binarize_ratings(&[(0, 1, 3), (0, 2, 1), (0, 3, 2)], DEFAULT_RATING_THRESHOLD);
        assert_eq!(labels, vec![(0, 1, 1), (0, 2, 0), (0, 3, 0)]);
        let inclusive = binarize_ratings_with(&[(0, 3, 2)], 2, ThresholdRule::AtLeast);
        assert_eq!(inclusive, vec![(0, 3, 1)]);
    }

    #[test]
    fn ratio_sizes() {
        let r = SplitRatio::default();
        assert_eq!(r.sizes(50), (30, 10, 10));
        assert_eq!(r.sizes(5), (3, 1, 1));
        assert_eq!(r.sizes(2), (2, 0, 0));
    }

    #[test]
    fn node_label_split_sizes() {
        let labels: BTreeMap<usize, usize> = (0..50).map(|i| (i, i % 3)).collect();
        let split = make_node_label_split(0, &labels, SplitRatio::default(), 1).unwrap();
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (30, 10, 10));
        assert_eq!(split.classes, 3);
        let small: BTreeMap<usize, usize> = (0..5).map(|i| (i, 0)).collect();
        let split = make_node_label_split(0, &small, SplitRatio::default(), 1).unwrap();
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (3, 1, 1));
        assert!(matches!(
            make_node_label_split(0, &BTreeMap::new(), SplitRatio::default(), 1),
            Err(HinError::EmptyLabels)
        ));
    }

    #[test]
    fn id_map_assigns_in_file_order() {
        let mut ids = IdMap::default();
        assert_eq!(ids.intern("u42"), 0);
        assert_eq!(ids.intern("u7"), 1);
        assert_eq!(ids.intern("u42"), 0);
        assert_eq!(ids.raw_id(1), Some("u7"));
        assert_eq!(ids.to_sidecar(), "0\tu42\n1\tu7\n");
    }
}
