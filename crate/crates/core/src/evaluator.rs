//! Deterministic fitness: commuting-matrix scores for link ranking and
//! score-weighted voting for node classification.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hin::{HinGraph, NodeLabelSplit, RecommendationSplit, SplitTag};
use crate::metastructure::{MetaPath, MetaStructure};
use crate::metrics::{self, MetricError};
use crate::sparse::{MatrixError, SparseMatrix};

/// Largest intermediate product, in nonzeros, before scoring gives up.
pub const DEFAULT_NONZERO_BUDGET: usize = 20_000_000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("structure connects node types {found:?} but the task needs {expected:?}")]
    TypeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("split {0} is empty")]
    EmptySplit(SplitTag),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "AUC")]
    Auc,
    #[serde(rename = "MacroF1")]
    MacroF1,
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricKind::Auc => "AUC",
            MetricKind::MacroF1 => "MacroF1",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub metric: MetricKind,
    pub value: f64,
    pub split: SplitTag,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// A fitness function over meta-structures for one fixed task.
pub trait Evaluator: Send + Sync {
    fn metric(&self) -> MetricKind;

    /// Node types a structure must start and end at.
    fn endpoint_types(&self) -> (usize, usize);

    fn evaluate(&self, ms: &MetaStructure, split: SplitTag) -> Result<EvalResult, EvalError>;

    fn check_types(&self, ms: &MetaStructure) -> Result<(), EvalError> {
        let expected = self.endpoint_types();
        let found = (ms.source_type(), ms.target_type());
        if expected != found {
            return Err(EvalError::TypeMismatch { expected, found });
        }
        Ok(())
    }
}

/// Commuting-matrix rows for `path`, restricted to the given source rows
/// (all rows when `rows` is `None`).
pub fn path_commuting_rows(
    graph: &HinGraph,
    path: &MetaPath,
    rows: Option<&[usize]>,
    budget: usize,
) -> Result<SparseMatrix, EvalError> {
    let first = path.first();
    let mut acc = match rows {
        Some(r) => SparseMatrix::identity(graph.node_count(first)).select_rows(r),
        None => SparseMatrix::identity(graph.node_count(first)),
    };
    for &e in &path.edge_types {
        acc = acc.matmul(graph.adjacency(e), budget)?;
    }
    Ok(acc)
}

/// Left-to-right product of the adjacency matrices along `path`; entry
/// `(s, t)` counts path instances from `s` to `t`.
pub fn path_commuting_matrix(graph: &HinGraph, path: &MetaPath, budget: usize) -> Result<SparseMatrix, EvalError> {
    path_commuting_rows(graph, path, None, budget)
}

/// Elementwise product of the row-normalized commuting matrices of every
/// decomposed path: a pair scores above zero iff each path connects it.
pub fn structure_score_rows(
    graph: &HinGraph,
    ms: &MetaStructure,
    rows: Option<&[usize]>,
    budget: usize,
) -> Result<SparseMatrix, EvalError> {
    let mut score: Option<SparseMatrix> = None;
    for path in ms.enumerate_paths() {
        let m = path_commuting_rows(graph, &path, rows, budget)?.row_normalized();
        score = Some(match score {
            None => m,
            Some(s) => s.hadamard(&m)?,
        });
    }
    score.ok_or_else(|| EvalError::Other("structure has no source-target path".into()))
}

pub fn structure_score_matrix(graph: &HinGraph, ms: &MetaStructure, budget: usize) -> Result<SparseMatrix, EvalError> {
    structure_score_rows(graph, ms, None, budget)
}

fn distinct_rows(pairs: impl Iterator<Item = usize>) -> (Vec<usize>, HashMap<usize, usize>) {
    let rows: Vec<usize> = pairs.collect::<BTreeSet<_>>().into_iter().collect();
    let index = rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    (rows, index)
}

pub fn evaluate_recommendation(
    graph: &HinGraph,
    ms: &MetaStructure,
    split: &RecommendationSplit,
    tag: SplitTag,
    budget: usize,
) -> Result<EvalResult, EvalError> {
    let started = Instant::now();
    let relation = graph.schema().edge_type(split.relation);
    let expected = (relation.src, relation.dst);
    let found = (ms.source_type(), ms.target_type());
    if expected != found {
        return Err(EvalError::TypeMismatch { expected, found });
    }
    let pos = split.positives.get(tag);
    let neg = split.negatives.get(tag);
    if pos.is_empty() || neg.is_empty() {
        return Err(EvalError::EmptySplit(tag));
    }
    let (rows, index) = distinct_rows(pos.iter().chain(neg).map(|p| p.0));
    let scores = structure_score_rows(graph, ms, Some(&rows), budget)?;
    let lookup = |&(s, t): &(usize, usize)| scores.get(index[&s], t);
    let pos_scores: Vec<f64> = pos.iter().map(lookup).collect();
    let neg_scores: Vec<f64> = neg.iter().map(lookup).collect();
    Ok(EvalResult {
        metric: MetricKind::Auc,
        value: metrics::auc(&pos_scores, &neg_scores)?,
        split: tag,
        wall_time: started.elapsed(),
    })
}

/// Predicted class per node of `tag`: the class with the largest summed
/// score over training nodes in the node's score row, ties to the smaller
/// class id, and the majority training class for an all-zero row.
pub fn predict_node_classes(
    graph: &HinGraph,
    ms: &MetaStructure,
    split: &NodeLabelSplit,
    tag: SplitTag,
    budget: usize,
) -> Result<Vec<usize>, EvalError> {
    let nodes = split.indices(tag);
    let scores = structure_score_rows(graph, ms, Some(nodes), budget)?;
    let train_class: HashMap<usize, usize> = split.train.iter().map(|&n| (n, split.labels[&n])).collect();

    let mut train_counts = vec![0usize; split.classes];
    for &c in train_class.values() {
        train_counts[c] += 1;
    }
    let majority = argmax(train_counts.iter().map(|&c| c as f64));

    Ok((0..nodes.len())
        .map(|i| {
            let mut votes = vec![0.0f64; split.classes];
            for (j, s) in scores.row(i) {
                if let Some(&c) = train_class.get(&j) {
                    votes[c] += s;
                }
            }
            if votes.iter().all(|&v| v == 0.0) {
                majority
            } else {
                argmax(votes.iter().copied())
            }
        })
        .collect())
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

pub fn evaluate_node_classification(
    graph: &HinGraph,
    ms: &MetaStructure,
    split: &NodeLabelSplit,
    tag: SplitTag,
    budget: usize,
) -> Result<EvalResult, EvalError> {
    let started = Instant::now();
    let expected = (split.node_type, split.node_type);
    let found = (ms.source_type(), ms.target_type());
    if expected != found {
        return Err(EvalError::TypeMismatch { expected, found });
    }
    let nodes = split.indices(tag);
    if nodes.is_empty() {
        return Err(EvalError::EmptySplit(tag));
    }
    let pred = predict_node_classes(graph, ms, split, tag, budget)?;
    let gold: Vec<usize> = nodes.iter().map(|n| split.labels[n]).collect();
    Ok(EvalResult {
        metric: MetricKind::MacroF1,
        value: metrics::macro_f1(&pred, &gold, split.classes)?,
        split: tag,
        wall_time: started.elapsed(),
    })
}

pub struct RecommendationEvaluator {
    graph: Arc<HinGraph>,
    split: RecommendationSplit,
    budget: usize,
}

impl RecommendationEvaluator {
    /// `graph` should be the construction graph returned with the split.
    pub fn new(graph: Arc<HinGraph>, split: RecommendationSplit) -> Self {
        Self {
            graph,
            split,
            budget: DEFAULT_NONZERO_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn graph(&self) -> &HinGraph {
        &self.graph
    }

    pub fn split(&self) -> &RecommendationSplit {
        &self.split
    }
}

impl Evaluator for RecommendationEvaluator {
    fn metric(&self) -> MetricKind {
        MetricKind::Auc
    }

    fn endpoint_types(&self) -> (usize, usize) {
        let e = self.graph.schema().edge_type(self.split.relation);
        (e.src, e.dst)
    }

    fn evaluate(&self, ms: &MetaStructure, split: SplitTag) -> Result<EvalResult, EvalError> {
        evaluate_recommendation(&self.graph, ms, &self.split, split, self.budget)
    }
}

pub struct NodeClassificationEvaluator {
    graph: Arc<HinGraph>,
    split: NodeLabelSplit,
    budget: usize,
}

impl NodeClassificationEvaluator {
    pub fn new(graph: Arc<HinGraph>, split: NodeLabelSplit) -> Self {
        Self {
            graph,
            split,
            budget: DEFAULT_NONZERO_BUDGET,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }
}

impl Evaluator for NodeClassificationEvaluator {
    fn metric(&self) -> MetricKind {
        MetricKind::MacroF1
    }

    fn endpoint_types(&self) -> (usize, usize) {
        (self.split.node_type, self.split.node_type)
    }

    fn evaluate(&self, ms: &MetaStructure, split: SplitTag) -> Result<EvalResult, EvalError> {
        evaluate_node_classification(&self.graph, ms, &self.split, split, self.budget)
    }
}
