//! Python bindings: schemas, structures, sentences, neighbors, task
//! evaluation and the stub-backed search.

use std::path::PathBuf;
use std::sync::Arc;

use hinsearch::agents::{make_stub_backend, AgentConfig, Agents, PromptTemplates};
use hinsearch::evaluator::{NodeClassificationEvaluator, RecommendationEvaluator};
use hinsearch::evolution::{run_search, write_outputs, SearchConfig};
use hinsearch::grammar::encode_metastructure;
use hinsearch::hin::{
    binarize_ratings, load_graph, load_schema, make_node_label_split, make_recommendation_split, read_labels,
    read_ratings, SplitRatio,
};
use hinsearch::mutations::{build_component_library, one_step_neighbors, ComponentLimits};
use hinsearch::synthetic::{generate_planted_toy, PlantedParams};
use hinsearch::{Evaluator, SplitTag};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Schema", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PySchema {
    inner: hinsearch::Schema,
}

#[pymethods]
impl PySchema {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        hinsearch::Schema::from_json(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        load_schema(path).map(|inner| Self { inner }).map_err(value_err)
    }

    #[getter]
    fn node_types(&self) -> Vec<String> {
        self.inner.node_types.iter().map(|t| t.name.clone()).collect()
    }

    #[getter]
    fn edge_types(&self) -> Vec<String> {
        self.inner.edge_types.iter().map(|t| t.name.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Schema({} node types, {} edge types)",
            self.inner.node_types.len(),
            self.inner.edge_types.len()
        )
    }
}

/// A rooted DAG over schema types; edges are `(from, to, edge_type)`.
#[pyclass(name = "MetaStructure", frozen, eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyMetaStructure {
    inner: hinsearch::MetaStructure,
}

#[pymethods]
impl PyMetaStructure {
    #[new]
    fn new(nodes: Vec<usize>, edges: Vec<(usize, usize, usize)>, source: usize, target: usize) -> Self {
        Self {
            inner: hinsearch::MetaStructure {
                nodes,
                edges,
                source,
                target,
            },
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        hinsearch::MetaStructure::from_json(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn nodes(&self) -> Vec<usize> {
        self.inner.nodes.clone()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, usize)> {
        self.inner.edges.clone()
    }

    #[getter]
    fn source(&self) -> usize {
        self.inner.source
    }

    #[getter]
    fn target(&self) -> usize {
        self.inner.target
    }

    fn canonical_key(&self) -> String {
        self.inner.canonical_key().0
    }

    /// Violations as messages; empty when valid.
    fn violations(&self, schema: &PySchema) -> Vec<String> {
        self.inner.validate(&schema.inner).iter().map(ToString::to_string).collect()
    }

    fn is_valid(&self, schema: &PySchema) -> bool {
        self.inner.is_valid(&schema.inner)
    }

    fn sentence(&self, schema: &PySchema) -> PyResult<String> {
        encode_metastructure(&self.inner, &schema.inner).map_err(value_err)
    }

    /// Source-to-target meta-paths as type-name labels.
    fn paths(&self, schema: &PySchema) -> PyResult<Vec<String>> {
        self.inner.ensure_valid(&schema.inner).map_err(value_err)?;
        Ok(self
            .inner
            .enumerate_paths()
            .iter()
            .map(|p| p.label(&schema.inner))
            .collect())
    }

    /// One-step neighbors as `(operation, key, structure)`, uniformly
    /// subsampled to `cap` when given.
    #[pyo3(signature = (schema, cap=None, seed=0, max_nodes=10))]
    fn neighbors(
        &self,
        schema: &PySchema,
        cap: Option<usize>,
        seed: u64,
        max_nodes: usize,
    ) -> PyResult<Vec<(String, String, PyMetaStructure)>> {
        self.inner.ensure_valid(&schema.inner).map_err(value_err)?;
        let lib = build_component_library(
            &schema.inner,
            ComponentLimits {
                max_structure_nodes: max_nodes,
                ..ComponentLimits::default()
            },
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(
            match one_step_neighbors(&self.inner, &lib, &schema.inner, &mut rng, cap.unwrap_or(usize::MAX)) {
                Ok(set) => set
                    .candidates
                    .into_iter()
                    .map(|c| (c.operation.name().to_string(), c.key.0, Self { inner: c.structure }))
                    .collect(),
                Err(_) => Vec::new(),
            },
        )
    }

    fn __repr__(&self) -> String {
        format!("MetaStructure({})", self.inner.to_json())
    }

    fn __hash__(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.inner.canonical_key().0.hash(&mut h);
        h.finish()
    }
}

/// A dataset, a split and the evaluator scoring structures on it.
#[pyclass(name = "Task", frozen)]
pub struct PyTask {
    schema: hinsearch::Schema,
    evaluator: Arc<dyn Evaluator>,
    description: String,
}

#[pymethods]
impl PyTask {
    /// Link prediction over `relation`; ratings above `threshold` count as positive.
    #[staticmethod]
    #[pyo3(signature = (dataset, relation, ratings, threshold=2, split_seed=0, schema=None))]
    fn recommendation(
        dataset: PathBuf,
        relation: &str,
        ratings: PathBuf,
        threshold: u32,
        split_seed: u64,
        schema: Option<PathBuf>,
    ) -> PyResult<Self> {
        let schema = load_schema(schema.unwrap_or_else(|| dataset.join("schema.json"))).map_err(value_err)?;
        let graph = load_graph(&schema, &dataset).map_err(value_err)?;
        let rel = schema.edge_type_by_name(relation).map_err(value_err)?;
        let labeled = binarize_ratings(&read_ratings(ratings).map_err(value_err)?, threshold);
        let (construction, split) =
            make_recommendation_split(&graph, rel, &labeled, SplitRatio::default(), split_seed, 1).map_err(value_err)?;
        let e = schema.edge_type(rel);
        let description = format!(
            "recommendation: rank {src}-{dst} pairs by how likely the {src} {} the {dst}",
            e.verb,
            src = schema.node_type(e.src).noun,
            dst = schema.node_type(e.dst).noun
        );
        Ok(Self {
            evaluator: Arc::new(RecommendationEvaluator::new(Arc::new(construction), split)),
            schema,
            description,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (dataset, node_type, labels, split_seed=0, schema=None))]
    fn classification(
        dataset: PathBuf,
        node_type: &str,
        labels: PathBuf,
        split_seed: u64,
        schema: Option<PathBuf>,
    ) -> PyResult<Self> {
        let schema = load_schema(schema.unwrap_or_else(|| dataset.join("schema.json"))).map_err(value_err)?;
        let graph = load_graph(&schema, &dataset).map_err(value_err)?;
        let t = schema.node_type_by_name(node_type).map_err(value_err)?;
        let labels = read_labels(labels).map_err(value_err)?;
        let split = make_node_label_split(t, &labels, SplitRatio::default(), split_seed).map_err(value_err)?;
        let description = format!(
            "node classification: predict the class of each {} from the classes of nodes it connects to",
            schema.node_type(t).noun
        );
        Ok(Self {
            evaluator: Arc::new(NodeClassificationEvaluator::new(Arc::new(graph), split)),
            schema,
            description,
        })
    }

    #[getter]
    fn schema(&self) -> PySchema {
        PySchema {
            inner: self.schema.clone(),
        }
    }

    #[getter]
    fn metric(&self) -> String {
        self.evaluator.metric().to_string()
    }

    #[pyo3(signature = (structure, split="val"))]
    fn evaluate(&self, py: Python<'_>, structure: &PyMetaStructure, split: &str) -> PyResult<f64> {
        let tag: SplitTag = split.parse().map_err(PyValueError::new_err)?;
        let ms = structure.inner.clone();
        let evaluator = self.evaluator.clone();
        py.detach(move || evaluator.evaluate(&ms, tag))
            .map(|r| r.value)
            .map_err(value_err)
    }

    /// Evolutionary search with the deterministic stub agents.
    #[pyo3(signature = (generations=30, population=5, seed=0, elimination_rate=0.2, explain_top_k=3))]
    fn search(
        &self,
        py: Python<'_>,
        generations: usize,
        population: usize,
        seed: u64,
        elimination_rate: f64,
        explain_top_k: usize,
    ) -> PyResult<PySearchResult> {
        let config = SearchConfig {
            generations,
            population,
            seed,
            elimination_rate,
            explain_top_k,
            ..SearchConfig::default()
        };
        let agents = Agents::new(
            Arc::new(make_stub_backend(0)),
            PromptTemplates::default(),
            AgentConfig {
                task: self.description.clone(),
                ..AgentConfig::default()
            },
        );
        let evaluator = self.evaluator.clone();
        let schema = &self.schema;
        py.detach(|| run_search(&config, schema, evaluator.as_ref(), &agents, None))
            .map(|inner| PySearchResult { inner })
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pyclass(name = "SearchResult", frozen)]
pub struct PySearchResult {
    inner: hinsearch::evolution::SearchResult,
}

#[pymethods]
impl PySearchResult {
    #[getter]
    fn best(&self) -> Option<PyMetaStructure> {
        self.inner.best.as_ref().map(|b| PyMetaStructure {
            inner: b.structure.clone(),
        })
    }

    #[getter]
    fn best_sentence(&self) -> Option<String> {
        self.inner.best.as_ref().map(|b| b.sentence.clone())
    }

    #[getter]
    fn best_fitness(&self) -> Option<f64> {
        self.inner.best.as_ref().map(|b| b.fitness)
    }

    #[getter]
    fn test_value(&self) -> Option<f64> {
        self.inner.test_value
    }

    #[getter]
    fn evaluator_calls(&self) -> usize {
        self.inner.evaluator_calls
    }

    /// `(generation, best_so_far, mean_fitness)` per generation.
    #[getter]
    fn curve(&self) -> Vec<(usize, f64, f64)> {
        self.inner
            .generations
            .iter()
            .map(|g| (g.generation, g.best_so_far, g.mean_fitness))
            .collect()
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.inner).expect("result serializes")
    }

    /// Writes result, events, curve and explanation files into `dir`.
    fn write(&self, dir: PathBuf) -> PyResult<()> {
        std::fs::create_dir_all(&dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
        write_outputs(&dir, &self.inner).map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

/// Writes the planted-structure dataset into `dir` and returns the planted structure.
#[pyfunction]
#[pyo3(signature = (dir, seed=0))]
fn write_planted_dataset(dir: PathBuf, seed: u64) -> PyResult<PyMetaStructure> {
    let toy = generate_planted_toy(PlantedParams::default(), seed);
    toy.write_dataset(&dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(PyMetaStructure { inner: toy.planted })
}

#[pymodule]
#[pyo3(name = "hinsearch")]
fn hinsearch_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchema>()?;
    m.add_class::<PyMetaStructure>()?;
    m.add_class::<PyTask>()?;
    m.add_class::<PySearchResult>()?;
    m.add_function(wrap_pyfunction!(write_planted_dataset, m)?)?;
    Ok(())
}
