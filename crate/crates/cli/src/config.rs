//! Run configuration file and the objects built from it.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use hinsearch::agents::{
    make_stub_backend, AgentConfig, Agents, ChatBackend, LiveBackend, LiveConfig, PromptTemplates,
};
use hinsearch::evaluator::{NodeClassificationEvaluator, RecommendationEvaluator};
use hinsearch::evolution::SearchConfig;
use hinsearch::hin::{
    binarize_ratings_with, load_graph, load_schema, make_node_label_split, make_recommendation_split, read_labels,
    read_ratings, SplitRatio, ThresholdRule, DEFAULT_RATING_THRESHOLD,
};
use hinsearch::{Evaluator, Schema};
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Directory with `node_counts.tsv` and one edge list per relation.
    pub dataset: PathBuf,
    /// Defaults to `<dataset>/schema.json`.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    pub task: TaskConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub backend: BackendConfig,
    /// Directory of prompt templates; built-in prompts when absent.
    #[serde(default)]
    pub prompts: Option<PathBuf>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Recommendation {
        /// Name of the target relation, e.g. `rates`.
        relation: String,
        /// `user<TAB>item<TAB>rating` lines.
        ratings: PathBuf,
        #[serde(default = "default_threshold")]
        threshold: u32,
        #[serde(default)]
        rule: ThresholdRule,
    },
    Classification {
        node_type: String,
        /// `node<TAB>class` lines.
        labels: PathBuf,
    },
}

fn default_threshold() -> u32 {
    DEFAULT_RATING_THRESHOLD
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratio: SplitRatio,
    pub seed: u64,
    pub min_per_split: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratio: SplitRatio::default(),
            seed: 0,
            min_per_split: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Stub {
        #[serde(default)]
        seed: u64,
    },
    Live(LiveConfig),
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Stub { seed: 0 }
    }
}

impl RunConfig {
    /// Reads `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(Failure::data)?;
        let mut config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("invalid config {}", path.display()))
            .map_err(Failure::usage)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.dataset);
        config.schema.as_mut().map(resolve);
        config.prompts.as_mut().map(resolve);
        config.out.as_mut().map(resolve);
        match &mut config.task {
            TaskConfig::Recommendation { ratings, .. } => resolve(ratings),
            TaskConfig::Classification { labels, .. } => resolve(labels),
        }
        Ok(config)
    }

    pub fn schema_path(&self) -> PathBuf {
        self.schema.clone().unwrap_or_else(|| self.dataset.join("schema.json"))
    }

    /// Fails with a data error naming the first referenced path that does not exist.
    pub fn check_paths(&self) -> Result<(), Failure> {
        let mut paths = vec![self.dataset.clone(), self.schema_path()];
        match &self.task {
            TaskConfig::Recommendation { ratings, .. } => paths.push(ratings.clone()),
            TaskConfig::Classification { labels, .. } => paths.push(labels.clone()),
        }
        paths.extend(self.prompts.clone());
        match paths.into_iter().find(|p| !p.exists()) {
            Some(p) => Err(Failure::data(anyhow::anyhow!("path does not exist: {}", p.display()))),
            None => Ok(()),
        }
    }

    pub fn load_schema(&self) -> Result<Schema, Failure> {
        load_schema(self.schema_path()).map_err(|e| Failure::data(e.into()))
    }

    pub fn build_task(&self, schema: &Schema) -> Result<Task, Failure> {
        self.check_paths()?;
        let data = |e: hinsearch::hin::HinError| Failure::data(e.into());
        let graph = load_graph(schema, &self.dataset).map_err(data)?;
        match &self.task {
            TaskConfig::Recommendation {
                relation,
                ratings,
                threshold,
                rule,
            } => {
                let rel = schema.edge_type_by_name(relation).map_err(data)?;
                let labeled = binarize_ratings_with(&read_ratings(ratings).map_err(data)?, *threshold, *rule);
                let (construction, split) = make_recommendation_split(
                    &graph,
                    rel,
                    &labeled,
                    self.split.ratio,
                    self.split.seed,
                    self.split.min_per_split,
                )
                .map_err(data)?;
                let e = schema.edge_type(rel);
                let (src, dst) = (&schema.node_type(e.src).noun, &schema.node_type(e.dst).noun);
                Ok(Task {
                    description: format!(
                        "recommendation: rank {src}-{dst} pairs by how likely the {src} {} the {dst}",
                        e.verb
                    ),
                    evaluator: Box::new(RecommendationEvaluator::new(Arc::new(construction), split)),
                })
            }
            TaskConfig::Classification { node_type, labels } => {
                let t = schema.node_type_by_name(node_type).map_err(data)?;
                let labels = read_labels(labels).map_err(data)?;
                let split = make_node_label_split(t, &labels, self.split.ratio, self.split.seed).map_err(data)?;
                Ok(Task {
                    description: format!(
                        "node classification: predict the class of each {} from the classes of nodes it connects to",
                        schema.node_type(t).noun
                    ),
                    evaluator: Box::new(NodeClassificationEvaluator::new(Arc::new(graph), split)),
                })
            }
        }
    }

    pub fn backend(&self) -> Arc<dyn ChatBackend> {
        match &self.backend {
            BackendConfig::Stub { seed } => Arc::new(make_stub_backend(*seed)),
            BackendConfig::Live(live) => Arc::new(LiveBackend::new(live.clone())),
        }
    }

    pub fn agents(&self, backend: Arc<dyn ChatBackend>, task: &str) -> Result<Agents, Failure> {
        let templates = match &self.prompts {
            Some(dir) => PromptTemplates::load_dir(dir).map_err(|e| Failure::data(e.into()))?,
            None => PromptTemplates::default(),
        };
        let config = AgentConfig {
            task: task.to_string(),
            ..AgentConfig::default()
        };
        Ok(Agents::new(backend, templates, config))
    }
}

pub struct Task {
    pub description: String,
    pub evaluator: Box<dyn Evaluator>,
}
