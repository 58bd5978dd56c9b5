//! Language-model agents: a few-shot performance predictor, a candidate
//! selector, and a two-step differential explainer.

pub mod backend;
pub mod format;
pub mod live;
pub mod prompts;
pub mod stub;

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{EvalResult, MetricKind};
use crate::grammar::{encode_metastructure, GrammarError};
use crate::hin::Schema;
use crate::metastructure::MetaStructure;

pub use backend::{
    complete_with_retry, BackendError, ChatBackend, DecodingParams, RecordingBackend, ReplayBackend, RetryPolicy,
    TranscriptEntry,
};
pub use format::StructureView;
pub use live::{LiveBackend, LiveConfig};
pub use prompts::{PromptError, PromptTemplates};
pub use stub::{make_stub_backend, StubBackend, STUB_PRIOR};

/// Default number of neighbors contrasted by the explainer.
pub const DEFAULT_EXPLAINER_NEIGHBORS: usize = 4;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("no candidates to {0}")]
    NoCandidates(&'static str),
    #[error("explainer needs at least one neighbor")]
    NoNeighbors,
    #[error("explainer got {evals} evaluations for {structures} structures")]
    EvalCountMismatch { structures: usize, evals: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub decoding: DecodingParams,
    pub retry: RetryPolicy,
    /// Extra attempts when a response parses incompletely.
    pub format_retries: u32,
    /// One predictor call per candidate instead of one per candidate set.
    pub per_candidate: bool,
    /// Task description shown to every agent.
    pub task: String,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            decoding: DecodingParams::default(),
            retry: RetryPolicy::default(),
            format_retries: 3,
            per_candidate: false,
            task: "unspecified".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorOutput {
    pub p: f64,
    pub c: f64,
    /// True when no usable answer arrived and the default was used.
    pub defaulted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorDecision {
    pub index: usize,
    pub rationale: String,
    /// True when the response never named a valid index and the rule-based
    /// choice was used instead.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub view: StructureView,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerformancePoolSample {
    pub records: Vec<PoolRecord>,
}

impl PerformancePoolSample {
    pub fn mean(&self) -> Option<f64> {
        if self.records.is_empty() {
            None
        } else {
            Some(self.records.iter().map(|r| r.value).sum::<f64>() / self.records.len() as f64)
        }
    }
}

/// One structure as shown to the explainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedStructure {
    pub role: String,
    pub structure: MetaStructure,
    pub sentence: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerReport {
    pub metric: MetricKind,
    /// The analyzed structure first, then its neighbors.
    pub structures: Vec<ExplainedStructure>,
    pub comprehension: String,
    pub attribution: String,
    pub beneficial: Vec<String>,
    pub detrimental: Vec<String>,
}

fn clamp_unit(x: f64, what: &str) -> f64 {
    if (0.0..=1.0).contains(&x) {
        x
    } else {
        let clamped = x.clamp(0.0, 1.0);
        log::warn!("{what}={x} outside [0, 1]; clamped to {clamped}");
        clamped
    }
}

/// Agents sharing one backend and template set. Holds no mutable state.
#[derive(Clone)]
pub struct Agents {
    backend: Arc<dyn ChatBackend>,
    templates: PromptTemplates,
    config: AgentConfig,
}

impl Agents {
    pub fn new(backend: Arc<dyn ChatBackend>, templates: PromptTemplates, config: AgentConfig) -> Self {
        Self {
            backend,
            templates,
            config,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn backend(&self) -> &dyn ChatBackend {
        self.backend.as_ref()
    }

    fn call(&self, system: &str, user: &str) -> Result<String, BackendError> {
        complete_with_retry(
            self.backend.as_ref(),
            system,
            user,
            &self.config.decoding,
            &self.config.retry,
        )
    }

    pub fn predictor_prompt(&self, items: &[(usize, &StructureView)], sample: &PerformancePoolSample) -> String {
        let records = if sample.records.is_empty() {
            "(none yet)".to_string()
        } else {
            sample
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| format::record_line(i, &r.view, r.value))
                .collect::<Vec<_>>()
                .join("\n")
        };
        let candidates = items
            .iter()
            .map(|(i, v)| format::predictor_candidate_line(*i, v))
            .collect::<Vec<_>>()
            .join("\n");
        prompts::render(
            &self.templates.predictor_user,
            &[
                ("task", &self.config.task),
                ("records", &records),
                ("candidates", &candidates),
            ],
        )
    }

    /// Asks about `items` until each has an answer or attempts run out.
    fn predict_group(
        &self,
        items: &[(usize, &StructureView)],
        sample: &PerformancePoolSample,
    ) -> Result<BTreeMap<usize, (f64, f64)>, AgentError> {
        let mut answers = BTreeMap::new();
        let mut pending: Vec<(usize, &StructureView)> = items.to_vec();
        for attempt in 0..=self.config.format_retries {
            if pending.is_empty() {
                break;
            }
            if attempt > 0 {
                log::warn!("predictor left {} candidates unanswered; asking again", pending.len());
            }
            let text = self.call(&self.templates.predictor_system, &self.predictor_prompt(&pending, sample))?;
            let parsed = format::parse_predictions(&text);
            pending.retain(|(i, _)| match parsed.get(i) {
                Some(&(p, c)) if p.is_finite() && c.is_finite() => {
                    answers.insert(*i, (clamp_unit(p, "p"), clamp_unit(c, "c")));
                    false
                }
                _ => true,
            });
        }
        Ok(answers)
    }

    /// One estimate per candidate, in order.
    pub fn predict_candidates(
        &self,
        candidates: &[StructureView],
        sample: &PerformancePoolSample,
    ) -> Result<Vec<PredictorOutput>, AgentError> {
        if candidates.is_empty() {
            return Err(AgentError::NoCandidates("predict"));
        }
        let items: Vec<(usize, &StructureView)> = candidates.iter().enumerate().collect();
        let answers = if self.config.per_candidate {
            let parts: Result<Vec<_>, AgentError> = items
                .par_iter()
                .map(|item| self.predict_group(std::slice::from_ref(item), sample))
                .collect();
            parts?.into_iter().flatten().collect()
        } else {
            self.predict_group(&items, sample)?
        };
        let fallback_p = sample.mean().unwrap_or(STUB_PRIOR.0);
        Ok((0..candidates.len())
            .map(|i| match answers.get(&i) {
                Some(&(p, c)) => PredictorOutput { p, c, defaulted: false },
                None => {
                    log::warn!("no usable prediction for candidate {i}; using ({fallback_p}, 0)");
                    PredictorOutput {
                        p: fallback_p,
                        c: 0.0,
                        defaulted: true,
                    }
                }
            })
            .collect())
    }

    pub fn selector_prompt(&self, candidates: &[StructureView], predictions: &[PredictorOutput]) -> String {
        let lines = candidates
            .iter()
            .zip(predictions)
            .enumerate()
            .map(|(i, (v, o))| format::selector_candidate_line(i, v, o.p, o.c))
            .collect::<Vec<_>>()
            .join("\n");
        prompts::render(
            &self.templates.selector_user,
            &[("task", &self.config.task), ("candidates", &lines)],
        )
    }

    pub fn select_candidate(
        &self,
        candidates: &[StructureView],
        predictions: &[PredictorOutput],
    ) -> Result<SelectorDecision, AgentError> {
        if candidates.is_empty() || candidates.len() != predictions.len() {
            return Err(AgentError::NoCandidates("select"));
        }
        let prompt = self.selector_prompt(candidates, predictions);
        let mut last = String::new();
        for attempt in 0..=self.config.format_retries {
            if attempt > 0 {
                log::warn!("selector answer had no valid CHOICE line; asking again");
            }
            last = self.call(&self.templates.selector_system, &prompt)?;
            if let Some(index) = format::parse_choice(&last).filter(|&i| i < candidates.len()) {
                return Ok(SelectorDecision {
                    index,
                    rationale: last,
                    fallback: false,
                });
            }
        }
        let index = rule_based_choice(candidates, predictions);
        log::warn!("selector never named a valid candidate; falling back to candidate {index}");
        Ok(SelectorDecision {
            index,
            rationale: last,
            fallback: true,
        })
    }

    /// Two chained prompts contrasting `ms` with its `neighbors`.
    /// `evals` holds the result for `ms` followed by one per neighbor.
    pub fn explain(
        &self,
        schema: &Schema,
        ms: &MetaStructure,
        neighbors: &[MetaStructure],
        evals: &[EvalResult],
    ) -> Result<ExplainerReport, AgentError> {
        if neighbors.is_empty() {
            return Err(AgentError::NoNeighbors);
        }
        if evals.len() != neighbors.len() + 1 {
            return Err(AgentError::EvalCountMismatch {
                structures: neighbors.len() + 1,
                evals: evals.len(),
            });
        }
        let metric = evals[0].metric;
        let mut structures = Vec::with_capacity(evals.len());
        let mut views = Vec::with_capacity(evals.len());
        for (i, (s, e)) in std::iter::once(ms).chain(neighbors).zip(evals).enumerate() {
            let sentence = encode_metastructure(s, schema)?;
            views.push(StructureView::new(s, sentence.clone(), schema));
            structures.push(ExplainedStructure {
                role: if i == 0 { "analyzed" } else { "neighbor" }.into(),
                structure: s.clone(),
                sentence,
                value: e.value,
            });
        }

        let structure_lines = structures
            .iter()
            .zip(&views)
            .enumerate()
            .map(|(i, (s, v))| format::structure_line(i, &s.role, v))
            .collect::<Vec<_>>()
            .join("\n");
        let step1 = prompts::render(
            &self.templates.explainer_step1,
            &[("task", &self.config.task), ("structures", &structure_lines)],
        );
        let comprehension = self.call(&self.templates.explainer_system, &step1)?;

        let metric_name = metric.to_string();
        let metric_lines = structures
            .iter()
            .zip(&views)
            .enumerate()
            .map(|(i, (s, v))| format::metric_line(i, &metric_name, s.value, v))
            .collect::<Vec<_>>()
            .join("\n");
        let step2 = format!(
            "{step1}\n\nYour structural analysis:\n{comprehension}\n\n{}",
            prompts::render(
                &self.templates.explainer_step2,
                &[("task", &self.config.task), ("metrics", &metric_lines)],
            )
        );
        let attribution = self.call(&self.templates.explainer_system, &step2)?;
        let (beneficial, detrimental) = format::parse_attribution(&attribution);
        Ok(ExplainerReport {
            metric,
            structures,
            comprehension,
            attribution,
            beneficial,
            detrimental,
        })
    }
}

/// Highest p, then fewest edges, then smallest canonical key.
pub fn rule_based_choice(candidates: &[StructureView], predictions: &[PredictorOutput]) -> usize {
    (0..candidates.len())
        .min_by(|&a, &b| {
            predictions[b]
                .p
                .total_cmp(&predictions[a].p)
                .then(candidates[a].edge_count().cmp(&candidates[b].edge_count()))
                .then_with(|| candidates[a].key.cmp(&candidates[b].key))
        })
        .expect("nonempty candidates")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// Returns canned answers in order, then repeats the last.
    struct Scripted {
        answers: Mutex<Vec<String>>,
        prompts: Mutex<Vec<String>>,
    }

    impl Scripted {
        fn new(answers: &[&str]) -> Arc<Self> {
            Arc::new(Self {
                answers: Mutex::new(answers.iter().rev().map(|s| s.to_string()).collect()),
                prompts: Mutex::new(Vec::new()),
            })
        }
    }

    impl ChatBackend for Scripted {
        fn complete(&self, _: &str, user: &str, _: &DecodingParams) -> Result<String, BackendError> {
            self.prompts.lock().unwrap().push(user.to_string());
            let mut a = self.answers.lock().unwrap();
            Ok(if a.len() > 1 { a.pop().unwrap() } else { a[0].clone() })
        }

        fn identity(&self) -> String {
            "scripted".into()
        }
    }

    fn view(sentence: &str, edges: &[&str], key: &str) -> StructureView {
        StructureView {
            sentence: sentence.into(),
            edges: edges.iter().map(|s| s.to_string()).collect(),
            nodes: edges.len() + 1,
            key: key.into(),
        }
    }

    fn agents(backend: Arc<dyn ChatBackend>) -> Agents {
        Agents::new(backend, PromptTemplates::default(), AgentConfig::default())
    }

    #[test]
    fn out_of_range_values_are_clamped() {
        let a = agents(Scripted::new(&["CANDIDATE 0: p=1.7, c=-0.2"]));
        let out = a.predict_candidates(&[view("x", &["e"], "k")], &Default::default()).unwrap();
        assert_eq!((out[0].p, out[0].c), (1.0, 0.0));
    }

    #[test]
    fn missing_answers_are_reasked_then_defaulted() {
        let backend = Scripted::new(&["CANDIDATE 0: p=0.9, c=0.9", "nothing useful"]);
        let a = agents(backend.clone());
        let sample = PerformancePoolSample {
            records: vec![
                PoolRecord {
                    view: view("r", &["e"], "k0"),
                    value: 0.2,
                },
                PoolRecord {
                    view: view("s", &["f"], "k1"),
                    value: 0.4,
                },
            ],
        };
        let out = a
            .predict_candidates(&[view("a", &["e"], "ka"), view("b", &["f"], "kb")], &sample)
            .unwrap();
        assert_eq!(out[0], PredictorOutput { p: 0.9, c: 0.9, defaulted: false });
        assert!(out[1].defaulted);
        assert!((out[1].p - 0.3).abs() < 1e-12);
        assert_eq!(out[1].c, 0.0);
        let prompts = backend.prompts.lock().unwrap();
        assert_eq!(prompts.len(), 4);
        // re-asks only mention the unanswered candidate
        assert!(!prompts[1].contains("CANDIDATE 0:"));
        assert!(prompts[1].contains("CANDIDATE 1:"));
    }

    #[test]
    fn unparseable_choice_falls_back_and_is_flagged() {
        let a = agents(Scripted::new(&["CHOICE: 9"]));
        let cands = [view("a", &["e", "e"], "b"), view("b", &["e"], "a")];
        let preds = [
            PredictorOutput { p: 0.5, c: 0.0, defaulted: false },
            PredictorOutput { p: 0.5, c: 0.0, defaulted: false },
        ];
        let d = a.select_candidate(&cands, &preds).unwrap();
        assert!(d.fallback);
        assert_eq!(d.index, 1);
    }

    #[test]
    fn choice_line_is_parsed_with_rationale() {
        let a = agents(Scripted::new(&["Second is simpler.\nCHOICE: 1"]));
        let cands = [view("a", &["e"], "a"), view("b", &["e"], "b")];
        let preds = [PredictorOutput { p: 0.9, c: 1.0, defaulted: false }; 2];
        let d = a.select_candidate(&cands, &preds).unwrap();
        assert_eq!(d.index, 1);
        assert!(!d.fallback);
        assert_eq!(d.rationale, "Second is simpler.\nCHOICE: 1");
    }

    #[test]
    fn selector_prompt_carries_all_factors() {
        let a = agents(Arc::new(make_stub_backend(0)));
        let cands = [view("User rates Business", &["U-rates-B"], "k")];
        let preds = [PredictorOutput { p: 0.61, c: 0.25, defaulted: false }];
        let prompt = a.selector_prompt(&cands, &preds);
        for needle in ["User rates Business", "nodes=2", "edge_count=1", "p=0.6100", "c=0.2500"] {
            assert!(prompt.contains(needle), "{needle} missing from prompt");
        }
    }
}
