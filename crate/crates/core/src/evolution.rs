//! Evolutionary search: evaluate, eliminate the weakest, refill by
//! fitness-proportional duplication, and mutate every individual into the
//! neighbor the agents pick.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::format::StructureView;
use crate::agents::{
    AgentError, Agents, ExplainerReport, PerformancePoolSample, PoolRecord, PredictorOutput, SelectorDecision,
    DEFAULT_EXPLAINER_NEIGHBORS,
};
use crate::evaluator::{EvalError, EvalResult, Evaluator, MetricKind};
use crate::grammar::{encode_metastructure, GrammarError};
use crate::hin::{Schema, SplitTag};
use crate::metastructure::{seed_population, CanonicalKey, MetaStructure, StructureError, DEFAULT_MAX_NODES};
use crate::mutations::{
    build_component_library, one_step_neighbors, Candidate, ComponentLibrary, ComponentLimits, DEFAULT_CANDIDATE_CAP,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub generations: usize,
    pub population: usize,
    pub elimination_rate: f64,
    pub candidate_cap: usize,
    pub pool_sample: usize,
    pub seed: u64,
    pub max_nodes: usize,
    pub limits: ComponentLimits,
    /// Distinct top structures explained after the search; 0 disables.
    pub explain_top_k: usize,
    pub explainer_neighbors: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            generations: 30,
            population: 5,
            elimination_rate: 0.2,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            pool_sample: 30,
            seed: 0,
            max_nodes: DEFAULT_MAX_NODES,
            limits: ComponentLimits::default(),
            explain_top_k: 3,
            explainer_neighbors: DEFAULT_EXPLAINER_NEIGHBORS,
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Seeds(#[from] StructureError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("agent failure: {0}")]
    Agent(#[from] AgentError),
    #[error("evaluation failed in generation {generation}: {source}")]
    Evaluation {
        generation: usize,
        source: EvalError,
        partial: Box<SearchResult>,
    },
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if !(self.elimination_rate > 0.0 && self.elimination_rate < 1.0) {
            return bad("elimination rate must lie strictly between 0 and 1");
        }
        if self.candidate_cap == 0 || self.pool_sample == 0 {
            return bad("candidate cap and pool sample size must be at least 1");
        }
        if self.max_nodes < 2 {
            return bad("structures need room for at least 2 nodes");
        }
        if self.explain_top_k > 0 && self.explainer_neighbors == 0 {
            return bad("the explainer needs at least one neighbor");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub structure: MetaStructure,
    pub key: CanonicalKey,
    /// Validation metric; `None` until evaluated.
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(structure: MetaStructure) -> Self {
        let key = structure.canonical_key();
        Self {
            structure,
            key,
            fitness: None,
        }
    }

    fn fitness_or_zero(&self) -> f64 {
        self.fitness.unwrap_or(0.0).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub key: CanonicalKey,
    pub structure: MetaStructure,
    pub sentence: String,
    pub fitness: f64,
    /// Generation in which the structure was first evaluated.
    pub generation: usize,
}

/// Fitness of every structure evaluated so far, one entry per canonical key.
#[derive(Debug, Clone, Default)]
pub struct PerformancePool {
    entries: BTreeMap<CanonicalKey, PoolEntry>,
    evaluator_calls: usize,
}

impl PerformancePool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pool pre-filled with earlier results; they count as no calls.
    pub fn from_entries(entries: impl IntoIterator<Item = PoolEntry>) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.key.clone(), e)).collect(),
            evaluator_calls: 0,
        }
    }

    pub fn get(&self, key: &CanonicalKey) -> Option<&PoolEntry> {
        self.entries.get(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in canonical-key order.
    pub fn entries(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries.values()
    }

    pub fn evaluator_calls(&self) -> usize {
        self.evaluator_calls
    }

    /// Keeps the first value recorded for a key.
    fn insert(&mut self, entry: PoolEntry) -> &PoolEntry {
        self.entries.entry(entry.key.clone()).or_insert(entry)
    }

    /// Entries from best to worst: higher fitness, then fewer edges, then
    /// smaller key.
    pub fn ranked(&self) -> Vec<&PoolEntry> {
        let mut all: Vec<&PoolEntry> = self.entries.values().collect();
        all.sort_by(|a, b| {
            b.fitness
                .total_cmp(&a.fitness)
                .then(a.structure.edge_count().cmp(&b.structure.edge_count()))
                .then_with(|| a.key.cmp(&b.key))
        });
        all
    }

    pub fn best(&self) -> Option<&PoolEntry> {
        self.ranked().into_iter().next()
    }

    /// Up to `size` records drawn without replacement, in key order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, size: usize, schema: &Schema) -> PerformancePoolSample {
        let all: Vec<&PoolEntry> = self.entries.values().collect();
        let picked: Vec<&PoolEntry> = if all.len() <= size {
            all
        } else {
            let mut idx = index::sample(rng, all.len(), size).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| all[i]).collect()
        };
        PerformancePoolSample {
            records: picked
                .into_iter()
                .map(|e| PoolRecord {
                    view: StructureView::new(&e.structure, e.sentence.clone(), schema),
                    value: e.fitness,
                })
                .collect(),
        }
    }

    /// Cached fitness for each structure, calling the evaluator (in
    /// parallel) only for keys not yet pooled. Returns whether each answer
    /// came from the cache.
    pub fn evaluate_all(
        &mut self,
        structures: &[&MetaStructure],
        evaluator: &dyn Evaluator,
        schema: &Schema,
        generation: usize,
    ) -> Result<Vec<(f64, bool)>, EvalError> {
        let keys: Vec<CanonicalKey> = structures.iter().map(|s| s.canonical_key()).collect();
        let mut misses: Vec<(CanonicalKey, &MetaStructure)> = Vec::new();
        for (k, s) in keys.iter().zip(structures) {
            if !self.entries.contains_key(k) && !misses.iter().any(|(m, _)| m == k) {
                misses.push((k.clone(), s));
            }
        }
        let results: Vec<Result<EvalResult, EvalError>> = misses
            .par_iter()
            .map(|(_, s)| evaluator.evaluate(s, SplitTag::Val))
            .collect();
        self.evaluator_calls += misses.len();
        for ((key, s), r) in misses.iter().zip(results) {
            let value = r?.value;
            let sentence = encode_metastructure(s, schema).map_err(|e| EvalError::Other(e.to_string()))?;
            self.insert(PoolEntry {
                key: key.clone(),
                structure: (*s).clone(),
                sentence,
                fitness: value,
                generation,
            });
        }
        Ok(keys
            .iter()
            .map(|k| {
                let fresh = misses.iter().any(|(m, _)| m == k);
                (self.entries[k].fitness, !fresh)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Evaluation {
        key: CanonicalKey,
        fitness: f64,
        cached: bool,
    },
    Elimination {
        key: CanonicalKey,
        fitness: f64,
    },
    Reproduction {
        parent: usize,
        key: CanonicalKey,
    },
    Mutation {
        from: CanonicalKey,
        to: CanonicalKey,
        operation: String,
        candidates: usize,
        sampled: bool,
        predicted: f64,
        confidence: f64,
        fallback: bool,
    },
    MutationSkipped {
        key: CanonicalKey,
        reason: String,
    },
    FinalTest {
        key: CanonicalKey,
        value: f64,
    },
    Explanation {
        key: CanonicalKey,
        neighbors: usize,
    },
    ExplanationSkipped {
        key: CanonicalKey,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub generation: usize,
    /// Position of the search rng's keystream when the event was logged.
    pub rng: String,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    pub best_key: CanonicalKey,
    pub best_sentence: String,
    pub best_structure: MetaStructure,
    /// Best fitness in this generation's population.
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Best fitness over all structures evaluated so far.
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub config: SearchConfig,
    pub metric: MetricKind,
    pub backend: String,
    pub generations: Vec<GenerationSummary>,
    pub final_population: Vec<Individual>,
    /// Best pooled structure by validation fitness.
    pub best: Option<PoolEntry>,
    /// The best structure's test-split value, computed once.
    pub test_value: Option<f64>,
    pub evaluator_calls: usize,
    pub pool: Vec<PoolEntry>,
    pub explanations: Vec<ExplainerReport>,
    #[serde(skip)]
    pub events: Vec<EventRecord>,
}

/// Individuals removed per generation: `floor(n * rate)`, at least one,
/// never the whole population.
pub fn elimination_count(n: usize, rate: f64) -> usize {
    let k = (n as f64 * rate + 1e-9).floor() as usize;
    k.max(1).min(n.saturating_sub(1))
}

/// Splits off the weakest individuals. Among equal fitness the larger
/// structure goes first, then the larger canonical key. Survivors keep
/// their order.
pub fn eliminate(population: Vec<Individual>, rate: f64) -> (Vec<Individual>, Vec<Individual>) {
    let k = elimination_count(population.len(), rate);
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&population[a], &population[b]);
        x.fitness_or_zero()
            .total_cmp(&y.fitness_or_zero())
            .then(y.structure.edge_count().cmp(&x.structure.edge_count()))
            .then_with(|| y.key.cmp(&x.key))
            .then(b.cmp(&a))
    });
    let doomed: Vec<usize> = order[..k].to_vec();
    let mut survivors = Vec::new();
    let mut eliminated = Vec::new();
    for (i, ind) in population.into_iter().enumerate() {
        if doomed.contains(&i) {
            eliminated.push(ind);
        } else {
            survivors.push(ind);
        }
    }
    (survivors, eliminated)
}

/// Draw probabilities proportional to fitness, uniform when all are zero.
pub fn reproduction_probabilities(fitness: &[f64]) -> Vec<f64> {
    let clean: Vec<f64> = fitness.iter().map(|f| f.max(0.0)).collect();
    let total: f64 = clean.iter().sum();
    if total > 0.0 {
        clean.iter().map(|f| f / total).collect()
    } else {
        vec![1.0 / fitness.len() as f64; fitness.len()]
    }
}

/// `count` i.i.d. parent indices drawn with [`reproduction_probabilities`].
pub fn draw_parents<R: Rng + ?Sized>(fitness: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let probs = reproduction_probabilities(fitness);
    let dist = WeightedIndex::new(&probs).expect("probabilities are finite and positive");
    (0..count).map(|_| dist.sample(rng)).collect()
}

/// Keeps every survivor and appends proportional duplicates up to `n`.
/// Returns the population and the parent index of each duplicate.
pub fn reproduce<R: Rng + ?Sized>(survivors: &[Individual], n: usize, rng: &mut R) -> (Vec<Individual>, Vec<usize>) {
    assert!(!survivors.is_empty(), "reproduction needs survivors");
    let fitness: Vec<f64> = survivors.iter().map(Individual::fitness_or_zero).collect();
    let parents = draw_parents(&fitness, n.saturating_sub(survivors.len()), rng);
    let mut population = survivors.to_vec();
    population.extend(parents.iter().map(|&p| survivors[p].clone()));
    (population, parents)
}

/// What the agents decided for one individual.
#[derive(Debug, Clone)]
pub struct MutationChoice {
    pub candidate: Candidate,
    pub candidates: usize,
    pub sampled: bool,
    pub prediction: PredictorOutput,
    pub decision: SelectorDecision,
}

fn consult_agents(
    agents: &Agents,
    candidates: &[Candidate],
    views: &[StructureView],
    sample: &PerformancePoolSample,
) -> Result<(usize, PredictorOutput, SelectorDecision), AgentError> {
    let predictions = agents.predict_candidates(views, sample)?;
    let decision = agents.select_candidate(views, &predictions)?;
    debug_assert!(decision.index < candidates.len());
    Ok((decision.index, predictions[decision.index], decision))
}

struct Search<'a> {
    config: &'a SearchConfig,
    schema: &'a Schema,
    evaluator: &'a dyn Evaluator,
    agents: &'a Agents,
    lib: ComponentLibrary,
    rng: ChaCha8Rng,
    pool: PerformancePool,
    events: Vec<EventRecord>,
    generations: Vec<GenerationSummary>,
}

impl<'a> Search<'a> {
    fn log(&mut self, generation: usize, event: Event) {
        self.events.push(EventRecord {
            generation,
            rng: format!("{:x}", self.rng.get_word_pos()),
            event,
        });
    }

    fn evaluate(&mut self, population: &mut [Individual], generation: usize) -> Result<(), EvalError> {
        let structures: Vec<&MetaStructure> = population.iter().map(|i| &i.structure).collect();
        let results = self
            .pool
            .evaluate_all(&structures, self.evaluator, self.schema, generation)?;
        for (ind, (fitness, cached)) in population.iter_mut().zip(results) {
            ind.fitness = Some(fitness);
            let key = ind.key.clone();
            self.log(generation, Event::Evaluation { key, fitness, cached });
        }
        Ok(())
    }

    fn summarize(&mut self, population: &[Individual], generation: usize) {
        let best = population
            .iter()
            .min_by(|a, b| {
                b.fitness_or_zero()
                    .total_cmp(&a.fitness_or_zero())
                    .then(a.structure.edge_count().cmp(&b.structure.edge_count()))
                    .then_with(|| a.key.cmp(&b.key))
            })
            .expect("nonempty population");
        let mean = population.iter().map(Individual::fitness_or_zero).sum::<f64>() / population.len() as f64;
        let entry = self.pool.get(&best.key).expect("evaluated individuals are pooled");
        self.generations.push(GenerationSummary {
            generation,
            best_key: best.key.clone(),
            best_sentence: entry.sentence.clone(),
            best_structure: best.structure.clone(),
            best_fitness: best.fitness_or_zero(),
            mean_fitness: mean,
            best_so_far: self.pool.best().map_or(0.0, |e| e.fitness),
        });
    }

    fn mutate(&mut self, population: Vec<Individual>, generation: usize) -> Vec<Individual> {
        // neighbor sampling and pool sampling consume the rng in population
        // order; the agent calls themselves are independent
        let mut jobs = Vec::with_capacity(population.len());
        for ind in &population {
            let set = match one_step_neighbors(
                &ind.structure,
                &self.lib,
                self.schema,
                &mut self.rng,
                self.config.candidate_cap,
            ) {
                Ok(set) => set,
                Err(e) => {
                    jobs.push(Err(e.to_string()));
                    continue;
                }
            };
            let sample = self.pool.sample(&mut self.rng, self.config.pool_sample, self.schema);
            let views: Result<Vec<StructureView>, GrammarError> = set
                .candidates
                .iter()
                .map(|c| {
                    encode_metastructure(&c.structure, self.schema)
                        .map(|s| StructureView::new(&c.structure, s, self.schema))
                })
                .collect();
            match views {
                Ok(views) => jobs.push(Ok((set, views, sample))),
                Err(e) => jobs.push(Err(e.to_string())),
            }
        }

        let agents = self.agents;
        let outcomes: Vec<Result<MutationChoice, String>> = jobs
            .into_par_iter()
            .map(|job| {
                let (set, views, sample) = job?;
                let (i, prediction, decision) =
                    consult_agents(agents, &set.candidates, &views, &sample).map_err(|e| e.to_string())?;
                Ok(MutationChoice {
                    candidate: set.candidates[i].clone(),
                    candidates: set.candidates.len(),
                    sampled: set.sampled,
                    prediction,
                    decision,
                })
            })
            .collect();

        let mut next = Vec::with_capacity(population.len());
        for (ind, outcome) in population.into_iter().zip(outcomes) {
            match outcome {
                Ok(choice) => {
                    self.log(
                        generation,
                        Event::Mutation {
                            from: ind.key.clone(),
                            to: choice.candidate.key.clone(),
                            operation: choice.candidate.operation.name().to_string(),
                            candidates: choice.candidates,
                            sampled: choice.sampled,
                            predicted: choice.prediction.p,
                            confidence: choice.prediction.c,
                            fallback: choice.decision.fallback,
                        },
                    );
                    next.push(Individual::new(choice.candidate.structure));
                }
                Err(reason) => {
                    log::warn!("generation {generation}: individual {} unchanged: {reason}", ind.key);
                    self.log(
                        generation,
                        Event::MutationSkipped {
                            key: ind.key.clone(),
                            reason,
                        },
                    );
                    next.push(ind);
                }
            }
        }
        next
    }

    fn result(&self, population: Vec<Individual>) -> SearchResult {
        SearchResult {
            config: self.config.clone(),
            metric: self.evaluator.metric(),
            backend: self.agents.backend().identity(),
            generations: self.generations.clone(),
            final_population: population,
            best: self.pool.best().cloned(),
            test_value: None,
            evaluator_calls: self.pool.evaluator_calls(),
            pool: self.pool.entries().cloned().collect(),
            explanations: Vec::new(),
            events: self.events.clone(),
        }
    }

    fn fail(&self, population: Vec<Individual>, generation: usize, source: EvalError) -> SearchError {
        SearchError::Evaluation {
            generation,
            source,
            partial: Box::new(self.result(population)),
        }
    }
}

/// Runs the search from `seeds`, or from the shortest schema meta-paths
/// between the evaluator's endpoint types when `seeds` is `None`.
pub fn run_search(
    config: &SearchConfig,
    schema: &Schema,
    evaluator: &dyn Evaluator,
    agents: &Agents,
    seeds: Option<Vec<MetaStructure>>,
) -> Result<SearchResult, SearchError> {
    config.validate()?;
    let (src, tgt) = evaluator.endpoint_types();
    let seeds = match seeds {
        Some(s) if s.len() == config.population => s,
        Some(s) => {
            return Err(SearchError::Config(format!(
                "{} seed structures given for a population of {}",
                s.len(),
                config.population
            )))
        }
        None => seed_population(schema, src, tgt, config.population, config.max_nodes)?,
    };
    let mut search = Search {
        config,
        schema,
        evaluator,
        agents,
        lib: build_component_library(
            schema,
            ComponentLimits {
                max_structure_nodes: config.max_nodes,
                ..config.limits
            },
        ),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        pool: PerformancePool::new(),
        events: Vec::new(),
        generations: Vec::new(),
    };

    let mut population: Vec<Individual> = seeds.into_iter().map(Individual::new).collect();
    if let Err(e) = search.evaluate(&mut population, 0) {
        return Err(search.fail(population, 0, e));
    }
    search.summarize(&population, 0);

    for generation in 1..=config.generations {
        let (survivors, eliminated) = eliminate(population, config.elimination_rate);
        for ind in eliminated {
            let fitness = ind.fitness_or_zero();
            search.log(generation, Event::Elimination { key: ind.key, fitness });
        }
        let (refilled, parents) = reproduce(&survivors, config.population, &mut search.rng);
        for &parent in &parents {
            let key = survivors[parent].key.clone();
            search.log(generation, Event::Reproduction { parent, key });
        }
        population = search.mutate(refilled, generation);
        if let Err(e) = search.evaluate(&mut population, generation) {
            return Err(search.fail(population, generation, e));
        }
        search.summarize(&population, generation);
        log::info!(
            "generation {generation}: best {:.4}, mean {:.4}, pool {}",
            search.generations.last().map_or(0.0, |g| g.best_fitness),
            search.generations.last().map_or(0.0, |g| g.mean_fitness),
            search.pool.len()
        );
    }

    let last = config.generations;
    let best = search.pool.best().cloned().expect("seeds were evaluated");
    let test_value = match evaluator.evaluate(&best.structure, SplitTag::Test) {
        Ok(r) => r.value,
        Err(e) => return Err(search.fail(population, last, e)),
    };
    search.log(
        last,
        Event::FinalTest {
            key: best.key.clone(),
            value: test_value,
        },
    );

    let top: Vec<MetaStructure> = search
        .pool
        .ranked()
        .into_iter()
        .take(config.explain_top_k)
        .map(|e| e.structure.clone())
        .collect();
    let mut explanations = Vec::new();
    for ms in &top {
        match explain_one(&mut search, ms, last) {
            Ok(Some(report)) => explanations.push(report),
            Ok(None) => {}
            Err(ExplainFailure::Eval(e)) => return Err(search.fail(population, last, e)),
            Err(ExplainFailure::Agent(e)) => {
                let key = ms.canonical_key();
                log::warn!("explainer failed for {key}: {e}");
                search.log(
                    last,
                    Event::ExplanationSkipped {
                        key,
                        reason: e.to_string(),
                    },
                );
            }
        }
    }

    let mut result = search.result(population);
    result.test_value = Some(test_value);
    result.explanations = explanations;
    Ok(result)
}

enum ExplainFailure {
    Eval(EvalError),
    Agent(AgentError),
}

fn explain_one(search: &mut Search<'_>, ms: &MetaStructure, generation: usize) -> Result<Option<ExplainerReport>, ExplainFailure> {
    let key = ms.canonical_key();
    let set = match one_step_neighbors(
        ms,
        &search.lib,
        search.schema,
        &mut search.rng,
        search.config.explainer_neighbors,
    ) {
        Ok(set) => set,
        Err(e) => {
            search.log(
                generation,
                Event::ExplanationSkipped {
                    key,
                    reason: e.to_string(),
                },
            );
            return Ok(None);
        }
    };
    let neighbors: Vec<MetaStructure> = set.candidates.into_iter().map(|c| c.structure).collect();
    let report = explain_with_pool(
        search.agents,
        search.schema,
        search.evaluator,
        &mut search.pool,
        ms,
        &neighbors,
        generation,
    )?;
    search.log(
        generation,
        Event::Explanation {
            key,
            neighbors: neighbors.len(),
        },
    );
    Ok(Some(report))
}

fn explain_with_pool(
    agents: &Agents,
    schema: &Schema,
    evaluator: &dyn Evaluator,
    pool: &mut PerformancePool,
    ms: &MetaStructure,
    neighbors: &[MetaStructure],
    generation: usize,
) -> Result<ExplainerReport, ExplainFailure> {
    let structures: Vec<&MetaStructure> = std::iter::once(ms).chain(neighbors).collect();
    let values = pool
        .evaluate_all(&structures, evaluator, schema, generation)
        .map_err(ExplainFailure::Eval)?;
    let evals: Vec<EvalResult> = values
        .into_iter()
        .map(|(value, _)| EvalResult {
            metric: evaluator.metric(),
            value,
            split: SplitTag::Val,
            wall_time: Default::default(),
        })
        .collect();
    agents
        .explain(schema, ms, neighbors, &evals)
        .map_err(ExplainFailure::Agent)
}

/// Re-runs the explainer on the `k` best distinct structures of an earlier
/// result, reusing its pooled fitness values.
pub fn explain_result(
    result: &SearchResult,
    k: usize,
    schema: &Schema,
    evaluator: &dyn Evaluator,
    agents: &Agents,
) -> Result<Vec<ExplainerReport>, SearchError> {
    let config = &result.config;
    let lib = build_component_library(
        schema,
        ComponentLimits {
            max_structure_nodes: config.max_nodes,
            ..config.limits
        },
    );
    let mut pool = PerformancePool::from_entries(result.pool.iter().cloned());
    let top: Vec<MetaStructure> = pool.ranked().into_iter().take(k).map(|e| e.structure.clone()).collect();
    if top.len() < k {
        log::warn!("asked for {k} structures but the result holds only {} distinct ones", top.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut reports = Vec::new();
    for ms in &top {
        let Ok(set) = one_step_neighbors(ms, &lib, schema, &mut rng, config.explainer_neighbors) else {
            log::warn!("{} has no neighbors to contrast; skipped", ms.canonical_key());
            continue;
        };
        let neighbors: Vec<MetaStructure> = set.candidates.into_iter().map(|c| c.structure).collect();
        match explain_with_pool(agents, schema, evaluator, &mut pool, ms, &neighbors, config.generations) {
            Ok(r) => reports.push(r),
            Err(ExplainFailure::Eval(source)) => {
                return Err(SearchError::Evaluation {
                    generation: config.generations,
                    source,
                    partial: Box::new(result.clone()),
                })
            }
            Err(ExplainFailure::Agent(e)) => return Err(SearchError::Agent(e)),
        }
    }
    Ok(reports)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> std::io::Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn curve_csv(result: &SearchResult) -> String {
    let mut out = String::from("generation,best_fitness,mean_fitness\n");
    for g in &result.generations {
        out.push_str(&format!("{},{},{}\n", g.generation, g.best_so_far, g.mean_fitness));
    }
    out
}

pub fn events_jsonl(events: &[EventRecord]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
        .collect()
}

/// Writes `result.json`, `events.jsonl`, `curve.csv` and
/// `explanations.json` into `dir`.
pub fn write_outputs(dir: impl AsRef<Path>, result: &SearchResult) -> std::io::Result<()> {
    let dir = dir.as_ref();
    let json = serde_json::to_string_pretty(result).expect("result serializes");
    write_atomic(dir.join("result.json"), (json + "\n").as_bytes())?;
    write_atomic(dir.join("events.jsonl"), events_jsonl(&result.events).as_bytes())?;
    write_atomic(dir.join("curve.csv"), curve_csv(result).as_bytes())?;
    let explanations = serde_json::to_string_pretty(&result.explanations).expect("reports serialize");
    write_atomic(dir.join("explanations.json"), (explanations + "\n").as_bytes())
}
