mod common;

use std::collections::BTreeMap;

use common::*;
use hinsearch::evolution::{run_search, write_outputs, Event, SearchConfig, SearchError};
use hinsearch::metastructure::MetaStructure;
use hinsearch::synthetic::{planted_structure, HOSTS, LIVES_IN};
use hinsearch::{Evaluator, SplitTag};

fn short(generations: usize) -> SearchConfig {
    SearchConfig {
        generations,
        explain_top_k: 0,
        ..SearchConfig::default()
    }
}

#[test]
fn zero_generations_only_scores_the_seeds() {
    let task = planted_task();
    let counting = CountingEvaluator::new(&task.evaluator);
    let schema = task.toy.graph.schema();
    let result = run_search(&short(0), schema, &counting, &stub_agents(), None).unwrap();
    assert_eq!(result.generations.len(), 1);
    assert_eq!(result.final_population.len(), 5);
    assert!(result.final_population.iter().all(|i| i.fitness.is_some()));
    assert!(!result.events.iter().any(|e| matches!(e.event, Event::Mutation { .. })));
    assert_eq!(counting.calls.load(std::sync::atomic::Ordering::SeqCst), result.pool.len());
    assert!(result.test_value.is_some());
}

#[test]
fn pooled_fitness_is_never_recomputed() {
    let task = planted_task();
    let counting = CountingEvaluator::new(&task.evaluator);
    let schema = task.toy.graph.schema();
    let result = run_search(&short(6), schema, &counting, &stub_agents(), None).unwrap();
    assert!(counting.repeats().is_empty(), "rescored: {:?}", counting.repeats());
    assert_eq!(result.evaluator_calls, result.pool.len());
    let cached = result
        .events
        .iter()
        .filter(|e| matches!(e.event, Event::Evaluation { cached: true, .. }))
        .count();
    assert!(cached > 0);
}

#[test]
fn population_size_and_best_so_far_hold() {
    let task = planted_task();
    let schema = task.toy.graph.schema();
    let config = SearchConfig {
        seed: 11,
        ..short(8)
    };
    let result = run_search(&config, schema, &task.evaluator, &stub_agents(), None).unwrap();
    assert_eq!(result.generations.len(), 9);
    let mut by_gen: BTreeMap<usize, usize> = BTreeMap::new();
    for e in &result.events {
        if matches!(e.event, Event::Evaluation { .. }) {
            *by_gen.entry(e.generation).or_default() += 1;
        }
    }
    assert!(by_gen.values().all(|&n| n == config.population), "{by_gen:?}");
    assert_eq!(result.final_population.len(), config.population);
    for w in result.generations.windows(2) {
        assert!(w[1].best_so_far >= w[0].best_so_far);
    }
    let best = result.best.as_ref().unwrap();
    assert_eq!(best.fitness, result.generations.last().unwrap().best_so_far);
    assert!(result.pool.iter().all(|e| e.fitness <= best.fitness));
}

#[test]
fn planted_structure_is_recovered() {
    let task = planted_task();
    let schema = task.toy.graph.schema();
    let result = run_search(&short(10), schema, &task.evaluator, &stub_agents(), None).unwrap();
    let best = result.best.unwrap();
    assert!(best.fitness >= 0.95, "best {} at {}", best.key, best.fitness);
    assert_eq!(best.key, planted_structure().canonical_key());
}

#[test]
fn explicit_seeds_must_match_the_population() {
    let task = planted_task();
    let schema = task.toy.graph.schema();
    let arm = MetaStructure {
        nodes: vec![0, 3, 1],
        edges: vec![(0, 1, LIVES_IN), (1, 2, HOSTS)],
        source: 0,
        target: 2,
    };
    let err = run_search(&short(1), schema, &task.evaluator, &stub_agents(), Some(vec![arm.clone()])).unwrap_err();
    assert!(matches!(err, SearchError::Config(_)));
    let ok = run_search(&short(1), schema, &task.evaluator, &stub_agents(), Some(vec![arm; 5])).unwrap();
    assert_eq!(ok.generations[0].best_fitness, task.evaluator.evaluate(&ok.generations[0].best_structure, SplitTag::Val).unwrap().value);
}

#[test]
fn rejects_bad_configs() {
    let task = planted_task();
    let schema = task.toy.graph.schema();
    for config in [
        SearchConfig { population: 1, ..short(1) },
        SearchConfig { elimination_rate: 1.0, ..short(1) },
        SearchConfig { candidate_cap: 0, ..short(1) },
    ] {
        let err = run_search(&config, schema, &task.evaluator, &stub_agents(), None).unwrap_err();
        assert!(matches!(err, SearchError::Config(_)));
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let task = planted_task();
    let schema = task.toy.graph.schema();
    let config = SearchConfig {
        explain_top_k: 2,
        ..short(5)
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let result = run_search(&config, schema, &task.evaluator, &stub_agents(), None).unwrap();
        assert_eq!(result.explanations.len(), 2);
        write_outputs(d.path(), &result).unwrap();
    }
    for name in ["result.json", "events.jsonl", "curve.csv", "explanations.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty(), "{name} is empty");
        assert_eq!(a, b, "{name} differs");
    }
    let curve = std::fs::read_to_string(dirs[0].path().join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 6);
}
