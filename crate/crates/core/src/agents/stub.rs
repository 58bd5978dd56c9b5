//! Deterministic offline backend that answers the agent prompts by rule.

use std::collections::BTreeMap;

use super::backend::{BackendError, ChatBackend, DecodingParams};
use super::format::{data_lines, DataLine};

/// Jaccard similarity of two multisets: shared count over union count.
/// Two empty sets are identical.
pub fn multiset_jaccard(a: &[String], b: &[String]) -> f64 {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for x in a {
        counts.entry(x).or_default().0 += 1;
    }
    for x in b {
        counts.entry(x).or_default().1 += 1;
    }
    let (inter, union) = counts
        .values()
        .fold((0, 0), |(i, u), &(ca, cb)| (i + ca.min(cb), u + ca.max(cb)));
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Tokens of `a` not matched in `b`, respecting multiplicity.
fn multiset_minus(a: &[String], b: &[String]) -> Vec<String> {
    let mut rest = b.to_vec();
    let mut out = Vec::new();
    for x in a {
        if let Some(pos) = rest.iter().position(|y| y == x) {
            rest.swap_remove(pos);
        } else {
            out.push(x.clone());
        }
    }
    out
}

pub const STUB_PRIOR: (f64, f64) = (0.5, 0.0);

#[derive(Debug, Clone)]
pub struct StubBackend {
    seed: u64,
}

pub fn make_stub_backend(seed: u64) -> StubBackend {
    StubBackend { seed }
}

impl StubBackend {
    fn predict(&self, candidates: &[DataLine], records: &[DataLine]) -> String {
        let pool: Vec<(Vec<String>, f64)> = records
            .iter()
            .filter_map(|r| Some((r.edges(), r.number("value")?)))
            .collect();
        let mut lines = vec!["```".to_string()];
        for cand in candidates {
            let edges = cand.edges();
            let (p, c) = pool
                .iter()
                .map(|(rec, value)| (multiset_jaccard(&edges, rec), *value))
                // most similar, then higher value; first record wins exact ties
                .fold(None, |best: Option<(f64, f64)>, (sim, value)| match best {
                    Some((bs, bv)) if bs > sim || (bs == sim && bv >= value) => best,
                    _ => Some((sim, value)),
                })
                .map_or(STUB_PRIOR, |(sim, value)| (value, sim));
            lines.push(format!("CANDIDATE {}: p={p}, c={c}", cand.index));
        }
        lines.push("```".into());
        lines.join("\n")
    }

    fn select(&self, candidates: &[DataLine]) -> String {
        let best = candidates
            .iter()
            .min_by(|a, b| {
                let pa = a.number("p").unwrap_or(0.0);
                let pb = b.number("p").unwrap_or(0.0);
                pb.total_cmp(&pa)
                    .then_with(|| {
                        let ea = a.number("edge_count").unwrap_or(f64::MAX);
                        let eb = b.number("edge_count").unwrap_or(f64::MAX);
                        ea.total_cmp(&eb)
                    })
                    .then_with(|| a.get("key").unwrap_or("").cmp(b.get("key").unwrap_or("")))
                    .then_with(|| a.index.cmp(&b.index))
            })
            .expect("nonempty candidate list");
        format!(
            "Candidate {} has the highest expected performance (p={}, c={}) with {} edges.\nCHOICE: {}",
            best.index,
            best.get("p").unwrap_or("?"),
            best.get("c").unwrap_or("?"),
            best.get("edge_count").unwrap_or("?"),
            best.index
        )
    }

    fn comprehend(&self, structures: &[DataLine]) -> String {
        let mut out = Vec::new();
        for s in structures {
            let sentence = s.get("sentence").unwrap_or("");
            out.push(format!(
                "Structure {} ({}) decomposes into:",
                s.index,
                s.get("role").unwrap_or("structure")
            ));
            for part in sentence.split(" AND ") {
                out.push(format!("  - path: {part}"));
            }
        }
        out.join("\n")
    }

    fn attribute(&self, metrics: &[DataLine]) -> String {
        let Some(analyzed) = metrics.iter().find(|m| m.index == 0).or(metrics.first()) else {
            return "No structures to compare.".into();
        };
        let base_value = analyzed.number("value").unwrap_or(0.0);
        let base_edges = analyzed.edges();
        let neighbors: Vec<&DataLine> = metrics.iter().filter(|m| m.index != analyzed.index).collect();
        let value = |m: &DataLine| m.number("value").unwrap_or(0.0);

        let mut out = vec![format!("Structure {} scores {base_value:.4}.", analyzed.index)];
        let best = neighbors
            .iter()
            .copied()
            .reduce(|a, b| if value(b) > value(a) { b } else { a });
        if let Some(best) = best {
            out.push(format!(
                "The highest-scoring neighbor is structure {} at {:.4}.",
                best.index,
                value(best)
            ));
            for edge in multiset_minus(&best.edges(), &base_edges) {
                out.push(format!("BENEFICIAL: {edge}"));
            }
        }
        let worst = neighbors
            .iter()
            .copied()
            .reduce(|a, b| if value(b) < value(a) { b } else { a });
        if let Some(worst) = worst.filter(|w| value(w) < base_value) {
            out.push(format!(
                "The lowest-scoring neighbor is structure {} at {:.4}.",
                worst.index,
                value(worst)
            ));
            for edge in multiset_minus(&worst.edges(), &base_edges) {
                out.push(format!("DETRIMENTAL: {edge}"));
            }
        }
        out.join("\n")
    }
}

impl ChatBackend for StubBackend {
    fn complete(&self, _system: &str, user: &str, _params: &DecodingParams) -> Result<String, BackendError> {
        let metrics: Vec<DataLine> = data_lines(user, "STRUCTURE").filter(|l| l.get("metric").is_some()).collect();
        if !metrics.is_empty() {
            return Ok(self.attribute(&metrics));
        }
        let structures: Vec<DataLine> = data_lines(user, "STRUCTURE").collect();
        if !structures.is_empty() {
            return Ok(self.comprehend(&structures));
        }
        let candidates: Vec<DataLine> = data_lines(user, "CANDIDATE").collect();
        if candidates.is_empty() {
            return Err(BackendError::Format("stub backend found no data lines in the prompt".into()));
        }
        if candidates.iter().all(|c| c.get("p").is_some()) {
            Ok(self.select(&candidates))
        } else {
            let records: Vec<DataLine> = data_lines(user, "RECORD").collect();
            Ok(self.predict(&candidates, &records))
        }
    }

    fn identity(&self) -> String {
        format!("stub-{}", self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn jaccard_on_multisets() {
        let a = tokens(&["x", "x", "y"]);
        assert_eq!(multiset_jaccard(&a, &a), 1.0);
        assert_eq!(multiset_jaccard(&a, &tokens(&["x"])), 1.0 / 3.0);
        assert_eq!(multiset_jaccard(&tokens(&["x", "y"]), &tokens(&["x", "z"])), 1.0 / 3.0);
        assert_eq!(multiset_jaccard(&[], &[]), 1.0);
        assert_eq!(multiset_jaccard(&a, &[]), 0.0);
    }

    #[test]
    fn multiset_difference() {
        let d = multiset_minus(&tokens(&["a", "a", "b"]), &tokens(&["a", "c"]));
        assert_eq!(d, tokens(&["a", "b"]));
    }

    #[test]
    fn unknown_prompt_is_a_format_error() {
        let stub = make_stub_backend(0);
        assert!(matches!(
            stub.complete("", "hello", &DecodingParams::default()),
            Err(BackendError::Format(_))
        ));
    }
}
