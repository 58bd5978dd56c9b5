//! Line-oriented data blocks embedded in prompts, and parsers for the
//! line-oriented answers the agents ask for.
//!
//! Data lines look like `KIND i: field=value | field=value | ...`; the
//! `sentence` field is always last and quoted.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::hin::Schema;
use crate::metastructure::MetaStructure;

/// Prompt-facing description of one structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureView {
    pub sentence: String,
    /// `src-edge-dst` tokens over type names, sorted, with repeats.
    pub edges: Vec<String>,
    pub nodes: usize,
    pub key: String,
}

impl StructureView {
    pub fn new(ms: &MetaStructure, sentence: String, schema: &Schema) -> Self {
        Self {
            sentence,
            edges: edge_tokens(ms, schema),
            nodes: ms.node_count(),
            key: ms.canonical_key().0,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

pub fn edge_tokens(ms: &MetaStructure, schema: &Schema) -> Vec<String> {
    let mut tokens: Vec<String> = ms
        .typed_edges()
        .into_iter()
        .map(|(s, e, d)| {
            format!(
                "{}-{}-{}",
                schema.node_type(s).name,
                schema.edge_type(e).name,
                schema.node_type(d).name
            )
        })
        .collect();
    tokens.sort();
    tokens
}

fn edge_list(edges: &[String]) -> String {
    format!("[{}]", edges.join(", "))
}

pub fn record_line(i: usize, view: &StructureView, value: f64) -> String {
    format!(
        "RECORD {i}: value={value:.4} | nodes={} | edges={} | sentence=\"{}\"",
        view.nodes,
        edge_list(&view.edges),
        view.sentence
    )
}

pub fn predictor_candidate_line(i: usize, view: &StructureView) -> String {
    format!(
        "CANDIDATE {i}: nodes={} | edges={} | sentence=\"{}\"",
        view.nodes,
        edge_list(&view.edges),
        view.sentence
    )
}

pub fn selector_candidate_line(i: usize, view: &StructureView, p: f64, c: f64) -> String {
    format!(
        "CANDIDATE {i}: p={p:.4} | c={c:.4} | nodes={} | edge_count={} | key={} | edges={} | sentence=\"{}\"",
        view.nodes,
        view.edge_count(),
        view.key,
        edge_list(&view.edges),
        view.sentence
    )
}

pub fn structure_line(i: usize, role: &str, view: &StructureView) -> String {
    format!(
        "STRUCTURE {i}: role={role} | nodes={} | edges={} | sentence=\"{}\"",
        view.nodes,
        edge_list(&view.edges),
        view.sentence
    )
}

pub fn metric_line(i: usize, metric: &str, value: f64, view: &StructureView) -> String {
    format!(
        "STRUCTURE {i}: metric={metric} | value={value:.4} | edges={}",
        edge_list(&view.edges)
    )
}

/// A data line split back into its index and fields.
#[derive(Debug, Clone, PartialEq)]
pub struct DataLine {
    pub kind: String,
    pub index: usize,
    pub fields: BTreeMap<String, String>,
}

impl DataLine {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.fields.get(name).map(String::as_str)
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        self.get(name)?.parse().ok()
    }

    pub fn edges(&self) -> Vec<String> {
        parse_edge_list(self.get("edges").unwrap_or(""))
    }
}

static DATA_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(RECORD|CANDIDATE|STRUCTURE) (\d+): (.*)$").expect("valid regex"));

pub fn parse_edge_list(text: &str) -> Vec<String> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(", ")
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn parse_data_line(line: &str) -> Option<DataLine> {
    let caps = DATA_LINE.captures(line.trim_end())?;
    let mut fields = BTreeMap::new();
    let body = &caps[3];
    // the sentence is last and may hold anything but a newline
    let (head, sentence) = match body.find("sentence=\"") {
        Some(at) => (&body[..at], Some(body[at + 10..].trim_end_matches('"'))),
        None => (body, None),
    };
    for part in head.split(" | ") {
        if let Some((k, v)) = part.split_once('=') {
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    if let Some(s) = sentence {
        fields.insert("sentence".into(), s.to_string());
    }
    Some(DataLine {
        kind: caps[1].to_string(),
        index: caps[2].parse().ok()?,
        fields,
    })
}

pub fn data_lines<'a>(text: &'a str, kind: &'a str) -> impl Iterator<Item = DataLine> + 'a {
    text.lines()
        .filter_map(parse_data_line)
        .filter(move |l| l.kind == kind)
}

static PREDICTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)CANDIDATE\s*(\d+)\s*:\s*p\s*=\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?\d+)?)\s*,\s*c\s*=\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?\d+)?)")
        .expect("valid regex")
});

/// Every `CANDIDATE i: p=…, c=…` answer line; later lines win.
pub fn parse_predictions(text: &str) -> BTreeMap<usize, (f64, f64)> {
    let mut out = BTreeMap::new();
    for caps in PREDICTION.captures_iter(text) {
        let (Ok(i), Ok(p), Ok(c)) = (caps[1].parse(), caps[2].parse(), caps[3].parse()) else {
            continue;
        };
        out.insert(i, (p, c));
    }
    out
}

static CHOICE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)CHOICE\s*:\s*(\d+)").expect("valid regex"));

/// The last `CHOICE: i` in the response.
pub fn parse_choice(text: &str) -> Option<usize> {
    CHOICE
        .captures_iter(text)
        .last()
        .and_then(|c| c[1].parse().ok())
}

/// Items after `BENEFICIAL:` and `DETRIMENTAL:` line prefixes.
pub fn parse_attribution(text: &str) -> (Vec<String>, Vec<String>) {
    let mut beneficial = Vec::new();
    let mut detrimental = Vec::new();
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['-', '*', ' ']);
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("BENEFICIAL:") {
            beneficial.push(line["BENEFICIAL:".len()..].trim().to_string());
        } else if upper.starts_with("DETRIMENTAL:") {
            detrimental.push(line["DETRIMENTAL:".len()..].trim().to_string());
        }
    }
    (beneficial, detrimental)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view() -> StructureView {
        StructureView {
            sentence: "User rates Business AND User is friend of User THAT rates Business".into(),
            edges: vec!["U-friend_of-U".into(), "U-rates-B".into(), "U-rates-B".into()],
            nodes: 3,
            key: "s0;t2;n0,0,1;e0-1:3,0-2:0,1-2:0".into(),
        }
    }

    #[test]
    fn data_lines_round_trip() {
        let v = view();
        let line = selector_candidate_line(7, &v, 0.25, 1.0);
        let parsed = parse_data_line(&line).unwrap();
        assert_eq!(parsed.kind, "CANDIDATE");
        assert_eq!(parsed.index, 7);
        assert_eq!(parsed.number("p"), Some(0.25));
        assert_eq!(parsed.get("key"), Some(v.key.as_str()));
        assert_eq!(parsed.get("sentence"), Some(v.sentence.as_str()));
        assert_eq!(parsed.edges(), v.edges);

        let rec = parse_data_line(&record_line(0, &v, 0.7)).unwrap();
        assert_eq!(rec.number("value"), Some(0.7));
        assert_eq!(rec.edges(), v.edges);
    }

    #[test]
    fn answers_parse_leniently() {
        let text = "```\nCANDIDATE 0: p=0.81, c=0.9\ncandidate 2 : P = 1e-1 , C=.5\nnonsense\n```";
        let got = parse_predictions(text);
        assert_eq!(got.get(&0), Some(&(0.81, 0.9)));
        assert_eq!(got.get(&2), Some(&(0.1, 0.5)));
        assert_eq!(got.len(), 2);

        assert_eq!(parse_choice("thinking...\nCHOICE: 3\nbecause"), Some(3));
        assert_eq!(parse_choice("no idea"), None);

        let (b, d) = parse_attribution("- BENEFICIAL: U-rates-B\nDETRIMENTAL: B-located_in-I\nother");
        assert_eq!(b, vec!["U-rates-B"]);
        assert_eq!(d, vec!["B-located_in-I"]);
    }
}
