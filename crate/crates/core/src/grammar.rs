//! Natural-language encoding of meta-structures.
//!
//! Each decomposed meta-path becomes a sub-logic: the first noun, then one
//! clause per edge (`verb Noun`), clauses after the first opened by `THAT`.
//! Sub-logics are joined with `AND`. Interior nodes shared by more than one
//! sub-logic carry a `#k` marker so the sentence determines the structure.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hin::Schema;
use crate::metastructure::{canonical_form, MetaPath, MetaStructure};

pub const THAT: &str = "THAT";
pub const AND: &str = "AND";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("edge type {0} has no verb phrase")]
    MissingVerb(String),
    #[error("node type {0} has no noun phrase")]
    MissingNoun(String),
    #[error("meta-path is not valid under the schema")]
    InvalidPath,
}

/// Sentence encoding one meta-path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubLogic {
    pub text: String,
    pub path: MetaPath,
}

fn noun(schema: &Schema, t: usize) -> Result<&str, GrammarError> {
    let nt = schema.node_type(t);
    let noun = nt.noun.trim();
    if noun.is_empty() {
        return Err(GrammarError::MissingNoun(nt.name.clone()));
    }
    Ok(noun)
}

fn verb(schema: &Schema, e: usize) -> Result<&str, GrammarError> {
    let et = schema.edge_type(e);
    let verb = et.verb.trim();
    if verb.is_empty() {
        return Err(GrammarError::MissingVerb(et.name.clone()));
    }
    Ok(verb)
}

fn render(
    path: &MetaPath,
    markers: &[Option<usize>],
    schema: &Schema,
) -> Result<String, GrammarError> {
    let mut words = Vec::with_capacity(path.node_types.len() * 3);
    let named = |i: usize| -> Result<String, GrammarError> {
        let n = noun(schema, path.node_types[i])?;
        Ok(match markers.get(i).copied().flatten() {
            Some(k) => format!("{n}#{k}"),
            None => n.to_string(),
        })
    };
    words.push(named(0)?);
    for (i, &e) in path.edge_types.iter().enumerate() {
        if i > 0 {
            words.push(THAT.to_string());
        }
        words.push(verb(schema, e)?.to_string());
        words.push(named(i + 1)?);
    }
    Ok(words.join(" "))
}

pub fn encode_path(path: &MetaPath, schema: &Schema) -> Result<SubLogic, GrammarError> {
    if !path.is_valid(schema) {
        return Err(GrammarError::InvalidPath);
    }
    Ok(SubLogic {
        text: render(path, &[], schema)?,
        path: path.clone(),
    })
}

/// Sub-logics of a structure in sentence order: by the path's type
/// sequence, then by canonical positions.
pub fn sub_logics(ms: &MetaStructure, schema: &Schema) -> Result<Vec<SubLogic>, GrammarError> {
    let canon = ms.relabeled(&canonical_form(ms).order);
    let paths = canon.position_paths();

    let mut usage: HashMap<usize, usize> = HashMap::new();
    for p in &paths {
        for &pos in &p.positions {
            *usage.entry(pos).or_default() += 1;
        }
    }
    let mut shared: Vec<usize> = usage
        .iter()
        .filter(|&(&pos, &count)| count > 1 && pos != canon.source && pos != canon.target)
        .map(|(&pos, _)| pos)
        .collect();
    shared.sort_unstable();
    let marker: HashMap<usize, usize> = shared.iter().enumerate().map(|(k, &pos)| (pos, k + 1)).collect();

    let mut ordered: Vec<_> = paths
        .iter()
        .map(|p| {
            let mp = p.to_meta_path(&canon);
            (mp.type_sequence(), p.positions.clone(), mp)
        })
        .collect();
    ordered.sort();
    ordered
        .into_iter()
        .map(|(_, positions, mp)| {
            let markers: Vec<Option<usize>> = positions.iter().map(|p| marker.get(p).copied()).collect();
            Ok(SubLogic {
                text: render(&mp, &markers, schema)?,
                path: mp,
            })
        })
        .collect()
}

pub fn encode_metastructure(ms: &MetaStructure, schema: &Schema) -> Result<String, GrammarError> {
    let parts: Vec<String> = sub_logics(ms, schema)?.into_iter().map(|s| s.text).collect();
    Ok(parts.join(&format!(" {AND} ")))
}

/// Whole-word occurrences of `token` in `sentence`.
pub fn count_token(sentence: &str, token: &str) -> usize {
    sentence.split_whitespace().filter(|w| *w == token).count()
}
