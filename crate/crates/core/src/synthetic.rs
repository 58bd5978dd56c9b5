//! Synthetic user/business network with a planted ground-truth structure.
//!
//! A user likes a business exactly when the business sits in the user's city
//! and in one of the user's preferred categories. The planted structure is
//! the diamond `User lives in City hosts Business` AND
//! `User prefers Category includes Business`; it separates liked pairs from
//! the labeled dislikes perfectly, while each arm alone does not.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hin::{HinError, HinGraph, Schema};
use crate::metastructure::MetaStructure;

pub const PLANTED_SCHEMA_JSON: &str = r#"{
  "node_types": [
    {"id": 0, "name": "U", "noun": "User"},
    {"id": 1, "name": "B", "noun": "Business"},
    {"id": 2, "name": "A", "noun": "Category"},
    {"id": 3, "name": "I", "noun": "City"}
  ],
  "edge_types": [
    {"id": 0, "name": "rates", "src": 0, "dst": 1, "verb": "rates", "inverse": 1},
    {"id": 1, "name": "rated_by", "src": 1, "dst": 0, "verb": "is rated by", "inverse": 0},
    {"id": 2, "name": "belongs_to", "src": 1, "dst": 2, "verb": "belongs to", "inverse": 3},
    {"id": 3, "name": "includes", "src": 2, "dst": 1, "verb": "includes", "inverse": 2},
    {"id": 4, "name": "located_in", "src": 1, "dst": 3, "verb": "is located in", "inverse": 5},
    {"id": 5, "name": "hosts", "src": 3, "dst": 1, "verb": "hosts", "inverse": 4},
    {"id": 6, "name": "friend_of", "src": 0, "dst": 0, "verb": "is friend of", "inverse": 6},
    {"id": 7, "name": "prefers", "src": 0, "dst": 2, "verb": "prefers", "inverse": 8},
    {"id": 8, "name": "preferred_by", "src": 2, "dst": 0, "verb": "is preferred by", "inverse": 7},
    {"id": 9, "name": "lives_in", "src": 0, "dst": 3, "verb": "lives in", "inverse": 10},
    {"id": 10, "name": "home_of", "src": 3, "dst": 0, "verb": "is home of", "inverse": 9}
  ]
}"#;

pub const RATES: usize = 0;
pub const BELONGS_TO: usize = 2;
pub const INCLUDES: usize = 3;
pub const LOCATED_IN: usize = 4;
pub const HOSTS: usize = 5;
pub const FRIEND_OF: usize = 6;
pub const PREFERS: usize = 7;
pub const LIVES_IN: usize = 9;

const USER: usize = 0;
const BUSINESS: usize = 1;
const CATEGORY: usize = 2;
const CITY: usize = 3;

/// Edge types written to disk; the others load as their transposes.
const FORWARD: [usize; 6] = [RATES, BELONGS_TO, LOCATED_IN, FRIEND_OF, PREFERS, LIVES_IN];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantedParams {
    pub users: usize,
    pub businesses: usize,
    pub categories: usize,
    pub cities: usize,
    pub preferences_per_user: usize,
    pub friends_per_user: usize,
}

impl Default for PlantedParams {
    fn default() -> Self {
        Self {
            users: 250,
            businesses: 230,
            categories: 10,
            cities: 10,
            preferences_per_user: 2,
            friends_per_user: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedToy {
    /// Full graph; its rating relation holds every liked pair.
    pub graph: HinGraph,
    /// `(user, business, stars)`: likes get 4-5, dislikes 1-2.
    pub ratings: Vec<(usize, usize, u32)>,
    pub planted: MetaStructure,
}

pub fn planted_schema() -> Schema {
    Schema::from_json(PLANTED_SCHEMA_JSON).expect("planted schema is valid")
}

pub fn planted_structure() -> MetaStructure {
    MetaStructure {
        nodes: vec![USER, CITY, CATEGORY, BUSINESS],
        edges: vec![(0, 1, LIVES_IN), (1, 3, HOSTS), (0, 2, PREFERS), (2, 3, INCLUDES)],
        source: 0,
        target: 3,
    }
}

pub fn generate_planted_toy(params: PlantedParams, seed: u64) -> PlantedToy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = params;
    let biz_category: Vec<usize> = (0..p.businesses).map(|_| rng.random_range(0..p.categories)).collect();
    let biz_city: Vec<usize> = (0..p.businesses).map(|_| rng.random_range(0..p.cities)).collect();
    let user_city: Vec<usize> = (0..p.users).map(|_| rng.random_range(0..p.cities)).collect();
    let user_prefs: Vec<Vec<usize>> = (0..p.users)
        .map(|_| {
            let mut v = index::sample(&mut rng, p.categories, p.preferences_per_user.min(p.categories)).into_vec();
            v.sort_unstable();
            v
        })
        .collect();

    let mut friends = BTreeSet::new();
    for u in 0..p.users {
        for _ in 0..p.friends_per_user {
            let v = rng.random_range(0..p.users);
            if v != u {
                friends.insert((u, v));
                friends.insert((v, u));
            }
        }
    }

    let mut ratings = Vec::new();
    let mut liked = Vec::new();
    for u in 0..p.users {
        for b in 0..p.businesses {
            let same_city = biz_city[b] == user_city[u];
            let preferred = user_prefs[u].contains(&biz_category[b]);
            if same_city && preferred {
                liked.push((u, b));
                ratings.push((u, b, rng.random_range(4..=5)));
            } else if same_city != preferred && rng.random_bool(0.5) {
                // matches one arm only
                ratings.push((u, b, rng.random_range(1..=2)));
            }
        }
    }

    let schema = planted_schema();
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); schema.edge_types.len()];
    edges[RATES] = liked;
    edges[BELONGS_TO] = biz_category.iter().copied().enumerate().collect();
    edges[LOCATED_IN] = biz_city.iter().copied().enumerate().collect();
    edges[FRIEND_OF] = friends.into_iter().collect();
    edges[PREFERS] = user_prefs
        .iter()
        .enumerate()
        .flat_map(|(u, cats)| cats.iter().map(move |&a| (u, a)))
        .collect();
    edges[LIVES_IN] = user_city.iter().copied().enumerate().collect();
    for e in &schema.edge_types {
        if let Some(inv) = e.inverse.filter(|&inv| inv != e.id && !FORWARD.contains(&e.id)) {
            edges[e.id] = edges[inv].iter().map(|&(s, d)| (d, s)).collect();
        }
    }
    let mut counts = vec![0; 4];
    counts[USER] = p.users;
    counts[BUSINESS] = p.businesses;
    counts[CATEGORY] = p.categories;
    counts[CITY] = p.cities;
    let graph = HinGraph::from_edges(schema, counts, edges).expect("generated indices are in range");
    PlantedToy {
        graph,
        ratings,
        planted: planted_structure(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> HinError {
    HinError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl PlantedToy {
    /// Writes `schema.json`, `node_counts.tsv`, one edge list per forward
    /// relation, `ratings.tsv`, and `planted.json` into `dir`.
    pub fn write_dataset(&self, dir: impl AsRef<Path>) -> Result<(), HinError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| io_err(&path, e))
        };
        let schema = self.graph.schema();
        write("schema.json", PLANTED_SCHEMA_JSON.to_string() + "\n")?;
        let mut counts = String::new();
        for t in &schema.node_types {
            counts.push_str(&format!("{}\t{}\n", t.name, self.graph.node_count(t.id)));
        }
        write("node_counts.tsv", counts)?;
        for &e in &FORWARD {
            let mut text = format!("# {}\n", schema.edge_type(e).name);
            for (s, d, _) in self.graph.adjacency(e).triplets() {
                text.push_str(&format!("{s}\t{d}\n"));
            }
            write(&format!("{}.tsv", schema.edge_type(e).name), text)?;
        }
        let mut ratings = String::from("# user\tbusiness\tstars\n");
        for (u, b, r) in &self.ratings {
            ratings.push_str(&format!("{u}\t{b}\t{r}\n"));
        }
        write("ratings.tsv", ratings)?;
        write("planted.json", self.planted.to_json() + "\n")
    }
}
