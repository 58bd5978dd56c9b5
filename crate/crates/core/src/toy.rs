//! Small Yelp-like schema shared by tests, docs, and the command-line examples.

use crate::hin::Schema;

/// Users, businesses, categories, and cities with four forward relations.
pub const TOY_SCHEMA_JSON: &str = r#"{
  "node_types": [
    {"id": 0, "name": "U", "noun": "User"},
    {"id": 1, "name": "B", "noun": "Business"},
    {"id": 2, "name": "A", "noun": "Category"},
    {"id": 3, "name": "I", "noun": "City"}
  ],
  "edge_types": [
    {"id": 0, "name": "rates", "src": 0, "dst": 1, "verb": "rates"},
    {"id": 1, "name": "belongs_to", "src": 1, "dst": 2, "verb": "belongs to"},
    {"id": 2, "name": "located_in", "src": 1, "dst": 3, "verb": "is located in"},
    {"id": 3, "name": "friend_of", "src": 0, "dst": 0, "verb": "is friend of"}
  ]
}"#;

pub const USER: usize = 0;
pub const BUSINESS: usize = 1;
pub const CATEGORY: usize = 2;
pub const CITY: usize = 3;

pub const RATES: usize = 0;
pub const BELONGS_TO: usize = 1;
pub const LOCATED_IN: usize = 2;
pub const FRIEND_OF: usize = 3;

pub fn toy_schema() -> Schema {
    Schema::from_json(TOY_SCHEMA_JSON).expect("toy schema is valid")
}
