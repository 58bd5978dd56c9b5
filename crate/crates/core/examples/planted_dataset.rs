//! Writes the planted-structure dataset and a matching run config.
//!
//! Usage: `cargo run --example planted_dataset -- <dir> [seed]`

use hinsearch::synthetic::{generate_planted_toy, PlantedParams};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = std::path::PathBuf::from(args.next().unwrap_or_else(|| "planted".into()));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let toy = generate_planted_toy(PlantedParams::default(), seed);
    toy.write_dataset(&dir).expect("dataset written");
    let config = serde_json::json!({
        "dataset": ".",
        "task": {"kind": "recommendation", "relation": "rates", "ratings": "ratings.tsv"},
        "search": {"generations": 30, "population": 5, "seed": 0},
        "backend": {"kind": "stub"},
        "out": "out"
    });
    let text = serde_json::to_string_pretty(&config).unwrap() + "\n";
    std::fs::write(dir.join("config.json"), text).expect("config written");
    println!("wrote {}", dir.display());
}
