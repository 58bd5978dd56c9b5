mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use hinsearch::agents::{BackendError, ChatBackend, DecodingParams, RecordingBackend};
use hinsearch::evolution::{explain_result, run_search, write_atomic, write_outputs, SearchError, SearchResult};
use hinsearch::grammar::encode_metastructure;
use hinsearch::hin::load_schema;
use hinsearch::mutations::{build_component_library, one_step_neighbors, ComponentLimits};
use hinsearch::{MetaStructure, Schema, SplitTag};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::RunConfig;

/// Meta-structure discovery over heterogeneous information networks.
#[derive(Debug, Parser)]
#[command(name = "hinsearch", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the search seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the evolutionary search and write its results.
    Search,
    /// Print the sentence for a structure.
    Translate {
        structure: PathBuf,
        /// Schema JSON; defaults to the one named by --config.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Score a structure on the configured task.
    Evaluate {
        structure: PathBuf,
        #[arg(long, default_value = "val")]
        split: SplitTag,
    },
    /// List the one-step neighbors of a structure.
    Neighbors {
        structure: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Keep at most this many, sampled uniformly.
        #[arg(long)]
        cap: Option<usize>,
        /// Largest neighbor size in nodes.
        #[arg(long, default_value_t = hinsearch::metastructure::DEFAULT_MAX_NODES)]
        max_nodes: usize,
    },
    /// Re-run the explainer on the best structures of a search result.
    Explain {
        result: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
    },
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }

    pub fn data(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }

    pub fn backend(error: anyhow::Error) -> Self {
        Self { code: 3, error }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Search => cmd_search(&cli),
        Command::Translate { structure, schema } => cmd_translate(&cli, structure, schema.as_deref()),
        Command::Evaluate { structure, split } => cmd_evaluate(&cli, structure, *split),
        Command::Neighbors {
            structure,
            schema,
            cap,
            max_nodes,
        } => cmd_neighbors(&cli, structure, schema.as_deref(), *cap, *max_nodes),
        Command::Explain { result, top_k } => cmd_explain(&cli, result, *top_k),
    }
}

fn require_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::usage(anyhow!("this command needs --config")))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.search.seed = seed;
    }
    Ok(config)
}

fn out_dir(cli: &Cli, config: &RunConfig, fallback: Option<&Path>) -> Result<PathBuf, Failure> {
    let dir = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .or_else(|| fallback.map(Path::to_path_buf))
        .ok_or_else(|| Failure::usage(anyhow!("no output directory: pass --out or set \"out\" in the config")))?;
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(Failure::data)?;
    Ok(dir)
}

/// Schema from an explicit path, else from the config.
fn schema_for(cli: &Cli, explicit: Option<&Path>) -> Result<Schema, Failure> {
    match explicit {
        Some(p) => load_schema(p).map_err(|e| Failure::data(e.into())),
        None => require_config(cli)?.load_schema(),
    }
}

fn read_structure(path: &Path, schema: &Schema) -> Result<MetaStructure, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::data)?;
    let ms = MetaStructure::from_json(&text)
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::data)?;
    ms.ensure_valid(schema)
        .with_context(|| format!("in {}", path.display()))
        .map_err(Failure::data)?;
    Ok(ms)
}

/// Counts backend outcomes so a search that never reached its backend can
/// be reported as a backend failure.
struct Tracked {
    inner: Arc<dyn ChatBackend>,
    ok: AtomicUsize,
    failed: AtomicUsize,
    last_error: std::sync::Mutex<Option<String>>,
}

impl Tracked {
    fn new(inner: Arc<dyn ChatBackend>) -> Self {
        Self {
            inner,
            ok: AtomicUsize::new(0),
            failed: AtomicUsize::new(0),
            last_error: Default::default(),
        }
    }

    fn check(&self) -> Result<(), Failure> {
        let failed = self.failed.load(Ordering::SeqCst);
        if failed > 0 && self.ok.load(Ordering::SeqCst) == 0 {
            let last = self.last_error.lock().unwrap().clone().unwrap_or_default();
            return Err(Failure::backend(anyhow!("all {failed} backend calls failed; last error: {last}")));
        }
        if failed > 0 {
            log::warn!("{failed} backend calls failed");
        }
        Ok(())
    }
}

impl ChatBackend for Tracked {
    fn complete(&self, system: &str, user: &str, params: &DecodingParams) -> Result<String, BackendError> {
        let r = self.inner.complete(system, user, params);
        match &r {
            Ok(_) => self.ok.fetch_add(1, Ordering::SeqCst),
            Err(e) => {
                *self.last_error.lock().unwrap() = Some(e.to_string());
                self.failed.fetch_add(1, Ordering::SeqCst)
            }
        };
        r
    }

    fn identity(&self) -> String {
        self.inner.identity()
    }
}

fn write_transcripts(path: &Path, recorder: &RecordingBackend<Arc<Tracked>>) -> Result<(), Failure> {
    let text: String = recorder
        .entries()
        .iter()
        .map(|e| serde_json::to_string(e).expect("transcript serializes") + "\n")
        .collect();
    write_atomic(path, text.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::data)
}

fn search_failure(e: SearchError) -> Failure {
    match e {
        SearchError::Config(_) => Failure::usage(e.into()),
        SearchError::Agent(_) => Failure::backend(e.into()),
        _ => Failure::data(e.into()),
    }
}

fn cmd_search(cli: &Cli) -> Result<(), Failure> {
    let config = require_config(cli)?;
    config.search.validate().map_err(search_failure)?;
    let schema = config.load_schema()?;
    let task = config.build_task(&schema)?;
    let out = out_dir(cli, &config, None)?;
    let tracked = Arc::new(Tracked::new(config.backend()));
    let recorder = Arc::new(RecordingBackend::new(tracked.clone()));
    let agents = config.agents(recorder.clone(), &task.description)?;

    let outcome = run_search(&config.search, &schema, task.evaluator.as_ref(), &agents, None);
    write_transcripts(&out.join("transcripts.jsonl"), &recorder)?;
    let result = match outcome {
        Ok(r) => r,
        Err(SearchError::Evaluation {
            generation,
            source,
            partial,
        }) => {
            write_outputs(&out, &partial)
                .with_context(|| format!("cannot write results to {}", out.display()))
                .map_err(Failure::data)?;
            return Err(Failure::data(anyhow!(
                "evaluation failed in generation {generation}: {source}; partial results in {}",
                out.display()
            )));
        }
        Err(e) => return Err(search_failure(e)),
    };
    write_outputs(&out, &result)
        .with_context(|| format!("cannot write results to {}", out.display()))
        .map_err(Failure::data)?;
    tracked.check()?;

    if let Some(best) = &result.best {
        println!("best: {}", best.sentence);
        println!("key: {}", best.key);
        println!("validation {}: {:.6}", result.metric, best.fitness);
    }
    if let Some(test) = result.test_value {
        println!("test {}: {test:.6}", result.metric);
    }
    println!("evaluator calls: {}", result.evaluator_calls);
    println!("results: {}", out.display());
    Ok(())
}

fn cmd_translate(cli: &Cli, structure: &Path, schema: Option<&Path>) -> Result<(), Failure> {
    let schema = schema_for(cli, schema)?;
    let ms = read_structure(structure, &schema)?;
    let sentence = encode_metastructure(&ms, &schema).map_err(|e| Failure::data(e.into()))?;
    println!("{sentence}");
    Ok(())
}

fn cmd_evaluate(cli: &Cli, structure: &Path, split: SplitTag) -> Result<(), Failure> {
    let config = require_config(cli)?;
    let schema = config.load_schema()?;
    let ms = read_structure(structure, &schema)?;
    let task = config.build_task(&schema)?;
    let r = task
        .evaluator
        .evaluate(&ms, split)
        .map_err(|e| Failure::data(e.into()))?;
    println!("{} {} {:.6}", r.metric, r.split, r.value);
    Ok(())
}

fn cmd_neighbors(
    cli: &Cli,
    structure: &Path,
    schema: Option<&Path>,
    cap: Option<usize>,
    max_nodes: usize,
) -> Result<(), Failure> {
    let schema = schema_for(cli, schema)?;
    let ms = read_structure(structure, &schema)?;
    let lib = build_component_library(
        &schema,
        ComponentLimits {
            max_structure_nodes: max_nodes,
            ..ComponentLimits::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
    let set = match one_step_neighbors(&ms, &lib, &schema, &mut rng, cap.unwrap_or(usize::MAX)) {
        Ok(set) => set,
        Err(_) => {
            println!("# neighbors=0 sampled=false");
            return Ok(());
        }
    };
    println!("# neighbors={} sampled={}", set.candidates.len(), set.sampled);
    for c in &set.candidates {
        let sentence = encode_metastructure(&c.structure, &schema).map_err(|e| Failure::data(e.into()))?;
        println!("{}\t{}\t{}", c.operation.name(), c.key, sentence);
    }
    Ok(())
}

fn cmd_explain(cli: &Cli, result_path: &Path, top_k: Option<usize>) -> Result<(), Failure> {
    let config = require_config(cli)?;
    let text = std::fs::read_to_string(result_path)
        .with_context(|| format!("cannot read {}", result_path.display()))
        .map_err(Failure::data)?;
    let result: SearchResult = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a search result", result_path.display()))
        .map_err(Failure::data)?;
    let schema = config.load_schema()?;
    let task = config.build_task(&schema)?;
    let out = out_dir(cli, &config, result_path.parent())?;
    let tracked = Arc::new(Tracked::new(config.backend()));
    let recorder = Arc::new(RecordingBackend::new(tracked.clone()));
    let agents = config.agents(recorder.clone(), &task.description)?;

    let k = top_k.unwrap_or(result.config.explain_top_k.max(1));
    let outcome = explain_result(&result, k, &schema, task.evaluator.as_ref(), &agents);
    write_transcripts(&out.join("explain_transcripts.jsonl"), &recorder)?;
    let reports = outcome.map_err(search_failure)?;
    tracked.check()?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n";
    let path = out.join("explanations.json");
    write_atomic(&path, json.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::data)?;
    for r in &reports {
        let analyzed = &r.structures[0];
        println!("{} {:.6}: {}", r.metric, analyzed.value, analyzed.sentence);
        for b in &r.beneficial {
            println!("  beneficial: {b}");
        }
        for d in &r.detrimental {
            println!("  detrimental: {d}");
        }
    }
    println!("reports: {}", path.display());
    Ok(())
}
