//! `sgreward` command line.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use sgr::augment::{
    build_sft_record, corpus_stats, filter_candidates, merge_candidates, CandidateTriplet, CorpusStats, DropReason,
    FilterConfig, FilterOutcome, FilterRecord,
};
use sgr::embedding::EmbeddingSource;
use sgr::eval::{partition_predicates, PartitionSpec};
use sgr::structured_io::CotRecord;
use sgr::{DatasetProfile, EmbeddingStore, SCHEMA_VERSION};

use crate::config::{required, EngineConfig};
use crate::error::EngineError;
use crate::service::{handle_eval, handle_score, Engine, EvalRequest, ScoreRequest};
use crate::store::{load_jsonl, write_jsonl, CompletionItem, GroundTruthStore};

#[derive(Debug, Parser)]
#[command(name = "sgreward", version, about = "Scene graph reward scoring and SGDET evaluation")]
pub struct Cli {
    /// TOML config file; flags override it.
    #[arg(long, global = true, env = "SGR_CONFIG")]
    pub config: Option<PathBuf>,
    /// Dataset profile (JSON).
    #[arg(long, global = true, env = "SGR_PROFILE")]
    pub profile: Option<PathBuf>,
    /// Ground-truth scene graphs (JSONL).
    #[arg(long, global = true, env = "SGR_GT")]
    pub gt: Option<PathBuf>,
    /// Embedding table (JSONL of {"key","vector"}).
    #[arg(long, global = true, env = "SGR_EMBEDDING_TABLE", conflicts_with = "embedding_url")]
    pub embedding_table: Option<PathBuf>,
    /// Embedding service base URL.
    #[arg(long, global = true, env = "SGR_EMBEDDING_URL")]
    pub embedding_url: Option<String>,
    /// Worker threads for batch scoring.
    #[arg(long, global = true, env = "SGR_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score completions against their ground truth.
    Score {
        #[arg(long)]
        completions: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// SGDET evaluation of completions.
    Eval {
        #[arg(long)]
        completions: PathBuf,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter augmentation candidates; writes retained.jsonl, dropped.jsonl
    /// and summary.json.
    Filter {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Render CoT records from ground truth plus retained candidates.
    BuildCot {
        #[arg(long)]
        retained: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus statistics of the ground truth, optionally with retained candidates merged.
    Stats {
        #[arg(long)]
        retained: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Print the resolved configuration.
    ShowConfig,
}

pub fn resolve_config(cli: &Cli) -> Result<EngineConfig, EngineError> {
    let mut cfg = match &cli.config {
        Some(path) => EngineConfig::load(path)?,
        None => EngineConfig::default(),
    };
    if let Some(p) = &cli.profile {
        cfg.profile_path = Some(p.clone());
    }
    if let Some(p) = &cli.gt {
        cfg.gt_path = Some(p.clone());
    }
    let capacity = cfg.embedding.as_ref().map(|e| e.cache_capacity);
    let with_capacity = |mut src: EmbeddingSource| {
        if let Some(c) = capacity {
            src.cache_capacity = c;
        }
        src
    };
    if let Some(t) = &cli.embedding_table {
        cfg.embedding = Some(with_capacity(EmbeddingSource::table(t)));
    }
    if let Some(u) = &cli.embedding_url {
        cfg.embedding = Some(with_capacity(EmbeddingSource::remote(u.clone())));
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    match &cli.command {
        Command::Filter { theta: Some(t), .. } => cfg.filter = FilterConfig { theta: *t },
        Command::Eval { top_k: Some(k), .. } => cfg.eval.top_k = Some(*k),
        Command::Serve { listen: Some(l) } => cfg.server.listen = l.clone(),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_profile(cfg: &EngineConfig) -> Result<DatasetProfile, EngineError> {
    Ok(DatasetProfile::load(required(&cfg.profile_path, "profile_path")?)?)
}

fn load_gt(cfg: &EngineConfig, profile: &DatasetProfile) -> Result<GroundTruthStore, EngineError> {
    GroundTruthStore::load(required(&cfg.gt_path, "gt_path")?, profile)
}

fn open_embeddings(cfg: &EngineConfig) -> Result<EmbeddingStore, EngineError> {
    Ok(required(&cfg.embedding, "embedding source")?.open()?)
}

fn io_err(path: &Path, e: std::io::Error) -> EngineError {
    EngineError::new("IO", format!("{}: {e}", path.display()))
}

fn output(path: &Option<PathBuf>, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), EngineError> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?);
            write(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| EngineError::new("IO", e.to_string()))
        }
    }
}

fn write_document<T: Serialize>(path: &Option<PathBuf>, doc: &T) -> Result<(), EngineError> {
    output(path, |w| {
        serde_json::to_writer_pretty(&mut *w, doc)?;
        w.write_all(b"\n")
    })
}

fn with_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, EngineError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| EngineError::new("INTERNAL", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn load_retained(path: &Option<PathBuf>) -> Result<HashMap<String, Vec<CandidateTriplet>>, EngineError> {
    let mut by_image: HashMap<String, Vec<CandidateTriplet>> = HashMap::new();
    if let Some(p) = path {
        for c in load_jsonl::<CandidateTriplet>(p)? {
            by_image.entry(c.image_id.clone()).or_default().push(c);
        }
    }
    Ok(by_image)
}

#[derive(Serialize)]
struct FilterSummary<'a> {
    schema_version: &'a str,
    profile: &'a str,
    config: &'a FilterConfig,
    input: usize,
    retained: usize,
    dropped: usize,
    by_reason: BTreeMap<DropReason, usize>,
}

#[derive(Serialize)]
struct StatsDocument<'a> {
    schema_version: &'a str,
    profile: &'a str,
    partition: &'a PartitionSpec,
    stats: &'a CorpusStats,
}

pub fn run(cli: Cli) -> Result<(), EngineError> {
    let cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::ShowConfig => write_document(&None, &cfg),
        Command::Score { completions, out } => {
            let items: Vec<CompletionItem> = load_jsonl(completions)?;
            let mut engine = Engine::open(cfg.clone())?;
            engine.config.server.max_batch = usize::MAX;
            let req = ScoreRequest {
                profile: None,
                reward: None,
                items,
            };
            let resp = with_pool(cfg.threads, || handle_score(&engine, &req))??;
            write_document(out, &resp)
        }
        Command::Eval { completions, out, .. } => {
            let items: Vec<CompletionItem> = load_jsonl(completions)?;
            let mut engine = Engine::open(cfg.clone())?;
            engine.config.server.max_batch = usize::MAX;
            let req = EvalRequest {
                profile: None,
                eval: None,
                items,
            };
            let resp = with_pool(cfg.threads, || handle_eval(&engine, &req))??;
            write_document(out, &resp)
        }
        Command::Filter { candidates, out_dir, .. } => {
            let profile = load_profile(&cfg)?;
            let gt = load_gt(&cfg, &profile)?;
            let store = open_embeddings(&cfg)?;
            let cands: Vec<CandidateTriplet> = load_jsonl(candidates)?;
            let mut by_image: BTreeMap<&str, Vec<CandidateTriplet>> = BTreeMap::new();
            for c in &cands {
                by_image.entry(c.image_id.as_str()).or_default().push(c.clone());
            }
            let groups: Vec<(&str, Vec<CandidateTriplet>)> = by_image.into_iter().collect();
            let outcomes = with_pool(cfg.threads, || {
                groups
                    .par_iter()
                    .map(|(image, cs)| match gt.get(image) {
                        Some(g) => filter_candidates(cs, g, &profile, &cfg.filter, &store),
                        None => {
                            let mut sorted = cs.clone();
                            sorted.sort();
                            Ok(FilterOutcome {
                                retained: Vec::new(),
                                dropped: sorted
                                    .into_iter()
                                    .map(|c| FilterRecord {
                                        candidate: c,
                                        reason: Some(DropReason::UnknownImage),
                                        max_similarity: None,
                                    })
                                    .collect(),
                            })
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()
            })??;
            let mut retained = Vec::new();
            let mut dropped = Vec::new();
            for o in outcomes {
                retained.extend(o.retained);
                dropped.extend(o.dropped);
            }
            let mut by_reason = BTreeMap::new();
            for d in &dropped {
                if let Some(r) = d.reason {
                    *by_reason.entry(r).or_insert(0) += 1;
                }
            }
            std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
            let summary = FilterSummary {
                schema_version: SCHEMA_VERSION,
                profile: &profile.name,
                config: &cfg.filter,
                input: cands.len(),
                retained: retained.len(),
                dropped: dropped.len(),
                by_reason,
            };
            output(&Some(out_dir.join("retained.jsonl")), |w| write_jsonl(w, &retained))?;
            output(&Some(out_dir.join("dropped.jsonl")), |w| write_jsonl(w, &dropped))?;
            write_document(&Some(out_dir.join("summary.json")), &summary)
        }
        Command::BuildCot { retained, out } => {
            let profile = load_profile(&cfg)?;
            let gt = load_gt(&cfg, &profile)?;
            let extra = load_retained(retained)?;
            let records: Vec<CotRecord> = gt
                .graphs()
                .iter()
                .map(|g| build_sft_record(g, extra.get(&g.image_id).map_or(&[][..], Vec::as_slice), &profile))
                .collect::<Result<_, _>>()?;
            output(out, |w| write_jsonl(w, &records))
        }
        Command::Stats { retained, out } => {
            let profile = load_profile(&cfg)?;
            let gt = load_gt(&cfg, &profile)?;
            let extra = load_retained(retained)?;
            let graphs = gt
                .graphs()
                .iter()
                .map(|g| merge_candidates(g, extra.get(&g.image_id).map_or(&[][..], Vec::as_slice), &profile))
                .collect::<Result<Vec<_>, _>>()?;
            let partition = partition_predicates(&profile)?;
            let stats = corpus_stats(&graphs, &profile, &partition)?;
            write_document(
                out,
                &StatsDocument {
                    schema_version: SCHEMA_VERSION,
                    profile: &profile.name,
                    partition: &partition,
                    stats: &stats,
                },
            )
        }
        Command::Serve { .. } => {
            let engine = Arc::new(Engine::open(cfg)?);
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| EngineError::new("INTERNAL", e.to_string()))?;
            runtime
                .block_on(crate::http::serve(engine))
                .map_err(|e| EngineError::new("IO", e.to_string()))
        }
    }
}
