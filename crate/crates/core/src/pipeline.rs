//! Run configuration and the end-to-end pipeline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clock::Stopwatch;
use crate::corpus::{parse_corpus, parse_stopwords, CorpusIndex, CorpusOptions, DEFAULT_FREQ_CUTOFF};
use crate::eval::{micro_metrics, partition_from_network, timing_summary, GoldLabels, MicroMetrics, TimingSummary};
use crate::gcn::{merge_pass, recover_relations, MergeReport, RecoveryReport, Scorer};
use crate::model::{
    em_fit, parse_families, sample_training_pairs, EmOptions, FamilyTag, FitReport, DEFAULT_FAMILIES,
    DEFAULT_MIN_SPLIT, DEFAULT_SAMPLE_RATE,
};
use crate::network::CollabNetwork;
use crate::scn::{build_scn, mine_scrs, DEFAULT_ETA};
use crate::similarity::{EmbeddingTable, SimilarityContext, SimilarityParams, DEFAULT_ALPHA, DEFAULT_WL_ITERATIONS};

pub const DEFAULT_DELTA: f64 = 0.0;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_EMBEDDING_DIM: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Ingest,
    BuildScn,
    Fit,
    Merge,
    Resolve,
    Evaluate,
    Output,
}

impl Stage {
    /// Process exit code reported when this stage fails.
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Ingest => 10,
            Stage::BuildScn => 11,
            Stage::Fit => 12,
            Stage::Merge => 13,
            Stage::Resolve => 14,
            Stage::Evaluate => 15,
            Stage::Output => 16,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::BuildScn => "build-scn",
            Stage::Fit => "fit",
            Stage::Merge => "merge",
            Stage::Resolve => "resolve",
            Stage::Evaluate => "evaluate",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug, Error)]
#[error("{} stage failed: {message}", stage.as_str())]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, err: impl std::fmt::Display) -> Self {
        PipelineError {
            stage,
            message: err.to_string(),
        }
    }
}

/// Every tunable of a run. Round-trips through [`RunConfig::to_text`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub eta: u32,
    pub delta: f64,
    pub alpha: f64,
    pub positive_exponent: bool,
    pub wl_iterations: usize,
    pub sample_rate: f64,
    pub min_split: usize,
    pub seed: u64,
    pub families: Vec<FamilyTag>,
    pub freq_cutoff: f64,
    pub embedding_dim: usize,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub corpus: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            eta: DEFAULT_ETA,
            delta: DEFAULT_DELTA,
            alpha: DEFAULT_ALPHA,
            positive_exponent: false,
            wl_iterations: DEFAULT_WL_ITERATIONS,
            sample_rate: DEFAULT_SAMPLE_RATE,
            min_split: DEFAULT_MIN_SPLIT,
            seed: DEFAULT_SEED,
            families: DEFAULT_FAMILIES.to_vec(),
            freq_cutoff: DEFAULT_FREQ_CUTOFF,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            em_tol: EmOptions::default().tol,
            em_max_iter: EmOptions::default().max_iter,
            corpus: None,
            stopwords: None,
            embeddings: None,
            gold: None,
            out_dir: None,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "eta",
    "delta",
    "alpha",
    "positive_exponent",
    "wl_iterations",
    "sample_rate",
    "min_split",
    "seed",
    "families",
    "freq_cutoff",
    "embedding_dim",
    "em_tol",
    "em_max_iter",
    "corpus",
    "stopwords",
    "embeddings",
    "gold",
    "out_dir",
];

fn path_text(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("{key}: cannot parse {v:?}"))
        }
        let path = |v: &str| (!v.is_empty()).then(|| PathBuf::from(v));
        match key {
            "eta" => self.eta = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "positive_exponent" => self.positive_exponent = num(key, value)?,
            "wl_iterations" => self.wl_iterations = num(key, value)?,
            "sample_rate" => self.sample_rate = num(key, value)?,
            "min_split" => self.min_split = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "families" => self.families = parse_families(value)?,
            "freq_cutoff" => self.freq_cutoff = num(key, value)?,
            "embedding_dim" => self.embedding_dim = num(key, value)?,
            "em_tol" => self.em_tol = num(key, value)?,
            "em_max_iter" => self.em_max_iter = num(key, value)?,
            "corpus" => self.corpus = path(value),
            "stopwords" => self.stopwords = path(value),
            "embeddings" => self.embeddings = path(value),
            "gold" => self.gold = path(value),
            "out_dir" => self.out_dir = path(value),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "eta" => self.eta.to_string(),
            "delta" => format!("{:?}", self.delta),
            "alpha" => format!("{:?}", self.alpha),
            "positive_exponent" => self.positive_exponent.to_string(),
            "wl_iterations" => self.wl_iterations.to_string(),
            "sample_rate" => format!("{:?}", self.sample_rate),
            "min_split" => self.min_split.to_string(),
            "seed" => self.seed.to_string(),
            "families" => self
                .families
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "freq_cutoff" => format!("{:?}", self.freq_cutoff),
            "embedding_dim" => self.embedding_dim.to_string(),
            "em_tol" => format!("{:?}", self.em_tol),
            "em_max_iter" => self.em_max_iter.to_string(),
            "corpus" => path_text(&self.corpus),
            "stopwords" => path_text(&self.stopwords),
            "embeddings" => path_text(&self.embeddings),
            "gold" => path_text(&self.gold),
            "out_dir" => path_text(&self.out_dir),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.eta < 2 {
            return Err(format!("eta must be at least 2, got {}", self.eta));
        }
        if !self.delta.is_finite() {
            return Err("delta must be finite".into());
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.wl_iterations < 1 {
            return Err("wl_iterations must be at least 1".into());
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return Err(format!("sample_rate must lie in (0, 1], got {}", self.sample_rate));
        }
        if self.min_split < 2 {
            return Err(format!("min_split must be at least 2, got {}", self.min_split));
        }
        if self.families.len() != DEFAULT_FAMILIES.len() {
            return Err(format!("families needs {} entries", DEFAULT_FAMILIES.len()));
        }
        if !(self.freq_cutoff > 0.0 && self.freq_cutoff <= 1.0) {
            return Err(format!("freq_cutoff must lie in (0, 1], got {}", self.freq_cutoff));
        }
        if self.embedding_dim == 0 {
            return Err("embedding_dim must be positive".into());
        }
        if !(self.em_tol > 0.0) {
            return Err("em_tol must be positive".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }

    /// Parse `key = value` lines over the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| format!("line {}: {e}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn similarity_params(&self) -> SimilarityParams {
        SimilarityParams {
            alpha: self.alpha,
            wl_iterations: self.wl_iterations,
            positive_exponent: self.positive_exponent,
        }
    }

    pub fn em_options(&self) -> EmOptions {
        EmOptions {
            tol: self.em_tol,
            max_iter: self.em_max_iter,
            ..EmOptions::default()
        }
    }

    pub fn corpus_options(&self) -> Result<CorpusOptions, PipelineError> {
        let mut opts = CorpusOptions::with_cutoff(self.freq_cutoff);
        if let Some(p) = &self.stopwords {
            let text = fs::read_to_string(p)
                .map_err(|e| PipelineError::new(Stage::Ingest, format!("{}: {e}", p.display())))?;
            opts.stopwords = parse_stopwords(&text);
        }
        Ok(opts)
    }
}

/// Embeddings from `path`, or deterministic hashed vectors for the corpus.
pub fn load_embeddings(
    path: Option<&Path>,
    corpus: &CorpusIndex,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable, String> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            EmbeddingTable::parse(&text).map_err(|e| e.to_string())
        }
        None => EmbeddingTable::hashed_for_corpus(corpus, dim, seed).map_err(|e| e.to_string()),
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct StageCounts {
    pub papers: usize,
    pub names: usize,
    pub skipped_records: usize,
    pub scrs: usize,
    pub scn_vertices: usize,
    pub scn_edges: usize,
    pub training_vectors: usize,
    pub em_iterations: usize,
    pub em_restarts: usize,
    pub merges: usize,
    pub merge_sweeps: usize,
    pub unscorable_pairs: usize,
    pub recovered_attached: usize,
    pub recovered_new: usize,
    pub gcn_vertices: usize,
    pub gcn_edges: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub stage_seconds: BTreeMap<String, f64>,
    pub counts: StageCounts,
    pub stage1_metrics: Option<MicroMetrics>,
    pub stage2_metrics: Option<MicroMetrics>,
    pub merge_timing: TimingSummary,
}

/// Everything a run produces, kept in memory.
pub struct RunOutcome {
    pub corpus: CorpusIndex,
    pub embeddings: EmbeddingTable,
    pub scn: CollabNetwork,
    pub gcn: CollabNetwork,
    pub fit: FitReport,
    pub merges: MergeReport,
    pub recovery: RecoveryReport,
    pub manifest: Manifest,
}

/// Run every stage on an already indexed corpus.
pub fn run_on_corpus(
    cfg: &RunConfig,
    corpus: CorpusIndex,
    embeddings: EmbeddingTable,
    gold: Option<&GoldLabels>,
) -> Result<RunOutcome, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
    let mut seconds = BTreeMap::new();
    let mut counts = StageCounts {
        papers: corpus.n_papers(),
        names: corpus.n_names(),
        ..Default::default()
    };

    let watch = Stopwatch::start();
    let scrs = mine_scrs(&corpus, cfg.eta).map_err(|e| PipelineError::new(Stage::BuildScn, e))?;
    let scn = build_scn(&scrs, &corpus);
    seconds.insert("build-scn".to_string(), watch.elapsed().as_secs_f64());
    counts.scrs = scrs.len();
    counts.scn_vertices = scn.vertex_count();
    counts.scn_edges = scn.edge_count();

    let watch = Stopwatch::start();
    let sim = cfg.similarity_params();
    let ctx = SimilarityContext::new(&scn, &corpus, &embeddings, sim);
    let training = sample_training_pairs(&ctx, cfg.sample_rate, cfg.seed, cfg.min_split)
        .map_err(|e| PipelineError::new(Stage::Fit, e))?;
    let fit = em_fit(&training, &cfg.families, None, &cfg.em_options())
        .map_err(|e| PipelineError::new(Stage::Fit, e))?;
    seconds.insert("fit".to_string(), watch.elapsed().as_secs_f64());
    counts.training_vectors = training.len();
    counts.em_iterations = fit.iterations;
    counts.em_restarts = fit.restarts;

    let watch = Stopwatch::start();
    let scorer = Scorer {
        corpus: &corpus,
        embeddings: &embeddings,
        similarity: sim,
        model: &fit.params,
        delta: cfg.delta,
    };
    let mut gcn = scn.clone();
    let merges = merge_pass(&mut gcn, &scorer);
    let recovery = recover_relations(&mut gcn, &scorer);
    seconds.insert("merge".to_string(), watch.elapsed().as_secs_f64());
    counts.merges = merges.events.len();
    counts.merge_sweeps = merges.sweeps;
    counts.unscorable_pairs = merges.skipped.len();
    counts.recovered_attached = recovery.attached;
    counts.recovered_new = recovery.new_vertices;
    counts.gcn_vertices = gcn.vertex_count();
    counts.gcn_edges = gcn.edge_count();

    let (mut stage1, mut stage2) = (None, None);
    if let Some(gold) = gold {
        let watch = Stopwatch::start();
        let ev = |net: &CollabNetwork| {
            micro_metrics(&partition_from_network(net, &corpus), gold)
                .map_err(|e| PipelineError::new(Stage::Evaluate, e))
        };
        stage1 = Some(ev(&scn)?);
        stage2 = Some(ev(&gcn)?);
        seconds.insert("evaluate".to_string(), watch.elapsed().as_secs_f64());
    }

    let manifest = Manifest {
        config: CONFIG_KEYS
            .iter()
            .map(|k| (k.to_string(), cfg.get(k).expect("known key")))
            .collect(),
        config_hash: cfg.hash(),
        stage_seconds: seconds,
        counts,
        stage1_metrics: stage1,
        stage2_metrics: stage2,
        merge_timing: timing_summary(&merges.time_per_name),
    };
    Ok(RunOutcome {
        corpus,
        embeddings,
        scn,
        gcn,
        fit,
        merges,
        recovery,
        manifest,
    })
}

/// Read the inputs named by `cfg`, run every stage and write the artifacts
/// (`scn.graph`, `gcn.graph`, `model.txt`, `merges.log`, `manifest.json`,
/// `timing.tsv`) into `cfg.out_dir`. Artifacts already written survive a
/// later failure.
pub fn run_full(cfg: &RunConfig) -> Result<Manifest, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::new(Stage::Config, e))?;
    let corpus_path = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| PipelineError::new(Stage::Config, "corpus path is required"))?;
    let out = cfg
        .out_dir
        .as_ref()
        .ok_or_else(|| PipelineError::new(Stage::Config, "out_dir is required"))?;
    let write = |name: &str, text: &str| {
        fs::write(out.join(name), text).map_err(|e| PipelineError::new(Stage::Output, format!("{name}: {e}")))
    };
    fs::create_dir_all(out).map_err(|e| PipelineError::new(Stage::Output, e))?;

    let watch = Stopwatch::start();
    let text = fs::read_to_string(corpus_path)
        .map_err(|e| PipelineError::new(Stage::Ingest, format!("{}: {e}", corpus_path.display())))?;
    let parsed = parse_corpus(&text, cfg.corpus_options()?).map_err(|e| PipelineError::new(Stage::Ingest, e))?;
    let skipped = parsed.errors.len();
    let corpus = parsed.index;
    let embeddings = load_embeddings(cfg.embeddings.as_deref(), &corpus, cfg.embedding_dim, cfg.seed)
        .map_err(|e| PipelineError::new(Stage::Ingest, e))?;
    let gold = match &cfg.gold {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| PipelineError::new(Stage::Ingest, format!("{}: {e}", p.display())))?;
            Some(GoldLabels::parse(&text).map_err(|e| PipelineError::new(Stage::Ingest, e))?)
        }
        None => None,
    };
    let ingest_secs = watch.elapsed().as_secs_f64();

    let mut run = run_on_corpus(cfg, corpus, embeddings, gold.as_ref())?;
    run.manifest.counts.skipped_records = skipped;
    run.manifest.stage_seconds.insert("ingest".to_string(), ingest_secs);

    write("scn.graph", &run.scn.to_text(&run.corpus))?;
    write("model.txt", &run.fit.params.to_text())?;
    write("gcn.graph", &run.gcn.to_text(&run.corpus))?;
    write("merges.log", &run.merges.log_text())?;
    write(
        "timing.tsv",
        &crate::eval::timing_text(&run.merges.time_per_name, &run.corpus),
    )?;
    let json = serde_json::to_string_pretty(&run.manifest).map_err(|e| PipelineError::new(Stage::Output, e))?;
    write("manifest.json", &(json + "\n"))?;
    Ok(run.manifest)
}
