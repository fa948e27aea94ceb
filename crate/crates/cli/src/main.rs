use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use collab_disambig::corpus::{parse_corpus, CorpusIndex, PaperRecord};
use collab_disambig::eval::{micro_metrics, partition_from_network, GoldLabels};
use collab_disambig::gcn::{merge_pass, recover_relations, Scorer};
use collab_disambig::incremental::{add_paper, disambiguate_paper};
use collab_disambig::model::{em_fit, sample_training_pairs, ModelParams};
use collab_disambig::network::CollabNetwork;
use collab_disambig::pipeline::{load_embeddings, run_full, PipelineError, RunConfig, Stage, CONFIG_KEYS};
use collab_disambig::scn::{build_scn, mine_scrs};
use collab_disambig::similarity::{EmbeddingTable, SimilarityContext};
use collab_disambig::synth::{generate, SynthConfig};

/// Where each default comes from.
fn provenance(key: &str) -> &'static str {
    match key {
        "alpha" | "sample_rate" => "published method",
        "corpus" | "stopwords" | "embeddings" | "gold" | "out_dir" => "input path",
        _ => "decided here",
    }
}

fn defaults_table() -> String {
    let cfg = RunConfig::default();
    let mut out = String::from("Configuration keys (config file `key = value`, or the matching --flag):\n");
    for key in CONFIG_KEYS {
        let value = cfg.get(key).unwrap_or_default();
        let value = if value.is_empty() { "(none)".to_string() } else { value };
        out.push_str(&format!("  {key:<18} default {value:<44} [{}]\n", provenance(key)));
    }
    out.push_str(
        "\nExit codes: 0 ok, 2 config, 10 ingest, 11 build-scn, 12 fit, 13 merge, 14 resolve, 15 evaluate, 16 output",
    );
    out
}

#[derive(Parser)]
#[command(name = "collab-disambig", version, about = "Author name disambiguation over a collaboration network")]
#[command(after_long_help = defaults_table())]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Tunables shared by the subcommands; each overrides the config file.
#[derive(Args, Default)]
struct Tunables {
    /// Key-value config file; flags given here override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Minimum co-occurrence count of a stable relation (default 3, decided here)
    #[arg(long)]
    eta: Option<String>,
    /// Merge and attach threshold on the log-odds score (default 0, decided here)
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Time decay exponent (default 0.62, published method)
    #[arg(long)]
    alpha: Option<String>,
    /// Use exp(+alpha*dt) instead of exp(-alpha*dt) in the time feature
    #[arg(long)]
    positive_exponent: Option<String>,
    /// Refinement rounds and ego radius of the graph kernel (default 2, decided here)
    #[arg(long)]
    wl_iterations: Option<String>,
    /// Fraction of same-name pairs drawn for training (default 0.1, published method)
    #[arg(long)]
    sample_rate: Option<String>,
    /// Minimum papers on each side of a split positive (default 5, decided here)
    #[arg(long)]
    min_split: Option<String>,
    /// Seed for sampling and hashed embeddings (default 42, decided here)
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated families of the six features, e.g. gaussian,exponential,...
    #[arg(long)]
    families: Option<String>,
    /// Title words in more than this fraction of papers are dropped (default 0.05, decided here)
    #[arg(long)]
    freq_cutoff: Option<String>,
    /// Dimension of hashed embeddings when no table is given (default 32, decided here)
    #[arg(long)]
    embedding_dim: Option<String>,
    /// Stop EM when the log-likelihood gains less than this (default 1e-6, decided here)
    #[arg(long)]
    em_tol: Option<String>,
    /// Iteration cap of each EM run (default 200, decided here)
    #[arg(long)]
    em_max_iter: Option<String>,
    /// Stopword list, one word per line
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Word embedding table, `word v1 v2 ...` per line
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

impl Tunables {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let config_err = |e: String| PipelineError::new(Stage::Config, e);
        let mut cfg = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                RunConfig::from_text(&text).map_err(config_err)?
            }
            None => RunConfig::default(),
        };
        let pairs = [
            ("eta", &self.eta),
            ("delta", &self.delta),
            ("alpha", &self.alpha),
            ("positive_exponent", &self.positive_exponent),
            ("wl_iterations", &self.wl_iterations),
            ("sample_rate", &self.sample_rate),
            ("min_split", &self.min_split),
            ("seed", &self.seed),
            ("families", &self.families),
            ("freq_cutoff", &self.freq_cutoff),
            ("embedding_dim", &self.embedding_dim),
            ("em_tol", &self.em_tol),
            ("em_max_iter", &self.em_max_iter),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v).map_err(config_err)?;
            }
        }
        if let Some(p) = &self.stopwords {
            cfg.stopwords = Some(p.clone());
        }
        if let Some(p) = &self.embeddings {
            cfg.embeddings = Some(p.clone());
        }
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a corpus, optionally writing it back normalized
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        t: Tunables,
    },
    /// Mine stable relations and write the stable collaboration network
    BuildScn {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        t: Tunables,
    },
    /// Sample training pairs from a network and fit the mixture model
    Fit {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        scn: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        t: Tunables,
    },
    /// Merge same-name vertices and recover relations; writes the final network
    Merge {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        scn: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Merge log, one event per line
        #[arg(long)]
        log: Option<PathBuf>,
        /// Per-name merge time, `name<TAB>seconds` per line
        #[arg(long)]
        timing: Option<PathBuf>,
        #[command(flatten)]
        t: Tunables,
    },
    /// Decide which vertex authored one paper; prints the decision as JSON
    Resolve {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        gcn: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Corpus line of the paper; a paper id already in the corpus uses the stored record
        #[arg(long)]
        paper: String,
        #[arg(long)]
        name: String,
        /// Write the updated network here
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        t: Tunables,
    },
    /// Score a network against gold labels
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        gcn: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Per-name timing file written by `merge --timing`
        #[arg(long)]
        timing: Option<PathBuf>,
        #[command(flatten)]
        t: Tunables,
    },
    /// Run every stage and write all artifacts into --out-dir
    Run {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        t: Tunables,
    },
    /// Write a synthetic corpus with planted authors (corpus.tsv, gold.tsv)
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 2400)]
        papers: usize,
        #[arg(long, default_value_t = 120)]
        ambiguous_names: usize,
        /// Chance that authors sharing a name work on the same topic
        #[arg(long, default_value_t = 0.0)]
        same_topic_collision: f64,
    },
}

type Res<T> = Result<T, PipelineError>;

fn read(stage: Stage, path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| PipelineError::new(stage, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Res<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PipelineError::new(Stage::Output, e))?;
    }
    fs::write(path, text).map_err(|e| PipelineError::new(Stage::Output, format!("{}: {e}", path.display())))
}

fn load_corpus(cfg: &RunConfig, path: &Path) -> Res<CorpusIndex> {
    let text = read(Stage::Ingest, path)?;
    let parsed = parse_corpus(&text, cfg.corpus_options()?).map_err(|e| PipelineError::new(Stage::Ingest, e))?;
    for e in &parsed.errors {
        eprintln!("warning: skipped {e}");
    }
    Ok(parsed.index)
}

fn load_network(stage: Stage, path: &Path, corpus: &CorpusIndex) -> Res<CollabNetwork> {
    CollabNetwork::from_text(&read(stage, path)?, corpus).map_err(|e| PipelineError::new(stage, e))
}

fn load_model(stage: Stage, path: &Path) -> Res<ModelParams> {
    ModelParams::from_text(&read(stage, path)?).map_err(|e| PipelineError::new(stage, e))
}

fn embeddings(cfg: &RunConfig, corpus: &CorpusIndex) -> Res<EmbeddingTable> {
    load_embeddings(cfg.embeddings.as_deref(), corpus, cfg.embedding_dim, cfg.seed)
        .map_err(|e| PipelineError::new(Stage::Ingest, e))
}

fn execute(command: Command) -> Res<()> {
    match command {
        Command::Ingest { corpus, out, t } => {
            let cfg = t.config()?;
            let text = read(Stage::Ingest, &corpus)?;
            let parsed = parse_corpus(&text, cfg.corpus_options()?).map_err(|e| PipelineError::new(Stage::Ingest, e))?;
            for e in &parsed.errors {
                println!("skipped\t{e}");
            }
            let c = &parsed.index;
            println!("papers\t{}\nnames\t{}\nskipped\t{}", c.n_papers(), c.n_names(), parsed.errors.len());
            if let Some(out) = out {
                write(&out, &c.to_corpus_text())?;
            }
        }
        Command::BuildScn { corpus, out, t } => {
            let cfg = t.config()?;
            let c = load_corpus(&cfg, &corpus)?;
            let scrs = mine_scrs(&c, cfg.eta).map_err(|e| PipelineError::new(Stage::BuildScn, e))?;
            let net = build_scn(&scrs, &c);
            write(&out, &net.to_text(&c))?;
            println!(
                "relations\t{}\nvertices\t{}\nedges\t{}",
                scrs.len(),
                net.vertex_count(),
                net.edge_count()
            );
        }
        Command::Fit { corpus, scn, out, t } => {
            let cfg = t.config()?;
            let c = load_corpus(&cfg, &corpus)?;
            let net = load_network(Stage::Fit, &scn, &c)?;
            let emb = embeddings(&cfg, &c)?;
            let ctx = SimilarityContext::new(&net, &c, &emb, cfg.similarity_params());
            let fit_err = |e: String| PipelineError::new(Stage::Fit, e);
            let training = sample_training_pairs(&ctx, cfg.sample_rate, cfg.seed, cfg.min_split)
                .map_err(|e| fit_err(e.to_string()))?;
            let fit = em_fit(&training, &cfg.families, None, &cfg.em_options()).map_err(|e| fit_err(e.to_string()))?;
            write(&out, &fit.params.to_text())?;
            println!(
                "training_vectors\t{}\niterations\t{}\nrestarts\t{}\nconverged\t{}\nprior\t{}",
                training.len(),
                fit.iterations,
                fit.restarts,
                fit.converged,
                fit.params.prior
            );
        }
        Command::Merge { corpus, scn, model, out, log, timing, t } => {
            let cfg = t.config()?;
            let c = load_corpus(&cfg, &corpus)?;
            let mut net = load_network(Stage::Merge, &scn, &c)?;
            let params = load_model(Stage::Merge, &model)?;
            let emb = embeddings(&cfg, &c)?;
            let scorer = Scorer {
                corpus: &c,
                embeddings: &emb,
                similarity: cfg.similarity_params(),
                model: &params,
                delta: cfg.delta,
            };
            let merges = merge_pass(&mut net, &scorer);
            let recovery = recover_relations(&mut net, &scorer);
            write(&out, &net.to_text(&c))?;
            if let Some(p) = log {
                write(&p, &merges.log_text())?;
            }
            if let Some(p) = timing {
                write(&p, &collab_disambig::eval::timing_text(&merges.time_per_name, &c))?;
            }
            println!(
                "merges\t{}\nunscorable\t{}\nrecovered_attached\t{}\nrecovered_new\t{}\nvertices\t{}\nedges\t{}",
                merges.events.len(),
                merges.skipped.len(),
                recovery.attached,
                recovery.new_vertices,
                net.vertex_count(),
                net.edge_count()
            );
        }
        Command::Resolve { corpus, gcn, model, paper, name, out, t } => {
            let cfg = t.config()?;
            let resolve_err = |e: String| PipelineError::new(Stage::Resolve, e);
            let mut c = load_corpus(&cfg, &corpus)?;
            let record = PaperRecord::parse_line(&paper).map_err(|e| resolve_err(format!("paper: {e}")))?;
            let p = match c.paper_idx(&record.paper_id) {
                Some(p) => p,
                None => add_paper(&mut c, record).map_err(|e| resolve_err(e.to_string()))?,
            };
            let mut net = load_network(Stage::Resolve, &gcn, &c)?;
            let params = load_model(Stage::Resolve, &model)?;
            let emb = embeddings(&cfg, &c)?;
            let scorer = Scorer {
                corpus: &c,
                embeddings: &emb,
                similarity: cfg.similarity_params(),
                model: &params,
                delta: cfg.delta,
            };
            let d = disambiguate_paper(&mut net, &scorer, p, &name).map_err(|e| resolve_err(e.to_string()))?;
            println!("{}", serde_json::to_string(&d).map_err(|e| resolve_err(e.to_string()))?);
            if let Some(out) = out {
                write(&out, &net.to_text(&c))?;
            }
        }
        Command::Evaluate { corpus, gcn, gold, timing, t } => {
            let cfg = t.config()?;
            let eval_err = |e: String| PipelineError::new(Stage::Evaluate, e);
            let c = load_corpus(&cfg, &corpus)?;
            let net = load_network(Stage::Evaluate, &gcn, &c)?;
            let labels = GoldLabels::parse(&read(Stage::Evaluate, &gold)?).map_err(|e| eval_err(e.to_string()))?;
            let m = micro_metrics(&partition_from_network(&net, &c), &labels).map_err(|e| eval_err(e.to_string()))?;
            println!(
                "micro_a\t{:.4}\nmicro_p\t{:.4}\nmicro_r\t{:.4}\nmicro_f\t{:.4}\ntp\t{}\nfp\t{}\nfn\t{}\ntn\t{}",
                m.micro_a, m.micro_p, m.micro_r, m.micro_f, m.tp, m.fp, m.fn_, m.tn
            );
            if let Some(p) = timing {
                let secs = parse_timing(&read(Stage::Evaluate, &p)?).map_err(eval_err)?;
                let total: f64 = secs.iter().sum();
                let mean = if secs.is_empty() { 0.0 } else { total / secs.len() as f64 };
                let max = secs.iter().copied().fold(0.0, f64::max);
                println!(
                    "timed_names\t{}\ntotal_secs\t{total:.6}\nmean_secs_per_name\t{mean:.6}\nmax_secs\t{max:.6}",
                    secs.len()
                );
            }
        }
        Command::Run { corpus, gold, out_dir, t } => {
            let mut cfg = t.config()?;
            if corpus.is_some() {
                cfg.corpus = corpus;
            }
            if gold.is_some() {
                cfg.gold = gold;
            }
            if out_dir.is_some() {
                cfg.out_dir = out_dir;
            }
            let m = run_full(&cfg)?;
            println!(
                "merges\t{}\nscn_vertices\t{}\ngcn_vertices\t{}\nconfig_hash\t{}",
                m.counts.merges, m.counts.scn_vertices, m.counts.gcn_vertices, m.config_hash
            );
            for (label, metrics) in [("stage1", m.stage1_metrics), ("stage2", m.stage2_metrics)] {
                if let Some(x) = metrics {
                    println!(
                        "{label}\tA {:.4}\tP {:.4}\tR {:.4}\tF {:.4}",
                        x.micro_a, x.micro_p, x.micro_r, x.micro_f
                    );
                }
            }
        }
        Command::Synth { out_dir, seed, papers, ambiguous_names, same_topic_collision } => {
            let s = generate(&SynthConfig {
                seed,
                n_papers: papers,
                ambiguous_names,
                same_topic_collision,
                ..Default::default()
            });
            write(&out_dir.join("corpus.tsv"), &s.corpus_text())?;
            write(&out_dir.join("gold.tsv"), &s.gold.to_text())?;
            println!("papers\t{}\nambiguous_names\t{}", s.records.len(), s.ambiguous_names().len());
        }
    }
    Ok(())
}

fn parse_timing(text: &str) -> Result<Vec<f64>, String> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.rsplit('\t')
                .next()
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| format!("bad timing line {l:?}"))
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
