//! Stage II: merge same-name vertices whose matching score clears the
//! threshold, then recover the co-author edges of every paper.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::clock::Stopwatch;
use crate::corpus::{CorpusIndex, NameId, PaperIdx};
use crate::incremental::{decide, Outcome};
use crate::model::{matching_score, ModelParams};
use crate::network::{CollabNetwork, VertexId};
use crate::similarity::{EmbeddingTable, SimilarityContext, SimilarityParams, VertexFeatures};

/// Inputs shared by every scoring step besides the network itself.
#[derive(Clone, Copy)]
pub struct Scorer<'a> {
    pub corpus: &'a CorpusIndex,
    pub embeddings: &'a EmbeddingTable,
    pub similarity: SimilarityParams,
    pub model: &'a ModelParams,
    pub delta: f64,
}

impl<'a> Scorer<'a> {
    pub fn context<'n>(&self, network: &'n CollabNetwork) -> SimilarityContext<'n>
    where
        'a: 'n,
    {
        SimilarityContext::new(network, self.corpus, self.embeddings, self.similarity)
    }

    /// Score of a pair from cached features; `None` when unscorable.
    pub fn score(&self, ctx: &SimilarityContext<'_>, fu: &VertexFeatures, fv: &VertexFeatures) -> Option<f64> {
        ctx.vector_from_features(fu, fv)
            .ok()
            .map(|g| matching_score(&g, self.model))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub name: String,
    pub kept_vertex: VertexId,
    pub absorbed_vertex: VertexId,
    /// Per-name instance numbers, as written in the network text form.
    pub kept_instance: u32,
    pub absorbed_instance: u32,
    pub score: f64,
    /// Sweep in which the merge happened, starting at 1.
    pub iteration: usize,
}

#[derive(Clone, Debug, Default)]
pub struct MergeReport {
    pub events: Vec<MergeEvent>,
    /// Pairs that could not be scored and were left apart.
    pub skipped: Vec<(VertexId, VertexId)>,
    pub sweeps: usize,
    /// Wall-clock time spent on each name group, summed over sweeps.
    pub time_per_name: BTreeMap<NameId, Duration>,
}

impl MergeReport {
    /// One tab-separated line per event: name, kept instance, absorbed
    /// instance, score, sweep.
    pub fn log_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:?}\t{}",
                e.name,
                e.kept_instance,
                e.absorbed_instance,
                e.score,
                e.iteration
            );
        }
        out
    }
}

fn pair_key(u: VertexId, v: VertexId) -> (VertexId, VertexId) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Greedy highest-score-first merging within one name group. Returns the
/// number of merges.
fn merge_group(
    network: &mut CollabNetwork,
    scorer: &Scorer<'_>,
    name: NameId,
    sweep: usize,
    report: &mut MergeReport,
) -> usize {
    let mut members: Vec<VertexId> = network.vertices_named(name).collect();
    if members.len() < 2 {
        return 0;
    }
    let mut features: HashMap<VertexId, VertexFeatures> = HashMap::new();
    let mut scores: BTreeMap<(VertexId, VertexId), f64> = BTreeMap::new();
    {
        let ctx = scorer.context(network);
        for &v in &members {
            if let Ok(f) = ctx.features(v) {
                features.insert(v, f);
            }
        }
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                match (features.get(&u), features.get(&v)) {
                    (Some(fu), Some(fv)) => match scorer.score(&ctx, fu, fv) {
                        Some(s) => {
                            scores.insert((u, v), s);
                        }
                        None => report.skipped.push((u, v)),
                    },
                    _ => report.skipped.push((u, v)),
                }
            }
        }
    }
    let mut merges = 0;
    loop {
        let best = scores
            .iter()
            .filter(|(_, &s)| s >= scorer.delta)
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0)));
        let Some((&(kept, absorbed), &score)) = best else { break };
        let instance = |v| network.vertex(v).expect("live vertex").instance;
        let (kept_instance, absorbed_instance) = (instance(kept), instance(absorbed));
        network
            .merge_vertices(kept, absorbed)
            .expect("same-name live vertices");
        report.events.push(MergeEvent {
            name: scorer.corpus.name(name).to_string(),
            kept_vertex: kept,
            absorbed_vertex: absorbed,
            kept_instance,
            absorbed_instance,
            score,
            iteration: sweep,
        });
        merges += 1;
        members.retain(|&v| v != absorbed);
        features.remove(&absorbed);
        scores.retain(|&(a, b), _| a != absorbed && b != absorbed && a != kept && b != kept);
        let ctx = scorer.context(network);
        match ctx.features(kept) {
            Ok(f) => {
                features.insert(kept, f);
            }
            Err(_) => {
                features.remove(&kept);
            }
        }
        for &w in &members {
            if w == kept {
                continue;
            }
            let key = pair_key(kept, w);
            match (features.get(&kept), features.get(&w)) {
                (Some(fk), Some(fw)) => match scorer.score(&ctx, fk, fw) {
                    Some(s) => {
                        scores.insert(key, s);
                    }
                    None => report.skipped.push(key),
                },
                _ => report.skipped.push(key),
            }
        }
    }
    merges
}

/// Merge same-name vertices greedily by score. Sweeps over all names repeat
/// until one sweep makes no merge, so a second call is a no-op.
pub fn merge_pass(network: &mut CollabNetwork, scorer: &Scorer<'_>) -> MergeReport {
    let mut report = MergeReport::default();
    let names: Vec<NameId> = network.names().collect();
    loop {
        report.sweeps += 1;
        report.skipped.clear();
        let mut merged = 0;
        for &name in &names {
            let watch = Stopwatch::start();
            merged += merge_group(network, scorer, name, report.sweeps, &mut report);
            *report.time_per_name.entry(name).or_default() += watch.elapsed();
        }
        if merged == 0 {
            break;
        }
    }
    report.skipped.sort_unstable();
    report.skipped.dedup();
    report
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    /// Author slots that had no owner and were attached to an existing vertex.
    pub attached: usize,
    /// Author slots that had no owner and became new vertices.
    pub new_vertices: usize,
    pub edges_touched: usize,
}

/// Give every author slot of the corpus an owner, then make sure every
/// co-author pair of every paper is joined by an edge carrying that paper.
pub fn recover_relations(network: &mut CollabNetwork, scorer: &Scorer<'_>) -> RecoveryReport {
    let corpus = scorer.corpus;
    let mut report = RecoveryReport::default();
    for p in corpus.paper_indices() {
        for &name in corpus.authors(p) {
            if network.owner(p, name).is_some() {
                continue;
            }
            let d = decide(network, scorer, p, name);
            match d.outcome {
                Outcome::AttachedTo(_) => report.attached += 1,
                Outcome::NewVertex(_) => report.new_vertices += 1,
            }
        }
        report.edges_touched += connect_paper(network, corpus, p);
    }
    report
}

/// Add `p` to the edge between the owners of every pair of its authors.
pub fn connect_paper(network: &mut CollabNetwork, corpus: &CorpusIndex, p: PaperIdx) -> usize {
    let owners: Vec<VertexId> = corpus
        .authors(p)
        .iter()
        .filter_map(|&n| network.owner(p, n))
        .collect();
    let mut touched = 0;
    for (i, &u) in owners.iter().enumerate() {
        for &v in &owners[i + 1..] {
            if u != v {
                network.add_edge_papers(u, v, [p]);
                touched += 1;
            }
        }
    }
    touched
}
