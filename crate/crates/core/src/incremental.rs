//! Attach the author of a newly arriving paper to an existing vertex, or
//! open a new vertex, without refitting the model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, CorpusIndex, NameId, PaperIdx, PaperRecord};
use crate::gcn::{connect_paper, Scorer};
use crate::network::{CollabNetwork, VertexId};

#[derive(Debug, Error)]
pub enum IncrementalError {
    #[error("name {name:?} is not an author of paper {paper_id:?}")]
    NameNotOnPaper { name: String, paper_id: String },
    #[error("author {name:?} of paper {paper_id:?} is already assigned")]
    AlreadyAssigned { name: String, paper_id: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    AttachedTo(VertexId),
    NewVertex(VertexId),
}

impl Outcome {
    pub fn vertex(self) -> VertexId {
        match self {
            Outcome::AttachedTo(v) | Outcome::NewVertex(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementalDecision {
    pub name: String,
    pub paper_id: String,
    pub outcome: Outcome,
    pub best_score: Option<f64>,
    pub runner_up_score: Option<f64>,
}

/// Pick the winning candidate from `(vertex, score)` pairs: highest score,
/// ties to the lower vertex id. Returns `(winner, best, runner_up)`.
pub fn rank_candidates(scored: &[(VertexId, f64)]) -> Option<(VertexId, f64, Option<f64>)> {
    let mut sorted = scored.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let (v, best) = *sorted.first()?;
    Some((v, best, sorted.get(1).map(|x| x.1)))
}

/// Resolve the unowned author slot `(p, name)`: score a provisional vertex
/// holding only `p` against every vertex with that name and attach to the
/// best one if its score reaches the threshold.
pub(crate) fn decide(
    network: &mut CollabNetwork,
    scorer: &Scorer<'_>,
    p: PaperIdx,
    name: NameId,
) -> IncrementalDecision {
    let candidates: Vec<VertexId> = network.vertices_named(name).collect();
    let provisional = network.add_vertex(name);
    network.assign(provisional, p);
    let mut scored = Vec::with_capacity(candidates.len());
    {
        let ctx = scorer.context(network);
        if let Ok(fp) = ctx.features(provisional) {
            for &c in &candidates {
                if let Ok(fc) = ctx.features(c) {
                    if let Some(s) = scorer.score(&ctx, &fc, &fp) {
                        scored.push((c, s));
                    }
                }
            }
        }
    }
    let ranked = rank_candidates(&scored);
    let outcome = match ranked {
        Some((v, best, _)) if best >= scorer.delta => {
            network
                .merge_vertices(v, provisional)
                .expect("same-name live vertices");
            Outcome::AttachedTo(v)
        }
        _ => Outcome::NewVertex(provisional),
    };
    IncrementalDecision {
        name: scorer.corpus.name(name).to_string(),
        paper_id: scorer.corpus.paper(p).paper_id.clone(),
        outcome,
        best_score: ranked.map(|r| r.1),
        runner_up_score: ranked.and_then(|r| r.2),
    }
}

/// Decide the author `name` of paper `p`, already present in the corpus, and
/// add the paper's co-author edges among assigned authors.
pub fn disambiguate_paper(
    network: &mut CollabNetwork,
    scorer: &Scorer<'_>,
    p: PaperIdx,
    name: &str,
) -> Result<IncrementalDecision, IncrementalError> {
    let corpus = scorer.corpus;
    let rec = corpus.paper(p);
    let id = corpus
        .name_id(name)
        .filter(|id| corpus.authors(p).contains(id))
        .ok_or_else(|| IncrementalError::NameNotOnPaper {
            name: name.to_string(),
            paper_id: rec.paper_id.clone(),
        })?;
    if network.owner(p, id).is_some() {
        return Err(IncrementalError::AlreadyAssigned {
            name: name.to_string(),
            paper_id: rec.paper_id.clone(),
        });
    }
    let d = decide(network, scorer, p, id);
    connect_paper(network, corpus, p);
    Ok(d)
}

/// Decide every still-unassigned author of `p`, in author-list order.
pub fn disambiguate_all(
    network: &mut CollabNetwork,
    scorer: &Scorer<'_>,
    p: PaperIdx,
) -> Vec<IncrementalDecision> {
    let corpus = scorer.corpus;
    let mut out = Vec::new();
    for &name in corpus.authors(p) {
        if network.owner(p, name).is_none() {
            out.push(decide(network, scorer, p, name));
        }
    }
    connect_paper(network, corpus, p);
    out
}

/// Add a new paper to the corpus; a paper id already present is rejected.
pub fn add_paper(corpus: &mut CorpusIndex, record: PaperRecord) -> Result<PaperIdx, IncrementalError> {
    Ok(corpus.insert(record)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_prefers_score_then_lower_id() {
        let r = rank_candidates(&[(VertexId(4), 1.0), (VertexId(2), 3.0), (VertexId(1), 3.0)]).unwrap();
        assert_eq!(r, (VertexId(1), 3.0, Some(3.0)));
        assert_eq!(rank_candidates(&[]), None);
        assert_eq!(rank_candidates(&[(VertexId(7), -2.0)]), Some((VertexId(7), -2.0, None)));
    }
}
