//! Pairwise similarity between two same-name vertices.
//!
//! Six features are computed for a candidate pair `(u, v)`:
//!
//! | # | feature                     | range    |
//! |---|-----------------------------|----------|
//! | 1 | normalized WL subtree kernel| `[0, 1]` |
//! | 2 | co-author triangle overlap  | `>= 0`   |
//! | 3 | keyword-centroid cosine     | `[-1, 1]`, may be missing |
//! | 4 | keyword time consistency    | `>= 0`   |
//! | 5 | representative venue        | `>= 0`   |
//! | 6 | venue Adamic/Adar           | `>= 0`   |
//!
//! Features 2, 4, 5 and 6 are normalized by `tau`, the smaller paper count of
//! the two vertices.
//!
//! Per-vertex inputs are gathered once into [`VertexFeatures`], so scoring a
//! pair is cheap once both sides are cached.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusIndex, NameId};
use crate::network::{CollabNetwork, VertexId};
use crate::scn::triangle_name_pairs;

pub const DEFAULT_ALPHA: f64 = 0.62;
pub const DEFAULT_WL_ITERATIONS: usize = 2;
pub const FEATURE_COUNT: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimilarityError {
    #[error("vertex {0:?} is not in the network")]
    VertexNotFound(VertexId),
    #[error("vertices {0:?} and {1:?} carry different names")]
    NameMismatch(VertexId, VertexId),
    #[error("a vertex cannot be compared with itself ({0:?})")]
    SameVertex(VertexId),
    #[error("vertex {0:?} has no papers")]
    NoPapers(VertexId),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: expected {expected} components, found {found}")]
    Dimension {
        line: usize,
        expected: usize,
        found: usize,
    },
}

/// Pre-trained word vectors, all of one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, EmbeddingError> {
        if dim == 0 {
            return Err(EmbeddingError::ZeroDimension);
        }
        Ok(EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<(), EmbeddingError> {
        if vector.len() != self.dim {
            return Err(EmbeddingError::Dimension {
                line: 0,
                expected: self.dim,
                found: vector.len(),
            });
        }
        self.vectors.insert(word.into(), vector);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Parse `word v1 v2 ... vd` lines; `d` is taken from the first line.
    pub fn parse(text: &str) -> Result<Self, EmbeddingError> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(|s| {
                    s.parse::<f64>().map_err(|_| EmbeddingError::Parse {
                        line: i + 1,
                        msg: format!("bad number {s:?}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            let t = match table.as_mut() {
                Some(t) => t,
                None => table.insert(EmbeddingTable::new(values.len()).map_err(|_| {
                    EmbeddingError::Parse {
                        line: i + 1,
                        msg: "word without a vector".into(),
                    }
                })?),
            };
            if values.len() != t.dim {
                return Err(EmbeddingError::Dimension {
                    line: i + 1,
                    expected: t.dim,
                    found: values.len(),
                });
            }
            t.vectors.insert(word.to_lowercase(), values);
        }
        table.ok_or(EmbeddingError::ZeroDimension)
    }

    /// Deterministic stand-in for trained vectors: each word maps to a unit
    /// vector drawn from a generator seeded by `seed` and the word's hash.
    pub fn hashed<'a, I>(words: I, dim: usize, seed: u64) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut table = EmbeddingTable::new(dim)?;
        for word in words {
            if table.vectors.contains_key(word) {
                continue;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(word.as_bytes()));
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            table.vectors.insert(word.to_string(), v);
        }
        Ok(table)
    }

    /// Hashed vectors for every keyword in `corpus`.
    pub fn hashed_for_corpus(corpus: &CorpusIndex, dim: usize, seed: u64) -> Result<Self, EmbeddingError> {
        let words: BTreeSet<&str> = corpus
            .paper_indices()
            .flat_map(|p| corpus.keywords(p).iter().map(String::as_str))
            .collect();
        Self::hashed(words, dim, seed)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a combined word
    let mut z = a.rotate_left(17) ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    /// Decay factor of the time-consistency feature.
    pub alpha: f64,
    pub wl_iterations: usize,
    /// Use `exp(+alpha * gap)` instead of the decaying `exp(-alpha * gap)`.
    pub positive_exponent: bool,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        SimilarityParams {
            alpha: DEFAULT_ALPHA,
            wl_iterations: DEFAULT_WL_ITERATIONS,
            positive_exponent: false,
        }
    }
}

/// Everything a similarity computation reads. Cheap to copy.
#[derive(Clone, Copy)]
pub struct SimilarityContext<'a> {
    pub network: &'a CollabNetwork,
    pub corpus: &'a CorpusIndex,
    pub embeddings: &'a EmbeddingTable,
    pub params: SimilarityParams,
}

/// The six-component feature vector of a candidate pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityVector {
    /// `None` when either vertex has no collaborator in the network.
    pub g1_wl_kernel: Option<f64>,
    /// `None` under the same condition as the kernel.
    pub g2_clique: Option<f64>,
    pub g3_interest: Option<f64>,
    pub g4_time: f64,
    pub g5_rep_community: f64,
    pub g6_community: f64,
}

impl SimilarityVector {
    pub fn components(&self) -> [Option<f64>; FEATURE_COUNT] {
        [
            self.g1_wl_kernel,
            self.g2_clique,
            self.g3_interest,
            Some(self.g4_time),
            Some(self.g5_rep_community),
            Some(self.g6_community),
        ]
    }

    /// Build from components; missing values of the last three become 0.
    pub fn from_components(c: [Option<f64>; FEATURE_COUNT]) -> Self {
        SimilarityVector {
            g1_wl_kernel: c[0],
            g2_clique: c[1],
            g3_interest: c[2],
            g4_time: c[3].unwrap_or(0.0),
            g5_rep_community: c[4].unwrap_or(0.0),
            g6_community: c[5].unwrap_or(0.0),
        }
    }

    /// Sum of absolute values of the present components.
    pub fn l1_norm(&self) -> f64 {
        self.components().iter().flatten().map(|x| x.abs()).sum()
    }
}

/// Per-vertex inputs of every feature.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexFeatures {
    pub vertex: VertexId,
    pub name: NameId,
    pub n_papers: usize,
    pub degree: usize,
    /// WL label counts over iterations `0..=h`, root labels excluded.
    pub wl: HashMap<u64, u32>,
    wl_self: f64,
    pub triangles: BTreeSet<(NameId, NameId)>,
    /// Keyword -> sorted years of the papers using it.
    pub keyword_years: BTreeMap<String, Vec<i32>>,
    pub centroid: Option<Vec<f64>>,
    pub venues: BTreeMap<String, u32>,
}

/// WL label counts of the radius-`h` ego network of `root`, with `h`
/// refinement rounds. Initial labels are the vertex names; the root's own
/// labels are not counted.
pub fn wl_label_counts(net: &CollabNetwork, root: VertexId, h: usize) -> HashMap<u64, u32> {
    let mut local: HashMap<VertexId, usize> = HashMap::new();
    let mut order = vec![root];
    local.insert(root, 0);
    let mut queue = VecDeque::from([(root, 0usize)]);
    while let Some((v, d)) = queue.pop_front() {
        if d == h {
            continue;
        }
        for &w in net.neighbors(v) {
            if !local.contains_key(&w) {
                local.insert(w, order.len());
                order.push(w);
                queue.push_back((w, d + 1));
            }
        }
    }
    let adj: Vec<Vec<usize>> = order
        .iter()
        .map(|&v| {
            net.neighbors(v)
                .iter()
                .filter_map(|w| local.get(w).copied())
                .collect()
        })
        .collect();
    let mut labels: Vec<u64> = order
        .iter()
        .map(|&v| mix(0, u64::from(net.name_of(v).0)))
        .collect();
    let mut counts: HashMap<u64, u32> = HashMap::new();
    let mut record = |labels: &[u64]| {
        for &l in &labels[1..] {
            *counts.entry(l).or_default() += 1;
        }
    };
    record(&labels);
    for it in 1..=h {
        let next: Vec<u64> = (0..order.len())
            .map(|i| {
                let mut nb: Vec<u64> = adj[i].iter().map(|&j| labels[j]).collect();
                nb.sort_unstable();
                nb.into_iter()
                    .fold(mix(it as u64, labels[i]), mix)
            })
            .collect();
        labels = next;
        record(&labels);
    }
    counts
}

impl<'a> SimilarityContext<'a> {
    pub fn new(
        network: &'a CollabNetwork,
        corpus: &'a CorpusIndex,
        embeddings: &'a EmbeddingTable,
        params: SimilarityParams,
    ) -> Self {
        SimilarityContext {
            network,
            corpus,
            embeddings,
            params,
        }
    }

    /// Gather the per-vertex inputs of `v`.
    pub fn features(&self, v: VertexId) -> Result<VertexFeatures, SimilarityError> {
        let vx = self
            .network
            .vertex(v)
            .ok_or(SimilarityError::VertexNotFound(v))?;
        let mut keyword_years: BTreeMap<String, Vec<i32>> = BTreeMap::new();
        let mut venues: BTreeMap<String, u32> = BTreeMap::new();
        let mut sum = vec![0.0; self.embeddings.dim()];
        let mut in_vocab = 0usize;
        for &p in &vx.papers {
            let rec = self.corpus.paper(p);
            for kw in self.corpus.keywords(p) {
                keyword_years.entry(kw.clone()).or_default().push(rec.year);
                if let Some(e) = self.embeddings.get(kw) {
                    sum.iter_mut().zip(e).for_each(|(s, x)| *s += x);
                    in_vocab += 1;
                }
            }
            *venues.entry(rec.venue.clone()).or_default() += 1;
        }
        for years in keyword_years.values_mut() {
            years.sort_unstable();
        }
        let centroid = (in_vocab > 0).then(|| {
            sum.iter_mut().for_each(|s| *s /= in_vocab as f64);
            sum
        });
        let wl = wl_label_counts(self.network, v, self.params.wl_iterations);
        let wl_self = wl.values().map(|&c| f64::from(c) * f64::from(c)).sum();
        Ok(VertexFeatures {
            vertex: v,
            name: vx.name,
            n_papers: vx.papers.len(),
            degree: self.network.neighbors(v).len(),
            wl,
            wl_self,
            triangles: triangle_name_pairs(self.network, v),
            keyword_years,
            centroid,
            venues,
        })
    }

    fn check_pair(&self, u: VertexId, v: VertexId) -> Result<(), SimilarityError> {
        let nu = self.network.vertex(u).ok_or(SimilarityError::VertexNotFound(u))?.name;
        let nv = self.network.vertex(v).ok_or(SimilarityError::VertexNotFound(v))?.name;
        if u == v {
            return Err(SimilarityError::SameVertex(u));
        }
        if nu != nv {
            return Err(SimilarityError::NameMismatch(u, v));
        }
        Ok(())
    }

    fn pair(&self, u: VertexId, v: VertexId) -> Result<(VertexFeatures, VertexFeatures), SimilarityError> {
        self.check_pair(u, v)?;
        Ok((self.features(u)?, self.features(v)?))
    }

    pub fn wl_kernel(&self, u: VertexId, v: VertexId) -> Result<f64, SimilarityError> {
        let (fu, fv) = self.pair(u, v)?;
        Ok(wl_from_features(&fu, &fv))
    }

    pub fn clique_coincidence(&self, u: VertexId, v: VertexId) -> Result<f64, SimilarityError> {
        let (fu, fv) = self.pair(u, v)?;
        Ok(clique_from_features(&fu, &fv, tau(&fu, &fv)?))
    }

    /// `None` when either vertex has no keyword with an embedding.
    pub fn interest_cosine(&self, u: VertexId, v: VertexId) -> Result<Option<f64>, SimilarityError> {
        let (fu, fv) = self.pair(u, v)?;
        Ok(interest_from_features(&fu, &fv))
    }

    pub fn time_consistency(&self, u: VertexId, v: VertexId) -> Result<f64, SimilarityError> {
        let (fu, fv) = self.pair(u, v)?;
        Ok(self.time_from_features(&fu, &fv, tau(&fu, &fv)?))
    }

    pub fn representative_community(&self, u: VertexId, v: VertexId) -> Result<f64, SimilarityError> {
        let (fu, fv) = self.pair(u, v)?;
        Ok(representative_from_features(&fu, &fv, tau(&fu, &fv)?))
    }

    pub fn community_similarity(&self, u: VertexId, v: VertexId) -> Result<f64, SimilarityError> {
        let (fu, fv) = self.pair(u, v)?;
        Ok(self.community_from_features(&fu, &fv, tau(&fu, &fv)?))
    }

    pub fn similarity_vector(&self, u: VertexId, v: VertexId) -> Result<SimilarityVector, SimilarityError> {
        let (fu, fv) = self.pair(u, v)?;
        self.vector_from_features(&fu, &fv)
    }

    /// Assemble the vector from cached per-vertex features.
    pub fn vector_from_features(
        &self,
        fu: &VertexFeatures,
        fv: &VertexFeatures,
    ) -> Result<SimilarityVector, SimilarityError> {
        if fu.vertex == fv.vertex {
            return Err(SimilarityError::SameVertex(fu.vertex));
        }
        if fu.name != fv.name {
            return Err(SimilarityError::NameMismatch(fu.vertex, fv.vertex));
        }
        let t = tau(fu, fv)?;
        let structured = fu.degree > 0 && fv.degree > 0;
        Ok(SimilarityVector {
            g1_wl_kernel: structured.then(|| wl_from_features(fu, fv)),
            g2_clique: structured.then(|| clique_from_features(fu, fv, t)),
            g3_interest: interest_from_features(fu, fv),
            g4_time: self.time_from_features(fu, fv, t),
            g5_rep_community: representative_from_features(fu, fv, t),
            g6_community: self.community_from_features(fu, fv, t),
        })
    }

    fn time_from_features(&self, fu: &VertexFeatures, fv: &VertexFeatures, tau: f64) -> f64 {
        let sign = if self.params.positive_exponent { 1.0 } else { -1.0 };
        let mut total = 0.0;
        for (word, yu) in &fu.keyword_years {
            let Some(yv) = fv.keyword_years.get(word) else { continue };
            let gap = min_abs_gap(yu, yv) as f64;
            let fb = f64::from(self.corpus.word_freq(word));
            total += (sign * self.params.alpha * gap).exp() * inverse_log_frequency(fb);
        }
        total / tau
    }

    fn community_from_features(&self, fu: &VertexFeatures, fv: &VertexFeatures, tau: f64) -> f64 {
        fu.venues
            .keys()
            .filter(|h| fv.venues.contains_key(*h))
            .map(|h| inverse_log_frequency(f64::from(self.corpus.venue_freq(h))))
            .sum::<f64>()
            / tau
    }
}

/// `1 / ln(f)`, with frequencies at or below 1 clamped to 2.
pub fn inverse_log_frequency(freq: f64) -> f64 {
    let f = if freq <= 1.0 { 2.0 } else { freq };
    1.0 / f.ln()
}

fn tau(fu: &VertexFeatures, fv: &VertexFeatures) -> Result<f64, SimilarityError> {
    if fu.n_papers == 0 {
        return Err(SimilarityError::NoPapers(fu.vertex));
    }
    if fv.n_papers == 0 {
        return Err(SimilarityError::NoPapers(fv.vertex));
    }
    Ok(fu.n_papers.min(fv.n_papers) as f64)
}

/// Smallest `|a - b|` over sorted slices.
fn min_abs_gap(a: &[i32], b: &[i32]) -> i32 {
    let (mut i, mut j) = (0, 0);
    let mut best = i32::MAX;
    while i < a.len() && j < b.len() {
        best = best.min((a[i] - b[j]).abs());
        if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best
}

fn wl_from_features(fu: &VertexFeatures, fv: &VertexFeatures) -> f64 {
    if fu.wl_self == 0.0 || fv.wl_self == 0.0 {
        return 0.0;
    }
    let (small, large) = if fu.wl.len() <= fv.wl.len() {
        (&fu.wl, &fv.wl)
    } else {
        (&fv.wl, &fu.wl)
    };
    let dot: f64 = small
        .iter()
        .filter_map(|(l, &c)| large.get(l).map(|&d| f64::from(c) * f64::from(d)))
        .sum();
    (dot / (fu.wl_self * fv.wl_self).sqrt()).clamp(0.0, 1.0)
}

fn clique_from_features(fu: &VertexFeatures, fv: &VertexFeatures, tau: f64) -> f64 {
    fu.triangles.intersection(&fv.triangles).count() as f64 / tau
}

fn interest_from_features(fu: &VertexFeatures, fv: &VertexFeatures) -> Option<f64> {
    let (a, b) = (fu.centroid.as_ref()?, fv.centroid.as_ref()?);
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Most frequent venue; ties go to the lexicographically smallest.
fn modal_venue(venues: &BTreeMap<String, u32>) -> Option<&str> {
    let mut best: Option<(&str, u32)> = None;
    for (v, &c) in venues {
        if best.map_or(true, |(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}

fn representative_from_features(fu: &VertexFeatures, fv: &VertexFeatures, tau: f64) -> f64 {
    let count = |venues: &BTreeMap<String, u32>, h: Option<&str>| {
        h.and_then(|h| venues.get(h)).copied().unwrap_or(0)
    };
    let hu = modal_venue(&fu.venues);
    let hv = modal_venue(&fv.venues);
    f64::from(count(&fv.venues, hu) + count(&fu.venues, hv)) / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusOptions, PaperIdx, PaperRecord};

    struct Fixture {
        corpus: CorpusIndex,
        net: CollabNetwork,
    }

    fn fixture(papers: &[(&str, i32, &str, &str, &[&str])]) -> Fixture {
        let recs = papers
            .iter()
            .map(|(id, y, v, t, a)| PaperRecord {
                paper_id: id.to_string(),
                year: *y,
                venue: v.to_string(),
                title: t.to_string(),
                authors: a.iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        Fixture {
            corpus: CorpusIndex::from_records(recs, CorpusOptions::with_cutoff(1.0)).unwrap(),
            net: CollabNetwork::new(),
        }
    }

    impl Fixture {
        fn vertex(&mut self, name: &str, papers: &[&str]) -> VertexId {
            let v = self.net.add_vertex(self.corpus.name_id(name).unwrap());
            for p in papers {
                assert!(self.net.assign(v, self.corpus.paper_idx(p).unwrap()));
            }
            v
        }
        fn edge(&mut self, u: VertexId, v: VertexId) {
            let shared: Vec<PaperIdx> = self
                .net
                .papers_of(u)
                .intersection(self.net.papers_of(v))
                .copied()
                .collect();
            self.net.add_edge_papers(u, v, shared);
        }
    }

    #[test]
    fn disjoint_vertices_score_zero() {
        let mut f = fixture(&[
            ("p1", 2000, "kdd", "graph mining", &["a"]),
            ("p2", 2010, "sigir", "query logs", &["a"]),
        ]);
        let u = f.vertex("a", &["p1"]);
        let v = f.vertex("a", &["p2"]);
        let emb = EmbeddingTable::new(3).unwrap();
        let ctx = SimilarityContext::new(&f.net, &f.corpus, &emb, SimilarityParams::default());
        let g = ctx.similarity_vector(u, v).unwrap();
        assert_eq!(ctx.wl_kernel(u, v).unwrap(), 0.0);
        assert_eq!(ctx.clique_coincidence(u, v).unwrap(), 0.0);
        assert_eq!(g.g1_wl_kernel, None);
        assert_eq!(g.g2_clique, None);
        assert_eq!(g.g3_interest, None);
        assert_eq!(g.g4_time, 0.0);
        assert_eq!(g.g5_rep_community, 0.0);
        assert_eq!(g.g6_community, 0.0);
    }

    #[test]
    fn preconditions() {
        let mut f = fixture(&[("p1", 2000, "kdd", "x", &["a", "b"])]);
        let a = f.vertex("a", &["p1"]);
        let b = f.vertex("b", &["p1"]);
        let a2 = f.net.add_vertex(f.corpus.name_id("a").unwrap());
        let emb = EmbeddingTable::new(3).unwrap();
        let ctx = SimilarityContext::new(&f.net, &f.corpus, &emb, SimilarityParams::default());
        assert_eq!(ctx.wl_kernel(a, b), Err(SimilarityError::NameMismatch(a, b)));
        assert_eq!(ctx.wl_kernel(a, a), Err(SimilarityError::SameVertex(a)));
        assert_eq!(
            ctx.wl_kernel(a, VertexId(99)),
            Err(SimilarityError::VertexNotFound(VertexId(99)))
        );
        assert_eq!(ctx.clique_coincidence(a, a2), Err(SimilarityError::NoPapers(a2)));
    }

    #[test]
    fn time_consistency_single_keyword() {
        // exp(0) / ln(e^2) / 1
        let term = (-DEFAULT_ALPHA * 0.0f64).exp() * inverse_log_frequency(std::f64::consts::E.powi(2));
        assert!((term - 0.5).abs() < 1e-15);
        assert_eq!(inverse_log_frequency(1.0), 1.0 / 2f64.ln());
        assert_eq!(inverse_log_frequency(0.0), 1.0 / 2f64.ln());
    }

    #[test]
    fn community_one_shared_venue() {
        let t = inverse_log_frequency(std::f64::consts::E.powi(2)) / 2.0;
        assert!((t - 0.25).abs() < 1e-15);
    }

    #[test]
    fn representative_full_concentration() {
        let mut f = fixture(&[
            ("p1", 2000, "a", "x", &["n"]),
            ("p2", 2000, "a", "x", &["n"]),
            ("p3", 2000, "a", "x", &["n"]),
            ("p4", 2000, "a", "x", &["n"]),
        ]);
        let u = f.vertex("n", &["p1", "p2"]);
        let v = f.vertex("n", &["p3", "p4"]);
        let emb = EmbeddingTable::new(2).unwrap();
        let ctx = SimilarityContext::new(&f.net, &f.corpus, &emb, SimilarityParams::default());
        assert_eq!(ctx.representative_community(u, v).unwrap(), 2.0);
    }

    #[test]
    fn clique_full_overlap() {
        let mut f = fixture(&[
            ("p1", 2000, "v", "x", &["a", "b", "c"]),
            ("p2", 2001, "v", "x", &["a", "b", "c"]),
        ]);
        let a1 = f.vertex("a", &["p1"]);
        let b1 = f.vertex("b", &["p1"]);
        let c1 = f.vertex("c", &["p1"]);
        let a2 = f.vertex("a", &["p2"]);
        let b2 = f.vertex("b", &["p2"]);
        let c2 = f.vertex("c", &["p2"]);
        for (x, y) in [(a1, b1), (a1, c1), (b1, c1), (a2, b2), (a2, c2), (b2, c2)] {
            f.edge(x, y);
        }
        let emb = EmbeddingTable::new(2).unwrap();
        let ctx = SimilarityContext::new(&f.net, &f.corpus, &emb, SimilarityParams::default());
        assert_eq!(ctx.clique_coincidence(a1, a2).unwrap(), 1.0);
        // identical ego networks
        assert!((ctx.wl_kernel(a1, a2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_vertex_has_zero_kernel() {
        let mut f = fixture(&[
            ("p1", 2000, "v", "x", &["a", "b"]),
            ("p2", 2001, "v", "x", &["a"]),
        ]);
        let a1 = f.vertex("a", &["p1"]);
        let b1 = f.vertex("b", &["p1"]);
        f.edge(a1, b1);
        let a2 = f.vertex("a", &["p2"]);
        let emb = EmbeddingTable::new(2).unwrap();
        let ctx = SimilarityContext::new(&f.net, &f.corpus, &emb, SimilarityParams::default());
        assert_eq!(ctx.wl_kernel(a1, a2).unwrap(), 0.0);
        assert!(wl_label_counts(&f.net, a2, 2).is_empty());
    }

    #[test]
    fn interest_cosine_identical_and_orthogonal() {
        let mut f = fixture(&[
            ("p1", 2000, "v", "alpha beta", &["a"]),
            ("p2", 2001, "v", "beta alpha", &["a"]),
            ("p3", 2001, "v", "gamma", &["a"]),
        ]);
        let u = f.vertex("a", &["p1"]);
        let v = f.vertex("a", &["p2"]);
        let w = f.vertex("a", &["p3"]);
        let mut emb = EmbeddingTable::new(3).unwrap();
        emb.insert("alpha", vec![1.0, 0.0, 0.0]).unwrap();
        emb.insert("beta", vec![0.0, 1.0, 0.0]).unwrap();
        emb.insert("gamma", vec![0.0, 0.0, 1.0]).unwrap();
        let ctx = SimilarityContext::new(&f.net, &f.corpus, &emb, SimilarityParams::default());
        assert!((ctx.interest_cosine(u, v).unwrap().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ctx.interest_cosine(u, w).unwrap(), Some(0.0));
    }

    #[test]
    fn embedding_file_parsing() {
        let t = EmbeddingTable::parse("graph 1 0 0\nKernel 0 1 0.5\n").unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("kernel"), Some(&[0.0, 1.0, 0.5][..]));
        assert!(matches!(
            EmbeddingTable::parse("a 1 2\nb 1\n"),
            Err(EmbeddingError::Dimension { line: 2, expected: 2, found: 1 })
        ));
        assert!(EmbeddingTable::parse("a 1 x\n").is_err());
        assert_eq!(EmbeddingTable::parse(""), Err(EmbeddingError::ZeroDimension));
    }

    #[test]
    fn hashed_embeddings_are_deterministic_unit_vectors() {
        let a = EmbeddingTable::hashed(["x", "y"], 8, 7).unwrap();
        let b = EmbeddingTable::hashed(["y", "x"], 8, 7).unwrap();
        assert_eq!(a, b);
        let n: f64 = a.get("x").unwrap().iter().map(|v| v * v).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_gap() {
        assert_eq!(min_abs_gap(&[2000, 2005], &[2003, 2010]), 2);
        assert_eq!(min_abs_gap(&[2000], &[2000]), 0);
    }
}
