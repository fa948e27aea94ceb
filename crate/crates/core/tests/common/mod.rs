//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use collab_disambig::corpus::{tokenize, CorpusIndex, CorpusOptions, PaperIdx, PaperRecord};
use collab_disambig::eval::{GoldLabels, Item, Prediction};
use collab_disambig::model::{FeatureFamily, ModelParams};
use collab_disambig::network::{CollabNetwork, VertexId};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const VOCAB: &[&str] = &[
    "graph", "kernel", "mining", "entity", "cluster", "query", "index", "vector", "stream", "privacy",
];
pub const VENUES: &[&str] = &["kdd", "icde", "vldb", "sigir", "www"];

pub fn record(id: &str, year: i32, venue: &str, title: &str, authors: &[&str]) -> PaperRecord {
    PaperRecord {
        paper_id: id.to_string(),
        year,
        venue: venue.to_string(),
        title: title.to_string(),
        authors: authors.iter().map(|s| s.to_string()).collect(),
    }
}

/// Index keeping every non-stopword title token as a keyword.
pub fn index(records: Vec<PaperRecord>) -> CorpusIndex {
    CorpusIndex::from_records(records, CorpusOptions::with_cutoff(1.0)).unwrap()
}

pub fn random_title(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..=4);
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Random papers over names `n00..`, each with 1 to `max_authors` distinct
/// authors.
pub fn random_records(rng: &mut ChaCha8Rng, n_papers: usize, n_names: usize, max_authors: usize) -> Vec<PaperRecord> {
    let names: Vec<String> = (0..n_names).map(|i| format!("n{i:02}")).collect();
    (0..n_papers)
        .map(|i| {
            let k = rng.gen_range(1..=max_authors.min(n_names));
            let authors: Vec<String> = names.choose_multiple(rng, k).cloned().collect();
            PaperRecord {
                paper_id: format!("p{i:04}"),
                year: rng.gen_range(1995..=2015),
                venue: VENUES.choose(rng).unwrap().to_string(),
                title: random_title(rng),
                authors,
            }
        })
        .collect()
}

/// Unordered name pair -> number of author lists containing both.
pub fn brute_pair_counts(records: &[PaperRecord]) -> BTreeMap<(String, String), u32> {
    let mut out = BTreeMap::new();
    for r in records {
        for a in &r.authors {
            for b in &r.authors {
                if a < b {
                    *out.entry((a.clone(), b.clone())).or_default() += 1;
                }
            }
        }
    }
    out
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `1 - Phi(z)` by integrating the standard normal density over `[z, z + 40]`.
pub fn normal_upper_tail(z: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    simpson(pdf, z, z + 40.0, 200_000)
}

/// Network builder over an index: vertices are given their papers, edges
/// carry the papers shared by both endpoints.
pub struct Fixture {
    pub corpus: CorpusIndex,
    pub net: CollabNetwork,
}

impl Fixture {
    pub fn new(records: Vec<PaperRecord>) -> Self {
        Fixture {
            corpus: index(records),
            net: CollabNetwork::new(),
        }
    }

    pub fn vertex(&mut self, name: &str, papers: &[&str]) -> VertexId {
        let v = self.net.add_vertex(self.corpus.name_id(name).unwrap());
        for p in papers {
            assert!(self.net.assign(v, self.corpus.paper_idx(p).unwrap()), "{p} already owned");
        }
        v
    }

    pub fn edge(&mut self, u: VertexId, v: VertexId) {
        let shared: Vec<PaperIdx> = self
            .net
            .papers_of(u)
            .intersection(self.net.papers_of(v))
            .copied()
            .collect();
        assert!(!shared.is_empty());
        self.net.add_edge_papers(u, v, shared);
    }
}

/// Random network of `n` vertices named `n0..n{k-1}` round-robin. Each vertex
/// has one solo paper; each edge between differently named vertices has its
/// own two-author paper. Returns the fixture and vertices in creation order.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, k: usize, edge_p: f64) -> (Fixture, Vec<VertexId>) {
    let name = |i: usize| format!("n{}", i % k);
    let mut recs = Vec::new();
    let mut owned: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut edges = Vec::new();
    let meta = |rng: &mut ChaCha8Rng, id: String, authors: Vec<String>| PaperRecord {
        paper_id: id,
        year: rng.gen_range(1995..=2015),
        venue: VENUES.choose(rng).unwrap().to_string(),
        title: random_title(rng),
        authors,
    };
    for (i, slot) in owned.iter_mut().enumerate() {
        let id = format!("s{i:03}");
        recs.push(meta(rng, id.clone(), vec![name(i)]));
        slot.push(id);
    }
    for i in 0..n {
        for j in i + 1..n {
            if i % k != j % k && rng.gen_bool(edge_p) {
                let id = format!("e{i:03}_{j:03}");
                recs.push(meta(rng, id.clone(), vec![name(i), name(j)]));
                owned[i].push(id.clone());
                owned[j].push(id);
                edges.push((i, j));
            }
        }
    }
    let mut f = Fixture::new(recs);
    let vs: Vec<VertexId> = (0..n)
        .map(|i| {
            let papers: Vec<&str> = owned[i].iter().map(String::as_str).collect();
            f.vertex(&name(i), &papers)
        })
        .collect();
    for (i, j) in edges {
        f.edge(vs[i], vs[j]);
    }
    (f, vs)
}

/// Name pairs closing a triangle with `v`, by scanning all vertex pairs.
pub fn brute_triangles(net: &CollabNetwork, corpus: &CorpusIndex, v: VertexId) -> BTreeSet<(String, String)> {
    let all: Vec<VertexId> = net.vertex_ids().collect();
    let mut out = BTreeSet::new();
    for &x in &all {
        for &y in &all {
            if x == v || y == v || x == y {
                continue;
            }
            if net.has_edge(v, x) && net.has_edge(v, y) && net.has_edge(x, y) {
                let a = corpus.name(net.name_of(x)).to_string();
                let b = corpus.name(net.name_of(y)).to_string();
                out.insert(if a <= b { (a, b) } else { (b, a) });
            }
        }
    }
    out
}

pub fn tau(net: &CollabNetwork, u: VertexId, v: VertexId) -> f64 {
    net.papers_of(u).len().min(net.papers_of(v).len()) as f64
}

pub fn clique_oracle(net: &CollabNetwork, corpus: &CorpusIndex, u: VertexId, v: VertexId) -> f64 {
    let (tu, tv) = (brute_triangles(net, corpus, u), brute_triangles(net, corpus, v));
    tu.intersection(&tv).count() as f64 / tau(net, u, v)
}

fn inv_log(freq: usize) -> f64 {
    let f = if freq <= 1 { 2.0 } else { freq as f64 };
    1.0 / f.ln()
}

/// Titles containing `word`, recounted from the raw records.
pub fn title_doc_freq(corpus: &CorpusIndex, word: &str) -> usize {
    let stop = &corpus.options().stopwords;
    corpus
        .papers()
        .iter()
        .filter(|r| tokenize(&r.title, stop).iter().any(|t| t == word))
        .count()
}

pub fn venue_paper_count(corpus: &CorpusIndex, venue: &str) -> usize {
    corpus.papers().iter().filter(|r| r.venue == venue).count()
}

pub fn time_oracle(net: &CollabNetwork, corpus: &CorpusIndex, u: VertexId, v: VertexId, alpha: f64) -> f64 {
    let words = |w: VertexId| -> BTreeSet<String> {
        net.papers_of(w)
            .iter()
            .flat_map(|&p| corpus.keywords(p).iter().cloned())
            .collect()
    };
    let mut total = 0.0;
    for word in words(u).intersection(&words(v)) {
        let mut gap = i32::MAX;
        for &pu in net.papers_of(u) {
            for &pv in net.papers_of(v) {
                let uses = |p: PaperIdx| corpus.keywords(p).iter().any(|k| k == word);
                if uses(pu) && uses(pv) {
                    gap = gap.min((corpus.paper(pu).year - corpus.paper(pv).year).abs());
                }
            }
        }
        total += (-alpha * f64::from(gap)).exp() * inv_log(title_doc_freq(corpus, word));
    }
    total / tau(net, u, v)
}

fn venue_counts(net: &CollabNetwork, corpus: &CorpusIndex, v: VertexId) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for &p in net.papers_of(v) {
        *out.entry(corpus.paper(p).venue.clone()).or_default() += 1;
    }
    out
}

/// Every venue tied for the highest count.
pub fn modal_venues(net: &CollabNetwork, corpus: &CorpusIndex, v: VertexId) -> Vec<String> {
    let counts = venue_counts(net, corpus, v);
    let best = counts.values().copied().max().unwrap_or(0);
    counts.into_iter().filter(|(_, c)| *c == best).map(|(h, _)| h).collect()
}

/// Representative-venue value for an explicit choice of modal venues.
pub fn representative_with(net: &CollabNetwork, corpus: &CorpusIndex, u: VertexId, v: VertexId, hu: &str, hv: &str) -> f64 {
    let (cu, cv) = (venue_counts(net, corpus, u), venue_counts(net, corpus, v));
    let c = |m: &BTreeMap<String, usize>, h: &str| m.get(h).copied().unwrap_or(0);
    (c(&cv, hu) + c(&cu, hv)) as f64 / tau(net, u, v)
}

/// Representative-venue value with ties resolved to the smallest venue name.
pub fn representative_oracle(net: &CollabNetwork, corpus: &CorpusIndex, u: VertexId, v: VertexId) -> f64 {
    let hu = modal_venues(net, corpus, u).into_iter().min().unwrap();
    let hv = modal_venues(net, corpus, v).into_iter().min().unwrap();
    representative_with(net, corpus, u, v, &hu, &hv)
}

pub fn community_oracle(net: &CollabNetwork, corpus: &CorpusIndex, u: VertexId, v: VertexId) -> f64 {
    let (cu, cv) = (venue_counts(net, corpus, u), venue_counts(net, corpus, v));
    cu.keys()
        .filter(|h| cv.contains_key(*h))
        .map(|h| inv_log(venue_paper_count(corpus, h)))
        .sum::<f64>()
        / tau(net, u, v)
}

/// Weisfeiler-Lehman kernel with readable string labels. Labels of round `k`
/// are `k:own(n1,n2,...)` over the sorted neighbour labels inside the ego
/// network; the root is left out of the counts.
pub fn wl_counts_oracle(net: &CollabNetwork, corpus: &CorpusIndex, root: VertexId, h: usize) -> BTreeMap<String, u32> {
    let mut dist: BTreeMap<VertexId, usize> = BTreeMap::from([(root, 0)]);
    let mut frontier = vec![root];
    for d in 1..=h {
        let mut next = Vec::new();
        for v in frontier {
            for &w in net.neighbors(v) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(d);
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    let ego: Vec<VertexId> = dist.keys().copied().collect();
    let mut label: BTreeMap<VertexId, String> = ego
        .iter()
        .map(|&v| (v, corpus.name(net.name_of(v)).to_string()))
        .collect();
    let mut counts = BTreeMap::new();
    let mut record = |label: &BTreeMap<VertexId, String>| {
        for (v, l) in label {
            if *v != root {
                *counts.entry(l.clone()).or_insert(0) += 1;
            }
        }
    };
    record(&label);
    for k in 1..=h {
        let next: BTreeMap<VertexId, String> = ego
            .iter()
            .map(|&v| {
                let mut nb: Vec<&str> = ego
                    .iter()
                    .filter(|&&w| net.has_edge(v, w))
                    .map(|w| label[w].as_str())
                    .collect();
                nb.sort_unstable();
                (v, format!("{k}:{}({})", label[&v], nb.join(",")))
            })
            .collect();
        label = next;
        record(&label);
    }
    counts
}

pub fn wl_kernel_oracle(net: &CollabNetwork, corpus: &CorpusIndex, u: VertexId, v: VertexId, h: usize) -> f64 {
    let (a, b) = (wl_counts_oracle(net, corpus, u, h), wl_counts_oracle(net, corpus, v, h));
    let dot = |x: &BTreeMap<String, u32>, y: &BTreeMap<String, u32>| -> f64 {
        x.iter()
            .filter_map(|(l, &c)| y.get(l).map(|&d| f64::from(c) * f64::from(d)))
            .sum()
    };
    let (aa, bb) = (dot(&a, &a), dot(&b, &b));
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        dot(&a, &b) / (aa * bb).sqrt()
    }
}

/// `(tp, fp, fn, tn)` by classifying every same-name pair of gold items.
pub fn brute_pair_counts_metrics(pred: &Prediction, gold: &GoldLabels) -> (u64, u64, u64, u64) {
    let items: Vec<(&Item, &String)> = gold.labels.iter().collect();
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let ((a, ga), (b, gb)) = (items[i], items[j]);
            if a.1 != b.1 {
                continue;
            }
            let same_pred = pred[a] == pred[b];
            match (same_pred, ga == gb) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
    }
    (tp, fp, fn_, tn)
}

/// Random labelled items over a few names, with a random predicted cluster
/// per item.
pub fn random_labelling(rng: &mut ChaCha8Rng, n_items: usize) -> (Prediction, GoldLabels) {
    let n_names = rng.gen_range(1..=5);
    let mut gold = GoldLabels::default();
    let mut pred = HashMap::new();
    for i in 0..n_items {
        let name = format!("x{}", rng.gen_range(0..n_names));
        let key = (format!("p{i}"), name.clone());
        gold.labels
            .insert(key.clone(), format!("{name}/A{}", rng.gen_range(0..4)));
        pred.insert(key, rng.gen_range(0..6u64));
    }
    (pred, gold)
}

/// Weighted log-likelihood of one feature family, from textbook densities.
pub fn weighted_ll(f: &FeatureFamily, values: &[(f64, f64)]) -> f64 {
    values
        .iter()
        .map(|&(x, w)| {
            w * match f {
                FeatureFamily::Gaussian { mean, var } => {
                    let z = x - mean;
                    -(z * z) / (2.0 * var) - 0.5 * (2.0 * std::f64::consts::PI * var).ln()
                }
                FeatureFamily::Exponential { rate } => rate.ln() - rate * x.max(1e-9),
                FeatureFamily::Multinomial { edges, probs } => {
                    let b = probs.len();
                    let pos = (x - edges[0]) / (edges[b] - edges[0]) * b as f64;
                    probs[(pos.floor().max(0.0) as usize).min(b - 1)].ln()
                }
            }
        })
        .sum()
}

/// Two vertices named `a` sharing collaborator `b`:
///
/// ```text
///   a0 - b - a1 - d - e
///    \  /
///     c
/// ```
pub fn wl_fixture() -> Fixture {
    let mut f = Fixture::new(vec![
        record("ab0", 2000, "kdd", "x", &["a", "b"]),
        record("ac0", 2000, "kdd", "x", &["a", "c"]),
        record("bc", 2000, "kdd", "x", &["b", "c"]),
        record("ab1", 2000, "kdd", "x", &["a", "b"]),
        record("ad1", 2000, "kdd", "x", &["a", "d"]),
        record("de", 2000, "kdd", "x", &["d", "e"]),
    ]);
    let a0 = f.vertex("a", &["ab0", "ac0"]);
    let a1 = f.vertex("a", &["ab1", "ad1"]);
    let b = f.vertex("b", &["ab0", "bc", "ab1"]);
    let c = f.vertex("c", &["ac0", "bc"]);
    let d = f.vertex("d", &["ad1", "de"]);
    let e = f.vertex("e", &["de"]);
    for (x, y) in [(a0, b), (a0, c), (b, c), (a1, b), (a1, d), (d, e)] {
        f.edge(x, y);
    }
    f
}

/// Parameters that ignore every feature but the venue Adamic/Adar one, where
/// a shared venue pushes the score above zero.
pub fn venue_only_model() -> ModelParams {
    let flat_g = FeatureFamily::Gaussian { mean: 0.0, var: 1.0 };
    let flat_e = FeatureFamily::Exponential { rate: 1.0 };
    let neutral = vec![flat_g.clone(), flat_e.clone(), flat_g, flat_e.clone(), flat_e];
    let mut matched = neutral.clone();
    let mut unmatched = neutral;
    matched.push(FeatureFamily::Exponential { rate: 0.5 });
    unmatched.push(FeatureFamily::Exponential { rate: 20.0 });
    ModelParams {
        prior: 0.5,
        matched,
        unmatched,
    }
}

/// The set of (name, sorted paper ids) groups of a network.
pub fn partition_of(net: &CollabNetwork, corpus: &CorpusIndex) -> BTreeSet<(String, Vec<String>)> {
    net.vertex_ids()
        .map(|v| {
            let mut ids: Vec<String> = net
                .papers_of(v)
                .iter()
                .map(|&p| corpus.paper(p).paper_id.clone())
                .collect();
            ids.sort();
            (corpus.name(net.name_of(v)).to_string(), ids)
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
