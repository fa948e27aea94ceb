//! Stage I: stable collaborative relations and the stable collaboration
//! network built from them.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::corpus::{CorpusIndex, NameId, PaperIdx};
use crate::network::{CollabNetwork, VertexId};

pub const DEFAULT_ETA: u32 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum ScnError {
    #[error("corpus size must be positive")]
    EmptyCorpus,
    #[error("paper counts must satisfy 0 < n <= N (got n_a={n_a}, n_b={n_b}, N={n})")]
    BadCounts { n_a: u64, n_b: u64, n: u64 },
    #[error("support threshold must be at least 2, got {0}")]
    BadEta(u32),
}

fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Normal approximation (with continuity correction) of the probability that
/// two independently occurring names co-occur on at least `x` of `n` papers.
pub fn cooccurrence_tail_probability(n_a: u64, n_b: u64, n: u64, x: u64) -> Result<f64, ScnError> {
    if n == 0 {
        return Err(ScnError::EmptyCorpus);
    }
    if n_a == 0 || n_b == 0 || n_a > n || n_b > n {
        return Err(ScnError::BadCounts { n_a, n_b, n });
    }
    if x == 0 {
        return Ok(1.0);
    }
    let nf = n as f64;
    let q = (n_a as f64 / nf) * (n_b as f64 / nf);
    let mean = nf * q;
    let var = nf * q * (1.0 - q);
    let shift = x as f64 - 0.5 - mean;
    if var <= 0.0 {
        return Ok(if shift > 0.0 { 0.0 } else { 1.0 });
    }
    Ok((1.0 - standard_normal_cdf(shift / var.sqrt())).clamp(0.0, 1.0))
}

/// Name pairs co-occurring on at least `eta` author lists, keyed `(lo, hi)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScrSet {
    pub eta: u32,
    pairs: BTreeMap<(NameId, NameId), u32>,
}

fn pair_key(a: NameId, b: NameId) -> (NameId, NameId) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl ScrSet {
    pub fn support(&self, a: NameId, b: NameId) -> Option<u32> {
        self.pairs.get(&pair_key(a, b)).copied()
    }

    pub fn contains(&self, a: NameId, b: NameId) -> bool {
        a != b && self.pairs.contains_key(&pair_key(a, b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((NameId, NameId), u32)> + '_ {
        self.pairs.iter().map(|(&k, &s)| (k, s))
    }

    /// Insertion order: descending support, then lexicographic pair. Name ids
    /// are interned in lexicographic order, so id order is string order.
    pub fn insertion_order(&self) -> Vec<(NameId, NameId)> {
        let mut v: Vec<_> = self.pairs.iter().map(|(&k, &s)| (k, s)).collect();
        v.sort_by(|(ka, sa), (kb, sb)| sb.cmp(sa).then(ka.cmp(kb)));
        v.into_iter().map(|(k, _)| k).collect()
    }
}

/// Count every author pair and keep those with support at least `eta`.
pub fn mine_scrs(index: &CorpusIndex, eta: u32) -> Result<ScrSet, ScnError> {
    if eta < 2 {
        return Err(ScnError::BadEta(eta));
    }
    let mut counts: HashMap<(NameId, NameId), u32> = HashMap::new();
    for p in index.paper_indices() {
        let mut names = index.authors(p).to_vec();
        names.sort_unstable();
        for (i, &a) in names.iter().enumerate() {
            for &b in &names[i + 1..] {
                *counts.entry((a, b)).or_default() += 1;
            }
        }
    }
    let pairs = counts.into_iter().filter(|&(_, c)| c >= eta).collect();
    Ok(ScrSet { eta, pairs })
}

struct ScnBuilder<'a> {
    index: &'a CorpusIndex,
    scrs: &'a ScrSet,
    net: CollabNetwork,
}

impl<'a> ScnBuilder<'a> {
    fn shared_papers(&self, a: NameId, b: NameId) -> Vec<PaperIdx> {
        let (pa, pb) = (self.index.papers_of(a), self.index.papers_of(b));
        let (small, large) = if pa.len() <= pb.len() { (pa, pb) } else { (pb, pa) };
        small.iter().filter(|p| large.contains(p)).copied().collect()
    }

    /// Pick the vertex named `x` for a relation with name `y`:
    /// 1. the vertex already owning most of the shared author slots,
    /// 2. a vertex named `x` with a neighbour `w` such that `(name(w), y)` is
    ///    a relation (triangle closure),
    /// 3. none (a fresh vertex is needed).
    fn choose(&self, x: NameId, y: NameId, papers: &[PaperIdx]) -> Option<VertexId> {
        let mut owned: BTreeMap<VertexId, usize> = BTreeMap::new();
        for &p in papers {
            if let Some(v) = self.net.owner(p, x) {
                *owned.entry(v).or_default() += 1;
            }
        }
        if let Some((&v, _)) = owned.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))) {
            return Some(v);
        }
        self.net.vertices_named(x).find(|&u| {
            self.net
                .neighbors(u)
                .iter()
                .any(|&w| self.scrs.contains(self.net.name_of(w), y))
        })
    }

    fn slot_free(&self, v: Option<VertexId>, p: PaperIdx, name: NameId) -> bool {
        match self.net.owner(p, name) {
            None => true,
            Some(o) => Some(o) == v,
        }
    }

    fn connect(&mut self, u: VertexId, v: VertexId, papers: &[PaperIdx]) {
        for &p in papers {
            self.net.assign(u, p);
            self.net.assign(v, p);
        }
        self.net.add_edge_papers(u, v, papers.iter().copied());
    }

    /// Close triangles around `center`: every neighbour `w` with `(name(w),
    /// name(other))` a relation gets an edge to `other`, unless `w` already
    /// has a neighbour with that name.
    fn close_triangles(&mut self, center: VertexId, other: VertexId) {
        let other_name = self.net.name_of(other);
        let candidates: Vec<VertexId> = self
            .net
            .neighbors(center)
            .iter()
            .copied()
            .filter(|&w| w != other && self.scrs.contains(self.net.name_of(w), other_name))
            .collect();
        for w in candidates {
            if self.net.has_edge(w, other)
                || self
                    .net
                    .neighbors(w)
                    .iter()
                    .any(|&z| self.net.name_of(z) == other_name)
            {
                continue;
            }
            let wn = self.net.name_of(w);
            let papers: Vec<PaperIdx> = self
                .shared_papers(wn, other_name)
                .into_iter()
                .filter(|&p| self.slot_free(Some(w), p, wn) && self.slot_free(Some(other), p, other_name))
                .collect();
            if !papers.is_empty() {
                self.connect(w, other, &papers);
            }
        }
    }

    fn insert(&mut self, x: NameId, y: NameId) {
        let shared = self.shared_papers(x, y);
        let ux = self.choose(x, y, &shared);
        let uy = self.choose(y, x, &shared);
        let papers: Vec<PaperIdx> = shared
            .into_iter()
            .filter(|&p| self.slot_free(ux, p, x) && self.slot_free(uy, p, y))
            .collect();
        if papers.is_empty() {
            return;
        }
        let ux = ux.unwrap_or_else(|| self.net.add_vertex(x));
        let uy = uy.unwrap_or_else(|| self.net.add_vertex(y));
        self.connect(ux, uy, &papers);
        self.close_triangles(ux, uy);
        self.close_triangles(uy, ux);
    }

    /// Unowned author slots become isolated vertices, one per group of the
    /// name's papers linked by a shared co-author name.
    fn insert_isolated(&mut self) {
        for name in self.index.name_ids() {
            let free: Vec<PaperIdx> = self
                .index
                .papers_of(name)
                .iter()
                .copied()
                .filter(|&p| self.net.owner(p, name).is_none())
                .collect();
            if free.is_empty() {
                continue;
            }
            let mut parent: Vec<usize> = (0..free.len()).collect();
            fn find(parent: &mut [usize], i: usize) -> usize {
                let mut r = i;
                while parent[r] != r {
                    r = parent[r];
                }
                let mut i = i;
                while parent[i] != r {
                    let next = parent[i];
                    parent[i] = r;
                    i = next;
                }
                r
            }
            let mut first_seen: HashMap<NameId, usize> = HashMap::new();
            for (i, &p) in free.iter().enumerate() {
                for &co in self.index.authors(p) {
                    if co == name {
                        continue;
                    }
                    match first_seen.get(&co) {
                        Some(&j) => {
                            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                            if ri != rj {
                                parent[ri.max(rj)] = ri.min(rj);
                            }
                        }
                        None => {
                            first_seen.insert(co, i);
                        }
                    }
                }
            }
            let mut groups: BTreeMap<usize, Vec<PaperIdx>> = BTreeMap::new();
            for (i, &p) in free.iter().enumerate() {
                let r = find(&mut parent, i);
                groups.entry(r).or_default().push(p);
            }
            for papers in groups.into_values() {
                let v = self.net.add_vertex(name);
                for p in papers {
                    self.net.assign(v, p);
                }
            }
        }
    }
}

/// Build the stable collaboration network from mined relations.
pub fn build_scn(scrs: &ScrSet, index: &CorpusIndex) -> CollabNetwork {
    let mut builder = ScnBuilder {
        index,
        scrs,
        net: CollabNetwork::new(),
    };
    for (a, b) in scrs.insertion_order() {
        builder.insert(a, b);
    }
    builder.insert_isolated();
    builder.net
}

/// Name pairs `{b, c}` such that `v`, `b`, `c` form a triangle. Used by tests
/// and by the clique-coincidence feature.
pub fn triangle_name_pairs(net: &CollabNetwork, v: VertexId) -> BTreeSet<(NameId, NameId)> {
    let nbrs: Vec<VertexId> = net.neighbors(v).iter().copied().collect();
    let mut out = BTreeSet::new();
    for (i, &x) in nbrs.iter().enumerate() {
        for &y in &nbrs[i + 1..] {
            if net.has_edge(x, y) {
                out.insert(pair_key(net.name_of(x), net.name_of(y)));
            }
        }
    }
    out
}
