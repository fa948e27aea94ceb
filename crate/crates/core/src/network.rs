//! Collaboration network shared by the stable (Stage I) and global
//! (Stage II) networks.
//!
//! Every `(paper, name)` author slot that the network knows about is owned by
//! exactly one vertex carrying that name. Edges carry the papers on which the
//! two endpoint authors appear together.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{CorpusIndex, NameId, PaperIdx};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CollabVertex {
    pub name: NameId,
    pub instance: u32,
    pub papers: BTreeSet<PaperIdx>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("vertex {0:?} does not exist")]
    MissingVertex(VertexId),
    #[error("vertices {0:?} and {1:?} carry different names")]
    NameMismatch(VertexId, VertexId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CollabNetwork {
    vertices: Vec<Option<CollabVertex>>,
    adjacency: Vec<BTreeSet<VertexId>>,
    edges: BTreeMap<(VertexId, VertexId), BTreeSet<PaperIdx>>,
    name_index: BTreeMap<NameId, BTreeSet<VertexId>>,
    owner: HashMap<(PaperIdx, NameId), VertexId>,
    next_instance: HashMap<NameId, u32>,
}

fn edge_key(u: VertexId, v: VertexId) -> (VertexId, VertexId) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl CollabNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// Create an empty vertex with the next free instance id for `name`.
    pub fn add_vertex(&mut self, name: NameId) -> VertexId {
        let counter = self.next_instance.entry(name).or_insert(0);
        let instance = *counter;
        *counter += 1;
        self.insert_vertex(name, instance)
    }

    fn insert_vertex(&mut self, name: NameId, instance: u32) -> VertexId {
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push(Some(CollabVertex {
            name,
            instance,
            papers: BTreeSet::new(),
        }));
        self.adjacency.push(BTreeSet::new());
        self.name_index.entry(name).or_default().insert(id);
        let counter = self.next_instance.entry(name).or_insert(0);
        *counter = (*counter).max(instance + 1);
        id
    }

    pub fn contains(&self, v: VertexId) -> bool {
        matches!(self.vertices.get(v.index()), Some(Some(_)))
    }

    pub fn vertex(&self, v: VertexId) -> Option<&CollabVertex> {
        self.vertices.get(v.index()).and_then(Option::as_ref)
    }

    /// # Panics
    /// If `v` is not a live vertex.
    pub fn name_of(&self, v: VertexId) -> NameId {
        self.vertex(v).expect("live vertex").name
    }

    pub fn papers_of(&self, v: VertexId) -> &BTreeSet<PaperIdx> {
        &self.vertex(v).expect("live vertex").papers
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(i, _)| VertexId(i as u32))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.is_some()).count()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: VertexId) -> &BTreeSet<VertexId> {
        &self.adjacency[v.index()]
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.edges.contains_key(&edge_key(u, v))
    }

    pub fn edge_papers(&self, u: VertexId, v: VertexId) -> Option<&BTreeSet<PaperIdx>> {
        self.edges.get(&edge_key(u, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId, &BTreeSet<PaperIdx>)> {
        self.edges.iter().map(|(&(u, v), p)| (u, v, p))
    }

    /// Live vertices carrying `name`, in id order.
    pub fn vertices_named(&self, name: NameId) -> impl Iterator<Item = VertexId> + '_ {
        self.name_index.get(&name).into_iter().flatten().copied()
    }

    pub fn names(&self) -> impl Iterator<Item = NameId> + '_ {
        self.name_index
            .iter()
            .filter(|(_, vs)| !vs.is_empty())
            .map(|(&n, _)| n)
    }

    /// Vertex owning the author slot `name` on `paper`.
    pub fn owner(&self, paper: PaperIdx, name: NameId) -> Option<VertexId> {
        self.owner.get(&(paper, name)).copied()
    }

    pub fn owned_slot_count(&self) -> usize {
        self.owner.len()
    }

    /// Assign the author slot `(paper, name(v))` to `v`. A slot already owned
    /// by another vertex is left alone and `false` is returned.
    pub fn assign(&mut self, v: VertexId, paper: PaperIdx) -> bool {
        let name = self.name_of(v);
        match self.owner.get(&(paper, name)) {
            Some(&o) if o != v => false,
            Some(_) => true,
            None => {
                self.owner.insert((paper, name), v);
                self.vertices[v.index()]
                    .as_mut()
                    .expect("live vertex")
                    .papers
                    .insert(paper);
                true
            }
        }
    }

    /// Add `papers` to edge `(u, v)`, creating the edge if needed.
    pub fn add_edge_papers<I>(&mut self, u: VertexId, v: VertexId, papers: I)
    where
        I: IntoIterator<Item = PaperIdx>,
    {
        assert_ne!(u, v, "self-loops are not allowed");
        self.adjacency[u.index()].insert(v);
        self.adjacency[v.index()].insert(u);
        self.edges.entry(edge_key(u, v)).or_default().extend(papers);
    }

    /// Fold `absorbed` into `kept`: paper sets and slot ownership are unioned,
    /// edges are redirected, self-loops dropped.
    pub fn merge_vertices(&mut self, kept: VertexId, absorbed: VertexId) -> Result<(), NetworkError> {
        if !self.contains(kept) {
            return Err(NetworkError::MissingVertex(kept));
        }
        if !self.contains(absorbed) {
            return Err(NetworkError::MissingVertex(absorbed));
        }
        let name = self.name_of(kept);
        if kept == absorbed || name != self.name_of(absorbed) {
            return Err(NetworkError::NameMismatch(kept, absorbed));
        }
        let gone = self.vertices[absorbed.index()].take().expect("checked");
        for &p in &gone.papers {
            self.owner.insert((p, name), kept);
        }
        self.vertices[kept.index()]
            .as_mut()
            .expect("checked")
            .papers
            .extend(gone.papers);
        let nbrs = std::mem::take(&mut self.adjacency[absorbed.index()]);
        for w in nbrs {
            let papers = self.edges.remove(&edge_key(absorbed, w)).unwrap_or_default();
            self.adjacency[w.index()].remove(&absorbed);
            if w != kept {
                self.add_edge_papers(kept, w, papers);
            }
        }
        if let Some(set) = self.name_index.get_mut(&name) {
            set.remove(&absorbed);
        }
        Ok(())
    }

    /// Move `papers` of `v` into a fresh vertex with the same name. Edges are
    /// divided by paper; an edge whose papers end up on both sides is kept on
    /// both.
    pub fn split_vertex(&mut self, v: VertexId, papers: &BTreeSet<PaperIdx>) -> VertexId {
        let name = self.name_of(v);
        let fresh = self.add_vertex(name);
        let moved: Vec<PaperIdx> = self
            .papers_of(v)
            .iter()
            .filter(|p| papers.contains(p))
            .copied()
            .collect();
        {
            let src = self.vertices[v.index()].as_mut().expect("live vertex");
            for p in &moved {
                src.papers.remove(p);
            }
        }
        for &p in &moved {
            self.owner.insert((p, name), fresh);
            self.vertices[fresh.index()]
                .as_mut()
                .expect("fresh")
                .papers
                .insert(p);
        }
        let nbrs: Vec<VertexId> = self.adjacency[v.index()].iter().copied().collect();
        for w in nbrs {
            let key = edge_key(v, w);
            let all = self.edges.remove(&key).unwrap_or_default();
            let (to_fresh, stay): (BTreeSet<PaperIdx>, BTreeSet<PaperIdx>) =
                all.into_iter().partition(|p| papers.contains(p));
            if stay.is_empty() {
                self.adjacency[v.index()].remove(&w);
                self.adjacency[w.index()].remove(&v);
            } else {
                self.edges.insert(key, stay);
            }
            if !to_fresh.is_empty() {
                self.add_edge_papers(fresh, w, to_fresh);
            }
        }
        fresh
    }

    /// Canonical text form: vertices sorted by (name, instance), then edges
    /// sorted by endpoint labels. Paper ids are space-separated and sorted.
    pub fn to_text(&self, corpus: &CorpusIndex) -> String {
        let label = |v: VertexId| {
            let vx = self.vertex(v).expect("live vertex");
            (corpus.name(vx.name).to_string(), vx.instance)
        };
        let ids = |papers: &BTreeSet<PaperIdx>| {
            let mut ids: Vec<&str> = papers
                .iter()
                .map(|&p| corpus.paper(p).paper_id.as_str())
                .collect();
            ids.sort_unstable();
            ids.join(" ")
        };
        let mut vertices: Vec<(String, u32, String)> = self
            .vertex_ids()
            .map(|v| {
                let (n, i) = label(v);
                (n, i, ids(self.papers_of(v)))
            })
            .collect();
        vertices.sort();
        let mut edges: Vec<((String, u32), (String, u32), String)> = self
            .edges
            .iter()
            .map(|(&(u, v), papers)| {
                let (a, b) = (label(u), label(v));
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                (a, b, ids(papers))
            })
            .collect();
        edges.sort();

        let mut out = String::from("# collab-network v1\n");
        for (name, inst, papers) in vertices {
            let _ = writeln!(out, "V\t{name}\t{inst}\t{papers}");
        }
        for ((an, ai), (bn, bi), papers) in edges {
            let _ = writeln!(out, "E\t{an}\t{ai}\t{bn}\t{bi}\t{papers}");
        }
        out
    }

    /// Inverse of [`CollabNetwork::to_text`]. Every name and paper id must be
    /// known to `corpus`.
    pub fn from_text(text: &str, corpus: &CorpusIndex) -> Result<Self, NetworkError> {
        let mut net = CollabNetwork::new();
        let mut by_label: HashMap<(NameId, u32), VertexId> = HashMap::new();
        let err = |line: usize, msg: String| NetworkError::Parse { line, msg };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').collect();
            let name_id = |s: &str| {
                corpus
                    .name_id(s)
                    .ok_or_else(|| err(line_no, format!("unknown name {s:?}")))
            };
            let instance = |s: &str| {
                s.parse::<u32>()
                    .map_err(|_| err(line_no, format!("bad instance id {s:?}")))
            };
            let papers = |s: &str| -> Result<Vec<PaperIdx>, NetworkError> {
                s.split_whitespace()
                    .map(|id| {
                        corpus
                            .paper_idx(id)
                            .ok_or_else(|| err(line_no, format!("unknown paper {id:?}")))
                    })
                    .collect()
            };
            match fields.first().copied() {
                Some("V") if fields.len() == 4 => {
                    let name = name_id(fields[1])?;
                    let inst = instance(fields[2])?;
                    if by_label.contains_key(&(name, inst)) {
                        return Err(err(line_no, "duplicate vertex".into()));
                    }
                    let v = net.insert_vertex(name, inst);
                    by_label.insert((name, inst), v);
                    for p in papers(fields[3])? {
                        if !corpus.authors(p).contains(&name) {
                            return Err(err(line_no, "paper does not list the vertex name".into()));
                        }
                        if !net.assign(v, p) {
                            return Err(err(line_no, "author slot owned twice".into()));
                        }
                    }
                }
                Some("E") if fields.len() == 6 => {
                    let u = (name_id(fields[1])?, instance(fields[2])?);
                    let v = (name_id(fields[3])?, instance(fields[4])?);
                    let lookup = |k| {
                        by_label
                            .get(&k)
                            .copied()
                            .ok_or_else(|| err(line_no, "edge endpoint not declared".into()))
                    };
                    let (u, v) = (lookup(u)?, lookup(v)?);
                    if u == v {
                        return Err(err(line_no, "self-loop".into()));
                    }
                    net.add_edge_papers(u, v, papers(fields[5])?);
                }
                _ => return Err(err(line_no, format!("unrecognised line {raw:?}"))),
            }
        }
        Ok(net)
    }

    /// Check the structural invariants against `corpus`. Returns the first
    /// violation found.
    pub fn check_invariants(&self, corpus: &CorpusIndex) -> Result<(), String> {
        for ((u, v), papers) in &self.edges {
            let (nu, nv) = (self.name_of(*u), self.name_of(*v));
            for &p in papers {
                let authors = corpus.authors(p);
                if !authors.contains(&nu) || !authors.contains(&nv) {
                    return Err(format!("edge {u:?}-{v:?} carries paper {p:?} without both names"));
                }
                if !self.papers_of(*u).contains(&p) && !self.papers_of(*v).contains(&p) {
                    return Err(format!("edge paper {p:?} outside endpoint paper sets"));
                }
            }
        }
        for (name, vs) in &self.name_index {
            for v in vs {
                if self.vertex(*v).map(|x| x.name) != Some(*name) {
                    return Err(format!("name index entry {v:?} is stale"));
                }
            }
        }
        for v in self.vertex_ids() {
            let vx = self.vertex(v).expect("live");
            if !self.name_index[&vx.name].contains(&v) {
                return Err(format!("vertex {v:?} missing from name index"));
            }
            for &p in &vx.papers {
                if self.owner(p, vx.name) != Some(v) {
                    return Err(format!("slot ({p:?}, {:?}) not owned by {v:?}", vx.name));
                }
            }
        }
        for (&(p, n), &v) in &self.owner {
            match self.vertex(v) {
                Some(vx) if vx.name == n && vx.papers.contains(&p) => {}
                _ => return Err(format!("owner map entry ({p:?}, {n:?}) is stale")),
            }
        }
        Ok(())
    }

    /// Vertex label `name#instance` used by partitions and logs.
    pub fn label(&self, v: VertexId, corpus: &CorpusIndex) -> String {
        let vx = self.vertex(v).expect("live vertex");
        format!("{}#{}", corpus.name(vx.name), vx.instance)
    }

    /// Look a vertex up by its `(name, instance)` label.
    pub fn find(&self, name: NameId, instance: u32) -> Option<VertexId> {
        self.vertices_named(name)
            .find(|&v| self.vertex(v).map(|x| x.instance) == Some(instance))
    }
}
