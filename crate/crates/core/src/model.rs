//! Two-component mixture over similarity vectors, fitted by EM.
//!
//! Each feature is modelled independently given the component (matched `M`
//! or unmatched `U`), with a per-feature family: Gaussian, Exponential or a
//! Multinomial over equal-width bins. Missing feature values drop their factor
//! from both components.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::VertexId;
use crate::similarity::{SimilarityContext, SimilarityVector, VertexFeatures, FEATURE_COUNT};

/// Shift applied to exact zeros under an Exponential family.
pub const EXP_ZERO_SHIFT: f64 = 1e-9;
pub const VAR_FLOOR: f64 = 1e-6;
pub const SCORE_CLAMP: f64 = 700.0;
pub const DEFAULT_SAMPLE_RATE: f64 = 0.1;
pub const DEFAULT_MIN_SPLIT: usize = 5;
pub const DEFAULT_BINS: usize = 10;
const MULTINOMIAL_PSEUDO_COUNT: f64 = 1e-6;
const MAX_RESTARTS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("need at least 2 training vectors, got {0}")]
    TooFewVectors(usize),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("expected {expected} feature families, got {found}")]
    FamilyCount { expected: usize, found: usize },
    #[error("a mixture component collapsed after {0} restarts")]
    Degenerate(usize),
    #[error("no same-name pairs and no splittable vertices: nothing to fit")]
    FittingImpossible,
    #[error("sample rate must lie in (0, 1], got {0}")]
    BadRate(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyTag {
    Gaussian,
    Exponential,
    Multinomial { bins: usize },
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyTag::Gaussian => f.write_str("gaussian"),
            FamilyTag::Exponential => f.write_str("exponential"),
            FamilyTag::Multinomial { bins } => write!(f, "multinomial:{bins}"),
        }
    }
}

impl FromStr for FamilyTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(FamilyTag::Gaussian),
            "exponential" => Ok(FamilyTag::Exponential),
            "multinomial" => Ok(FamilyTag::Multinomial { bins: DEFAULT_BINS }),
            _ => match s.strip_prefix("multinomial:").map(str::parse::<usize>) {
                Some(Ok(bins)) if bins >= 1 => Ok(FamilyTag::Multinomial { bins }),
                _ => Err(format!("unknown family {s:?}")),
            },
        }
    }
}

/// Gaussian for the kernel and cosine features, Exponential for the
/// non-negative count-like ones.
pub const DEFAULT_FAMILIES: [FamilyTag; FEATURE_COUNT] = [
    FamilyTag::Gaussian,
    FamilyTag::Exponential,
    FamilyTag::Gaussian,
    FamilyTag::Exponential,
    FamilyTag::Exponential,
    FamilyTag::Exponential,
];

/// Parse a comma-separated family list such as `gaussian,exponential,...`.
pub fn parse_families(s: &str) -> Result<Vec<FamilyTag>, String> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureFamily {
    Gaussian { mean: f64, var: f64 },
    Exponential { rate: f64 },
    /// `edges` has `probs.len() + 1` entries: lower bound, inner cuts, upper bound.
    Multinomial { edges: Vec<f64>, probs: Vec<f64> },
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    if !(hi > lo) {
        return 0;
    }
    let b = ((x - lo) / (hi - lo) * bins as f64).floor();
    if b.is_nan() || b < 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

impl FeatureFamily {
    pub fn tag(&self) -> FamilyTag {
        match self {
            FeatureFamily::Gaussian { .. } => FamilyTag::Gaussian,
            FeatureFamily::Exponential { .. } => FamilyTag::Exponential,
            FeatureFamily::Multinomial { probs, .. } => FamilyTag::Multinomial { bins: probs.len() },
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            FeatureFamily::Gaussian { mean, var } => {
                let d = x - mean;
                -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var)
            }
            FeatureFamily::Exponential { rate } => rate.ln() - rate * x.max(EXP_ZERO_SHIFT),
            FeatureFamily::Multinomial { edges, probs } => probs[bin_of(edges, x)].ln(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            FeatureFamily::Gaussian { mean, var } => {
                if !mean.is_finite() || !(*var > 0.0) || !var.is_finite() {
                    return Err(format!("bad gaussian mean={mean} var={var}"));
                }
            }
            FeatureFamily::Exponential { rate } => {
                if !(*rate > 0.0) || !rate.is_finite() {
                    return Err(format!("bad exponential rate {rate}"));
                }
            }
            FeatureFamily::Multinomial { edges, probs } => {
                if probs.is_empty() || edges.len() != probs.len() + 1 {
                    return Err("multinomial needs bins+1 edges".into());
                }
                if probs.iter().any(|&p| !(p > 0.0)) {
                    return Err("multinomial probabilities must be positive".into());
                }
                if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err("multinomial probabilities must sum to 1".into());
                }
            }
        }
        Ok(())
    }
}

/// Mixture prior plus per-feature distributions of both components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub prior: f64,
    pub matched: Vec<FeatureFamily>,
    pub unmatched: Vec<FeatureFamily>,
}

impl ModelParams {
    pub fn families(&self) -> Vec<FamilyTag> {
        self.matched.iter().map(FeatureFamily::tag).collect()
    }

    pub fn n_features(&self) -> usize {
        self.matched.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| ModelError::InvalidParams(m);
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return Err(bad(format!("prior {} outside (0, 1)", self.prior)));
        }
        if self.matched.len() != self.unmatched.len() {
            return Err(bad("component feature counts differ".into()));
        }
        for (i, (m, u)) in self.matched.iter().zip(&self.unmatched).enumerate() {
            if std::mem::discriminant(m) != std::mem::discriminant(u) {
                return Err(bad(format!("feature {i}: family differs between components")));
            }
            if let (
                FeatureFamily::Multinomial { edges: em, probs: pm },
                FeatureFamily::Multinomial { edges: eu, probs: pu },
            ) = (m, u)
            {
                if em != eu || pm.len() != pu.len() {
                    return Err(bad(format!("feature {i}: bin layouts differ")));
                }
            }
            m.validate().map_err(|e| bad(format!("feature {i} matched: {e}")))?;
            u.validate().map_err(|e| bad(format!("feature {i} unmatched: {e}")))?;
        }
        Ok(())
    }

    /// `(ln p + ln f_M(x), ln(1-p) + ln f_U(x))`; missing values are skipped.
    pub fn joint_log_densities(&self, row: &[Option<f64>]) -> (f64, f64) {
        let mut lm = self.prior.ln();
        let mut lu = (1.0 - self.prior).ln();
        for ((x, m), u) in row.iter().zip(&self.matched).zip(&self.unmatched) {
            if let Some(x) = x {
                lm += m.log_density(*x);
                lu += u.log_density(*x);
            }
        }
        (lm, lu)
    }

    /// Text form with a versioned header; floats round-trip exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::from("collab-disambig-model v1\n");
        let _ = writeln!(out, "prior {:?}", self.prior);
        for (i, (m, u)) in self.matched.iter().zip(&self.unmatched).enumerate() {
            let _ = match (m, u) {
                (FeatureFamily::Gaussian { mean: mm, var: mv }, FeatureFamily::Gaussian { mean: um, var: uv }) => {
                    writeln!(out, "feature {i} gaussian {mm:?} {mv:?} {um:?} {uv:?}")
                }
                (FeatureFamily::Exponential { rate: mr }, FeatureFamily::Exponential { rate: ur }) => {
                    writeln!(out, "feature {i} exponential {mr:?} {ur:?}")
                }
                (
                    FeatureFamily::Multinomial { edges, probs: mp },
                    FeatureFamily::Multinomial { probs: up, .. },
                ) => {
                    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
                    writeln!(
                        out,
                        "feature {i} multinomial {} {} {} {}",
                        mp.len(),
                        join(edges),
                        join(mp),
                        join(up)
                    )
                }
                _ => panic!("feature {i}: components use different families"),
            };
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ModelError> {
        let err = |line: usize, msg: &str| ModelError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == "collab-disambig-model v1" => {}
            _ => return Err(err(1, "missing or unsupported header")),
        }
        let mut prior = None;
        let mut matched = Vec::new();
        let mut unmatched = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            let tok: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(n, &format!("bad number {s:?}")));
            match tok.as_slice() {
                ["prior", p] => prior = Some(num(p)?),
                ["feature", idx, family, rest @ ..] => {
                    if idx.parse::<usize>().ok() != Some(matched.len()) {
                        return Err(err(n, "features must be listed in order"));
                    }
                    let vals: Vec<f64> = rest.iter().map(|s| num(s)).collect::<Result<_, _>>()?;
                    match (*family, vals.as_slice()) {
                        ("gaussian", [mm, mv, um, uv]) => {
                            matched.push(FeatureFamily::Gaussian { mean: *mm, var: *mv });
                            unmatched.push(FeatureFamily::Gaussian { mean: *um, var: *uv });
                        }
                        ("exponential", [mr, ur]) => {
                            matched.push(FeatureFamily::Exponential { rate: *mr });
                            unmatched.push(FeatureFamily::Exponential { rate: *ur });
                        }
                        ("multinomial", [bins, rest @ ..]) => {
                            let b = *bins as usize;
                            if b == 0 || rest.len() != 3 * b + 1 {
                                return Err(err(n, "multinomial field count"));
                            }
                            let edges = rest[..=b].to_vec();
                            matched.push(FeatureFamily::Multinomial {
                                edges: edges.clone(),
                                probs: rest[b + 1..2 * b + 1].to_vec(),
                            });
                            unmatched.push(FeatureFamily::Multinomial {
                                edges,
                                probs: rest[2 * b + 1..].to_vec(),
                            });
                        }
                        _ => return Err(err(n, "unrecognised feature line")),
                    }
                }
                _ => return Err(err(n, "unrecognised line")),
            }
        }
        let params = ModelParams {
            prior: prior.ok_or_else(|| err(0, "missing prior"))?,
            matched,
            unmatched,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Posterior of the matched component for one vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Posterior {
    pub matched: f64,
    pub unmatched: f64,
    /// `ln P(M|x) - ln P(U|x)`, unclamped.
    pub log_odds: f64,
    /// Both component densities vanished; the prior was returned.
    pub degenerate: bool,
}

pub fn posterior_row(row: &[Option<f64>], params: &ModelParams) -> Posterior {
    let (lm, lu) = params.joint_log_densities(row);
    if !lm.is_finite() && !lu.is_finite() || lm.is_nan() || lu.is_nan() {
        let p = params.prior;
        return Posterior {
            matched: p,
            unmatched: 1.0 - p,
            log_odds: p.ln() - (1.0 - p).ln(),
            degenerate: true,
        };
    }
    let log_odds = lm - lu;
    Posterior {
        matched: sigmoid(log_odds),
        unmatched: sigmoid(-log_odds),
        log_odds,
        degenerate: false,
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn posterior_match(gamma: &SimilarityVector, params: &ModelParams) -> Posterior {
    posterior_row(&gamma.components(), params)
}

/// Log posterior odds of the matched component, clamped to `±700`.
pub fn matching_score(gamma: &SimilarityVector, params: &ModelParams) -> f64 {
    score_row(&gamma.components(), params)
}

pub fn score_row(row: &[Option<f64>], params: &ModelParams) -> f64 {
    let lo = posterior_row(row, params).log_odds;
    if lo.is_nan() {
        0.0
    } else {
        lo.clamp(-SCORE_CLAMP, SCORE_CLAMP)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairProvenance {
    Sampled(VertexId, VertexId),
    /// Two random halves of one vertex.
    Split(VertexId),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub vectors: Vec<SimilarityVector>,
    pub provenance: Vec<PairProvenance>,
}

impl TrainingSet {
    pub fn rows(&self) -> Vec<Vec<Option<f64>>> {
        self.vectors.iter().map(|g| g.components().to_vec()).collect()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Sample `ceil(rate * count)` same-name vertex pairs, plus one split pair for
/// every vertex holding at least `2 * min_split` papers.
pub fn sample_training_pairs(
    ctx: &SimilarityContext<'_>,
    rate: f64,
    seed: u64,
    min_split: usize,
) -> Result<TrainingSet, ModelError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(ModelError::BadRate(rate));
    }
    let net = ctx.network;
    let mut candidates: Vec<(VertexId, VertexId)> = Vec::new();
    for name in net.names() {
        let vs: Vec<VertexId> = net.vertices_named(name).collect();
        for (i, &u) in vs.iter().enumerate() {
            for &v in &vs[i + 1..] {
                candidates.push((u, v));
            }
        }
    }
    let splittable: Vec<VertexId> = net
        .vertex_ids()
        .filter(|&v| net.papers_of(v).len() >= 2 * min_split.max(1))
        .collect();
    if candidates.is_empty() && splittable.is_empty() {
        return Err(ModelError::FittingImpossible);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = ((rate * candidates.len() as f64).ceil() as usize).min(candidates.len());
    let mut chosen = rand::seq::index::sample(&mut rng, candidates.len(), take).into_vec();
    chosen.sort_unstable();

    let mut set = TrainingSet::default();
    let mut cache: HashMap<VertexId, VertexFeatures> = HashMap::new();
    for i in chosen {
        let (u, v) = candidates[i];
        for w in [u, v] {
            if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(w) {
                if let Ok(f) = ctx.features(w) {
                    e.insert(f);
                }
            }
        }
        let (Some(fu), Some(fv)) = (cache.get(&u), cache.get(&v)) else { continue };
        if let Ok(g) = ctx.vector_from_features(fu, fv) {
            set.vectors.push(g);
            set.provenance.push(PairProvenance::Sampled(u, v));
        }
    }

    if !splittable.is_empty() {
        let mut work = net.clone();
        for v in splittable {
            let mut papers: Vec<_> = work.papers_of(v).iter().copied().collect();
            papers.shuffle(&mut rng);
            let moved = papers[..papers.len() / 2].iter().copied().collect();
            let fresh = work.split_vertex(v, &moved);
            let split_ctx = SimilarityContext { network: &work, ..*ctx };
            if let Ok(g) = split_ctx.similarity_vector(v, fresh) {
                set.vectors.push(g);
                set.provenance.push(PairProvenance::Split(v));
            }
            work.merge_vertices(v, fresh)
                .expect("split halves share a name");
        }
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmOptions {
    /// Relative log-likelihood improvement below which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    pub init_prior: f64,
    /// Fraction of vectors (largest l1 norm) seeding the matched component.
    pub init_top_fraction: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tol: 1e-6,
            max_iter: 200,
            init_prior: 0.1,
            init_top_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub params: ModelParams,
    /// Observed-data log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    /// Number of M-steps performed in the successful attempt.
    pub iterations: usize,
    pub converged: bool,
    pub restarts: usize,
}

/// Observed-data log-likelihood of `rows` under `params`.
pub fn log_likelihood(rows: &[Vec<Option<f64>>], params: &ModelParams) -> f64 {
    rows.iter()
        .map(|r| {
            let (lm, lu) = params.joint_log_densities(r);
            log_sum_exp(lm, lu)
        })
        .sum()
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn e_step(rows: &[Vec<Option<f64>>], params: &ModelParams) -> (Vec<f64>, f64) {
    let mut ll = 0.0;
    let resp = rows
        .iter()
        .map(|r| {
            let (lm, lu) = params.joint_log_densities(r);
            ll += log_sum_exp(lm, lu);
            sigmoid(lm - lu)
        })
        .collect();
    (resp, ll)
}

/// Weighted maximum-likelihood estimate of one feature's distribution.
/// `edges` is used for multinomial families. Returns `None` when the weights
/// carry no mass on this feature.
pub fn weighted_mle(
    tag: FamilyTag,
    values: &[(f64, f64)],
    edges: Option<&[f64]>,
) -> Option<FeatureFamily> {
    let w: f64 = values.iter().map(|(_, w)| w).sum();
    if !(w > 0.0) {
        return None;
    }
    Some(match tag {
        FamilyTag::Gaussian => {
            let mean = values.iter().map(|(x, wt)| wt * x).sum::<f64>() / w;
            let var = values.iter().map(|(x, wt)| wt * (x - mean).powi(2)).sum::<f64>() / w;
            FeatureFamily::Gaussian {
                mean,
                var: var.max(VAR_FLOOR),
            }
        }
        FamilyTag::Exponential => {
            let s: f64 = values.iter().map(|(x, wt)| wt * x.max(EXP_ZERO_SHIFT)).sum();
            FeatureFamily::Exponential { rate: w / s }
        }
        FamilyTag::Multinomial { bins } => {
            let edges = edges.expect("multinomial needs bin edges").to_vec();
            let mut counts = vec![0.0; bins];
            for (x, wt) in values {
                counts[bin_of(&edges, *x)] += wt;
            }
            let total = w + MULTINOMIAL_PSEUDO_COUNT * bins as f64;
            let probs = counts
                .into_iter()
                .map(|c| (c + MULTINOMIAL_PSEUDO_COUNT) / total)
                .collect();
            FeatureFamily::Multinomial { edges, probs }
        }
    })
}

fn fallback_family(tag: FamilyTag, edges: Option<&[f64]>) -> FeatureFamily {
    match tag {
        FamilyTag::Gaussian => FeatureFamily::Gaussian { mean: 0.0, var: 1.0 },
        FamilyTag::Exponential => FeatureFamily::Exponential { rate: 1.0 },
        FamilyTag::Multinomial { bins } => FeatureFamily::Multinomial {
            edges: edges.expect("edges").to_vec(),
            probs: vec![1.0 / bins as f64; bins],
        },
    }
}

fn bin_edges(rows: &[Vec<Option<f64>>], feature: usize, bins: usize) -> Vec<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        if let Some(x) = r[feature] {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    (0..=bins)
        .map(|b| lo + (hi - lo) * b as f64 / bins as f64)
        .collect()
}

/// M-step: component parameters from responsibilities. `previous` supplies
/// values for features with no weighted mass.
fn m_step(
    rows: &[Vec<Option<f64>>],
    resp: &[f64],
    families: &[FamilyTag],
    edges: &[Option<Vec<f64>>],
    prior: f64,
    previous: Option<&ModelParams>,
) -> ModelParams {
    let mut matched = Vec::with_capacity(families.len());
    let mut unmatched = Vec::with_capacity(families.len());
    for (i, &tag) in families.iter().enumerate() {
        let e = edges[i].as_deref();
        let present: Vec<(f64, f64)> = rows
            .iter()
            .zip(resp)
            .filter_map(|(r, &l)| r[i].map(|x| (x, l)))
            .collect();
        let m_vals: Vec<(f64, f64)> = present.iter().map(|&(x, l)| (x, l)).collect();
        let u_vals: Vec<(f64, f64)> = present.iter().map(|&(x, l)| (x, 1.0 - l)).collect();
        matched.push(weighted_mle(tag, &m_vals, e).unwrap_or_else(|| {
            previous.map_or_else(|| fallback_family(tag, e), |p| p.matched[i].clone())
        }));
        unmatched.push(weighted_mle(tag, &u_vals, e).unwrap_or_else(|| {
            previous.map_or_else(|| fallback_family(tag, e), |p| p.unmatched[i].clone())
        }));
    }
    ModelParams {
        prior,
        matched,
        unmatched,
    }
}

/// Initial parameters: the `top_fraction` of vectors with the largest l1 norm
/// seed the matched component, the rest the unmatched one.
pub fn initial_params(
    rows: &[Vec<Option<f64>>],
    families: &[FamilyTag],
    prior: f64,
    top_fraction: f64,
) -> ModelParams {
    let edges = layout(rows, families);
    let mut order: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .map(|(j, r)| (j, r.iter().flatten().map(|x| x.abs()).sum::<f64>()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let top = ((top_fraction * rows.len() as f64).ceil() as usize).clamp(1, rows.len().saturating_sub(1).max(1));
    let mut resp = vec![0.0; rows.len()];
    for &(j, _) in &order[..top] {
        resp[j] = 1.0;
    }
    m_step(rows, &resp, families, &edges, prior, None)
}

fn layout(rows: &[Vec<Option<f64>>], families: &[FamilyTag]) -> Vec<Option<Vec<f64>>> {
    families
        .iter()
        .enumerate()
        .map(|(i, t)| match t {
            FamilyTag::Multinomial { bins } => Some(bin_edges(rows, i, *bins)),
            _ => None,
        })
        .collect()
}

fn edges_of(params: &ModelParams) -> Vec<Option<Vec<f64>>> {
    params
        .matched
        .iter()
        .map(|f| match f {
            FeatureFamily::Multinomial { edges, .. } => Some(edges.clone()),
            _ => None,
        })
        .collect()
}

/// Fit the mixture by EM. `init` overrides the default initialization.
pub fn em_fit_rows(
    rows: &[Vec<Option<f64>>],
    families: &[FamilyTag],
    init: Option<&ModelParams>,
    opts: &EmOptions,
) -> Result<FitReport, ModelError> {
    if rows.len() < 2 {
        return Err(ModelError::TooFewVectors(rows.len()));
    }
    if !(opts.tol > 0.0) {
        return Err(ModelError::BadTolerance(opts.tol));
    }
    for r in rows {
        if r.len() != families.len() {
            return Err(ModelError::FamilyCount {
                expected: r.len(),
                found: families.len(),
            });
        }
    }
    if let Some(p) = init {
        p.validate()?;
        if p.families() != families {
            return Err(ModelError::InvalidParams("init families differ from requested".into()));
        }
    }

    let n = rows.len() as f64;
    // restart schedule: (prior, top fraction)
    let schedule = [
        (opts.init_prior, opts.init_top_fraction),
        (0.2, 0.2),
        (0.3, 0.3),
        (0.5, 0.5),
    ];
    for (attempt, &(prior, frac)) in schedule.iter().enumerate().take(MAX_RESTARTS + 1) {
        let mut params = match (attempt, init) {
            (0, Some(p)) => p.clone(),
            _ => initial_params(rows, families, prior, frac),
        };
        let edges = edges_of(&params);
        let mut trace: Vec<f64> = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        let mut degenerate = false;
        loop {
            let (resp, ll) = e_step(rows, &params);
            if let Some(&prev) = trace.last() {
                if ll - prev < opts.tol * prev.abs().max(1.0) {
                    trace.push(ll);
                    converged = true;
                    break;
                }
            }
            trace.push(ll);
            if iterations == opts.max_iter {
                break;
            }
            let mass: f64 = resp.iter().sum();
            if mass < 1e-9 * n || n - mass < 1e-9 * n {
                degenerate = true;
                break;
            }
            params = m_step(rows, &resp, families, &edges, mass / n, Some(&params));
            iterations += 1;
        }
        if degenerate || params.validate().is_err() {
            continue;
        }
        return Ok(FitReport {
            params,
            log_likelihood: trace,
            iterations,
            converged,
            restarts: attempt,
        });
    }
    Err(ModelError::Degenerate(MAX_RESTARTS))
}

pub fn em_fit(
    training: &TrainingSet,
    families: &[FamilyTag],
    init: Option<&ModelParams>,
    opts: &EmOptions,
) -> Result<FitReport, ModelError> {
    em_fit_rows(&training.rows(), families, init, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(mean: f64, var: f64) -> FeatureFamily {
        FeatureFamily::Gaussian { mean, var }
    }

    #[test]
    fn equal_densities_give_half() {
        let p = ModelParams {
            prior: 0.5,
            matched: vec![g(0.0, 1.0)],
            unmatched: vec![g(0.0, 1.0)],
        };
        let post = posterior_row(&[Some(0.3)], &p);
        assert_eq!(post.matched, 0.5);
        assert_eq!(score_row(&[Some(0.3)], &p), 0.0);
    }

    #[test]
    fn prior_domination() {
        let p = ModelParams {
            prior: 1.0 - 1e-12,
            matched: vec![g(0.0, 1.0), FeatureFamily::Exponential { rate: 2.0 }],
            unmatched: vec![g(0.5, 1.0), FeatureFamily::Exponential { rate: 1.0 }],
        };
        for x in [-2.0, 0.0, 0.7, 3.0] {
            assert!(posterior_row(&[Some(x), Some(x.abs())], &p).matched >= 1.0 - 1e-6);
        }
    }

    #[test]
    fn hand_computed_posterior() {
        let p = ModelParams {
            prior: 0.3,
            matched: vec![g(1.0, 0.25), FeatureFamily::Exponential { rate: 0.5 }],
            unmatched: vec![g(0.0, 1.0), FeatureFamily::Exponential { rate: 3.0 }],
        };
        let (x1, x2) = (0.8f64, 1.2f64);
        let npdf = |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let fm = npdf(x1, 1.0, 0.25) * 0.5 * (-0.5 * x2).exp();
        let fu = npdf(x1, 0.0, 1.0) * 3.0 * (-3.0 * x2).exp();
        let expected = 0.3 * fm / (0.3 * fm + 0.7 * fu);
        let post = posterior_row(&[Some(x1), Some(x2)], &p);
        assert!((post.matched - expected).abs() < 1e-12);
        assert!((post.matched + post.unmatched - 1.0).abs() < 1e-12);
        // missing second feature drops its factor
        let fm1 = npdf(x1, 1.0, 0.25);
        let fu1 = npdf(x1, 0.0, 1.0);
        let expected1 = 0.3 * fm1 / (0.3 * fm1 + 0.7 * fu1);
        assert!((posterior_row(&[Some(x1), None], &p).matched - expected1).abs() < 1e-12);
    }

    #[test]
    fn score_of_point_nine() {
        // densities chosen so that p f_M / ((1-p) f_U) = 9 with p = 0.5
        let p = ModelParams {
            prior: 0.5,
            matched: vec![FeatureFamily::Exponential { rate: 9.0 }],
            unmatched: vec![FeatureFamily::Exponential { rate: 1.0 }],
        };
        // at x = 0 (shifted by 1e-9): ln 9 - 8e-9
        let s = score_row(&[Some(0.0)], &p);
        assert!((s - 9f64.ln()).abs() < 1e-6);
        let post = posterior_row(&[Some(0.0)], &p).matched;
        assert!((post - 0.9).abs() < 1e-6);
    }

    #[test]
    fn nan_input_falls_back_to_prior() {
        let p = ModelParams {
            prior: 0.2,
            matched: vec![g(0.0, 1.0)],
            unmatched: vec![g(1.0, 1.0)],
        };
        let post = posterior_row(&[Some(f64::NAN)], &p);
        assert!(post.degenerate);
        assert_eq!(post.matched, 0.2);
    }

    #[test]
    fn family_tags_parse() {
        assert_eq!(
            parse_families("gaussian, exponential,multinomial:4").unwrap(),
            vec![
                FamilyTag::Gaussian,
                FamilyTag::Exponential,
                FamilyTag::Multinomial { bins: 4 }
            ]
        );
        assert!(parse_families("poisson").is_err());
        assert_eq!(FamilyTag::Multinomial { bins: 3 }.to_string().parse::<FamilyTag>().unwrap(), FamilyTag::Multinomial { bins: 3 });
    }

    #[test]
    fn model_text_round_trip() {
        let p = ModelParams {
            prior: 0.123456789,
            matched: vec![
                g(0.1, 0.02),
                FeatureFamily::Exponential { rate: 3.25 },
                FeatureFamily::Multinomial {
                    edges: vec![0.0, 0.5, 1.0],
                    probs: vec![0.25, 0.75],
                },
            ],
            unmatched: vec![
                g(-0.3, 1e-6),
                FeatureFamily::Exponential { rate: 1.0 / 3.0 },
                FeatureFamily::Multinomial {
                    edges: vec![0.0, 0.5, 1.0],
                    probs: vec![0.6, 0.4],
                },
            ],
        };
        let text = p.to_text();
        assert_eq!(ModelParams::from_text(&text).unwrap(), p);
        assert!(ModelParams::from_text("bogus\n").is_err());
        assert!(ModelParams::from_text("collab-disambig-model v1\nprior 1.5\n").is_err());
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let fams = [FamilyTag::Gaussian];
        assert_eq!(
            em_fit_rows(&[vec![Some(1.0)]], &fams, None, &EmOptions::default()),
            Err(ModelError::TooFewVectors(1))
        );
        let opts = EmOptions { tol: 0.0, ..Default::default() };
        assert_eq!(
            em_fit_rows(&[vec![Some(1.0)], vec![Some(2.0)]], &fams, None, &opts),
            Err(ModelError::BadTolerance(0.0))
        );
    }

    #[test]
    fn multinomial_fit_sums_to_one() {
        let rows: Vec<Vec<Option<f64>>> = (0..200)
            .map(|i| vec![Some(if i % 3 == 0 { 0.9 } else { 0.1 + (i % 7) as f64 * 0.01 })])
            .collect();
        let fams = [FamilyTag::Multinomial { bins: 5 }];
        let fit = em_fit_rows(&rows, &fams, None, &EmOptions::default()).unwrap();
        fit.params.validate().unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-6);
        }
    }
}
