//! Browser demo: each operation takes plain numbers and returns a JSON
//! string, so the page needs no bindings beyond `wasm-bindgen`.

use collab_disambig::corpus::{CorpusIndex, CorpusOptions};
use collab_disambig::model::{em_fit_rows, EmOptions, FamilyTag, FeatureFamily};
use collab_disambig::pipeline::{run_on_corpus, RunConfig};
use collab_disambig::scn::cooccurrence_tail_probability;
use collab_disambig::similarity::EmbeddingTable;
use collab_disambig::synth::{generate, SynthConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct TailPoint {
    pub x: u64,
    pub p: f64,
}

#[derive(Serialize)]
pub struct TailCurve {
    pub points: Vec<TailPoint>,
    pub expected: f64,
}

/// Chance of seeing at least `x` joint papers for two names with `n_a` and
/// `n_b` papers among `n`, for `x = 0..=max_x`.
pub fn tail_curve(n_a: u64, n_b: u64, n: u64, max_x: u64) -> Result<TailCurve, String> {
    let points = (0..=max_x)
        .map(|x| {
            cooccurrence_tail_probability(n_a, n_b, n, x)
                .map(|p| TailPoint { x, p })
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    Ok(TailCurve {
        points,
        expected: n_a as f64 * n_b as f64 / n as f64,
    })
}

#[derive(Serialize)]
pub struct Component {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Serialize)]
pub struct EmDemo {
    pub samples: Vec<f64>,
    pub prior: f64,
    pub matched: Component,
    pub unmatched: Component,
    pub iterations: usize,
    pub restarts: usize,
    pub log_likelihood: Vec<f64>,
}

fn component(f: &FeatureFamily) -> Component {
    match f {
        FeatureFamily::Gaussian { mean, var } => Component {
            mean: *mean,
            sd: var.sqrt(),
        },
        _ => Component { mean: f64::NAN, sd: f64::NAN },
    }
}

/// Draw `n` values from a two-Gaussian mixture and fit it back.
pub fn em_demo(mean_m: f64, mean_u: f64, sd: f64, prior: f64, n: usize, seed: u64) -> Result<EmDemo, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = Bernoulli::new(prior).map_err(|e| e.to_string())?;
    let m = Normal::new(mean_m, sd).map_err(|e| e.to_string())?;
    let u = Normal::new(mean_u, sd).map_err(|e| e.to_string())?;
    let samples: Vec<f64> = (0..n)
        .map(|_| if pick.sample(&mut rng) { m.sample(&mut rng) } else { u.sample(&mut rng) })
        .collect();
    let rows: Vec<Vec<Option<f64>>> = samples.iter().map(|&x| vec![Some(x)]).collect();
    let fit = em_fit_rows(&rows, &[FamilyTag::Gaussian], None, &EmOptions::default()).map_err(|e| e.to_string())?;
    Ok(EmDemo {
        samples,
        prior: fit.params.prior,
        matched: component(&fit.params.matched[0]),
        unmatched: component(&fit.params.unmatched[0]),
        iterations: fit.iterations,
        restarts: fit.restarts,
        log_likelihood: fit.log_likelihood,
    })
}

#[derive(Serialize)]
pub struct StageMetrics {
    pub a: f64,
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

#[derive(Serialize)]
pub struct SynthRun {
    pub papers: usize,
    pub ambiguous_names: usize,
    pub relations: usize,
    pub scn_vertices: usize,
    pub gcn_vertices: usize,
    pub merges: usize,
    pub stage1: StageMetrics,
    pub stage2: StageMetrics,
}

/// Generate a planted corpus and run both stages on it.
pub fn synth_run(papers: usize, ambiguous: usize, eta: u32, delta: f64, seed: u64) -> Result<SynthRun, String> {
    let s = generate(&SynthConfig {
        seed,
        n_papers: papers,
        n_teams: (papers / 11).max(4),
        ambiguous_names: ambiguous,
        ..Default::default()
    });
    let mut cfg = RunConfig::default();
    cfg.eta = eta;
    cfg.delta = delta;
    let corpus = CorpusIndex::from_records(s.records.clone(), CorpusOptions::with_cutoff(cfg.freq_cutoff))
        .map_err(|e| e.to_string())?;
    let emb = EmbeddingTable::hashed_for_corpus(&corpus, cfg.embedding_dim, cfg.seed).map_err(|e| e.to_string())?;
    let out = run_on_corpus(&cfg, corpus, emb, Some(&s.gold)).map_err(|e| e.to_string())?;
    let m = &out.manifest;
    let stage = |x: Option<collab_disambig::eval::MicroMetrics>| {
        let x = x.unwrap_or_default();
        StageMetrics {
            a: x.micro_a,
            p: x.micro_p,
            r: x.micro_r,
            f: x.micro_f,
        }
    };
    Ok(SynthRun {
        papers: m.counts.papers,
        ambiguous_names: s.ambiguous_names().len(),
        relations: m.counts.scrs,
        scn_vertices: m.counts.scn_vertices,
        gcn_vertices: m.counts.gcn_vertices,
        merges: m.counts.merges,
        stage1: stage(m.stage1_metrics),
        stage2: stage(m.stage2_metrics),
    })
}

fn json<T: Serialize>(r: Result<T, String>) -> String {
    match r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())) {
        Ok(s) => s,
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[wasm_bindgen(js_name = tailCurve)]
pub fn tail_curve_js(n_a: f64, n_b: f64, n: f64, max_x: f64) -> String {
    json(tail_curve(n_a as u64, n_b as u64, n as u64, max_x as u64))
}

#[wasm_bindgen(js_name = emDemo)]
pub fn em_demo_js(mean_m: f64, mean_u: f64, sd: f64, prior: f64, n: f64, seed: f64) -> String {
    json(em_demo(mean_m, mean_u, sd, prior, n as usize, seed as u64))
}

#[wasm_bindgen(js_name = synthRun)]
pub fn synth_run_js(papers: f64, ambiguous: f64, eta: f64, delta: f64, seed: f64) -> String {
    json(synth_run(papers as usize, ambiguous as usize, eta as u32, delta, seed as u64))
}
