//! Pairwise micro metrics against gold author labels.

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusIndex, NameId};
use crate::network::CollabNetwork;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold line {line}: expected `paper_id<TAB>name<TAB>author_id`")]
    Format { line: usize },
    #[error("gold line {line}: ({paper_id}, {name}) labelled twice")]
    Duplicate { line: usize, paper_id: String, name: String },
    #[error("gold item ({paper_id}, {name}) is not an author slot of the corpus")]
    UnknownItem { paper_id: String, name: String },
    #[error("gold item ({paper_id}, {name}) has no predicted vertex")]
    MissingPrediction { paper_id: String, name: String },
}

/// An author slot: paper id and name.
pub type Item = (String, String);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldLabels {
    pub labels: BTreeMap<Item, String>,
}

impl GoldLabels {
    pub fn parse(text: &str) -> Result<Self, EvalError> {
        let mut labels = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').map(str::trim).collect();
            if f.len() != 3 || f.iter().any(|s| s.is_empty()) {
                return Err(EvalError::Format { line: i + 1 });
            }
            let key = (f[0].to_string(), f[1].to_string());
            if labels.insert(key, f[2].to_string()).is_some() {
                return Err(EvalError::Duplicate {
                    line: i + 1,
                    paper_id: f[0].to_string(),
                    name: f[1].to_string(),
                });
            }
        }
        Ok(GoldLabels { labels })
    }

    pub fn to_text(&self) -> String {
        self.labels
            .iter()
            .map(|((p, n), a)| format!("{p}\t{n}\t{a}\n"))
            .collect()
    }

    /// Every labelled item must be an author slot of `corpus`.
    pub fn validate(&self, corpus: &CorpusIndex) -> Result<(), EvalError> {
        for (paper_id, name) in self.labels.keys() {
            let ok = corpus.paper_idx(paper_id).is_some_and(|p| {
                corpus
                    .name_id(name)
                    .is_some_and(|n| corpus.authors(p).contains(&n))
            });
            if !ok {
                return Err(EvalError::UnknownItem {
                    paper_id: paper_id.clone(),
                    name: name.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Keep only the labels whose item satisfies `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&Item) -> bool) -> Self {
        GoldLabels {
            labels: self
                .labels
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

/// Predicted cluster id of every assigned author slot.
pub type Prediction = HashMap<Item, u64>;

pub fn partition_from_network(network: &CollabNetwork, corpus: &CorpusIndex) -> Prediction {
    let mut out = HashMap::new();
    for v in network.vertex_ids() {
        let name = corpus.name(network.name_of(v));
        for &p in network.papers_of(v) {
            out.insert(
                (corpus.paper(p).paper_id.clone(), name.to_string()),
                u64::from(v.0),
            );
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MicroMetrics {
    pub micro_a: f64,
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl MicroMetrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        let total = tp + fp + fn_ + tn;
        let micro_p = ratio(tp, tp + fp);
        let micro_r = ratio(tp, tp + fn_);
        let micro_f = if micro_p + micro_r > 0.0 {
            2.0 * micro_p * micro_r / (micro_p + micro_r)
        } else {
            0.0
        };
        MicroMetrics {
            micro_a: ratio(tp + tn, total),
            micro_p,
            micro_r,
            micro_f,
            tp,
            fp,
            fn_,
            tn,
        }
    }

    pub fn total_pairs(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Classify every unordered pair of same-name labelled items and pool the
/// counts over names.
pub fn micro_metrics(predicted: &Prediction, gold: &GoldLabels) -> Result<MicroMetrics, EvalError> {
    // name -> (predicted cluster, gold author) -> count
    let mut tables: BTreeMap<&str, HashMap<(u64, &str), u64>> = BTreeMap::new();
    for ((paper_id, name), author) in &gold.labels {
        let key = (paper_id.clone(), name.clone());
        let cluster = *predicted.get(&key).ok_or_else(|| EvalError::MissingPrediction {
            paper_id: paper_id.clone(),
            name: name.clone(),
        })?;
        *tables
            .entry(name.as_str())
            .or_default()
            .entry((cluster, author.as_str()))
            .or_default() += 1;
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for cells in tables.values() {
        let mut by_pred: HashMap<u64, u64> = HashMap::new();
        let mut by_gold: HashMap<&str, u64> = HashMap::new();
        let mut n = 0;
        let mut both = 0;
        for (&(c, a), &k) in cells {
            *by_pred.entry(c).or_default() += k;
            *by_gold.entry(a).or_default() += k;
            n += k;
            both += pairs(k);
        }
        let same_pred: u64 = by_pred.values().map(|&k| pairs(k)).sum();
        let same_gold: u64 = by_gold.values().map(|&k| pairs(k)).sum();
        tp += both;
        fp += same_pred - both;
        fn_ += same_gold - both;
        tn += pairs(n) + both - same_pred - same_gold;
    }
    Ok(MicroMetrics::from_counts(tp, fp, fn_, tn))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub names: usize,
    pub total_secs: f64,
    pub mean_secs_per_name: f64,
    pub max_secs: f64,
}

pub fn timing_summary(times: &BTreeMap<NameId, Duration>) -> TimingSummary {
    let secs: Vec<f64> = times.values().map(Duration::as_secs_f64).collect();
    let total: f64 = secs.iter().sum();
    TimingSummary {
        names: secs.len(),
        total_secs: total,
        mean_secs_per_name: if secs.is_empty() { 0.0 } else { total / secs.len() as f64 },
        max_secs: secs.iter().copied().fold(0.0, f64::max),
    }
}

/// Per-name timing rows `name<TAB>seconds`.
pub fn timing_text(times: &BTreeMap<NameId, Duration>, corpus: &CorpusIndex) -> String {
    times
        .iter()
        .map(|(&n, d)| format!("{}\t{:.6}\n", corpus.name(n), d.as_secs_f64()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(p: &str, n: &str) -> Item {
        (p.to_string(), n.to_string())
    }

    #[test]
    fn perfect_and_singletons() {
        let gold = GoldLabels::parse("p1\tx\tA\np2\tx\tA\np3\tx\tB\np4\ty\tC\n").unwrap();
        let perfect: Prediction = [
            (item("p1", "x"), 1),
            (item("p2", "x"), 1),
            (item("p3", "x"), 2),
            (item("p4", "y"), 3),
        ]
        .into_iter()
        .collect();
        let m = micro_metrics(&perfect, &gold).unwrap();
        assert_eq!((m.micro_a, m.micro_p, m.micro_r, m.micro_f), (1.0, 1.0, 1.0, 1.0));
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (1, 0, 0, 2));

        let singletons: Prediction = perfect.keys().cloned().zip(10..).collect();
        let m = micro_metrics(&singletons, &gold).unwrap();
        assert_eq!((m.micro_p, m.micro_r, m.micro_f), (1.0, 0.0, 0.0));
    }

    #[test]
    fn missing_prediction_is_named() {
        let gold = GoldLabels::parse("p1\tx\tA\n").unwrap();
        assert_eq!(
            micro_metrics(&Prediction::new(), &gold),
            Err(EvalError::MissingPrediction {
                paper_id: "p1".into(),
                name: "x".into()
            })
        );
    }

    #[test]
    fn gold_format_errors() {
        assert_eq!(GoldLabels::parse("p1\tx\n"), Err(EvalError::Format { line: 1 }));
        assert!(matches!(
            GoldLabels::parse("p1\tx\tA\np1\tx\tB\n"),
            Err(EvalError::Duplicate { line: 2, .. })
        ));
    }
}
