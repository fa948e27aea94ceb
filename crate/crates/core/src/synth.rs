//! Synthetic bibliographies with known authorship.
//!
//! Authors belong to topics and to small teams of stable collaborators. Team
//! productivity is heavy-tailed. A configurable number of names is shared by
//! several distinct authors.

use std::collections::{BTreeSet, HashSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PaperRecord;
use crate::eval::GoldLabels;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_papers: usize,
    pub n_topics: usize,
    pub n_teams: usize,
    /// Names shared by two to four authors each.
    pub ambiguous_names: usize,
    /// Probability that the authors sharing a name work on one topic;
    /// otherwise their topics are pairwise distinct.
    pub same_topic_collision: f64,
    /// Probability that a paper is written with the lead author's team
    /// rather than with occasional co-authors.
    pub team_paper_rate: f64,
    /// Probability that a team paper adds one co-author from outside the team.
    pub outsider_rate: f64,
    /// Tail index of the author productivity distribution.
    pub productivity_tail: f64,
    pub words_per_topic: usize,
    pub venues_per_topic: usize,
    pub first_year: i32,
    pub last_year: i32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_papers: 2400,
            n_topics: 12,
            n_teams: 220,
            ambiguous_names: 120,
            same_topic_collision: 0.0,
            team_paper_rate: 0.5,
            outsider_rate: 0.3,
            productivity_tail: 1.6,
            words_per_topic: 60,
            venues_per_topic: 6,
            first_year: 1990,
            last_year: 2020,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthAuthor {
    pub id: String,
    pub name: String,
    pub topic: usize,
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub records: Vec<PaperRecord>,
    pub authors: Vec<SynthAuthor>,
    pub gold: GoldLabels,
}

impl SynthCorpus {
    pub fn corpus_text(&self) -> String {
        self.records.iter().map(|r| r.to_line() + "\n").collect()
    }

    /// Names carried by more than one author.
    pub fn ambiguous_names(&self) -> BTreeSet<String> {
        let mut seen = HashSet::new();
        let mut dup = BTreeSet::new();
        for a in &self.authors {
            if !seen.insert(a.name.as_str()) {
                dup.insert(a.name.clone());
            }
        }
        dup
    }
}

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "gr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const GIVEN: &[&str] = &[
    "Ana", "Bo", "Chen", "Dara", "Eli", "Femi", "Gita", "Hao", "Ines", "Jun", "Kai", "Lena", "Mei", "Nico",
    "Omar", "Pia", "Quan", "Ravi", "Sara", "Tomas", "Uma", "Vera", "Wei", "Xin", "Yara", "Zoe",
];
const FILLER: &[&str] = &["analysis", "approach", "method", "study", "model", "towards", "framework"];

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables)
        .map(|_| format!("{}{}", ONSETS.choose(rng).unwrap(), VOWELS.choose(rng).unwrap()))
        .collect()
}

fn fresh_word(rng: &mut ChaCha8Rng, used: &mut HashSet<String>, syllables: usize) -> String {
    loop {
        let w = pseudo_word(rng, syllables);
        if used.insert(w.clone()) {
            return w;
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

struct Team {
    members: Vec<usize>,
}

/// Per-author writing habits.
struct Profile {
    team: usize,
    signature: Vec<usize>,
    venues: Vec<usize>,
    start: i32,
    end: i32,
}

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut used = HashSet::new();
    for w in FILLER {
        used.insert(w.to_string());
    }
    let vocab: Vec<Vec<String>> = (0..cfg.n_topics)
        .map(|_| {
            (0..cfg.words_per_topic)
                .map(|_| fresh_word(&mut rng, &mut used, 3))
                .collect()
        })
        .collect();
    let venues: Vec<Vec<String>> = (0..cfg.n_topics)
        .map(|_| {
            (0..cfg.venues_per_topic)
                .map(|_| format!("journal of {}", fresh_word(&mut rng, &mut used, 2)))
                .collect()
        })
        .collect();

    // teams share a topic, a period and part of their vocabulary
    let mut authors: Vec<SynthAuthor> = Vec::new();
    let mut profiles: Vec<Profile> = Vec::new();
    let mut teams: Vec<Team> = Vec::with_capacity(cfg.n_teams);
    let span = cfg.last_year - cfg.first_year;
    for t in 0..cfg.n_teams {
        let topic = t % cfg.n_topics;
        let size = rng.gen_range(2..=6);
        let len = rng.gen_range(4..=span.clamp(4, 12));
        let start = rng.gen_range(cfg.first_year..=cfg.last_year - len);
        let shared: Vec<usize> = (0..4).map(|_| rng.gen_range(0..cfg.words_per_topic)).collect();
        let mut members = Vec::with_capacity(size);
        for _ in 0..size {
            let mut signature = shared.clone();
            signature.extend((0..4).map(|_| rng.gen_range(0..cfg.words_per_topic)));
            let mut vs: Vec<usize> = (0..cfg.venues_per_topic).collect();
            vs.shuffle(&mut rng);
            vs.truncate(2);
            let shift = rng.gen_range(-2..=2);
            profiles.push(Profile {
                team: t,
                signature,
                venues: vs,
                start: (start + shift).max(cfg.first_year),
                end: (start + len + shift).min(cfg.last_year),
            });
            authors.push(SynthAuthor {
                id: format!("A{:05}", authors.len()),
                name: String::new(),
                topic,
            });
            members.push(authors.len() - 1);
        }
        teams.push(Team { members });
    }

    // names: ambiguous groups first, drawn across or within topics
    let mut used_names = HashSet::new();
    let mut fresh_name = |rng: &mut ChaCha8Rng| loop {
        let syllables = rng.gen_range(2..=3);
        let n = format!(
            "{} {}",
            GIVEN.choose(rng).unwrap(),
            capitalize(&pseudo_word(rng, syllables))
        );
        if used_names.insert(n.clone()) {
            return n;
        }
    };
    let mut unnamed: Vec<usize> = (0..authors.len()).collect();
    unnamed.shuffle(&mut rng);
    for _ in 0..cfg.ambiguous_names {
        let k = rng.gen_range(2..=4);
        if unnamed.len() < k {
            break;
        }
        let name = fresh_name(&mut rng);
        let first = unnamed.pop().unwrap();
        let mut group = vec![first];
        let same_topic = rng.gen_bool(cfg.same_topic_collision);
        while group.len() < k {
            let topic = authors[first].topic;
            let fitting: Vec<usize> = (0..unnamed.len())
                .filter(|&i| {
                    let a = unnamed[i];
                    let fits = if same_topic {
                        authors[a].topic == topic
                    } else {
                        group.iter().all(|&g| authors[g].topic != authors[a].topic)
                    };
                    fits && group.iter().all(|&g| profiles[g].team != profiles[a].team)
                })
                .collect();
            let pos = fitting
                .choose(&mut rng)
                .copied()
                .unwrap_or(unnamed.len() - 1);
            group.push(unnamed.swap_remove(pos));
        }
        for a in group {
            authors[a].name = name.clone();
        }
    }
    for a in unnamed {
        authors[a].name = fresh_name(&mut rng);
    }

    let tail = cfg.productivity_tail;
    let weights: Vec<f64> = (0..authors.len())
        .map(|_| (1.0 - rng.gen::<f64>()).powf(-1.0 / tail).min(30.0))
        .collect();
    let pick_lead = WeightedIndex::new(&weights).expect("positive weights");
    let by_topic: Vec<Vec<usize>> = (0..cfg.n_topics)
        .map(|t| (0..authors.len()).filter(|&a| authors[a].topic == t).collect())
        .collect();

    let mut records = Vec::with_capacity(cfg.n_papers);
    let mut gold = GoldLabels::default();
    for i in 0..cfg.n_papers {
        let lead = pick_lead.sample(&mut rng);
        let profile = &profiles[lead];
        let topic = authors[lead].topic;
        let mut chosen = vec![lead];
        if rng.gen_bool(cfg.team_paper_rate) {
            let mut others: Vec<usize> = teams[profile.team]
                .members
                .iter()
                .copied()
                .filter(|&a| a != lead)
                .collect();
            others.shuffle(&mut rng);
            let k = rng.gen_range(1..=others.len().min(3));
            chosen.extend_from_slice(&others[..k]);
            if rng.gen_bool(cfg.outsider_rate) {
                chosen.push(*by_topic[topic].choose(&mut rng).unwrap());
            }
        } else {
            for _ in 0..rng.gen_range(0..=2) {
                chosen.push(*by_topic[topic].choose(&mut rng).unwrap());
            }
        }
        let mut names = HashSet::new();
        chosen.retain(|&a| names.insert(authors[a].name.clone()));

        let n_words = rng.gen_range(4..=7);
        let words: Vec<&str> = (0..n_words)
            .map(|_| {
                let r: f64 = rng.gen();
                if r < 0.5 {
                    vocab[topic][*profile.signature.choose(&mut rng).unwrap()].as_str()
                } else if r < 0.85 {
                    vocab[topic].choose(&mut rng).unwrap().as_str()
                } else {
                    FILLER.choose(&mut rng).unwrap()
                }
            })
            .collect();
        let venue = if rng.gen_bool(0.75) {
            &venues[topic][*profile.venues.choose(&mut rng).unwrap()]
        } else {
            venues[topic].choose(&mut rng).unwrap()
        };
        let paper_id = format!("P{i:05}");
        for &a in &chosen {
            gold.labels
                .insert((paper_id.clone(), authors[a].name.clone()), authors[a].id.clone());
        }
        records.push(PaperRecord {
            paper_id,
            year: rng.gen_range(profile.start..=profile.end),
            venue: venue.clone(),
            title: words.join(" "),
            authors: chosen.iter().map(|&a| authors[a].name.clone()).collect(),
        });
    }
    SynthCorpus {
        records,
        authors,
        gold,
    }
}
