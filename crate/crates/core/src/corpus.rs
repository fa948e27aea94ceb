//! Corpus ingestion and indexing.
//!
//! A corpus file holds one paper per line with five tab-separated fields:
//!
//! ```text
//! <paper_id> \t <year> \t <venue> \t <title> \t <author>; <author>; ...
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Venues are case-folded
//! and whitespace-collapsed on ingestion; author names are trimmed but
//! otherwise kept verbatim.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Bundled English stopword list, one token per line.
pub const DEFAULT_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Default document-frequency fraction above which a title word is "frequent".
pub const DEFAULT_FREQ_CUTOFF: f64 = 0.05;

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

/// Dense index of a paper inside a [`CorpusIndex`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct PaperIdx(pub u32);

/// Interned author name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct NameId(pub u32);

impl PaperIdx {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl NameId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaperRecord {
    pub paper_id: String,
    pub year: i32,
    pub venue: String,
    pub title: String,
    pub authors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RecordErrorKind {
    #[error("expected 5 tab-separated fields, found {0}")]
    FieldCount(usize),
    #[error("paper id is empty")]
    EmptyId,
    #[error("paper id {0:?} contains whitespace")]
    InvalidId(String),
    #[error("year {0:?} is not an integer")]
    BadYear(String),
    #[error("year {0} outside [{MIN_YEAR}, {MAX_YEAR}]")]
    YearOutOfRange(i32),
    #[error("venue is empty")]
    EmptyVenue,
    #[error("author list is empty")]
    EmptyAuthors,
    #[error("author list contains an empty name")]
    EmptyName,
    #[error("author {0:?} listed twice")]
    DuplicateName(String),
}

/// A rejected input line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordError {
    pub line: usize,
    pub kind: RecordErrorKind,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.kind)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate paper id {0:?}")]
    DuplicatePaperId(String),
    #[error("invalid record {id:?}: {kind}")]
    InvalidRecord { id: String, kind: RecordErrorKind },
    #[error("frequent-word cutoff must lie in (0, 1], got {0}")]
    BadCutoff(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Collapse runs of whitespace and lowercase.
pub fn normalize_venue(venue: &str) -> String {
    venue
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl PaperRecord {
    /// Parse one corpus line. The venue is normalized; names are trimmed.
    pub fn parse_line(line: &str) -> Result<Self, RecordErrorKind> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(RecordErrorKind::FieldCount(fields.len()));
        }
        let year = fields[1]
            .trim()
            .parse::<i32>()
            .map_err(|_| RecordErrorKind::BadYear(fields[1].trim().to_string()))?;
        let authors = if fields[4].trim().is_empty() {
            Vec::new()
        } else {
            fields[4].split(';').map(|n| n.trim().to_string()).collect()
        };
        let record = PaperRecord {
            paper_id: fields[0].trim().to_string(),
            year,
            venue: normalize_venue(fields[2]),
            title: fields[3].trim().to_string(),
            authors,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), RecordErrorKind> {
        if self.paper_id.is_empty() {
            return Err(RecordErrorKind::EmptyId);
        }
        if self.paper_id.chars().any(char::is_whitespace) {
            return Err(RecordErrorKind::InvalidId(self.paper_id.clone()));
        }
        if !(MIN_YEAR..=MAX_YEAR).contains(&self.year) {
            return Err(RecordErrorKind::YearOutOfRange(self.year));
        }
        if self.venue.is_empty() {
            return Err(RecordErrorKind::EmptyVenue);
        }
        if self.authors.is_empty() {
            return Err(RecordErrorKind::EmptyAuthors);
        }
        let mut seen = HashSet::new();
        for name in &self.authors {
            if name.is_empty() || name.trim() != name {
                return Err(RecordErrorKind::EmptyName);
            }
            if !seen.insert(name.as_str()) {
                return Err(RecordErrorKind::DuplicateName(name.clone()));
            }
        }
        Ok(())
    }

    /// Serialize back into the corpus line format.
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.paper_id,
            self.year,
            self.venue,
            self.title,
            self.authors.join("; ")
        )
    }
}

/// Parse a stopword file: one token per line, `#` comments allowed.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Split on non-alphanumeric characters, lowercase, drop tokens shorter than
/// two characters and stopwords. Duplicates are kept.
pub fn tokenize(title: &str, stopwords: &HashSet<String>) -> Vec<String> {
    title
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .filter(|t| !stopwords.contains(t))
        .collect()
}

#[derive(Clone, Debug)]
pub struct CorpusOptions {
    pub stopwords: HashSet<String>,
    pub freq_cutoff: f64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            freq_cutoff: DEFAULT_FREQ_CUTOFF,
        }
    }
}

impl CorpusOptions {
    pub fn with_cutoff(freq_cutoff: f64) -> Self {
        CorpusOptions {
            freq_cutoff,
            ..Default::default()
        }
    }
}

/// Document frequency of title words and paper counts per venue.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrequencyTables {
    pub word: HashMap<String, u32>,
    pub venue: HashMap<String, u32>,
}

/// Count, for every token, the number of titles containing it, and for every
/// venue the number of papers published there.
pub fn build_frequency_tables<'a, I>(papers: I, stopwords: &HashSet<String>) -> FrequencyTables
where
    I: IntoIterator<Item = &'a PaperRecord>,
{
    let mut tables = FrequencyTables::default();
    for paper in papers {
        tables.add(paper, stopwords);
    }
    tables
}

impl FrequencyTables {
    fn add(&mut self, paper: &PaperRecord, stopwords: &HashSet<String>) {
        let distinct: BTreeSet<String> = tokenize(&paper.title, stopwords).into_iter().collect();
        for word in distinct {
            *self.word.entry(word).or_default() += 1;
        }
        *self.venue.entry(paper.venue.clone()).or_default() += 1;
    }
}

/// Immutable-after-build view of the corpus.
///
/// Papers are stored sorted by id and names are interned in lexicographic
/// order, so two indexes built from the same records in different orders are
/// identical. Papers added later through [`CorpusIndex::insert`] are appended.
#[derive(Clone, Debug)]
pub struct CorpusIndex {
    papers: Vec<PaperRecord>,
    by_id: HashMap<String, PaperIdx>,
    names: Vec<String>,
    name_ids: HashMap<String, NameId>,
    name_to_papers: Vec<BTreeSet<PaperIdx>>,
    paper_names: Vec<Vec<NameId>>,
    keywords: Vec<Vec<String>>,
    freq: FrequencyTables,
    options: CorpusOptions,
}

/// Result of [`parse_corpus`]: the index plus every rejected line.
#[derive(Debug)]
pub struct ParsedCorpus {
    pub index: CorpusIndex,
    pub errors: Vec<RecordError>,
}

/// Parse a line-delimited corpus. Malformed lines are reported in
/// [`ParsedCorpus::errors`]; a duplicate paper id aborts the parse.
pub fn parse_corpus(text: &str, options: CorpusOptions) -> Result<ParsedCorpus, CorpusError> {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match PaperRecord::parse_line(line) {
            Ok(r) => records.push(r),
            Err(kind) => errors.push(RecordError { line: i + 1, kind }),
        }
    }
    let index = CorpusIndex::from_records(records, options)?;
    Ok(ParsedCorpus { index, errors })
}

impl CorpusIndex {
    pub fn from_records(
        mut records: Vec<PaperRecord>,
        options: CorpusOptions,
    ) -> Result<Self, CorpusError> {
        if !(options.freq_cutoff > 0.0 && options.freq_cutoff <= 1.0) {
            return Err(CorpusError::BadCutoff(options.freq_cutoff));
        }
        for r in &records {
            r.validate().map_err(|kind| CorpusError::InvalidRecord {
                id: r.paper_id.clone(),
                kind,
            })?;
        }
        records.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
        if let Some(w) = records.windows(2).find(|w| w[0].paper_id == w[1].paper_id) {
            return Err(CorpusError::DuplicatePaperId(w[0].paper_id.clone()));
        }

        let all_names: BTreeSet<&str> = records
            .iter()
            .flat_map(|r| r.authors.iter().map(String::as_str))
            .collect();
        let names: Vec<String> = all_names.into_iter().map(str::to_string).collect();
        let name_ids: HashMap<String, NameId> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), NameId(i as u32)))
            .collect();

        let freq = build_frequency_tables(&records, &options.stopwords);
        let mut index = CorpusIndex {
            papers: Vec::with_capacity(records.len()),
            by_id: HashMap::with_capacity(records.len()),
            name_to_papers: vec![BTreeSet::new(); names.len()],
            names,
            name_ids,
            paper_names: Vec::with_capacity(records.len()),
            keywords: Vec::with_capacity(records.len()),
            freq,
            options,
        };
        for record in records {
            index.push_record(record);
        }
        index.keywords = (0..index.papers.len())
            .map(|i| index.extract_keywords(&index.papers[i].title))
            .collect();
        Ok(index)
    }

    fn intern(&mut self, name: &str) -> NameId {
        if let Some(&id) = self.name_ids.get(name) {
            return id;
        }
        let id = NameId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.name_ids.insert(name.to_string(), id);
        self.name_to_papers.push(BTreeSet::new());
        id
    }

    fn push_record(&mut self, record: PaperRecord) -> PaperIdx {
        let idx = PaperIdx(self.papers.len() as u32);
        let ids: Vec<NameId> = record.authors.iter().map(|n| self.intern(n)).collect();
        for &n in &ids {
            self.name_to_papers[n.index()].insert(idx);
        }
        self.by_id.insert(record.paper_id.clone(), idx);
        self.paper_names.push(ids);
        self.papers.push(record);
        idx
    }

    /// Add a newly published paper. Frequency tables are updated; keyword
    /// bags of existing papers are left untouched.
    pub fn insert(&mut self, record: PaperRecord) -> Result<PaperIdx, CorpusError> {
        record.validate().map_err(|kind| CorpusError::InvalidRecord {
            id: record.paper_id.clone(),
            kind,
        })?;
        if self.by_id.contains_key(&record.paper_id) {
            return Err(CorpusError::DuplicatePaperId(record.paper_id));
        }
        self.freq.add(&record, &self.options.stopwords);
        let keywords = self.extract_keywords(&record.title);
        let idx = self.push_record(record);
        self.keywords.push(keywords);
        Ok(idx)
    }

    /// Tokens of `title` minus stopwords minus frequent words.
    pub fn extract_keywords(&self, title: &str) -> Vec<String> {
        tokenize(title, &self.options.stopwords)
            .into_iter()
            .filter(|t| !self.is_frequent(t))
            .collect()
    }

    /// A word is frequent when it occurs in more than `cutoff * N` titles and
    /// in at least two of them.
    pub fn is_frequent(&self, word: &str) -> bool {
        let df = self.word_freq(word);
        df >= 2 && f64::from(df) > self.options.freq_cutoff * self.papers.len() as f64
    }

    pub fn n_papers(&self) -> usize {
        self.papers.len()
    }

    pub fn n_names(&self) -> usize {
        self.names.len()
    }

    pub fn papers(&self) -> &[PaperRecord] {
        &self.papers
    }

    pub fn paper(&self, idx: PaperIdx) -> &PaperRecord {
        &self.papers[idx.index()]
    }

    pub fn paper_idx(&self, paper_id: &str) -> Option<PaperIdx> {
        self.by_id.get(paper_id).copied()
    }

    pub fn paper_indices(&self) -> impl Iterator<Item = PaperIdx> {
        (0..self.papers.len() as u32).map(PaperIdx)
    }

    pub fn name(&self, id: NameId) -> &str {
        &self.names[id.index()]
    }

    pub fn name_id(&self, name: &str) -> Option<NameId> {
        self.name_ids.get(name).copied()
    }

    pub fn name_ids(&self) -> impl Iterator<Item = NameId> {
        (0..self.names.len() as u32).map(NameId)
    }

    pub fn papers_of(&self, name: NameId) -> &BTreeSet<PaperIdx> {
        &self.name_to_papers[name.index()]
    }

    /// Interned author list, in the paper's author order.
    pub fn authors(&self, idx: PaperIdx) -> &[NameId] {
        &self.paper_names[idx.index()]
    }

    pub fn keywords(&self, idx: PaperIdx) -> &[String] {
        &self.keywords[idx.index()]
    }

    pub fn word_freq(&self, word: &str) -> u32 {
        self.freq.word.get(word).copied().unwrap_or(0)
    }

    pub fn venue_freq(&self, venue: &str) -> u32 {
        self.freq.venue.get(venue).copied().unwrap_or(0)
    }

    pub fn frequency_tables(&self) -> &FrequencyTables {
        &self.freq
    }

    pub fn options(&self) -> &CorpusOptions {
        &self.options
    }

    /// Serialize all papers in index order.
    pub fn to_corpus_text(&self) -> String {
        let mut out = String::new();
        for p in &self.papers {
            out.push_str(&p.to_line());
            out.push('\n');
        }
        out
    }
}
