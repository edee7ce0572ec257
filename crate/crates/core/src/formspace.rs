//! Orthographic form space: letter trigrams, the cue index, sparse cue
//! vectors and orthographic neighbourhoods.

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexSet;

use crate::error::{LexError, Result};

/// Word-boundary marker used to pad wordforms.
pub const BOUNDARY: char = '#';

/// Three consecutive symbols of a `#`-padded wordform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trigram([char; 3]);

impl Trigram {
    /// Boundary markers may only open or close a trigram.
    pub fn new(chars: [char; 3]) -> Result<Self> {
        if chars[1] == BOUNDARY {
            return Err(LexError::InvalidWord(chars.iter().collect()));
        }
        Ok(Trigram(chars))
    }

    pub fn chars(&self) -> [char; 3] {
        self.0
    }
}

impl fmt::Display for Trigram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.0 {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Lowercases and trims a raw wordform at ingestion.
pub fn normalize_word(raw: &str) -> String {
    raw.trim().to_lowercase()
}

fn check_word(word: &str) -> Result<()> {
    if word.is_empty() || word.contains(BOUNDARY) {
        return Err(LexError::InvalidWord(word.to_string()));
    }
    Ok(())
}

/// Unique trigrams of `#word#`, in order of first occurrence.
pub fn extract_trigrams(word: &str) -> Result<Vec<Trigram>> {
    check_word(word)?;
    let mut padded = Vec::with_capacity(word.len() + 2);
    padded.push(BOUNDARY);
    padded.extend(word.chars());
    padded.push(BOUNDARY);
    let mut out: Vec<Trigram> = Vec::with_capacity(padded.len() - 2);
    for w in padded.windows(3) {
        let t = Trigram([w[0], w[1], w[2]]);
        if !out.contains(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Dense 0-based ids for trigrams, assigned in order of first occurrence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CueIndex {
    set: IndexSet<Trigram>,
}

impl CueIndex {
    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn get(&self, t: &Trigram) -> Option<usize> {
        self.set.get_index_of(t)
    }

    pub fn trigram(&self, id: usize) -> Option<&Trigram> {
        self.set.get_index(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Trigram> {
        self.set.iter()
    }

    fn insert(&mut self, t: Trigram) -> usize {
        self.set.insert_full(t).0
    }
}

/// Sparse binary form vector: the sorted set of active cue ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CueVector {
    active: Vec<usize>,
    dim: usize,
}

impl CueVector {
    pub fn new(mut active: Vec<usize>, dim: usize) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if let Some(&last) = active.last() {
            if last >= dim {
                return Err(LexError::DimensionMismatch {
                    what: "cue id",
                    expected: dim,
                    got: last,
                });
            }
        }
        Ok(CueVector { active, dim })
    }

    pub fn empty(dim: usize) -> Self {
        CueVector {
            active: Vec::new(),
            dim,
        }
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &i in &self.active {
            v[i] = 1.0;
        }
        v
    }

    /// Same active set, reinterpreted in a (larger) index.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        CueVector::new(self.active.clone(), dim)
    }
}

/// Result of coding a wordform against a fixed index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedForm {
    pub cues: CueVector,
    /// Trigrams of the word that the index does not know.
    pub dropped: usize,
}

/// Codes `word` against `index`; trigrams missing from the index are
/// dropped and counted.
pub fn encode_form(word: &str, index: &CueIndex) -> Result<EncodedForm> {
    let trigrams = extract_trigrams(word)?;
    let mut active = Vec::with_capacity(trigrams.len());
    let mut dropped = 0;
    for t in &trigrams {
        match index.get(t) {
            Some(id) => active.push(id),
            None => dropped += 1,
        }
    }
    Ok(EncodedForm {
        cues: CueVector::new(active, index.len())?,
        dropped,
    })
}

/// Word-by-trigram binary matrix, one sparse row per word.
#[derive(Debug, Clone)]
pub struct CueMatrix {
    index: CueIndex,
    rows: Vec<CueVector>,
    words: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl CueMatrix {
    pub fn build<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        if words.is_empty() {
            return Err(LexError::EmptyLexicon);
        }
        let mut index = CueIndex::default();
        let mut lookup = HashMap::with_capacity(words.len());
        let mut raw_rows = Vec::with_capacity(words.len());
        let mut owned = Vec::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            let w = w.as_ref();
            let trigrams = extract_trigrams(w)?;
            if lookup.insert(w.to_string(), i).is_some() {
                return Err(LexError::DuplicateEntry(w.to_string()));
            }
            raw_rows.push(trigrams.into_iter().map(|t| index.insert(t)).collect::<Vec<_>>());
            owned.push(w.to_string());
        }
        let dim = index.len();
        let rows = raw_rows
            .into_iter()
            .map(|r| CueVector::new(r, dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(CueMatrix {
            index,
            rows,
            words: owned,
            lookup,
        })
    }

    pub fn index(&self) -> &CueIndex {
        &self.index
    }

    pub fn rows(&self) -> &[CueVector] {
        &self.rows
    }

    pub fn row(&self, id: usize) -> &CueVector {
        &self.rows[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.lookup.get(word).copied()
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.index.len()
    }

    /// Row-major dense copy, for small problems and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(CueVector::to_dense).collect()
    }
}

/// True when `a` and `b` have equal length and differ in exactly one position.
pub fn is_substitution_neighbour(a: &[char], b: &[char]) -> bool {
    a.len() == b.len() && a.iter().zip(b).filter(|(x, y)| x != y).count() == 1
}

/// Unit-cost edit distance (insertion, deletion, substitution).
pub fn edit_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Linear-time test for edit distance exactly 1.
pub fn is_one_edit(a: &[char], b: &[char]) -> bool {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    match long.len() - short.len() {
        0 => is_substitution_neighbour(a, b),
        1 => {
            let prefix = short.iter().zip(long).take_while(|(x, y)| x == y).count();
            short[prefix..] == long[prefix + 1..]
        }
        _ => false,
    }
}

/// Coltheart neighbours: same length, exactly one letter substituted.
pub fn coltheart_neighbors<S: AsRef<str>>(word: &str, lexicon: &[S]) -> Vec<String> {
    let w: Vec<char> = word.chars().collect();
    lexicon
        .iter()
        .map(AsRef::as_ref)
        .filter(|v| {
            let v: Vec<char> = v.chars().collect();
            is_substitution_neighbour(&w, &v)
        })
        .map(str::to_string)
        .collect()
}

/// Number of reference entries at edit distance exactly 1 from `word`.
pub fn levenshtein_neighbors<S: AsRef<str>>(word: &str, reference: &[S]) -> usize {
    let w: Vec<char> = word.chars().collect();
    reference
        .iter()
        .filter(|v| {
            let v: Vec<char> = v.as_ref().chars().collect();
            is_one_edit(&w, &v)
        })
        .count()
}

/// Length-bucketed word list for repeated neighbourhood queries.
#[derive(Debug, Clone, Default)]
pub struct NeighbourLexicon {
    words: Vec<Vec<char>>,
    by_len: HashMap<usize, Vec<usize>>,
}

impl NeighbourLexicon {
    pub fn new<S: AsRef<str>>(words: &[S]) -> Self {
        let mut by_len: HashMap<usize, Vec<usize>> = HashMap::new();
        let words: Vec<Vec<char>> = words.iter().map(|w| w.as_ref().chars().collect()).collect();
        for (i, w) in words.iter().enumerate() {
            by_len.entry(w.len()).or_default().push(i);
        }
        NeighbourLexicon { words, by_len }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn bucket(&self, len: usize) -> &[usize] {
        self.by_len.get(&len).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Ids (positions in the construction list) of Coltheart neighbours,
    /// ascending.
    pub fn coltheart(&self, word: &str) -> Vec<usize> {
        let w: Vec<char> = word.chars().collect();
        self.bucket(w.len())
            .iter()
            .copied()
            .filter(|&i| is_substitution_neighbour(&w, &self.words[i]))
            .collect()
    }

    pub fn levenshtein_count(&self, word: &str) -> usize {
        let w: Vec<char> = word.chars().collect();
        let lens = [w.len().wrapping_sub(1), w.len(), w.len() + 1];
        lens.iter()
            .map(|&l| {
                self.bucket(l)
                    .iter()
                    .filter(|&&i| is_one_edit(&w, &self.words[i]))
                    .count()
            })
            .sum()
    }
}
