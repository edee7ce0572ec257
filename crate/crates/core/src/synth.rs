//! Seeded generators for synthetic lexicons, embeddings and trial lists.
//! Used by tests, benchmarks and the toy-dataset tool; the simulation itself
//! never draws random numbers.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, StandardNormal};

use crate::dense::RowMatrix;
use crate::error::Result;
use crate::formspace::{extract_trigrams, CueMatrix};
use crate::semspace::EmbeddingTable;
use crate::trialsim::{Lexicality, TrialRecord};

const CONSONANTS: &[char] = &['b', 'c', 'd', 'f', 'g', 'h', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'w'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unique pronounceable letter strings of 3 to 6 letters.
pub fn random_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.random_range(3..=6);
        let start_vowel = rng.random_bool(0.3);
        let w: String = (0..len)
            .map(|i| {
                let vowel = (i % 2 == 0) == start_vowel;
                let set = if vowel { VOWELS } else { CONSONANTS };
                *set.choose(rng).unwrap()
            })
            .collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Unique strings over a small alphabet, so that the lexicon has fewer
/// distinct trigrams than words and endstate mappings are not exact.
pub fn random_words_over(
    rng: &mut ChaCha8Rng,
    n: usize,
    alphabet: &[char],
    lengths: std::ops::RangeInclusive<usize>,
) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 1000 * n.max(1) {
        attempts += 1;
        let len = rng.random_range(lengths.clone());
        let w: String = (0..len).map(|_| *alphabet.choose(rng).unwrap()).collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Single-letter substitutions of lexicon words that are not themselves in
/// the lexicon and keep at least one trigram of the word they came from.
pub fn random_nonwords(rng: &mut ChaCha8Rng, words: &[String], n: usize) -> Vec<String> {
    let known: HashSet<&str> = words.iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 100 * n.max(1) {
        attempts += 1;
        let base: Vec<char> = words.choose(rng).unwrap().chars().collect();
        let pos = rng.random_range(0..base.len());
        let mut w = base.clone();
        w[pos] = *base.choose(rng).unwrap();
        if rng.random_bool(0.5) {
            let set = if VOWELS.contains(&base[pos]) { VOWELS } else { CONSONANTS };
            w[pos] = *set.choose(rng).unwrap();
        }
        let w: String = w.into_iter().collect();
        let base: String = base.into_iter().collect();
        if known.contains(w.as_str()) || !shares_trigram(&w, &base) {
            continue;
        }
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn shares_trigram(a: &str, b: &str) -> bool {
    match (extract_trigrams(a), extract_trigrams(b)) {
        (Ok(ta), Ok(tb)) => ta.iter().any(|t| tb.contains(t)),
        _ => false,
    }
}

/// Gaussian matrix with independent standard-normal entries.
pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RowMatrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    RowMatrix::from_vec(rows, cols, data).expect("sized buffer")
}

/// Embeddings partly predictable from form: `S = C·M + noise·E`.
pub fn form_linked_embeddings(
    rng: &mut ChaCha8Rng,
    cues: &CueMatrix,
    dim: usize,
    noise: f64,
) -> Result<EmbeddingTable> {
    let m = gaussian_matrix(rng, cues.ncols(), dim);
    let mut rows = Vec::with_capacity(cues.nrows());
    for c in cues.rows() {
        let mut r = vec![0.0; dim];
        for &a in c.active() {
            r.iter_mut().zip(m.row(a)).for_each(|(x, y)| *x += y);
        }
        r.iter_mut()
            .for_each(|x| *x += noise * rng.sample::<f64, _>(StandardNormal));
        rows.push(r);
    }
    EmbeddingTable::from_rows(cues.words().to_vec(), &rows)
}

/// Zipf-like corpus counts; about `absent_rate` of the words get no entry.
pub fn frequencies(rng: &mut ChaCha8Rng, words: &[String], absent_rate: f64) -> Vec<(String, f64)> {
    let dist = LogNormal::new(3.0, 1.5).expect("valid parameters");
    words
        .iter()
        .filter_map(|w| {
            let count = rng.sample::<f64, _>(dist).floor() + 1.0;
            (!rng.random_bool(absent_rate)).then(|| (w.clone(), count))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct TrialListSpec {
    pub trials: usize,
    /// Probability that a stimulus is a word.
    pub word_rate: f64,
    /// Probability of re-presenting one of the last few stimuli.
    pub repeat_rate: f64,
    /// Probability that a response is wrong.
    pub error_rate: f64,
    pub block_size: usize,
    pub blocks_per_session: usize,
}

impl Default for TrialListSpec {
    fn default() -> Self {
        TrialListSpec {
            trials: 200,
            word_rate: 0.5,
            repeat_rate: 0.1,
            error_rate: 0.1,
            block_size: 100,
            blocks_per_session: 2,
        }
    }
}

/// A subject's trial sequence with log-normal reaction times.
pub fn trial_list(
    rng: &mut ChaCha8Rng,
    subject: &str,
    words: &[String],
    nonwords: &[String],
    spec: &TrialListSpec,
) -> Vec<TrialRecord> {
    let rt = LogNormal::new(6.4, 0.3).expect("valid parameters");
    let mut out: Vec<TrialRecord> = Vec::with_capacity(spec.trials);
    for i in 0..spec.trials {
        let (stimulus, lexicality) = if i > 0 && rng.random_bool(spec.repeat_rate) {
            let back = rng.random_range(1..=i.min(5));
            let prev = &out[i - back];
            (prev.stimulus.clone(), prev.lexicality)
        } else if nonwords.is_empty() || rng.random_bool(spec.word_rate) {
            (words.choose(rng).unwrap().clone(), Lexicality::Word)
        } else {
            (nonwords.choose(rng).unwrap().clone(), Lexicality::Nonword)
        };
        let correct = !rng.random_bool(spec.error_rate);
        let response = match (lexicality, correct) {
            (l, true) => l,
            (Lexicality::Word, false) => Lexicality::Nonword,
            (Lexicality::Nonword, false) => Lexicality::Word,
        };
        let block = i / spec.block_size.max(1);
        out.push(TrialRecord {
            subject: subject.to_string(),
            order: i as u64 + 1,
            block: (block + 1).to_string(),
            session: (block / spec.blocks_per_session.max(1) + 1).to_string(),
            stimulus,
            lexicality,
            response,
            rt_ms: rng.sample::<f64, _>(rt).clamp(150.0, 1999.0).round(),
        });
    }
    out
}
