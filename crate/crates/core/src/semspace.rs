//! Semantic space: the embedding table `S` and similarity primitives.
//!
//! Two similarity notions live here and are kept apart: cosine similarity
//! (used for neighbourhood density) and Pearson correlation (used to score
//! comprehension accuracy).

use std::cmp::Ordering;
use std::collections::HashMap;

use crate::dense::RowMatrix;
use crate::error::{LexError, Result};
use crate::par;
use crate::stats::{dot, norm, standardize_unit};

/// Word-by-dimension embedding matrix.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    words: Vec<String>,
    values: RowMatrix,
    norms: Vec<f64>,
    lookup: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(words: Vec<String>, values: RowMatrix) -> Result<Self> {
        if words.is_empty() {
            return Err(LexError::EmptyTable);
        }
        if words.len() != values.nrows() {
            return Err(LexError::DimensionMismatch {
                what: "embedding rows",
                expected: words.len(),
                got: values.nrows(),
            });
        }
        if values.ncols() == 0 {
            return Err(LexError::InvalidArgument("embedding dimension is zero".into()));
        }
        if !values.is_finite() {
            return Err(LexError::NonFinite("embedding table"));
        }
        let mut lookup = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if lookup.insert(w.clone(), i).is_some() {
                return Err(LexError::DuplicateEntry(w.clone()));
            }
        }
        let norms = values.row_iter().map(norm).collect();
        Ok(EmbeddingTable {
            words,
            values,
            norms,
            lookup,
        })
    }

    pub fn from_rows(words: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        EmbeddingTable::new(words, RowMatrix::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.values.row(id)
    }

    pub fn values(&self) -> &RowMatrix {
        &self.values
    }

    pub fn word_id(&self, word: &str) -> Option<usize> {
        self.lookup.get(word).copied()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.word_id(word).map(|i| self.row(i))
    }

    /// Table restricted to `words`, in that order. Missing words are an error.
    pub fn select<S: AsRef<str>>(&self, words: &[S]) -> Result<Self> {
        let mut data = Vec::with_capacity(words.len() * self.dim());
        let mut names = Vec::with_capacity(words.len());
        for w in words {
            let w = w.as_ref();
            let row = self
                .get(w)
                .ok_or_else(|| LexError::InvalidArgument(format!("no embedding for {w:?}")))?;
            data.extend_from_slice(row);
            names.push(w.to_string());
        }
        EmbeddingTable::new(names, RowMatrix::from_vec(words.len(), self.dim(), data)?)
    }

    /// Cosine similarity of `q` with every row. Zero rows score 0.
    pub fn cosine_scan(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(q)?;
        let qn = norm(q);
        if !(qn > 0.0) {
            return Err(LexError::ZeroVector);
        }
        Ok(par::map_range(self.len(), |i| {
            let rn = self.norms[i];
            if rn > 0.0 {
                dot(q, self.row(i)) / (qn * rn)
            } else {
                0.0
            }
        }))
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(LexError::DimensionMismatch {
                what: "semantic vector",
                expected: self.dim(),
                got: q.len(),
            });
        }
        Ok(())
    }
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(LexError::DimensionMismatch {
            what: "cosine operands",
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(LexError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Descending by score, ascending by id on ties.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Indices and values of the `n` largest scores, descending, ties broken by
/// ascending index.
pub fn top_n(scores: &[f64], n: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
    let n = n.min(all.len());
    if n == 0 {
        return Vec::new();
    }
    if n < all.len() {
        all.select_nth_unstable_by(n - 1, rank_order);
        all.truncate(n);
    }
    all.sort_unstable_by(rank_order);
    all
}

/// The `n` rows of `table` most cosine-similar to `q`.
pub fn top_n_by_cosine(q: &[f64], table: &EmbeddingTable, n: usize) -> Result<Vec<(usize, f64)>> {
    if n == 0 {
        return Err(LexError::InvalidArgument("n must be at least 1".into()));
    }
    let sims = table.cosine_scan(q)?;
    Ok(top_n(&sims, n))
}

/// Arithmetic mean of all rows.
pub fn centroid(table: &EmbeddingTable) -> Result<Vec<f64>> {
    if table.is_empty() {
        return Err(LexError::EmptyTable);
    }
    let mut out = vec![0.0; table.dim()];
    for row in table.values().row_iter() {
        out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
    }
    let n = table.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    /// Fraction of rows whose own target ranks within the top `k`.
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Rows whose correlation was undefined (constant predicted vector or
    /// constant target); counted as incorrect.
    pub undefined_rows: Vec<usize>,
}

/// Ranks every target row by Pearson correlation with each predicted row
/// and scores row `i` correct when target `i` is among the best `k`
/// (ties broken by ascending row id).
pub fn correlation_accuracy(
    predicted: &RowMatrix,
    targets: &EmbeddingTable,
    k: usize,
) -> Result<AccuracyReport> {
    if k == 0 {
        return Err(LexError::InvalidArgument("k must be at least 1".into()));
    }
    if predicted.nrows() != targets.len() {
        return Err(LexError::DimensionMismatch {
            what: "predicted rows",
            expected: targets.len(),
            got: predicted.nrows(),
        });
    }
    if predicted.ncols() != targets.dim() {
        return Err(LexError::DimensionMismatch {
            what: "predicted dimension",
            expected: targets.dim(),
            got: predicted.ncols(),
        });
    }
    let std_targets: Vec<Option<Vec<f64>>> =
        par::map_range(targets.len(), |j| standardize_unit(targets.row(j)).ok());
    let outcome: Vec<Option<bool>> = par::map_range(predicted.nrows(), |i| {
        let p = standardize_unit(predicted.row(i)).ok()?;
        let own = dot(&p, std_targets[i].as_ref()?);
        let mut better = 0usize;
        for (j, t) in std_targets.iter().enumerate() {
            if j == i {
                continue;
            }
            if let Some(t) = t {
                let r = dot(&p, t);
                if r > own || (r == own && j < i) {
                    better += 1;
                    if better >= k {
                        return Some(false);
                    }
                }
            }
        }
        Some(true)
    });
    let mut undefined_rows = Vec::new();
    let mut correct = 0;
    for (i, o) in outcome.iter().enumerate() {
        match o {
            Some(true) => correct += 1,
            Some(false) => {}
            None => undefined_rows.push(i),
        }
    }
    let total = outcome.len();
    Ok(AccuracyReport {
        accuracy: correct as f64 / total as f64,
        correct,
        total,
        undefined_rows,
    })
}
