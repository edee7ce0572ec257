//! Per-trial processing measures derived from the current mappings.
//!
//! All measures are emitted raw; log transforms are applied downstream when
//! building predictor tables.

use serde::{Deserialize, Serialize};

use crate::error::{LexError, Result};
use crate::formspace::{CueMatrix, CueVector, NeighbourLexicon};
use crate::mappings::{predict_decision, predict_semantic, DecisionMapping, MappingMatrix};
use crate::semspace::{top_n_by_cosine, EmbeddingTable};
use crate::stats::pearson;
use crate::tour::{euclidean_distances, shortest_tour};

/// Default neighbourhood size for semantic density.
pub const DEFAULT_DENSITY_N: usize = 10;

/// One trial's model-derived measures plus the classical pass-through
/// predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureRow {
    pub subject: String,
    pub trial: u64,
    pub block: String,
    pub session: String,
    pub stimulus: String,
    pub lexicality: String,
    pub response: String,
    pub rt_ms: f64,
    pub semantic_density: f64,
    pub shortest_path: f64,
    pub has_neighbours_path: bool,
    pub c_precision: f64,
    pub l1chat: f64,
    pub yes_activation: f64,
    pub word_length: usize,
    pub frequency: f64,
    pub coltheart_n: usize,
    pub levenshtein_n: usize,
    pub dropped_cues: usize,
}

/// Mean of the `n` largest cosine similarities between `s_hat` and the rows
/// of `table`.
pub fn semantic_density(s_hat: &[f64], table: &EmbeddingTable, n: usize) -> Result<f64> {
    let top = top_n_by_cosine(s_hat, table, n)?;
    Ok(top.iter().map(|(_, s)| s).sum::<f64>() / top.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMeasure {
    pub length: f64,
    pub has_neighbours: bool,
}

/// Shortest closed Euclidean tour through the target's predicted meaning
/// and those of its orthographic neighbours.
pub fn shortest_path_from_cues(
    target_hat: &[f64],
    neighbours: &[&CueVector],
    f: &MappingMatrix,
) -> PathMeasure {
    if neighbours.is_empty() {
        return PathMeasure {
            length: 0.0,
            has_neighbours: false,
        };
    }
    let mut points = Vec::with_capacity(neighbours.len() + 1);
    points.push(target_hat.to_vec());
    points.extend(neighbours.iter().map(|c| predict_semantic(c, f)));
    PathMeasure {
        length: shortest_tour(&euclidean_distances(&points)).length,
        has_neighbours: true,
    }
}

/// [`shortest_path_from_cues`] with Coltheart neighbours looked up among the
/// words of `c`.
pub fn shortest_path(
    word: &str,
    lexicon: &NeighbourLexicon,
    f: &MappingMatrix,
    c: &CueMatrix,
) -> Result<PathMeasure> {
    let target = crate::formspace::encode_form(word, c.index())?;
    let target_hat = predict_semantic(&target.cues, f);
    let ids = lexicon.coltheart(word);
    let rows: Vec<&CueVector> = ids.iter().map(|&i| c.row(i)).collect();
    Ok(shortest_path_from_cues(&target_hat, &rows, f))
}

/// Pearson correlation between the binary expansion of `c` and `c_hat`.
pub fn c_precision(c: &CueVector, c_hat: &[f64]) -> Result<f64> {
    if c.dim() != c_hat.len() {
        return Err(LexError::DimensionMismatch {
            what: "predicted form vector",
            expected: c.dim(),
            got: c_hat.len(),
        });
    }
    pearson(&c.to_dense(), c_hat)
}

pub fn l1chat(c_hat: &[f64]) -> f64 {
    c_hat.iter().map(|x| x.abs()).sum()
}

/// Support for the "word" outcome.
pub fn yes_activation(c: &CueVector, d: &DecisionMapping) -> f64 {
    predict_decision(c, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::RowMatrix;
    use crate::mappings::{wh_update_decision, MappingKind};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_table(rng: &mut ChaCha8Rng, n: usize, d: usize) -> EmbeddingTable {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        EmbeddingTable::from_rows((0..n).map(|i| format!("w{i}")).collect(), &rows).unwrap()
    }

    /// Oracle: every cosine, sorted descending, first n averaged.
    fn density_oracle(q: &[f64], t: &EmbeddingTable, n: usize) -> f64 {
        let mut sims: Vec<f64> = (0..t.len())
            .map(|i| {
                let r = t.row(i);
                let dot: f64 = q.iter().zip(r).map(|(a, b)| a * b).sum();
                let nq: f64 = q.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nr: f64 = r.iter().map(|a| a * a).sum::<f64>().sqrt();
                dot / (nq * nr)
            })
            .collect();
        sims.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let k = n.min(sims.len());
        sims[..k].iter().sum::<f64>() / k as f64
    }

    #[test]
    fn density_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let t = random_table(&mut rng, 20, 5);
        assert!((semantic_density(t.row(4), &t, 1).unwrap() - 1.0).abs() < 1e-12);

        let v = vec![0.2, -1.0, 3.0];
        let same = EmbeddingTable::from_rows(
            (0..12).map(|i| format!("s{i}")).collect(),
            &vec![v.clone(); 12],
        )
        .unwrap();
        assert!((semantic_density(&v, &same, 10).unwrap() - 1.0).abs() < 1e-12);

        let q: Vec<f64> = (0..5).map(|_| rng.sample(StandardNormal)).collect();
        let got = semantic_density(&q, &t, 10).unwrap();
        assert!((got - density_oracle(&q, &t, 10)).abs() < 1e-12);
        assert!(matches!(semantic_density(&[0.0; 5], &t, 10), Err(LexError::ZeroVector)));
    }

    #[test]
    fn shortest_path_examples() {
        let f = MappingMatrix::new(
            MappingKind::Comprehension,
            RowMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap(),
        )
        .unwrap();
        let none = shortest_path_from_cues(&[0.0, 0.0], &[], &f);
        assert_eq!(none, PathMeasure { length: 0.0, has_neighbours: false });
        let nb = CueVector::new(vec![1], 2).unwrap();
        let one = shortest_path_from_cues(&[0.0, 0.0], &[&nb], &f);
        assert_eq!(one, PathMeasure { length: 10.0, has_neighbours: true });
    }

    #[test]
    fn shortest_path_over_lexicon() {
        let words = ["back", "lack", "tack", "sack", "dog"];
        let c = CueMatrix::build(&words).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let data = (0..c.ncols() * 3).map(|_| rng.sample(StandardNormal)).collect();
        let f = MappingMatrix::new(MappingKind::Comprehension, RowMatrix::from_vec(c.ncols(), 3, data).unwrap()).unwrap();
        let lex = NeighbourLexicon::new(&words);
        let p = shortest_path("back", &lex, &f, &c).unwrap();
        assert!(p.has_neighbours && p.length > 0.0);
        let q = shortest_path("dog", &lex, &f, &c).unwrap();
        assert_eq!(q, PathMeasure { length: 0.0, has_neighbours: false });
        // the tour through back and its three neighbours, computed directly
        let pts: Vec<Vec<f64>> = (0..4).map(|i| predict_semantic(c.row(i), &f)).collect();
        let direct = shortest_tour(&euclidean_distances(&pts)).length;
        assert_eq!(p.length, direct);
    }

    /// Oracle: textbook correlation on the 0/1 expansion.
    fn correlation_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|a| a * a).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn c_precision_examples() {
        let c = CueVector::new(vec![1, 4, 7], 10).unwrap();
        assert!((c_precision(&c, &c.to_dense()).unwrap() - 1.0).abs() < 1e-15);
        let anti: Vec<f64> = c.to_dense().iter().map(|x| 3.0 - x).collect();
        assert!((c_precision(&c, &anti).unwrap() + 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let r: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
        let got = c_precision(&c, &r).unwrap();
        assert!((got - correlation_oracle(&c.to_dense(), &r)).abs() < 1e-12);
        assert!(matches!(c_precision(&c, &[0.5; 10]), Err(LexError::ConstantVector)));
        assert!(c_precision(&c, &[0.5; 3]).is_err());
    }

    #[test]
    fn l1chat_examples() {
        assert_eq!(l1chat(&[0.0; 4]), 0.0);
        assert_eq!(l1chat(&[-1.0, 2.0, -3.0]), 6.0);
    }

    #[test]
    fn yes_activation_examples() {
        let mut d = DecisionMapping::zeros(6);
        let c = CueVector::new(vec![0, 2, 5], 6).unwrap();
        assert_eq!(yes_activation(&c, &d), 0.0);
        wh_update_decision(&mut d, &c, 1.0, 0.01);
        // each of the 3 cues received 0.01
        assert!((yes_activation(&c, &d) - 3.0 * 0.01).abs() < 1e-15);
        let c1 = CueVector::new(vec![0, 1], 6).unwrap();
        let c2 = CueVector::new(vec![2, 5], 6).unwrap();
        let both = CueVector::new(vec![0, 1, 2, 5], 6).unwrap();
        assert_eq!(yes_activation(&both, &d), yes_activation(&c1, &d) + yes_activation(&c2, &d));
    }

    proptest! {
        #[test]
        fn density_is_scale_free(seed in 0u64..1000, scale in 0.001f64..1000.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_table(&mut rng, 15, 4);
            let q: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let scaled: Vec<f64> = q.iter().map(|x| x * scale).collect();
            let a = semantic_density(&q, &t, 10).unwrap();
            let b = semantic_density(&scaled, &t, 10).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn c_precision_affine_invariant(seed in 0u64..1000, alpha in 0.01f64..100.0, beta in -10.0f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = CueVector::new(vec![0, 3, 4], 9).unwrap();
            let r: Vec<f64> = (0..9).map(|_| rng.sample(StandardNormal)).collect();
            let s: Vec<f64> = r.iter().map(|x| alpha * x + beta).collect();
            prop_assert!((c_precision(&c, &r).unwrap() - c_precision(&c, &s).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn l1chat_matches_abs_sum(v in proptest::collection::vec(-100.0f64..100.0, 0..40)) {
            let mut oracle = 0.0;
            for x in &v {
                oracle += if *x < 0.0 { -x } else { *x };
            }
            prop_assert!((l1chat(&v) - oracle).abs() <= 1e-12 * oracle.max(1.0));
            prop_assert!(l1chat(&v) >= 0.0);
        }
    }
}
