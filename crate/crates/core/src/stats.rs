//! Small vector-statistics kernels shared across modules. Accumulation runs
//! in index order so results are reproducible.

use crate::error::{LexError, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        return f64::NAN;
    }
    a.iter().sum::<f64>() / a.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(a: &[f64]) -> f64 {
    let m = mean(a);
    let ss: f64 = a.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (a.len() as f64 - 1.0)).sqrt()
}

/// Centers `a` and scales it to unit Euclidean norm, so that the Pearson
/// correlation of two such vectors is their dot product.
pub fn standardize_unit(a: &[f64]) -> Result<Vec<f64>> {
    let m = mean(a);
    let mut out: Vec<f64> = a.iter().map(|x| x - m).collect();
    let n = norm(&out);
    if !(n > 0.0) || !n.is_finite() {
        return Err(LexError::ConstantVector);
    }
    out.iter_mut().for_each(|x| *x /= n);
    Ok(out)
}

/// Pearson product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(LexError::DimensionMismatch {
            what: "correlation operands",
            expected: a.len(),
            got: b.len(),
        });
    }
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if !(saa > 0.0) || !(sbb > 0.0) {
        return Err(LexError::ConstantVector);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
