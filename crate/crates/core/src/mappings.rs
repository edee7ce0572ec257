//! Linear mappings between form and meaning, their least-squares endstate,
//! and Widrow-Hoff incremental updates.
//!
//! `F` (comprehension) has one row per trigram and one column per embedding
//! dimension; `G` (production) is the transpose shape. `D` maps a cue vector
//! to a single word/nonword outcome.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dense::RowMatrix;
use crate::error::{LexError, Result};
use crate::formspace::{CueMatrix, CueVector};
use crate::par;
use crate::semspace::EmbeddingTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingKind {
    /// Form to meaning: trigrams x dimensions.
    Comprehension,
    /// Meaning to form: dimensions x trigrams.
    Production,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    kind: MappingKind,
    values: RowMatrix,
}

impl MappingMatrix {
    pub fn new(kind: MappingKind, values: RowMatrix) -> Result<Self> {
        if !values.is_finite() {
            return Err(LexError::NonFinite("mapping matrix"));
        }
        Ok(MappingMatrix { kind, values })
    }

    pub fn zeros(kind: MappingKind, in_dim: usize, out_dim: usize) -> Self {
        MappingMatrix {
            kind,
            values: RowMatrix::zeros(in_dim, out_dim),
        }
    }

    pub fn kind(&self) -> MappingKind {
        self.kind
    }

    pub fn in_dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &RowMatrix {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut RowMatrix {
        &mut self.values
    }
}

/// Single-outcome form-to-lexicality weights, one per trigram.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMapping {
    values: Vec<f64>,
}

impl DecisionMapping {
    /// Zero weights: no prior experience with the word/nonword outcome.
    pub fn zeros(cues: usize) -> Self {
        DecisionMapping {
            values: vec![0.0; cues],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(LexError::NonFinite("decision mapping"));
        }
        Ok(DecisionMapping { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningConfig {
    /// Learning rate for `F` and `G`.
    pub eta_fg: f64,
    /// Learning rate for `D`.
    pub eta_d: f64,
    /// Ridge penalty for the endstate solver, relative to the mean diagonal
    /// of the Gram matrix (`0` = plain least squares).
    pub ridge: f64,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            eta_fg: 0.001,
            eta_d: 0.01,
            ridge: 1e-8,
        }
    }
}

impl LearningConfig {
    /// Rates must be non-negative; zero rates are accepted so that a dynamic
    /// run can be degenerated into a static one.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_fg", self.eta_fg), ("eta_d", self.eta_d)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(LexError::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.ridge >= 0.0) || !self.ridge.is_finite() {
            return Err(LexError::InvalidArgument(format!(
                "ridge must be finite and >= 0, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Endstate estimation
// ---------------------------------------------------------------------------

/// One side of a form/meaning pairing, as solver input or target.
#[derive(Debug, Clone, Copy)]
pub enum Side<'a> {
    Form(&'a CueMatrix),
    Meaning(&'a EmbeddingTable),
}

impl Side<'_> {
    fn nrows(&self) -> usize {
        match self {
            Side::Form(c) => c.nrows(),
            Side::Meaning(s) => s.len(),
        }
    }

    fn ncols(&self) -> usize {
        match self {
            Side::Form(c) => c.ncols(),
            Side::Meaning(s) => s.dim(),
        }
    }

    fn frobenius_sq(&self) -> f64 {
        match self {
            Side::Form(c) => c.rows().iter().map(|r| r.len() as f64).sum(),
            Side::Meaning(s) => s.values().as_slice().iter().map(|x| x * x).sum(),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Side::Form(c) => {
                let mut m = DMatrix::zeros(c.nrows(), c.ncols());
                for (i, r) in c.rows().iter().enumerate() {
                    for &a in r.active() {
                        m[(i, a)] = 1.0;
                    }
                }
                m
            }
            Side::Meaning(s) => s.values().to_nalgebra(),
        }
    }

    /// `XᵀX`.
    fn gram_primal(&self) -> DMatrix<f64> {
        match self {
            Side::Form(c) => {
                let p = c.ncols();
                let mut g = DMatrix::zeros(p, p);
                for r in c.rows() {
                    for &a in r.active() {
                        for &b in r.active() {
                            g[(a, b)] += 1.0;
                        }
                    }
                }
                g
            }
            Side::Meaning(s) => {
                let x = s.values().to_nalgebra();
                x.transpose() * x
            }
        }
    }

    /// `XXᵀ`.
    fn gram_dual(&self) -> DMatrix<f64> {
        match self {
            Side::Form(c) => {
                let n = c.nrows();
                let mut postings: Vec<Vec<usize>> = vec![Vec::new(); c.ncols()];
                for (i, r) in c.rows().iter().enumerate() {
                    for &a in r.active() {
                        postings[a].push(i);
                    }
                }
                let rows = par::map_range(n, |i| {
                    let mut counts = vec![0.0; n];
                    for &a in c.row(i).active() {
                        for &j in &postings[a] {
                            counts[j] += 1.0;
                        }
                    }
                    counts
                });
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
            Side::Meaning(s) => {
                let x = s.values().to_nalgebra();
                &x * x.transpose()
            }
        }
    }

    /// `Xᵀ Y` for a dense `Y` with one row per item.
    fn transpose_mul(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Side::Form(c) => {
                let mut out = DMatrix::zeros(c.ncols(), y.ncols());
                for (i, r) in c.rows().iter().enumerate() {
                    for &a in r.active() {
                        for j in 0..y.ncols() {
                            out[(a, j)] += y[(i, j)];
                        }
                    }
                }
                out
            }
            Side::Meaning(s) => s.values().to_nalgebra().transpose() * y,
        }
    }
}

fn solve_spd(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    // Singular normal equations: minimum-norm least-squares solution.
    let svd = a.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12 * svd.singular_values.len() as f64;
    svd.solve(b, eps).map_err(|e| LexError::Solver {
        reason: e.to_string(),
        residual: f64::NAN,
    })
}

/// Least-squares (optionally ridge-regularised) mapping `W` minimising
/// `‖XW − Y‖² + λ‖W‖²`, with `X = input` and `Y = target`.
///
/// `ridge` is relative: `λ = ridge · ‖X‖²_F / ncols(X)`. The solver works in
/// the smaller of the primal (`XᵀX`) and dual (`XXᵀ`) spaces.
pub fn solve_endstate(input: Side<'_>, target: Side<'_>, ridge: f64) -> Result<MappingMatrix> {
    if input.nrows() != target.nrows() {
        return Err(LexError::DimensionMismatch {
            what: "input/target row count",
            expected: input.nrows(),
            got: target.nrows(),
        });
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(LexError::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    let kind = match (input, target) {
        (Side::Form(_), Side::Meaning(_)) => MappingKind::Comprehension,
        (Side::Meaning(_), Side::Form(_)) => MappingKind::Production,
        _ => {
            return Err(LexError::InvalidArgument(
                "endstate maps form to meaning or meaning to form".into(),
            ))
        }
    };
    let (n, p) = (input.nrows(), input.ncols());
    let lambda = ridge * input.frobenius_sq() / p.max(1) as f64;
    let y = target.to_dense();
    let w = if p <= n {
        let mut a = input.gram_primal();
        for i in 0..p {
            a[(i, i)] += lambda;
        }
        solve_spd(a, &input.transpose_mul(&y))?
    } else {
        let mut k = input.gram_dual();
        for i in 0..n {
            k[(i, i)] += lambda;
        }
        let z = solve_spd(k, &y)?;
        input.transpose_mul(&z)
    };
    if !w.iter().all(|v| v.is_finite()) {
        return Err(LexError::Solver {
            reason: "non-finite solution".into(),
            residual: (input.to_dense() * &w - &y).norm(),
        });
    }
    MappingMatrix::new(kind, RowMatrix::from_nalgebra(&w))
}

/// `F` from the cue matrix to the embedding table.
pub fn comprehension_endstate(c: &CueMatrix, s: &EmbeddingTable, ridge: f64) -> Result<MappingMatrix> {
    solve_endstate(Side::Form(c), Side::Meaning(s), ridge)
}

/// `G` from the embedding table to the cue matrix.
pub fn production_endstate(s: &EmbeddingTable, c: &CueMatrix, ridge: f64) -> Result<MappingMatrix> {
    solve_endstate(Side::Meaning(s), Side::Form(c), ridge)
}

// ---------------------------------------------------------------------------
// Predictions
// ---------------------------------------------------------------------------

/// `ŝ = c·F`: sum of the rows of `F` at the active cues.
pub fn predict_semantic(c: &CueVector, f: &MappingMatrix) -> Vec<f64> {
    debug_assert_eq!(c.dim(), f.in_dim());
    let mut out = vec![0.0; f.out_dim()];
    for &a in c.active() {
        out.iter_mut()
            .zip(f.values.row(a))
            .for_each(|(o, x)| *o += x);
    }
    out
}

const COLUMN_CHUNK: usize = 256;

/// `ĉ = s·G`: support for every trigram.
pub fn predict_form(s: &[f64], g: &MappingMatrix) -> Vec<f64> {
    debug_assert_eq!(s.len(), g.in_dim());
    let mut out = vec![0.0; g.out_dim()];
    let values = &g.values;
    par::for_each_chunk_mut(&mut out, COLUMN_CHUNK, |chunk, slot| {
        let start = chunk * COLUMN_CHUNK;
        for (i, si) in s.iter().enumerate() {
            if *si == 0.0 {
                continue;
            }
            let row = &values.row(i)[start..start + slot.len()];
            slot.iter_mut().zip(row).for_each(|(o, x)| *o += si * x);
        }
    });
    out
}

/// `d = c·D`.
pub fn predict_decision(c: &CueVector, d: &DecisionMapping) -> f64 {
    c.active().iter().map(|&a| d.values[a]).sum()
}

// ---------------------------------------------------------------------------
// Widrow-Hoff updates
// ---------------------------------------------------------------------------

/// `F ← F + cᵀ(s_target − ŝ)η` with `ŝ` taken before the update. Only rows
/// at active cues change.
pub fn wh_update_comprehension(f: &mut MappingMatrix, c: &CueVector, s_target: &[f64], eta: f64) {
    let s_hat = predict_semantic(c, f);
    let delta: Vec<f64> = s_target
        .iter()
        .zip(&s_hat)
        .map(|(t, p)| (t - p) * eta)
        .collect();
    for &a in c.active() {
        f.values
            .row_mut(a)
            .iter_mut()
            .zip(&delta)
            .for_each(|(w, d)| *w += d);
    }
}

/// `G ← G + s_inputᵀ(c_target − ĉ)η` with `ĉ = s_input·G` before the update.
pub fn wh_update_production(g: &mut MappingMatrix, s_input: &[f64], c_target: &CueVector, eta: f64) {
    let c_hat = predict_form(s_input, g);
    wh_update_production_with(g, s_input, c_target, &c_hat, eta);
}

/// Production update with a precomputed `ĉ = s_input·G`.
pub(crate) fn wh_update_production_with(
    g: &mut MappingMatrix,
    s_input: &[f64],
    c_target: &CueVector,
    c_hat: &[f64],
    eta: f64,
) {
    let mut err: Vec<f64> = c_hat.iter().map(|x| -x).collect();
    for &a in c_target.active() {
        err[a] += 1.0;
    }
    err.iter_mut().for_each(|e| *e *= eta);
    let cols = g.out_dim();
    if cols == 0 {
        return;
    }
    par::for_each_chunk_mut(g.values.as_mut_slice(), cols, |i, row| {
        let si = s_input[i];
        if si != 0.0 {
            row.iter_mut().zip(&err).for_each(|(w, e)| *w += si * e);
        }
    });
}

/// `D ← D + cᵀ(r − d)η` with `d = c·D` before the update.
pub fn wh_update_decision(d: &mut DecisionMapping, c: &CueVector, response: f64, eta: f64) {
    let delta = (response - predict_decision(c, d)) * eta;
    for &a in c.active() {
        d.values[a] += delta;
    }
}

// ---------------------------------------------------------------------------
// Binary container
// ---------------------------------------------------------------------------

const MAGIC: &[u8; 4] = b"LXMP";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 3 + 8 + 8;

/// Stored kind tag. Decision mappings are stored as `cues x 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    Comprehension = 0,
    Production = 1,
    Decision = 2,
}

impl ContainerKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(ContainerKind::Comprehension),
            1 => Some(ContainerKind::Production),
            2 => Some(ContainerKind::Decision),
            _ => None,
        }
    }
}

/// Layout: `LXMP`, u32 version, u8 kind, 3 zero bytes, u64 in_dim,
/// u64 out_dim, row-major f64 values, CRC-32 of all preceding bytes.
/// All integers and floats little-endian.
pub fn encode_container(kind: ContainerKind, values: &RowMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + values.as_slice().len() * 8 + 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(kind as u8);
    buf.extend_from_slice(&[0, 0, 0]);
    buf.extend_from_slice(&(values.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(values.ncols() as u64).to_le_bytes());
    for x in values.as_slice() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn decode_container(bytes: &[u8], path: &Path) -> Result<(ContainerKind, RowMatrix)> {
    let bad = |msg: &str| LexError::Container {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    if bytes.len() < HEADER_LEN + 4 {
        return Err(bad("truncated header"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(bad("checksum mismatch"));
    }
    if &body[..4] != MAGIC {
        return Err(bad("wrong magic"));
    }
    let version = u32::from_le_bytes(body[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let kind = ContainerKind::from_byte(body[8]).ok_or_else(|| bad("unknown kind"))?;
    let rows = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(body[20..28].try_into().unwrap()) as usize;
    let payload = &body[HEADER_LEN..];
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) != Some(payload.len()) {
        return Err(bad("payload length does not match dimensions"));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((kind, RowMatrix::from_vec(rows, cols, data)?))
}

pub fn write_mapping(path: &Path, m: &MappingMatrix) -> Result<()> {
    let kind = match m.kind {
        MappingKind::Comprehension => ContainerKind::Comprehension,
        MappingKind::Production => ContainerKind::Production,
    };
    crate::dataio::atomic_write(path, &encode_container(kind, &m.values))
}

pub fn read_mapping(path: &Path) -> Result<MappingMatrix> {
    let bytes = read_all(path)?;
    let (kind, values) = decode_container(&bytes, path)?;
    let kind = match kind {
        ContainerKind::Comprehension => MappingKind::Comprehension,
        ContainerKind::Production => MappingKind::Production,
        ContainerKind::Decision => {
            return Err(LexError::Container {
                path: path.to_path_buf(),
                msg: "expected a comprehension or production mapping".into(),
            })
        }
    };
    MappingMatrix::new(kind, values)
}

pub fn write_decision(path: &Path, d: &DecisionMapping) -> Result<()> {
    let m = RowMatrix::from_vec(d.len(), 1, d.values.clone())?;
    crate::dataio::atomic_write(path, &encode_container(ContainerKind::Decision, &m))
}

pub fn read_decision(path: &Path) -> Result<DecisionMapping> {
    let bytes = read_all(path)?;
    match decode_container(&bytes, path)? {
        (ContainerKind::Decision, m) if m.ncols() == 1 => DecisionMapping::from_values(m.as_slice().to_vec()),
        _ => Err(LexError::Container {
            path: path.to_path_buf(),
            msg: "expected a decision mapping".into(),
        }),
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut f = std::fs::File::open(path).map_err(|e| LexError::io(path, e))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(|e| LexError::io(path, e))?;
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::pearson;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RowMatrix {
        let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        RowMatrix::from_vec(rows, cols, data).unwrap()
    }

    fn table(words: &[String], m: RowMatrix) -> EmbeddingTable {
        EmbeddingTable::new(words.to_vec(), m).unwrap()
    }

    /// Every string over {a, b} of length 1..=4: 30 words, 18 trigrams.
    fn ab_words() -> Vec<String> {
        let mut out = Vec::new();
        for len in 1..=4u32 {
            for bits in 0..(1u32 << len) {
                out.push((0..len).map(|i| if bits >> i & 1 == 1 { 'b' } else { 'a' }).collect());
            }
        }
        out
    }

    fn dense_times(c: &CueMatrix, f: &RowMatrix) -> RowMatrix {
        let rows: Vec<Vec<f64>> = c.to_dense().iter().map(|r| f.left_mul(r)).collect();
        RowMatrix::from_rows(&rows).unwrap()
    }

    fn loss(c: &CueMatrix, f: &RowMatrix, s: &EmbeddingTable) -> f64 {
        let p = dense_times(c, f);
        p.as_slice().iter().zip(s.values().as_slice()).map(|(a, b)| (a - b).powi(2)).sum()
    }

    #[test]
    fn endstate_recovers_synthetic_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let words: Vec<String> = ["back", "lack", "tack", "sack", "buck", "bask", "aback", "dog", "cat", "bat"]
            .iter().map(|s| s.to_string()).collect();
        let c = CueMatrix::build(&words).unwrap();
        let m = gaussian(&mut rng, c.ncols(), 5);
        let s = table(&words, dense_times(&c, &m));
        let f = comprehension_endstate(&c, &s, 0.0).unwrap();
        let pred = dense_times(&c, f.values());
        assert!(pred.max_abs_diff(s.values()) < 1e-8);
    }

    #[test]
    fn endstate_interpolates_identity_cues() {
        let words: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let c = CueMatrix::build(&words).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = table(&words, gaussian(&mut rng, 3, 4));
        let f = comprehension_endstate(&c, &s, 0.0).unwrap();
        assert!(f.values().max_abs_diff(s.values()) < 1e-12);
    }

    #[test]
    fn endstate_handles_identical_cue_rows() {
        // "aaa" and "aaaa" share the trigram set {#aa, aaa, aa#}.
        let words: Vec<String> = ["aaa", "aaaa", "b"].iter().map(|s| s.to_string()).collect();
        let c = CueMatrix::build(&words).unwrap();
        assert_eq!(c.row(0).active(), c.row(1).active());
        let s = table(&words, RowMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]]).unwrap());
        let f = comprehension_endstate(&c, &s, 1e-6).unwrap();
        let a = predict_semantic(c.row(0), &f);
        let b = predict_semantic(c.row(1), &f);
        assert_eq!(a, b);
        // the shared row lands near the mean of the two targets
        assert!((a[0] - 0.5).abs() < 1e-3 && (a[1] - 0.5).abs() < 1e-3);
        // and plain least squares falls back to the minimum-norm solution
        assert!(comprehension_endstate(&c, &s, 0.0).is_ok());
    }

    #[test]
    fn endstate_rejects_mismatched_rows() {
        let c = CueMatrix::build(&["ab", "cd"]).unwrap();
        let s = EmbeddingTable::from_rows(vec!["ab".into()], &[vec![1.0]]).unwrap();
        assert!(matches!(
            comprehension_endstate(&c, &s, 0.0),
            Err(LexError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn endstate_is_a_local_minimum() {
        let words = ab_words();
        let c = CueMatrix::build(&words).unwrap();
        assert!(c.ncols() < c.nrows());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = table(&words, gaussian(&mut rng, words.len(), 4));
        let f = comprehension_endstate(&c, &s, 0.0).unwrap();
        let base = loss(&c, f.values(), &s);
        assert!(base > 1e-3, "targets are not in the span of C");
        for _ in 0..20 {
            let mut g = f.values().clone();
            g.as_mut_slice().iter_mut().for_each(|x| *x += 1e-4 * rng.sample::<f64, _>(StandardNormal));
            assert!(loss(&c, &g, &s) > base);
        }
    }

    #[test]
    fn production_endstate_is_a_local_minimum() {
        let words = ab_words();
        let c = CueMatrix::build(&words).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = table(&words, gaussian(&mut rng, words.len(), 6));
        let g = production_endstate(&s, &c, 0.0).unwrap();
        assert_eq!((g.in_dim(), g.out_dim()), (6, c.ncols()));
        let target = c.to_dense();
        let loss = |g: &RowMatrix| -> f64 {
            (0..words.len())
                .map(|i| {
                    g.left_mul(s.row(i))
                        .iter()
                        .zip(&target[i])
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                })
                .sum()
        };
        let base = loss(g.values());
        for _ in 0..20 {
            let mut h = g.values().clone();
            h.as_mut_slice().iter_mut().for_each(|x| *x += 1e-4 * rng.sample::<f64, _>(StandardNormal));
            assert!(loss(&h) > base);
        }
    }

    #[test]
    fn primal_and_dual_routes_agree() {
        // 30 words x 18 trigrams is solved in the primal space; its transpose
        // problem (meaning to form with 40 dims) goes through the dual.
        let words = ab_words();
        let c = CueMatrix::build(&words).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = table(&words, gaussian(&mut rng, words.len(), 40));
        let g = production_endstate(&s, &c, 1e-3).unwrap();
        // closed form with nalgebra on the primal side
        let x = s.values().to_nalgebra();
        let y = Side::Form(&c).to_dense();
        let lambda = 1e-3 * x.norm_squared() / 40.0;
        let a = x.transpose() * &x + DMatrix::identity(40, 40) * lambda;
        let w = a.lu().solve(&(x.transpose() * y)).unwrap();
        assert!(g.values().max_abs_diff(&RowMatrix::from_nalgebra(&w)) < 1e-8);
    }

    #[test]
    fn semantic_prediction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = MappingMatrix::new(MappingKind::Comprehension, gaussian(&mut rng, 5, 3)).unwrap();
        assert_eq!(predict_semantic(&CueVector::empty(5), &f), vec![0.0; 3]);
        let one = CueVector::new(vec![2], 5).unwrap();
        assert_eq!(predict_semantic(&one, &f), f.values().row(2));
        let two = CueVector::new(vec![1, 4], 5).unwrap();
        let oracle = f.values().left_mul(&two.to_dense());
        for (a, b) in predict_semantic(&two, &f).iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn form_prediction_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = MappingMatrix::new(MappingKind::Production, gaussian(&mut rng, 3, 4)).unwrap();
        assert_eq!(predict_form(&[0.0; 3], &g), vec![0.0; 4]);
        let id = MappingMatrix::new(MappingKind::Production, RowMatrix::identity(3)).unwrap();
        assert_eq!(predict_form(&[0.0, 1.0, 0.0], &id), vec![0.0, 1.0, 0.0]);
        let s = [0.5, -1.0, 2.0];
        let got = predict_form(&s, &g);
        for j in 0..4 {
            let expected: f64 = (0..3).map(|i| s[i] * g.values()[(i, j)]).sum();
            assert!((got[j] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_form_prediction_spans_chunks() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = MappingMatrix::new(MappingKind::Production, gaussian(&mut rng, 7, 1000)).unwrap();
        let s: Vec<f64> = (0..7).map(|_| rng.sample(StandardNormal)).collect();
        let got = predict_form(&s, &g);
        let oracle = g.values().left_mul(&s);
        assert_eq!(got, oracle);
    }

    #[test]
    fn decision_prediction_examples() {
        let c = CueVector::new(vec![0, 2, 5, 6], 8).unwrap();
        assert_eq!(predict_decision(&c, &DecisionMapping::zeros(8)), 0.0);
        let mut v = vec![0.0; 8];
        v[5] = 0.01;
        let d = DecisionMapping::from_values(v).unwrap();
        assert_eq!(predict_decision(&CueVector::new(vec![5], 8).unwrap(), &d), 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let v: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let d = DecisionMapping::from_values(v.clone()).unwrap();
        let dense: f64 = c.to_dense().iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((predict_decision(&c, &d) - dense).abs() < 1e-12);
    }

    #[test]
    fn comprehension_update_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let f0 = MappingMatrix::new(MappingKind::Comprehension, gaussian(&mut rng, 6, 3)).unwrap();
        let c = CueVector::new(vec![1, 3], 6).unwrap();

        // zero error: no change
        let target = predict_semantic(&c, &f0);
        let mut f = f0.clone();
        wh_update_comprehension(&mut f, &c, &target, 0.5);
        assert_eq!(f, f0);

        // linear in eta
        let target = [1.0, -2.0, 0.5];
        let mut fa = f0.clone();
        let mut fb = f0.clone();
        wh_update_comprehension(&mut fa, &c, &target, 0.02);
        wh_update_comprehension(&mut fb, &c, &target, 0.01);
        for (i, (a, b)) in fa.values().as_slice().iter().zip(fb.values().as_slice()).enumerate() {
            let base = f0.values().as_slice()[i];
            assert!(((a - base) - 2.0 * (b - base)).abs() < 1e-14);
        }

        // locality
        for r in [0, 2, 4, 5] {
            assert_eq!(fa.values().row(r), f0.values().row(r));
        }
    }

    #[test]
    fn comprehension_update_closed_form() {
        let eta = 0.1;
        let v = [1.0, -0.5, 2.0];
        let c = CueVector::new(vec![0], 1).unwrap();
        let mut f = MappingMatrix::zeros(MappingKind::Comprehension, 1, 3);
        wh_update_comprehension(&mut f, &c, &v, eta);
        for j in 0..3 {
            assert!((f.values()[(0, j)] - eta * v[j]).abs() < 1e-15);
        }
        for k in 2..=50 {
            wh_update_comprehension(&mut f, &c, &v, eta);
            let factor = 1.0 - (1.0f64 - eta).powi(k);
            for j in 0..3 {
                assert!((f.values()[(0, j)] - factor * v[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn production_update_examples() {
        let c = CueVector::new(vec![0, 2], 3).unwrap();
        let mut g = MappingMatrix::zeros(MappingKind::Production, 2, 3);
        let eta = 0.1;
        wh_update_production(&mut g, &[1.0, 2.0], &c, eta);
        let expected = [[eta, 0.0, eta], [2.0 * eta, 0.0, 2.0 * eta]];
        for i in 0..2 {
            for j in 0..3 {
                assert!((g.values()[(i, j)] - expected[i][j]).abs() < 1e-15);
            }
        }

        let before = g.clone();
        wh_update_production(&mut g, &[0.0, 0.0], &c, eta);
        assert_eq!(g, before);

        // a G that already reproduces the binary target
        let mut exact = MappingMatrix::new(
            MappingKind::Production,
            RowMatrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let before = exact.clone();
        wh_update_production(&mut exact, &[1.0, 3.0], &c, eta);
        assert_eq!(exact, before);
    }

    #[test]
    fn decision_update_dynamics() {
        let c = CueVector::new(vec![3], 5).unwrap();
        let mut d = DecisionMapping::zeros(5);
        wh_update_decision(&mut d, &c, 1.0, 0.01);
        assert_eq!(d.values()[3], 0.01);
        assert_eq!(predict_decision(&c, &d), 0.01);

        let before = d.clone();
        let r = predict_decision(&c, &d);
        wh_update_decision(&mut d, &c, r, 0.01);
        assert_eq!(d, before);

        // geometric series: d_t = 1 - (1 - k eta)^t for k active cues
        let c = CueVector::new(vec![0, 1, 4], 5).unwrap();
        let mut d = DecisionMapping::zeros(5);
        let mut last = predict_decision(&c, &d);
        assert_eq!(last, 0.0);
        for t in 1..=500 {
            wh_update_decision(&mut d, &c, 1.0, 0.01);
            let now = predict_decision(&c, &d);
            assert!(now > last && now < 1.0);
            assert!((now - (1.0 - (1.0f64 - 0.03).powi(t))).abs() < 1e-9);
            last = now;
        }
    }

    #[test]
    fn antipriming_on_shared_cue() {
        // A = {0, 1}, B = {1, 2}; F reproduces B exactly before the update.
        let a = CueVector::new(vec![0, 1], 3).unwrap();
        let b = CueVector::new(vec![1, 2], 3).unwrap();
        let s_a = [1.0, 0.0, 0.0, -1.0];
        let s_b = [0.0, 1.0, 2.0, 0.5];
        let mut f = MappingMatrix::new(
            MappingKind::Comprehension,
            RowMatrix::from_rows(&[vec![0.0; 4], vec![0.0; 4], s_b.to_vec()]).unwrap(),
        )
        .unwrap();
        let before = pearson(&predict_semantic(&b, &f), &s_b).unwrap();
        wh_update_comprehension(&mut f, &a, &s_a, 0.01);
        let after = pearson(&predict_semantic(&b, &f), &s_b).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn container_round_trip_and_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let m = gaussian(&mut rng, 4, 3);
        let bytes = encode_container(ContainerKind::Production, &m);
        let path = Path::new("mem");
        let (kind, back) = decode_container(&bytes, path).unwrap();
        assert_eq!(kind, ContainerKind::Production);
        assert_eq!(back, m);
        let mut bad = bytes.clone();
        bad[40] ^= 1;
        assert!(decode_container(&bad, path).is_err());
        assert!(decode_container(&bytes[..10], path).is_err());
    }

    #[test]
    fn mapping_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let f = MappingMatrix::new(MappingKind::Comprehension, gaussian(&mut rng, 5, 2)).unwrap();
        let p = dir.path().join("f.lxm");
        write_mapping(&p, &f).unwrap();
        assert_eq!(read_mapping(&p).unwrap(), f);
        let d = DecisionMapping::from_values(vec![0.5, -1.0]).unwrap();
        let q = dir.path().join("d.lxm");
        write_decision(&q, &d).unwrap();
        assert_eq!(read_decision(&q).unwrap(), d);
        assert!(read_decision(&p).is_err());
    }

    proptest! {
        #[test]
        fn sparse_prediction_matches_dense(seed in 0u64..1000, active in proptest::collection::btree_set(0usize..20, 0..8)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = MappingMatrix::new(MappingKind::Comprehension, gaussian(&mut rng, 20, 6)).unwrap();
            let c = CueVector::new(active.into_iter().collect(), 20).unwrap();
            let sparse = predict_semantic(&c, &f);
            let dense = f.values().left_mul(&c.to_dense());
            for (a, b) in sparse.iter().zip(&dense) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
            }
        }
    }
}
