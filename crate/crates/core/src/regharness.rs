//! Linear model comparison: ordinary least squares of `rtinv` on three
//! nested predictor sets, ranked by Gaussian AIC.
//!
//! This is a linear proxy for smooth additive models; only the direction
//! of AIC differences is meant to be interpreted.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dataio::PredictorRow;
use crate::dense::RowMatrix;
use crate::error::{LexError, Result};
use crate::par;

/// Columns whose residual norm after projection falls below this fraction
/// of their original norm are treated as aliased.
pub const ALIAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Classical,
    Static,
    Dynamic,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Classical => "classical",
            ModelName::Static => "static",
            ModelName::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A main effect or a pairwise product of two columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Main(&'static str),
    Product(&'static str, &'static str),
}

impl Term {
    pub fn label(&self) -> String {
        match self {
            Term::Main(a) => (*a).to_string(),
            Term::Product(a, b) => format!("{a}:{b}"),
        }
    }

    pub fn columns(&self) -> Vec<&'static str> {
        match self {
            Term::Main(a) => vec![a],
            Term::Product(a, b) => vec![a, b],
        }
    }

    fn eval(&self, row: &PredictorRow) -> f64 {
        let get = |c: &str| row.numeric(c).unwrap_or(f64::NAN);
        match self {
            Term::Main(a) => get(a),
            Term::Product(a, b) => get(a) * get(b),
        }
    }
}

/// Predictor set for `rtinv`; the intercept is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: ModelName,
    pub terms: Vec<Term>,
}

impl ModelSpec {
    pub fn classical() -> Self {
        use Term::*;
        ModelSpec {
            name: ModelName::Classical,
            terms: vec![
                Main("trial_z"),
                Main("word_length"),
                Main("in_bnc"),
                Product("in_bnc", "log_frequency"),
                Main("has_neighbours"),
                Product("has_neighbours", "log_neighbourhood"),
                Main("response_w"),
            ],
        }
    }

    /// Classical set plus the measures available without learning.
    pub fn static_dlm() -> Self {
        use Term::*;
        let mut terms = ModelSpec::classical().terms;
        terms.extend([
            Main("log_semantic_density"),
            Main("has_neighbours_path"),
            Product("has_neighbours_path", "log_shortest_path"),
            Main("c_precision"),
            Main("log_l1chat"),
        ]);
        ModelSpec {
            name: ModelName::Static,
            terms,
        }
    }

    /// Static set plus `yes_activation`.
    pub fn dynamic_dlm() -> Self {
        let mut terms = ModelSpec::static_dlm().terms;
        terms.push(Term::Main("yes_activation"));
        ModelSpec {
            name: ModelName::Dynamic,
            terms,
        }
    }

    pub fn all() -> [ModelSpec; 3] {
        [Self::classical(), Self::static_dlm(), Self::dynamic_dlm()]
    }

    pub fn labels(&self) -> Vec<String> {
        std::iter::once("(intercept)".to_string())
            .chain(self.terms.iter().map(Term::label))
            .collect()
    }

    /// Design matrix with a leading intercept column. Any non-finite
    /// entry is an error; use [`complete_rows`] to pick rows first.
    pub fn design(&self, rows: &[PredictorRow]) -> Result<RowMatrix> {
        let p = self.terms.len() + 1;
        let mut data = Vec::with_capacity(rows.len() * p);
        for row in rows {
            data.push(1.0);
            for t in &self.terms {
                let v = t.eval(row);
                if !v.is_finite() {
                    return Err(LexError::NonFinite("design matrix entry"));
                }
                data.push(v);
            }
        }
        RowMatrix::from_vec(rows.len(), p, data)
    }
}

/// Indices of rows whose response and all terms of every spec are finite.
pub fn complete_rows(rows: &[PredictorRow], specs: &[ModelSpec]) -> Vec<usize> {
    (0..rows.len())
        .filter(|&i| {
            let r = &rows[i];
            r.rtinv.is_finite()
                && specs
                    .iter()
                    .flat_map(|s| s.terms.iter())
                    .all(|t| t.eval(r).is_finite())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Names of the kept columns, aligned with `coefficients`.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Columns removed because they were (numerically) linear combinations
    /// of earlier ones.
    pub aliased: Vec<String>,
    pub rss: f64,
    pub n: usize,
    /// Kept coefficients plus one for the residual variance.
    pub k: usize,
    pub aic: f64,
}

/// Gaussian log-likelihood AIC at the ML variance estimate.
pub fn gaussian_aic(rss: f64, n: usize, k: usize) -> f64 {
    let n = n as f64;
    n * ((2.0 * std::f64::consts::PI * rss / n).ln() + 1.0) + 2.0 * k as f64
}

/// Least squares fit of `y` on the columns of `x`.
///
/// Columns are screened left to right by modified Gram-Schmidt; a column
/// that adds nothing beyond the ones kept so far is dropped and named in
/// `aliased`. The kept columns are then solved by Householder QR.
pub fn ols_fit(x: &RowMatrix, names: &[String], y: &[f64]) -> Result<FitResult> {
    let (n, p) = (x.nrows(), x.ncols());
    if names.len() != p {
        return Err(LexError::DimensionMismatch {
            what: "column names",
            expected: p,
            got: names.len(),
        });
    }
    if y.len() != n {
        return Err(LexError::MismatchedRows {
            expected: n,
            got: y.len(),
        });
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(LexError::NonFinite("regression input"));
    }

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut aliased = Vec::new();
    for j in 0..p {
        let mut v: Vec<f64> = (0..n).map(|i| x[(i, j)]).collect();
        let orig = crate::stats::norm(&v);
        for q in &basis {
            let c = crate::stats::dot(q, &v);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let rest = crate::stats::norm(&v);
        if orig == 0.0 || rest <= ALIAS_TOL * orig {
            aliased.push(names[j].clone());
            continue;
        }
        v.iter_mut().for_each(|a| *a /= rest);
        basis.push(v);
        kept.push(j);
    }

    let k = kept.len() + 1;
    if n <= k {
        return Err(LexError::InvalidArgument(format!(
            "need more rows than parameters: n = {n}, k = {k}"
        )));
    }

    let xk = DMatrix::from_fn(n, kept.len(), |i, c| x[(i, kept[c])]);
    let yv = DVector::from_column_slice(y);
    let qr = xk.clone().qr();
    let qty = qr.q().transpose() * &yv;
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| LexError::Solver {
            reason: "singular R in least squares".into(),
            residual: f64::NAN,
        })?;
    let resid = &yv - &xk * &beta;
    let rss = resid.norm_squared();

    Ok(FitResult {
        names: kept.iter().map(|&j| names[j].clone()).collect(),
        coefficients: beta.iter().copied().collect(),
        aliased,
        rss,
        n,
        k,
        aic: gaussian_aic(rss, n, k),
    })
}

/// Fits `rtinv` on a spec over the given rows.
pub fn fit_spec(rows: &[PredictorRow], spec: &ModelSpec) -> Result<FitResult> {
    let x = spec.design(rows)?;
    let y: Vec<f64> = rows.iter().map(|r| r.rtinv).collect();
    ols_fit(&x, &spec.labels(), &y)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranked {
    pub model: String,
    pub n: usize,
    pub k: usize,
    pub aic: f64,
    pub delta_aic: f64,
    /// How many times more likely the best model is than this one,
    /// `exp(delta_aic / 2)`.
    pub rel_likelihood: f64,
}

/// Ranks fits by ascending AIC (stable on ties).
pub fn compare_models(fits: &[(String, FitResult)]) -> Result<Vec<Ranked>> {
    let Some((_, first)) = fits.first() else {
        return Err(LexError::InvalidArgument("no fits to compare".into()));
    };
    if let Some((_, f)) = fits.iter().find(|(_, f)| f.n != first.n) {
        return Err(LexError::MismatchedRows {
            expected: first.n,
            got: f.n,
        });
    }
    let mut order: Vec<usize> = (0..fits.len()).collect();
    order.sort_by(|&a, &b| fits[a].1.aic.total_cmp(&fits[b].1.aic));
    let best = fits[order[0]].1.aic;
    Ok(order
        .into_iter()
        .map(|i| {
            let (name, f) = &fits[i];
            let delta = f.aic - best;
            Ranked {
                model: name.clone(),
                n: f.n,
                k: f.k,
                aic: f.aic,
                delta_aic: delta,
                rel_likelihood: (delta / 2.0).exp(),
            }
        })
        .collect())
}

/// Which trials a comparison covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusSet {
    Words,
    Nonwords,
}

impl StimulusSet {
    pub fn as_str(self) -> &'static str {
        match self {
            StimulusSet::Words => "words",
            StimulusSet::Nonwords => "nonwords",
        }
    }

    fn includes(self, row: &PredictorRow) -> bool {
        match self {
            StimulusSet::Words => row.lexicality == "W",
            StimulusSet::Nonwords => row.lexicality == "N",
        }
    }
}

/// One line of the comparison report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub subject: String,
    pub stimuli: StimulusSet,
    pub model: String,
    pub n: usize,
    pub k: usize,
    pub aic: f64,
    pub delta_aic: f64,
    pub rel_likelihood: f64,
}

/// Fits all three specs for one subject and stimulus set. Classical and
/// static models use the static measures; the dynamic model uses the
/// dynamic measures. Both tables must list the same trials in the same
/// order; rows incomplete in either table are dropped from all fits.
pub fn compare_subject(
    subject: &str,
    stimuli: StimulusSet,
    static_rows: &[PredictorRow],
    dynamic_rows: &[PredictorRow],
) -> Result<Vec<ReportRow>> {
    if static_rows.len() != dynamic_rows.len() {
        return Err(LexError::MismatchedRows {
            expected: static_rows.len(),
            got: dynamic_rows.len(),
        });
    }
    for (s, d) in static_rows.iter().zip(dynamic_rows) {
        if s.trial != d.trial || s.stimulus != d.stimulus {
            return Err(LexError::InvalidArgument(format!(
                "subject {subject}: static and dynamic tables disagree at trial {}",
                s.trial
            )));
        }
    }
    let specs = ModelSpec::all();
    let keep_s = complete_rows(static_rows, &specs[..2]);
    let keep_d = complete_rows(dynamic_rows, &specs[2..]);
    let keep: Vec<usize> = keep_s
        .into_iter()
        .filter(|i| keep_d.binary_search(i).is_ok() && stimuli.includes(&static_rows[*i]))
        .collect();
    let pick = |rows: &[PredictorRow]| -> Vec<PredictorRow> {
        keep.iter().map(|&i| rows[i].clone()).collect()
    };
    let (srows, drows) = (pick(static_rows), pick(dynamic_rows));
    let fits = vec![
        (ModelName::Classical.to_string(), fit_spec(&srows, &specs[0])?),
        (ModelName::Static.to_string(), fit_spec(&srows, &specs[1])?),
        (ModelName::Dynamic.to_string(), fit_spec(&drows, &specs[2])?),
    ];
    Ok(compare_models(&fits)?
        .into_iter()
        .map(|r| ReportRow {
            subject: subject.to_string(),
            stimuli,
            model: r.model,
            n: r.n,
            k: r.k,
            aic: r.aic,
            delta_aic: r.delta_aic,
            rel_likelihood: r.rel_likelihood,
        })
        .collect())
}

/// Per-subject inputs to a comparison: `(subject, static rows, dynamic rows)`.
pub type SubjectTables = (String, Vec<PredictorRow>, Vec<PredictorRow>);

/// Runs [`compare_subject`] for every subject and both stimulus sets,
/// in parallel; output order follows the input order.
pub fn compare_all(subjects: &[SubjectTables]) -> Result<Vec<ReportRow>> {
    let jobs: Vec<(usize, StimulusSet)> = (0..subjects.len())
        .flat_map(|i| [(i, StimulusSet::Words), (i, StimulusSet::Nonwords)])
        .collect();
    let results = par::map_slice(&jobs, |&(i, set)| {
        let (name, s, d) = &subjects[i];
        compare_subject(name, set, s, d)
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Aggregate over subjects for one stimulus set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub stimuli: StimulusSet,
    pub subjects: usize,
    /// Fraction of subjects whose dynamic AIC is strictly below static.
    pub dynamic_better: f64,
    /// Mean of `aic(static) − aic(dynamic)`; positive favours dynamic.
    pub mean_delta_static_dynamic: f64,
    /// Mean of `aic(classical) − aic(static)`.
    pub mean_delta_classical_static: f64,
}

pub fn summarize(report: &[ReportRow]) -> Vec<Summary> {
    let mut out = Vec::new();
    for set in [StimulusSet::Words, StimulusSet::Nonwords] {
        let mut subjects: Vec<&str> = Vec::new();
        for r in report.iter().filter(|r| r.stimuli == set) {
            if !subjects.contains(&r.subject.as_str()) {
                subjects.push(&r.subject);
            }
        }
        if subjects.is_empty() {
            continue;
        }
        let aic = |s: &str, m: ModelName| {
            report
                .iter()
                .find(|r| r.stimuli == set && r.subject == s && r.model == m.as_str())
                .map_or(f64::NAN, |r| r.aic)
        };
        let mut better = 0usize;
        let (mut sd, mut cs) = (0.0, 0.0);
        for s in &subjects {
            let (c, st, d) = (
                aic(s, ModelName::Classical),
                aic(s, ModelName::Static),
                aic(s, ModelName::Dynamic),
            );
            if d < st {
                better += 1;
            }
            sd += st - d;
            cs += c - st;
        }
        let m = subjects.len() as f64;
        out.push(Summary {
            stimuli: set,
            subjects: subjects.len(),
            dynamic_better: better as f64 / m,
            mean_delta_static_dynamic: sd / m,
            mean_delta_classical_static: cs / m,
        });
    }
    out
}
