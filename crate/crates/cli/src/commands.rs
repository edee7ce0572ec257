use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::Serialize;

use lexsim::dataio::{self, PredictorRow};
use lexsim::dense::RowMatrix;
use lexsim::mappings::{self, predict_form, predict_semantic};
use lexsim::par;
use lexsim::regharness::{self, SubjectTables};
use lexsim::semspace::{correlation_accuracy, EmbeddingTable};
use lexsim::synth;
use lexsim::trialsim::{Lexicon, Priors, Simulator, TrialRecord};

use crate::config::{Mode, Settings};

pub const F_FILE: &str = "F.lxm";
pub const G_FILE: &str = "G.lxm";
pub const D_FILE: &str = "D.lxm";
pub const WORDS_FILE: &str = "words.txt";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const EVALUATION_FILE: &str = "evaluation.toml";
pub const SKIP_FILE: &str = "skipped.csv";
pub const DICTIONARY_FILE: &str = "data_dictionary.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const SUMMARY_FILE: &str = "comparison_summary.csv";

fn load_lexicon(s: &Settings) -> Result<Lexicon> {
    let lex_path = s.require("lexicon", &s.lexicon)?;
    let emb_path = s.require("embeddings", &s.embeddings)?;
    let words = dataio::load_word_list(&lex_path)?;
    let embeddings = dataio::load_embeddings(&emb_path)?;
    let (mut lexicon, missing) = Lexicon::from_words(&words, &embeddings)?;
    if !missing.is_empty() {
        warn!("event=missing_embeddings count={} first={}", missing.len(), missing[0]);
    }
    if let Some(p) = s.optional("reference", &s.reference)? {
        lexicon = lexicon.with_reference(&dataio::load_word_list(&p)?);
    }
    if let Some(p) = s.optional("frequencies", &s.frequencies)? {
        lexicon = lexicon.with_frequencies(dataio::load_frequencies(&p)?);
    }
    info!(
        "event=lexicon words={} trigrams={} dim={}",
        lexicon.cues().nrows(),
        lexicon.cues().ncols(),
        lexicon.semantics().dim()
    );
    Ok(lexicon)
}

fn priors_dir(s: &Settings) -> Result<PathBuf> {
    s.priors
        .clone()
        .or_else(|| s.out.clone())
        .context("missing required setting `priors` (or `out`)")
}

fn load_priors(dir: &Path, lexicon: &Lexicon) -> Result<Priors> {
    for f in [F_FILE, G_FILE, D_FILE, WORDS_FILE] {
        if !dir.join(f).exists() {
            bail!("priors not built: {} is missing (run `lexsim build`)", dir.join(f).display());
        }
    }
    let words = dataio::load_word_list(&dir.join(WORDS_FILE))?;
    if words != lexicon.cues().words() {
        bail!("priors in {} were built from a different lexicon", dir.display());
    }
    let priors = Priors {
        f: mappings::read_mapping(&dir.join(F_FILE))?,
        g: mappings::read_mapping(&dir.join(G_FILE))?,
        d: mappings::read_decision(&dir.join(D_FILE))?,
    };
    priors.check(lexicon)?;
    Ok(priors)
}

#[derive(Debug, Serialize)]
struct Manifest {
    words: usize,
    trigrams: usize,
    dim: usize,
    ridge: f64,
}

#[derive(Debug, Serialize)]
pub struct Evaluation {
    pub words: usize,
    pub comprehension_accuracy_at_1: f64,
    pub comprehension_accuracy_at_5: f64,
    pub comprehension_undefined: usize,
    /// Correlation accuracy of predicted against binary form vectors.
    pub production_accuracy_at_1: f64,
    pub production_accuracy_at_5: f64,
    pub production_undefined: usize,
}

pub fn evaluation(lexicon: &Lexicon, priors: &Priors) -> Result<Evaluation> {
    let cues = lexicon.cues();
    let sem = lexicon.semantics();
    let s_hat = par::map_range(cues.nrows(), |i| predict_semantic(cues.row(i), &priors.f));
    let s_hat = RowMatrix::from_rows(&s_hat)?;
    let c_hat = par::map_range(cues.nrows(), |i| predict_form(sem.row(i), &priors.g));
    let c_hat = RowMatrix::from_rows(&c_hat)?;
    let forms = EmbeddingTable::from_rows(cues.words().to_vec(), &cues.to_dense())?;
    let c1 = correlation_accuracy(&s_hat, sem, 1)?;
    let c5 = correlation_accuracy(&s_hat, sem, 5)?;
    let p1 = correlation_accuracy(&c_hat, &forms, 1)?;
    let p5 = correlation_accuracy(&c_hat, &forms, 5)?;
    Ok(Evaluation {
        words: cues.nrows(),
        comprehension_accuracy_at_1: c1.accuracy,
        comprehension_accuracy_at_5: c5.accuracy,
        comprehension_undefined: c1.undefined_rows.len(),
        production_accuracy_at_1: p1.accuracy,
        production_accuracy_at_5: p5.accuracy,
        production_undefined: p1.undefined_rows.len(),
    })
}

fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string(value)?;
    dataio::atomic_write(path, text.as_bytes())?;
    Ok(())
}

fn report_evaluation(e: &Evaluation) {
    info!(
        "event=evaluation words={} comprehension_at_1={} comprehension_at_5={} production_at_1={} production_at_5={}",
        e.words,
        e.comprehension_accuracy_at_1,
        e.comprehension_accuracy_at_5,
        e.production_accuracy_at_1,
        e.production_accuracy_at_5
    );
    println!(
        "comprehension accuracy: @1 {:.4}  @5 {:.4}",
        e.comprehension_accuracy_at_1, e.comprehension_accuracy_at_5
    );
    println!(
        "production accuracy:    @1 {:.4}  @5 {:.4}",
        e.production_accuracy_at_1, e.production_accuracy_at_5
    );
}

pub fn build(s: &Settings) -> Result<()> {
    let lexicon = load_lexicon(s)?;
    let dir = priors_dir(s)?;
    std::fs::create_dir_all(&dir)?;
    let ridge = s.learning().ridge;
    let workers = s.workers()?;
    let (priors, eval) = par::with_workers(workers, || -> Result<_> {
        let priors = Priors::endstate(&lexicon, ridge)?;
        let eval = evaluation(&lexicon, &priors)?;
        Ok((priors, eval))
    })?;
    mappings::write_mapping(&dir.join(F_FILE), &priors.f)?;
    mappings::write_mapping(&dir.join(G_FILE), &priors.g)?;
    mappings::write_decision(&dir.join(D_FILE), &priors.d)?;
    dataio::write_word_list(lexicon.cues().words(), &dir.join(WORDS_FILE))?;
    let manifest = Manifest {
        words: lexicon.cues().nrows(),
        trigrams: lexicon.cues().ncols(),
        dim: lexicon.semantics().dim(),
        ridge,
    };
    write_toml(&manifest, &dir.join(MANIFEST_FILE))?;
    write_toml(&eval, &dir.join(EVALUATION_FILE))?;
    info!("event=build_done dir={}", dir.display());
    report_evaluation(&eval);
    Ok(())
}

pub fn evaluate(s: &Settings) -> Result<()> {
    let lexicon = load_lexicon(s)?;
    let dir = priors_dir(s)?;
    let priors = load_priors(&dir, &lexicon)?;
    let eval = par::with_workers(s.workers()?, || evaluation(&lexicon, &priors))?;
    let target = s.out.clone().unwrap_or(dir);
    std::fs::create_dir_all(&target)?;
    write_toml(&eval, &target.join(EVALUATION_FILE))?;
    report_evaluation(&eval);
    Ok(())
}

/// File-name-safe form of a subject id.
pub fn subject_file(subject: &str) -> String {
    let clean: String = subject
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{clean}.csv")
}

fn select_subjects(s: &Settings, all: Vec<(String, Vec<TrialRecord>)>) -> Result<Vec<(String, Vec<TrialRecord>)>> {
    let Some(wanted) = &s.subjects else {
        return Ok(all);
    };
    for w in wanted {
        if !all.iter().any(|(id, _)| id == w) {
            warn!("event=unknown_subject subject={w}");
        }
    }
    let picked: Vec<_> = all.into_iter().filter(|(id, _)| wanted.contains(id)).collect();
    if picked.is_empty() {
        bail!("none of the requested subjects are present in the trial file");
    }
    Ok(picked)
}

pub fn simulate(s: &Settings) -> Result<()> {
    let lexicon = load_lexicon(s)?;
    let priors = load_priors(&priors_dir(s)?, &lexicon)?;
    let trials_path = s.require("trials", &s.trials)?;
    let (by_subject, report) = dataio::load_trials(&trials_path)?;
    info!(
        "event=filter total={} timeout={} null_stimulus={} too_fast={} too_slow={} kept={}",
        report.total, report.timeout, report.null_stimulus, report.too_fast, report.too_slow, report.kept
    );
    let subjects = select_subjects(s, by_subject.into_iter().collect())?;
    let out = s.out_dir()?;
    let workers = s.workers()?;
    let mode = s.mode.unwrap_or(Mode::Both);
    let mut stimuli: Vec<&str> = subjects
        .iter()
        .flat_map(|(_, t)| t.iter().map(|t| t.stimulus.as_str()))
        .collect();
    stimuli.sort_unstable();
    stimuli.dedup();

    for (name, dynamic) in mode.runs() {
        let dir = out.join(name);
        std::fs::create_dir_all(&dir)?;
        let results = par::with_workers(workers, || -> Result<_> {
            let sim = Simulator::new(&lexicon, s.simulation(dynamic))?.with_stimuli(stimuli.iter().copied());
            let runs = sim.simulate_subjects(&priors, &subjects);
            // Transform and write inside the pool; files are per subject.
            let written = par::map_slice(&runs, |(id, run)| -> Result<_> {
                let run = run.as_ref().map_err(|e| anyhow::anyhow!("subject {id}: {e}"))?;
                let (rows, backoff) = dataio::build_predictors(&run.rows)
                    .with_context(|| format!("subject {id}: building predictors"))?;
                for (col, min) in &backoff.violations {
                    warn!("event=backoff_violation subject={id} column={col} min_nonzero={min}");
                }
                dataio::write_measures(&rows, &dir.join(subject_file(id)))?;
                info!(
                    "event=simulated subject={id} mode={name} rows={} skipped={}",
                    rows.len(),
                    run.skipped.len()
                );
                Ok(run.skipped.clone())
            });
            written.into_iter().collect::<Result<Vec<_>>>()
        })?;
        let skipped: Vec<_> = results.into_iter().flatten().collect();
        dataio::write_skip_log(&skipped, &dir.join(SKIP_FILE))?;
    }
    dataio::write_data_dictionary(&out.join(DICTIONARY_FILE))?;
    println!("simulated {} subject(s) into {}", subjects.len(), out.display());
    Ok(())
}

fn measure_files(dir: &Path) -> Result<HashMap<String, PathBuf>> {
    let mut out = HashMap::new();
    let entries = std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    for e in entries {
        let p = e?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if name.ends_with(".csv") && name != SKIP_FILE {
            out.insert(name, p);
        }
    }
    Ok(out)
}

pub fn compare(s: &Settings) -> Result<()> {
    let out = s.out.clone().context("missing required setting `out`")?;
    let (sdir, ddir) = (out.join("static"), out.join("dynamic"));
    if !sdir.is_dir() || !ddir.is_dir() {
        bail!("compare needs both {} and {} (run `lexsim simulate --mode both`)", sdir.display(), ddir.display());
    }
    let sfiles = measure_files(&sdir)?;
    let dfiles = measure_files(&ddir)?;
    let mut names: Vec<&String> = sfiles.keys().collect();
    names.sort();
    let mut tables: Vec<SubjectTables> = Vec::new();
    for name in names {
        let Some(dpath) = dfiles.get(name) else {
            bail!("{name} has static but no dynamic measures");
        };
        let srows: Vec<PredictorRow> = dataio::read_measures(&sfiles[name])?;
        let drows = dataio::read_measures(dpath)?;
        let Some(first) = srows.first() else {
            bail!("{} is empty", sfiles[name].display());
        };
        let subject = first.subject.clone();
        if let Some(wanted) = &s.subjects {
            if !wanted.contains(&subject) {
                continue;
            }
        }
        if srows.len() != drows.len() {
            bail!(
                "subject {subject}: {} static rows but {} dynamic rows",
                srows.len(),
                drows.len()
            );
        }
        tables.push((subject, srows, drows));
    }
    if let Some(extra) = dfiles.keys().find(|k| !sfiles.contains_key(*k)) {
        bail!("{extra} has dynamic but no static measures");
    }
    if tables.is_empty() {
        bail!("no measure files to compare in {}", out.display());
    }
    let report = par::with_workers(s.workers()?, || regharness::compare_all(&tables))?;
    let summary = regharness::summarize(&report);
    dataio::write_csv(&report, &out.join(COMPARISON_FILE))?;
    dataio::write_csv(&summary, &out.join(SUMMARY_FILE))?;
    for sm in &summary {
        info!(
            "event=compare stimuli={} subjects={} dynamic_better={} mean_delta_static_dynamic={}",
            sm.stimuli.as_str(),
            sm.subjects,
            sm.dynamic_better,
            sm.mean_delta_static_dynamic
        );
        println!(
            "{:<8} subjects {:>3}  dynamic better {:>5.1}%  mean AIC(static) - AIC(dynamic) {:>9.3}  mean AIC(classical) - AIC(static) {:>9.3}",
            sm.stimuli.as_str(),
            sm.subjects,
            100.0 * sm.dynamic_better,
            sm.mean_delta_static_dynamic,
            sm.mean_delta_classical_static
        );
    }
    Ok(())
}

/// Sizes for the synthetic dataset generator.
#[derive(Debug, Clone, clap::Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    pub words: usize,
    #[arg(long, default_value_t = 150)]
    pub nonwords: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 4)]
    pub n_subjects: usize,
    #[arg(long, default_value_t = 400)]
    pub trials_per_subject: usize,
}

/// Writes a self-contained toy dataset plus a config file pointing at it.
pub fn synth(s: &Settings, args: &SynthArgs) -> Result<()> {
    let out = s.out_dir()?;
    let mut rng = synth::rng(s.seed.unwrap_or(1));
    let words = synth::random_words(&mut rng, args.words);
    let cues = lexsim::formspace::CueMatrix::build(&words)?;
    let emb = synth::form_linked_embeddings(&mut rng, &cues, args.dim, 1.0)?;
    let nonwords = synth::random_nonwords(&mut rng, &words, args.nonwords);
    let freqs = synth::frequencies(&mut rng, &words, 0.15);
    let spec = synth::TrialListSpec {
        trials: args.trials_per_subject,
        ..Default::default()
    };
    let mut trials = Vec::new();
    for i in 1..=args.n_subjects {
        trials.extend(synth::trial_list(&mut rng, &i.to_string(), &words, &nonwords, &spec));
    }
    dataio::write_word_list(&words, &out.join("lexicon.txt"))?;
    dataio::write_embeddings(&emb, &out.join("embeddings.txt"))?;
    #[derive(Serialize)]
    struct Freq<'a> {
        word: &'a str,
        count: f64,
    }
    let rows: Vec<Freq> = freqs.iter().map(|(w, c)| Freq { word: w, count: *c }).collect();
    dataio::write_csv(&rows, &out.join("frequencies.csv"))?;
    dataio::write_trials(&trials, &out.join("trials.csv"))?;
    let config = "lexicon = \"lexicon.txt\"\n\
                  embeddings = \"embeddings.txt\"\n\
                  frequencies = \"frequencies.csv\"\n\
                  trials = \"trials.csv\"\n\
                  priors = \"run/priors\"\n\
                  out = \"run\"\n\
                  mode = \"both\"\n";
    dataio::atomic_write(&out.join("config.toml"), config.as_bytes())?;
    println!("wrote toy dataset to {}", out.display());
    Ok(())
}
