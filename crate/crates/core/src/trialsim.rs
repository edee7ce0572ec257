//! Replay of a subject's trial sequence.
//!
//! Each trial runs the same pipeline against the subject's current state:
//! encode the stimulus (A), map form to meaning (B), read out the
//! word/nonword support (C), map the predicted meaning back to form (D), and
//! compute the measures (E). In dynamic mode the mappings are then updated
//! with the Widrow-Hoff rule, using a semantic target chosen from the
//! stimulus' lexicality and the observed response.

use std::collections::HashMap;
use std::fmt;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{LexError, Result};
use crate::formspace::{encode_form, CueMatrix, CueVector, NeighbourLexicon};
use crate::mappings::{
    comprehension_endstate, predict_decision, predict_form, predict_semantic, production_endstate,
    wh_update_comprehension, wh_update_decision, wh_update_production_with, DecisionMapping,
    LearningConfig, MappingMatrix,
};
use crate::measures::{
    c_precision, l1chat, semantic_density, shortest_path_from_cues, MeasureRow, DEFAULT_DENSITY_N,
};
use crate::par;
use crate::semspace::{centroid, EmbeddingTable};

/// Word/nonword status of a stimulus, or a participant's response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lexicality {
    #[serde(rename = "W")]
    Word,
    #[serde(rename = "N")]
    Nonword,
}

impl Lexicality {
    pub fn as_str(self) -> &'static str {
        match self {
            Lexicality::Word => "W",
            Lexicality::Nonword => "N",
        }
    }

    /// Learning target for the decision mapping: 1 for "word".
    pub fn outcome(self) -> f64 {
        match self {
            Lexicality::Word => 1.0,
            Lexicality::Nonword => 0.0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "w" | "word" | "1" => Some(Lexicality::Word),
            "n" | "nonword" | "0" => Some(Lexicality::Nonword),
            _ => None,
        }
    }
}

impl fmt::Display for Lexicality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub subject: String,
    /// Presentation rank within the subject.
    pub order: u64,
    pub block: String,
    pub session: String,
    pub stimulus: String,
    pub lexicality: Lexicality,
    pub response: Lexicality,
    pub rt_ms: f64,
}

/// Input vector for the production update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GInput {
    /// The predicted meaning `ŝ`.
    #[default]
    Predicted,
    /// The semantic target selected for the comprehension update.
    Target,
}

impl GInput {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "predicted" => Some(GInput::Predicted),
            "target" => Some(GInput::Target),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    /// Update mappings after each trial.
    pub dynamic: bool,
    pub learning: LearningConfig,
    pub density_n: usize,
    pub g_input: GInput,
    /// Log stimuli that lose trigrams unknown to the cue index.
    pub record_dropped_cues: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dynamic: true,
            learning: LearningConfig::default(),
            density_n: DEFAULT_DENSITY_N,
            g_input: GInput::Predicted,
            record_dropped_cues: false,
        }
    }
}

impl SimulationConfig {
    pub fn static_mode() -> Self {
        SimulationConfig {
            dynamic: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.learning.validate()?;
        if self.density_n == 0 {
            return Err(LexError::InvalidArgument("density_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// Immutable simulation context shared by all subjects: the paired cue and
/// embedding matrices, the cached centroid of all word meanings, and the
/// word lists used for neighbourhood counts.
#[derive(Debug, Clone)]
pub struct Lexicon {
    cues: CueMatrix,
    semantics: EmbeddingTable,
    wordness: Vec<f64>,
    neighbours: NeighbourLexicon,
    reference: Option<NeighbourLexicon>,
    frequencies: HashMap<String, f64>,
}

impl Lexicon {
    /// `semantics` must list the same words as `cues`, in the same order.
    pub fn new(cues: CueMatrix, semantics: EmbeddingTable) -> Result<Self> {
        if cues.words() != semantics.words() {
            return Err(LexError::InvalidArgument(
                "cue matrix and embedding table must list the same words in the same order".into(),
            ));
        }
        let wordness = centroid(&semantics)?;
        let neighbours = NeighbourLexicon::new(cues.words());
        Ok(Lexicon {
            cues,
            semantics,
            wordness,
            neighbours,
            reference: None,
            frequencies: HashMap::new(),
        })
    }

    /// Builds both matrices from a word list and an embedding source; words
    /// without an embedding are left out.
    pub fn from_words<S: AsRef<str>>(words: &[S], embeddings: &EmbeddingTable) -> Result<(Self, Vec<String>)> {
        let (kept, missing): (Vec<&str>, Vec<&str>) = words
            .iter()
            .map(AsRef::as_ref)
            .partition(|w| embeddings.word_id(w).is_some());
        let cues = CueMatrix::build(&kept)?;
        let semantics = embeddings.select(&kept)?;
        Ok((
            Lexicon::new(cues, semantics)?,
            missing.into_iter().map(str::to_string).collect(),
        ))
    }

    /// Reference list for Levenshtein neighbourhood counts (defaults to the
    /// simulation lexicon).
    pub fn with_reference<S: AsRef<str>>(mut self, words: &[S]) -> Self {
        self.reference = Some(NeighbourLexicon::new(words));
        self
    }

    pub fn with_frequencies(mut self, frequencies: HashMap<String, f64>) -> Self {
        self.frequencies = frequencies;
        self
    }

    pub fn cues(&self) -> &CueMatrix {
        &self.cues
    }

    pub fn semantics(&self) -> &EmbeddingTable {
        &self.semantics
    }

    /// Centroid of all word meanings.
    pub fn wordness(&self) -> &[f64] {
        &self.wordness
    }

    pub fn frequency(&self, word: &str) -> f64 {
        self.frequencies.get(word).copied().unwrap_or(0.0)
    }

    /// Everything about a stimulus that does not depend on learning state.
    pub fn stimulus_info(&self, stimulus: &str) -> Result<StimulusInfo> {
        let encoded = encode_form(stimulus, self.cues.index())?;
        let coltheart = self.neighbours.coltheart(stimulus);
        let levenshtein_n = self
            .reference
            .as_ref()
            .unwrap_or(&self.neighbours)
            .levenshtein_count(stimulus);
        Ok(StimulusInfo {
            cues: encoded.cues,
            dropped: encoded.dropped,
            word_id: self.cues.word_id(stimulus),
            coltheart,
            levenshtein_n,
            length: stimulus.chars().count(),
            frequency: self.frequency(stimulus),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusInfo {
    pub cues: CueVector,
    pub dropped: usize,
    /// Row in the lexicon, when the stimulus is a known word.
    pub word_id: Option<usize>,
    /// Lexicon ids of Coltheart neighbours.
    pub coltheart: Vec<usize>,
    pub levenshtein_n: usize,
    pub length: usize,
    pub frequency: f64,
}

/// Prior knowledge: mappings every subject starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct Priors {
    pub f: MappingMatrix,
    pub g: MappingMatrix,
    pub d: DecisionMapping,
}

impl Priors {
    /// Endstate `F` and `G` for the lexicon; `D` starts at zero.
    pub fn endstate(lexicon: &Lexicon, ridge: f64) -> Result<Self> {
        let f = comprehension_endstate(&lexicon.cues, &lexicon.semantics, ridge)?;
        let g = production_endstate(&lexicon.semantics, &lexicon.cues, ridge)?;
        Ok(Priors {
            d: DecisionMapping::zeros(lexicon.cues.ncols()),
            f,
            g,
        })
    }

    pub fn check(&self, lexicon: &Lexicon) -> Result<()> {
        let (t, d) = (lexicon.cues.ncols(), lexicon.semantics.dim());
        let checks = [
            ("F rows", t, self.f.in_dim()),
            ("F columns", d, self.f.out_dim()),
            ("G rows", d, self.g.in_dim()),
            ("G columns", t, self.g.out_dim()),
            ("D length", t, self.d.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(LexError::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }
}

/// Mutable learning state owned by one simulated subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectState {
    pub f: MappingMatrix,
    pub g: MappingMatrix,
    pub d: DecisionMapping,
    /// Evolving meaning of "nonword"; starts at zero.
    pub nonword: Vec<f64>,
    /// Trials that produced a measure row.
    pub trials_run: u64,
    pub last_order: Option<u64>,
}

impl SubjectState {
    pub fn new(priors: &Priors) -> Self {
        SubjectState {
            nonword: vec![0.0; priors.f.out_dim()],
            f: priors.f.clone(),
            g: priors.g.clone(),
            d: priors.d.clone(),
            trials_run: 0,
            last_order: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    InvalidStimulus,
    /// No trigram of the stimulus is in the cue index.
    EmptyCueVector,
    /// A word stimulus without an embedding.
    MissingEmbedding,
    /// The predicted meaning is the zero vector.
    ZeroPrediction,
    /// The predicted form vector is constant.
    ConstantFormPrediction,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipReason::InvalidStimulus => "invalid_stimulus",
            SkipReason::EmptyCueVector => "empty_cue_vector",
            SkipReason::MissingEmbedding => "missing_embedding",
            SkipReason::ZeroPrediction => "zero_prediction",
            SkipReason::ConstantFormPrediction => "constant_form_prediction",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipEvent {
    pub subject: String,
    pub order: u64,
    pub stimulus: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Measured(MeasureRow),
    Skipped(SkipEvent),
}

/// Semantic target for the comprehension update:
///
/// | lexicality | response W      | response N     |
/// |------------|-----------------|----------------|
/// | W          | the word's `s`  | nonword vector |
/// | N          | word centroid   | nonword vector |
pub fn select_semantic_target(
    lexicality: Lexicality,
    response: Lexicality,
    state: &SubjectState,
    lexicon: &Lexicon,
    word_id: Option<usize>,
) -> std::result::Result<Vec<f64>, SkipReason> {
    match (lexicality, response) {
        (Lexicality::Word, Lexicality::Word) => word_id
            .map(|i| lexicon.semantics.row(i).to_vec())
            .ok_or(SkipReason::MissingEmbedding),
        (Lexicality::Nonword, Lexicality::Word) => Ok(lexicon.wordness.clone()),
        (_, Lexicality::Nonword) => Ok(state.nonword.clone()),
    }
}

/// `n ← (n + ŝ)/2`, applied after a nonword response.
pub fn update_nonword_vector(state: &mut SubjectState, s_hat: &[f64]) {
    state
        .nonword
        .iter_mut()
        .zip(s_hat)
        .for_each(|(n, s)| *n = (*n + s) / 2.0);
}

/// Output of replaying one subject.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SubjectRun {
    pub rows: Vec<MeasureRow>,
    pub skipped: Vec<SkipEvent>,
}

/// Runs trials against a shared lexicon. Stimulus lookups are cached up
/// front because they do not depend on the learning state.
#[derive(Debug)]
pub struct Simulator<'a> {
    lexicon: &'a Lexicon,
    config: SimulationConfig,
    cache: HashMap<String, StimulusInfo>,
}

impl<'a> Simulator<'a> {
    pub fn new(lexicon: &'a Lexicon, config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        Ok(Simulator {
            lexicon,
            config,
            cache: HashMap::new(),
        })
    }

    /// Precomputes stimulus information (in parallel) for `stimuli`.
    pub fn with_stimuli<'s, I>(mut self, stimuli: I) -> Self
    where
        I: IntoIterator<Item = &'s str>,
    {
        let mut unique: Vec<&str> = stimuli.into_iter().collect();
        unique.sort_unstable();
        unique.dedup();
        let infos = par::map_slice(&unique, |s| self.lexicon.stimulus_info(s).ok());
        for (s, info) in unique.into_iter().zip(infos) {
            if let Some(info) = info {
                self.cache.insert(s.to_string(), info);
            }
        }
        self
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        self.lexicon
    }

    fn info(&self, stimulus: &str) -> Option<std::borrow::Cow<'_, StimulusInfo>> {
        match self.cache.get(stimulus) {
            Some(i) => Some(std::borrow::Cow::Borrowed(i)),
            None => self.lexicon.stimulus_info(stimulus).ok().map(std::borrow::Cow::Owned),
        }
    }

    /// Runs one trial: measures from the pre-trial state, then (in dynamic
    /// mode) the learning updates. Static mode never touches `state`.
    pub fn run_trial(&self, state: &mut SubjectState, trial: &TrialRecord) -> Result<TrialOutcome> {
        if let Some(prev) = state.last_order {
            if trial.order <= prev {
                return Err(LexError::Unsorted {
                    subject: trial.subject.clone(),
                    order: trial.order,
                    previous: prev,
                });
            }
        }
        let outcome = self.run_trial_inner(state, trial);
        if self.config.dynamic {
            state.last_order = Some(trial.order);
        }
        Ok(match outcome {
            Ok(row) => TrialOutcome::Measured(row),
            Err(reason) => {
                let ev = SkipEvent {
                    subject: trial.subject.clone(),
                    order: trial.order,
                    stimulus: trial.stimulus.clone(),
                    reason,
                };
                info!(
                    "event=skip subject={} trial={} stimulus={} reason={}",
                    ev.subject, ev.order, ev.stimulus, ev.reason
                );
                TrialOutcome::Skipped(ev)
            }
        })
    }

    fn run_trial_inner(
        &self,
        state: &mut SubjectState,
        trial: &TrialRecord,
    ) -> std::result::Result<MeasureRow, SkipReason> {
        let lex = self.lexicon;
        // (A) encode
        let info = self.info(&trial.stimulus).ok_or(SkipReason::InvalidStimulus)?;
        if trial.lexicality == Lexicality::Word && info.word_id.is_none() {
            return Err(SkipReason::MissingEmbedding);
        }
        if info.cues.is_empty() {
            return Err(SkipReason::EmptyCueVector);
        }
        if self.config.record_dropped_cues && info.dropped > 0 {
            debug!(
                "event=dropped_cues subject={} trial={} stimulus={} dropped={}",
                trial.subject, trial.order, trial.stimulus, info.dropped
            );
        }
        let c = &info.cues;
        // (B) form to meaning, (C) word support, (D) meaning back to form
        let s_hat = predict_semantic(c, &state.f);
        let d_t = predict_decision(c, &state.d);
        let c_hat = predict_form(&s_hat, &state.g);

        // (E) measures from the pre-update state
        let density = semantic_density(&s_hat, &lex.semantics, self.config.density_n)
            .map_err(|_| SkipReason::ZeroPrediction)?;
        let neighbours: Vec<&CueVector> = info.coltheart.iter().map(|&i| lex.cues.row(i)).collect();
        let path = shortest_path_from_cues(&s_hat, &neighbours, &state.f);
        let precision = c_precision(c, &c_hat).map_err(|_| SkipReason::ConstantFormPrediction)?;
        let row = MeasureRow {
            subject: trial.subject.clone(),
            trial: trial.order,
            block: trial.block.clone(),
            session: trial.session.clone(),
            stimulus: trial.stimulus.clone(),
            lexicality: trial.lexicality.to_string(),
            response: trial.response.to_string(),
            rt_ms: trial.rt_ms,
            semantic_density: density,
            shortest_path: path.length,
            has_neighbours_path: path.has_neighbours,
            c_precision: precision,
            l1chat: l1chat(&c_hat),
            yes_activation: d_t,
            word_length: info.length,
            frequency: info.frequency,
            coltheart_n: info.coltheart.len(),
            levenshtein_n: info.levenshtein_n,
            dropped_cues: info.dropped,
        };

        if self.config.dynamic {
            let target =
                select_semantic_target(trial.lexicality, trial.response, state, lex, info.word_id)?;
            let eta = self.config.learning.eta_fg;
            // every update reads the pre-trial state: G's error uses c_hat
            // from step D, F's uses s_hat from step B, D's uses d_t
            let s_input: &[f64] = match self.config.g_input {
                GInput::Predicted => &s_hat,
                GInput::Target => &target,
            };
            match self.config.g_input {
                GInput::Predicted => wh_update_production_with(&mut state.g, s_input, c, &c_hat, eta),
                GInput::Target => {
                    let c_hat_t = predict_form(s_input, &state.g);
                    wh_update_production_with(&mut state.g, s_input, c, &c_hat_t, eta)
                }
            }
            wh_update_comprehension(&mut state.f, c, &target, eta);
            wh_update_decision(&mut state.d, c, trial.response.outcome(), self.config.learning.eta_d);
            if trial.response == Lexicality::Nonword {
                update_nonword_vector(state, &s_hat);
            }
            state.trials_run += 1;
        }
        Ok(row)
    }

    /// Replays `trials` (sorted by strictly increasing order, continuing
    /// after any trials already run on `state`).
    pub fn simulate_subject(&self, state: &mut SubjectState, trials: &[TrialRecord]) -> Result<SubjectRun> {
        let mut prev = state.last_order;
        for t in trials {
            if let Some(p) = prev {
                if t.order <= p {
                    return Err(LexError::Unsorted {
                        subject: t.subject.clone(),
                        order: t.order,
                        previous: p,
                    });
                }
            }
            prev = Some(t.order);
        }
        let mut run = SubjectRun::default();
        for t in trials {
            match self.run_trial(state, t)? {
                TrialOutcome::Measured(r) => run.rows.push(r),
                TrialOutcome::Skipped(s) => run.skipped.push(s),
            }
        }
        Ok(run)
    }

    /// Replays several subjects in parallel, each from a private copy of the
    /// priors. Output order follows `subjects`.
    pub fn simulate_subjects(
        &self,
        priors: &Priors,
        subjects: &[(String, Vec<TrialRecord>)],
    ) -> Vec<(String, Result<SubjectRun>)> {
        par::map_slice(subjects, |(id, trials)| {
            let mut state = SubjectState::new(priors);
            (id.clone(), self.simulate_subject(&mut state, trials))
        })
    }
}
