//! Trial-by-trial simulation of lexical decision experiments with linear
//! discriminative mappings.
//!
//! Wordforms are coded as sparse letter-trigram cue vectors, meanings as
//! dense embeddings. Comprehension (`F`: form to meaning), production
//! (`G`: meaning to form) and a single word/nonword outcome mapping (`D`)
//! are initialised at their least-squares endstate and then, in dynamic
//! mode, updated after every trial with the Widrow-Hoff rule. Each trial
//! yields a row of processing measures that can be related to reaction
//! times.
//!
//! Module map:
//! - [`formspace`]: trigram coding, cue index, orthographic neighbours
//! - [`semspace`]: embedding table, cosine/Pearson primitives
//! - [`mappings`]: endstate solver and incremental updates
//! - [`measures`]: per-trial measures, including the tour solver in [`tour`]
//! - [`trialsim`]: the per-trial pipeline and subject replay
//! - [`dataio`]: file formats, filtering and predictor transforms
//! - [`regharness`]: OLS + AIC comparison of predictor sets
//!
//! With the default `parallel` feature, scans and per-subject work run on
//! rayon. Without it, the same code runs sequentially; results are
//! identical either way.

pub mod dataio;
pub mod dense;
pub mod error;
pub mod formspace;
pub mod mappings;
pub mod measures;
pub mod par;
pub mod regharness;
pub mod semspace;
pub mod stats;
pub mod synth;
pub mod tour;
pub mod trialsim;

pub use error::{LexError, Result};
