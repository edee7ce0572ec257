//! Run configuration: an optional TOML file, overridden key by key by
//! command-line flags of the same name.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use lexsim::mappings::LearningConfig;
use lexsim::measures::DEFAULT_DENSITY_N;
use lexsim::trialsim::{GInput, SimulationConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dynamic,
    Static,
    Both,
}

impl Mode {
    /// `(directory name, dynamic?)` for each simulation to run.
    pub fn runs(self) -> Vec<(&'static str, bool)> {
        match self {
            Mode::Dynamic => vec![("dynamic", true)],
            Mode::Static => vec![("static", false)],
            Mode::Both => vec![("static", false), ("dynamic", true)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GInputArg {
    Predicted,
    Target,
}

impl From<GInputArg> for GInput {
    fn from(g: GInputArg) -> Self {
        match g {
            GInputArg::Predicted => GInput::Predicted,
            GInputArg::Target => GInput::Target,
        }
    }
}

/// Every option, as both a flag and a config key. Keys may be written
/// with dashes or underscores.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Word list, one word per line.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Embedding text file (`word v1 ... vd`, optional `count dim` header).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Frequency CSV (`word,count`).
    #[arg(long)]
    pub frequencies: Option<PathBuf>,
    /// Word list used for Levenshtein neighbourhood counts (defaults to the lexicon).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Trial CSV.
    #[arg(long)]
    pub trials: Option<PathBuf>,
    /// Directory holding the built mappings.
    #[arg(long)]
    pub priors: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    #[serde(alias = "eta-fg")]
    pub eta_fg: Option<f64>,
    #[arg(long)]
    #[serde(alias = "eta-d")]
    pub eta_d: Option<f64>,
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    #[serde(alias = "density-n")]
    pub density_n: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(alias = "g-input")]
    pub g_input: Option<GInputArg>,
    /// Comma-separated subject ids to process.
    #[arg(long, value_delimiter = ',')]
    pub subjects: Option<Vec<String>>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seed for synthetic data generation only; simulation is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut s: Settings =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // Relative paths in a config file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut s.lexicon,
            &mut s.embeddings,
            &mut s.frequencies,
            &mut s.reference,
            &mut s.trials,
            &mut s.priors,
            &mut s.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(s)
    }

    /// `self` with every value set in `flags` replaced.
    pub fn overlay(mut self, flags: Settings) -> Self {
        overlay!(self, flags; lexicon, embeddings, frequencies, reference, trials, priors, out,
                 mode, eta_fg, eta_d, ridge, density_n, g_input, subjects, workers, seed);
        self
    }

    pub fn require(&self, name: &str, p: &Option<PathBuf>) -> Result<PathBuf> {
        match p {
            Some(p) if p.exists() => Ok(p.clone()),
            Some(p) => bail!("{name} path {} does not exist", p.display()),
            None => bail!("missing required setting `{name}`"),
        }
    }

    pub fn optional(&self, name: &str, p: &Option<PathBuf>) -> Result<Option<PathBuf>> {
        p.as_ref().map(|_| self.require(name, p)).transpose()
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let out = self.out.clone().context("missing required setting `out`")?;
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(out)
    }

    pub fn workers(&self) -> Result<usize> {
        match self.workers {
            Some(0) => bail!("workers must be at least 1"),
            Some(w) => Ok(w),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    pub fn learning(&self) -> LearningConfig {
        let d = LearningConfig::default();
        LearningConfig {
            eta_fg: self.eta_fg.unwrap_or(d.eta_fg),
            eta_d: self.eta_d.unwrap_or(d.eta_d),
            ridge: self.ridge.unwrap_or(d.ridge),
        }
    }

    pub fn simulation(&self, dynamic: bool) -> SimulationConfig {
        SimulationConfig {
            dynamic,
            learning: self.learning(),
            density_n: self.density_n.unwrap_or(DEFAULT_DENSITY_N),
            g_input: self.g_input.map(Into::into).unwrap_or_default(),
            record_dropped_cues: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: Settings = toml::from_str(
            "eta-fg = 0.5\nridge = 1e-6\nmode = \"both\"\nsubjects = [\"1\", \"2\"]\n",
        )
        .unwrap();
        let flags = Settings {
            eta_fg: Some(0.0),
            ..Default::default()
        };
        let s = file.overlay(flags);
        assert_eq!(s.eta_fg, Some(0.0));
        assert_eq!(s.ridge, Some(1e-6));
        assert_eq!(s.mode, Some(Mode::Both));
        assert_eq!(s.learning().eta_d, LearningConfig::default().eta_d);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Settings>("etafg = 1.0").is_err());
    }
}
