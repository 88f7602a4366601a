//! Experiment configuration: a flat JSON object whose fields can each be
//! overridden from the command line.

use std::path::{Path, PathBuf};

use infoquant::glm::{FitOptions, Head};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};

/// Fixed offsets from the master seed, one per stage.
pub mod seed_offset {
    pub const DATA: u64 = 0;
    pub const SPLIT: u64 = 1;
    pub const POSTERIOR_SAMPLES: u64 = 2;
    pub const SELECTION: u64 = 3;
    pub const LABELS: u64 = 4;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadSpec {
    Categorical,
    Gaussian,
}

/// Where EPIG-family scores take their evaluation points from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSource {
    /// A held-out split disjoint from train and pool.
    Split,
    /// The (remaining) pool itself.
    Pool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Dataset CSV; synthetic data is generated when absent.
    pub data: Option<PathBuf>,
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    pub class_sep: f64,
    pub head: HeadSpec,
    pub lambda: f64,
    pub train_size: usize,
    pub pool_size: usize,
    pub eval_size: usize,
    pub eval_source: EvalSource,
    pub mc_samples: usize,
    /// Score columns for `score` and `correlate`.
    pub methods: Vec<String>,
    /// Acquisition method for `select` and `simulate`.
    pub method: String,
    pub batch_size: usize,
    pub rounds: usize,
    pub out: PathBuf,
    /// Model JSON from `train`; the model is refit when absent.
    pub model: Option<PathBuf>,
    pub max_iters: usize,
    pub tol: f64,
}

pub const DEFAULT_CLASS_SEP: f64 = 1.0;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: None,
            n: 2000,
            dim: 16,
            classes: 10,
            class_sep: DEFAULT_CLASS_SEP,
            head: HeadSpec::Categorical,
            lambda: 1.0,
            train_size: 80,
            pool_size: 1000,
            eval_size: 200,
            eval_source: EvalSource::Split,
            mc_samples: 1000,
            methods: Vec::new(),
            method: "greedy_eig_logdet".into(),
            batch_size: 10,
            rounds: 5,
            out: PathBuf::from("out"),
            model: None,
            max_iters: FitOptions::default().max_iters,
            tol: FitOptions::default().tol,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn head(&self) -> Result<Head> {
        match self.head {
            HeadSpec::Gaussian => Ok(Head::gaussian()),
            HeadSpec::Categorical => {
                Head::categorical(self.classes).map_err(|e| HarnessError::InvalidConfig(e.to_string()))
            }
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            prior_precision: self.lambda,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }

    pub fn stage_seed(&self, offset: u64) -> u64 {
        self.seed.wrapping_add(offset)
    }

    /// Score columns, falling back to every method the head supports.
    pub fn score_methods(&self) -> Vec<String> {
        if !self.methods.is_empty() {
            return self.methods.clone();
        }
        crate::methods::default_score_methods(self.head)
            .iter()
            .map(|s| s.to_string())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.head == HeadSpec::Categorical && self.classes < 2 {
            return bad(format!("classes must be at least 2, got {}", self.classes));
        }
        if self.dim == 0 && self.data.is_none() {
            return bad("dim must be positive".into());
        }
        if self.eval_source == EvalSource::Split && self.eval_size == 0 {
            return bad("eval_size must be positive".into());
        }
        if self.methods.iter().any(|m| m.is_empty()) {
            return bad("empty method name".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }

    /// Points consumed by the train/pool/eval split.
    pub fn split_total(&self) -> usize {
        let eval = match self.eval_source {
            EvalSource::Split => self.eval_size,
            EvalSource::Pool => 0,
        };
        self.train_size + self.pool_size + eval
    }
}
