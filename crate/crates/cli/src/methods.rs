//! Named score columns and acquisition strategies.

use std::cell::OnceCell;

use infoquant::glm::GlmModel;
use infoquant::info_scores::{Approx, EvalInformation, Orientation, Scorer, SetObjective};
use infoquant::posterior::GaussianPosterior;
use infoquant::prediction_oracle::{bald_pool, epig_pool, PosteriorSamples};
use infoquant::selection::{self, SelectionResult, BAIT_DEFAULT_MULTIPLIER};
use infoquant::similarity::{build_data_matrix, LabelMode};
use infoquant::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{seed_offset, ExperimentConfig, HeadSpec};
use crate::error::{Context, HarnessError, Result};
use crate::table::Column;

pub const SCORE_METHODS: &[&str] = &[
    "bald_pred",
    "epig_pred",
    "eig_logdet",
    "eig_trace",
    "epig_logdet",
    "epig_trace",
    "jepig_logdet",
    "jepig_trace",
    "egl",
    "eig_sim_sampled",
    "eig_sim_hard",
];

pub const ACQUISITION_METHODS: &[&str] = &[
    "random",
    "top_k_<score method>",
    "greedy_eig_logdet",
    "greedy_eig_trace",
    "greedy_epig_logdet",
    "greedy_epig_trace",
    "greedy_jepig_logdet",
    "greedy_jepig_trace",
    "bait",
    "badge",
];

pub fn default_score_methods(head: HeadSpec) -> &'static [&'static str] {
    match head {
        HeadSpec::Categorical => SCORE_METHODS,
        HeadSpec::Gaussian => &SCORE_METHODS[2..],
    }
}

/// Everything needed to score a pool under one fitted model.
pub struct Workbench<'a> {
    pub config: &'a ExperimentConfig,
    pub model: &'a GlmModel,
    pub scorer: Scorer<'a>,
    pub pool: Vec<DVector<f64>>,
    pub eval: Vec<DVector<f64>>,
    samples: OnceCell<PosteriorSamples>,
}

impl<'a> Workbench<'a> {
    pub fn new(
        config: &'a ExperimentConfig,
        model: &'a GlmModel,
        posterior: &'a GaussianPosterior,
        pool: Vec<DVector<f64>>,
        eval: Vec<DVector<f64>>,
    ) -> Result<Self> {
        Ok(Self {
            config,
            model,
            scorer: Scorer::new(model, posterior).stage("posterior")?,
            pool,
            eval,
            samples: OnceCell::new(),
        })
    }

    /// Posterior weight samples, drawn once with the posterior-sample seed.
    pub fn samples(&self) -> Result<&PosteriorSamples> {
        if let Some(s) = self.samples.get() {
            return Ok(s);
        }
        let s = PosteriorSamples::draw(
            self.scorer.posterior(),
            self.config.mc_samples,
            self.config.stage_seed(seed_offset::POSTERIOR_SAMPLES),
        )
        .stage("posterior samples")?;
        Ok(self.samples.get_or_init(|| s))
    }

    fn eval_information(&self, joint: bool) -> Result<EvalInformation> {
        self.scorer.eval_fisher(&self.eval, joint).stage("eval information")
    }

    fn objective(&self, name: &str) -> Result<SetObjective> {
        Ok(match name {
            "eig_logdet" => SetObjective::Eig(Approx::LogDet),
            "eig_trace" => SetObjective::Eig(Approx::Trace),
            "epig_logdet" => SetObjective::Transductive(Approx::LogDet, self.eval_information(false)?),
            "epig_trace" => SetObjective::Transductive(Approx::Trace, self.eval_information(false)?),
            "jepig_logdet" => SetObjective::Transductive(Approx::LogDet, self.eval_information(true)?),
            "jepig_trace" => SetObjective::Transductive(Approx::Trace, self.eval_information(true)?),
            other => return Err(HarnessError::UnknownMethod(other.to_string())),
        })
    }

    fn pool_data(&self) -> Result<Dataset> {
        Dataset::from_rows(&self.pool, None, self.model.dim()).stage("pool")
    }

    /// `½ log(1 + g P⁻¹ gᵀ)` per pool point from its Jacobian row `g`.
    fn similarity_scores(&self, mode: LabelMode) -> Result<Vec<f64>> {
        let g = build_data_matrix(self.model, &self.pool_data()?, mode).stage("data matrix")?;
        let v: DMatrix<f64> = self
            .scorer
            .precision_factor()
            .solve_lower(&g.rows().transpose())
            .stage("similarity")?;
        Ok(v.column_iter().map(|c| 0.5 * c.norm_squared().ln_1p()).collect())
    }

    pub fn score(&self, name: &str) -> Result<Column> {
        let stage = format!("score {name}");
        let (orientation, values) = match name {
            "bald_pred" => (
                Orientation::Maximize,
                bald_pool(self.samples()?, self.model, &self.pool).stage(stage)?,
            ),
            "epig_pred" => (
                Orientation::Maximize,
                epig_pool(self.samples()?, self.model, &self.pool, &self.eval).stage(stage)?,
            ),
            "egl" => (
                Orientation::Maximize,
                self.pool
                    .iter()
                    .map(|x| self.scorer.egl_score(x))
                    .collect::<infoquant::Result<_>>()
                    .stage(stage)?,
            ),
            "eig_sim_sampled" | "eig_sim_hard" => {
                let values = if self.pool.is_empty() {
                    Vec::new()
                } else if name == "eig_sim_hard" {
                    self.similarity_scores(LabelMode::Hard)?
                } else {
                    self.similarity_scores(LabelMode::Sampled {
                        seed: self.config.stage_seed(seed_offset::LABELS),
                    })?
                };
                (Orientation::Maximize, values)
            }
            _ => {
                let obj = self.objective(name)?;
                (
                    obj.orientation(),
                    self.scorer.singleton_scores(&self.pool, &obj).stage(stage)?,
                )
            }
        };
        Ok(Column::new(name, orientation, values))
    }

    /// Selects `k` pool positions with the named strategy.
    pub fn acquire(&self, method: &str, k: usize, seed: u64) -> Result<SelectionResult> {
        let n = self.pool.len();
        let stage = format!("select {method}");
        if k > n {
            return Err(HarnessError::PoolExhausted {
                needed: k,
                available: n,
            });
        }
        let result = match method {
            "random" => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                SelectionResult {
                    indices: sample(&mut rng, n, k).into_vec(),
                    objective_value: 0.0,
                    method: "random".into(),
                    gains: Vec::new(),
                }
            }
            "bait" => selection::bait_forward_backward(
                &self.scorer,
                &self.pool,
                k,
                &self.eval_information(false)?,
                BAIT_DEFAULT_MULTIPLIER,
            )
            .stage(stage)?,
            "badge" => {
                if k == 0 {
                    SelectionResult {
                        indices: Vec::new(),
                        objective_value: 0.0,
                        method: "badge".into(),
                        gains: Vec::new(),
                    }
                } else {
                    let g = build_data_matrix(self.model, &self.pool_data()?, LabelMode::Hard).stage(stage.clone())?;
                    selection::badge_kmeanspp(&g, k, seed).stage(stage)?
                }
            }
            m if m.starts_with("top_k_") => {
                let col = self.score(&m["top_k_".len()..])?;
                let mut r = selection::top_k(&col.normalized(), k).stage(stage)?;
                r.objective_value = r.indices.iter().map(|&i| col.values[i]).sum();
                r.gains = r.indices.iter().map(|&i| col.values[i]).collect();
                r.method = m.to_string();
                r
            }
            m if m.starts_with("greedy_") => {
                let obj = self.objective(&m["greedy_".len()..])?;
                selection::greedy(&self.scorer, &self.pool, k, &obj).stage(stage)?
            }
            other => return Err(HarnessError::UnknownMethod(other.to_string())),
        };
        Ok(result)
    }
}

/// Fails fast on names that no strategy recognizes.
pub fn check_acquisition_method(name: &str) -> Result<()> {
    let known = match name {
        "random" | "bait" | "badge" => true,
        m if m.starts_with("top_k_") => SCORE_METHODS.contains(&&m["top_k_".len()..]),
        m if m.starts_with("greedy_") => SCORE_METHODS[2..8].contains(&&m["greedy_".len()..]),
        _ => false,
    };
    if known {
        Ok(())
    } else {
        Err(HarnessError::UnknownMethod(name.to_string()))
    }
}

pub fn check_score_method(name: &str) -> Result<()> {
    if SCORE_METHODS.contains(&name) {
        Ok(())
    } else {
        Err(HarnessError::UnknownMethod(name.to_string()))
    }
}
