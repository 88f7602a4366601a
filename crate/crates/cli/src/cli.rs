use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::{EvalSource, ExperimentConfig, HeadSpec};
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(
    name = "infoquant",
    version,
    about = "Weight-space information scores for active learning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the MAP model on the train split and write model.json.
    Train(Overrides),
    /// Score the pool with every configured method (scores.csv, scores.json).
    Score(Overrides),
    /// Select a batch from the pool (selection.json).
    Select(Overrides),
    /// Score the pool and write the Spearman matrix between methods.
    Correlate(Overrides),
    /// Run the acquisition loop against a random baseline (curve.csv).
    Simulate(Overrides),
}

/// Config file plus per-field overrides; flags take precedence.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset CSV (`f0..f{D-1}[,y]`); synthetic data when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long = "class-sep")]
    pub class_sep: Option<f64>,
    #[arg(long, value_enum)]
    pub head: Option<HeadArg>,
    /// Prior precision.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "train-size")]
    pub train_size: Option<usize>,
    #[arg(long = "pool-size")]
    pub pool_size: Option<usize>,
    #[arg(long = "eval-size")]
    pub eval_size: Option<usize>,
    #[arg(long = "eval-source", value_enum)]
    pub eval_source: Option<EvalArg>,
    /// Posterior weight samples for the prediction-space estimators.
    #[arg(long = "mc-samples")]
    pub mc_samples: Option<usize>,
    /// Comma-separated score methods.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Acquisition method.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum HeadArg {
    Categorical,
    Gaussian,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum EvalArg {
    Split,
    Pool,
}

impl Overrides {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    c.$field = v.clone();
                })*
            };
        }
        set!(
            seed, n, dim, classes, class_sep, lambda, train_size, pool_size, eval_size, mc_samples, methods, method,
            batch_size, rounds, out, max_iters, tol
        );
        if let Some(p) = &self.data {
            c.data = Some(p.clone());
        }
        if let Some(p) = &self.model {
            c.model = Some(p.clone());
        }
        if let Some(h) = self.head {
            c.head = match h {
                HeadArg::Categorical => HeadSpec::Categorical,
                HeadArg::Gaussian => HeadSpec::Gaussian,
            };
        }
        if let Some(e) = self.eval_source {
            c.eval_source = match e {
                EvalArg::Split => EvalSource::Split,
                EvalArg::Pool => EvalSource::Pool,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

/// Runs a parsed command and returns a one-line summary.
pub fn run(cli: Cli) -> Result<String> {
    Ok(match cli.command {
        Command::Train(o) => {
            let c = o.resolve()?;
            let m = commands::cmd_train(&c)?;
            format!(
                "wrote {} ({} iterations, gradient norm {:e})",
                c.out.join("model.json").display(),
                m.fit.iters,
                m.fit.grad_norm
            )
        }
        Command::Score(o) => {
            let c = o.resolve()?;
            let t = commands::cmd_score(&c)?;
            format!(
                "scored {} pool points with {} methods into {}",
                t.index.len(),
                t.columns.len(),
                c.out.display()
            )
        }
        Command::Select(o) => {
            let c = o.resolve()?;
            let s = commands::cmd_select(&c)?;
            format!("{}: selected {:?} (objective {})", s.method, s.indices, s.objective)
        }
        Command::Correlate(o) => {
            let c = o.resolve()?;
            let (_, r) = commands::cmd_correlate(&c)?;
            let mut s = format!(
                "spearman matrix over {} methods in {}",
                r.methods.len(),
                c.out.display()
            );
            for (pred, weight) in [("bald_pred", "eig_logdet"), ("epig_pred", "epig_logdet")] {
                if let Some(rho) = r.get(pred, weight) {
                    s.push_str(&format!("\n  rho({pred}, {weight}) = {rho:.4}"));
                }
            }
            s
        }
        Command::Simulate(o) => {
            let c = o.resolve()?;
            let rows = commands::cmd_simulate(&c)?;
            let mut s = format!("wrote {}", c.out.join("curve.csv").display());
            for r in rows.iter().filter(|r| r.round == c.rounds) {
                s.push_str(&format!(
                    "\n  {}: {} labels, accuracy {:.4}",
                    r.method, r.labeled_count, r.accuracy
                ));
            }
            s
        }
    })
}
