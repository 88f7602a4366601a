//! The five subcommands. Each one is a pure function of its config and input
//! files; artifacts are written under `config.out`.

use std::path::Path;

use infoquant::glm::{map_fit, FitReport, GlmModel, Head, HeadKind};
use infoquant::posterior::GaussianPosterior;
use infoquant::prediction_oracle::spearman;
use infoquant::selection::SelectionResult;
use infoquant::Dataset;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{seed_offset, EvalSource, ExperimentConfig};
use crate::data::{fmt_f64, load_dataset, split, Splits};
use crate::error::{io_err, Context, HarnessError, Result};
use crate::methods::{check_acquisition_method, check_score_method, Workbench};
use crate::table::ScoreTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadJson {
    pub kind: String,
    #[serde(rename = "C")]
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitJson {
    pub grad_norm: f64,
    pub iters: usize,
}

/// `{head: {kind, C}, D, weights, lambda, fit: {grad_norm, iters}}` with the
/// `D × C` weight matrix flattened row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub head: HeadJson,
    #[serde(rename = "D")]
    pub dim: usize,
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub fit: FitJson,
}

impl ModelJson {
    pub fn new(model: &GlmModel, lambda: f64, report: FitReport) -> Self {
        let w = model.weights();
        let (kind, classes) = match model.head().kind() {
            HeadKind::Categorical => ("categorical", model.classes()),
            HeadKind::Gaussian => ("gaussian", 1),
        };
        Self {
            head: HeadJson {
                kind: kind.into(),
                classes,
            },
            dim: model.dim(),
            weights: (0..w.nrows())
                .flat_map(|i| w.row(i).iter().copied().collect::<Vec<_>>())
                .collect(),
            lambda,
            fit: FitJson {
                grad_norm: report.grad_norm,
                iters: report.iters,
            },
        }
    }

    pub fn to_model(&self) -> Result<GlmModel> {
        let head = match self.head.kind.as_str() {
            "categorical" => Head::categorical(self.head.classes).stage("model head")?,
            "gaussian" => Head::gaussian(),
            other => return Err(HarnessError::InvalidConfig(format!("unknown head kind `{other}`"))),
        };
        let c = head.classes();
        if self.weights.len() != self.dim * c {
            return Err(HarnessError::InvalidConfig(format!(
                "model has {} weights, expected {} x {}",
                self.weights.len(),
                self.dim,
                c
            )));
        }
        GlmModel::new(head, DMatrix::from_row_slice(self.dim, c, &self.weights)).stage("model")
    }
}

/// Dataset plus its deterministic split.
pub struct Prepared {
    pub data: Dataset,
    pub splits: Splits,
    pub head: Head,
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let data = load_dataset(config)?;
        let splits = split(data.len(), config)?;
        Ok(Self {
            head: config.head()?,
            data,
            splits,
        })
    }

    pub fn rows(&self, indices: &[usize]) -> Vec<DVector<f64>> {
        indices.iter().map(|&i| self.data.row(i)).collect()
    }
}

/// MAP fit on the given rows, taken in ascending row order.
pub fn fit_rows(config: &ExperimentConfig, prepared: &Prepared, rows: &[usize]) -> Result<(GlmModel, FitReport)> {
    let mut sorted = rows.to_vec();
    sorted.sort_unstable();
    let train = prepared.data.subset(&sorted);
    if train.is_empty() {
        return Err(HarnessError::InvalidConfig("training set is empty".into()));
    }
    map_fit(&train, prepared.head, config.fit_options()).stage("fit")
}

fn model_for(config: &ExperimentConfig, prepared: &Prepared) -> Result<GlmModel> {
    match &config.model {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(io_err(path))?;
            let json: ModelJson = serde_json::from_str(&text)?;
            let model = json.to_model()?;
            if model.head() != prepared.head || model.dim() != prepared.data.dim() {
                return Err(HarnessError::InvalidConfig(format!(
                    "model {} does not match the configured head and data dimension",
                    path.display()
                )));
            }
            Ok(model)
        }
        None => Ok(fit_rows(config, prepared, &prepared.splits.train)?.0),
    }
}

fn posterior_for(
    config: &ExperimentConfig,
    prepared: &Prepared,
    model: &GlmModel,
    rows: &[usize],
) -> Result<GaussianPosterior> {
    let mut sorted = rows.to_vec();
    sorted.sort_unstable();
    GaussianPosterior::build(model, &prepared.data.subset(&sorted), config.lambda).stage("posterior")
}

fn write(out: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join(name);
    std::fs::write(&path, bytes).map_err(io_err(path))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<ModelJson> {
    let prepared = Prepared::new(config)?;
    let (model, report) = fit_rows(config, &prepared, &prepared.splits.train)?;
    let json = ModelJson::new(&model, config.lambda, report);
    write(&config.out, "model.json", &json_bytes(&json)?)?;
    Ok(json)
}

/// Scores every pool point with each method, in memory only.
pub fn score_table(config: &ExperimentConfig) -> Result<ScoreTable> {
    let methods = config.score_methods();
    for m in &methods {
        check_score_method(m)?;
    }
    let prepared = Prepared::new(config)?;
    let model = model_for(config, &prepared)?;
    let posterior = posterior_for(config, &prepared, &model, &prepared.splits.train)?;
    let bench = Workbench::new(
        config,
        &model,
        &posterior,
        prepared.rows(&prepared.splits.pool),
        prepared.rows(&prepared.splits.eval),
    )?;
    let mut table = ScoreTable::new((0..prepared.splits.pool.len()).collect());
    for m in &methods {
        log::info!("scoring {} pool points with {m}", bench.pool.len());
        table.push(bench.score(m)?)?;
    }
    Ok(table)
}

pub fn cmd_score(config: &ExperimentConfig) -> Result<ScoreTable> {
    let table = score_table(config)?;
    write(&config.out, "scores.csv", &table.to_csv()?)?;
    write(&config.out, "scores.json", &json_bytes(&table)?)?;
    Ok(table)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionJson {
    pub method: String,
    pub k: usize,
    /// Pool positions in selection order.
    pub indices: Vec<usize>,
    /// Dataset rows of the selected points.
    pub rows: Vec<usize>,
    pub objective: f64,
    pub gains: Vec<f64>,
}

pub fn cmd_select(config: &ExperimentConfig) -> Result<SelectionJson> {
    check_acquisition_method(&config.method)?;
    let prepared = Prepared::new(config)?;
    let model = model_for(config, &prepared)?;
    let posterior = posterior_for(config, &prepared, &model, &prepared.splits.train)?;
    let bench = Workbench::new(
        config,
        &model,
        &posterior,
        prepared.rows(&prepared.splits.pool),
        prepared.rows(&prepared.splits.eval),
    )?;
    let r = bench.acquire(
        &config.method,
        config.batch_size,
        config.stage_seed(seed_offset::SELECTION),
    )?;
    let json = selection_json(r, config.batch_size, &prepared.splits.pool);
    write(&config.out, "selection.json", &json_bytes(&json)?)?;
    Ok(json)
}

fn selection_json(r: SelectionResult, k: usize, pool_rows: &[usize]) -> SelectionJson {
    SelectionJson {
        method: r.method,
        k,
        rows: r.indices.iter().map(|&i| pool_rows[i]).collect(),
        indices: r.indices,
        objective: r.objective_value,
        gains: r.gains,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub methods: Vec<String>,
    pub orientations: Vec<String>,
    /// Spearman correlations after negating minimize columns.
    pub matrix: Vec<Vec<f64>>,
}

impl CorrelationReport {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.methods.iter().position(|m| m == a)?;
        let j = self.methods.iter().position(|m| m == b)?;
        Some(self.matrix[i][j])
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string()];
        header.extend(self.methods.iter().cloned());
        w.write_record(&header)?;
        for (m, row) in self.methods.iter().zip(&self.matrix) {
            let mut rec = vec![m.clone()];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| HarnessError::Usage(e.to_string()))
    }
}

/// Spearman matrix over the table's columns, orientation-normalized.
pub fn correlation_matrix(table: &ScoreTable) -> Result<CorrelationReport> {
    let cols: Vec<Vec<f64>> = table.columns.iter().map(|c| c.normalized()).collect();
    let n = cols.len();
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        matrix[i][i] = 1.0;
        for j in (i + 1)..n {
            let rho = spearman(&cols[i], &cols[j]).stage(format!(
                "spearman {} vs {}",
                table.columns[i].name, table.columns[j].name
            ))?;
            matrix[i][j] = rho;
            matrix[j][i] = rho;
        }
    }
    Ok(CorrelationReport {
        methods: table.columns.iter().map(|c| c.name.clone()).collect(),
        orientations: table.columns.iter().map(|c| c.orientation.clone()).collect(),
        matrix,
    })
}

pub fn cmd_correlate(config: &ExperimentConfig) -> Result<(ScoreTable, CorrelationReport)> {
    let table = score_table(config)?;
    let report = correlation_matrix(&table)?;
    write(&config.out, "scores.csv", &table.to_csv()?)?;
    write(&config.out, "scores.json", &json_bytes(&table)?)?;
    write(&config.out, "spearman.csv", &report.to_csv()?)?;
    write(&config.out, "spearman.json", &json_bytes(&report)?)?;
    Ok((table, report))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: String,
    pub round: usize,
    pub labeled_count: usize,
    pub accuracy: f64,
    /// Selection objective of the batch acquired in this round.
    pub objective: Option<f64>,
}

pub fn curve_csv(rows: &[CurveRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "round", "labeled_count", "accuracy", "objective"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.round.to_string(),
            r.labeled_count.to_string(),
            fmt_f64(r.accuracy),
            r.objective.map(fmt_f64).unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| HarnessError::Usage(e.to_string()))
}

/// Active-learning loop for `method` on a prepared dataset: select, reveal
/// labels, refit, and measure accuracy on the held-out rows.
pub fn simulate_method(config: &ExperimentConfig, prepared: &Prepared, method: &str) -> Result<Vec<CurveRow>> {
    if prepared.head.kind() != HeadKind::Categorical {
        return Err(HarnessError::InvalidConfig("simulate needs a categorical head".into()));
    }
    let test = prepared.data.subset(&prepared.splits.rest);
    if test.is_empty() {
        return Err(HarnessError::InvalidConfig(
            "no held-out rows left for accuracy; reduce the split sizes".into(),
        ));
    }
    let mut labeled = prepared.splits.train.clone();
    let mut pool = prepared.splits.pool.clone();
    let mut seeds = ChaCha8Rng::seed_from_u64(config.stage_seed(seed_offset::SELECTION));
    let (mut model, _) = fit_rows(config, prepared, &labeled)?;
    let mut rows = vec![CurveRow {
        method: method.to_string(),
        round: 0,
        labeled_count: labeled.len(),
        accuracy: model.accuracy(&test).stage("accuracy")?,
        objective: None,
    }];
    for round in 1..=config.rounds {
        if config.batch_size > pool.len() {
            return Err(HarnessError::PoolExhausted {
                needed: config.batch_size,
                available: pool.len(),
            });
        }
        let posterior = posterior_for(config, prepared, &model, &labeled)?;
        let eval_rows = match config.eval_source {
            EvalSource::Split => &prepared.splits.eval,
            EvalSource::Pool => &pool,
        };
        let bench = Workbench::new(
            config,
            &model,
            &posterior,
            prepared.rows(&pool),
            prepared.rows(eval_rows),
        )?;
        let r = bench.acquire(method, config.batch_size, seeds.random())?;
        let mut picked = vec![false; pool.len()];
        for &i in &r.indices {
            picked[i] = true;
            labeled.push(pool[i]);
        }
        let mut keep = picked.iter().map(|p| !p);
        pool.retain(|_| keep.next().unwrap_or(true));
        model = fit_rows(config, prepared, &labeled)?.0;
        rows.push(CurveRow {
            method: method.to_string(),
            round,
            labeled_count: labeled.len(),
            accuracy: model.accuracy(&test).stage("accuracy")?,
            objective: Some(r.objective_value),
        });
        log::info!("{method} round {round}: {} labels", labeled.len());
    }
    Ok(rows)
}

pub fn cmd_simulate(config: &ExperimentConfig) -> Result<Vec<CurveRow>> {
    check_acquisition_method(&config.method)?;
    let prepared = Prepared::new(config)?;
    let mut methods = vec![config.method.as_str()];
    if config.method != "random" {
        methods.push("random");
    }
    let mut rows = Vec::new();
    for m in methods {
        rows.extend(simulate_method(config, &prepared, m)?);
    }
    write(&config.out, "curve.csv", &curve_csv(&rows)?)?;
    Ok(rows)
}
