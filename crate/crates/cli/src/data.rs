//! Dataset CSV I/O, synthetic data and deterministic splits.

use std::path::Path;

use infoquant::glm::{Dataset, Head, HeadKind, Labels};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{seed_offset, EvalSource, ExperimentConfig};
use crate::error::{io_err, Context, HarnessError, Result};

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str) -> Option<f64> {
    s.trim().replace('\u{2212}', "-").parse().ok()
}

/// Reads `f0,…,f{D-1}[,y]`. Integer labels are required for a categorical
/// head and must be below its class count.
pub fn load_csv(path: &Path, head: Head) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_csv(file, head)
}

pub fn read_csv(reader: impl std::io::Read, head: Head) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_labels = names.last() == Some(&"y");
    let dim = names.len() - usize::from(has_labels);
    if dim == 0 {
        return Err(HarnessError::MalformedHeader("no feature columns".into()));
    }
    for (i, name) in names[..dim].iter().enumerate() {
        if *name != format!("f{i}") {
            return Err(HarnessError::MalformedHeader(format!(
                "expected `f{i}`, found `{name}`"
            )));
        }
    }

    let mut values = Vec::new();
    let mut classes = Vec::new();
    let mut reals = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != names.len() {
            return Err(HarnessError::MalformedHeader(format!(
                "row {row} has {} cells, header has {}",
                rec.len(),
                names.len()
            )));
        }
        for col in 0..dim {
            let cell = &rec[col];
            let v = parse_f64(cell)
                .filter(|v| v.is_finite())
                .ok_or_else(|| HarnessError::NonNumericCell {
                    row,
                    col,
                    value: cell.to_string(),
                })?;
            values.push(v);
        }
        if has_labels {
            let cell = rec[dim].trim();
            match head.kind() {
                HeadKind::Categorical => {
                    let c: usize = cell.parse().map_err(|_| label_err(row, cell))?;
                    if c >= head.classes() {
                        return Err(label_err(row, cell));
                    }
                    classes.push(c);
                }
                HeadKind::Gaussian => reals.push(parse_f64(cell).ok_or_else(|| HarnessError::NonNumericCell {
                    row,
                    col: dim,
                    value: cell.to_string(),
                })?),
            }
        }
    }
    let n = values.len() / dim;
    let features = DMatrix::from_row_slice(n, dim, &values);
    let labels = has_labels.then(|| match head.kind() {
        HeadKind::Categorical => Labels::Class(classes),
        HeadKind::Gaussian => Labels::Real(reals),
    });
    Dataset::new(features, labels).stage("load_csv")
}

fn label_err(row: usize, cell: &str) -> HarnessError {
    HarnessError::LabelOutOfRange {
        row,
        value: cell.to_string(),
    }
}

pub fn write_csv(data: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..data.dim()).map(|i| format!("f{i}")).collect();
    if data.labels().is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.features().row(i).iter().map(|v| fmt_f64(*v)).collect();
        match data.labels() {
            Some(Labels::Class(c)) => rec.push(c[i].to_string()),
            Some(Labels::Real(r)) => rec.push(fmt_f64(r[i])),
            None => {}
        }
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| HarnessError::Usage(e.to_string()))
}

pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, write_csv(data)?).map_err(io_err(path))
}

/// `C` unit-covariance Gaussian clusters whose means lie on a sphere of
/// radius `class_sep`. Labels cycle through the classes before shuffling, so
/// class counts differ by at most one.
pub fn gen_synthetic(seed: u64, n: usize, dim: usize, classes: usize, class_sep: f64) -> Result<Dataset> {
    if classes < 2 || dim == 0 {
        return Err(HarnessError::InvalidConfig(format!(
            "synthetic data needs classes >= 2 and dim >= 1, got {classes} and {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<DVector<f64>> = (0..classes)
        .map(|_| {
            let v = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            let norm = v.norm();
            if norm > 0.0 {
                v * (class_sep / norm)
            } else {
                v
            }
        })
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let mut features = DMatrix::zeros(n, dim);
    for (i, &y) in labels.iter().enumerate() {
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            features[(i, j)] = means[y][j] + z;
        }
    }
    Dataset::new(features, Some(Labels::Class(labels))).stage("gen_synthetic")
}

/// Row indices of each split; `rest` holds everything unused, in shuffled order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub pool: Vec<usize>,
    pub eval: Vec<usize>,
    pub rest: Vec<usize>,
}

pub fn split(n: usize, config: &ExperimentConfig) -> Result<Splits> {
    let needed = config.split_total();
    if needed > n {
        return Err(HarnessError::InvalidConfig(format!(
            "split sizes sum to {needed}, dataset has {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.stage_seed(seed_offset::SPLIT)));
    let mut it = order.into_iter();
    let train: Vec<usize> = it.by_ref().take(config.train_size).collect();
    let pool: Vec<usize> = it.by_ref().take(config.pool_size).collect();
    let eval: Vec<usize> = match config.eval_source {
        EvalSource::Split => it.by_ref().take(config.eval_size).collect(),
        EvalSource::Pool => pool.clone(),
    };
    Ok(Splits {
        train,
        pool,
        eval,
        rest: it.collect(),
    })
}

/// The configured dataset: the CSV if given, synthetic otherwise.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let head = config.head()?;
    let data = match &config.data {
        Some(path) => load_csv(path, head)?,
        None => {
            if head.kind() == HeadKind::Gaussian {
                return Err(HarnessError::InvalidConfig(
                    "synthetic data is categorical; pass --data for a gaussian head".into(),
                ));
            }
            gen_synthetic(
                config.stage_seed(seed_offset::DATA),
                config.n,
                config.dim,
                config.classes,
                config.class_sep,
            )?
        }
    };
    data.validate_for(head).stage("dataset")?;
    Ok(data)
}
