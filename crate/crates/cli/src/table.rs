use infoquant::info_scores::Orientation;
use serde::{Deserialize, Serialize};

use crate::data::fmt_f64;
use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub orientation: String,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: &str, orientation: Orientation, values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            orientation: orientation.as_str().to_string(),
            values,
        }
    }

    pub fn is_minimize(&self) -> bool {
        self.orientation == Orientation::Minimize.as_str()
    }

    /// Values with minimize columns negated, so larger is always better.
    pub fn normalized(&self) -> Vec<f64> {
        if self.is_minimize() {
            self.values.iter().map(|v| -v).collect()
        } else {
            self.values.clone()
        }
    }
}

/// Pool-position index plus one score column per method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub index: Vec<usize>,
    pub columns: Vec<Column>,
}

impl ScoreTable {
    pub fn new(index: Vec<usize>) -> Self {
        Self {
            index,
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, column: Column) -> Result<()> {
        if column.values.len() != self.index.len() {
            return Err(HarnessError::InvalidConfig(format!(
                "column `{}` has {} rows, table has {}",
                column.name,
                column.values.len(),
                self.index.len()
            )));
        }
        if self.column(&column.name).is_some() {
            return Err(HarnessError::InvalidConfig(format!(
                "duplicate column `{}`",
                column.name
            )));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["index".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for (row, idx) in self.index.iter().enumerate() {
            let mut rec = vec![idx.to_string()];
            rec.extend(self.columns.iter().map(|c| fmt_f64(c.values[row])));
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| HarnessError::Usage(e.to_string()))
    }

    /// Parses the CSV form; orientations are not stored there and come back
    /// as `maximize`.
    pub fn from_csv(bytes: &[u8]) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(bytes);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("index") {
            return Err(HarnessError::MalformedHeader("first column must be `index`".into()));
        }
        let mut table = ScoreTable::new(Vec::new());
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 1];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |col: usize| -> Result<f64> {
                rec[col].parse().map_err(|_| HarnessError::NonNumericCell {
                    row,
                    col,
                    value: rec[col].to_string(),
                })
            };
            table.index.push(num(0)? as usize);
            for (c, values) in cols.iter_mut().enumerate() {
                values.push(num(c + 1)?);
            }
        }
        for (name, values) in header.iter().skip(1).zip(cols) {
            table.push(Column::new(name, Orientation::Maximize, values))?;
        }
        Ok(table)
    }
}
