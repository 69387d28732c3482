//! Columnar datasets with role/distribution metadata and CSV interchange.
//!
//! A [`Dataset`] is written as a plain CSV of observed values plus a sidecar
//! JSON schema mapping every column to its graph node, role, and
//! distribution kind. Generators can retain the exogenous noise draws behind
//! each record (needed for exact counterfactuals); noise travels in extra
//! `u_<node>` columns when explicitly requested.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Role;

/// Marginal distribution kind of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    /// 0/1 valued.
    Binary,
    /// Real valued.
    Continuous,
    /// Integer classes `0..k`.
    Categorical { k: usize },
}

/// Schema entry for one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    /// Column name; equals the causal-graph node it measures.
    pub name: String,
    pub role: Role,
    pub kind: DistKind,
}

/// Sidecar JSON document describing a dataset CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaDoc {
    pub version: u32,
    pub n: usize,
    pub columns: Vec<ColumnSchema>,
    /// Names of noise columns present in the CSV (`u_<node>`), if any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise_columns: Vec<String>,
}

/// Exogenous noise draws behind a dataset, one value per node per record.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlock {
    /// Node names, aligned with `values`.
    pub nodes: Vec<String>,
    /// `values[j][i]` is the draw for node `j` in record `i`.
    pub values: Vec<Vec<f64>>,
}

/// A columnar dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Vec<ColumnSchema>,
    /// `columns[j][i]` is the value of column `j` in record `i`.
    pub columns: Vec<Vec<f64>>,
    /// Retained exogenous noise, when produced by a generator.
    pub noise: Option<NoiseBlock>,
}

impl Dataset {
    /// Number of records.
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of a column by name.
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownName(format!("column '{name}'")))
    }

    /// Values of a named column.
    pub fn column(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.column_index(name)?])
    }

    /// Indices of all columns with the given role, in schema order.
    pub fn role_columns(&self, role: Role) -> Vec<usize> {
        self.schema
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    /// Row `i` as a vector in schema order.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// New dataset holding the selected record indices (noise included).
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let columns = self
            .columns
            .iter()
            .map(|col| idx.iter().map(|&i| col[i]).collect())
            .collect();
        let noise = self.noise.as_ref().map(|nb| NoiseBlock {
            nodes: nb.nodes.clone(),
            values: nb.values.iter().map(|col| idx.iter().map(|&i| col[i]).collect()).collect(),
        });
        Dataset { schema: self.schema.clone(), columns, noise }
    }

    /// Deterministic train/test split: shuffles record indices with the
    /// given seed and puts the first `train_frac` share into the train set.
    pub fn split(&self, train_frac: f64, seed: u64) -> (Dataset, Dataset) {
        use rand::seq::SliceRandom;
        assert!((0.0..=1.0).contains(&train_frac), "train_frac must be in [0,1]");
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut crate::rng::stream(seed, "split"));
        let n_train = (self.len() as f64 * train_frac).round() as usize;
        (self.select(&idx[..n_train]), self.select(&idx[n_train..]))
    }

    /// Write `<stem>.csv` and `<stem>.schema.json`; noise columns are
    /// included only when `with_noise` is set and the dataset retains noise.
    pub fn write_csv(&self, stem: &FsPath, with_noise: bool) -> Result<()> {
        let csv_path = stem.with_extension("csv");
        let schema_path = stem.with_extension("schema.json");
        let noise = if with_noise { self.noise.as_ref() } else { None };

        let mut w = csv::Writer::from_path(&csv_path)?;
        let mut header: Vec<String> = self.schema.iter().map(|c| c.name.clone()).collect();
        if let Some(nb) = noise {
            header.extend(nb.nodes.iter().map(|n| format!("u_{n}")));
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.columns.iter().map(|c| format_value(c[i])).collect();
            if let Some(nb) = noise {
                rec.extend(nb.values.iter().map(|c| format_value(c[i])));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;

        let doc = SchemaDoc {
            version: 1,
            n: self.len(),
            columns: self.schema.clone(),
            noise_columns: noise.map_or_else(Vec::new, |nb| {
                nb.nodes.iter().map(|n| format!("u_{n}")).collect()
            }),
        };
        std::fs::write(&schema_path, serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }

    /// Read a dataset written by [`Dataset::write_csv`].
    pub fn read_csv(stem: &FsPath) -> Result<Dataset> {
        let csv_path = stem.with_extension("csv");
        let schema_path = stem.with_extension("schema.json");
        let doc: SchemaDoc = serde_json::from_str(&std::fs::read_to_string(&schema_path)?)?;
        let mut r = csv::Reader::from_path(&csv_path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();

        let mut positions = Vec::with_capacity(doc.columns.len());
        for col in &doc.columns {
            let pos = header
                .iter()
                .position(|h| *h == col.name)
                .ok_or_else(|| Error::Validation(format!("csv missing column '{}'", col.name)))?;
            positions.push(pos);
        }
        let noise_positions: Vec<(String, usize)> = doc
            .noise_columns
            .iter()
            .map(|nc| {
                let pos = header
                    .iter()
                    .position(|h| h == nc)
                    .ok_or_else(|| Error::Validation(format!("csv missing noise column '{nc}'")))?;
                Ok((nc.trim_start_matches("u_").to_string(), pos))
            })
            .collect::<Result<_>>()?;

        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); doc.columns.len()];
        let mut noise_values: Vec<Vec<f64>> = vec![Vec::new(); noise_positions.len()];
        for record in r.records() {
            let record = record?;
            for (j, &pos) in positions.iter().enumerate() {
                columns[j].push(parse_value(record.get(pos), &doc.columns[j].name)?);
            }
            for (j, (name, pos)) in noise_positions.iter().enumerate() {
                noise_values[j].push(parse_value(record.get(*pos), name)?);
            }
        }
        for (j, col) in columns.iter().enumerate() {
            validate_column(&doc.columns[j], col)?;
        }
        let noise = if noise_positions.is_empty() {
            None
        } else {
            Some(NoiseBlock {
                nodes: noise_positions.into_iter().map(|(n, _)| n).collect(),
                values: noise_values,
            })
        };
        Ok(Dataset { schema: doc.columns, columns, noise })
    }

    /// Group sizes of a binary column, as `(count_0, count_1)`.
    pub fn binary_group_sizes(&self, name: &str) -> Result<(usize, usize)> {
        let col = self.column(name)?;
        let ones = col.iter().filter(|v| **v == 1.0).count();
        Ok((col.len() - ones, ones))
    }
}

fn format_value(v: f64) -> String {
    // `{}` on f64 prints the shortest decimal that round-trips exactly.
    format!("{v}")
}

fn parse_value(field: Option<&str>, name: &str) -> Result<f64> {
    let text = field.ok_or_else(|| Error::Validation(format!("short csv record at column '{name}'")))?;
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::Validation(format!("column '{name}': cannot parse '{text}' as a number")))
}

fn validate_column(schema: &ColumnSchema, values: &[f64]) -> Result<()> {
    match schema.kind {
        DistKind::Binary => {
            if let Some(v) = values.iter().find(|v| **v != 0.0 && **v != 1.0) {
                return Err(Error::Validation(format!(
                    "binary column '{}' holds non-binary value {v}",
                    schema.name
                )));
            }
        }
        DistKind::Categorical { k } => {
            if let Some(v) = values.iter().find(|v| v.fract() != 0.0 || **v < 0.0 || **v >= k as f64) {
                return Err(Error::Validation(format!(
                    "categorical column '{}' holds out-of-range value {v} (k = {k})",
                    schema.name
                )));
            }
        }
        DistKind::Continuous => {}
    }
    Ok(())
}

/// Column-name → index map, useful when threading rows around.
pub fn name_index(schema: &[ColumnSchema]) -> BTreeMap<&str, usize> {
    schema.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect()
}
