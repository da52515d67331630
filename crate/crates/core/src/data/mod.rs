//! Schemas, encoded datasets, the simulation generator and seeded splits.

mod csv;
mod split;
mod synthetic;

pub use self::csv::{load_csv, parse_csv};
pub use split::{split, SplitSpec};
pub use synthetic::{generate_synthetic, synthetic_schema, write_synthetic_csv, SYNTHETIC_N};

use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("schema: {0}")]
    Schema(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: unknown level `{value}` for column `{column}`")]
    UnknownLevel { column: String, value: String, line: usize },
    #[error("line {line}: cannot parse `{value}` in column `{column}`")]
    Parse { column: String, value: String, line: usize },
    #[error("partition {0} of the split is empty")]
    EmptyPartition(usize),
    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),
    #[error("dataset has no rows")]
    Empty,
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Feature,
    Sensitive,
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Alpha,
    Beta,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub name: String,
    pub role: Role,
    pub encoding: Encoding,
    /// Declared level order for binary (optional, two entries) and
    /// categorical columns. Binary columns without levels hold 0/1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<String>,
    #[serde(default)]
    pub group: Group,
}

impl Column {
    pub fn width(&self) -> usize {
        match self.encoding {
            Encoding::Categorical => self.levels.len(),
            _ => 1,
        }
    }

    /// Level index of a raw cell for binary/categorical columns.
    fn level_of(&self, raw: &str) -> Option<usize> {
        if self.levels.is_empty() {
            return match raw.parse::<f64>().ok()? {
                v if v == 0.0 => Some(0),
                v if v == 1.0 => Some(1),
                _ => None,
            };
        }
        if let Some(i) = self.levels.iter().position(|l| l == raw) {
            return Some(i);
        }
        let v = raw.parse::<f64>().ok()?;
        self.levels.iter().position(|l| l.parse::<f64>().ok() == Some(v))
    }

    fn level_name(&self, idx: usize) -> String {
        if self.levels.is_empty() {
            idx.to_string()
        } else {
            self.levels[idx].clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub format: u32,
    #[serde(rename = "column")]
    pub columns: Vec<Column>,
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self, DataError> {
        let s = Schema { format: 1, columns };
        s.validate()?;
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self, DataError> {
        let s: Schema = toml::from_str(text).map_err(|e| DataError::Schema(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let err = |m: String| Err(DataError::Schema(m));
        if self.format != 1 {
            return err(format!("unsupported format {}", self.format));
        }
        for role in [Role::Sensitive, Role::Label] {
            let n = self.columns.iter().filter(|c| c.role == role).count();
            if n != 1 {
                return err(format!("expected exactly one {role:?} column, found {n}"));
            }
        }
        for (i, c) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|o| o.name == c.name) {
                return err(format!("duplicate column `{}`", c.name));
            }
            match c.encoding {
                Encoding::Binary if !(c.levels.is_empty() || c.levels.len() == 2) => {
                    return err(format!("binary column `{}` needs zero or two levels", c.name));
                }
                Encoding::Categorical if c.levels.len() < 2 => {
                    return err(format!("categorical column `{}` needs at least two levels", c.name));
                }
                Encoding::Continuous if !c.levels.is_empty() => {
                    return err(format!("continuous column `{}` cannot declare levels", c.name));
                }
                _ => {}
            }
            match c.role {
                Role::Feature if c.group == Group::None => {
                    return err(format!("feature `{}` must be in group alpha or beta", c.name));
                }
                Role::Sensitive | Role::Label if c.group != Group::None => {
                    return err(format!("column `{}` is not a feature and cannot have a group", c.name));
                }
                Role::Sensitive if c.encoding == Encoding::Continuous => {
                    return err(format!("sensitive column `{}` must be binary or categorical", c.name));
                }
                Role::Label if c.encoding == Encoding::Categorical => {
                    return err(format!("label `{}` must be continuous or binary", c.name));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn features(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| c.role == Role::Feature)
    }

    pub fn sensitive(&self) -> &Column {
        self.columns.iter().find(|c| c.role == Role::Sensitive).expect("validated")
    }

    pub fn label(&self) -> &Column {
        self.columns.iter().find(|c| c.role == Role::Label).expect("validated")
    }

    pub fn feature_width(&self) -> usize {
        self.features().map(Column::width).sum()
    }

    /// Names of the sensitive levels in level-index order.
    pub fn sensitive_levels(&self) -> Vec<String> {
        let s = self.sensitive();
        if s.levels.is_empty() {
            vec!["0".into(), "1".into()]
        } else {
            s.levels.clone()
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Regression,
    Classification,
}

/// A feature column's position in the encoded matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedColumn {
    pub name: String,
    pub encoding: Encoding,
    pub group: Group,
    pub start: usize,
    pub width: usize,
}

impl EncodedColumn {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

/// Ground-truth exogenous values carried by simulated data.
#[derive(Debug, Clone, PartialEq)]
pub struct Exogenous {
    pub names: Vec<String>,
    pub values: Array2<f64>,
}

/// Per-column affine standardization, fitted on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// `(encoded column, mean, std)` for continuous features.
    pub features: Vec<(usize, f64, f64)>,
    /// Set when the label is continuous.
    pub label: Option<(f64, f64)>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Schema,
    pub columns: Vec<EncodedColumn>,
    pub x: Array2<f64>,
    pub a: Vec<usize>,
    pub y: Vec<f64>,
    pub exogenous: Option<Exogenous>,
    pub standardizer: Option<Standardizer>,
    /// Rows dropped at load time for missing cells.
    pub dropped: usize,
}

impl Dataset {
    pub(crate) fn layout(schema: &Schema) -> Vec<EncodedColumn> {
        let mut start = 0;
        schema
            .features()
            .map(|c| {
                let col = EncodedColumn {
                    name: c.name.clone(),
                    encoding: c.encoding,
                    group: c.group,
                    start,
                    width: c.width(),
                };
                start += col.width;
                col
            })
            .collect()
    }

    pub fn from_parts(
        schema: Schema,
        x: Array2<f64>,
        a: Vec<usize>,
        y: Vec<f64>,
        exogenous: Option<Exogenous>,
    ) -> Result<Self, DataError> {
        schema.validate()?;
        let columns = Self::layout(&schema);
        let width = schema.feature_width();
        if x.ncols() != width {
            return Err(DataError::Schema(format!("feature matrix has {} columns, schema {width}", x.ncols())));
        }
        if a.len() != x.nrows() || y.len() != x.nrows() {
            return Err(DataError::Schema("row counts disagree across blocks".into()));
        }
        if let Some(e) = &exogenous {
            if e.values.nrows() != x.nrows() || e.values.ncols() != e.names.len() {
                return Err(DataError::Schema("exogenous block shape".into()));
            }
        }
        let n_levels = schema.sensitive_levels().len();
        if a.iter().any(|&l| l >= n_levels) {
            return Err(DataError::Schema("sensitive level out of range".into()));
        }
        Ok(Dataset {
            schema,
            columns,
            x,
            a,
            y,
            exogenous,
            standardizer: None,
            dropped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_levels(&self) -> usize {
        self.schema.sensitive_levels().len()
    }

    pub fn task(&self) -> Task {
        match self.schema.label().encoding {
            Encoding::Continuous => Task::Regression,
            _ => Task::Classification,
        }
    }

    pub fn column(&self, name: &str) -> Option<&EncodedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.clone(),
            x: self.x.select(Axis(0), rows),
            a: rows.iter().map(|&i| self.a[i]).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            exogenous: self.exogenous.as_ref().map(|e| Exogenous {
                names: e.names.clone(),
                values: e.values.select(Axis(0), rows),
            }),
            standardizer: self.standardizer.clone(),
            dropped: self.dropped,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut out = self.clone();
        out.x = ndarray::concatenate(Axis(0), &[self.x.view(), other.x.view()]).expect("same width");
        out.a.extend_from_slice(&other.a);
        out.y.extend_from_slice(&other.y);
        out.exogenous = match (&self.exogenous, &other.exogenous) {
            (Some(a), Some(b)) => Some(Exogenous {
                names: a.names.clone(),
                values: ndarray::concatenate(Axis(0), &[a.values.view(), b.values.view()]).expect("same width"),
            }),
            _ => None,
        };
        out
    }

    /// Fits means and population standard deviations of continuous columns.
    pub fn fit_standardizer(&self) -> Standardizer {
        let features = self
            .columns
            .iter()
            .filter(|c| c.encoding == Encoding::Continuous)
            .map(|c| {
                let (m, s) = mean_std(self.x.column(c.start).iter().copied());
                (c.start, m, s)
            })
            .collect();
        let label = (self.schema.label().encoding == Encoding::Continuous).then(|| mean_std(self.y.iter().copied()));
        Standardizer { features, label }
    }

    /// Applies `s` to raw values; fails if a standardizer is already applied.
    pub fn standardize(&mut self, s: &Standardizer) -> Result<(), DataError> {
        if self.standardizer.is_some() {
            return Err(DataError::Schema("dataset is already standardized".into()));
        }
        for &(col, m, sd) in &s.features {
            self.x.column_mut(col).mapv_inplace(|v| (v - m) / sd);
        }
        if let Some((m, sd)) = s.label {
            self.y.iter_mut().for_each(|v| *v = (*v - m) / sd);
        }
        self.standardizer = Some(s.clone());
        Ok(())
    }

    /// Raw cell values of row `i` in schema column order.
    pub fn decode_row(&self, i: usize) -> Vec<String> {
        let mut fi = self.columns.iter();
        self.schema
            .columns
            .iter()
            .map(|c| match c.role {
                Role::Feature => {
                    let ec = fi.next().expect("layout matches schema");
                    let row = self.x.row(i);
                    match c.encoding {
                        Encoding::Continuous => {
                            let mut v = row[ec.start];
                            if let Some(s) = &self.standardizer {
                                if let Some(&(_, m, sd)) = s.features.iter().find(|f| f.0 == ec.start) {
                                    v = v * sd + m;
                                }
                            }
                            format_number(v)
                        }
                        Encoding::Binary => c.level_name((row[ec.start] >= 0.5) as usize),
                        Encoding::Categorical => {
                            let k = (0..ec.width)
                                .max_by(|&p, &q| row[ec.start + p].total_cmp(&row[ec.start + q]))
                                .expect("width ≥ 2");
                            c.level_name(k)
                        }
                    }
                }
                Role::Sensitive => c.level_name(self.a[i]),
                Role::Label => match c.encoding {
                    Encoding::Continuous => {
                        let mut v = self.y[i];
                        if let Some((m, sd)) = self.standardizer.as_ref().and_then(|s| s.label) {
                            v = v * sd + m;
                        }
                        format_number(v)
                    }
                    _ => c.level_name((self.y[i] >= 0.5) as usize),
                },
            })
            .collect()
    }
}

fn format_number(v: f64) -> String {
    format!("{v}")
}
