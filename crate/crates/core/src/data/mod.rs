//! Tabular data model: column schemas, row-major datasets and the
//! preprocessing steps applied before synthesis (splitting, target encoding,
//! SMOTE balancing).

mod csv_io;
mod encode;
mod smote;
mod split;

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv, read_csv, write_csv, SchemaSpec};
pub use encode::target_encode;
pub use smote::{smote_balance, SmoteConfig};
pub use split::{split, Partition, SplitFractions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Binary,
    Multiclass,
}

impl ColumnKind {
    pub fn is_categorical(self) -> bool {
        !matches!(self, ColumnKind::Continuous)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Some(ColumnKind::Continuous),
            "binary" => Some(ColumnKind::Binary),
            "multiclass" => Some(ColumnKind::Multiclass),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColumnKind::Continuous => "continuous",
            ColumnKind::Binary => "binary",
            ColumnKind::Multiclass => "multiclass",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered category labels; empty for continuous columns.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ColumnSchema {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
        }
    }

    /// A categorical column; the kind follows from the category count.
    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        let categories: Vec<String> = categories.into_iter().map(Into::into).collect();
        let kind = if categories.len() == 2 {
            ColumnKind::Binary
        } else {
            ColumnKind::Multiclass
        };
        Self {
            name: name.into(),
            kind,
            categories,
        }
    }

    pub fn is_categorical(&self) -> bool {
        self.kind.is_categorical()
    }

    pub fn n_categories(&self) -> usize {
        self.categories.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.categories.len();
        let ok = match self.kind {
            ColumnKind::Continuous => n == 0,
            ColumnKind::Binary => n == 2,
            ColumnKind::Multiclass => n >= 3,
        };
        if !ok {
            return Err(Error::schema(format!(
                "column `{}` declared {} has {} categories",
                self.name,
                self.kind.as_str(),
                n
            )));
        }
        let distinct: HashSet<&str> = self.categories.iter().map(String::as_str).collect();
        if distinct.len() != n {
            return Err(Error::schema(format!(
                "column `{}` has duplicate categories",
                self.name
            )));
        }
        Ok(())
    }
}

/// Column schemas plus the index of the binary label column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<ColumnSchema>,
    label: usize,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSchema>, label: &str) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &columns {
            c.validate()?;
            if !seen.insert(c.name.as_str()) {
                return Err(Error::schema(format!("duplicate column name `{}`", c.name)));
            }
        }
        let label_idx = columns
            .iter()
            .position(|c| c.name == label)
            .ok_or_else(|| Error::schema(format!("label column `{label}` not found")))?;
        if columns[label_idx].kind != ColumnKind::Binary {
            return Err(Error::schema(format!(
                "label column `{label}` must be binary, found {}",
                columns[label_idx].kind.as_str()
            )));
        }
        Ok(Self {
            columns,
            label: label_idx,
        })
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &ColumnSchema {
        &self.columns[idx]
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn label_index(&self) -> usize {
        self.label
    }

    pub fn label_name(&self) -> &str {
        &self.columns[self.label].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Indices of all non-label columns, in schema order.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&j| j != self.label).collect()
    }

    pub fn with_columns(&self, columns: Vec<ColumnSchema>) -> Result<Self> {
        Schema::new(columns, self.label_name())
    }

    /// Checks one cell against its column definition.
    pub fn check_cell(&self, col: usize, value: f64) -> Result<()> {
        let c = &self.columns[col];
        if !value.is_finite() {
            return Err(Error::data(format!(
                "non-finite value in column `{}`",
                c.name
            )));
        }
        if c.is_categorical() {
            let n = c.categories.len() as f64;
            if value < 0.0 || value >= n || value.fract() != 0.0 {
                return Err(Error::data(format!(
                    "category index {value} out of range for column `{}`",
                    c.name
                )));
            }
        }
        Ok(())
    }
}

/// Row-major table of cells: continuous values are stored as-is and
/// categorical cells as their category index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<Schema>,
    cells: Vec<f64>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, cells: Vec<f64>) -> Result<Self> {
        let n_cols = schema.n_cols();
        if n_cols == 0 || cells.len() % n_cols != 0 {
            return Err(Error::data(format!(
                "cell count {} is not a multiple of the column count {n_cols}",
                cells.len()
            )));
        }
        let n_rows = cells.len() / n_cols;
        for (i, &v) in cells.iter().enumerate() {
            schema.check_cell(i % n_cols, v)?;
        }
        Ok(Self {
            schema,
            cells,
            n_rows,
        })
    }

    pub fn from_rows(schema: Arc<Schema>, rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = schema.n_cols();
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::data(format!(
                "row {bad} has {} cells, expected {n_cols}",
                rows[bad].len()
            )));
        }
        Self::new(schema, rows.concat())
    }

    pub fn empty(schema: Arc<Schema>) -> Self {
        Self {
            schema,
            cells: Vec::new(),
            n_rows: 0,
        }
    }

    /// Builds a dataset without re-validating cells. Callers guarantee the
    /// schema invariants hold.
    pub(crate) fn from_cells_unchecked(schema: Arc<Schema>, cells: Vec<f64>) -> Self {
        let n_cols = schema.n_cols();
        debug_assert_eq!(cells.len() % n_cols, 0);
        debug_assert!(cells
            .iter()
            .enumerate()
            .all(|(i, &v)| schema.check_cell(i % n_cols, v).is_ok()));
        let n_rows = cells.len() / n_cols;
        Self {
            schema,
            cells,
            n_rows,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.n_cols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.cells[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.cells.chunks_exact(self.n_cols())
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    /// Label column as 0/1.
    pub fn labels(&self) -> Vec<u8> {
        let l = self.schema.label_index();
        self.rows().map(|r| r[l] as u8).collect()
    }

    /// Row counts of label class 0 and 1.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0usize; 2];
        for y in self.labels() {
            counts[y as usize] += 1;
        }
        counts
    }

    pub fn has_both_classes(&self) -> bool {
        let [a, b] = self.class_counts();
        a > 0 && b > 0
    }

    /// Non-label columns as a row-major feature matrix; categorical cells
    /// contribute their category index.
    pub fn features(&self) -> FeatureMatrix {
        let idx = self.schema.feature_indices();
        let mut values = Vec::with_capacity(self.n_rows * idx.len());
        for r in self.rows() {
            values.extend(idx.iter().map(|&j| r[j]));
        }
        FeatureMatrix {
            values,
            n_rows: self.n_rows,
            n_features: idx.len(),
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let mut cells = Vec::with_capacity(indices.len() * self.n_cols());
        for &i in indices {
            cells.extend_from_slice(self.row(i));
        }
        Dataset::from_cells_unchecked(self.schema.clone(), cells)
    }

    /// Rows whose label equals `class`.
    pub fn filter_class(&self, class: u8) -> Dataset {
        let idx: Vec<usize> = self
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == class)
            .map(|(i, _)| i)
            .collect();
        self.select_rows(&idx)
    }

    /// Vertical concatenation; all parts must share one schema.
    pub fn concat(schema: Arc<Schema>, parts: &[Dataset]) -> Result<Dataset> {
        let mut cells = Vec::with_capacity(parts.iter().map(|p| p.cells.len()).sum());
        for p in parts {
            if *p.schema != *schema {
                return Err(Error::schema("cannot concatenate datasets with different schemas"));
            }
            cells.extend_from_slice(&p.cells);
        }
        Ok(Dataset::from_cells_unchecked(schema, cells))
    }

    /// Re-checks every invariant of the dataset against its schema.
    pub fn validate(&self) -> Result<()> {
        let n_cols = self.n_cols();
        if self.cells.len() != self.n_rows * n_cols {
            return Err(Error::data("cell count does not match row count"));
        }
        for (i, &v) in self.cells.iter().enumerate() {
            self.schema.check_cell(i % n_cols, v)?;
        }
        Ok(())
    }
}

/// Dense row-major feature matrix handed to the downstream classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Vec<f64>,
    pub n_rows: usize,
    pub n_features: usize,
}

impl FeatureMatrix {
    pub fn new(values: Vec<f64>, n_features: usize) -> Result<Self> {
        if n_features == 0 || values.len() % n_features != 0 {
            return Err(Error::data("feature matrix shape mismatch"));
        }
        Ok(Self {
            n_rows: values.len() / n_features,
            values,
            n_features,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn get(&self, row: usize, feature: usize) -> f64 {
        self.values[row * self.n_features + feature]
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_rejects_bad_category_counts() {
        let bin3 = ColumnSchema {
            name: "c".into(),
            kind: ColumnKind::Binary,
            categories: vec!["a".into(), "b".into(), "c".into()],
        };
        assert!(Schema::new(vec![bin3], "c").is_err());
        let multi2 = ColumnSchema {
            name: "m".into(),
            kind: ColumnKind::Multiclass,
            categories: vec!["a".into(), "b".into()],
        };
        let y = ColumnSchema::categorical("y", ["0", "1"]);
        assert!(Schema::new(vec![multi2, y.clone()], "y").is_err());
        let cont = ColumnSchema::continuous("x");
        assert!(Schema::new(vec![cont.clone(), cont, y], "y").is_err());
    }

    #[test]
    fn label_must_exist_and_be_binary() {
        let cols = vec![ColumnSchema::continuous("x"), ColumnSchema::categorical("y", ["a", "b"])];
        assert!(Schema::new(cols.clone(), "z").is_err());
        assert!(Schema::new(cols.clone(), "x").is_err());
        assert_eq!(Schema::new(cols, "y").unwrap().label_index(), 1);
    }

    #[test]
    fn dataset_checks_category_range() {
        let s = test_util::continuous_schema(1);
        assert!(Dataset::new(s.clone(), vec![0.5, 2.0]).is_err());
        assert!(Dataset::new(s.clone(), vec![0.5, 0.5]).is_err());
        assert!(Dataset::new(s.clone(), vec![f64::NAN, 1.0]).is_err());
        let d = Dataset::new(s, vec![0.5, 1.0, 1.5, 0.0]).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.labels(), vec![1, 0]);
        assert_eq!(d.class_counts(), [1, 1]);
        let f = d.features();
        assert_eq!((f.n_rows, f.n_features), (2, 1));
        assert_eq!(f.values, vec![0.5, 1.5]);
    }
}
