//! Role-tagged tabular data.
//!
//! A [`Dataset`] stores columns together with their role: one binary
//! sensitive attribute `x`, one outcome `y`, an optional binary mediator `m`
//! and any number of covariates `w`. Covariates are also kept row-major so
//! that learners and path maps can borrow a row as a slice.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Sensitive,
    Outcome,
    Mediator,
    Covariate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub role: ColumnRole,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, role: ColumnRole, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            role,
            values,
        }
    }
}

/// One evaluation point `(x, m, w)`.
///
/// `row` is set when the point refers to a row of a dataset; tabulated
/// predictors use it, functional ones ignore it.
#[derive(Debug, Clone, Copy)]
pub struct Point<'a> {
    pub row: Option<usize>,
    pub x: f64,
    pub m: Option<f64>,
    pub w: &'a [f64],
}

impl<'a> Point<'a> {
    pub fn new(x: f64, m: Option<f64>, w: &'a [f64]) -> Self {
        Self { row: None, x, m, w }
    }

    pub fn with_x(self, x: f64) -> Self {
        Self { x, ..self }
    }

    pub fn with_m(self, m: Option<f64>) -> Self {
        Self { m, ..self }
    }
}

/// Column names by role, in the order learners see them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub sensitive: String,
    pub mediator: Option<String>,
    pub covariates: Vec<String>,
    #[serde(default)]
    pub outcome: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    columns: Vec<Column>,
    n: usize,
    sensitive: usize,
    outcome: Option<usize>,
    mediator: Option<usize>,
    covariates: Vec<usize>,
    w: Vec<f64>,
}

impl Dataset {
    /// Build a dataset with exactly one sensitive and one outcome column.
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        Self::build(columns, true)
    }

    /// Build a dataset whose outcome column is optional (prediction inputs).
    pub fn unlabeled(columns: Vec<Column>) -> Result<Self> {
        Self::build(columns, false)
    }

    fn build(columns: Vec<Column>, require_outcome: bool) -> Result<Self> {
        let n = columns.first().map(|c| c.values.len()).unwrap_or(0);
        if let Some(c) = columns.iter().find(|c| c.values.len() != n) {
            return Err(Error::RaggedColumns(format!(
                "`{}` has {} rows, expected {n}",
                c.name,
                c.values.len()
            )));
        }
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let of_role = |role| -> Vec<usize> {
            columns
                .iter()
                .enumerate()
                .filter(|(_, c)| c.role == role)
                .map(|(i, _)| i)
                .collect()
        };
        let sens = of_role(ColumnRole::Sensitive);
        let out = of_role(ColumnRole::Outcome);
        let med = of_role(ColumnRole::Mediator);
        if sens.len() != 1 {
            return Err(Error::RoleCardinalityViolation(format!(
                "expected exactly one sensitive column, found {}",
                sens.len()
            )));
        }
        if out.len() > 1 || (require_outcome && out.is_empty()) {
            return Err(Error::RoleCardinalityViolation(format!(
                "expected exactly one outcome column, found {}",
                out.len()
            )));
        }
        if med.len() > 1 {
            return Err(Error::RoleCardinalityViolation(format!(
                "expected at most one mediator column, found {}",
                med.len()
            )));
        }
        let s = &columns[sens[0]];
        if let Some((row, &v)) = s.values.iter().enumerate().find(|(_, v)| !is_binary(**v)) {
            return Err(Error::NonBinarySensitive {
                row,
                col: s.name.clone(),
                value: v,
            });
        }
        if let Some(&mi) = med.first() {
            check_binary(&columns[mi])?;
        }
        let covariates = of_role(ColumnRole::Covariate);
        let mut w = Vec::with_capacity(n * covariates.len());
        for i in 0..n {
            for &j in &covariates {
                w.push(columns[j].values[i]);
            }
        }
        Ok(Self {
            n,
            sensitive: sens[0],
            outcome: out.first().copied(),
            mediator: med.first().copied(),
            covariates,
            w,
            columns,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.columns[self.sensitive].values
    }

    pub fn y(&self) -> Result<&[f64]> {
        self.outcome
            .map(|i| self.columns[i].values.as_slice())
            .ok_or(Error::MissingOutcome)
    }

    pub fn m(&self) -> Option<&[f64]> {
        self.mediator.map(|i| self.columns[i].values.as_slice())
    }

    pub fn has_mediator(&self) -> bool {
        self.mediator.is_some()
    }

    /// Covariate row `i`.
    pub fn w(&self, i: usize) -> &[f64] {
        let p = self.covariates.len();
        &self.w[i * p..(i + 1) * p]
    }

    /// Observed point of row `i`.
    pub fn point(&self, i: usize) -> Point<'_> {
        Point {
            row: Some(i),
            x: self.x()[i],
            m: self.m().map(|m| m[i]),
            w: self.w(i),
        }
    }

    pub fn schema(&self) -> Schema {
        Schema {
            sensitive: self.columns[self.sensitive].name.clone(),
            mediator: self.mediator.map(|i| self.columns[i].name.clone()),
            covariates: self
                .covariates
                .iter()
                .map(|&i| self.columns[i].name.clone())
                .collect(),
            outcome: self.outcome.map(|i| self.columns[i].name.clone()),
        }
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Fails unless the outcome exists and is binary.
    pub fn require_binary_outcome(&self) -> Result<()> {
        let i = self.outcome.ok_or(Error::MissingOutcome)?;
        check_binary(&self.columns[i])
    }

    /// Rows `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                name: c.name.clone(),
                role: c.role,
                values: rows.iter().map(|&r| c.values[r]).collect(),
            })
            .collect();
        Self::build(columns, self.outcome.is_some())
    }

    /// Same data with the mediator column (if any) reassigned as ignored.
    pub fn without_mediator(&self) -> Self {
        let mut out = self.clone();
        if let Some(i) = out.mediator.take() {
            out.columns.remove(i);
            let fix = |j: usize| if j > i { j - 1 } else { j };
            out.sensitive = fix(out.sensitive);
            out.outcome = out.outcome.map(fix);
            out.covariates = out.covariates.iter().map(|&j| fix(j)).collect();
        }
        out
    }

    /// Write all columns as CSV in storage order. Values use the shortest
    /// decimal form that parses back to the same `f64`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for i in 0..self.n {
            w.write_record(self.columns.iter().map(|c| c.values[i].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reorder covariates to match `schema`, as needed when evaluating a
    /// stored model on new data.
    pub fn conform_to(&self, schema: &Schema) -> Result<Self> {
        let mut columns = Vec::new();
        let take = |name: &str, role: ColumnRole| -> Result<Column> {
            let c = self
                .column(name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            Ok(Column {
                name: c.name.clone(),
                role,
                values: c.values.clone(),
            })
        };
        columns.push(take(&schema.sensitive, ColumnRole::Sensitive)?);
        if let Some(m) = &schema.mediator {
            columns.push(take(m, ColumnRole::Mediator)?);
        }
        for w in &schema.covariates {
            columns.push(take(w, ColumnRole::Covariate)?);
        }
        let outcome_name = self.outcome.map(|i| self.columns[i].name.clone());
        if let Some(y) = outcome_name {
            columns.push(take(&y, ColumnRole::Outcome)?);
        }
        Self::unlabeled(columns)
    }
}

fn is_binary(v: f64) -> bool {
    v == 0.0 || v == 1.0
}

fn check_binary(c: &Column) -> Result<()> {
    match c.values.iter().enumerate().find(|(_, v)| !is_binary(**v)) {
        Some((row, &value)) => Err(Error::NonBinaryColumn {
            row,
            col: c.name.clone(),
            value,
        }),
        None => Ok(()),
    }
}

/// Load a CSV file. Only columns named in `schema` are read; others are
/// ignored. Requires exactly one outcome column.
pub fn load_csv(path: impl AsRef<Path>, schema: &[(String, ColumnRole)]) -> Result<Dataset> {
    Dataset::new(read_columns(path.as_ref(), schema)?)
}

/// As [`load_csv`] but the outcome column may be absent.
pub fn load_csv_unlabeled(
    path: impl AsRef<Path>,
    schema: &[(String, ColumnRole)],
) -> Result<Dataset> {
    Dataset::unlabeled(read_columns(path.as_ref(), schema)?)
}

fn read_columns(path: &Path, schema: &[(String, ColumnRole)]) -> Result<Vec<Column>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    let mut idx = Vec::with_capacity(schema.len());
    for (name, _) in schema {
        let j = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        idx.push(j);
    }
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); schema.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (k, &j) in idx.iter().enumerate() {
            let cell = record.get(j).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                row,
                col: schema[k].0.clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell {
                    row,
                    col: schema[k].0.clone(),
                    value: cell.to_string(),
                });
            }
            values[k].push(v);
        }
    }
    Ok(schema
        .iter()
        .zip(values)
        .map(|((name, role), values)| Column {
            name: name.clone(),
            role: *role,
            values,
        })
        .collect())
}

/// Seeded random partition into `(train, test)` with
/// `|train| = round(train_fraction * n)`. Row order is preserved within each
/// side.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.n();
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::EmptySplit {
            n,
            fraction: train_fraction,
        });
    }
    let (train, test) = split_indices(n, n_train, seed);
    Ok((data.select_rows(&train)?, data.select_rows(&test)?))
}

/// Index-level version of [`split`].
pub fn split_indices(n: usize, n_train: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    CounterRng::new(seed).substream("split").shuffle(&mut order);
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Uniform empirical measure over covariate rows.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    rows: Arc<Vec<f64>>,
    p: usize,
    n: usize,
}

impl EmpiricalDistribution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }

    /// Average of `f` over rows.
    pub fn mean(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let total: f64 = (0..self.n).map(|i| f(self.row(i))).sum();
        total / self.n as f64
    }
}

pub fn empirical_marginal(data: &Dataset) -> EmpiricalDistribution {
    EmpiricalDistribution {
        rows: Arc::new(data.w.clone()),
        p: data.n_covariates(),
        n: data.n(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema(spec: &[(&str, ColumnRole)]) -> Vec<(String, ColumnRole)> {
        spec.iter().map(|(n, r)| (n.to_string(), *r)).collect()
    }

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn basic_schema() -> Vec<(String, ColumnRole)> {
        schema(&[
            ("w1", ColumnRole::Covariate),
            ("x", ColumnRole::Sensitive),
            ("y", ColumnRole::Outcome),
        ])
    }

    #[test]
    fn loads_well_formed_file() {
        let f = write_csv("w1,x,y,extra\n0.5,1,2.0,a\n1.5,0,3.0,b\n2.5,1,4.0,c\n");
        let d = load_csv(f.path(), &basic_schema()).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.x(), &[1.0, 0.0, 1.0]);
        assert_eq!(d.w(2), &[2.5]);
        assert_eq!(d.y().unwrap(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_non_binary_sensitive() {
        let f = write_csv("w1,x,y\n0.5,2,2.0\n");
        assert!(matches!(
            load_csv(f.path(), &basic_schema()),
            Err(Error::NonBinarySensitive { .. })
        ));
    }

    #[test]
    fn rejects_two_outcomes() {
        let f = write_csv("w1,x,y\n0.5,1,2.0\n");
        let s = schema(&[
            ("w1", ColumnRole::Outcome),
            ("x", ColumnRole::Sensitive),
            ("y", ColumnRole::Outcome),
        ]);
        assert!(matches!(
            load_csv(f.path(), &s),
            Err(Error::RoleCardinalityViolation(_))
        ));
    }

    #[test]
    fn reports_missing_column_and_bad_cell() {
        let f = write_csv("w1,x\n0.5,1\n");
        assert!(
            matches!(load_csv(f.path(), &basic_schema()), Err(Error::MissingColumn(c)) if c == "y")
        );
        let f = write_csv("w1,x,y\n0.5,1,2\nabc,0,1\n");
        match load_csv(f.path(), &basic_schema()) {
            Err(Error::NonNumericCell { row, col, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(col, "w1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn toy(n: usize) -> Dataset {
        Dataset::new(vec![
            Column::new(
                "w1",
                ColumnRole::Covariate,
                (0..n).map(|i| i as f64).collect(),
            ),
            Column::new(
                "x",
                ColumnRole::Sensitive,
                (0..n).map(|i| (i % 2) as f64).collect(),
            ),
            Column::new("y", ColumnRole::Outcome, vec![0.0; n]),
        ])
        .unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = toy(10);
        let (a, b) = split(&d, 0.7, 1).unwrap();
        assert_eq!((a.n(), b.n()), (7, 3));
        let (a2, _) = split(&d, 0.7, 1).unwrap();
        assert_eq!(a.w, a2.w);
        let mut all: Vec<f64> = a.w.iter().chain(b.w.iter()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
        assert!(matches!(
            split(&toy(1), 0.5, 1),
            Err(Error::EmptySplit { .. })
        ));
    }

    #[test]
    fn empirical_marginal_is_uniform() {
        let d = Dataset::new(vec![
            Column::new("w1", ColumnRole::Covariate, vec![0.0, 1.0, 1.0, 0.0]),
            Column::new("x", ColumnRole::Sensitive, vec![0.0, 1.0, 1.0, 0.0]),
            Column::new("y", ColumnRole::Outcome, vec![0.0; 4]),
        ])
        .unwrap();
        let e = empirical_marginal(&d);
        assert_eq!(e.weight(), 0.25);
        assert_eq!(e.mean(|_| 1.0), 1.0);
        assert_eq!(e.mean(|w| w[0]), 0.5);
    }

    #[test]
    fn conform_reorders_covariates() {
        let d = Dataset::new(vec![
            Column::new("a", ColumnRole::Covariate, vec![1.0, 2.0]),
            Column::new("b", ColumnRole::Covariate, vec![3.0, 4.0]),
            Column::new("x", ColumnRole::Sensitive, vec![0.0, 1.0]),
            Column::new("y", ColumnRole::Outcome, vec![0.0, 1.0]),
        ])
        .unwrap();
        let s = Schema {
            sensitive: "x".into(),
            mediator: None,
            covariates: vec!["b".into(), "a".into()],
            outcome: None,
        };
        let c = d.conform_to(&s).unwrap();
        assert_eq!(c.w(1), &[4.0, 2.0]);
        let bad = Schema {
            mediator: Some("m".into()),
            ..s
        };
        assert!(matches!(d.conform_to(&bad), Err(Error::MissingColumn(_))));
    }
}
