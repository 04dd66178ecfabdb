//! Tabular data: CSV loading, row filters, listwise deletion and panel
//! indexing.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Name given to the intercept column.
pub const INTERCEPT: &str = "_cons";

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<Option<f64>>),
    /// Non-numeric labels; usable only as panel identifiers.
    Categorical(Vec<Option<String>>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    /// Row value rendered as a key, `None` when missing.
    fn key(&self, row: usize) -> Option<String> {
        match self {
            Column::Numeric(v) => v[row].map(|x| x.to_string()),
            Column::Categorical(v) => v[row].clone(),
        }
    }
}

/// Group structure of a panel dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelIndex {
    pub group_var: String,
    pub time_var: String,
    /// Dense group id of every dataset row, numbered by first appearance.
    pub group_of_row: Vec<usize>,
    pub group_labels: Vec<String>,
}

impl PanelIndex {
    pub fn n_groups(&self) -> usize {
        self.group_labels.len()
    }

    /// Observation count per group over all dataset rows.
    pub fn group_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_groups()];
        for &g in &self.group_of_row {
            sizes[g] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
    panel: Option<PanelIndex>,
}

pub(crate) fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "." || f.eq_ignore_ascii_case("na")
}

impl Dataset {
    /// Build a dataset from named columns of equal length.
    pub fn from_columns(columns: Vec<(String, Column)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (name, _) in &columns {
            if name.trim().is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
        }
        let n_rows = columns.first().map_or(0, |(_, c)| c.len());
        if let Some((name, _)) = columns.iter().find(|(_, c)| c.len() != n_rows) {
            return Err(Error::Schema(format!(
                "column `{name}` length differs from {n_rows}"
            )));
        }
        let (names, columns) = columns.into_iter().unzip();
        Ok(Self {
            names,
            columns,
            n_rows,
            panel: None,
        })
    }

    /// Convenience constructor for fully observed numeric data.
    pub fn from_numeric(columns: Vec<(&str, Vec<f64>)>) -> Result<Self> {
        Self::from_columns(
            columns
                .into_iter()
                .map(|(n, v)| (n.to_string(), Column::Numeric(v.into_iter().map(Some).collect())))
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn panel(&self) -> Option<&PanelIndex> {
        self.panel.as_ref()
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<&[Option<f64>]> {
        match self.column(name)? {
            Column::Numeric(v) => Ok(v),
            Column::Categorical(_) => Err(Error::NotNumeric(name.to_string())),
        }
    }

    /// Mutable access for tests and data preparation.
    pub fn numeric_mut(&mut self, name: &str) -> Result<&mut Vec<Option<f64>>> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        match &mut self.columns[i] {
            Column::Numeric(v) => Ok(v),
            Column::Categorical(_) => Err(Error::NotNumeric(name.to_string())),
        }
    }

    /// Dataset with rows reordered (or subset) by `order`; any panel index is
    /// carried along.
    pub fn select_rows(&self, order: &[usize]) -> Result<Self> {
        let columns = self
            .names
            .iter()
            .cloned()
            .zip(self.columns.iter().map(|c| match c {
                Column::Numeric(v) => Column::Numeric(order.iter().map(|&i| v[i]).collect()),
                Column::Categorical(v) => {
                    Column::Categorical(order.iter().map(|&i| v[i].clone()).collect())
                }
            }))
            .collect();
        let ds = Self::from_columns(columns)?;
        match &self.panel {
            Some(p) => ds.set_panel(&p.group_var, &p.time_var),
            None => Ok(ds),
        }
    }

    /// Attach a panel index after checking that `(group, time)` pairs are
    /// unique and fully observed.
    pub fn set_panel(mut self, group: &str, time: &str) -> Result<Self> {
        let gcol = self.column(group)?;
        let tcol = self.column(time)?;
        let mut labels: Vec<String> = Vec::new();
        let mut label_ids: HashMap<String, usize> = HashMap::new();
        let mut group_of_row = Vec::with_capacity(self.n_rows);
        let mut pairs = HashSet::new();
        for row in 0..self.n_rows {
            let g = gcol.key(row).ok_or_else(|| {
                Error::Panel(format!("missing `{group}` in row {}", row + 1))
            })?;
            let t = tcol.key(row).ok_or_else(|| {
                Error::Panel(format!("missing `{time}` in row {}", row + 1))
            })?;
            if !pairs.insert((g.clone(), t.clone())) {
                return Err(Error::Panel(format!(
                    "duplicate ({group}, {time}) pair ({g}, {t}) at row {}",
                    row + 1
                )));
            }
            let id = *label_ids.entry(g.clone()).or_insert_with(|| {
                labels.push(g);
                labels.len() - 1
            });
            group_of_row.push(id);
        }
        self.panel = Some(PanelIndex {
            group_var: group.to_string(),
            time_var: time.to_string(),
            group_of_row,
            group_labels: labels,
        });
        Ok(self)
    }
}

/// Read a CSV file with a header row.
///
/// Fields that are empty, `.` or `NA` (any case) are missing. A column whose
/// observed fields all parse as finite numbers is numeric; any other column
/// is kept as categorical labels.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_error(e, i + 2))?;
        for (col, field) in raw.iter_mut().zip(record.iter()) {
            col.push(field.to_string());
        }
    }

    let columns = headers
        .into_iter()
        .zip(raw)
        .map(|(name, fields)| (name, infer_column(fields)))
        .collect();
    Dataset::from_columns(columns)
}

fn csv_error(err: csv::Error, fallback_line: usize) -> Error {
    let line = err
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(fallback_line);
    let message = match err.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => err.to_string(),
    };
    Error::Parse { row: line, message }
}

fn infer_column(fields: Vec<String>) -> Column {
    let parsed: Option<Vec<Option<f64>>> = fields
        .iter()
        .map(|f| {
            if is_missing(f) {
                Some(None)
            } else {
                f.trim().parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
            }
        })
        .collect();
    match parsed {
        Some(values) => Column::Numeric(values),
        None => Column::Categorical(
            fields
                .into_iter()
                .map(|f| if is_missing(&f) { None } else { Some(f) })
                .collect(),
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Eq => lhs == rhs,
            CompareOp::Ne => lhs != rhs,
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "==",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub var: String,
    pub op: CompareOp,
    pub value: f64,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.var, self.op.symbol(), self.value)
    }
}

/// Row selection: a conjunction of `var OP constant` comparisons and/or a
/// 1-based inclusive row range.
///
/// A comparison against a missing value is false.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowFilter {
    pub conditions: Vec<Condition>,
    pub range: Option<(usize, usize)>,
}

impl RowFilter {
    /// Parse `var OP const [& var OP const ...]`.
    pub fn parse_if(expr: &str) -> Result<Self> {
        let conditions = expr
            .split('&')
            .map(|term| parse_condition(term.trim()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            conditions,
            range: None,
        })
    }

    /// Parse `first,last`.
    pub fn parse_in(spec: &str) -> Result<(usize, usize)> {
        let (a, b) = spec
            .split_once(',')
            .ok_or_else(|| Error::Filter(format!("range `{spec}` is not FIRST,LAST")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Filter(format!("bad range bound `{}`", s.trim())))
        };
        Ok((parse(a)?, parse(b)?))
    }

    pub fn with_range(mut self, first: usize, last: usize) -> Self {
        self.range = Some((first, last));
        self
    }

    fn validate(&self, ds: &Dataset) -> Result<()> {
        if let Some((first, last)) = self.range {
            if first < 1 || first > last || last > ds.n_rows() {
                return Err(Error::Filter(format!(
                    "range {first},{last} outside 1..{}",
                    ds.n_rows()
                )));
            }
        }
        for c in &self.conditions {
            ds.numeric(&c.var)?;
        }
        Ok(())
    }

    fn keeps(&self, ds: &Dataset, row: usize) -> Result<bool> {
        if let Some((first, last)) = self.range {
            if row + 1 < first || row + 1 > last {
                return Ok(false);
            }
        }
        for c in &self.conditions {
            match ds.numeric(&c.var)?[row] {
                Some(v) if c.op.apply(v, c.value) => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }
}

fn parse_condition(term: &str) -> Result<Condition> {
    const OPS: [(&str, CompareOp); 6] = [
        ("==", CompareOp::Eq),
        ("!=", CompareOp::Ne),
        ("<=", CompareOp::Le),
        (">=", CompareOp::Ge),
        ("<", CompareOp::Lt),
        (">", CompareOp::Gt),
    ];
    for (sym, op) in OPS {
        if let Some((lhs, rhs)) = term.split_once(sym) {
            let var = lhs.trim();
            if var.is_empty() {
                return Err(Error::Filter(format!("missing variable in `{term}`")));
            }
            let value = rhs
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Filter(format!("`{}` is not a number", rhs.trim())))?;
            return Ok(Condition {
                var: var.to_string(),
                op,
                value,
            });
        }
    }
    Err(Error::Filter(format!("no comparison operator in `{term}`")))
}

/// Response vector and design matrix ready for estimation.
///
/// The last design column is the intercept. `row_origin` holds the
/// zero-based dataset row behind each frame row.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFrame {
    pub depvar: String,
    pub indep_names: Vec<String>,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub row_origin: Vec<usize>,
}

impl ModelFrame {
    /// Frame from raw regressors (without intercept); rows are numbered
    /// `0..n`.
    pub fn from_columns(depvar: &str, y: Vec<f64>, regressors: Vec<(&str, Vec<f64>)>) -> Result<Self> {
        let n = y.len();
        if regressors.iter().any(|(_, v)| v.len() != n) {
            return Err(Error::Schema("regressor length differs from response".into()));
        }
        let k = regressors.len();
        let x = DMatrix::from_fn(n, k + 1, |i, j| if j == k { 1.0 } else { regressors[j].1[i] });
        Ok(Self {
            depvar: depvar.to_string(),
            indep_names: regressors.iter().map(|(n, _)| n.to_string()).collect(),
            y: DVector::from_vec(y),
            x,
            row_origin: (0..n).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of regressors excluding the intercept.
    pub fn k(&self) -> usize {
        self.indep_names.len()
    }

    /// Coefficient names, intercept last.
    pub fn coef_names(&self) -> Vec<String> {
        let mut names = self.indep_names.clone();
        names.push(INTERCEPT.to_string());
        names
    }

    /// Frame made of the given frame rows (repetition allowed).
    pub fn subset(&self, rows: &[usize]) -> Self {
        let p = self.x.ncols();
        Self {
            depvar: self.depvar.clone(),
            indep_names: self.indep_names.clone(),
            y: DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]),
            x: DMatrix::from_fn(rows.len(), p, |i, j| self.x[(rows[i], j)]),
            row_origin: rows.iter().map(|&r| self.row_origin[r]).collect(),
        }
    }

    pub(crate) fn require_estimable(&self) -> Result<()> {
        let p = self.k() + 1;
        if self.n() <= p {
            return Err(Error::InsufficientObservations(format!(
                "{} observations for {p} parameters",
                self.n()
            )));
        }
        Ok(())
    }
}

/// Select variables, apply the filter and drop incomplete rows.
pub fn build_frame(
    ds: &Dataset,
    depvar: &str,
    indep: &[String],
    filter: Option<&RowFilter>,
) -> Result<ModelFrame> {
    if indep.is_empty() {
        return Err(Error::Usage("at least one independent variable is required".into()));
    }
    if indep.iter().any(|v| v == depvar) {
        return Err(Error::Usage(format!(
            "`{depvar}` is both the dependent and an independent variable"
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = indep.iter().find(|v| !seen.insert(v.as_str())) {
        return Err(Error::Usage(format!("independent variable `{dup}` listed twice")));
    }
    let y_col = ds.numeric(depvar)?;
    let x_cols: Vec<&[Option<f64>]> = indep.iter().map(|v| ds.numeric(v)).collect::<Result<_>>()?;
    if let Some(f) = filter {
        f.validate(ds)?;
    }

    let mut rows = Vec::new();
    for row in 0..ds.n_rows() {
        if let Some(f) = filter {
            if !f.keeps(ds, row)? {
                continue;
            }
        }
        if y_col[row].is_none() || x_cols.iter().any(|c| c[row].is_none()) {
            continue;
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InsufficientObservations(
            "no observations left after filtering and listwise deletion".into(),
        ));
    }

    let k = indep.len();
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| y_col[r].unwrap_or_default()));
    let x = DMatrix::from_fn(rows.len(), k + 1, |i, j| {
        if j == k {
            1.0
        } else {
            x_cols[j][rows[i]].unwrap_or_default()
        }
    });
    let frame = ModelFrame {
        depvar: depvar.to_string(),
        indep_names: indep.to_vec(),
        y,
        x,
        row_origin: rows,
    };
    frame.require_estimable()?;
    Ok(frame)
}
