//! Data tables read from CSV.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::util::fmt_sig;

#[derive(Debug, Clone, PartialEq)]
enum Column {
    Num(Vec<f64>),
    /// A column none of whose cells parse as numbers, e.g. row labels.
    Text(Vec<String>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Num(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }
}

/// Named columns of equal length. Numeric columns store missing cells as
/// NaN; text columns are kept verbatim and cannot enter a model.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl DataTable {
    pub fn from_columns(cols: Vec<(String, Vec<f64>)>) -> Result<Self> {
        Self::build(cols.into_iter().map(|(n, v)| (n, Column::Num(v))).collect())
    }

    fn build(cols: Vec<(String, Column)>) -> Result<Self> {
        let n_rows = cols.first().map_or(0, |c| c.1.len());
        let mut names = Vec::with_capacity(cols.len());
        let mut columns = Vec::with_capacity(cols.len());
        for (name, v) in cols {
            if v.len() != n_rows {
                return Err(Error::Data(format!(
                    "column `{name}` has {} rows, expected {n_rows}",
                    v.len()
                )));
            }
            if names.contains(&name) {
                return Err(Error::Data(format!("column `{name}` appears twice")));
            }
            names.push(name);
            columns.push(v);
        }
        Ok(Self {
            names,
            columns,
            n_rows,
        })
    }

    /// Reads a CSV with a header row. Empty cells and `NA` become missing.
    /// A column without a single numeric cell is read as text; a column
    /// mixing numbers and text is an error.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut raw = vec![Vec::new(); names.len()];
        for rec in rdr.records() {
            let rec = rec?;
            for (k, cell) in rec.iter().enumerate() {
                raw[k].push(cell.to_string());
            }
        }
        let mut cols = Vec::with_capacity(names.len());
        for (name, cells) in names.into_iter().zip(raw) {
            let missing = |c: &str| c.is_empty() || c == "NA";
            let parsed: Vec<Option<f64>> = cells
                .iter()
                .map(|c| {
                    if missing(c) {
                        Some(f64::NAN)
                    } else {
                        c.parse().ok()
                    }
                })
                .collect();
            let any_number = cells
                .iter()
                .zip(&parsed)
                .any(|(c, p)| !missing(c) && p.is_some());
            let column = match parsed.iter().position(Option::is_none) {
                None => Column::Num(parsed.into_iter().flatten().collect()),
                Some(i) if any_number => {
                    return Err(Error::Data(format!(
                        "row {}: column `{name}` has non-numeric value `{}`",
                        i + 1,
                        cells[i]
                    )))
                }
                Some(_) => Column::Text(cells),
            };
            cols.push((name, column));
        }
        Self::build(cols)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f).map_err(|e| match e {
            Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Writes numbers with `digits` significant digits; missing cells as `NA`.
    pub fn write_csv<W: Write>(&self, w: W, digits: usize) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.names)?;
        for i in 0..self.n_rows {
            wtr.write_record(self.columns.iter().map(|c| match c {
                Column::Num(v) if v[i].is_nan() => "NA".to_string(),
                Column::Num(v) => fmt_sig(v[i], digits),
                Column::Text(v) => v[i].clone(),
            }))?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// A numeric column.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        match self
            .names
            .iter()
            .position(|n| n == name)
            .map(|k| &self.columns[k])
        {
            Some(Column::Num(v)) => Some(v),
            _ => None,
        }
    }

    pub fn text_column(&self, name: &str) -> Option<&[String]> {
        match self
            .names
            .iter()
            .position(|n| n == name)
            .map(|k| &self.columns[k])
        {
            Some(Column::Text(v)) => Some(v),
            _ => None,
        }
    }

    /// A numeric column that must exist and be fully observed.
    pub fn complete_column(&self, name: &str) -> Result<&[f64]> {
        let c = self.column(name).ok_or_else(|| {
            if self.text_column(name).is_some() {
                Error::Data(format!("column `{name}` is not numeric"))
            } else {
                Error::Data(format!("no column named `{name}`"))
            }
        })?;
        if let Some(i) = c.iter().position(|v| v.is_nan()) {
            return Err(Error::Data(format!(
                "column `{name}` is missing at row {}; only the response may be missing",
                i + 1
            )));
        }
        Ok(c)
    }

    pub fn push_column(&mut self, name: &str, v: Vec<f64>) -> Result<()> {
        self.push(name, Column::Num(v))
    }

    pub fn push_text_column(&mut self, name: &str, v: Vec<String>) -> Result<()> {
        self.push(name, Column::Text(v))
    }

    fn push(&mut self, name: &str, col: Column) -> Result<()> {
        if !self.names.is_empty() && col.len() != self.n_rows {
            return Err(Error::Data(format!(
                "column `{name}` has {} rows, expected {}",
                col.len(),
                self.n_rows
            )));
        }
        let mut cols: Vec<(String, Column)> =
            self.names.drain(..).zip(self.columns.drain(..)).collect();
        cols.push((name.into(), col));
        *self = Self::build(cols)?;
        Ok(())
    }
}

/// Loads a CSV data table.
pub fn load_table(path: &Path) -> Result<DataTable> {
    DataTable::load(path)
}
