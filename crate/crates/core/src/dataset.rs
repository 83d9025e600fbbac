//! Train/test regression data and its CSV + JSON on-disk form.
//!
//! Layout of a dataset directory:
//!
//! - `x.csv` with header `split,row,col,value`
//! - `y.csv` with header `split,row,channel,value`
//! - `dataset.json` with `{task, seed, sizes, generator}`

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::PointSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub train_x: PointSet,
    /// `N × k` training targets.
    pub train_y: DMatrix<f64>,
    pub test_x: PointSet,
    /// `n × k` test targets.
    pub test_y: DMatrix<f64>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        train_x: PointSet,
        train_y: DMatrix<f64>,
        test_x: PointSet,
        test_y: DMatrix<f64>,
    ) -> Result<Self> {
        let data = Dataset {
            name: name.into(),
            train_x,
            train_y,
            test_x,
            test_y,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let mismatch = |context, expected, got| Error::DimensionMismatch {
            context,
            expected,
            got,
        };
        if self.train_y.nrows() != self.train_x.len() {
            return Err(mismatch("train targets rows", self.train_x.len(), self.train_y.nrows()));
        }
        if self.test_y.nrows() != self.test_x.len() {
            return Err(mismatch("test targets rows", self.test_x.len(), self.test_y.nrows()));
        }
        if self.test_x.dim() != self.train_x.dim() {
            return Err(mismatch("test input dimension", self.train_x.dim(), self.test_x.dim()));
        }
        if self.train_y.ncols() == 0 {
            return Err(Error::invalid("targets", "output dimension must be at least 1"));
        }
        if self.test_y.ncols() != self.train_y.ncols() {
            return Err(mismatch("test target width", self.train_y.ncols(), self.test_y.ncols()));
        }
        if self.train_y.iter().chain(self.test_y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("targets", "all targets must be finite"));
        }
        Ok(())
    }

    pub fn n_train(&self) -> usize {
        self.train_x.len()
    }

    pub fn n_test(&self) -> usize {
        self.test_x.len()
    }

    pub fn output_dim(&self) -> usize {
        self.train_y.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.train_x.dim()
    }
}

/// Sidecar describing how a dataset directory was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub task: String,
    pub seed: u64,
    pub sizes: DatasetSizes,
    pub generator: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSizes {
    pub n_train: usize,
    pub n_test: usize,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl DatasetSizes {
    pub fn of(data: &Dataset) -> Self {
        DatasetSizes {
            n_train: data.n_train(),
            n_test: data.n_test(),
            input_dim: data.input_dim(),
            output_dim: data.output_dim(),
        }
    }
}

pub const X_FILE: &str = "x.csv";
pub const Y_FILE: &str = "y.csv";
pub const MANIFEST_FILE: &str = "dataset.json";

pub fn write_dataset(dir: &Path, data: &Dataset, manifest: &DatasetManifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let x_path = dir.join(X_FILE);
    let mut w = BufWriter::new(File::create(&x_path).map_err(|e| Error::io(&x_path, e))?);
    let io = |e| Error::io(&x_path, e);
    writeln!(w, "split,row,col,value").map_err(io)?;
    for (split, points) in [("train", &data.train_x), ("test", &data.test_x)] {
        for (r, row) in points.rows().enumerate() {
            for (c, v) in row.iter().enumerate() {
                writeln!(w, "{split},{r},{c},{v}").map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;

    let y_path = dir.join(Y_FILE);
    let mut w = BufWriter::new(File::create(&y_path).map_err(|e| Error::io(&y_path, e))?);
    let io = |e| Error::io(&y_path, e);
    writeln!(w, "split,row,channel,value").map_err(io)?;
    for (split, targets) in [("train", &data.train_y), ("test", &data.test_y)] {
        for r in 0..targets.nrows() {
            for c in 0..targets.ncols() {
                writeln!(w, "{split},{r},{c},{}", targets[(r, c)]).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)?;

    let m_path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(&m_path, json + "\n").map_err(|e| Error::io(&m_path, e))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Entry {
    split: String,
    row: usize,
    col: usize,
    value: f64,
}

fn read_entries(path: &Path, second: &str) -> Result<Vec<Entry>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["split", "row", second, "value"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::format(path, format!("expected header {}", expected.join(","))));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<&str> {
            rec.get(i)
                .ok_or_else(|| Error::format(path, "short record"))
        };
        let num = |i: usize| -> Result<usize> {
            parse(i)?
                .parse()
                .map_err(|_| Error::format(path, format!("bad index `{}`", rec.get(i).unwrap_or(""))))
        };
        out.push(Entry {
            split: parse(0)?.to_string(),
            row: num(1)?,
            col: num(2)?,
            value: parse(3)?
                .parse()
                .map_err(|_| Error::format(path, format!("bad value `{}`", rec.get(3).unwrap_or(""))))?,
        });
    }
    Ok(out)
}

fn assemble(path: &Path, entries: &[Entry], split: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::from_element(rows, cols, f64::NAN);
    let mut seen = 0usize;
    for e in entries.iter().filter(|e| e.split == split) {
        if e.row >= rows || e.col >= cols {
            return Err(Error::format(
                path,
                format!("{split} entry ({}, {}) outside {rows}×{cols}", e.row, e.col),
            ));
        }
        m[(e.row, e.col)] = e.value;
        seen += 1;
    }
    if seen != rows * cols || m.iter().any(|v| v.is_nan()) {
        return Err(Error::format(path, format!("{split} split is incomplete")));
    }
    Ok(m)
}

pub fn read_dataset(dir: &Path) -> Result<(Dataset, DatasetManifest)> {
    let m_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&m_path).map_err(|e| Error::io(&m_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let sizes = manifest.sizes;

    let x_path = dir.join(X_FILE);
    let xs = read_entries(&x_path, "col")?;
    let y_path = dir.join(Y_FILE);
    let ys = read_entries(&y_path, "channel")?;

    let train_x = assemble(&x_path, &xs, "train", sizes.n_train, sizes.input_dim)?;
    let test_x = assemble(&x_path, &xs, "test", sizes.n_test, sizes.input_dim)?;
    let train_y = assemble(&y_path, &ys, "train", sizes.n_train, sizes.output_dim)?;
    let test_y = assemble(&y_path, &ys, "test", sizes.n_test, sizes.output_dim)?;

    let data = Dataset::new(
        manifest.task.clone(),
        PointSet::from_matrix(&train_x)?,
        train_y,
        PointSet::from_matrix(&test_x)?,
        test_y,
    )?;
    Ok((data, manifest))
}
