//! Gaussian RBF kernel and kernel-matrix algebra.
//!
//! The multi-output kernel is block-scalar, `K(x1, x2) = κ(x1, x2)·I_k`, so
//! only the scalar Gram matrix is ever stored and each of the `k` output
//! channels is solved independently against it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    GaussianRbf,
}

/// `κ(x1, x2) = exp(-γ/2 · ‖x1 - x2‖²)` with `γ = bandwidth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
    pub output_dim: usize,
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64, output_dim: usize) -> Result<Self> {
        let spec = KernelSpec {
            family: KernelFamily::GaussianRbf,
            bandwidth,
            output_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::invalid(
                "bandwidth",
                format!("must be positive and finite, got {}", self.bandwidth),
            ));
        }
        if self.output_dim == 0 {
            return Err(Error::invalid("output_dim", "must be at least 1"));
        }
        Ok(())
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval(&self, x1: &[f64], x2: &[f64]) -> f64 {
        let sq: f64 = x1
            .iter()
            .zip(x2)
            .map(|(a, b)| {
                let d = a - b;
                d * d
            })
            .sum();
        (-0.5 * self.bandwidth * sq).exp()
    }
}

/// A set of points stored row-major, one input vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(count: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("points", "a point set needs at least one point"));
        }
        if dim == 0 {
            return Err(Error::invalid("points", "input dimension must be at least 1"));
        }
        if data.len() != count * dim {
            return Err(Error::DimensionMismatch {
                context: "point set buffer",
                expected: count * dim,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "points",
                format!("non-finite entry at row {}, column {}", pos / dim, pos % dim),
            ));
        }
        Ok(PointSet { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "point set rows",
                expected: dim,
                got: bad.len(),
            });
        }
        PointSet::new(rows.len(), dim, rows.concat())
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let data = m.transpose().as_slice().to_vec();
        PointSet::new(m.nrows(), m.ncols(), data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.data)
    }

    /// Points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<PointSet> {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        PointSet::new(indices.len(), self.dim, data)
    }

    pub(crate) fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> PointSet {
        let dim = self.dim;
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &v)| f(i % dim, v))
            .collect();
        PointSet { dim, data }
    }
}

fn check_dims(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

pub fn kernel_scalar(spec: &KernelSpec, x1: &[f64], x2: &[f64]) -> Result<f64> {
    check_dims("kernel_scalar", x1.len(), x2.len())?;
    Ok(spec.eval(x1, x2))
}

/// Scalar Gram matrix `κ(A, B)` of shape `|A| × |B|`.
pub fn kernel_matrix(spec: &KernelSpec, a: &PointSet, b: &PointSet) -> Result<DMatrix<f64>> {
    check_dims("kernel_matrix", a.dim(), b.dim())?;
    Ok(gram(spec, a, b))
}

pub(crate) fn gram(spec: &KernelSpec, a: &PointSet, b: &PointSet) -> DMatrix<f64> {
    // column-major fill: walk b in the outer loop so writes are contiguous
    let mut out = DMatrix::zeros(a.len(), b.len());
    for (j, xb) in b.rows().enumerate() {
        let col = out.column_mut(j);
        for (slot, xa) in col.into_iter().zip(a.rows()) {
            *slot = spec.eval(xa, xb);
        }
    }
    out
}

/// `κ(rows, cols) · w`, accumulated over groups of `group_size` columns so
/// that no more than `|rows| × group_size` kernel entries exist at once.
pub fn kernel_matmul_chunked(
    spec: &KernelSpec,
    rows: &PointSet,
    cols: &PointSet,
    w: &DMatrix<f64>,
    group_size: usize,
) -> Result<DMatrix<f64>> {
    check_dims("kernel_matmul_chunked inputs", rows.dim(), cols.dim())?;
    check_dims("kernel_matmul_chunked weights", cols.len(), w.nrows())?;
    if group_size == 0 {
        return Err(Error::invalid("group_size", "must be positive"));
    }
    let mut out = DMatrix::zeros(rows.len(), w.ncols());
    let mut start = 0;
    while start < cols.len() {
        let end = (start + group_size).min(cols.len());
        let idx: Vec<usize> = (start..end).collect();
        let group = cols.select(&idx)?;
        let block = gram(spec, rows, &group);
        out += block * w.rows(start, end - start);
        start = end;
    }
    Ok(out)
}

/// `κ(X, X) · v` computed group by group.
pub fn kernel_matvec_chunked(
    spec: &KernelSpec,
    x: &PointSet,
    v: &DVector<f64>,
    group_size: usize,
) -> Result<DVector<f64>> {
    let w = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let out = kernel_matmul_chunked(spec, x, x, &w, group_size)?;
    Ok(DVector::from_column_slice(out.as_slice()))
}
