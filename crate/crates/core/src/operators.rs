//! Finite-difference Dirichlet discretizations of `-Δ` and of
//! `H = -∂²₁ - e^{2x₁} Δ_x̃` on a [`GridDomain`].
//!
//! Both operators are assembled in divergence form `Σ_axes Dᵀ W D`: every
//! grid edge between a masked node and a neighbor contributes
//! `w_e (u_p - u_q)² / h²` to the quadratic form, with the neighbor value set
//! to zero when it is not masked. For `H` the weight of an edge along a tilde
//! axis is `e^{2x₁}` at the edge midpoint, which shares `x₁` with both of its
//! endpoints. The matrix is therefore exactly symmetric and positive
//! semidefinite by construction.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::fmt_f64;

/// Compressed sparse rows with a symmetric pattern and sorted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetricMatrix {
    /// Builds from per-row `(column, value)` lists. Duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> SparseSymmetricMatrix {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseSymmetricMatrix { n, row_ptr, col_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: v.len() });
        }
        Ok((0..self.n).map(|i| self.row(i).map(|(j, a)| a * v[j]).sum()).collect())
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j))).max().unwrap_or(0)
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut radius = 0.0;
            let mut center = 0.0;
            for (j, a) in self.row(i) {
                if j == i {
                    center = a;
                } else {
                    radius += a.abs();
                }
            }
            lo = lo.min(center - radius);
            hi = hi.max(center + radius);
        }
        (lo, hi)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, a)| a.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, a)| (i, j, a)))
            .map(|(i, j, a)| (a - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_bitwise_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, a)| a.to_bits() == self.get(j, i).to_bits()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                m[(i, j)] = a;
            }
        }
        m
    }

    /// MatrixMarket coordinate format, 1-based indices, 17 significant digits.
    pub fn write_matrix_market<W: Write>(&self, mut out: W, comment: &str) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        for line in comment.lines() {
            writeln!(out, "% {line}")?;
        }
        writeln!(out, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                writeln!(out, "{} {} {}", i + 1, j + 1, fmt_f64(a))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    Euclidean,
    Hyperbolic,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Euclidean => "euclidean",
            OperatorKind::Hyperbolic => "hyperbolic",
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(OperatorKind::Euclidean),
            "hyperbolic" => Ok(OperatorKind::Hyperbolic),
            other => Err(Error::Parse(format!("unknown operator kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    matrix: SparseSymmetricMatrix,
    domain: GridDomain,
    kind: OperatorKind,
    /// Row `r` corresponds to grid node `nodes[r]`.
    nodes: Vec<usize>,
    /// Inverse of `nodes`; `usize::MAX` marks unmasked grid nodes.
    rows: Vec<usize>,
}

pub fn assemble_euclidean(dom: &GridDomain) -> DiscreteOperator {
    assemble(dom, OperatorKind::Euclidean, &|_| 1.0)
}

pub fn assemble_hyperbolic(dom: &GridDomain) -> DiscreteOperator {
    assemble(dom, OperatorKind::Hyperbolic, &|x1: f64| (2.0 * x1).exp())
}

/// Hyperbolic assembly with the tilde-axis coefficient `e^{2x₁}` replaced by
/// `coefficient(x₁)`.
pub fn assemble_hyperbolic_with(dom: &GridDomain, coefficient: &dyn Fn(f64) -> f64) -> DiscreteOperator {
    assemble(dom, OperatorKind::Hyperbolic, coefficient)
}

pub fn assemble_kind(dom: &GridDomain, kind: OperatorKind) -> DiscreteOperator {
    match kind {
        OperatorKind::Euclidean => assemble_euclidean(dom),
        OperatorKind::Hyperbolic => assemble_hyperbolic(dom),
    }
}

fn assemble(dom: &GridDomain, kind: OperatorKind, coefficient: &dyn Fn(f64) -> f64) -> DiscreteOperator {
    let dim = dom.dim();
    let h2 = dom.h() * dom.h();
    let nodes: Vec<usize> = dom.masked_nodes().collect();
    let mut rows = vec![usize::MAX; dom.node_count()];
    for (r, &flat) in nodes.iter().enumerate() {
        rows[flat] = r;
    }
    let strides: Vec<usize> = (0..dim).map(|a| dom.stride(a)).collect();
    let mut idx = vec![0usize; dim];
    let mut entries = Vec::with_capacity(nodes.len());
    for &flat in &nodes {
        dom.unflatten_into(flat, &mut idx);
        let x1 = dom.coordinate(0, idx[0]);
        let mut diag = 0.0;
        let mut row = Vec::with_capacity(2 * dim + 1);
        for (axis, &stride) in strides.iter().enumerate() {
            let w = if axis == 0 || kind == OperatorKind::Euclidean { 1.0 } else { coefficient(x1) };
            diag += 2.0 * w / h2;
            // Masked nodes never touch the outer layer, so both neighbors exist.
            for nb in [flat - stride, flat + stride] {
                if dom.is_masked(nb) {
                    row.push((rows[nb], -w / h2));
                }
            }
        }
        row.push((rows[flat], diag));
        entries.push(row);
    }
    DiscreteOperator { matrix: SparseSymmetricMatrix::from_rows(entries), domain: dom.clone(), kind, nodes, rows }
}

/// `A · v`.
pub fn apply(op: &DiscreteOperator, v: &[f64]) -> Result<Vec<f64>> {
    op.apply(v)
}

impl DiscreteOperator {
    pub fn matrix(&self) -> &SparseSymmetricMatrix {
        &self.matrix
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    /// Grid node of each matrix row.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Matrix row of a grid node, if the node is masked.
    pub fn row_of(&self, flat: usize) -> Option<usize> {
        self.rows.get(flat).copied().filter(|&r| r != usize::MAX)
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.matrix.mul_vec(v)
    }

    pub fn write_matrix_market<W: Write>(&self, out: W) -> Result<()> {
        let comment = format!("kind={} h={} n={}", self.kind, fmt_f64(self.domain.h()), self.n());
        self.matrix.write_matrix_market(out, &comment)
    }
}
