//! Design matrix storage and the handful of matrix primitives the solvers use.
//!
//! Both storage kinds are column oriented: coordinate descent and every
//! screening test consume whole columns, so column dot products dominate.

use crate::error::{Error, Result};
use crate::{dot, norm2};

const POWER_MAX_ITER: usize = 1000;
const POWER_TOL: f64 = 1e-10;

const GROUP_POWER_MAX_ITER: usize = 10_000;
const GROUP_POWER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum Storage {
    /// Column-major values, `n_rows * n_cols` long.
    Dense(Vec<f64>),
    /// Compressed sparse column.
    Sparse {
        values: Vec<f64>,
        row_indices: Vec<usize>,
        col_offsets: Vec<usize>,
    },
}

/// An `n × p` observation matrix. Immutable once built; column norms are
/// computed at construction and cached.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    n_cols: usize,
    storage: Storage,
    col_norms: Vec<f64>,
}

/// Result of a power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorm {
    pub value: f64,
    /// False when the iteration budget ran out before the Rayleigh quotient settled.
    pub converged: bool,
    pub iterations: usize,
}

impl DesignMatrix {
    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: data.len(),
            });
        }
        let mut col_major = vec![0.0; data.len()];
        for i in 0..n_rows {
            for j in 0..n_cols {
                col_major[j * n_rows + i] = data[i * n_cols + j];
            }
        }
        Self::from_col_major(n_rows, n_cols, col_major)
    }

    pub fn from_col_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {v}")));
        }
        let col_norms = (0..n_cols)
            .map(|j| norm2(&data[j * n_rows..(j + 1) * n_rows]))
            .collect();
        Ok(DesignMatrix {
            n_rows,
            n_cols,
            storage: Storage::Dense(data),
            col_norms,
        })
    }

    /// Builds a dense matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(n_rows, n_cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_col_major(n, n, data).expect("identity is well formed")
    }

    /// Builds a compressed-sparse-column matrix, validating the layout.
    pub fn from_csc(
        n_rows: usize,
        n_cols: usize,
        values: Vec<f64>,
        row_indices: Vec<usize>,
        col_offsets: Vec<usize>,
    ) -> Result<Self> {
        if col_offsets.len() != n_cols + 1 {
            return Err(Error::InvalidMatrix(format!(
                "expected {} column offsets, found {}",
                n_cols + 1,
                col_offsets.len()
            )));
        }
        if values.len() != row_indices.len() {
            return Err(Error::InvalidMatrix(
                "values and row indices differ in length".into(),
            ));
        }
        if col_offsets[0] != 0 || col_offsets[n_cols] != values.len() {
            return Err(Error::InvalidMatrix(
                "column offsets must start at 0 and end at nnz".into(),
            ));
        }
        for j in 0..n_cols {
            let (start, end) = (col_offsets[j], col_offsets[j + 1]);
            if start > end {
                return Err(Error::InvalidMatrix(format!(
                    "column offsets decrease at column {j}"
                )));
            }
            let rows = &row_indices[start..end];
            if rows.iter().any(|&i| i >= n_rows) {
                return Err(Error::InvalidMatrix(format!(
                    "row index out of range in column {j}"
                )));
            }
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!(
                    "row indices not strictly increasing in column {j}"
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {v}")));
        }
        let col_norms = (0..n_cols)
            .map(|j| norm2(&values[col_offsets[j]..col_offsets[j + 1]]))
            .collect();
        Ok(DesignMatrix {
            n_rows,
            n_cols,
            storage: Storage::Sparse {
                values,
                row_indices,
                col_offsets,
            },
            col_norms,
        })
    }

    /// Builds a compressed-column matrix from `(row, col, value)` triplets.
    /// Duplicate coordinates are rejected.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (j, i));
        let mut col_offsets = vec![0usize; n_cols + 1];
        let mut values = Vec::with_capacity(sorted.len());
        let mut row_indices = Vec::with_capacity(sorted.len());
        for (k, &(i, j, v)) in sorted.iter().enumerate() {
            if j >= n_cols || i >= n_rows {
                return Err(Error::InvalidMatrix(format!(
                    "entry ({i}, {j}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            if k > 0 && sorted[k - 1].0 == i && sorted[k - 1].1 == j {
                return Err(Error::InvalidMatrix(format!("duplicate entry ({i}, {j})")));
            }
            col_offsets[j + 1] += 1;
            values.push(v);
            row_indices.push(i);
        }
        for j in 0..n_cols {
            col_offsets[j + 1] += col_offsets[j];
        }
        Self::from_csc(n_rows, n_cols, values, row_indices, col_offsets)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(data) => data.len(),
            Storage::Sparse { values, .. } => values.len(),
        }
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        self.col_norms[j]
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    /// `X_j^T v`.
    #[inline]
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        match &self.storage {
            Storage::Dense(data) => dot(&data[j * self.n_rows..(j + 1) * self.n_rows], v),
            Storage::Sparse {
                values,
                row_indices,
                col_offsets,
            } => {
                let range = col_offsets[j]..col_offsets[j + 1];
                values[range.clone()]
                    .iter()
                    .zip(&row_indices[range])
                    .map(|(x, &i)| x * v[i])
                    .sum()
            }
        }
    }

    /// `out += a · X_j`.
    #[inline]
    pub fn col_axpy(&self, j: usize, a: f64, out: &mut [f64]) {
        if a == 0.0 {
            return;
        }
        match &self.storage {
            Storage::Dense(data) => {
                let col = &data[j * self.n_rows..(j + 1) * self.n_rows];
                for (o, x) in out.iter_mut().zip(col) {
                    *o += a * x;
                }
            }
            Storage::Sparse {
                values,
                row_indices,
                col_offsets,
            } => {
                let range = col_offsets[j]..col_offsets[j + 1];
                for (x, &i) in values[range.clone()].iter().zip(&row_indices[range]) {
                    out[i] += a * x;
                }
            }
        }
    }

    /// Stored `(row, value)` pairs of column `j`; dense columns yield every row.
    pub fn column(&self, j: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Dense(data) => data[j * self.n_rows..(j + 1) * self.n_rows]
                .iter()
                .copied()
                .enumerate()
                .collect(),
            Storage::Sparse {
                values,
                row_indices,
                col_offsets,
            } => {
                let range = col_offsets[j]..col_offsets[j + 1];
                row_indices[range.clone()]
                    .iter()
                    .copied()
                    .zip(values[range].iter().copied())
                    .collect()
            }
        }
    }

    /// `Xβ`.
    pub fn matvec(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: beta.len(),
            });
        }
        let mut out = vec![0.0; self.n_rows];
        for (j, &b) in beta.iter().enumerate() {
            self.col_axpy(j, b, &mut out);
        }
        Ok(out)
    }

    /// `X^T v`.
    pub fn rmatvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: v.len(),
            });
        }
        Ok((0..self.n_cols).map(|j| self.col_dot(j, v)).collect())
    }

    /// Row-major dense copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for j in 0..self.n_cols {
            for (i, v) in self.column(j) {
                out[i * self.n_cols + j] = v;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DesignMatrix {
        DesignMatrix::from_row_major(self.n_rows, self.n_cols, self.to_row_major())
            .expect("dense copy of a valid matrix")
    }

    /// `X^T`, keeping the storage kind. Rows of `X` become columns of the result.
    pub fn transpose(&self) -> DesignMatrix {
        match &self.storage {
            Storage::Dense(_) => {
                // The row-major layout of X is the column-major layout of X^T.
                DesignMatrix::from_col_major(self.n_cols, self.n_rows, self.to_row_major())
                    .expect("transpose of a valid matrix")
            }
            Storage::Sparse { .. } => {
                let triplets: Vec<(usize, usize, f64)> = (0..self.n_cols)
                    .flat_map(|j| self.column(j).into_iter().map(move |(i, v)| (j, i, v)))
                    .collect();
                DesignMatrix::from_triplets(self.n_cols, self.n_rows, &triplets)
                    .expect("transpose of a valid matrix")
            }
        }
    }

    /// Largest singular value by power iteration on `X^T X`.
    ///
    /// Stops when the Rayleigh quotient changes by less than `1e-10` relative,
    /// or after 1000 iterations (then `converged` is false and the best
    /// estimate so far is returned).
    pub fn spectral_norm(&self) -> SpectralNorm {
        let all: Vec<usize> = (0..self.n_cols).collect();
        power_iteration(self, &all, POWER_MAX_ITER, POWER_TOL)
    }
}

/// Largest singular value of the column submatrix `X_cols`.
fn power_iteration(x: &DesignMatrix, cols: &[usize], max_iter: usize, tol: f64) -> SpectralNorm {
    let k = cols.len();
    if k == 0 {
        return SpectralNorm {
            value: 0.0,
            converged: true,
            iterations: 0,
        };
    }
    if k == 1 {
        return SpectralNorm {
            value: x.col_norm(cols[0]),
            converged: true,
            iterations: 0,
        };
    }
    // Deterministic start with no special alignment.
    let mut v: Vec<f64> = (0..k).map(|i| 1.0 + 0.5 * ((i + 1) as f64).sin()).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|e| *e /= nv);

    let mut xv = vec![0.0; x.n_rows()];
    let mut prev = f64::NAN;
    let mut best = 0.0f64;
    for it in 1..=max_iter {
        xv.iter_mut().for_each(|e| *e = 0.0);
        for (c, &j) in cols.iter().enumerate() {
            x.col_axpy(j, v[c], &mut xv);
        }
        // ‖Xv‖ with ‖v‖ = 1 is the square root of the Rayleigh quotient.
        let rho = norm2(&xv);
        best = best.max(rho);
        if rho == 0.0 {
            return SpectralNorm {
                value: 0.0,
                converged: true,
                iterations: it,
            };
        }
        let mut w: Vec<f64> = cols.iter().map(|&j| x.col_dot(j, &xv)).collect();
        let nw = norm2(&w);
        w.iter_mut().for_each(|e| *e /= nw);
        v = w;
        if (rho - prev).abs() <= tol * rho {
            return SpectralNorm {
                value: rho,
                converged: true,
                iterations: it,
            };
        }
        prev = rho;
    }
    SpectralNorm {
        value: best,
        converged: false,
        iterations: max_iter,
    }
}

/// An ordered partition of the columns into groups, with the operator norm
/// `‖X_g‖` of every group cached.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    groups: Vec<Vec<usize>>,
    norms: Vec<f64>,
    n_features: usize,
}

impl GroupStructure {
    /// One group per column.
    pub fn singletons(x: &DesignMatrix) -> Self {
        GroupStructure {
            groups: (0..x.n_cols()).map(|j| vec![j]).collect(),
            norms: x.col_norms().to_vec(),
            n_features: x.n_cols(),
        }
    }

    /// Consecutive blocks of `size` columns; the last block may be shorter.
    pub fn contiguous(x: &DesignMatrix, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidGroups("group size must be positive".into()));
        }
        let p = x.n_cols();
        let groups = (0..p)
            .step_by(size)
            .map(|start| (start..(start + size).min(p)).collect())
            .collect();
        Self::new(x, groups)
    }

    /// Validates that `groups` partitions the columns of `x`.
    pub fn new(x: &DesignMatrix, groups: Vec<Vec<usize>>) -> Result<Self> {
        let p = x.n_cols();
        let mut seen = vec![false; p];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidGroups(format!("group {g} is empty")));
            }
            for &j in members {
                if j >= p {
                    return Err(Error::InvalidGroups(format!(
                        "group {g} references column {j} of a {p}-column matrix"
                    )));
                }
                if seen[j] {
                    return Err(Error::InvalidGroups(format!(
                        "column {j} belongs to more than one group"
                    )));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidGroups(format!("column {j} is in no group")));
        }
        let norms = groups
            .iter()
            .map(|cols| power_iteration(x, cols, GROUP_POWER_MAX_ITER, GROUP_POWER_TOL).value)
            .collect();
        Ok(GroupStructure {
            groups,
            norms,
            n_features: p,
        })
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// `‖X_g‖`, the largest singular value of the group's columns.
    pub fn norm(&self, g: usize) -> f64 {
        self.norms[g]
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn all_singletons(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    pub fn max_group_size(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Gathers the entries of a length-`p` vector belonging to group `g`.
    pub fn gather(&self, g: usize, v: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.groups[g].iter().map(|&j| v[j]));
    }
}

/// `X_g^T v`.
pub fn group_adjoint(
    x: &DesignMatrix,
    groups: &GroupStructure,
    g: usize,
    v: &[f64],
) -> Result<Vec<f64>> {
    if g >= groups.len() {
        return Err(Error::UnknownGroup(g));
    }
    if v.len() != x.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            found: v.len(),
        });
    }
    Ok(groups.group(g).iter().map(|&j| x.col_dot(j, v)).collect())
}
