//! Small dense linear algebra for desk-scale problems (n up to a handful).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Self {
        Self::from_rows(cols).transpose()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `self * v` for a column vector `v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `p * self` for a row vector `p`.
    pub fn vec_mul(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, p.len());
        let mut out = vec![0.0; self.cols];
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += pi * a;
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| libm::fabs(*a)).fold(0.0, f64::max)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().map(|x| libm::fabs(*x)).fold(0.0, f64::max)
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `1e-14` times the largest entry.
pub fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    assert_eq!(n, b.len());
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, libm::fabs(m[(r, col)])))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= 1e-14 * scale {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            rhs.swap(col, piv);
        }
        for r in col + 1..n {
            let f = m[(r, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(r, j)] -= f * m[(col, j)];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[(i, j)] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[(i, i)];
    }
    Some(x)
}

pub fn inverse(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cols.push(solve(a, &e)?);
    }
    Some(Matrix::from_columns(&cols))
}

/// Singular values (descending) by one-sided Jacobi rotations.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    // Work on the orientation with fewer columns.
    let work = if a.cols() > a.rows() { a.transpose() } else { a.clone() };
    let (m, n) = (work.rows(), work.cols());
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| work.column(j)).collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if libm::fabs(gamma) <= 1e-15 * libm::sqrt(alpha * beta) || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let xp = cols[p][i];
                    let xq = cols[q][i];
                    cols[p][i] = c * xp - s * xq;
                    cols[q][i] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(core::cmp::Ordering::Equal));
    sv
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numeric_rank(a: &Matrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Orthonormal basis of `{z : row . z = 0 for every row}`.
///
/// Rows are normalized, then reduced with full pivoting; elimination stops once
/// the largest remaining entry is at most `pivot_tol`.
pub fn null_space(rows: &[Vec<f64>], dim: usize, pivot_tol: f64) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = rows
        .iter()
        .filter_map(|r| {
            assert_eq!(r.len(), dim);
            let nr = norm(r);
            (nr > 0.0).then(|| r.iter().map(|x| x / nr).collect())
        })
        .collect();
    let mut perm: Vec<usize> = (0..dim).collect();
    let mut rank = 0;
    while rank < m.len() && rank < dim {
        let mut best = (rank, rank, 0.0);
        for (i, row) in m.iter().enumerate().skip(rank) {
            for (j, v) in row.iter().enumerate().skip(rank) {
                if libm::fabs(*v) > best.2 {
                    best = (i, j, libm::fabs(*v));
                }
            }
        }
        if best.2 <= pivot_tol {
            break;
        }
        m.swap(rank, best.0);
        if best.1 != rank {
            for row in m.iter_mut() {
                row.swap(rank, best.1);
            }
            perm.swap(rank, best.1);
        }
        let pivot_row = m[rank].clone();
        let pv = pivot_row[rank];
        for (i, row) in m.iter_mut().enumerate() {
            if i == rank {
                continue;
            }
            let f = row[rank] / pv;
            if f != 0.0 {
                axpy(-f, &pivot_row, row);
            }
        }
        rank += 1;
    }
    // Free columns are rank..dim in permuted order.
    let mut basis = Vec::new();
    for free in rank..dim {
        let mut z = vec![0.0; dim];
        z[perm[free]] = 1.0;
        for (piv, row) in m.iter().enumerate().take(rank) {
            z[perm[piv]] = -row[free] / row[piv];
        }
        basis.push(z);
    }
    orthonormalize(basis)
}

/// Modified Gram-Schmidt; drops vectors that become numerically zero.
pub fn orthonormalize(vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for mut v in vectors {
        let original = norm(&v);
        for _ in 0..2 {
            for q in &out {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let nv = norm(&v);
        if nv > 1e-12 * original.max(1.0) {
            v.iter_mut().for_each(|x| *x /= nv);
            out.push(v);
        }
    }
    out
}

/// Least squares with columns `cols` (each of length `d`), via normal equations.
fn least_squares(cols: &[&Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let k = cols.len();
    let mut g = Matrix::zeros(k, k);
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            g[(i, j)] = dot(cols[i], cols[j]);
        }
        rhs[i] = dot(cols[i], b);
    }
    solve(&g, &rhs)
}

/// Projection of `v` onto the convex cone spanned by `generators`
/// (non-negative least squares, Lawson-Hanson active set).
///
/// Returns the projection and the generator coefficients.
pub fn project_onto_cone(v: &[f64], generators: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = v.len();
    let k = generators.len();
    let mut x = vec![0.0; k];
    if k == 0 {
        return (vec![0.0; d], x);
    }
    let tol = 1e-13 * (1.0 + norm(v)) * generators.iter().map(|g| norm(g)).fold(1.0, f64::max);
    let mut passive = vec![false; k];
    let mut banned = vec![false; k];
    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = v.to_vec();
        for (g, &c) in generators.iter().zip(x) {
            if c != 0.0 {
                axpy(-c, g, &mut r);
            }
        }
        r
    };
    for _outer in 0..(3 * k + 10) {
        let r = residual(&x);
        let w: Vec<f64> = generators.iter().map(|g| dot(g, &r)).collect();
        let candidate = (0..k)
            .filter(|&j| !passive[j] && !banned[j] && w[j] > tol)
            .max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap_or(core::cmp::Ordering::Equal));
        let Some(j) = candidate else { break };
        passive[j] = true;
        for _inner in 0..(3 * k + 10) {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let cols: Vec<&Vec<f64>> = idx.iter().map(|&i| &generators[i]).collect();
            let Some(sol) = least_squares(&cols, v) else {
                passive[j] = false;
                banned[j] = true;
                break;
            };
            if sol.iter().all(|&c| c > 0.0) {
                for (pos, &i) in idx.iter().enumerate() {
                    x[i] = sol[pos];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (pos, &i) in idx.iter().enumerate() {
                if sol[pos] <= 0.0 {
                    let denom = x[i] - sol[pos];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            for (pos, &i) in idx.iter().enumerate() {
                x[i] += alpha * (sol[pos] - x[i]);
                if x[i] <= 1e-15 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    let mut proj = vec![0.0; d];
    for (g, &c) in generators.iter().zip(&x) {
        axpy(c, g, &mut proj);
    }
    (proj, x)
}

/// Euclidean distance from `v` to the cone spanned by `generators`.
pub fn distance_to_cone(v: &[f64], generators: &[Vec<f64>]) -> f64 {
    let (proj, _) = project_onto_cone(v, generators);
    norm(&sub(v, &proj))
}
