//! Small dense linear algebra: vectors, matrices, triangular and pivoted
//! solves, symmetric eigenvalues, and the matrix exponential.

use crate::error::{Error, Result};

/// A dense real vector.
pub type DenseVector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> DenseVector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> DenseVector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> DenseVector {
    a.iter().map(|x| s * x).collect()
}

/// `y += s * x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Linear combination `sum_i c_i * v_i` of equally sized vectors.
pub fn combine(terms: &[(f64, &[f64])]) -> DenseVector {
    let d = terms.first().map_or(0, |t| t.1.len());
    let mut out = vec![0.0; d];
    for (c, v) in terms {
        axpy(&mut out, *c, v);
    }
    out
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Parameter(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Parameter("ragged rows".into()));
        }
        Self::from_row_major(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> DenseVector {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self^T x`
    pub fn matvec_t(&self, x: &[f64]) -> DenseVector {
        assert_eq!(x.len(), self.rows, "matvec_t dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            axpy(&mut out, *xi, self.row(i));
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                axpy(dst, a, orow);
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix { rows: self.rows, cols: self.cols, data: add(&self.data, &other.data) }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix { rows: self.rows, cols: self.cols, data: sub(&self.data, &other.data) }
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        DenseMatrix { rows: self.rows, cols: self.cols, data: scale(&self.data, s) }
    }

    /// `(M + M^T) / 2`
    pub fn symmetric_part(&self) -> DenseMatrix {
        self.add(&self.transpose()).scaled(0.5)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn frobenius(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    /// Largest absolute asymmetry `|m_ij - m_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Max-row-sum norm, an upper bound on every induced norm used here.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Forward substitution for a square lower-triangular `l`.
pub fn solve_lower_triangular(l: &DenseMatrix, b: &[f64]) -> Result<DenseVector> {
    let n = l.rows();
    if !l.is_square() || b.len() != n {
        return Err(Error::Parameter(format!(
            "lower-triangular solve needs a square matrix matching rhs length {}",
            b.len()
        )));
    }
    let floor = 1e-14 * l.max_abs();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let d = l[(i, i)];
        if d.abs() < floor || d == 0.0 {
            return Err(Error::Singular(format!("diagonal entry {i} is {d:e}")));
        }
        let s: f64 = (0..i).map(|j| l[(i, j)] * x[j]).sum();
        x[i] = (b[i] - s) / d;
    }
    Ok(x)
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Parameter("LU needs a square matrix".into()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let floor = 1e-14 * a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pv <= floor {
                return Err(Error::Singular(format!("pivot {k} is {pv:e}")));
            }
            if p != k {
                for j in 0..n {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
                perm.swap(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> DenseVector {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "LU solve dimension mismatch");
        let mut x: DenseVector = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.lu.rows();
        let mut inv = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Solves `a x = b` with partial pivoting.
pub fn solve(a: &DenseMatrix, b: &[f64]) -> Result<DenseVector> {
    if b.len() != a.rows() {
        return Err(Error::Parameter("rhs length does not match matrix".into()));
    }
    Ok(Lu::new(a)?.solve(b))
}

/// Whether a symmetric matrix is positive semidefinite up to `tol`, decided by
/// attempting a Cholesky factorization of `m + tol I`.
pub fn is_psd(m: &DenseMatrix, tol: f64) -> bool {
    let n = m.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let s: f64 = (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum();
        let d = m[(j, j)] + tol - s;
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            l[(i, j)] = (0.5 * (m[(i, j)] + m[(j, i)]) - s) / d;
        }
    }
    true
}

/// All eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn eigen_sym(m: &DenseMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Parameter("eigenvalues need a square matrix".into()));
    }
    let scale = m.max_abs();
    if m.asymmetry() > 1e-12 * scale.max(1.0) {
        return Err(Error::Parameter(format!("matrix is not symmetric (gap {:e})", m.asymmetry())));
    }
    if !m.is_finite() {
        return Err(Error::Parameter("matrix has non-finite entries".into()));
    }
    let n = m.rows();
    let mut a = m.symmetric_part();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * a.frobenius().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigen_sym(m: &DenseMatrix) -> Result<f64> {
    Ok(eigen_sym(m)?.first().copied().unwrap_or(0.0))
}

/// `e^{tM}` by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::Parameter("expm needs a square matrix".into()));
    }
    let n = m.rows();
    let a = m.scaled(t);
    let nrm = a.norm_inf();
    let squarings = if nrm > 0.5 { (nrm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = a.scaled(0.5f64.powi(squarings as i32));
    let mut result = DenseMatrix::identity(n);
    let mut term = DenseMatrix::identity(n);
    for k in 1..=30 {
        term = term.matmul(&a).scaled(1.0 / k as f64);
        result = result.add(&term);
        if term.max_abs() <= 1e-18 * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    Ok(result)
}

/// Operator 2-norm estimate by power iteration on `M^T M`.
pub fn spectral_norm(m: &DenseMatrix, max_iter: usize, rel_tol: f64) -> f64 {
    let n = m.cols();
    if n == 0 {
        return 0.0;
    }
    let mut v: DenseVector = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let nv = norm(&v);
    v = scale(&v, 1.0 / nv);
    let mut est = 0.0;
    for _ in 0..max_iter {
        let w = m.matvec_t(&m.matvec(&v));
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = scale(&w, 1.0 / nw);
        if (next - est).abs() <= rel_tol * next {
            return next;
        }
        est = next;
    }
    est
}
