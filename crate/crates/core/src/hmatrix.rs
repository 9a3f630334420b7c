//! Lower-triangular step-size matrices, the anti-diagonal transpose, the
//! closed-form matrices of the named methods, and generic matrix-driven runs.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::numerics::{axpy, norm_sq, sub, DenseMatrix, DenseVector};
use crate::operators::{NonexpansiveMap, SaddleProblem};
use crate::trace::{Trace, GRAD_NORM_SQ, RESIDUAL_SQ};

/// Exact rational entries.
pub type Rational = Ratio<i64>;

/// Which iteration an [`HMatrix`] drives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "convention", rename_all = "snake_case")]
pub enum Convention {
    /// `y_{k+1} = y_k - sum_j h_{k+1,j+1} (y_j - T y_j)`.
    FixedPoint,
    /// `x_{(l+1)/2} = x_{l/2} - (1/L) sum_i h_{l,i} A x_{i/2}`, entries in units of `alpha L`.
    Gradient { alpha_l: f64 },
}

/// Square lower-triangular matrix of step coefficients, stored 0-based:
/// `get(k, j)` is the coefficient `h_{k+1, j+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HMatrix {
    n: usize,
    entries: Vec<f64>,
    pub convention: Convention,
}

impl HMatrix {
    pub fn zeros(n: usize, convention: Convention) -> Result<Self> {
        if n == 0 {
            return param("H-matrix size must be at least 1");
        }
        Ok(Self { n, entries: vec![0.0; n * n], convention })
    }

    /// Builds from lower-triangle rows; row `k` holds `k + 1` entries.
    pub fn from_lower_rows(rows: &[Vec<f64>], convention: Convention) -> Result<Self> {
        let mut h = Self::zeros(rows.len(), convention)?;
        for (k, row) in rows.iter().enumerate() {
            if row.len() != k + 1 {
                return param(format!("row {k} has {} entries, expected {}", row.len(), k + 1));
            }
            for (j, v) in row.iter().enumerate() {
                h.set(k, j, *v);
            }
        }
        Ok(h)
    }

    /// Builds from a square matrix whose strict upper triangle must vanish.
    pub fn from_dense(m: &DenseMatrix, convention: Convention) -> Result<Self> {
        if !m.is_square() {
            return param("H-matrix must be square");
        }
        let mut h = Self::zeros(m.rows(), convention)?;
        for k in 0..m.rows() {
            for j in 0..m.cols() {
                if j > k && m[(k, j)] != 0.0 {
                    return param(format!("entry ({k}, {j}) above the diagonal is nonzero"));
                }
                if j <= k {
                    h.set(k, j, m[(k, j)]);
                }
            }
        }
        Ok(h)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.entries[k * self.n + j]
    }

    pub fn set(&mut self, k: usize, j: usize, v: f64) {
        assert!(j <= k && k < self.n, "H-matrix entries live on or below the diagonal");
        self.entries[k * self.n + j] = v;
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_row_major(self.n, self.n, self.entries.clone()).expect("square storage")
    }

    pub fn lower_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|k| (0..=k).map(|j| self.get(k, j)).collect()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.n).map(|j| (j..self.n).map(|k| self.get(k, j)).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.get(k, k)).collect()
    }

    pub fn max_abs_diff(&self, other: &HMatrix) -> f64 {
        assert_eq!(self.n, other.n, "H-matrix sizes differ");
        self.entries.iter().zip(&other.entries).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Writes the lower triangle, one matrix row per CSV line.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.lower_rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str, convention: Convention) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("`{v}`: {e}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        Self::from_lower_rows(&rows, convention)
    }
}

/// Anti-diagonal transpose: `(H^A)_{k,j} = H_{n-1-j, n-1-k}` (0-based).
pub fn anti_transpose(h: &HMatrix) -> HMatrix {
    let n = h.n;
    let mut out = HMatrix { n, entries: vec![0.0; n * n], convention: h.convention };
    for k in 0..n {
        for j in 0..=k {
            out.set(k, j, h.get(n - 1 - j, n - 1 - k));
        }
    }
    out
}

/// Named fixed-point methods with closed-form H-matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointKind {
    Ohm,
    DualOhm,
}

/// Named extragradient-type methods with closed-form H-matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientKind {
    Feg,
    DualFeg,
}

fn r(num: i64, den: i64) -> Rational {
    Rational::new(num, den)
}

/// Exact entries (lower rows) of the `(N-1) x (N-1)` matrix of a named fixed-point method.
pub fn named_hmatrix_exact(kind: FixedPointKind, big_n: usize) -> Result<Vec<Vec<Rational>>> {
    if big_n < 2 {
        return param(format!("horizon must be at least 2, got {big_n}"));
    }
    let n = big_n as i64;
    Ok((1..big_n as i64)
        .map(|k| {
            (1..=k)
                .map(|j| match (kind, j < k) {
                    (FixedPointKind::Ohm, true) => r(-j, k * (k + 1)),
                    (FixedPointKind::Ohm, false) => r(k, k + 1),
                    (FixedPointKind::DualOhm, true) => r(-(n - k), (n - j) * (n - j + 1)),
                    (FixedPointKind::DualOhm, false) => r(n - k, n - k + 1),
                })
                .collect()
        })
        .collect())
}

fn rows_to_f64(rows: &[Vec<Rational>], unit: f64) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| row.iter().map(|q| unit * (*q.numer() as f64) / (*q.denom() as f64)).collect())
        .collect()
}

pub fn named_hmatrix(kind: FixedPointKind, big_n: usize) -> Result<HMatrix> {
    let exact = named_hmatrix_exact(kind, big_n)?;
    HMatrix::from_lower_rows(&rows_to_f64(&exact, 1.0), Convention::FixedPoint)
}

/// Exact entries (lower rows, units of `alpha L`) of the `2N x 2N` half-index matrix.
/// Row/column `2k` stands for `x_k` and `2k + 1` for `x_{k+1/2}`.
pub fn named_gradient_hmatrix_exact(kind: GradientKind, big_n: usize) -> Result<Vec<Vec<Rational>>> {
    if big_n < 1 {
        return param("gradient H-matrix needs N >= 1");
    }
    let n = big_n as i64;
    let size = 2 * big_n;
    let mut rows = Vec::with_capacity(size);
    for l in 0..size {
        let k = (l / 2) as i64;
        let even = l % 2 == 0;
        let row: Vec<Rational> = (0..=l)
            .map(|i| {
                let ii = i as i64;
                match (kind, even) {
                    (GradientKind::Feg, true) => {
                        if i == l {
                            r(k, k + 1)
                        } else if ii % 2 == 1 {
                            let j = ii / 2;
                            r(-(j + 1), k * (k + 1))
                        } else {
                            r(0, 1)
                        }
                    }
                    (GradientKind::Feg, false) => {
                        if i == l {
                            r(1, 1)
                        } else if i + 1 == l {
                            r(-k, k + 1)
                        } else {
                            r(0, 1)
                        }
                    }
                    (GradientKind::DualFeg, true) => {
                        if i == l {
                            r(1, 1)
                        } else if ii % 2 == 1 {
                            let j = ii / 2;
                            r(-(n - k), (n - j - 1) * (n - j))
                        } else {
                            r(0, 1)
                        }
                    }
                    (GradientKind::DualFeg, false) => {
                        if i == l {
                            r(n - k - 1, n - k)
                        } else if i + 1 == l {
                            r(-(n - k - 1), n - k)
                        } else {
                            r(0, 1)
                        }
                    }
                }
            })
            .collect();
        rows.push(row);
    }
    Ok(rows)
}

pub fn named_gradient_hmatrix(kind: GradientKind, big_n: usize, alpha_l: f64) -> Result<HMatrix> {
    if !(alpha_l > 0.0 && alpha_l <= 1.0) {
        return param(format!("alpha * L must lie in (0, 1], got {alpha_l}"));
    }
    let exact = named_gradient_hmatrix_exact(kind, big_n)?;
    HMatrix::from_lower_rows(&rows_to_f64(&exact, alpha_l), Convention::Gradient { alpha_l })
}

/// Structured dump of an H-matrix, with exact rational strings when known.
#[derive(Debug, Clone, Serialize)]
pub struct HMatrixDump {
    pub name: String,
    pub size: usize,
    #[serde(flatten)]
    pub convention: Convention,
    pub entries: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<Vec<Vec<String>>>,
}

impl HMatrixDump {
    pub fn new(name: &str, h: &HMatrix, exact: Option<&[Vec<Rational>]>) -> Self {
        Self {
            name: name.to_string(),
            size: h.size(),
            convention: h.convention,
            entries: h.lower_rows(),
            exact: exact.map(|rows| rows.iter().map(|row| row.iter().map(|q| q.to_string()).collect()).collect()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump is always serializable")
    }
}

/// Runs `y_{k+1} = y_k - sum_{j<=k} h_{k+1,j+1} (y_j - T y_j)` for all rows of `H`,
/// returning `y_0, ..., y_n` with their squared residuals.
pub fn run_fp_hmatrix(h: &HMatrix, t: &NonexpansiveMap, y0: &[f64]) -> Result<Trace> {
    if h.convention != Convention::FixedPoint {
        return param("run_fp_hmatrix needs a fixed-point H-matrix");
    }
    if y0.len() != t.dim {
        return param(format!("initial point has dimension {}, operator {}", y0.len(), t.dim));
    }
    let n = h.size();
    let mut trace = Trace::new("hmatrix");
    let mut ys: Vec<DenseVector> = vec![y0.to_vec()];
    let mut residuals: Vec<DenseVector> = Vec::with_capacity(n + 1);
    for k in 0..n {
        let r = sub(&ys[k], &t.apply(&ys[k]));
        trace.evals += 1;
        trace.push_metric(RESIDUAL_SQ, norm_sq(&r));
        residuals.push(r);
        let mut next = ys[k].clone();
        for (j, rj) in residuals.iter().enumerate() {
            let c = h.get(k, j);
            if c != 0.0 {
                axpy(&mut next, -c, rj);
            }
        }
        ys.push(next);
    }
    let r = sub(&ys[n], &t.apply(&ys[n]));
    trace.monitor_evals += 1;
    trace.push_metric(RESIDUAL_SQ, norm_sq(&r));
    trace.iterates = ys;
    Ok(trace)
}

/// Runs the half-index gradient iteration of a `2N x 2N` H-matrix, returning
/// integer iterates `x_0..x_N` and half iterates `x_{1/2}..x_{N-1/2}`.
pub fn run_grad_hmatrix(h: &HMatrix, p: &SaddleProblem, x0: &[f64], lipschitz: f64) -> Result<Trace> {
    if !matches!(h.convention, Convention::Gradient { .. }) {
        return param("run_grad_hmatrix needs a gradient H-matrix");
    }
    if !h.size().is_multiple_of(2) {
        return param("gradient H-matrix must have even size");
    }
    if !(lipschitz > 0.0) {
        return param("Lipschitz constant must be positive");
    }
    if x0.len() != p.dim() {
        return param("initial point dimension mismatch");
    }
    let size = h.size();
    let mut trace = Trace::new("hmatrix");
    let mut points: Vec<DenseVector> = vec![x0.to_vec()];
    let mut grads: Vec<DenseVector> = Vec::with_capacity(size);
    for l in 0..size {
        let g = p.saddle_grad(&points[l]);
        trace.evals += 1;
        if l % 2 == 0 {
            trace.push_metric(GRAD_NORM_SQ, norm_sq(&g));
        }
        grads.push(g);
        let mut next = points[l].clone();
        for (i, gi) in grads.iter().enumerate() {
            let c = h.get(l, i);
            if c != 0.0 {
                axpy(&mut next, -c / lipschitz, gi);
            }
        }
        points.push(next);
    }
    let g = p.saddle_grad(&points[size]);
    trace.monitor_evals += 1;
    trace.push_metric(GRAD_NORM_SQ, norm_sq(&g));
    let (ints, halves): (Vec<_>, Vec<_>) = points.into_iter().enumerate().partition(|(i, _)| i % 2 == 0);
    trace.iterates = ints.into_iter().map(|(_, v)| v).collect();
    trace.half_iterates = Some(halves.into_iter().map(|(_, v)| v).collect());
    Ok(trace)
}
