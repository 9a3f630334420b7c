//! H-duality of Lyapunov proofs: primal and dual proof-structure quadratic
//! forms, the correspondence `F` between their arguments, and numerical
//! certification that a proof for `H` dualizes to one for its anti-transpose.

use crate::error::{param, Result};
use crate::hmatrix::{anti_transpose, Convention, HMatrix};
use crate::numerics::{combine, dot, min_eigen_sym, norm_sq, sub, DenseMatrix, DenseVector};
use crate::rng::{gaussian_vector, prng, uniform, Prng};

/// Relative slack for PSD decisions: `lambda_min >= -PSD_TOL * (1 + ||S||)`.
pub const PSD_TOL: f64 = 1e-9;

/// A quadratic form `g^T S g` over scalar arguments `g_1..g_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    pub s: DenseMatrix,
}

impl QuadForm {
    pub fn size(&self) -> usize {
        self.s.rows()
    }

    pub fn min_eigen(&self) -> Result<f64> {
        min_eigen_sym(&self.s)
    }

    pub fn is_psd(&self) -> Result<bool> {
        Ok(self.min_eigen()? >= -PSD_TOL * (1.0 + self.s.max_abs()))
    }

    pub fn eval(&self, g: &[f64]) -> f64 {
        dot(g, &self.s.matvec(g))
    }
}

/// Lyapunov proof weights (`u_1..u_{N-1}` primal or `v_1..v_{N-1}` dual) and `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofWeights {
    pub weights: Vec<f64>,
    pub tau: f64,
}

impl ProofWeights {
    pub fn new(weights: Vec<f64>, tau: f64) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return param("proof weights must be positive and finite");
        }
        if !tau.is_finite() {
            return param("tau must be finite");
        }
        Ok(Self { weights, tau })
    }

    /// Horizon `N` (one more than the number of weights).
    pub fn horizon(&self) -> usize {
        self.weights.len() + 1
    }

    /// 1-based weight.
    pub fn w(&self, j: usize) -> f64 {
        self.weights[j - 1]
    }

    /// OHM primal proof: `u_j = j(j+1)/N`, `tau = N`.
    pub fn ohm(n: usize) -> Self {
        let nf = n as f64;
        Self { weights: (1..n).map(|j| (j * (j + 1)) as f64 / nf).collect(), tau: nf }
    }

    /// Dual-OHM dual proof: `v_j = N/((N-j)(N-j+1))`, `tau = N`.
    pub fn dual_ohm(n: usize) -> Self {
        let nf = n as f64;
        Self { weights: (1..n).map(|j| nf / ((n - j) * (n - j + 1)) as f64).collect(), tau: nf }
    }
}

/// `v_j = 1 / u_{N-j}`, keeping `tau`.
pub fn dualize_weights(u: &ProofWeights) -> ProofWeights {
    ProofWeights { weights: u.weights.iter().rev().map(|w| 1.0 / w).collect(), tau: u.tau }
}

fn check_sizes(h: &HMatrix, w: &ProofWeights, g_len: usize) -> Result<()> {
    if h.convention != Convention::FixedPoint {
        return param("duality forms need a fixed-point H-matrix");
    }
    if h.size() + 1 != w.horizon() || g_len != w.horizon() {
        return param(format!(
            "size mismatch: H is {0}x{0}, {1} weights, {2} arguments",
            h.size(),
            w.weights.len(),
            g_len
        ));
    }
    Ok(())
}

/// Points `x_1..x_N` generated by `H` from `g_1..g_N` with `y_0 = 0`:
/// `x_k = y_{k-1} - g_k`, `y_k = y_{k-1} - sum_j 2 h_{k,j} g_j`.
fn x_points(h: &HMatrix, g: &[DenseVector]) -> Vec<DenseVector> {
    let n = g.len();
    let d = g[0].len();
    let mut y = vec![0.0; d];
    let mut xs = Vec::with_capacity(n);
    for k in 0..n {
        xs.push(sub(&y, &g[k]));
        if k + 1 < n {
            for j in 0..=k {
                let c = h.get(k, j);
                if c != 0.0 {
                    crate::numerics::axpy(&mut y, -2.0 * c, &g[j]);
                }
            }
        }
    }
    xs
}

/// Primal proof expression `U_N - tau ||g_N||^2 - <g_N, x_N - y_0>` with
/// `U_1 = 0`, `U_{j+1} = U_j - u_j <x_{j+1} - x_j, g_{j+1} - g_j>`.
pub fn s_value(h: &HMatrix, u: &ProofWeights, g: &[DenseVector]) -> Result<f64> {
    check_sizes(h, u, g.len())?;
    let n = g.len();
    let xs = x_points(h, g);
    let mut val = 0.0;
    for j in 1..n {
        val -= u.w(j) * dot(&sub(&xs[j], &xs[j - 1]), &sub(&g[j], &g[j - 1]));
    }
    Ok(val - u.tau * norm_sq(&g[n - 1]) - dot(&g[n - 1], &xs[n - 1]))
}

/// Dual proof expression `-V_0 - tau ||g_N||^2 - <g_N, x_N - y_0>` with
/// `V_{N-1} = 0`, `V_j = V_{j+1} + v_{j+1} <x_N - x_{j+1}, g_N - g_{j+1}>`.
pub fn t_value(ha: &HMatrix, v: &ProofWeights, g: &[DenseVector]) -> Result<f64> {
    check_sizes(ha, v, g.len())?;
    let n = g.len();
    let xs = x_points(ha, g);
    let (x_n, g_n) = (&xs[n - 1], &g[n - 1]);
    let v0: f64 = (1..n).map(|i| v.w(i) * dot(&sub(x_n, &xs[i - 1]), &sub(g_n, &g[i - 1]))).sum();
    Ok(-v0 - v.tau * norm_sq(g_n) - dot(g_n, x_n))
}

fn probe<F: Fn(&[DenseVector]) -> Result<f64>>(n: usize, f: F) -> Result<QuadForm> {
    let e = |ks: &[usize]| {
        let g: Vec<DenseVector> = (0..n).map(|i| vec![if ks.contains(&i) { 1.0 } else { 0.0 }]).collect();
        f(&g)
    };
    let diag: Vec<f64> = (0..n).map(|i| e(&[i])).collect::<Result<_>>()?;
    let mut s = DenseMatrix::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = diag[i];
        for j in 0..i {
            let c = (e(&[i, j])? - diag[i] - diag[j]) / 2.0;
            s[(i, j)] = c;
            s[(j, i)] = c;
        }
    }
    Ok(QuadForm { s })
}

/// Coefficient matrix of the primal proof expression, recovered by indicator probes.
pub fn s_form(h: &HMatrix, u: &ProofWeights) -> Result<QuadForm> {
    probe(u.horizon(), |g| s_value(h, u, g))
}

/// Coefficient matrix of the dual proof expression, recovered by indicator probes.
pub fn t_form(ha: &HMatrix, v: &ProofWeights) -> Result<QuadForm> {
    probe(v.horizon(), |g| t_value(ha, v, g))
}

/// `F(g)_k = u_{N-k} (g_{N-k+1} - g_{N-k}) + g_N` for `k < N`, `F(g)_N = g_N`.
pub fn f_map(u: &ProofWeights, g: &[DenseVector]) -> Result<Vec<DenseVector>> {
    let n = u.horizon();
    if g.len() != n {
        return param(format!("F needs {n} arguments, got {}", g.len()));
    }
    let gg = |k: usize| &g[k - 1];
    let mut out: Vec<DenseVector> =
        (1..n).map(|k| combine(&[(u.w(n - k), gg(n - k + 1)), (-u.w(n - k), gg(n - k)), (1.0, gg(n))])).collect();
    out.push(gg(n).clone());
    Ok(out)
}

/// Inverse of [`f_map`]: `g_N = w_N`, `g_m = g_{m+1} - (w_{N-m} - w_N) / u_m`.
pub fn f_inverse(u: &ProofWeights, w: &[DenseVector]) -> Result<Vec<DenseVector>> {
    let n = u.horizon();
    if w.len() != n {
        return param(format!("F inverse needs {n} arguments, got {}", w.len()));
    }
    let mut g = vec![Vec::new(); n];
    g[n - 1] = w[n - 1].clone();
    for m in (1..n).rev() {
        g[m - 1] = combine(&[(1.0, &g[m]), (-1.0 / u.w(m), &w[n - m - 1]), (1.0 / u.w(m), &w[n - 1])]);
    }
    Ok(g)
}

/// Outcome of a numerical duality check.
#[derive(Debug, Clone)]
pub struct DualityReport {
    /// `max |S(g) - T(F(g))|` over random `g`.
    pub max_discrepancy: f64,
    pub min_eig_s: f64,
    pub min_eig_t: f64,
    /// Whether the two forms are both PSD or both not.
    pub psd_agree: bool,
}

/// Compares the primal form of `(H, u)` with the dual form of `(H^A, dualize(u))`.
pub fn verify_duality(h: &HMatrix, u: &ProofWeights, trials: usize, seed: u64) -> Result<DualityReport> {
    verify_duality_with(h, u, trials, &mut prng(seed), 3)
}

pub fn verify_duality_with(
    h: &HMatrix,
    u: &ProofWeights,
    trials: usize,
    rng: &mut Prng,
    dim: usize,
) -> Result<DualityReport> {
    if trials == 0 {
        return param("at least one trial is required");
    }
    let n = u.horizon();
    let ha = anti_transpose(h);
    let v = dualize_weights(u);
    let mut max_discrepancy: f64 = 0.0;
    for _ in 0..trials {
        let g: Vec<DenseVector> = (0..n).map(|_| gaussian_vector(rng, dim)).collect();
        let lhs = s_value(h, u, &g)?;
        let rhs = t_value(&ha, &v, &f_map(u, &g)?)?;
        max_discrepancy = max_discrepancy.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    let s = s_form(h, u)?;
    let t = t_form(&ha, &v)?;
    Ok(DualityReport {
        max_discrepancy,
        min_eig_s: s.min_eigen()?,
        min_eig_t: t.min_eigen()?,
        psd_agree: s.is_psd()? == t.is_psd()?,
    })
}

/// A random lower-triangular fixed-point H-matrix of size `n` with entries in `[-1, 1]`.
pub fn random_hmatrix(rng: &mut Prng, n: usize) -> Result<HMatrix> {
    let mut h = HMatrix::zeros(n, Convention::FixedPoint)?;
    for k in 0..n {
        for j in 0..=k {
            h.set(k, j, uniform(rng, -1.0, 1.0));
        }
    }
    Ok(h)
}

/// Random positive weights in `[lo, hi)` with a random `tau` in `[0, 2N)`.
pub fn random_weights(rng: &mut Prng, n: usize, lo: f64, hi: f64) -> ProofWeights {
    let weights = (1..n).map(|_| uniform(rng, lo, hi)).collect();
    ProofWeights { weights, tau: uniform(rng, 0.0, 2.0 * n as f64) }
}
