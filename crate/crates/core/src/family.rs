//! The family of exact optimal fixed-point methods between OHM and Dual-OHM:
//! diagonal products `p`, multipliers `lambda`, H-matrix synthesis by column
//! solves, and certification of the defining identity.

use crate::error::{param, Error, Result};
use crate::fixedpoint::composed_hmatrix;
use crate::hmatrix::{Convention, HMatrix};
use crate::numerics::{min_eigen_sym, DenseMatrix, Lu};

/// Largest horizon accepted by [`synthesize`].
pub const MAX_SYNTH_N: usize = 200;

/// Margin by which interior points must clear each boundary constraint.
pub const INTERIOR_MARGIN: f64 = 1e-12;

/// Diagonal products `p_k = prod_{l >= k} h_{l,l}` for `k = 1..N-1`, stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct PVector {
    n: usize,
    p: Vec<f64>,
}

/// Named points of the family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedP {
    Ohm,
    DualOhm,
    /// `gamma * p(OHM) + (1 - gamma) * p(Dual-OHM)`.
    Interpolate(f64),
}

impl PVector {
    pub fn new(n: usize, p: Vec<f64>) -> Result<Self> {
        if n < 3 {
            return param(format!("the family needs N >= 3, got {n}"));
        }
        if p.len() != n - 1 {
            return param(format!("expected {} entries p_1..p_(N-1), got {}", n - 1, p.len()));
        }
        if (p[0] - 1.0 / n as f64).abs() > 1e-12 {
            return param(format!("p_1 must equal 1/N = {}, got {}", 1.0 / n as f64, p[0]));
        }
        if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return param("entries of p must be positive and finite");
        }
        Ok(Self { n, p })
    }

    /// Diagonal products of an H-matrix of size `N-1`.
    pub fn from_hmatrix(h: &HMatrix) -> Result<Self> {
        let m = h.size();
        let mut p = vec![0.0; m];
        let mut acc = 1.0;
        for k in (0..m).rev() {
            acc *= h.get(k, k);
            p[k] = acc;
        }
        Self::new(m + 1, p)
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    /// `p_k` for `k = 1..N`, with `p_N = 1`.
    pub fn get(&self, k: usize) -> f64 {
        if k == self.n {
            1.0
        } else {
            self.p[k - 1]
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Strict interior membership of the valid parameter set.
    pub fn is_interior(&self) -> bool {
        let n = self.n;
        let nf = n as f64;
        let lower = (2..n).all(|k| self.get(k) > 1.0 / (nf - k as f64 + 1.0) + INTERIOR_MARGIN);
        let upper = (1..n - 1).all(|k| {
            let r = nf - k as f64;
            self.get(k) > (r / (r - 1.0)) * self.get(k + 1) - 1.0 / (r - 1.0) + INTERIOR_MARGIN
        });
        lower && upper
    }
}

pub fn named_pvector(kind: NamedP, n: usize) -> Result<PVector> {
    if n < 3 {
        return param(format!("the family needs N >= 3, got {n}"));
    }
    let nf = n as f64;
    let ohm = |k: usize| k as f64 / nf;
    let dual = |k: usize| 1.0 / (nf - k as f64 + 1.0);
    let p = match kind {
        NamedP::Ohm => (1..n).map(ohm).collect(),
        NamedP::DualOhm => (1..n).map(dual).collect(),
        NamedP::Interpolate(g) => {
            if !(g > 0.0 && g < 1.0) {
                return param(format!("interpolation weight must lie in (0, 1), got {g}"));
            }
            (1..n).map(|k| g * ohm(k) + (1.0 - g) * dual(k)).collect()
        }
    };
    PVector::new(n, p)
}

/// Multipliers of the proof: `sub[k-1] = lambda_{k+1,k}` for `k = 1..N-2` and
/// `last[k-1] = lambda_{N,k}` for `k = 1..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambdas {
    pub n: usize,
    pub sub: Vec<f64>,
    pub last: Vec<f64>,
}

impl Lambdas {
    /// `lambda_{i,j}` for a pair of the index set, zero elsewhere.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == self.n && (1..self.n).contains(&j) {
            self.last[j - 1]
        } else if i == j + 1 && (1..self.n - 1).contains(&j) {
            self.sub[j - 1]
        } else {
            0.0
        }
    }

    pub fn min(&self) -> f64 {
        self.sub.iter().chain(&self.last).copied().fold(f64::INFINITY, f64::min)
    }
}

/// Certificate of the family identity for a given `(H, p)`.
#[derive(Debug, Clone)]
pub struct FamilyCertificate {
    pub lambdas: Lambdas,
    /// `q_k` for `k = 1..N-1`.
    pub q: Vec<f64>,
    /// `sum_k lambda_{N,k} - (N-1)`.
    pub telescoping_gap: f64,
    /// Largest coefficient of the closed-form expansion.
    pub max_residual: f64,
    /// Largest coefficient recovered by probing the scalar identity.
    pub probe_residual: f64,
    /// Largest violation of the column-sum closure `sum_i 2 h_{i,k} = q_k`.
    pub closure_residual: f64,
    /// Smallest eigenvalue of the probed coefficient matrix.
    pub psd_margin: f64,
}

impl FamilyCertificate {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.probe_residual <= tol
    }
}

/// Multipliers and `q_k` for a valid `p`.
pub fn lambdas_and_q(p: &PVector) -> Result<(Lambdas, Vec<f64>, f64)> {
    let n = p.n;
    let nf = n as f64;
    let sub = (1..n - 1)
        .map(|k| {
            let r = nf - k as f64;
            let pk1 = p.get(k + 1);
            (nf / (r - 1.0)) * pk1 * (r * pk1 - 1.0)
        })
        .collect();
    let mut last: Vec<f64> = (1..n - 1)
        .map(|k| {
            let r = nf - k as f64;
            nf / (r * (r - 1.0)) - (nf / (r - 1.0)) * p.get(k + 1) + (nf / r) * p.get(k)
        })
        .collect();
    last.push(nf * p.get(n - 1));
    let q = (1..n).map(|k| 1.0 - (nf - k as f64) * p.get(k + 1) + (nf - k as f64 + 1.0) * p.get(k)).collect();
    let gap = last.iter().sum::<f64>() - (nf - 1.0);
    if gap.abs() > 1e-10 * nf {
        return Err(Error::Parameter(format!("multipliers fail to telescope: gap {gap:e}")));
    }
    Ok((Lambdas { n, sub, last }, q, gap))
}

/// 1-based accessor into a fixed-point H-matrix of size `N-1`.
fn h1(h: &HMatrix, i: usize, j: usize) -> f64 {
    h.get(i - 1, j - 1)
}

fn col_tail(h: &HMatrix, from: usize, to: usize, col: usize) -> f64 {
    (from..=to).map(|i| h1(h, i, col)).sum()
}

/// The closed-form coefficients `s_{l,k}` (1-based, `l >= k`) of the family identity.
pub fn closed_form_coefficients(h: &HMatrix, lam: &Lambdas) -> Vec<Vec<f64>> {
    let n = lam.n;
    let nf = n as f64;
    let l = |i: usize, j: usize| lam.get(i, j);
    let mut s = vec![vec![0.0; n + 1]; n + 1];
    let hl = h1(h, n - 1, n - 1);
    s[n][n] = nf - 1.0 - lam.last.iter().sum::<f64>();
    s[n - 1][n - 1] = -l(n - 1, n - 2) + l(n, n - 1) * (2.0 * hl - 1.0);
    s[n][n - 1] = -2.0 * hl - (1..n - 1).map(|k| 2.0 * l(n, k) * hl).sum::<f64>() - 2.0 * l(n, n - 1) * (hl - 1.0);
    for k in 1..n - 1 {
        let hkk = h1(h, k, k);
        let prev = if k > 1 { l(k, k - 1) } else { 0.0 };
        s[k][k] = l(k + 1, k) * (2.0 * hkk - 1.0) - prev + l(n, k) * (2.0 * col_tail(h, k, n - 1, k) - 1.0);
        if k < n - 2 {
            s[k + 1][k] = 2.0 * l(k + 1, k) * (1.0 - hkk)
                + 2.0 * l(k + 2, k + 1) * h1(h, k + 1, k)
                + 2.0 * l(n, k) * col_tail(h, k + 1, n - 1, k + 1)
                + 2.0 * l(n, k + 1) * col_tail(h, k + 1, n - 1, k);
            for ll in k + 2..n - 1 {
                s[ll][k] = -2.0 * l(ll, ll - 1) * h1(h, ll - 1, k)
                    + 2.0 * l(ll + 1, ll) * h1(h, ll, k)
                    + 2.0 * l(n, k) * col_tail(h, ll, n - 1, ll)
                    + 2.0 * l(n, ll) * col_tail(h, ll, n - 1, k);
            }
            s[n - 1][k] =
                2.0 * l(n, k) * hl - 2.0 * l(n - 1, n - 2) * h1(h, n - 2, k) + 2.0 * l(n, n - 1) * h1(h, n - 1, k);
        }
        let mut acc = 0.0;
        let mut lam_prefix = 0.0;
        for j in 1..k {
            lam_prefix += l(n, j);
        }
        for ll in k..n {
            lam_prefix += l(n, ll);
            acc += (1.0 + lam_prefix) * 2.0 * h1(h, ll, k);
        }
        s[n][k] = 2.0 * l(n, k) - acc;
    }
    let k = n - 2;
    s[n - 1][k] = 2.0 * l(n - 1, k) * (1.0 - h1(h, k, k)) + 2.0 * l(n, n - 1) * h1(h, n - 1, k) + 2.0 * l(n, k) * hl;
    s
}

/// The scalar identity `<g_N, x_N - y_0> + N g_N^2 + sum lambda_ij (g_i - g_j)(x_i - x_j)`
/// on one-dimensional `g_1..g_N`, with `y_0 = 0`.
pub fn family_identity(h: &HMatrix, lam: &Lambdas, g: &[f64]) -> f64 {
    let n = lam.n;
    assert_eq!(g.len(), n, "need g_1..g_N");
    let gg = |k: usize| g[k - 1];
    let mut x = vec![0.0; n + 1];
    let mut y = 0.0;
    for k in 1..n {
        x[k] = y - gg(k);
        y -= (1..=k).map(|j| 2.0 * h1(h, k, j) * gg(j)).sum::<f64>();
    }
    x[n] = y - gg(n);
    let mut q = gg(n) * x[n] + n as f64 * gg(n) * gg(n);
    for k in 1..n - 1 {
        q += lam.get(k + 1, k) * (gg(k + 1) - gg(k)) * (x[k + 1] - x[k]);
    }
    for k in 1..n {
        q += lam.get(n, k) * (gg(n) - gg(k)) * (x[n] - x[k]);
    }
    q
}

/// Coefficients of [`family_identity`] recovered by indicator probes; entry `(l, k)`
/// with `l >= k` is the full coefficient of `g_l g_k` (1-based).
pub fn probed_coefficients(h: &HMatrix, lam: &Lambdas) -> Vec<Vec<f64>> {
    let n = lam.n;
    let e = |ks: &[usize]| {
        let mut g = vec![0.0; n];
        for &k in ks {
            g[k - 1] = 1.0;
        }
        family_identity(h, lam, &g)
    };
    let diag: Vec<f64> = (1..=n).map(|k| e(&[k])).collect();
    let mut s = vec![vec![0.0; n + 1]; n + 1];
    for l in 1..=n {
        s[l][l] = diag[l - 1];
        for k in 1..l {
            s[l][k] = e(&[l, k]) - diag[l - 1] - diag[k - 1];
        }
    }
    s
}

fn max_abs_lower(s: &[Vec<f64>]) -> f64 {
    s.iter().enumerate().flat_map(|(l, row)| row.iter().take(l + 1)).fold(0.0, |m, v| m.max(v.abs()))
}

/// Evaluates every coefficient of the family identity for `(H, p)`.
pub fn certify(h: &HMatrix, p: &PVector) -> Result<FamilyCertificate> {
    let n = p.n;
    if h.size() != n - 1 || h.convention != Convention::FixedPoint {
        return param(format!("expected a fixed-point H-matrix of size {}", n - 1));
    }
    let (lambdas, q, telescoping_gap) = lambdas_and_q(p)?;
    let closed = closed_form_coefficients(h, &lambdas);
    let probed = probed_coefficients(h, &lambdas);
    let closure_residual = (1..n)
        .map(|k| (2.0 * col_tail(h, k, n - 1, k) - q[k - 1]).abs())
        .fold(0.0, f64::max);
    let mut sym = DenseMatrix::zeros(n, n);
    for l in 1..=n {
        sym[(l - 1, l - 1)] = probed[l][l];
        for k in 1..l {
            sym[(l - 1, k - 1)] = probed[l][k] / 2.0;
            sym[(k - 1, l - 1)] = probed[l][k] / 2.0;
        }
    }
    Ok(FamilyCertificate {
        max_residual: max_abs_lower(&closed),
        probe_residual: max_abs_lower(&probed),
        closure_residual,
        psd_margin: min_eigen_sym(&sym)?,
        lambdas,
        q,
        telescoping_gap,
    })
}

/// Synthesizes the H-matrix of the family member with diagonal products `p`.
/// Column `k` is found from `s_{l,k} = 0`, `l = k+1..N-1`, working from the last column back.
pub fn synthesize(p: &PVector) -> Result<HMatrix> {
    let n = p.n;
    if n > MAX_SYNTH_N {
        return param(format!("synthesis is capped at N = {MAX_SYNTH_N}"));
    }
    let (lam, _, _) = lambdas_and_q(p)?;
    let l = |i: usize, j: usize| lam.get(i, j);
    let mut h = HMatrix::zeros(n - 1, Convention::FixedPoint)?;
    for k in 1..n - 1 {
        h.set(k - 1, k - 1, p.get(k) / p.get(k + 1));
    }
    h.set(n - 2, n - 2, p.get(n - 1));
    for k in (1..n - 1).rev() {
        let m = n - 1 - k;
        let mut b = DenseMatrix::zeros(m, m);
        let mut rhs = vec![0.0; m];
        for r in 0..m {
            let ll = k + 1 + r;
            if r == 0 {
                rhs[r] -= 2.0 * l(k + 1, k) * (1.0 - h1(&h, k, k));
            } else {
                b[(r, r - 1)] -= 2.0 * l(ll, ll - 1);
            }
            b[(r, r)] += 2.0 * l(ll + 1, ll);
            if ll <= n - 2 {
                for c in r..m {
                    b[(r, c)] += 2.0 * l(n, ll);
                }
            }
            rhs[r] -= 2.0 * l(n, k) * col_tail(&h, ll, n - 1, ll);
        }
        let lu = Lu::new(&b).map_err(|e| Error::SynthesisFailure { column: k, reason: e.to_string() })?;
        let sol = lu.solve(&rhs);
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(Error::SynthesisFailure { column: k, reason: "non-finite solution".into() });
        }
        for (c, v) in sol.into_iter().enumerate() {
            h.set(k + c, k - 1, v);
        }
    }
    Ok(h)
}

/// Limit of the synthesized matrices as `p` approaches a named boundary point, estimated
/// by Richardson extrapolation from interpolation offsets `gamma`, `2 gamma`, `4 gamma`.
pub fn boundary_limit(boundary: NamedP, n: usize, gamma: f64) -> Result<HMatrix> {
    if !(gamma > 0.0 && 4.0 * gamma < 1.0) {
        return param(format!("offset must lie in (0, 1/4), got {gamma}"));
    }
    let weight = |t: f64| match boundary {
        NamedP::Ohm => Ok(1.0 - t),
        NamedP::DualOhm => Ok(t),
        NamedP::Interpolate(_) => param("boundary limits exist only at OHM and Dual-OHM"),
    };
    let h = |t: f64| -> Result<HMatrix> { synthesize(&named_pvector(NamedP::Interpolate(weight(t)?), n)?) };
    let (h1, h2, h4) = (h(gamma)?, h(2.0 * gamma)?, h(4.0 * gamma)?);
    let mut out = HMatrix::zeros(n - 1, Convention::FixedPoint)?;
    for k in 0..n - 1 {
        for j in 0..=k {
            out.set(k, j, (8.0 * h1.get(k, j) - 6.0 * h2.get(k, j) + h4.get(k, j)) / 3.0);
        }
    }
    Ok(out)
}

/// For the composed method with `N' = N-1`, returns `2 (h_{N-1,N-2} + h_{N-2,N-2})` and
/// `q_{N-2}` of its own diagonal products; family members have the two equal.
pub fn composed_negative_control(n: usize) -> Result<(f64, f64)> {
    if n < 4 {
        return param("negative control needs N >= 4");
    }
    let h = composed_hmatrix(n, n - 1)?;
    let p = PVector::from_hmatrix(&h)?;
    let lhs = 2.0 * (h1(&h, n - 1, n - 2) + h1(&h, n - 2, n - 2));
    let q = 1.0 - 2.0 * p.get(n - 1) + 3.0 * p.get(n - 2);
    Ok((lhs, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmatrix::{named_hmatrix, FixedPointKind};

    #[test]
    fn named_pvector_examples() {
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(named_pvector(NamedP::Ohm, 4).unwrap().as_slice(), &[0.25, 0.5, 0.75]));
        assert!(close(named_pvector(NamedP::DualOhm, 4).unwrap().as_slice(), &[0.25, 1.0 / 3.0, 0.5]));
        assert!(close(named_pvector(NamedP::Interpolate(0.5), 4).unwrap().as_slice(), &[0.25, 5.0 / 12.0, 0.625]));
        assert!(named_pvector(NamedP::Interpolate(0.5), 4).unwrap().is_interior());
        assert!(!named_pvector(NamedP::Ohm, 4).unwrap().is_interior());
        assert!(named_pvector(NamedP::Interpolate(1.0), 4).is_err());
        assert!(PVector::new(4, vec![0.3, 0.5, 0.7]).is_err());
    }

    #[test]
    fn lambda_examples() {
        let (l, _, _) = lambdas_and_q(&named_pvector(NamedP::DualOhm, 3).unwrap()).unwrap();
        assert!((l.get(3, 2) - 1.5).abs() < 1e-15 && l.get(2, 1).abs() < 1e-15);
        let (l, _, _) = lambdas_and_q(&named_pvector(NamedP::Ohm, 3).unwrap()).unwrap();
        assert!((l.get(2, 1) - 2.0 / 3.0).abs() < 1e-15 && l.get(3, 1).abs() < 1e-15);
        let (l, _, gap) = lambdas_and_q(&named_pvector(NamedP::Interpolate(0.3), 5).unwrap()).unwrap();
        assert!(gap.abs() < 1e-10 && (l.last.iter().sum::<f64>() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn closed_form_matches_probes_for_any_h() {
        let p = named_pvector(NamedP::Interpolate(0.4), 7).unwrap();
        let (lam, _, _) = lambdas_and_q(&p).unwrap();
        let mut rng = crate::rng::prng(3);
        let mut h = HMatrix::zeros(6, Convention::FixedPoint).unwrap();
        for k in 0..6 {
            for j in 0..=k {
                h.set(k, j, crate::rng::uniform(&mut rng, -1.0, 1.0));
            }
        }
        let c = closed_form_coefficients(&h, &lam);
        let s = probed_coefficients(&h, &lam);
        for l in 1..=7 {
            for k in 1..=l {
                assert!((c[l][k] - s[l][k]).abs() < 1e-12, "({l},{k}): {} vs {}", c[l][k], s[l][k]);
            }
        }
    }

    #[test]
    fn three_step_closed_form() {
        let p = PVector::new(3, vec![1.0 / 3.0, 0.6]).unwrap();
        let h = synthesize(&p).unwrap();
        assert!((h.get(0, 0) - 1.0 / 1.8).abs() < 1e-12);
        assert!((h.get(1, 0) - (1.0 - 1.0 / 1.8 - 0.6)).abs() < 1e-12);
        assert!((h.get(0, 0) * h.get(1, 1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_points_reproduce_named_methods() {
        for n in 3..=12 {
            let ohm = synthesize(&named_pvector(NamedP::Ohm, n).unwrap()).unwrap();
            assert!(ohm.max_abs_diff(&named_hmatrix(FixedPointKind::Ohm, n).unwrap()) < 1e-10);
            let dual = synthesize(&named_pvector(NamedP::DualOhm, n).unwrap()).unwrap();
            assert!(dual.max_abs_diff(&named_hmatrix(FixedPointKind::DualOhm, n).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn certificate_examples() {
        let n = 8;
        let p = named_pvector(NamedP::Ohm, n).unwrap();
        let mut h = named_hmatrix(FixedPointKind::Ohm, n).unwrap();
        let c = certify(&h, &p).unwrap();
        assert!(c.max_residual <= 1e-10 && c.probe_residual <= 1e-10);
        let p = named_pvector(NamedP::Interpolate(0.3), n).unwrap();
        let c = certify(&synthesize(&p).unwrap(), &p).unwrap();
        assert!(c.passes(1e-9) && c.closure_residual < 1e-9 && c.lambdas.min() > 0.0);
        h.set(1, 0, h.get(1, 0) + 0.01);
        let c = certify(&h, &named_pvector(NamedP::Ohm, n).unwrap()).unwrap();
        assert!(c.max_residual > 1e-4);
    }

    #[test]
    fn offsets_extrapolate_to_named_methods() {
        for n in [3, 6, 15] {
            let d = boundary_limit(NamedP::DualOhm, n, 1e-3).unwrap();
            assert!(d.max_abs_diff(&named_hmatrix(FixedPointKind::DualOhm, n).unwrap()) < 1e-6);
            let o = boundary_limit(NamedP::Ohm, n, 1e-3).unwrap();
            assert!(o.max_abs_diff(&named_hmatrix(FixedPointKind::Ohm, n).unwrap()) < 1e-6);
        }
    }

    #[test]
    fn negative_control() {
        for n in 4..=12 {
            let (lhs, q) = composed_negative_control(n).unwrap();
            let nf = n as f64;
            assert!((lhs - (nf - 1.0) / nf).abs() < 1e-12);
            assert!((q - (nf + 1.0) / (2.0 * nf)).abs() < 1e-12);
        }
    }
}
