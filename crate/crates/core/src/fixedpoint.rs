//! Anchored fixed-point methods in their equivalent forms, the composed
//! method, and their discrete Lyapunov series.

use crate::error::{param, Error, Result};
use crate::hmatrix::{named_hmatrix, run_fp_hmatrix, Convention, FixedPointKind, HMatrix};
use crate::numerics::{axpy, combine, dist, dot, norm, norm_sq, sub, DenseVector};
use crate::operators::{MonotoneMap, NonexpansiveMap};
use crate::trace::{max_sequence_gap, Trace, RESIDUAL_SQ};

/// Absolute agreement required between algebraically identical forms, per unit of `1 + ||y0||`.
pub const FORM_TOL: f64 = 1e-10;

/// Which Lyapunov function a [`LyapunovSeries`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LyapunovKind {
    UOhm,
    VDualOhm,
    VDualFeg,
    VContinuous,
}

/// Values of a Lyapunov function along a trajectory.
#[derive(Debug, Clone)]
pub struct LyapunovSeries {
    pub kind: LyapunovKind,
    pub values: Vec<f64>,
    /// Predicted decrements `V_k - V_{k+1}` from the monotonicity terms.
    pub expected_decrements: Vec<f64>,
    /// Largest mismatch between observed and predicted decrements.
    pub identity_gap: f64,
    /// Monotonicity terms of the decomposition, when it has two parts.
    pub mi: Vec<f64>,
    /// Lipschitz terms of the decomposition, when it has two parts.
    pub li: Vec<f64>,
}

impl LyapunovSeries {
    /// Largest increase `V_{k+1} - V_k` (non-positive for a nonincreasing series).
    pub fn max_increase(&self) -> f64 {
        self.values.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.values.len() < 2 || self.max_increase() <= tol
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("series is never empty")
    }
}

/// Named fixed-point method identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointMethod {
    Ohm,
    DualOhm,
    Appm,
    DualOhmProx,
    Composed,
}

impl FixedPointMethod {
    pub fn id(self) -> &'static str {
        match self {
            Self::Ohm => "ohm",
            Self::DualOhm => "dual-ohm",
            Self::Appm => "appm",
            Self::DualOhmProx => "dual-ohm-prox",
            Self::Composed => "composed",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        [Self::Ohm, Self::DualOhm, Self::Appm, Self::DualOhmProx, Self::Composed].into_iter().find(|m| m.id() == s)
    }
}

/// The equivalent forms of the two anchored methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointForm {
    /// OHM anchoring update or the Dual-OHM `z` recursion.
    Canonical,
    Momentum,
    HMatrix,
    Proximal,
}

fn check_dims(t: &NonexpansiveMap, y0: &[f64]) -> Result<()> {
    if y0.len() != t.dim {
        return param(format!("initial point has dimension {}, operator {}", y0.len(), t.dim));
    }
    Ok(())
}

/// OHM in anchoring form: `y_{k+1} = ((k+1)/(k+2)) T y_k + y_0/(k+2)`, returning `y_0..y_N`.
pub fn run_ohm(t: &NonexpansiveMap, y0: &[f64], n: usize) -> Result<Trace> {
    check_dims(t, y0)?;
    if n < 1 {
        return param("OHM needs N >= 1");
    }
    let mut trace = Trace::new(FixedPointMethod::Ohm.id());
    let mut y = y0.to_vec();
    trace.iterates.push(y.clone());
    for k in 0..n {
        let ty = t.apply(&y);
        trace.evals += 1;
        trace.push_metric(RESIDUAL_SQ, norm_sq(&sub(&y, &ty)));
        let kf = k as f64;
        y = combine(&[((kf + 1.0) / (kf + 2.0), &ty), (1.0 / (kf + 2.0), y0)]);
        trace.iterates.push(y.clone());
    }
    trace.monitor_evals += 1;
    trace.push_metric(RESIDUAL_SQ, norm_sq(&sub(&y, &t.apply(&y))));
    Ok(trace)
}

/// OHM in momentum form, `y_0..y_N`.
pub fn run_ohm_momentum(t: &NonexpansiveMap, y0: &[f64], n: usize) -> Result<Trace> {
    check_dims(t, y0)?;
    let mut trace = Trace::new(FixedPointMethod::Ohm.id());
    let mut y = y0.to_vec();
    let mut ty_prev = y0.to_vec();
    trace.iterates.push(y.clone());
    for k in 0..n {
        let ty = t.apply(&y);
        trace.evals += 1;
        let kf = k as f64;
        let mut next = y.clone();
        axpy(&mut next, -1.0 / (kf + 2.0), &sub(&y, &ty));
        axpy(&mut next, kf / (kf + 2.0), &sub(&ty, &ty_prev));
        y = next;
        ty_prev = ty;
        trace.iterates.push(y.clone());
    }
    Ok(trace)
}

/// Dual-OHM with horizon `N` in its `z` form, returning `y_0..y_{N-1}` and `z_0..z_{N-1}`.
/// The momentum form is run alongside and must agree.
pub fn run_dual_ohm(t: &NonexpansiveMap, y0: &[f64], n: usize) -> Result<Trace> {
    let trace = run_dual_ohm_z(t, y0, n)?;
    let momentum = run_dual_ohm_momentum(t, y0, n)?;
    let gap = max_sequence_gap(&trace.iterates, &momentum.iterates);
    if gap > FORM_TOL * (1.0 + norm(y0)) {
        let iter = trace
            .iterates
            .iter()
            .zip(&momentum.iterates)
            .position(|(a, b)| dist(a, b) == gap)
            .unwrap_or(0);
        return Err(Error::FormDivergence { iter, gap });
    }
    Ok(trace)
}

fn run_dual_ohm_z(t: &NonexpansiveMap, y0: &[f64], n: usize) -> Result<Trace> {
    check_dims(t, y0)?;
    if n < 1 {
        return param("Dual-OHM needs N >= 1");
    }
    let mut trace = Trace::new(FixedPointMethod::DualOhm.id());
    let mut y = y0.to_vec();
    let mut z = vec![0.0; y0.len()];
    let mut zs = vec![z.clone()];
    trace.iterates.push(y.clone());
    for k in 0..n - 1 {
        let ty = t.apply(&y);
        trace.evals += 1;
        let r = sub(&y, &ty);
        trace.push_metric(RESIDUAL_SQ, norm_sq(&r));
        let rem = (n - k) as f64;
        z = combine(&[((rem - 1.0) / rem, &z), (-1.0 / rem, &r)]);
        y = sub(&ty, &z);
        zs.push(z.clone());
        trace.iterates.push(y.clone());
    }
    trace.monitor_evals += 1;
    trace.push_metric(RESIDUAL_SQ, norm_sq(&sub(&y, &t.apply(&y))));
    trace.aux = Some(zs);
    Ok(trace)
}

/// Dual-OHM momentum form `y_{k+1} = y_k + ((N-k-1)/(N-k)) (T y_k - T y_{k-1})`.
pub fn run_dual_ohm_momentum(t: &NonexpansiveMap, y0: &[f64], n: usize) -> Result<Trace> {
    check_dims(t, y0)?;
    if n < 1 {
        return param("Dual-OHM needs N >= 1");
    }
    let mut trace = Trace::new(FixedPointMethod::DualOhm.id());
    let mut y = y0.to_vec();
    let mut ty_prev = y0.to_vec();
    trace.iterates.push(y.clone());
    for k in 0..n - 1 {
        let ty = t.apply(&y);
        trace.evals += 1;
        let rem = (n - k) as f64;
        axpy(&mut y, (rem - 1.0) / rem, &sub(&ty, &ty_prev));
        ty_prev = ty;
        trace.iterates.push(y.clone());
    }
    Ok(trace)
}

/// Which proximal-point form to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProximalKind {
    Appm,
    DualOhmProx,
}

/// Runs a proximal form through a resolvent `j`; returns `y`-iterates and resolvent points.
fn run_proximal_with<J: Fn(&[f64]) -> DenseVector>(kind: ProximalKind, j: J, y0: &[f64], n: usize) -> Result<Trace> {
    if n < 1 {
        return param("proximal forms need N >= 1");
    }
    let (name, steps) = match kind {
        ProximalKind::Appm => (FixedPointMethod::Appm.id(), n),
        ProximalKind::DualOhmProx => (FixedPointMethod::DualOhmProx.id(), n - 1),
    };
    let mut trace = Trace::new(name);
    let mut ys = vec![y0.to_vec()];
    let mut xs = vec![y0.to_vec()];
    let mut y_prev = y0.to_vec();
    for k in 0..steps {
        let y = ys[k].clone();
        let x_next = j(&y);
        trace.evals += 1;
        trace.push_metric(RESIDUAL_SQ, 4.0 * norm_sq(&sub(&y, &x_next)));
        let x = &xs[k];
        let next = match kind {
            ProximalKind::Appm => {
                let c = k as f64 / (k as f64 + 2.0);
                combine(&[(1.0, &x_next), (c, &sub(&x_next, x)), (-c, &sub(x, &y_prev))])
            }
            ProximalKind::DualOhmProx => {
                let rem = (n - k) as f64;
                let c = (rem - 1.0) / rem;
                combine(&[
                    (1.0, &x_next),
                    (c, &sub(&x_next, x)),
                    (-c, &sub(x, &y_prev)),
                    (-1.0 / rem, &sub(&x_next, &y)),
                ])
            }
        };
        y_prev = y;
        xs.push(x_next);
        ys.push(next);
    }
    let y_last = ys.last().expect("nonempty");
    trace.monitor_evals += 1;
    trace.push_metric(RESIDUAL_SQ, 4.0 * norm_sq(&sub(y_last, &j(y_last))));
    trace.iterates = ys;
    trace.resolvent_points = Some(xs);
    Ok(trace)
}

/// APPM or the proximal form of Dual-OHM on a monotone map with a resolvent.
/// Residuals refer to `T = 2 J_A - I`.
pub fn run_proximal_form(kind: ProximalKind, a: &MonotoneMap, y0: &[f64], n: usize) -> Result<Trace> {
    if y0.len() != a.dim {
        return param("initial point dimension mismatch");
    }
    let j = a.resolvent_operator(1.0)?;
    run_proximal_with(kind, |y| j.apply(y), y0, n)
}

/// The proximal form driven by `J = (T + I)/2` of a nonexpansive map.
pub fn run_proximal_from_nonexpansive(kind: ProximalKind, t: &NonexpansiveMap, y0: &[f64], n: usize) -> Result<Trace> {
    check_dims(t, y0)?;
    run_proximal_with(kind, |y| combine(&[(0.5, &t.apply(y)), (0.5, y)]), y0, n)
}

/// Runs Dual-OHM with horizon `N'` then switches to the OHM anchoring update, returning `y_0..y_{N-1}`.
pub fn run_composed(t: &NonexpansiveMap, y0: &[f64], n: usize, n_prime: usize) -> Result<Trace> {
    check_dims(t, y0)?;
    if n < 3 || n_prime < 2 || n_prime > n - 1 {
        return param(format!("composed method needs 2 <= N' <= N-1, got N={n}, N'={n_prime}"));
    }
    let mut trace = run_dual_ohm_z(t, y0, n_prime)?;
    trace.method = FixedPointMethod::Composed.id().to_string();
    let terminal_residual = trace.metrics.get_mut(RESIDUAL_SQ).and_then(Vec::pop);
    trace.monitor_evals -= 1;
    let mut y = trace.last().clone();
    for k in n_prime - 1..n - 1 {
        let ty = t.apply(&y);
        trace.evals += 1;
        let r = if k == n_prime - 1 { terminal_residual.unwrap_or(f64::NAN) } else { norm_sq(&sub(&y, &ty)) };
        trace.push_metric(RESIDUAL_SQ, r);
        let kf = k as f64;
        y = combine(&[((kf + 1.0) / (kf + 2.0), &ty), (1.0 / (kf + 2.0), y0)]);
        trace.iterates.push(y.clone());
    }
    trace.monitor_evals += 1;
    trace.push_metric(RESIDUAL_SQ, norm_sq(&sub(&y, &t.apply(&y))));
    trace.aux = None;
    Ok(trace)
}

/// H-matrix of the composed method, size `N-1`.
pub fn composed_hmatrix(n: usize, n_prime: usize) -> Result<HMatrix> {
    if n < 3 || n_prime < 2 || n_prime > n - 1 {
        return param(format!("composed method needs 2 <= N' <= N-1, got N={n}, N'={n_prime}"));
    }
    let dual = named_hmatrix(FixedPointKind::DualOhm, n_prime)?;
    let mut h = HMatrix::zeros(n - 1, Convention::FixedPoint)?;
    for k in 0..n_prime - 1 {
        for j in 0..=k {
            h.set(k, j, dual.get(k, j));
        }
    }
    // Row `k` of the OHM phase produces y_{k+1}.
    for k in n_prime - 1..n - 1 {
        let kf = k as f64;
        for j in 0..k {
            let col: f64 = (j..k).map(|m| h.get(m, j)).sum();
            h.set(k, j, -col / (kf + 2.0));
        }
        h.set(k, k, (kf + 1.0) / (kf + 2.0));
    }
    Ok(h)
}

/// Runs one named form of OHM (`y_0..y_{N-1}`) or Dual-OHM (`y_0..y_{N-1}`).
pub fn run_form(kind: FixedPointKind, form: FixedPointForm, t: &NonexpansiveMap, y0: &[f64], n: usize) -> Result<Trace> {
    if n < 2 {
        return param("form comparison needs N >= 2");
    }
    let mut trace = match (kind, form) {
        (FixedPointKind::Ohm, FixedPointForm::Canonical) => run_ohm(t, y0, n - 1)?,
        (FixedPointKind::Ohm, FixedPointForm::Momentum) => run_ohm_momentum(t, y0, n - 1)?,
        (FixedPointKind::Ohm, FixedPointForm::Proximal) => {
            run_proximal_from_nonexpansive(ProximalKind::Appm, t, y0, n - 1)?
        }
        (FixedPointKind::DualOhm, FixedPointForm::Canonical) => run_dual_ohm_z(t, y0, n)?,
        (FixedPointKind::DualOhm, FixedPointForm::Momentum) => run_dual_ohm_momentum(t, y0, n)?,
        (FixedPointKind::DualOhm, FixedPointForm::Proximal) => {
            run_proximal_from_nonexpansive(ProximalKind::DualOhmProx, t, y0, n)?
        }
        (_, FixedPointForm::HMatrix) => run_fp_hmatrix(&named_hmatrix(kind, n)?, t, y0)?,
    };
    trace.iterates.truncate(n);
    Ok(trace)
}

/// Largest iterate gap between all forms of a method and its canonical form.
pub fn form_equivalence_gap(kind: FixedPointKind, t: &NonexpansiveMap, y0: &[f64], n: usize) -> Result<f64> {
    let base = run_form(kind, FixedPointForm::Canonical, t, y0, n)?;
    let mut gap: f64 = 0.0;
    for form in [FixedPointForm::Momentum, FixedPointForm::HMatrix, FixedPointForm::Proximal] {
        let other = run_form(kind, form, t, y0, n)?;
        gap = gap.max(max_sequence_gap(&base.iterates, &other.iterates));
    }
    Ok(gap)
}

/// Rate bound `4 ||y0 - y*||^2 / denom^2`.
pub fn rate_bound(dist_sq: f64, denom: f64) -> f64 {
    4.0 * dist_sq / (denom * denom)
}

/// Checks the terminal-iterate lemma: if `rho ||g||^2 + <g, x - y0> <= 0` then
/// `||g||^2 <= ||y0 - x*||^2 / rho^2`. Returns `None` when the hypothesis fails.
pub fn terminal_lemma_holds(g: &[f64], x: &[f64], y0: &[f64], fix: &[f64], rho: f64, tol: f64) -> Option<bool> {
    let lhs = rho * norm_sq(g) + dot(g, &sub(x, y0));
    if lhs > tol {
        return None;
    }
    Some(norm_sq(g) <= norm_sq(&sub(y0, fix)) / (rho * rho) + tol)
}

fn resolvent_point(t: &NonexpansiveMap, y: &[f64]) -> DenseVector {
    combine(&[(0.5, &t.apply(y)), (0.5, y)])
}

/// Lyapunov series of an OHM/APPM trace (`U_0..U_N`) or a Dual-OHM trace (`V_0..V_{N-1}`).
/// Resolvent points are recomputed as `x_{k+1} = (y_k + T y_k)/2`.
pub fn lyapunov_series(kind: LyapunovKind, t: &NonexpansiveMap, trace: &Trace) -> Result<LyapunovSeries> {
    let ys = &trace.iterates;
    if ys.is_empty() {
        return param("empty trace");
    }
    let y0 = &ys[0];
    match kind {
        LyapunovKind::UOhm => {
            if !matches!(trace.method.as_str(), "ohm" | "appm") {
                return param(format!("U series needs an OHM trace, got `{}`", trace.method));
            }
            let n = ys.len() - 1;
            let xs: Vec<DenseVector> = (0..n).map(|k| resolvent_point(t, &ys[k])).collect();
            let gs: Vec<DenseVector> = (0..n).map(|k| sub(&ys[k], &xs[k])).collect();
            let mut values = vec![0.0];
            for k in 1..=n {
                let (x, g) = (&xs[k - 1], &gs[k - 1]);
                let kf = k as f64;
                values.push(kf * kf * norm_sq(g) + kf * dot(g, &sub(x, y0)));
            }
            let mut expected = vec![0.0];
            for j in 1..n {
                let jf = j as f64;
                expected.push(jf * (jf + 1.0) * dot(&sub(&xs[j], &xs[j - 1]), &sub(&gs[j], &gs[j - 1])));
            }
            Ok(finish(kind, values, expected))
        }
        LyapunovKind::VDualOhm => {
            if !matches!(trace.method.as_str(), "dual-ohm" | "dual-ohm-prox") {
                return param(format!("V series needs a Dual-OHM trace, got `{}`", trace.method));
            }
            let zs = trace.aux.clone().unwrap_or_else(|| recover_dual_ohm_z(t, ys));
            let n = ys.len();
            let xs: Vec<DenseVector> = (0..n).map(|k| resolvent_point(t, &ys[k])).collect();
            let gs: Vec<DenseVector> = (0..n).map(|k| sub(&ys[k], &xs[k])).collect();
            let (x_n, g_n, y_last) = (&xs[n - 1], &gs[n - 1], &ys[n - 1]);
            let values = (0..n)
                .map(|k| {
                    let rem = (n - k) as f64;
                    let w = combine(&[(1.0, &zs[k]), (2.0, g_n)]);
                    -((rem - 1.0) / rem) * norm_sq(&w) + (2.0 / rem) * dot(&w, &sub(&ys[k], y_last))
                })
                .collect();
            let expected = (0..n - 1)
                .map(|k| {
                    let rem = (n - k) as f64;
                    4.0 / (rem * (rem - 1.0)) * dot(&sub(x_n, &xs[k]), &sub(g_n, &gs[k]))
                })
                .collect();
            Ok(finish(kind, values, expected))
        }
        _ => param("fixed-point Lyapunov series are U_ohm or V_dual_ohm"),
    }
}

/// `z_0 = 0` and `z_k = T y_{k-1} - y_k`.
fn recover_dual_ohm_z(t: &NonexpansiveMap, ys: &[DenseVector]) -> Vec<DenseVector> {
    let mut zs = vec![vec![0.0; ys[0].len()]];
    zs.extend(ys.windows(2).map(|w| sub(&t.apply(&w[0]), &w[1])));
    zs
}

fn finish(kind: LyapunovKind, values: Vec<f64>, expected: Vec<f64>) -> LyapunovSeries {
    let identity_gap = values
        .windows(2)
        .zip(&expected)
        .map(|(w, e)| ((w[0] - w[1]) - e).abs())
        .fold(0.0, f64::max);
    LyapunovSeries { kind, values, expected_decrements: expected, identity_gap, mi: Vec::new(), li: Vec::new() }
}

/// `||y0 - fix||^2` for a map with a known fixed point.
pub fn initial_distance_sq(t: &NonexpansiveMap, y0: &[f64]) -> Option<f64> {
    t.known_fix.as_ref().map(|f| norm_sq(&sub(y0, f)))
}

/// `T = -I` on `R^d`.
pub fn negation(d: usize) -> NonexpansiveMap {
    NonexpansiveMap::linear(crate::numerics::DenseMatrix::identity(d).scaled(-1.0)).expect("norm one")
}
