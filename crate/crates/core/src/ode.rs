//! Continuous-time models: the Anchor and Dual-Anchor ODEs integrated by
//! fixed-step RK4, their Lyapunov monitors, the closed-form linear solution,
//! Yosida-regularized dynamics, and the H-kernel anti-transpose.

use std::collections::BTreeMap;

use crate::error::{param, Result};
use crate::numerics::{axpy, combine, dist, dot, expm, norm, norm_sq, sub, DenseMatrix, DenseVector, Lu};
use crate::operators::{yosida, MonotoneMap};

/// Monitor violations are increases above this fraction of the series scale.
pub const MONITOR_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeModel {
    Anchor,
    DualAnchor,
    DualAnchorYosida,
}

impl OdeModel {
    pub fn id(self) -> &'static str {
        match self {
            Self::Anchor => "anchor",
            Self::DualAnchor => "dual-anchor",
            Self::DualAnchorYosida => "dual-anchor-yosida",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        [Self::Anchor, Self::DualAnchor, Self::DualAnchorYosida].into_iter().find(|m| m.id() == s)
    }
}

/// An integrated trajectory on a uniform grid.
#[derive(Debug, Clone)]
pub struct OdeTrajectory {
    pub model: OdeModel,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub x: Vec<DenseVector>,
    /// `Z(t)` of the dual-anchor system.
    pub z: Option<Vec<DenseVector>>,
    pub monitors: BTreeMap<String, Vec<f64>>,
    /// Truncation `delta`: integration stops at `T - delta` for the dual-anchor system.
    pub truncation: f64,
    /// Bound on `||X(T) - X(T - delta)||`.
    pub tail_bound: f64,
}

impl OdeTrajectory {
    pub fn terminal(&self) -> &DenseVector {
        self.x.last().expect("trajectory is never empty")
    }

    pub fn monitor(&self, name: &str) -> &[f64] {
        self.monitors.get(name).map_or(&[], Vec::as_slice)
    }

    /// Writes `t, x_1.., [z_1..], monitors..` as CSV.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.x[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|i| format!("x{i}")));
        if self.z.is_some() {
            header.extend((0..d).map(|i| format!("z{i}")));
        }
        header.extend(self.monitors.keys().cloned());
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![crate::trace::format_value(*t)];
            row.extend(self.x[k].iter().map(|v| crate::trace::format_value(*v)));
            if let Some(z) = &self.z {
                row.extend(z[k].iter().map(|v| crate::trace::format_value(*v)));
            }
            row.extend(self.monitors.values().map(|m| crate::trace::format_value(m[k])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check(a: &MonotoneMap, x0: &[f64], t: f64, steps: usize) -> Result<()> {
    if x0.len() != a.dim {
        return param("initial point dimension mismatch");
    }
    if !(t > 0.0 && t.is_finite()) {
        return param(format!("horizon must be positive, got {t}"));
    }
    if steps < 10 {
        return param(format!("at least 10 steps are required, got {steps}"));
    }
    Ok(())
}

fn rk4_step<F: Fn(f64, &[f64]) -> DenseVector>(f: &F, t: f64, h: f64, s: &[f64]) -> DenseVector {
    let k1 = f(t, s);
    let k2 = f(t + h / 2.0, &combine(&[(1.0, s), (h / 2.0, &k1)]));
    let k3 = f(t + h / 2.0, &combine(&[(1.0, s), (h / 2.0, &k2)]));
    let k4 = f(t + h, &combine(&[(1.0, s), (h, &k3)]));
    let mut out = s.to_vec();
    axpy(&mut out, h / 6.0, &k1);
    axpy(&mut out, h / 3.0, &k2);
    axpy(&mut out, h / 3.0, &k3);
    axpy(&mut out, h / 6.0, &k4);
    out
}

/// `X' = -A(X) + (X_0 - X)/t` with `X'(0) = -A(X_0)/2`, on `steps` uniform steps of `[0, T]`.
/// Integrated through `D(t) = t (X(t) - X_0)`, which obeys `D' = -t A(X_0 + D/t)`, `D(0) = 0`
/// and removes the `1/t` coefficient; `D(t) = -t^2 A(X_0)/2 + O(t^3)` carries the limit velocity.
pub fn integrate_anchor(a: &MonotoneMap, x0: &[f64], t_end: f64, steps: usize) -> Result<OdeTrajectory> {
    check(a, x0, t_end, steps)?;
    let point = |t: f64, d: &[f64]| if t == 0.0 { x0.to_vec() } else { combine(&[(1.0, x0), (1.0 / t, d)]) };
    let f = |t: f64, d: &[f64]| {
        if t == 0.0 {
            vec![0.0; d.len()]
        } else {
            combine(&[(-t, &a.apply(&point(t, d)))])
        }
    };
    let h = t_end / steps as f64;
    let mut times = vec![0.0];
    let mut xs = vec![x0.to_vec()];
    let mut d = vec![0.0; x0.len()];
    for k in 0..steps {
        d = rk4_step(&f, k as f64 * h, h, &d);
        let t = if k + 1 == steps { t_end } else { (k + 1) as f64 * h };
        times.push(t);
        xs.push(point(t, &d));
    }
    let grad = xs.iter().map(|x| norm_sq(&a.apply(x))).collect();
    let mut monitors = BTreeMap::new();
    monitors.insert("grad_norm_sq".to_string(), grad);
    Ok(OdeTrajectory {
        model: OdeModel::Anchor,
        horizon: t_end,
        times,
        x: xs,
        z: None,
        monitors,
        truncation: 0.0,
        tail_bound: 0.0,
    })
}

/// `X' = -Z - A(X)`, `Z' = -(Z + A(X))/(T - t)`, `Z(0) = 0`, integrated on `[0, T - delta]`
/// with `delta = max(T 1e-6, T/steps)`; monitors `V`, `Psi` and `||A X||^2` are recorded.
pub fn integrate_dual_anchor(a: &MonotoneMap, x0: &[f64], t_end: f64, steps: usize) -> Result<OdeTrajectory> {
    check(a, x0, t_end, steps)?;
    let d = x0.len();
    let delta = (t_end * 1e-6).max(t_end / steps as f64);
    let stop = t_end - delta;
    let f = |t: f64, s: &[f64]| {
        let (x, z) = s.split_at(d);
        let w = combine(&[(1.0, z), (1.0, &a.apply(x))]);
        let mut out = combine(&[(-1.0, &w)]);
        out.extend(w.iter().map(|v| -v / (t_end - t)));
        out
    };
    let h = stop / steps as f64;
    let mut state: DenseVector = x0.iter().copied().chain(std::iter::repeat_n(0.0, d)).collect();
    let mut times = vec![0.0];
    let mut xs = vec![x0.to_vec()];
    let mut zs = vec![vec![0.0; d]];
    for k in 0..steps {
        state = rk4_step(&f, k as f64 * h, h, &state);
        times.push(if k + 1 == steps { stop } else { (k + 1) as f64 * h });
        xs.push(state[..d].to_vec());
        zs.push(state[d..].to_vec());
    }
    let ax0 = norm(&a.apply(x0));
    let mut traj = OdeTrajectory {
        model: OdeModel::DualAnchor,
        horizon: t_end,
        times,
        x: xs,
        z: Some(zs),
        monitors: BTreeMap::new(),
        truncation: delta,
        tail_bound: delta * delta * ax0 / (2.0 * t_end),
    };
    monitors(&mut traj, a)?;
    Ok(traj)
}

/// Records `V(t)`, `Psi(t)` and `||A X(t)||^2` on a dual-anchor trajectory, with `X(T)`
/// taken as the terminal grid point.
pub fn monitors(traj: &mut OdeTrajectory, a: &MonotoneMap) -> Result<()> {
    let Some(zs) = &traj.z else {
        return param("monitors need a dual-anchor trajectory");
    };
    let t_end = traj.horizon;
    let x_t = traj.terminal().clone();
    let ax_t = a.apply(&x_t);
    let mut v = Vec::with_capacity(zs.len());
    let mut psi = Vec::with_capacity(zs.len());
    let mut grad = Vec::with_capacity(zs.len());
    for ((t, x), z) in traj.times.iter().zip(&traj.x).zip(zs) {
        let rem = t_end - t;
        let w = combine(&[(1.0, z), (1.0, &ax_t)]);
        v.push(-norm_sq(&w) + (2.0 / rem) * dot(&w, &sub(x, &x_t)));
        let ax = a.apply(x);
        let xdot = combine(&[(-1.0, z), (-1.0, &ax)]);
        psi.push(norm_sq(&xdot) / (rem * rem));
        grad.push(norm_sq(&ax));
    }
    traj.monitors.insert("V".to_string(), v);
    traj.monitors.insert("Psi".to_string(), psi);
    traj.monitors.insert("grad_norm_sq".to_string(), grad);
    Ok(())
}

/// Number of steps where a series increases by more than `MONITOR_TOL` times its scale.
pub fn count_increases(series: &[f64]) -> usize {
    let scale = series.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    series.windows(2).filter(|w| w[1] - w[0] > MONITOR_TOL * scale).count()
}

/// `||X'(t)||` along a dual-anchor trajectory, from the right-hand side at grid points.
pub fn velocity_norms(traj: &OdeTrajectory, a: &MonotoneMap) -> Result<Vec<f64>> {
    let Some(zs) = &traj.z else {
        return param("velocity needs a dual-anchor trajectory");
    };
    Ok(traj.x.iter().zip(zs).map(|(x, z)| norm(&combine(&[(-1.0, z), (-1.0, &a.apply(x))]))).collect())
}

/// Largest excess of `||X'(t)||` over `((T - t)/T) e^{-mu t} ||A X_0||`.
pub fn decay_violation(traj: &OdeTrajectory, a: &MonotoneMap, mu: f64) -> Result<f64> {
    let v = velocity_norms(traj, a)?;
    let ax0 = norm(&a.apply(&traj.x[0]));
    let t_end = traj.horizon;
    Ok(traj
        .times
        .iter()
        .zip(&v)
        .map(|(t, n)| n - ((t_end - t) / t_end) * (-mu * t).exp() * ax0)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Terminal rate check: returns `(||A X(T)||^2, 4 ||X_0 - X*||^2 / T^2, slack)` where the
/// slack covers the truncated tail and `integration_tol` on `||A X||`.
pub fn terminal_rate(traj: &OdeTrajectory, a: &MonotoneMap, x_star: &[f64], integration_tol: f64) -> (f64, f64, f64) {
    let lhs = norm_sq(&a.apply(traj.terminal()));
    let t = traj.horizon;
    let bound = 4.0 * norm_sq(&sub(&traj.x[0], x_star)) / (t * t);
    let lip = a.lipschitz.unwrap_or(1.0);
    let excess = lip * traj.tail_bound + integration_tol;
    let slack = 2.0 * bound.sqrt() * excess + excess * excess;
    (lhs, bound, slack)
}

/// `X(t) = (1/t) A^{-1} (I - e^{-tA}) X_0` for invertible monotone `A`.
pub fn anchor_closed_form(m: &DenseMatrix, x0: &[f64], t: f64) -> Result<DenseVector> {
    if !(t > 0.0) {
        return param("closed form needs t > 0");
    }
    if !m.is_square() || m.rows() != x0.len() {
        return param("matrix and point sizes differ");
    }
    let lu = Lu::new(m).map_err(|e| crate::error::Error::Parameter(format!("singular matrix: {e}")))?;
    let cond = m.norm_inf() * lu.inverse().norm_inf();
    if !(cond < 1e12) {
        return param(format!("matrix is too ill-conditioned ({cond:e})"));
    }
    let e = expm(m, -t)?;
    let rhs = sub(x0, &e.matvec(x0));
    Ok(lu.solve(&rhs).into_iter().map(|v| v / t).collect())
}

/// Sup-norm distance between an anchor trajectory and the closed form at `t > 0` grid points.
pub fn oracle_error(traj: &OdeTrajectory, m: &DenseMatrix) -> Result<f64> {
    let x0 = &traj.x[0];
    let mut err: f64 = 0.0;
    for (t, x) in traj.times.iter().zip(&traj.x).skip(1) {
        err = err.max(dist(x, &anchor_closed_form(m, x0, *t)?));
    }
    Ok(err)
}

/// The dual-anchor system with `A` replaced by its Yosida approximation `A_delta`.
pub fn integrate_dual_anchor_yosida(
    a: &MonotoneMap,
    delta: f64,
    x0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<OdeTrajectory> {
    let ay = yosida(a, delta)?;
    let mut traj = integrate_dual_anchor(&ay, x0, t_end, steps)?;
    traj.model = OdeModel::DualAnchorYosida;
    Ok(traj)
}

/// Terminal points for a decreasing sequence of Yosida parameters, the successive
/// distances between them, and the largest ratio of consecutive distances.
#[derive(Debug, Clone)]
pub struct YosidaSequence {
    pub deltas: Vec<f64>,
    pub terminals: Vec<DenseVector>,
    pub distances: Vec<f64>,
    pub max_ratio: f64,
}

pub fn yosida_sequence(a: &MonotoneMap, deltas: &[f64], x0: &[f64], t_end: f64, steps: usize) -> Result<YosidaSequence> {
    if deltas.len() < 3 {
        return param("need at least three Yosida parameters");
    }
    let terminals: Vec<DenseVector> = deltas
        .iter()
        .map(|&d| Ok(integrate_dual_anchor_yosida(a, d, x0, t_end, steps)?.terminal().clone()))
        .collect::<Result<_>>()?;
    let distances: Vec<f64> = terminals.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    let max_ratio = distances.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(YosidaSequence { deltas: deltas.to_vec(), terminals, distances, max_ratio })
}

/// Smooth part of the anchor H-kernel, `H(t, s) = -s/t^2` for `s < t`.
pub fn anchor_kernel(t: f64, s: f64) -> f64 {
    -s / (t * t)
}

/// Smooth part of the dual-anchor kernel, from `Z(t) = -(T - t) int_0^t A(X(s))/(T - s)^2 ds`.
pub fn dual_anchor_kernel(t_end: f64, t: f64, s: f64) -> f64 {
    -(t_end - t) / ((t_end - s) * (t_end - s))
}

/// Largest `|H(T - s, T - t) - H_dual(t, s)|` over a grid of `0 < s < t < T`.
pub fn hkernel_check(t_end: f64, samples: usize) -> Result<f64> {
    if samples < 10 {
        return param("at least 10 samples are required");
    }
    if !(t_end > 0.0) {
        return param("horizon must be positive");
    }
    let mut worst: f64 = 0.0;
    for i in 1..samples {
        for j in 1..i {
            let t = t_end * i as f64 / samples as f64;
            let s = t_end * j as f64 / samples as f64;
            worst = worst.max((anchor_kernel(t_end - s, t_end - t) - dual_anchor_kernel(t_end, t, s)).abs());
        }
    }
    Ok(worst)
}

/// Defect of the second-order form `X'' + X'/(T - t) + M X' = 0` at a state `(X, Z)` of the
/// first-order dual-anchor system with linear `A = M`.
pub fn second_order_defect(m: &DenseMatrix, t_end: f64, t: f64, x: &[f64], z: &[f64]) -> f64 {
    let w = add_mx(m, z, x);
    let xdot: DenseVector = w.iter().map(|v| -v).collect();
    let zdot: DenseVector = w.iter().map(|v| -v / (t_end - t)).collect();
    let xddot = combine(&[(-1.0, &zdot), (-1.0, &m.matvec(&xdot))]);
    norm(&combine(&[(1.0, &xddot), (1.0 / (t_end - t), &xdot), (1.0, &m.matvec(&xdot))]))
}

fn add_mx(m: &DenseMatrix, z: &[f64], x: &[f64]) -> DenseVector {
    combine(&[(1.0, z), (1.0, &m.matvec(x))])
}
