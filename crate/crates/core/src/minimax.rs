//! Extragradient-type minimax methods (EG, FEG, Dual-FEG) and the Dual-FEG
//! Lyapunov series.

use crate::error::{param, Result};
use crate::fixedpoint::{LyapunovKind, LyapunovSeries};
use crate::hmatrix::{named_gradient_hmatrix, run_grad_hmatrix, GradientKind};
use crate::numerics::{axpy, combine, dist, dot, norm, norm_sq, sub, DenseVector};
use crate::operators::SaddleProblem;
use crate::trace::{max_sequence_gap, Trace, GRAD_NORM_SQ};

/// Extragradient-type method identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinimaxMethod {
    Eg,
    Feg,
    DualFeg,
}

impl MinimaxMethod {
    pub fn id(self) -> &'static str {
        match self {
            Self::Eg => "eg",
            Self::Feg => "feg",
            Self::DualFeg => "dual-feg",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        [Self::Eg, Self::Feg, Self::DualFeg].into_iter().find(|m| m.id() == s)
    }
}

/// Runs `N` steps keeping all full and half iterates.
pub fn run(kind: MinimaxMethod, p: &SaddleProblem, x0: &[f64], alpha: f64, n: usize) -> Result<Trace> {
    run_with(kind, p, x0, alpha, n, true)
}

/// Runs `N` steps. Without `keep_iterates` only `x_0` and `x_N` are stored.
pub fn run_with(
    kind: MinimaxMethod,
    p: &SaddleProblem,
    x0: &[f64],
    alpha: f64,
    n: usize,
    keep_iterates: bool,
) -> Result<Trace> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return param(format!("step size must be positive, got {alpha}"));
    }
    if x0.len() != p.dim() {
        return param(format!("initial point has dimension {}, problem {}", x0.len(), p.dim()));
    }
    let mut trace = Trace::new(kind.id());
    if let Some(l) = p.lipschitz() {
        if kind != MinimaxMethod::Eg && alpha * l > 1.0 + 1e-12 {
            trace.notes.push(format!("alpha * L = {:e} exceeds 1; rate guarantee does not apply", alpha * l));
        }
    }
    let nf = n as f64;
    let mut x = x0.to_vec();
    let mut z = vec![0.0; x0.len()];
    let mut xs = vec![x.clone()];
    let mut halves = Vec::new();
    let mut zs = vec![z.clone()];
    for k in 0..n {
        let kf = k as f64;
        let g = p.saddle_grad(&x);
        trace.push_metric(GRAD_NORM_SQ, norm_sq(&g));
        let half = match kind {
            MinimaxMethod::Eg => combine(&[(1.0, &x), (-alpha, &g)]),
            MinimaxMethod::Feg => {
                combine(&[(1.0, &x), (1.0 / (kf + 1.0), &sub(x0, &x)), (-alpha * kf / (kf + 1.0), &g)])
            }
            MinimaxMethod::DualFeg => combine(&[(1.0, &x), (-alpha, &z), (-alpha, &g)]),
        };
        let gh = p.saddle_grad(&half);
        trace.evals += 2;
        x = match kind {
            MinimaxMethod::Eg => combine(&[(1.0, &x), (-alpha, &gh)]),
            MinimaxMethod::Feg => combine(&[(1.0, &x), (1.0 / (kf + 1.0), &sub(x0, &x)), (-alpha, &gh)]),
            MinimaxMethod::DualFeg => {
                let c = (nf - kf - 1.0) / (nf - kf);
                let mut next = half.clone();
                axpy(&mut next, -c * alpha, &sub(&gh, &g));
                z = combine(&[(c, &z), (-1.0 / (nf - kf), &gh)]);
                next
            }
        };
        if keep_iterates {
            xs.push(x.clone());
            halves.push(half);
            if kind == MinimaxMethod::DualFeg {
                zs.push(z.clone());
            }
        }
    }
    trace.push_metric(GRAD_NORM_SQ, norm_sq(&p.saddle_grad(&x)));
    trace.monitor_evals += 1;
    if keep_iterates {
        trace.iterates = xs;
        trace.half_iterates = Some(halves);
        if kind == MinimaxMethod::DualFeg {
            trace.aux = Some(zs);
        }
    } else {
        if n > 0 {
            xs.push(x);
        }
        trace.iterates = xs;
    }
    Ok(trace)
}

/// Gradient-norm bound `4 ||x0 - x*||^2 / (alpha^2 k^2)` for `k >= 1`.
pub fn gradient_bound(dist_sq: f64, alpha: f64, k: usize) -> f64 {
    let kf = k as f64;
    4.0 * dist_sq / (alpha * alpha * kf * kf)
}

/// Dual-FEG Lyapunov series `V_0..V_{N-1}` with its two-part decrement decomposition.
pub fn dual_feg_lyapunov(p: &SaddleProblem, trace: &Trace, alpha: f64) -> Result<LyapunovSeries> {
    if trace.method != MinimaxMethod::DualFeg.id() {
        return param(format!("Dual-FEG Lyapunov series needs a dual-feg trace, got `{}`", trace.method));
    }
    let (Some(halves), Some(zs)) = (&trace.half_iterates, &trace.aux) else {
        return param("trace lacks half iterates or z sequence");
    };
    let xs = &trace.iterates;
    let n = halves.len();
    if n == 0 {
        return param("Dual-FEG Lyapunov series needs N >= 1");
    }
    let x_n = &xs[n];
    let g_n = p.saddle_grad(x_n);
    let gs: Vec<DenseVector> = xs[..n].iter().map(|x| p.saddle_grad(x)).collect();
    let ghs: Vec<DenseVector> = halves.iter().map(|x| p.saddle_grad(x)).collect();
    let nf = n as f64;
    let values: Vec<f64> = (0..n)
        .map(|k| {
            let w = combine(&[(1.0, &zs[k]), (1.0, &g_n)]);
            -alpha * norm_sq(&w) + (2.0 / (nf - k as f64)) * dot(&w, &sub(&xs[k], x_n))
        })
        .collect();
    let mut mi = Vec::with_capacity(n);
    let mut li = Vec::with_capacity(n);
    let mut expected = Vec::with_capacity(n);
    for k in 0..n.saturating_sub(1) {
        let rem = nf - k as f64;
        let m = dot(&sub(&g_n, &ghs[k]), &sub(x_n, &halves[k]));
        let l = norm_sq(&sub(&halves[k], &xs[k])) - alpha * alpha * norm_sq(&sub(&ghs[k], &gs[k]));
        mi.push(m);
        li.push(l);
        expected.push(2.0 / (rem * (rem - 1.0)) * m + l / (alpha * rem * rem));
    }
    let identity_gap =
        values.windows(2).zip(&expected).map(|(w, e)| ((w[0] - w[1]) - e).abs()).fold(0.0, f64::max);
    Ok(LyapunovSeries { kind: LyapunovKind::VDualFeg, values, expected_decrements: expected, identity_gap, mi, li })
}

/// `||x_N(FEG) - x_N(Dual-FEG)|| / (1 + ||x0||)` on an affine saddle operator.
pub fn terminal_match_linear(p: &SaddleProblem, x0: &[f64], alpha: f64, n: usize) -> Result<f64> {
    if !p.is_linear() {
        return param("terminal match needs a linear saddle operator");
    }
    terminal_gap(p, x0, alpha, n)
}

/// `||x_N(FEG) - x_N(Dual-FEG)|| / (1 + ||x0||)` on any problem.
pub fn terminal_gap(p: &SaddleProblem, x0: &[f64], alpha: f64, n: usize) -> Result<f64> {
    let feg = run_with(MinimaxMethod::Feg, p, x0, alpha, n, false)?;
    let dual = run_with(MinimaxMethod::DualFeg, p, x0, alpha, n, false)?;
    Ok(dist(feg.last(), dual.last()) / (1.0 + norm(x0)))
}

/// Largest gap between the direct recursion and the H-matrix form, over full and half iterates.
pub fn form_equivalence_gap(kind: GradientKind, p: &SaddleProblem, x0: &[f64], alpha: f64, n: usize) -> Result<f64> {
    let method = match kind {
        GradientKind::Feg => MinimaxMethod::Feg,
        GradientKind::DualFeg => MinimaxMethod::DualFeg,
    };
    let direct = run(method, p, x0, alpha, n)?;
    let h = named_gradient_hmatrix(kind, n, 1.0)?;
    let via_h = run_grad_hmatrix(&h, p, x0, 1.0 / alpha)?;
    let full = max_sequence_gap(&direct.iterates, &via_h.iterates);
    let half = max_sequence_gap(
        direct.half_iterates.as_deref().unwrap_or_default(),
        via_h.half_iterates.as_deref().unwrap_or_default(),
    );
    Ok(full.max(half))
}
