//! Config-driven experiments: run methods on a problem, overlay the
//! theoretical bounds, evaluate the bound assertions and write the CSV.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fixedpoint::{self, FixedPointMethod, ProximalKind};
use crate::minimax::{self, MinimaxMethod};
use crate::numerics::{norm_sq, spectral_norm, sub, DenseVector};
use crate::operators::{make_problem, nonexpansive_from_monotone, ProblemSpec, SaddleProblem};
use crate::rng::{prng, unit_vector};
use crate::trace::{format_value, Trace, GRAD_NORM_SQ, RESIDUAL_SQ};

/// Method label used for theoretical bound rows in the CSV.
pub const BOUND: &str = "bound";

/// Relative slack on bound assertions.
pub const BOUND_TOL: f64 = 1e-9;

/// Where the initial point comes from.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPoint {
    /// Uniform on the sphere of the given radius, drawn from the experiment seed.
    RandomSphere {
        #[serde(default = "one")]
        radius: f64,
    },
    Point { coords: Vec<f64> },
    Zero,
}

fn one() -> f64 {
    1.0
}

impl Default for InitialPoint {
    fn default() -> Self {
        Self::RandomSphere { radius: 1.0 }
    }
}

/// One experiment: a problem, a list of methods, and run lengths.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub problem: ProblemSpec,
    pub methods: Vec<String>,
    /// Step size of the gradient methods; defaults to `1/L`.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Number of steps `N`.
    pub iterations: usize,
    /// Resolvent step `gamma` of `T = 2 J_{gamma A} - I` for the fixed-point methods.
    #[serde(default = "one")]
    pub resolvent_step: f64,
    /// Switch point `N'` of the composed method; defaults to `N/2` (at least 2).
    #[serde(default)]
    pub composed_switch: Option<usize>,
    #[serde(default)]
    pub initial: InitialPoint,
    /// Keep every `record_every`-th metric row in the CSV (the last row is always kept).
    #[serde(default = "one_usize")]
    pub record_every: usize,
    #[serde(default = "yes")]
    pub plot: bool,
}

fn one_usize() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        for m in &self.methods {
            if MinimaxMethod::from_id(m).is_none() && FixedPointMethod::from_id(m).is_none() {
                return Err(Error::Config(format!("unknown method `{m}`")));
            }
            let fixed = FixedPointMethod::from_id(m).is_some();
            let resolvable = matches!(
                self.problem,
                ProblemSpec::BilinearUv
                    | ProblemSpec::BilinearMatrix { .. }
                    | ProblemSpec::OuyangXu { .. }
                    | ProblemSpec::RandomLinearMonotone { .. }
                    | ProblemSpec::L1Norm { .. }
            );
            if fixed && !resolvable {
                return Err(Error::Config(format!("method `{m}` needs a resolvent, which this problem lacks")));
            }
            if !fixed && matches!(self.problem, ProblemSpec::L1Norm { .. }) {
                return Err(Error::Config(format!("method `{m}` needs a single-valued Lipschitz operator")));
            }
            if m == "composed" && self.iterations < 3 {
                return Err(Error::Config("the composed method needs at least 3 iterations".into()));
            }
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("alpha must be positive, got {a}")));
            }
        }
        if !(self.resolvent_step > 0.0) {
            return Err(Error::Config("resolvent_step must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// One evaluated bound assertion.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    pub method: String,
    pub metric: String,
    /// `"all"` or `"terminal"`.
    pub scope: &'static str,
    /// Largest `value / bound` over the asserted indices.
    pub worst_ratio: f64,
    pub passed: bool,
}

/// Series for one method.
#[derive(Debug, Clone)]
pub struct MethodSeries {
    pub method: String,
    pub metric: String,
    pub values: Vec<f64>,
    pub terminal_point: DenseVector,
    pub notes: Vec<String>,
}

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub name: String,
    pub series: Vec<MethodSeries>,
    /// Bound series per metric.
    pub bounds: Vec<(String, Vec<f64>)>,
    pub checks: Vec<BoundCheck>,
    /// Informational comparisons (soft checks, terminal agreement).
    pub notes: Vec<String>,
    pub record_every: usize,
    pub elapsed: Duration,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn series(&self, method: &str) -> Option<&MethodSeries> {
        self.series.iter().find(|s| s.method == method)
    }

    /// Writes `method,iter,metric,value` rows, method series first, then bounds.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "iter", "metric", "value"])?;
        let keep = |k: usize, len: usize| k.is_multiple_of(self.record_every) || k + 1 == len;
        for s in &self.series {
            for (k, v) in s.values.iter().enumerate().filter(|(k, _)| keep(*k, s.values.len())) {
                w.write_record([s.method.as_str(), &k.to_string(), s.metric.as_str(), &format_value(*v)])?;
            }
        }
        for (metric, b) in &self.bounds {
            for (k, v) in b.iter().enumerate().filter(|(k, v)| v.is_finite() && keep(*k, b.len())) {
                w.write_record([BOUND, &k.to_string(), metric.as_str(), &format_value(*v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable summary lines.
    pub fn summary(&self) -> String {
        let mut s = format!("experiment {}\n", self.name);
        for m in &self.series {
            let last = m.values.last().copied().unwrap_or(f64::NAN);
            s.push_str(&format!("  {:<14} {} final {:e}\n", m.method, m.metric, last));
        }
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {} {} bound ({}), worst value/bound {:.6}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.method,
                c.metric,
                c.scope,
                c.worst_ratio
            ));
        }
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s
    }
}

fn initial_point(cfg: &ExperimentConfig, dim: usize) -> Result<DenseVector> {
    match &cfg.initial {
        InitialPoint::RandomSphere { radius } => {
            let mut rng = prng(cfg.seed);
            Ok(unit_vector(&mut rng, dim).into_iter().map(|v| v * radius).collect())
        }
        InitialPoint::Point { coords } => {
            if coords.len() != dim {
                return Err(Error::Config(format!("initial point has {} coordinates, problem needs {dim}", coords.len())));
            }
            Ok(coords.clone())
        }
        InitialPoint::Zero => Ok(vec![0.0; dim]),
    }
}

fn lipschitz(p: &SaddleProblem) -> Result<f64> {
    if let Some(l) = p.lipschitz() {
        return Ok(l);
    }
    match p.grad.affine_parts() {
        Some((m, _)) => Ok(spectral_norm(m, 100, 1e-10)),
        None => Err(Error::Config("alpha must be given for a problem without a known Lipschitz constant".into())),
    }
}

fn bound_check(method: &str, metric: &str, values: &[f64], bound: &[f64], terminal_only: bool) -> BoundCheck {
    let idx: Vec<usize> = if terminal_only {
        vec![values.len() - 1]
    } else {
        (0..values.len()).filter(|&k| bound[k].is_finite()).collect()
    };
    let worst_ratio = idx
        .iter()
        .map(|&k| if bound[k] > 0.0 { values[k] / bound[k] } else if values[k] <= 0.0 { 0.0 } else { f64::INFINITY })
        .fold(0.0, f64::max);
    let passed = idx.iter().all(|&k| values[k] <= bound[k] * (1.0 + BOUND_TOL) + 1e-300);
    BoundCheck { method: method.to_string(), metric: metric.to_string(), scope: if terminal_only { "terminal" } else { "all" }, worst_ratio, passed }
}

/// Runs one experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let problem = make_problem(&cfg.problem)?;
    let x0 = initial_point(cfg, problem.dim())?;
    let n = cfg.iterations;
    let dist_sq = problem.known_saddle().map(|s| norm_sq(&sub(&x0, s)));
    let mut series = Vec::new();
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut bounds: Vec<(String, Vec<f64>)> = Vec::new();
    let has_gradient = cfg.methods.iter().any(|m| MinimaxMethod::from_id(m).is_some());
    let has_fixed = cfg.methods.iter().any(|m| FixedPointMethod::from_id(m).is_some());
    let alpha = if has_gradient { Some(cfg.alpha.map_or_else(|| lipschitz(&problem).map(|l| 1.0 / l), Ok)?) } else { None };
    if let (Some(r2), Some(a)) = (dist_sq, alpha) {
        let b = (0..=n).map(|k| if k == 0 { f64::INFINITY } else { minimax::gradient_bound(r2, a, k) }).collect();
        bounds.push((GRAD_NORM_SQ.to_string(), b));
    }
    if let (Some(r2), true) = (dist_sq, has_fixed) {
        bounds.push((RESIDUAL_SQ.to_string(), (0..=n).map(|k| fixedpoint::rate_bound(r2, (k + 1) as f64)).collect()));
    }
    let t_map = if has_fixed && n > 0 { Some(nonexpansive_from_monotone(&problem.grad, cfg.resolvent_step)?) } else { None };
    for m in &cfg.methods {
        let (trace, metric, terminal_only): (Trace, &str, Option<bool>) = if let Some(kind) = MinimaxMethod::from_id(m) {
            let a = alpha.expect("set for gradient methods");
            let t = minimax::run_with(kind, &problem, &x0, a, n, false)?;
            let scope = match kind {
                MinimaxMethod::Eg => None,
                MinimaxMethod::Feg => Some(false),
                MinimaxMethod::DualFeg => Some(true),
            };
            (t, GRAD_NORM_SQ, scope)
        } else if n == 0 {
            let mut t = Trace::new(m);
            t.iterates.push(x0.clone());
            let r = match &t_map {
                Some(tm) => norm_sq(&sub(&x0, &tm.apply(&x0))),
                None => norm_sq(&sub(&x0, &nonexpansive_from_monotone(&problem.grad, cfg.resolvent_step)?.apply(&x0))),
            };
            t.push_metric(RESIDUAL_SQ, r);
            (t, RESIDUAL_SQ, None)
        } else {
            let tm = t_map.as_ref().expect("built for fixed-point methods");
            let kind = FixedPointMethod::from_id(m).expect("validated");
            let t = match kind {
                FixedPointMethod::Ohm => fixedpoint::run_ohm(tm, &x0, n)?,
                FixedPointMethod::Appm => fixedpoint::run_proximal_from_nonexpansive(ProximalKind::Appm, tm, &x0, n)?,
                FixedPointMethod::DualOhm => fixedpoint::run_dual_ohm(tm, &x0, n)?,
                FixedPointMethod::DualOhmProx => {
                    fixedpoint::run_proximal_from_nonexpansive(ProximalKind::DualOhmProx, tm, &x0, n)?
                }
                FixedPointMethod::Composed => {
                    let np = cfg.composed_switch.unwrap_or((n / 2).max(2)).clamp(2, n - 1);
                    fixedpoint::run_composed(tm, &x0, n, np)?
                }
            };
            let scope = match kind {
                FixedPointMethod::Ohm | FixedPointMethod::Appm => Some(false),
                _ => Some(true),
            };
            (t, RESIDUAL_SQ, scope)
        };
        let values = trace.metric(metric).to_vec();
        if let (Some(scope), Some((_, b))) = (terminal_only, bounds.iter().find(|(name, _)| name == metric)) {
            if n > 0 {
                checks.push(bound_check(m, metric, &values, b, scope));
            }
        }
        series.push(MethodSeries {
            method: m.clone(),
            metric: metric.to_string(),
            values,
            terminal_point: trace.last().clone(),
            notes: trace.notes.clone(),
        });
    }
    if let (Some(f), Some(d)) = (series.iter().find(|s| s.method == "feg"), series.iter().find(|s| s.method == "dual-feg")) {
        let gap = crate::numerics::dist(&f.terminal_point, &d.terminal_point) / (1.0 + crate::numerics::norm(&x0));
        let (vf, vd) = (*f.values.last().unwrap_or(&0.0), *d.values.last().unwrap_or(&0.0));
        notes.push(format!(
            "terminal FEG vs Dual-FEG: point gap {gap:e} (relative), grad_norm_sq {vf:e} vs {vd:e}{}",
            if problem.is_linear() { "; operator is linear, identical iterates expected" } else { "" }
        ));
        if problem.strong_mu() > 0.0 && n >= 10 {
            let k = n / 10;
            let better = d.values[k] < f.values[k];
            notes.push(format!(
                "strong monotonicity soft check at k = {k}: Dual-FEG {:e} {} FEG {:e}",
                d.values[k],
                if better { "<" } else { ">=" },
                f.values[k]
            ));
        }
    }
    for s in &series {
        notes.extend(s.notes.iter().map(|n| format!("{}: {n}", s.method)));
    }
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        series,
        bounds,
        checks,
        notes,
        record_every: cfg.record_every,
        elapsed: start.elapsed(),
    })
}
