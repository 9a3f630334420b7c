//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use haldual::family::{self, NamedP, PVector};
use haldual::fixedpoint::{self, LyapunovKind};
use haldual::harness::{run_experiment, ExperimentConfig};
use haldual::hduality::{self, ProofWeights};
use haldual::hmatrix::{named_gradient_hmatrix, named_hmatrix, named_hmatrix_exact, run_fp_hmatrix};
use haldual::minimax::{self, MinimaxMethod};
use haldual::numerics::DenseMatrix;
use haldual::ode;
use haldual::operators::{
    bilinear_matrix, make_problem, nonexpansive_from_monotone, ouyang_xu, random_linear_monotone, MonotoneMap,
    NonexpansiveMap, SaddleProblem,
};
use haldual::rng::{gaussian_matrix, gaussian_vector, prng, uniform, unit_vector, Prng};
use haldual::trace::{GRAD_NORM_SQ, RESIDUAL_SQ};
use haldual::{anti_transpose, FixedPointKind, GradientKind, ProblemSpec};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    ensure(elapsed < Duration::from_secs(limit_s), || format!("runtime {elapsed:.2?} exceeds {limit_s} s"))
}

/// Random affine monotone instance of dimension `1..=max_d`, its map `T = 2 J_A - I`, and a Gaussian start.
fn instance(seed: u64, max_d: usize) -> (SaddleProblem, NonexpansiveMap, Vec<f64>) {
    let d = 1 + (seed as usize) % max_d;
    let p = random_linear_monotone(d, seed, 0.0, true).unwrap();
    let t = nonexpansive_from_monotone(&p.grad, 1.0).unwrap();
    let y0 = gaussian_vector(&mut prng(seed ^ 0x5eed), d);
    (p, t, y0)
}

fn form_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let (p, t, y0) = instance(seed, 8);
        let alpha = 1.0 / p.lipschitz().unwrap();
        for n in 2..=20 {
            for kind in [FixedPointKind::Ohm, FixedPointKind::DualOhm] {
                worst = worst.max(fixedpoint::form_equivalence_gap(kind, &t, &y0, n).map_err(|e| e.to_string())?);
            }
            for kind in [GradientKind::Feg, GradientKind::DualFeg] {
                worst = worst.max(minimax::form_equivalence_gap(kind, &p, &y0, alpha, n).map_err(|e| e.to_string())?);
            }
        }
    }
    ensure(worst <= 1e-10, || format!("largest form gap {worst:e} > 1e-10"))?;
    within(start.elapsed(), 10)?;
    Ok(format!("largest form gap {worst:.2e} over 50 instances, N = 2..20 ({:.2?})", start.elapsed()))
}

fn rate_bounds() -> Outcome {
    let start = Instant::now();
    let mut worst_dual: f64 = f64::NEG_INFINITY;
    let mut worst_ohm: f64 = f64::NEG_INFINITY;
    for seed in 0..100 {
        let (_, t, y0) = instance(1000 + seed, 8);
        let r2 = fixedpoint::initial_distance_sq(&t, &y0).unwrap();
        let n = 2 + (seed as usize * 7) % 49;
        let dual = fixedpoint::run_dual_ohm(&t, &y0, n).map_err(|e| e.to_string())?;
        let last = *dual.metric(RESIDUAL_SQ).last().unwrap();
        worst_dual = worst_dual.max(last - fixedpoint::rate_bound(r2, n as f64));
        let ohm = fixedpoint::run_ohm(&t, &y0, n).map_err(|e| e.to_string())?;
        for (k, v) in ohm.metric(RESIDUAL_SQ).iter().enumerate().skip(1) {
            worst_ohm = worst_ohm.max(v - fixedpoint::rate_bound(r2, k as f64));
            worst_ohm = worst_ohm.max(v - fixedpoint::rate_bound(r2, (k + 1) as f64));
        }
    }
    ensure(worst_dual <= 1e-9, || format!("Dual-OHM exceeds its bound by {worst_dual:e}"))?;
    ensure(worst_ohm <= 1e-9, || format!("OHM exceeds its bound by {worst_ohm:e}"))?;
    let tight = fixedpoint::run_dual_ohm(&fixedpoint::negation(1), &[1.0], 3).map_err(|e| e.to_string())?;
    let value = *tight.metric(RESIDUAL_SQ).last().unwrap();
    ensure((value - 4.0 / 9.0).abs() <= 1e-12, || format!("T = -I, N = 3 gives {value}, expected 4/9"))?;
    within(start.elapsed(), 10)?;
    Ok(format!(
        "bound excess Dual-OHM {worst_dual:.2e}, OHM {worst_ohm:.2e} over 100 instances; T = -I, N = 3 residual^2 = {value:.15} ({:.2?})",
        start.elapsed()
    ))
}

fn h_dual_structure() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 2..=30 {
        let ohm = named_hmatrix(FixedPointKind::Ohm, n).map_err(|e| e.to_string())?;
        let dual = named_hmatrix(FixedPointKind::DualOhm, n).map_err(|e| e.to_string())?;
        worst = worst.max(anti_transpose(&ohm).max_abs_diff(&dual));
        let (a, b) = (named_hmatrix_exact(FixedPointKind::Ohm, n).unwrap(), named_hmatrix_exact(FixedPointKind::DualOhm, n).unwrap());
        let m = a.len();
        for k in 0..m {
            for j in 0..=k {
                ensure(a[k][j] == b[m - 1 - j][m - 1 - k], || format!("exact anti-transpose fails at N = {n}"))?;
            }
        }
        for alpha_l in [0.25, 0.5, 0.9, 1.0] {
            let feg = named_gradient_hmatrix(GradientKind::Feg, n, alpha_l).map_err(|e| e.to_string())?;
            let dfeg = named_gradient_hmatrix(GradientKind::DualFeg, n, alpha_l).map_err(|e| e.to_string())?;
            worst = worst.max(anti_transpose(&feg).max_abs_diff(&dfeg));
        }
    }
    ensure(worst <= 1e-14, || format!("largest entry gap {worst:e} > 1e-14"))?;
    Ok(format!("largest entry gap {worst:.2e} for N = 2..30, alpha L in {{0.25, 0.5, 0.9, 1}}; exact rationals equal"))
}

fn lyapunov() -> Outcome {
    let (mut u_inc, mut v_inc, mut v_last, mut f_inc, mut f_last, mut mi_li): (f64, f64, f64, f64, f64, f64) =
        (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY);
    let rel = |s: &fixedpoint::LyapunovSeries| {
        s.max_increase() / s.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()))
    };
    for seed in 0..100 {
        let (p, t, y0) = instance(2000 + seed, 8);
        let n = 2 + (seed as usize * 5) % 39;
        let ohm = fixedpoint::run_ohm(&t, &y0, n).map_err(|e| e.to_string())?;
        let u = fixedpoint::lyapunov_series(LyapunovKind::UOhm, &t, &ohm).map_err(|e| e.to_string())?;
        u_inc = u_inc.max(rel(&u));
        let dual = fixedpoint::run_dual_ohm(&t, &y0, n).map_err(|e| e.to_string())?;
        let v = fixedpoint::lyapunov_series(LyapunovKind::VDualOhm, &t, &dual).map_err(|e| e.to_string())?;
        v_inc = v_inc.max(rel(&v));
        v_last = v_last.max(v.last().abs());
        let alpha = 1.0 / p.lipschitz().unwrap();
        let feg = minimax::run(MinimaxMethod::DualFeg, &p, &y0, alpha, n).map_err(|e| e.to_string())?;
        let w = minimax::dual_feg_lyapunov(&p, &feg, alpha).map_err(|e| e.to_string())?;
        f_inc = f_inc.max(rel(&w));
        f_last = f_last.min(w.last());
        mi_li = mi_li.min(w.mi.iter().chain(&w.li).copied().fold(f64::INFINITY, f64::min));
    }
    ensure(u_inc <= 1e-10, || format!("U increases by {u_inc:e} (relative)"))?;
    ensure(v_inc <= 1e-10, || format!("Dual-OHM V increases by {v_inc:e} (relative)"))?;
    ensure(v_last <= 1e-12, || format!("|V_(N-1)| = {v_last:e} > 1e-12"))?;
    ensure(f_inc <= 1e-10, || format!("Dual-FEG V increases by {f_inc:e} (relative)"))?;
    ensure(f_last >= -1e-9, || format!("Dual-FEG V_(N-1) = {f_last:e} < -1e-9"))?;
    ensure(mi_li >= -1e-10, || format!("min(MI, LI) = {mi_li:e} < -1e-10"))?;
    Ok(format!(
        "max relative increase U {u_inc:.1e}, V {v_inc:.1e}, Dual-FEG V {f_inc:.1e}; |V_(N-1)| <= {v_last:.1e}; \
         Dual-FEG V_(N-1) >= {f_last:.1e}; min(MI, LI) = {mi_li:.1e} over 100 instances"
    ))
}

/// A random strictly interior diagonal-product vector.
fn random_interior_p(rng: &mut Prng, n: usize) -> PVector {
    let nf = n as f64;
    let mut p = vec![1.0 / nf];
    for k in 2..n {
        let r = nf - k as f64 + 1.0;
        let lo = 1.0 / r;
        let hi = ((r - 1.0) * p[k - 2] + 1.0) / r;
        p.push(lo + uniform(rng, 0.05, 0.95) * (hi - lo));
    }
    PVector::new(n, p).unwrap()
}

fn family_synthesis() -> Outcome {
    let start = Instant::now();
    let mut rng = prng(5);
    let (mut resid, mut lam, mut excess): (f64, f64, f64) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for n in 3..=15 {
        for i in 0..20 {
            let p = random_interior_p(&mut rng, n);
            ensure(p.is_interior(), || format!("sampled p is not interior at N = {n}"))?;
            let h = family::synthesize(&p).map_err(|e| e.to_string())?;
            let cert = family::certify(&h, &p).map_err(|e| e.to_string())?;
            resid = resid.max(cert.max_residual).max(cert.probe_residual);
            lam = lam.min(cert.lambdas.min());
            let (_, t, y0) = instance(3000 + 20 * n as u64 + i, 6);
            let run = run_fp_hmatrix(&h, &t, &y0).map_err(|e| e.to_string())?;
            let r2 = fixedpoint::initial_distance_sq(&t, &y0).unwrap();
            excess = excess.max(run.metric(RESIDUAL_SQ).last().unwrap() - fixedpoint::rate_bound(r2, n as f64));
        }
    }
    ensure(resid <= 1e-8, || format!("max residual {resid:e} > 1e-8"))?;
    ensure(lam > 0.0, || format!("smallest lambda {lam:e} is not positive"))?;
    ensure(excess <= 1e-9, || format!("terminal residual exceeds 4R^2/N^2 by {excess:e}"))?;
    let mut closed: f64 = 0.0;
    for _ in 0..20 {
        let h = family::synthesize(&random_interior_p(&mut rng, 3)).map_err(|e| e.to_string())?;
        closed = closed.max((h.get(0, 0) * h.get(1, 1) - 1.0 / 3.0).abs());
    }
    ensure(closed <= 1e-12, || format!("N = 3: |h11 h22 - 1/3| = {closed:e}"))?;
    let (mut exact, mut limit): (f64, f64) = (0.0, 0.0);
    for n in 3..=15 {
        for (named, kind) in [(NamedP::Ohm, FixedPointKind::Ohm), (NamedP::DualOhm, FixedPointKind::DualOhm)] {
            let reference = named_hmatrix(kind, n).unwrap();
            let at = family::synthesize(&family::named_pvector(named, n).unwrap()).map_err(|e| e.to_string())?;
            exact = exact.max(at.max_abs_diff(&reference));
            let lim = family::boundary_limit(named, n, 1e-3).map_err(|e| e.to_string())?;
            limit = limit.max(lim.max_abs_diff(&reference));
            let weight = |g: f64| if named == NamedP::Ohm { 1.0 - g } else { g };
            let direct: Vec<f64> = [0.4, 0.1, 0.01, 0.001]
                .iter()
                .map(|&g| {
                    let p = family::named_pvector(NamedP::Interpolate(weight(g)), n).unwrap();
                    family::synthesize(&p).unwrap().max_abs_diff(&reference)
                })
                .collect();
            ensure(direct.windows(2).all(|w| w[1] < w[0]), || format!("offset distances not decreasing at N = {n}: {direct:?}"))?;
        }
    }
    ensure(exact <= 1e-10, || format!("boundary synthesis differs by {exact:e}"))?;
    ensure(limit <= 1e-6, || format!("boundary limit at gamma = 1e-3 differs by {limit:e} > 1e-6"))?;
    within(start.elapsed(), 60)?;
    Ok(format!(
        "max residual {resid:.1e}, min lambda {lam:.2e}, rate excess {excess:.1e} (260 members); N = 3 product gap {closed:.1e}; \
         boundary: exact {exact:.1e}, limit from gamma = 1e-3 offsets {limit:.1e} ({:.2?})",
        start.elapsed()
    ))
}

fn duality_theorem() -> Outcome {
    let mut rng = prng(11);
    let mut worst: f64 = 0.0;
    let mut agree = 0;
    for _ in 0..100 {
        let n = 2 + (uniform(&mut rng, 0.0, 9.0) as usize);
        let h = hduality::random_hmatrix(&mut rng, n - 1).map_err(|e| e.to_string())?;
        let u = hduality::random_weights(&mut rng, n, 0.2, 3.0);
        let g: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vector(&mut rng, 3)).collect();
        let s = hduality::s_value(&h, &u, &g).map_err(|e| e.to_string())?;
        let v = hduality::dualize_weights(&u);
        let t = hduality::t_value(&anti_transpose(&h), &v, &hduality::f_map(&u, &g).unwrap()).map_err(|e| e.to_string())?;
        worst = worst.max((s - t).abs());
    }
    ensure(worst <= 1e-10, || format!("|S - T(F)| = {worst:e} > 1e-10"))?;
    for i in 0..100 {
        let n = 2 + i % 10;
        let (h, u) = match i % 3 {
            0 => (named_hmatrix(FixedPointKind::Ohm, n).unwrap(), ProofWeights::ohm(n)),
            1 => {
                let mut h = named_hmatrix(FixedPointKind::Ohm, n).unwrap();
                let (k, j) = (n - 2, (i / 3) % (n - 1));
                h.set(k, j.min(k), h.get(k, j.min(k)) + uniform(&mut rng, -0.2, 0.2));
                (h, ProofWeights::ohm(n))
            }
            _ => (hduality::random_hmatrix(&mut rng, n - 1).unwrap(), hduality::random_weights(&mut rng, n, 0.2, 3.0)),
        };
        let r = hduality::verify_duality(&h, &u, 1, i as u64).map_err(|e| e.to_string())?;
        ensure(r.psd_agree, || format!("PSD status differs: min eigenvalues {:e} and {:e}", r.min_eig_s, r.min_eig_t))?;
        if r.min_eig_s >= -1e-9 {
            agree += 1;
        }
    }
    let mut margin = f64::INFINITY;
    for n in 2..=30 {
        let s = hduality::s_form(&named_hmatrix(FixedPointKind::Ohm, n).unwrap(), &ProofWeights::ohm(n)).unwrap();
        let t = hduality::t_form(&named_hmatrix(FixedPointKind::DualOhm, n).unwrap(), &ProofWeights::dual_ohm(n)).unwrap();
        let (a, b) = (s.min_eigen().unwrap(), t.min_eigen().unwrap());
        ensure(a >= -1e-9 && b >= -1e-9, || format!("named certificate not PSD at N = {n}: {a:e}, {b:e}"))?;
        margin = margin.min(a).min(b);
    }
    Ok(format!(
        "max |S - T(F)| = {worst:.1e} over 100 draws; PSD status agrees on 100 triples ({agree} PSD); \
         named certificates min eigenvalue {margin:.1e} for N <= 30"
    ))
}

fn terminal_identity() -> Outcome {
    let mut rng = prng(21);
    let mut linear: Vec<(&str, f64)> = Vec::new();
    let bilinear = make_problem(&ProblemSpec::BilinearUv).unwrap();
    let x0 = unit_vector(&mut rng, 2);
    linear.push(("bilinear uv", minimax::terminal_match_linear(&bilinear, &x0, 0.005, 2000).map_err(|e| e.to_string())?));
    let m = gaussian_matrix(&mut rng, 6, 4);
    let bm = bilinear_matrix(&m).unwrap();
    let alpha = 1.0 / haldual::operators::operator_norm(&m);
    let x0 = unit_vector(&mut rng, 10);
    linear.push(("bilinear 6x4", minimax::terminal_match_linear(&bm, &x0, alpha, 2000).map_err(|e| e.to_string())?));
    for n in [10, 50] {
        let p = ouyang_xu(n, 0.0).unwrap();
        let x0 = unit_vector(&mut rng, p.dim());
        linear.push(("ouyang-xu", minimax::terminal_match_linear(&p, &x0, 1.0, 2000).map_err(|e| e.to_string())?));
    }
    let worst = linear.iter().map(|(_, g)| *g).fold(0.0, f64::max);
    ensure(worst <= 1e-8, || format!("linear terminal gaps {linear:?} exceed 1e-8"))?;
    let usv = make_problem(&ProblemSpec::USquaredV).unwrap();
    let mut nonlinear = Vec::new();
    for n in [500, 1000, 2000] {
        nonlinear.push(minimax::terminal_gap(&usv, &[-1.0, 1.0], 0.05, n).map_err(|e| e.to_string())?);
    }
    let least = nonlinear.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(least > 1e-6, || format!("u^2 v terminal gaps {nonlinear:?} not above 1e-6"))?;
    Ok(format!("linear relative gaps <= {worst:.1e}; u^2 v gaps at N = 500, 1000, 2000: {}", nonlinear.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>().join(", ")))
}

fn ode_suite() -> Outcome {
    let start = Instant::now();
    let rot = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
    let a = MonotoneMap::linear(rot.clone()).unwrap();
    let traj = ode::integrate_anchor(&a, &[1.0, 0.0], 10.0, 10_000).map_err(|e| e.to_string())?;
    let oracle = ode::oracle_error(&traj, &rot).map_err(|e| e.to_string())?;
    ensure(oracle <= 1e-6, || format!("anchor oracle error {oracle:e} > 1e-6"))?;
    let (mut rate_excess, mut violations) = (f64::NEG_INFINITY, 0usize);
    for seed in 0..30u64 {
        let t_end = [1.0, 5.0, 20.0][seed as usize % 3];
        let d = 1 + (seed as usize) % 8;
        let p = random_linear_monotone(d, 4000 + seed, 0.0, true).unwrap();
        let x0 = gaussian_vector(&mut prng(seed), d);
        let mut traj = ode::integrate_dual_anchor(&p.grad, &x0, t_end, 10_000).map_err(|e| e.to_string())?;
        ode::monitors(&mut traj, &p.grad).map_err(|e| e.to_string())?;
        violations += ode::count_increases(traj.monitor("V")) + ode::count_increases(traj.monitor("Psi"));
        let (lhs, bound, slack) = ode::terminal_rate(&traj, &p.grad, p.known_saddle().unwrap(), 1e-8);
        rate_excess = rate_excess.max(lhs - bound - slack);
    }
    ensure(rate_excess <= 0.0, || format!("dual-anchor rate exceeded by {rate_excess:e}"))?;
    ensure(violations == 0, || format!("{violations} monotonicity violations of V or Psi"))?;
    let mut decay: f64 = f64::NEG_INFINITY;
    for seed in 0..10u64 {
        let p = random_linear_monotone(3, 5000 + seed, 0.1, true).unwrap();
        let x0 = gaussian_vector(&mut prng(seed), 3);
        let traj = ode::integrate_dual_anchor(&p.grad, &x0, 10.0, 10_000).map_err(|e| e.to_string())?;
        decay = decay.max(ode::decay_violation(&traj, &p.grad, 0.1).map_err(|e| e.to_string())?);
    }
    ensure(decay <= 1e-8, || format!("strong decay exceeded by {decay:e}"))?;
    let deltas = [1e-1, 1e-2, 1e-3];
    let lin = random_linear_monotone(3, 6, 0.0, true).unwrap();
    let y_lin = ode::yosida_sequence(&lin.grad, &deltas, &[1.0, 0.0, -1.0], 5.0, 10_000).map_err(|e| e.to_string())?;
    let l1 = MonotoneMap::l1_subgradient(3, 1.0).unwrap();
    let y_l1 = ode::yosida_sequence(&l1, &deltas, &[2.0, -0.5, 1.0], 5.0, 10_000).map_err(|e| e.to_string())?;
    ensure(y_lin.max_ratio < 1.0 && y_l1.max_ratio < 1.0, || {
        format!("Yosida ratios {:.3} (linear), {:.3} (l1) not below 1", y_lin.max_ratio, y_l1.max_ratio)
    })?;
    within(start.elapsed(), 30)?;
    Ok(format!(
        "oracle error {oracle:.1e}; rate margin {:.1e} and 0 V/Psi violations on 30 instances; strong decay excess {decay:.1e}; \
         Yosida ratios {:.3} (linear), {:.3} (l1) ({:.2?})",
        -rate_excess,
        y_lin.max_ratio,
        y_l1.max_ratio,
        start.elapsed()
    ))
}

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn worst_case_bilinear() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::load(&config_path("ouyang_xu.toml")).map_err(|e| e.to_string())?;
    ensure(
        matches!(cfg.problem, ProblemSpec::OuyangXu { n: 50, .. }) && cfg.alpha == Some(1.0) && cfg.iterations == 2000,
        || "config is not the n = 50, alpha = 1, N = 2000 setup".into(),
    )?;
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let check = report.checks.iter().find(|c| c.method == "feg").ok_or("no FEG bound check")?;
    ensure(check.passed && check.scope == "all", || format!("FEG above its bound (worst ratio {})", check.worst_ratio))?;
    let f = *report.series("feg").unwrap().values.last().unwrap();
    let d = *report.series("dual-feg").unwrap().values.last().unwrap();
    let rel = (f - d).abs() / f.abs();
    ensure(rel <= 1e-6, || format!("terminal grad_norm_sq differ by {rel:e} relative"))?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    report.write_csv(&mut a).map_err(|e| e.to_string())?;
    run_experiment(&cfg).map_err(|e| e.to_string())?.write_csv(&mut b).map_err(|e| e.to_string())?;
    ensure(a == b, || "CSV differs between two runs".into())?;
    within(start.elapsed(), 60)?;
    Ok(format!(
        "FEG below bound at every k (worst ratio {:.3}); terminal {GRAD_NORM_SQ} {f:.3e} vs {d:.3e} (rel {rel:.1e}); CSV identical ({} bytes, {:.2?})",
        check.worst_ratio,
        a.len(),
        start.elapsed()
    ))
}

fn composed() -> Outcome {
    let mut excess = f64::NEG_INFINITY;
    for seed in 0..50u64 {
        let (_, t, y0) = instance(6000 + seed, 8);
        let n = 4 + (seed as usize * 3) % 27;
        let np = 2 + (seed as usize) % (n - 2);
        let run = fixedpoint::run_composed(&t, &y0, n, np).map_err(|e| e.to_string())?;
        let r2 = fixedpoint::initial_distance_sq(&t, &y0).unwrap();
        excess = excess.max(run.metric(RESIDUAL_SQ).last().unwrap() - fixedpoint::rate_bound(r2, n as f64));
    }
    ensure(excess <= 1e-9, || format!("composed terminal residual exceeds 4R^2/N^2 by {excess:e}"))?;
    let mut gaps = Vec::new();
    for n in 4..=12 {
        let (lhs, q) = family::composed_negative_control(n).map_err(|e| e.to_string())?;
        gaps.push((lhs - q).abs());
    }
    let least = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(least > 1e-6, || format!("column-sum identity unexpectedly holds (gap {least:e})"))?;
    Ok(format!("rate excess {excess:.1e} over 50 instances; column-sum identity violated by >= {least:.3} for N = 4..12"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("form equivalence", form_equivalence),
        ("exact rate bounds", rate_bounds),
        ("H-dual structure", h_dual_structure),
        ("Lyapunov certificates", lyapunov),
        ("family synthesis", family_synthesis),
        ("H-duality theorem", duality_theorem),
        ("linear terminal identity", terminal_identity),
        ("ODE suite", ode_suite),
        ("worst-case bilinear reproduction", worst_case_bilinear),
        ("composed method", composed),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
