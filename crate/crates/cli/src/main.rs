use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use haldual::family::{self, NamedP, PVector};
use haldual::fixedpoint::{self, LyapunovKind};
use haldual::harness::{run_experiment, ExperimentConfig, ExperimentReport};
use haldual::hduality::{self, ProofWeights};
use haldual::hmatrix::{named_hmatrix, named_hmatrix_exact, HMatrixDump};
use haldual::minimax::{self, MinimaxMethod};
use haldual::numerics::{norm_sq, sub};
use haldual::ode::{self, OdeModel};
use haldual::operators::{make_problem, nonexpansive_from_monotone, ProblemSpec};
use haldual::rng::{prng, unit_vector};
use haldual::{plot, Error, FixedPointKind};

#[derive(Parser)]
#[command(name = "haldual", version, about = "Anchored fixed-point and extragradient methods, their H-duals, and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments from config files, write CSV (and SVG) outputs, and check the bounds.
    Run(RunArgs),
    /// Synthesize and certify a member of the optimal family.
    Synthesize(SynthArgs),
    /// Check Lyapunov, PSD and duality certificates.
    Verify(VerifyArgs),
    /// Integrate a continuous-time model and write the trajectory CSV.
    Ode(OdeArgs),
    /// Render SVG plots from an experiment CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config files; several run concurrently.
    #[arg(long = "config", required = true, num_args = 1..)]
    configs: Vec<PathBuf>,
    /// Overrides the seed of every config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Multiplies the iteration count of every config.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Skip SVG output.
    #[arg(long)]
    no_plot: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct SynthArgs {
    /// Horizon `N`.
    #[arg(long)]
    n: usize,
    /// Diagonal products `p_1..p_(N-1)`, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["gamma", "named"])]
    p: Option<Vec<f64>>,
    /// Interpolation weight toward OHM's diagonal products.
    #[arg(long, conflicts_with = "named")]
    gamma: Option<f64>,
    /// A boundary method: `ohm` or `dual-ohm`.
    #[arg(long)]
    named: Option<String>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Largest horizon checked.
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Problem for trajectory certificates, `kind:key=value,...`.
    #[arg(long, default_value = "random_linear_monotone:d=6,seed=1,affine=true")]
    problem: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random draws for the duality identity.
    #[arg(long, default_value_t = 100)]
    trials: usize,
}

#[derive(Args)]
struct OdeArgs {
    #[arg(long, value_parser = ["anchor", "dual-anchor", "dual-anchor-yosida"])]
    model: String,
    /// Horizon `T`.
    #[arg(long = "T")]
    t_end: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    /// Problem spec, `kind:key=value,...`.
    #[arg(long)]
    problem: String,
    /// Yosida parameter for `dual-anchor-yosida`.
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    /// Seed of the random unit starting point.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Experiment CSV with columns method,iter,metric,value.
    csv: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

enum Failure {
    Check,
    Input(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Synthesize(a) => synthesize(a),
        Command::Verify(a) => verify(a),
        Command::Ode(a) => integrate(a),
        Command::Plot(a) => plot_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn prepare(path: &Path, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(Error::Config(format!("scale must be positive, got {}", args.scale)));
    }
    cfg.iterations = (cfg.iterations as f64 * args.scale).round() as usize;
    cfg.plot &= !args.no_plot;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cfg: &ExperimentConfig, out: &Path) -> Result<(ExperimentReport, PathBuf), Error> {
    let report = run_experiment(cfg)?;
    let csv = out.join(format!("{}.csv", cfg.name));
    report.write_csv(BufWriter::new(File::create(&csv)?))?;
    if cfg.plot && report.series.iter().any(|s| s.values.len() > 1) {
        plot::plot_csv(&csv, out)?;
    }
    Ok((report, csv))
}

fn run(args: RunArgs) -> Outcome {
    let configs = args.configs.iter().map(|p| prepare(p, &args)).collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(&args.out)?;
    let results: Vec<Result<(ExperimentReport, PathBuf), Error>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs.iter().map(|cfg| s.spawn(|| execute(cfg, &args.out))).collect();
        handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
    });
    let mut index = String::from("name,csv,passed,elapsed_s\n");
    let mut all_passed = true;
    for r in results {
        let (report, csv) = r?;
        print!("{}", report.summary());
        println!("  wrote {} ({:.2?})", csv.display(), report.elapsed);
        all_passed &= report.passed();
        index.push_str(&format!("{},{},{},{:.3}\n", report.name, csv.display(), report.passed(), report.elapsed.as_secs_f64()));
    }
    std::fs::write(args.out.join("index.csv"), index)?;
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn synthesize(args: SynthArgs) -> Outcome {
    let p = match (&args.p, args.gamma, args.named.as_deref()) {
        (Some(p), _, _) => PVector::new(args.n, p.clone())?,
        (None, Some(g), _) => family::named_pvector(NamedP::Interpolate(g), args.n)?,
        (None, None, Some("ohm")) => family::named_pvector(NamedP::Ohm, args.n)?,
        (None, None, Some("dual-ohm")) => family::named_pvector(NamedP::DualOhm, args.n)?,
        (None, None, Some(other)) => return Err(Error::Config(format!("unknown named method `{other}`")).into()),
        (None, None, None) => return Err(Error::Config("one of --p, --gamma or --named is required".into()).into()),
    };
    let h = family::synthesize(&p)?;
    let cert = family::certify(&h, &p)?;
    let exact = match args.named.as_deref() {
        Some("ohm") => Some(named_hmatrix_exact(FixedPointKind::Ohm, args.n)?),
        Some("dual-ohm") => Some(named_hmatrix_exact(FixedPointKind::DualOhm, args.n)?),
        _ => None,
    };
    let mut out = open_out(args.out.as_deref())?;
    match args.format {
        Format::Csv => out.write_all(h.to_csv().as_bytes())?,
        Format::Json => {
            let name = args.named.clone().unwrap_or_else(|| format!("family-N{}", args.n));
            writeln!(out, "{}", HMatrixDump::new(&name, &h, exact.as_deref()).to_json())?;
        }
    }
    out.flush()?;
    let floor = if p.is_interior() { 0.0 } else { -1e-12 };
    let ok = cert.passes(1e-8) && cert.lambdas.min() > floor;
    eprintln!(
        "[{}] certificate: max residual {:e}, probe residual {:e}, min lambda {:e}, PSD margin {:e}",
        if ok { "PASS" } else { "FAIL" },
        cert.max_residual,
        cert.probe_residual,
        cert.lambdas.min(),
        cert.psd_margin
    );
    if ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn verify(args: VerifyArgs) -> Outcome {
    if args.n < 3 {
        return Err(Error::Config("--n must be at least 3".into()).into());
    }
    let problem = make_problem(&ProblemSpec::parse_inline(&args.problem)?)?;
    let x0 = unit_vector(&mut prng(args.seed), problem.dim());
    let mut failed = 0;
    let mut report = |name: &str, ok: bool, detail: String| {
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failed += usize::from(!ok);
    };
    if problem.grad.affine_parts().is_some() {
        let t = nonexpansive_from_monotone(&problem.grad, 1.0)?;
        let (mut u_inc, mut v_inc, mut v_last) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
        for n in 2..=args.n {
            let u = fixedpoint::lyapunov_series(LyapunovKind::UOhm, &t, &fixedpoint::run_ohm(&t, &x0, n)?)?;
            let v = fixedpoint::lyapunov_series(LyapunovKind::VDualOhm, &t, &fixedpoint::run_dual_ohm(&t, &x0, n)?)?;
            u_inc = u_inc.max(u.max_increase());
            v_inc = v_inc.max(v.max_increase());
            v_last = v_last.max(v.last().abs());
        }
        report("OHM U nonincreasing", u_inc <= 1e-10, format!("max increase {u_inc:e}"));
        report("Dual-OHM V nonincreasing", v_inc <= 1e-10 && v_last <= 1e-12, format!("max increase {v_inc:e}, |V_(N-1)| {v_last:e}"));
    }
    if let Some(l) = problem.lipschitz() {
        let alpha = 1.0 / l;
        let trace = minimax::run(MinimaxMethod::DualFeg, &problem, &x0, alpha, args.n)?;
        let w = minimax::dual_feg_lyapunov(&problem, &trace, alpha)?;
        let low = w.mi.iter().chain(&w.li).copied().fold(f64::INFINITY, f64::min);
        report(
            "Dual-FEG V nonincreasing",
            w.max_increase() <= 1e-10 && w.last() >= -1e-9 && low >= -1e-10,
            format!("max increase {:e}, V_(N-1) {:e}, min(MI, LI) {low:e}", w.max_increase(), w.last()),
        );
        if let Some(xs) = problem.known_saddle() {
            let r2 = norm_sq(&sub(&x0, xs));
            let g = *trace.metric(haldual::trace::GRAD_NORM_SQ).last().unwrap();
            let b = minimax::gradient_bound(r2, alpha, args.n);
            report("Dual-FEG terminal bound", g <= b * (1.0 + 1e-9), format!("{g:e} <= {b:e}"));
        }
    }
    let mut margin = f64::INFINITY;
    for n in 2..=args.n {
        let s = hduality::s_form(&named_hmatrix(FixedPointKind::Ohm, n)?, &ProofWeights::ohm(n))?;
        let t = hduality::t_form(&named_hmatrix(FixedPointKind::DualOhm, n)?, &ProofWeights::dual_ohm(n))?;
        margin = margin.min(s.min_eigen()?).min(t.min_eigen()?);
    }
    report("named certificates PSD", margin >= -1e-9, format!("min eigenvalue {margin:e}"));
    let mut rng = prng(args.seed);
    let mut worst: f64 = 0.0;
    let mut agree = true;
    for i in 0..args.trials {
        let n = 2 + i % args.n.min(12);
        let h = hduality::random_hmatrix(&mut rng, n - 1)?;
        let u = hduality::random_weights(&mut rng, n, 0.2, 3.0);
        let r = hduality::verify_duality_with(&h, &u, 1, &mut rng, 3)?;
        worst = worst.max(r.max_discrepancy);
        agree &= r.psd_agree;
    }
    report("duality identity", worst <= 1e-10 && agree, format!("max relative |S - T(F)| {worst:e} over {} draws", args.trials));
    let mut resid: f64 = 0.0;
    for n in 3..=args.n {
        for named in [NamedP::Ohm, NamedP::DualOhm, NamedP::Interpolate(0.5)] {
            let p = family::named_pvector(named, n)?;
            let cert = family::certify(&family::synthesize(&p)?, &p)?;
            resid = resid.max(cert.max_residual.max(cert.probe_residual));
        }
    }
    report("family certificates", resid <= 1e-8, format!("max residual {resid:e}"));
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn integrate(args: OdeArgs) -> Outcome {
    let model = OdeModel::from_id(&args.model).expect("restricted by the parser");
    let problem = make_problem(&ProblemSpec::parse_inline(&args.problem)?)?;
    let a = &problem.grad;
    let x0 = unit_vector(&mut prng(args.seed), problem.dim());
    let mut traj = match model {
        OdeModel::Anchor => ode::integrate_anchor(a, &x0, args.t_end, args.steps)?,
        OdeModel::DualAnchor => ode::integrate_dual_anchor(a, &x0, args.t_end, args.steps)?,
        OdeModel::DualAnchorYosida => ode::integrate_dual_anchor_yosida(a, args.delta, &x0, args.t_end, args.steps)?,
    };
    let op = match model {
        OdeModel::DualAnchorYosida => haldual::operators::yosida(a, args.delta)?,
        _ => a.clone(),
    };
    let mut ok = true;
    if model != OdeModel::Anchor {
        ode::monitors(&mut traj, &op)?;
        let (v, psi) = (ode::count_increases(traj.monitor("V")), ode::count_increases(traj.monitor("Psi")));
        eprintln!("[{}] monitors: {v} V increases, {psi} Psi increases", if v + psi == 0 { "PASS" } else { "FAIL" });
        ok &= v + psi == 0;
    }
    if let Some(xs) = a.known_zero.as_ref() {
        let (lhs, bound, slack) = ode::terminal_rate(&traj, &op, xs, 1e-8);
        let pass = lhs <= bound + slack;
        eprintln!("[{}] terminal rate: {lhs:e} <= {bound:e} + {slack:e}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    }
    let mut out = open_out(args.out.as_deref())?;
    traj.write_csv(&mut out)?;
    out.flush()?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn plot_cmd(args: PlotArgs) -> Outcome {
    for p in plot::plot_csv(&args.csv, &args.out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
