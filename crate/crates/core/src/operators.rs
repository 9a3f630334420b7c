//! Problem instances: monotone maps, their resolvents and Yosida
//! approximations, nonexpansive maps built from them, saddle operators, and
//! the benchmark generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    self, axpy, dist, dot, eigen_sym, norm, scale, sub, DenseMatrix, DenseVector, Lu,
};
use crate::rng::{self, Prng};

/// Above this dimension spectral quantities are not computed eagerly.
const SMALL_DIM: usize = 64;

/// The concrete rule behind a [`MonotoneMap`].
#[derive(Debug, Clone)]
pub enum Operator {
    /// `x -> M x + c`.
    Affine { m: DenseMatrix, c: DenseVector },
    /// Saddle operator `(2uv, -u^2)` of `L(u, v) = u^2 v`.
    USquaredV,
    /// Saddle operator of `h_delta(u) + <Au - b, v>` with the Huber loss `h_delta`.
    HuberLagrangian { a: DenseMatrix, b: DenseVector, delta: f64 },
    /// Subdifferential of `weight * ||x||_1`; `apply` returns its minimum-norm element.
    L1Subgradient { weight: f64 },
    /// Yosida approximation `(I - J_{delta A}) / delta` of a base map.
    Yosida { base: Box<MonotoneMap>, delta: f64 },
}

/// A monotone operator together with the metadata the algorithms need.
#[derive(Debug, Clone)]
pub struct MonotoneMap {
    pub dim: usize,
    pub op: Operator,
    pub lipschitz: Option<f64>,
    pub strong_mu: f64,
    pub known_zero: Option<DenseVector>,
}

impl MonotoneMap {
    pub fn affine(m: DenseMatrix, c: DenseVector) -> Result<Self> {
        if !m.is_square() || c.len() != m.rows() {
            return Err(Error::Parameter("affine map needs a square matrix and matching offset".into()));
        }
        let dim = m.rows();
        let tol = 1e-10 * (1.0 + m.max_abs());
        let (strong_mu, lipschitz) = if dim <= SMALL_DIM {
            let sym_min = eigen_sym(&m.symmetric_part())?.first().copied().unwrap_or(0.0);
            if sym_min < -tol {
                return Err(Error::Parameter(format!(
                    "matrix is not monotone: symmetric part has eigenvalue {sym_min:e}"
                )));
            }
            (sym_min.max(0.0), Some(operator_norm(&m)))
        } else {
            if !numerics::is_psd(&m.symmetric_part(), tol) {
                return Err(Error::Parameter("matrix is not monotone: symmetric part is indefinite".into()));
            }
            (0.0, None)
        };
        let known_zero = numerics::solve(&m, &scale(&c, -1.0)).ok();
        Ok(Self { dim, op: Operator::Affine { m, c }, lipschitz, strong_mu, known_zero })
    }

    pub fn linear(m: DenseMatrix) -> Result<Self> {
        let d = m.rows();
        let mut map = Self::affine(m, vec![0.0; d])?;
        if map.known_zero.is_none() {
            map.known_zero = Some(vec![0.0; d]);
        }
        Ok(map)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            op: Operator::Affine { m: DenseMatrix::zeros(dim, dim), c: vec![0.0; dim] },
            lipschitz: Some(0.0),
            strong_mu: 0.0,
            known_zero: Some(vec![0.0; dim]),
        }
    }

    pub fn l1_subgradient(dim: usize, weight: f64) -> Result<Self> {
        if weight < 0.0 {
            return Err(Error::Parameter("l1 weight must be nonnegative".into()));
        }
        Ok(Self {
            dim,
            op: Operator::L1Subgradient { weight },
            lipschitz: None,
            strong_mu: 0.0,
            known_zero: Some(vec![0.0; dim]),
        })
    }

    /// Evaluates the map (for set-valued maps, the minimum-norm element).
    pub fn apply(&self, x: &[f64]) -> DenseVector {
        assert_eq!(x.len(), self.dim, "operator dimension mismatch");
        match &self.op {
            Operator::Affine { m, c } => {
                let mut y = m.matvec(x);
                axpy(&mut y, 1.0, c);
                y
            }
            Operator::USquaredV => vec![2.0 * x[0] * x[1], -x[0] * x[0]],
            Operator::HuberLagrangian { a, b, delta } => {
                let n = a.cols();
                let (u, v) = x.split_at(n);
                let nu = norm(u);
                let mut gu = if nu <= *delta { u.to_vec() } else { scale(u, delta / nu) };
                axpy(&mut gu, 1.0, &a.matvec_t(v));
                let gv = sub(b, &a.matvec(u));
                [gu, gv].concat()
            }
            Operator::L1Subgradient { weight } => x
                .iter()
                .map(|&xi| if xi > 0.0 { *weight } else if xi < 0.0 { -*weight } else { 0.0 })
                .collect(),
            Operator::Yosida { base, delta } => {
                let j = base.resolvent(x, *delta).expect("yosida base has a resolvent");
                scale(&sub(x, &j), 1.0 / delta)
            }
        }
    }

    pub fn affine_parts(&self) -> Option<(&DenseMatrix, &[f64])> {
        match &self.op {
            Operator::Affine { m, c } => Some((m, c.as_slice())),
            _ => None,
        }
    }

    pub fn is_affine(&self) -> bool {
        self.affine_parts().is_some()
    }

    /// Prepares `J_{gamma A} = (I + gamma A)^{-1}` for repeated evaluation.
    pub fn resolvent_operator(&self, gamma: f64) -> Result<Resolvent> {
        if !(gamma > 0.0) {
            return Err(Error::Parameter(format!("resolvent scale must be positive, got {gamma}")));
        }
        let kind = match &self.op {
            Operator::Affine { m, c } => {
                let shifted = DenseMatrix::identity(self.dim).add(&m.scaled(gamma));
                ResolventKind::Affine { lu: Lu::new(&shifted)?, offset: scale(c, gamma) }
            }
            Operator::L1Subgradient { weight } => ResolventKind::SoftThreshold { level: gamma * weight },
            Operator::Yosida { base, delta } => ResolventKind::Yosida {
                inner: Box::new(base.resolvent_operator(gamma + delta)?),
                keep: delta / (gamma + delta),
            },
            Operator::USquaredV => return Err(Error::UnsupportedOperator("u_squared_v".into())),
            Operator::HuberLagrangian { .. } => {
                return Err(Error::UnsupportedOperator("huber_lagrangian".into()))
            }
        };
        Ok(Resolvent { gamma, kind })
    }

    /// Returns `x` with `x + gamma A x = y`.
    pub fn resolvent(&self, y: &[f64], gamma: f64) -> Result<DenseVector> {
        Ok(self.resolvent_operator(gamma)?.apply(y))
    }

    /// Empirical monotonicity check on random pairs; returns the smallest
    /// observed `<Ax - Ay, x - y> / ||x - y||^2`.
    pub fn monotonicity_margin(&self, rng: &mut Prng, pairs: usize, radius: f64) -> f64 {
        let mut worst = f64::INFINITY;
        for _ in 0..pairs {
            let x = scale(&rng::gaussian_vector(rng, self.dim), radius);
            let y = scale(&rng::gaussian_vector(rng, self.dim), radius);
            let d = sub(&x, &y);
            let v = dot(&sub(&self.apply(&x), &self.apply(&y)), &d) / dot(&d, &d).max(1e-300);
            worst = worst.min(v);
        }
        worst
    }
}

/// A prepared resolvent `J_{gamma A}`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    pub gamma: f64,
    kind: ResolventKind,
}

#[derive(Debug, Clone)]
enum ResolventKind {
    Affine { lu: Lu, offset: DenseVector },
    SoftThreshold { level: f64 },
    Yosida { inner: Box<Resolvent>, keep: f64 },
}

impl Resolvent {
    pub fn apply(&self, y: &[f64]) -> DenseVector {
        match &self.kind {
            ResolventKind::Affine { lu, offset } => lu.solve(&sub(y, offset)),
            ResolventKind::SoftThreshold { level } => {
                y.iter().map(|&v| v.signum() * (v.abs() - level).max(0.0)).collect()
            }
            ResolventKind::Yosida { inner, keep } => {
                let mut out = scale(y, *keep);
                axpy(&mut out, 1.0 - keep, &inner.apply(y));
                out
            }
        }
    }
}

/// Yosida approximation `A_delta = (I - J_{delta A}) / delta`.
pub fn yosida(map: &MonotoneMap, delta: f64) -> Result<MonotoneMap> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("Yosida parameter must be positive, got {delta}")));
    }
    let lipschitz = Some(map.lipschitz.map_or(1.0 / delta, |l| l.min(1.0 / delta)));
    if let Some((m, c)) = map.affine_parts() {
        let d = map.dim;
        let inv = Lu::new(&DenseMatrix::identity(d).add(&m.scaled(delta)))?.inverse();
        let my = DenseMatrix::identity(d).sub(&inv).scaled(1.0 / delta);
        let cy = inv.matvec(c);
        return Ok(MonotoneMap {
            dim: d,
            op: Operator::Affine { m: my, c: cy },
            lipschitz,
            strong_mu: 0.0,
            known_zero: map.known_zero.clone(),
        });
    }
    map.resolvent_operator(delta)?;
    Ok(MonotoneMap {
        dim: map.dim,
        op: Operator::Yosida { base: Box::new(map.clone()), delta },
        lipschitz,
        strong_mu: 0.0,
        known_zero: map.known_zero.clone(),
    })
}

/// A nonexpansive map `T`.
#[derive(Debug, Clone)]
pub struct NonexpansiveMap {
    pub dim: usize,
    kind: NonexpansiveKind,
    pub known_fix: Option<DenseVector>,
}

#[derive(Debug, Clone)]
enum NonexpansiveKind {
    Reflected(Resolvent),
    Linear(DenseMatrix),
}

impl NonexpansiveMap {
    /// `T y = Q y` for a matrix with operator norm at most one.
    pub fn linear(q: DenseMatrix) -> Result<Self> {
        if !q.is_square() {
            return Err(Error::Parameter("nonexpansive matrix must be square".into()));
        }
        let nrm = operator_norm(&q);
        if nrm > 1.0 + 1e-9 {
            return Err(Error::Parameter(format!("matrix has operator norm {nrm} > 1")));
        }
        let d = q.rows();
        Ok(Self { dim: d, kind: NonexpansiveKind::Linear(q), known_fix: Some(vec![0.0; d]) })
    }

    pub fn apply(&self, y: &[f64]) -> DenseVector {
        match &self.kind {
            NonexpansiveKind::Reflected(j) => {
                let mut out = scale(&j.apply(y), 2.0);
                axpy(&mut out, -1.0, y);
                out
            }
            NonexpansiveKind::Linear(q) => q.matvec(y),
        }
    }
}

/// `T = 2 J_{gamma A} - I`.
pub fn nonexpansive_from_monotone(map: &MonotoneMap, gamma: f64) -> Result<NonexpansiveMap> {
    Ok(NonexpansiveMap {
        dim: map.dim,
        kind: NonexpansiveKind::Reflected(map.resolvent_operator(gamma)?),
        known_fix: map.known_zero.clone(),
    })
}

/// A convex-concave saddle problem through its saddle operator `(grad_u L, -grad_v L)`.
#[derive(Debug, Clone)]
pub struct SaddleProblem {
    pub n: usize,
    pub m: usize,
    pub grad: MonotoneMap,
    /// Region where the Lagrangian is convex-concave, when it is not global.
    pub domain: Option<String>,
}

impl SaddleProblem {
    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn saddle_grad(&self, x: &[f64]) -> DenseVector {
        self.grad.apply(x)
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.grad.lipschitz
    }

    pub fn strong_mu(&self) -> f64 {
        self.grad.strong_mu
    }

    pub fn known_saddle(&self) -> Option<&DenseVector> {
        self.grad.known_zero.as_ref()
    }

    pub fn is_linear(&self) -> bool {
        self.grad.is_affine()
    }
}

/// Serializable description of a benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `L(u, v) = u v`.
    BilinearUv,
    /// `L(u, v) = <u, M v>` for the given rows of `M`.
    BilinearMatrix { rows: Vec<Vec<f64>> },
    /// `L(u, v) = u^2 v`, convex-concave on `[-1, 1] x [0, inf)`.
    USquaredV,
    /// Worst-case bilinear construction of size `n`, optionally with `mu`-strong terms.
    OuyangXu {
        n: usize,
        #[serde(default)]
        mu: f64,
    },
    /// Huber-loss Lagrangian with random data of sizes `n` (primal) and `m` (constraints).
    HuberLagrangian {
        n: usize,
        m: usize,
        #[serde(default = "default_huber_delta")]
        delta: f64,
        seed: u64,
    },
    /// `M = P^T P / d + S + mu I` with Gaussian `P` and skew `S`.
    RandomLinearMonotone {
        d: usize,
        seed: u64,
        #[serde(default)]
        mu: f64,
        #[serde(default)]
        affine: bool,
    },
    /// Subdifferential of `weight * ||x||_1` in dimension `d`.
    L1Norm { d: usize, weight: f64 },
}

fn default_huber_delta() -> f64 {
    0.1
}

impl ProblemSpec {
    /// Parses `kind` or `kind:key=value,key=value`.
    pub fn parse_inline(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut table = toml::Table::new();
        table.insert("kind".into(), toml::Value::String(kind.trim().to_string()));
        for kv in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in problem spec, got `{kv}`")))?;
            let value: toml::Value = format!("v = {}", v.trim())
                .parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("bad value for `{k}`: {e}")))?
                .remove("v")
                .expect("key inserted above");
            table.insert(k.trim().to_string(), value);
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid problem spec `{s}`: {e}")))
    }
}

/// Builds the saddle problem (or, with `m = 0`, the plain monotone map) for a spec.
pub fn make_problem(spec: &ProblemSpec) -> Result<SaddleProblem> {
    match spec {
        ProblemSpec::BilinearUv => {
            let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![-1.0, 0.0]])?;
            let mut grad = MonotoneMap::linear(m)?;
            grad.lipschitz = Some(1.0);
            Ok(SaddleProblem { n: 1, m: 1, grad, domain: None })
        }
        ProblemSpec::BilinearMatrix { rows } => bilinear_matrix(&DenseMatrix::from_rows(rows)?),
        ProblemSpec::USquaredV => Ok(SaddleProblem {
            n: 1,
            m: 1,
            grad: MonotoneMap {
                dim: 2,
                op: Operator::USquaredV,
                lipschitz: None,
                strong_mu: 0.0,
                known_zero: None,
            },
            domain: Some("[-1, 1] x [0, inf)".into()),
        }),
        ProblemSpec::OuyangXu { n, mu } => ouyang_xu(*n, *mu),
        ProblemSpec::HuberLagrangian { n, m, delta, seed } => {
            if *m == 0 || *n == 0 || m >= n {
                return Err(Error::Parameter("huber_lagrangian needs 0 < m < n".into()));
            }
            let mut rng = rng::prng(*seed);
            let a = rng::gaussian_matrix(&mut rng, *m, *n).scaled(1.0 / *n as f64);
            let mut ubar = vec![0.0; *n];
            let support = (*n / 10).max(1);
            let mut idx: Vec<usize> = (0..*n).collect();
            for i in 0..support {
                let j = i + (rng::uniform(&mut rng, 0.0, (*n - i) as f64) as usize).min(*n - i - 1);
                idx.swap(i, j);
                ubar[idx[i]] = rng::uniform(&mut rng, 0.0, 1.0);
            }
            let b = a.matvec(&ubar);
            huber_lagrangian(a, b, *delta)
        }
        ProblemSpec::RandomLinearMonotone { d, seed, mu, affine } => {
            random_linear_monotone(*d, *seed, *mu, *affine)
        }
        ProblemSpec::L1Norm { d, weight } => {
            Ok(SaddleProblem { n: *d, m: 0, grad: MonotoneMap::l1_subgradient(*d, *weight)?, domain: None })
        }
    }
}

/// Saddle operator of `L(u, v) = <u, M v>`.
pub fn bilinear_matrix(m: &DenseMatrix) -> Result<SaddleProblem> {
    let (n, k) = (m.rows(), m.cols());
    if n == 0 || k == 0 {
        return Err(Error::Parameter("bilinear matrix must be nonempty".into()));
    }
    let mut op = DenseMatrix::zeros(n + k, n + k);
    for i in 0..n {
        for j in 0..k {
            op[(i, n + j)] = m[(i, j)];
            op[(n + j, i)] = -m[(i, j)];
        }
    }
    let mut grad = MonotoneMap::linear(op)?;
    grad.known_zero = Some(vec![0.0; n + k]);
    Ok(SaddleProblem { n, m: k, grad, domain: None })
}

/// The anti-banded matrix `A`, vector `b` and vector `g` of the worst-case construction.
pub fn ouyang_xu_data(n: usize) -> Result<(DenseMatrix, DenseVector, DenseVector)> {
    if n < 2 {
        return Err(Error::Parameter("ouyang_xu needs n >= 2".into()));
    }
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, n - 2 - i)] = -0.25;
        a[(i, n - 1 - i)] = 0.25;
    }
    a[(n - 1, 0)] = 0.25;
    let b = vec![0.25; n];
    let mut g = vec![0.0; n];
    g[n - 1] = 0.25;
    Ok((a, b, g))
}

/// Saddle operator of `1/2 u^T (G + mu I) u - g^T u - <Au - b, v> - mu/2 ||v||^2`.
pub fn ouyang_xu(n: usize, mu: f64) -> Result<SaddleProblem> {
    if mu < 0.0 {
        return Err(Error::Parameter("mu must be nonnegative".into()));
    }
    let (a, b, g) = ouyang_xu_data(n)?;
    let gm = a.transpose().matmul(&a).scaled(2.0);
    let mut op = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            op[(i, j)] = gm[(i, j)];
            op[(i, n + j)] = -a[(j, i)];
            op[(n + i, j)] = a[(i, j)];
        }
        op[(i, i)] += mu;
        op[(n + i, n + i)] += mu;
    }
    let c = [scale(&g, -1.0), scale(&b, -1.0)].concat();
    let mut grad = MonotoneMap::affine(op, c)?;
    grad.lipschitz = Some(1.0 + mu);
    grad.strong_mu = mu;
    Ok(SaddleProblem { n, m: n, grad, domain: None })
}

/// Saddle operator of `h_delta(u) + <Au - b, v>`.
pub fn huber_lagrangian(a: DenseMatrix, b: DenseVector, delta: f64) -> Result<SaddleProblem> {
    if b.len() != a.rows() || !(delta > 0.0) {
        return Err(Error::Parameter("huber_lagrangian needs len(b) = rows(A) and delta > 0".into()));
    }
    let (m, n) = (a.rows(), a.cols());
    let lipschitz = 1.0 + operator_norm(&a);
    Ok(SaddleProblem {
        n,
        m,
        grad: MonotoneMap {
            dim: n + m,
            op: Operator::HuberLagrangian { a, b, delta },
            lipschitz: Some(lipschitz),
            strong_mu: 0.0,
            known_zero: None,
        },
        domain: None,
    })
}

/// Random monotone linear (or affine, with a random zero) instance of dimension `d`.
pub fn random_linear_monotone(d: usize, seed: u64, mu: f64, affine: bool) -> Result<SaddleProblem> {
    if d == 0 || mu < 0.0 {
        return Err(Error::Parameter("random_linear_monotone needs d >= 1 and mu >= 0".into()));
    }
    let mut rng = rng::prng(seed);
    let sym_weight = rng::uniform(&mut rng, 0.0, 1.0);
    let p = rng::gaussian_matrix(&mut rng, d, d);
    let q = rng::gaussian_matrix(&mut rng, d, d);
    let psd = p.transpose().matmul(&p).scaled(sym_weight / d as f64);
    let skew = q.sub(&q.transpose()).scaled(1.0 / (2.0 * d as f64).sqrt());
    let m = psd.add(&skew).add(&DenseMatrix::identity(d).scaled(mu));
    let zero = if affine { rng::gaussian_vector(&mut rng, d) } else { vec![0.0; d] };
    let c = scale(&m.matvec(&zero), -1.0);
    let mut grad = MonotoneMap::affine(m, c)?;
    grad.known_zero = Some(zero);
    grad.strong_mu = grad.strong_mu.max(mu);
    Ok(SaddleProblem { n: d, m: 0, grad, domain: None })
}

/// Induced 2-norm: exact through the Gram matrix spectrum for small sizes,
/// power iteration otherwise.
pub fn operator_norm(m: &DenseMatrix) -> f64 {
    if m.cols() <= SMALL_DIM {
        let gram = m.transpose().matmul(m);
        eigen_sym(&gram).ok().and_then(|ev| ev.last().copied()).unwrap_or(0.0).max(0.0).sqrt()
    } else {
        numerics::spectral_norm(m, 5000, 1e-13)
    }
}

/// Largest observed `||Tx - Ty|| / ||x - y||` over random pairs.
pub fn nonexpansive_ratio(t: &NonexpansiveMap, rng: &mut Prng, pairs: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = rng::gaussian_vector(rng, t.dim);
        let y = rng::gaussian_vector(rng, t.dim);
        worst = worst.max(dist(&t.apply(&x), &t.apply(&y)) / dist(&x, &y).max(1e-300));
    }
    worst
}
