//! Per-run records of iterates and metrics.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::Result;
use crate::numerics::DenseVector;

/// Squared fixed-point residual `||y_k - T y_k||^2`.
pub const RESIDUAL_SQ: &str = "residual_sq";
/// Squared saddle-gradient norm `||A x_k||^2`.
pub const GRAD_NORM_SQ: &str = "grad_norm_sq";

/// Iterates and metric series of one algorithm run.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    pub method: String,
    /// Integer-indexed iterates (`y_k` for fixed-point methods, `x_k` for gradient methods).
    pub iterates: Vec<DenseVector>,
    /// Half-step iterates `x_{k+1/2}`, when retained.
    pub half_iterates: Option<Vec<DenseVector>>,
    /// Resolvent points `x_{k+1} = J(y_k)` of proximal forms.
    pub resolvent_points: Option<Vec<DenseVector>>,
    /// Auxiliary sequence `z_k` of the dual methods.
    pub aux: Option<Vec<DenseVector>>,
    pub metrics: BTreeMap<String, Vec<f64>>,
    /// Operator evaluations performed by the update rule itself.
    pub evals: usize,
    /// Extra evaluations made only to record metrics.
    pub monitor_evals: usize,
    pub notes: Vec<String>,
}

impl Trace {
    pub fn new(method: &str) -> Self {
        Self { method: method.to_string(), ..Self::default() }
    }

    pub fn last(&self) -> &DenseVector {
        self.iterates.last().expect("trace has at least the initial point")
    }

    pub fn metric(&self, name: &str) -> &[f64] {
        self.metrics.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn push_metric(&mut self, name: &str, value: f64) {
        self.metrics.entry(name.to_string()).or_default().push(value);
    }

    /// Writes the metric series as CSV with columns `iter,metric,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "metric", "value"])?;
        for (name, series) in &self.metrics {
            for (k, v) in series.iter().enumerate() {
                w.write_record([k.to_string(), name.clone(), format_value(*v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Round-trip exact text form for CSV values.
pub fn format_value(v: f64) -> String {
    format!("{v:e}")
}

/// Largest distance between corresponding entries of two iterate sequences.
pub fn max_sequence_gap(a: &[DenseVector], b: &[DenseVector]) -> f64 {
    assert_eq!(a.len(), b.len(), "sequences have different lengths");
    a.iter().zip(b).map(|(x, y)| crate::numerics::dist(x, y)).fold(0.0, f64::max)
}
