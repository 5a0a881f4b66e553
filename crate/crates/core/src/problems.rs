//! Benchmark objectives.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::injection::InjectionRequest;
use crate::rng::GaussianStream;

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A deterministic objective `f: Rⁿ → R` that counts its evaluations.
pub struct Objective {
    name: String,
    dim: usize,
    eval: Arc<EvalFn>,
    optimum: Option<DVector<f64>>,
    f_opt: Option<f64>,
    evals: AtomicU64,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("evals", &self.eval_count())
            .finish()
    }
}

impl Objective {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Objective {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            optimum: None,
            f_opt: None,
            evals: AtomicU64::new(0),
        }
    }

    pub fn with_optimum(mut self, optimum: DVector<f64>, f_opt: f64) -> Self {
        self.optimum = Some(optimum);
        self.f_opt = Some(f_opt);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn optimum(&self) -> Option<&DVector<f64>> {
        self.optimum.as_ref()
    }

    pub fn f_opt(&self) -> Option<f64> {
        self.f_opt
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.eval)(x)
    }

    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

/// `Σ xᵢ²`, minimum 0 at the origin.
pub fn sphere(n: usize) -> Result<Objective> {
    if n == 0 {
        return Err(Error::InvalidDimension(n));
    }
    Ok(
        Objective::new("sphere", n, |x| x.iter().map(|v| v * v).sum())
            .with_optimum(DVector::zeros(n), 0.0),
    )
}

/// Chained Rosenbrock `Σ 100 (x_{i+1} − xᵢ²)² + (1 − xᵢ)²`, minimum 0 at
/// the all-ones vector.
pub fn rosenbrock(n: usize) -> Result<Objective> {
    if n < 2 {
        return Err(Error::InvalidDimension(n));
    }
    Ok(Objective::new("rosenbrock", n, |x| {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    })
    .with_optimum(DVector::from_element(n, 1.0), 0.0))
}

/// `10 n + Σ (xᵢ² − 10 cos(2π xᵢ))`, minimum 0 at the origin.
pub fn rastrigin(n: usize) -> Result<Objective> {
    if n == 0 {
        return Err(Error::InvalidDimension(n));
    }
    Ok(Objective::new("rastrigin", n, |x| {
        10.0 * x.len() as f64
            + x.iter()
                .map(|v| v * v - 10.0 * (std::f64::consts::TAU * v).cos())
                .sum::<f64>()
    })
    .with_optimum(DVector::zeros(n), 0.0))
}

pub const PROBLEM_NAMES: [&str; 3] = ["sphere", "rosenbrock", "rastrigin"];

pub fn by_name(name: &str, n: usize) -> Result<Objective> {
    match name {
        "sphere" => sphere(n),
        "rosenbrock" => rosenbrock(n),
        "rastrigin" => rastrigin(n),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// `g ∘ f` for a strictly increasing `g`. The optimum location is kept; the
/// optimal value becomes `g(f_opt)`.
pub fn monotone_wrap(obj: Objective, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Objective {
    let inner = Arc::clone(&obj.eval);
    let f_opt = obj.f_opt.map(&g);
    let mut wrapped = Objective::new(obj.name.clone(), obj.dim, move |x| g(inner(x)));
    wrapped.optimum = obj.optimum;
    wrapped.f_opt = f_opt;
    wrapped
}

/// Produces solution requests `optimum + scale · N(0, I)`.
#[derive(Debug, Clone)]
pub struct PerturbedOptimumInjector {
    optimum: DVector<f64>,
    scale: f64,
    rng: GaussianStream,
}

impl PerturbedOptimumInjector {
    pub fn new(obj: &Objective, scale: f64, rng: GaussianStream) -> Result<Self> {
        let optimum = obj.optimum().cloned().ok_or(Error::NoKnownOptimum)?;
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("injection scale {scale}")));
        }
        Ok(PerturbedOptimumInjector {
            optimum,
            scale,
            rng,
        })
    }

    pub fn next_point(&mut self) -> DVector<f64> {
        let mut z = vec![0.0; self.optimum.len()];
        self.rng.fill_gaussian(&mut z);
        &self.optimum + DVector::from_vec(z) * self.scale
    }

    pub fn next_request(&mut self) -> InjectionRequest {
        InjectionRequest::solution(self.next_point())
    }
}
