use std::io::Write;

use nalgebra::DVector;

use super::config::{InjectionMode, ScenarioConfig};
use crate::engine::{CmaEs, EngineConfig};
use crate::error::{Error, Result};
use crate::injection::InjectionRequest;
use crate::params::StrategyParameters;
use crate::problems::{self, PerturbedOptimumInjector};
use crate::rng::GaussianStream;

/// A run is declared diverged once σ exceeds this value.
pub const DIVERGENCE_SIGMA: f64 = 1e12;

/// Stream index of the injector's random numbers (the engine uses stream 0).
const INJECTOR_STREAM: u64 = 1;

pub const CSV_HEADER: [&str; 9] = [
    "iter",
    "evals",
    "best_f",
    "median_f",
    "worst_f",
    "sigma",
    "psigma_ratio",
    "cond",
    "clips",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    TargetReached,
    BudgetExhausted,
    Diverged,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::TargetReached => 0,
            RunStatus::BudgetExhausted => 2,
            RunStatus::Diverged => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RunStatus::TargetReached => "target_reached",
            RunStatus::BudgetExhausted => "budget_exhausted",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub iter: u64,
    pub evals: u64,
    /// Best fitness evaluated so far, injected candidates included.
    pub best_f: f64,
    pub median_f: f64,
    pub worst_f: f64,
    /// Step-size after the update of this iteration.
    pub sigma: f64,
    pub psigma_ratio: f64,
    pub cond: f64,
    pub clips: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub rows: Vec<RunRow>,
    pub status: RunStatus,
    /// Evaluations spent when an internally sampled candidate first reached
    /// the target.
    pub evals_to_target: Option<u64>,
    pub total_evals: u64,
    pub sigma0: f64,
    pub max_sigma: f64,
    /// Largest per-iteration step-size factor `σ_{t+1} / σ_t` applied.
    pub max_sigma_factor: f64,
    pub best_f: f64,
}

impl RunLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.iter.to_string(),
                r.evals.to_string(),
                r.best_f.to_string(),
                r.median_f.to_string(),
                r.worst_f.to_string(),
                r.sigma.to_string(),
                r.psigma_ratio.to_string(),
                r.cond.to_string(),
                r.clips.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

pub(crate) fn build_engine(cfg: &ScenarioConfig) -> Result<CmaEs> {
    let mut params = StrategyParameters::new(cfg.dim, cfg.lambda)?;
    if let Some(d) = cfg.delta_sigma_max {
        params = params.with_delta_sigma_max(d);
    }
    if let Some(c) = cfg.c_y {
        params.c_y = c;
    }
    if let Some(c) = cfg.c_ym {
        params.c_ym = c;
    }
    let config = EngineConfig {
        clip_mode: cfg.clip_policy,
        ..EngineConfig::with_seed(cfg.seed)
    };
    let (m0, sigma0) = cfg.initial_point();
    CmaEs::new(params, config, DVector::from_vec(m0), sigma0)
}

/// Runs the ask–evaluate–tell loop of one scenario.
///
/// Stops when the best internally sampled candidate of an iteration reaches
/// `target_f`, when another full generation would exceed `max_evals`, or when
/// σ exceeds [`DIVERGENCE_SIGMA`] or the state becomes non-finite.
/// Injected candidates are evaluated and ranked like all others but do not
/// count towards the target.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunLog> {
    cfg.validate()?;
    let obj = problems::by_name(&cfg.problem, cfg.dim)?;
    let mut es = build_engine(cfg)?;
    let lambda = es.lambda() as u64;
    let sigma0 = es.state().sigma;

    let mut injector = match cfg.injection_mode {
        InjectionMode::NearOptimum | InjectionMode::Direction | InjectionMode::MeanShift => {
            Some(PerturbedOptimumInjector::new(
                &obj,
                cfg.injection_scale,
                GaussianStream::with_stream(cfg.seed, INJECTOR_STREAM),
            )?)
        }
        InjectionMode::None | InjectionMode::BestEverElitist => None,
    };

    let mut rows = Vec::new();
    let mut evals = 0u64;
    let mut best_f = f64::INFINITY;
    let mut max_sigma = sigma0;
    let mut max_sigma_factor: f64 = 0.0;
    let status = loop {
        if evals + lambda > cfg.max_evals {
            break RunStatus::BudgetExhausted;
        }
        let st = es.state();
        let requests: Vec<InjectionRequest> = match (cfg.injection_mode, injector.as_mut()) {
            (InjectionMode::NearOptimum, Some(inj)) => vec![inj.next_request()],
            (InjectionMode::Direction, Some(inj)) => {
                let v = inj.next_point() - &st.mean;
                if v.iter().all(|&c| c == 0.0) {
                    vec![]
                } else {
                    vec![InjectionRequest::direction(v)]
                }
            }
            (InjectionMode::MeanShift, Some(inj)) => {
                vec![InjectionRequest::mean_shift(inj.next_point())]
            }
            (InjectionMode::BestEverElitist, _) => st
                .best_ever
                .iter()
                .map(|b| InjectionRequest::solution(b.x.clone()))
                .collect(),
            _ => vec![],
        };

        let gen = es.ask(&requests)?;
        let fitness: Vec<f64> = gen
            .candidates
            .iter()
            .map(|x| obj.eval(x.as_slice()))
            .collect();
        evals += lambda;

        let mut sorted = fitness.clone();
        sorted.sort_by(f64::total_cmp);
        best_f = best_f.min(sorted[0]);
        let sampled_best = fitness
            .iter()
            .zip(&gen.injected)
            .filter(|(_, &inj)| !inj)
            .map(|(f, _)| *f)
            .fold(f64::INFINITY, f64::min);

        let report = match es.tell(&gen, &fitness) {
            Ok(r) => r,
            Err(Error::NonFiniteState) => {
                rows.push(RunRow {
                    iter: gen.iteration,
                    evals,
                    best_f,
                    median_f: median(&sorted),
                    worst_f: sorted[sorted.len() - 1],
                    sigma: f64::INFINITY,
                    psigma_ratio: f64::NAN,
                    cond: f64::NAN,
                    clips: 0,
                });
                max_sigma = f64::INFINITY;
                break RunStatus::Diverged;
            }
            Err(e) => return Err(e),
        };
        max_sigma = max_sigma.max(report.sigma);
        max_sigma_factor = max_sigma_factor.max(report.sigma_factor);
        rows.push(RunRow {
            iter: gen.iteration,
            evals,
            best_f,
            median_f: median(&sorted),
            worst_f: sorted[sorted.len() - 1],
            sigma: report.sigma,
            psigma_ratio: report.p_sigma_ratio,
            cond: report.condition_number,
            clips: report.clipped,
        });

        if sampled_best <= cfg.target_f {
            break RunStatus::TargetReached;
        }
        if !(report.sigma <= DIVERGENCE_SIGMA) {
            break RunStatus::Diverged;
        }
    };

    debug_assert_eq!(obj.eval_count(), evals);
    Ok(RunLog {
        evals_to_target: (status == RunStatus::TargetReached).then_some(evals),
        status,
        rows,
        total_evals: evals,
        sigma0,
        max_sigma,
        max_sigma_factor,
        best_f,
    })
}
