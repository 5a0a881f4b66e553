use std::io::Write;

use rayon::prelude::*;

use super::config::ScenarioConfig;
use super::run::{run_scenario, RunStatus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    /// Evaluations to target, or the evaluations spent if it was not reached.
    pub evals_a: u64,
    pub status_a: RunStatus,
    pub evals_b: u64,
    pub status_b: RunStatus,
}

impl SeedOutcome {
    pub fn censored(&self) -> bool {
        self.status_a != RunStatus::TargetReached || self.status_b != RunStatus::TargetReached
    }

    pub fn ratio(&self) -> f64 {
        self.evals_b as f64 / self.evals_a as f64
    }
}

/// Evaluations-to-target of two configurations over common seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupReport {
    pub outcomes: Vec<SeedOutcome>,
    pub median_a: f64,
    pub median_b: f64,
    /// `median_b / median_a`.
    pub ratio: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Some run did not reach the target; its budget stands in for the count.
    pub censored: bool,
}

pub fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Runs both configurations on every seed (seeds run in parallel).
pub fn compare(
    cfg_a: &ScenarioConfig,
    cfg_b: &ScenarioConfig,
    seeds: &[u64],
) -> Result<SpeedupReport> {
    if cfg_a.problem != cfg_b.problem || cfg_a.dim != cfg_b.dim || cfg_a.target_f != cfg_b.target_f
    {
        return Err(Error::Config(
            "compared configs must share problem, dim and target_f".into(),
        ));
    }
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let outcomes = seeds
        .par_iter()
        .map(|&seed| {
            let a = run_scenario(&ScenarioConfig {
                seed,
                ..cfg_a.clone()
            })?;
            let b = run_scenario(&ScenarioConfig {
                seed,
                ..cfg_b.clone()
            })?;
            Ok(SeedOutcome {
                seed,
                evals_a: a.evals_to_target.unwrap_or(a.total_evals),
                status_a: a.status,
                evals_b: b.evals_to_target.unwrap_or(b.total_evals),
                status_b: b.status,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut a: Vec<f64> = outcomes.iter().map(|o| o.evals_a as f64).collect();
    let mut b: Vec<f64> = outcomes.iter().map(|o| o.evals_b as f64).collect();
    let median_a = median_of(&mut a);
    let median_b = median_of(&mut b);
    let ratios = outcomes.iter().map(SeedOutcome::ratio);
    Ok(SpeedupReport {
        ratio: median_b / median_a,
        ratio_min: ratios.clone().fold(f64::INFINITY, f64::min),
        ratio_max: ratios.fold(f64::NEG_INFINITY, f64::max),
        censored: outcomes.iter().any(SeedOutcome::censored),
        median_a,
        median_b,
        outcomes,
    })
}

impl SpeedupReport {
    /// One row per seed: `seed,evals_a,status_a,evals_b,status_b,ratio`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "seed", "evals_a", "status_a", "evals_b", "status_b", "ratio",
        ])?;
        for o in &self.outcomes {
            w.write_record([
                o.seed.to_string(),
                o.evals_a.to_string(),
                o.status_a.name().to_string(),
                o.evals_b.to_string(),
                o.status_b.name().to_string(),
                o.ratio().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "median evals a = {}, b = {}, ratio b/a = {:.4} (min {:.4}, max {:.4}){}",
            self.median_a,
            self.median_b,
            self.ratio,
            self.ratio_min,
            self.ratio_max,
            if self.censored { " [censored]" } else { "" }
        )
    }
}
