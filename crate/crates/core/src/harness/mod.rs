//! Scenario runner reproducing the injection experiments: a single slightly
//! perturbed optimum injected every iteration, against the plain algorithm.

mod compare;
mod config;
mod run;

pub use compare::{compare, median_of, SeedOutcome, SpeedupReport};
pub use config::{clip_mode_name, parse_clip_mode, InitialMean, InjectionMode, ScenarioConfig};
pub use run::{run_scenario, RunLog, RunRow, RunStatus, CSV_HEADER, DIVERGENCE_SIGMA};

use crate::error::{Error, Result};
use crate::params::default_c_y;
use crate::rng::GaussianStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipStats {
    pub n: usize,
    pub samples: u64,
    pub c_y: f64,
    pub fraction: f64,
    pub std_error: f64,
}

pub const MIN_CLIP_SAMPLES: u64 = 10_000;

/// Monte-Carlo estimate of how often a step sampled by the engine would be
/// clipped, i.e. `P(‖C^{-1/2} y‖ > c_y)` with `C = I`, `σ = 1`, so that the
/// step is the raw standard-normal draw.
pub fn clip_stats(n: usize, samples: u64, seed: u64) -> Result<ClipStats> {
    if n == 0 {
        return Err(Error::InvalidDimension(n));
    }
    if samples < MIN_CLIP_SAMPLES {
        return Err(Error::Config(format!(
            "at least {MIN_CLIP_SAMPLES} samples are required"
        )));
    }
    let c_y = default_c_y(n);
    let threshold = c_y * c_y;
    let mut rng = GaussianStream::new(seed);
    let mut z = vec![0.0; n];
    let mut hits = 0u64;
    for _ in 0..samples {
        rng.fill_gaussian(&mut z);
        if z.iter().map(|v| v * v).sum::<f64>() > threshold {
            hits += 1;
        }
    }
    let fraction = hits as f64 / samples as f64;
    Ok(ClipStats {
        n,
        samples,
        c_y,
        fraction,
        std_error: (fraction * (1.0 - fraction) / samples as f64).sqrt(),
    })
}
