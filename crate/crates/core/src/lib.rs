//! CMA-ES that accepts externally supplied candidate solutions, directions
//! and mean shifts, together with a small benchmark harness.
//!
//! ```
//! use cmainj::{CmaEs, DVector, EngineConfig, InjectionRequest, StrategyParameters};
//!
//! let params = StrategyParameters::new(4, None).unwrap();
//! let mut es = CmaEs::new(params, EngineConfig::with_seed(1), DVector::from_element(4, 1.0), 0.5).unwrap();
//! for _ in 0..50 {
//!     let hint = InjectionRequest::solution(DVector::from_element(4, 0.01));
//!     let gen = es.ask(&[hint]).unwrap();
//!     let f: Vec<f64> = gen.candidates.iter().map(|x| x.norm_squared()).collect();
//!     es.tell(&gen, &f).unwrap();
//! }
//! assert!(es.state().mean.norm() < 0.1);
//! ```

// `!(x > y)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod engine;
pub mod error;
pub mod harness;
pub mod injection;
pub mod params;
pub mod problems;
pub mod rng;
pub mod symmat;

pub use checkpoint::Checkpoint;
pub use engine::{
    h_sigma, update_sigma, BestEver, CmaEs, DeltaMClipMode, EffectiveDimension, EngineConfig,
    Generation, IterationReport, MeanUpdateOrder, OptimizerState,
};
pub use error::{Error, Result};
pub use injection::{
    alpha_clip, cdf_normalize, direction_to_candidate, make_mean_shift, materialize, ClipMode,
    ClipPolicy, InjectionKind, InjectionRequest, LengthHistory,
};
pub use params::{expected_norm, StrategyParameters};
pub use problems::Objective;
pub use rng::GaussianStream;
pub use symmat::{decompose, EigenDecomposition, RootPower, SymMatrix};

pub use nalgebra::DVector;
