//! External proposals and the normalization that makes them safe to feed
//! into the CMA-ES update.
//!
//! An injected candidate contributes a step `y = (x − m) / σ` that need not
//! follow the sampling distribution. Its Mahalanobis length `‖C^{-1/2} y‖` is
//! therefore limited before the step enters the update: hard clipping scales
//! it down to at most `c_y`, the adaptive variant compares it against the
//! empirical distribution of all lengths seen so far.

use nalgebra::DVector;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::symmat::{EigenDecomposition, RootPower};

/// Tail allowance factor of the adaptive normalizer.
pub const CDF_SAFETY_FACTOR: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InjectionKind {
    /// A candidate point, used as is.
    Solution,
    /// A search direction, scaled to Mahalanobis length `√n`.
    Direction,
    /// A gradient-like direction `v`, injected along `C v`.
    GradientDirection,
    /// A point the distribution mean should move to.
    MeanShift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionRequest {
    pub kind: InjectionKind,
    pub payload: DVector<f64>,
    /// Number of population slots filled with this proposal.
    pub repeat: usize,
}

impl InjectionRequest {
    pub fn new(kind: InjectionKind, payload: DVector<f64>) -> Self {
        InjectionRequest {
            kind,
            payload,
            repeat: 1,
        }
    }

    pub fn solution(x: DVector<f64>) -> Self {
        Self::new(InjectionKind::Solution, x)
    }

    pub fn direction(v: DVector<f64>) -> Self {
        Self::new(InjectionKind::Direction, v)
    }

    pub fn gradient_direction(v: DVector<f64>) -> Self {
        Self::new(InjectionKind::GradientDirection, v)
    }

    pub fn mean_shift(x_m: DVector<f64>) -> Self {
        Self::new(InjectionKind::MeanShift, x_m)
    }

    pub fn with_repeat(mut self, repeat: usize) -> Self {
        self.repeat = repeat;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.repeat == 0
            || self.payload.len() != n
            || self.payload.iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInjection);
        }
        match self.kind {
            InjectionKind::Direction | InjectionKind::GradientDirection
                if self.payload.iter().all(|&v| v == 0.0) =>
            {
                Err(Error::InvalidDirection)
            }
            InjectionKind::MeanShift if self.repeat > 1 => Err(Error::DuplicateMeanShift),
            _ => Ok(()),
        }
    }
}

/// `min(1, c / x)`, and `1` for a zero-length step.
pub fn alpha_clip(c: f64, x: f64) -> f64 {
    if x <= c {
        1.0
    } else {
        c / x
    }
}

/// Candidate for a direction request.
///
/// `Direction`: `m + σ √n / ‖C^{-1/2} v‖ · v`.
/// `GradientDirection`: `m + σ √n / ‖C^{1/2} v‖ · C v`.
/// Either way the step `(x − m) / σ` has Mahalanobis norm `√n`.
pub fn direction_to_candidate(
    v: &DVector<f64>,
    mean: &DVector<f64>,
    sigma: f64,
    dec: &EigenDecomposition,
    kind: InjectionKind,
) -> Result<DVector<f64>> {
    if v.iter().all(|&c| c == 0.0) {
        return Err(Error::InvalidDirection);
    }
    let sqrt_n = (dec.dim() as f64).sqrt();
    let step = match kind {
        InjectionKind::Direction => {
            let len = dec.apply_root(v, RootPower::NegHalf)?.norm();
            v * (sqrt_n / len)
        }
        InjectionKind::GradientDirection => {
            let len = dec.apply_root(v, RootPower::Half)?.norm();
            dec.apply(v)? * (sqrt_n / len)
        }
        _ => return Err(Error::InvalidInjection),
    };
    Ok(mean + step * sigma)
}

/// Mean step of an injected mean: `(x_m − m) / σ`.
pub fn make_mean_shift(x_m: &DVector<f64>, mean: &DVector<f64>, sigma: f64) -> DVector<f64> {
    (x_m - mean) / sigma
}

/// Population slots and optional mean target produced from a request list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Materialized {
    /// Candidate points in request order, repeats expanded.
    pub slots: Vec<DVector<f64>>,
    pub mean_shift: Option<DVector<f64>>,
}

/// Turns requests into candidate points for a population of size `lambda`.
pub fn materialize(
    requests: &[InjectionRequest],
    mean: &DVector<f64>,
    sigma: f64,
    dec: &EigenDecomposition,
    lambda: usize,
) -> Result<Materialized> {
    let n = mean.len();
    let mut requested = 0usize;
    let mut shifts = 0usize;
    for r in requests {
        r.validate(n)?;
        if r.kind == InjectionKind::MeanShift {
            shifts += 1;
        } else {
            requested = requested.saturating_add(r.repeat);
        }
    }
    if shifts > 1 {
        return Err(Error::DuplicateMeanShift);
    }
    if requested > lambda {
        return Err(Error::TooManyInjections { requested, lambda });
    }

    let mut out = Materialized::default();
    for r in requests {
        let point = match r.kind {
            InjectionKind::Solution => r.payload.clone(),
            InjectionKind::Direction | InjectionKind::GradientDirection => {
                direction_to_candidate(&r.payload, mean, sigma, dec, r.kind)?
            }
            InjectionKind::MeanShift => {
                out.mean_shift = Some(r.payload.clone());
                continue;
            }
        };
        if point.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInjection);
        }
        out.slots.extend(std::iter::repeat_n(point, r.repeat));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClipMode {
    #[default]
    HardClip,
    CdfAdaptive,
    Off,
}

/// All transformed lengths `√2 (‖C^{-1/2} y‖ − E‖N‖)` seen so far, kept sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LengthHistory {
    sorted: Vec<f64>,
}

impl LengthHistory {
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn extend(&mut self, lengths: impl IntoIterator<Item = f64>) {
        self.sorted.extend(lengths);
        self.sorted.sort_by(f64::total_cmp);
    }

    fn count_below(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v < x)
    }
}

/// Maps a Mahalanobis step length onto the standard-normal scale.
pub fn transformed_length(norm: f64, expected_norm: f64) -> f64 {
    std::f64::consts::SQRT_2 * (norm - expected_norm)
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Correction factor for a step with transformed length `l`.
///
/// A correction applies when `l > 1` and the observed frequency of lengths
/// `≥ l` over all `t · λ` recorded values exceeds `1.2 (1 − Φ(l))`. The
/// length is then reduced to the largest `l' ≤ l` at which that no longer
/// holds, and the returned factor rescales the step accordingly:
/// `(E + l'/√2) / (E + l/√2)`.
pub fn cdf_normalize(
    l: f64,
    history: &LengthHistory,
    t: u64,
    lambda: usize,
    expected_norm: f64,
) -> Result<f64> {
    let total = t as usize * lambda;
    if t == 0 || history.is_empty() || history.len() != total {
        return Err(Error::InconsistentHistory);
    }
    let phi = std_normal();
    let total = total as f64;
    let n_hist = history.len();

    // The observed tail frequency is constant on each interval (a, b] between
    // consecutive recorded values, so the largest admissible length can be
    // found by walking intervals downwards from `l`.
    let mut upper = l;
    let reduced = loop {
        if upper <= 1.0 {
            break upper;
        }
        let below = history.count_below(upper);
        let lower_edge = if below > 0 {
            history.sorted[below - 1]
        } else {
            f64::NEG_INFINITY
        };
        let freq = (n_hist - below) as f64 / total;
        let ratio = freq / CDF_SAFETY_FACTOR;
        let crossing = if ratio >= 1.0 {
            f64::NEG_INFINITY
        } else if ratio <= 0.0 {
            f64::INFINITY
        } else {
            phi.inverse_cdf(1.0 - ratio)
        };
        let best = upper.min(crossing.max(1.0));
        if best > lower_edge {
            break best;
        }
        upper = lower_edge;
    };

    if reduced >= l {
        return Ok(1.0);
    }
    let from = expected_norm + l / std::f64::consts::SQRT_2;
    let to = expected_norm + reduced / std::f64::consts::SQRT_2;
    Ok((to / from).clamp(f64::MIN_POSITIVE, 1.0))
}

/// Clipping state owned by the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipPolicy {
    pub mode: ClipMode,
    pub c_y: f64,
    pub c_ym: f64,
    pub expected_norm: f64,
    history: LengthHistory,
}

impl ClipPolicy {
    pub fn new(mode: ClipMode, c_y: f64, c_ym: f64, expected_norm: f64) -> Self {
        ClipPolicy {
            mode,
            c_y,
            c_ym,
            expected_norm,
            history: LengthHistory::default(),
        }
    }

    pub fn history(&self) -> &LengthHistory {
        &self.history
    }

    pub(crate) fn history_values(&self) -> &[f64] {
        &self.history.sorted
    }

    pub(crate) fn restore_history(&mut self, values: &[f64]) {
        self.history = LengthHistory::default();
        self.history.extend(values.iter().copied());
    }

    /// Appends one iteration's Mahalanobis step lengths (all `λ` of them).
    /// Only the adaptive mode keeps a history.
    pub fn record_lengths(&mut self, norms: &[f64]) {
        if self.mode == ClipMode::CdfAdaptive {
            let e = self.expected_norm;
            self.history
                .extend(norms.iter().map(|&x| transformed_length(x, e)));
        }
    }

    /// Scale factor for an injected step of Mahalanobis length `norm`.
    ///
    /// `t` counts the iterations recorded so far, including the current one.
    pub fn step_factor(&self, norm: f64, t: u64, lambda: usize) -> Result<f64> {
        match self.mode {
            ClipMode::Off => Ok(1.0),
            ClipMode::HardClip => Ok(alpha_clip(self.c_y, norm)),
            ClipMode::CdfAdaptive => cdf_normalize(
                transformed_length(norm, self.expected_norm),
                &self.history,
                t,
                lambda,
                self.expected_norm,
            ),
        }
    }

    /// Clips an injected step `y`; returns the scaled step and the factor.
    pub fn clip_injected_step(
        &self,
        y: &DVector<f64>,
        dec: &EigenDecomposition,
        t: u64,
        lambda: usize,
    ) -> Result<(DVector<f64>, f64)> {
        let factor = self.step_factor(dec.mahalanobis_norm(y)?, t, lambda)?;
        Ok((y * factor, factor))
    }

    /// Scales the mean step by `α_clip(c_ym, √μ_w ‖C^{-1/2} Δm‖)`. Disabled
    /// when the mode is `Off`.
    pub fn clip_delta_m(
        &self,
        delta_m: &DVector<f64>,
        dec: &EigenDecomposition,
        mu_w: f64,
    ) -> Result<(DVector<f64>, f64)> {
        if self.mode == ClipMode::Off {
            return Ok((delta_m.clone(), 1.0));
        }
        let factor = alpha_clip(self.c_ym, mu_w.sqrt() * dec.mahalanobis_norm(delta_m)?);
        Ok((delta_m * factor, factor))
    }
}
