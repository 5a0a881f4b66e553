//! Ask–tell (μ_w, λ)-CMA-ES that tolerates injected candidates.
//!
//! One iteration is `ask` → evaluate → `tell`. `tell` runs the update in this
//! order:
//!
//! 1. rank candidates and form `y_i = (x_{i:λ} − m) / σ`;
//! 2. clip the steps of injected candidates;
//! 3. `Δm = (x_m − m) / σ` if a mean was injected, else `Σ w_i y_i`;
//! 4. move the mean and (if applicable) clip `Δm`, in the configured order;
//! 5. update `p_σ`, `h_σ`, `p_c`, `C` and `σ`;
//! 6. re-decompose `C`.

use nalgebra::{DMatrix, DVector};

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::injection::{make_mean_shift, materialize, ClipMode, ClipPolicy, InjectionRequest};
use crate::params::{default_c_y, expected_norm, StrategyParameters};
use crate::rng::GaussianStream;
use crate::symmat::{decompose, EigenDecomposition, RootPower, SymMatrix};

/// When the mean step `Δm` is clipped with `c_ym`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaMClipMode {
    /// Only in iterations with an injected mean.
    #[default]
    OnlyOnMeanShift,
    Always,
}

/// Whether the mean moves before or after `Δm` is clipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanUpdateOrder {
    /// Move the mean with the unclipped `Δm`, clip for the path updates.
    #[default]
    ClipAfterMean,
    /// Clip `Δm` first; the mean moves by the clipped step.
    ClipBeforeMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub clip_mode: ClipMode,
    pub delta_m_clip_mode: DeltaMClipMode,
    pub mean_update_order: MeanUpdateOrder,
    pub seed: u64,
    /// Reject asks and tells against a decomposition of an older `C`.
    pub strict_decomposition: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            clip_mode: ClipMode::HardClip,
            delta_m_clip_mode: DeltaMClipMode::OnlyOnMeanShift,
            mean_update_order: MeanUpdateOrder::ClipAfterMean,
            seed: 0,
            strict_decomposition: true,
        }
    }
}

impl EngineConfig {
    pub fn with_seed(seed: u64) -> Self {
        EngineConfig {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestEver {
    pub x: DVector<f64>,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: SymMatrix,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    /// Completed iterations.
    pub t: u64,
    pub dec: EigenDecomposition,
    pub best_ever: Option<BestEver>,
}

impl OptimizerState {
    fn initial(mean: DVector<f64>, sigma: f64) -> Result<Self> {
        let n = mean.len();
        let cov = SymMatrix::identity(n);
        let dec = decompose(&cov, 0)?;
        Ok(OptimizerState {
            mean,
            sigma,
            cov,
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            t: 0,
            dec,
            best_ever: None,
        })
    }

    fn is_finite(&self) -> bool {
        self.sigma.is_finite()
            && self.sigma > 0.0
            && self.mean.iter().all(|v| v.is_finite())
            && self.p_sigma.iter().all(|v| v.is_finite())
            && self.p_c.iter().all(|v| v.is_finite())
            && self.cov.is_finite()
    }
}

/// Candidates of one iteration, as handed out by [`CmaEs::ask`].
#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub iteration: u64,
    pub candidates: Vec<DVector<f64>>,
    /// `true` for slots holding an injected proposal.
    pub injected: Vec<bool>,
    /// Injected mean, if any; it does not occupy a slot and is not evaluated.
    pub mean_shift: Option<DVector<f64>>,
}

impl Generation {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn injected_count(&self) -> usize {
        self.injected.iter().filter(|&&b| b).count()
    }
}

/// What happened during one `tell`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: u64,
    /// Candidate indices, best first.
    pub ranking: Vec<usize>,
    /// Fitness values in rank order.
    pub sorted_fitness: Vec<f64>,
    /// `‖C^{-1/2} y_i‖` in rank order, before clipping.
    pub step_norms: Vec<f64>,
    /// The `μ` selected steps `y_i` after clipping, best first.
    pub ranked_steps: Vec<DVector<f64>>,
    /// Number of injected steps shortened by the clip policy.
    pub clipped: usize,
    pub delta_m: DVector<f64>,
    pub delta_m_factor: f64,
    pub mean_shift: bool,
    pub h_sigma: bool,
    pub c_mu_used: f64,
    /// `(c_σ/d_σ)(‖p_σ‖/E‖N‖ − 1)` before capping at `Δ_σ^max`.
    pub sigma_exponent_raw: f64,
    /// `exp(min(Δ_σ^max, raw exponent))`.
    pub sigma_factor: f64,
    pub sigma: f64,
    pub p_sigma_norm: f64,
    pub p_sigma_ratio: f64,
    pub condition_number: f64,
}

/// `h_σ`: `1` iff `‖p_σ‖² < n (1 − (1 − c_σ)^{2(t+1)}) (2 + 4/(n+1))`.
pub fn h_sigma(p_sigma_next: &DVector<f64>, params: &StrategyParameters, t: u64) -> bool {
    stall_indicator(p_sigma_next.norm_squared(), params.n, params.c_sigma, t)
}

fn stall_indicator(norm_sq: f64, n: usize, c_sigma: f64, t: u64) -> bool {
    let n = n as f64;
    let decay = (1.0 - c_sigma).powf(2.0 * (t as f64 + 1.0));
    norm_sq < n * (1.0 - decay) * (2.0 + 4.0 / (n + 1.0))
}

/// `σ exp(min(Δ_σ^max, (c_σ/d_σ)(‖p_σ‖/E‖N‖ − 1)))`.
pub fn update_sigma(sigma: f64, p_sigma_next: &DVector<f64>, params: &StrategyParameters) -> f64 {
    let (_, factor) = sigma_factor(p_sigma_next.norm(), params.expected_norm, params);
    sigma * factor
}

fn sigma_factor(p_sigma_norm: f64, expected: f64, params: &StrategyParameters) -> (f64, f64) {
    let raw = params.c_sigma / params.d_sigma * (p_sigma_norm / expected - 1.0);
    (raw, raw.min(params.delta_sigma_max).exp())
}

#[derive(Debug, Clone, PartialEq)]
struct Frozen {
    indices: Vec<usize>,
    values: Vec<f64>,
    free: Vec<usize>,
}

/// Dimension-dependent quantities, reduced to the free coordinates when
/// variables are frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveDimension {
    pub n: usize,
    pub expected_norm: f64,
    pub c_y: f64,
}

#[derive(Debug, Clone)]
pub struct CmaEs {
    params: StrategyParameters,
    config: EngineConfig,
    state: OptimizerState,
    clip: ClipPolicy,
    rng: GaussianStream,
    frozen: Option<Frozen>,
}

impl CmaEs {
    pub fn new(
        params: StrategyParameters,
        config: EngineConfig,
        mean: DVector<f64>,
        sigma: f64,
    ) -> Result<Self> {
        params.validate()?;
        if mean.len() != params.n {
            return Err(Error::DimensionMismatch {
                expected: params.n,
                got: mean.len(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(
                "initial mean and sigma must be finite, sigma > 0".into(),
            ));
        }
        let clip = ClipPolicy::new(
            config.clip_mode,
            params.c_y,
            params.c_ym,
            params.expected_norm,
        );
        let rng = GaussianStream::new(config.seed);
        Ok(CmaEs {
            state: OptimizerState::initial(mean, sigma)?,
            params,
            config,
            clip,
            rng,
            frozen: None,
        })
    }

    pub fn params(&self) -> &StrategyParameters {
        &self.params
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn clip_policy(&self) -> &ClipPolicy {
        &self.clip
    }

    pub fn rng_position(&self) -> u128 {
        self.rng.position()
    }

    pub fn dim(&self) -> usize {
        self.params.n
    }

    pub fn lambda(&self) -> usize {
        self.params.lambda
    }

    pub fn effective_dimension(&self) -> EffectiveDimension {
        match &self.frozen {
            None => EffectiveDimension {
                n: self.params.n,
                expected_norm: self.params.expected_norm,
                c_y: self.params.c_y,
            },
            Some(fz) => {
                let n = fz.free.len();
                EffectiveDimension {
                    n,
                    expected_norm: expected_norm(n),
                    c_y: if self.params.c_y.is_finite() {
                        default_c_y(n)
                    } else {
                        self.params.c_y
                    },
                }
            }
        }
    }

    /// Holds the given coordinates at their current mean values in every
    /// candidate until [`CmaEs::unfreeze`]. Step-size statistics and `c_y` then
    /// use the number of free coordinates.
    pub fn freeze(&mut self, indices: &[usize]) -> Result<()> {
        let values: Vec<f64> = indices
            .iter()
            .map(|&i| {
                self.state
                    .mean
                    .get(i)
                    .copied()
                    .ok_or(Error::InvalidParameter(format!("index {i}")))
            })
            .collect::<Result<_>>()?;
        self.freeze_at(indices, &values)
    }

    /// Like [`CmaEs::freeze`] with explicit values.
    pub fn freeze_at(&mut self, indices: &[usize], values: &[f64]) -> Result<()> {
        let n = self.params.n;
        if indices.len() != values.len() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "frozen values must be finite, one per index".into(),
            ));
        }
        let mut pairs: Vec<(usize, f64)> = indices
            .iter()
            .copied()
            .zip(values.iter().copied())
            .collect();
        pairs.sort_by_key(|p| p.0);
        pairs.dedup_by_key(|p| p.0);
        if pairs.iter().any(|p| p.0 >= n) {
            return Err(Error::InvalidParameter("frozen index out of range".into()));
        }
        if pairs.is_empty() {
            self.frozen = None;
            self.sync_clip_dimension();
            return Ok(());
        }
        if pairs.len() == n {
            return Err(Error::AllVariablesFrozen(n));
        }
        let free = (0..n)
            .filter(|i| pairs.binary_search_by_key(i, |p| p.0).is_err())
            .collect();
        self.frozen = Some(Frozen {
            indices: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
            free,
        });
        self.sync_clip_dimension();
        Ok(())
    }

    pub fn unfreeze(&mut self) {
        self.frozen = None;
        self.sync_clip_dimension();
    }

    pub fn frozen_indices(&self) -> &[usize] {
        self.frozen.as_ref().map_or(&[], |f| &f.indices)
    }

    fn sync_clip_dimension(&mut self) {
        let eff = self.effective_dimension();
        self.clip.c_y = eff.c_y;
        self.clip.expected_norm = eff.expected_norm;
    }

    fn ensure_fresh(&self) -> Result<()> {
        if self.config.strict_decomposition {
            self.state.dec.ensure_fresh(self.state.t)?;
        }
        Ok(())
    }

    /// Samples `λ` candidates `m + σ C^{1/2} z`, replacing the first slots by
    /// the injected proposals. Normal variates are drawn for every slot, so
    /// the random stream does not depend on how many slots were replaced.
    pub fn ask(&mut self, injections: &[InjectionRequest]) -> Result<Generation> {
        self.ensure_fresh()?;
        let n = self.params.n;
        let lambda = self.params.lambda;
        let st = &self.state;
        let injected = materialize(injections, &st.mean, st.sigma, &st.dec, lambda)?;

        let mut z = vec![0.0; n * lambda];
        self.rng.fill_gaussian(&mut z);

        let st = &self.state;
        let k = injected.slots.len();
        let mut slots = injected.slots.into_iter();
        let mut candidates = Vec::with_capacity(lambda);
        for (i, zi) in z.chunks_exact(n).enumerate() {
            let x = if i < k {
                slots.next().expect("slot count checked by materialize")
            } else {
                let step = st
                    .dec
                    .apply_root(&DVector::from_column_slice(zi), RootPower::Half)?;
                &st.mean + step * st.sigma
            };
            candidates.push(x);
        }
        if let Some(fz) = &self.frozen {
            for x in &mut candidates {
                for (&j, &v) in fz.indices.iter().zip(&fz.values) {
                    x[j] = v;
                }
            }
        }
        Ok(Generation {
            iteration: st.t,
            candidates,
            injected: (0..lambda).map(|i| i < k).collect(),
            mean_shift: injected.mean_shift,
        })
    }

    /// Updates the distribution from evaluated candidates.
    ///
    /// NaN fitness values are rejected and leave the state untouched. Equal
    /// fitness values are ranked by candidate index.
    pub fn tell(&mut self, gen: &Generation, fitness: &[f64]) -> Result<IterationReport> {
        self.ensure_fresh()?;
        let lambda = self.params.lambda;
        let n = self.params.n;
        if gen.iteration != self.state.t
            || gen.candidates.len() != lambda
            || gen.injected.len() != lambda
            || gen.candidates.iter().any(|x| x.len() != n)
        {
            return Err(Error::ForeignGeneration);
        }
        if fitness.len() != lambda {
            return Err(Error::DimensionMismatch {
                expected: lambda,
                got: fitness.len(),
            });
        }
        if let Some(i) = fitness.iter().position(|f| f.is_nan()) {
            return Err(Error::InvalidFitness(i));
        }

        let mut ranking: Vec<usize> = (0..lambda).collect();
        ranking.sort_by(|&a, &b| fitness[a].partial_cmp(&fitness[b]).expect("no NaN"));

        let st = &self.state;
        let steps: Vec<DVector<f64>> = ranking
            .iter()
            .map(|&i| (&gen.candidates[i] - &st.mean) / st.sigma)
            .collect();
        let norms: Vec<f64> = steps
            .iter()
            .map(|y| st.dec.mahalanobis_norm(y))
            .collect::<Result<_>>()?;

        // a failed tell must leave the length history untouched as well
        let saved_clip = (self.clip.mode == ClipMode::CdfAdaptive).then(|| self.clip.clone());
        let (mut report, clipped) = match self.clip_and_update(steps, &norms, &ranking, gen) {
            Ok(r) => r,
            Err(e) => {
                if let Some(clip) = saved_clip {
                    self.clip = clip;
                }
                return Err(e);
            }
        };

        let best = ranking[0];
        if self
            .state
            .best_ever
            .as_ref()
            .is_none_or(|b| fitness[best] < b.f)
        {
            self.state.best_ever = Some(BestEver {
                x: gen.candidates[best].clone(),
                f: fitness[best],
            });
        }
        report.sorted_fitness = ranking.iter().map(|&i| fitness[i]).collect();
        report.ranking = ranking;
        report.step_norms = norms;
        report.clipped = clipped;
        Ok(report)
    }

    fn clip_and_update(
        &mut self,
        mut steps: Vec<DVector<f64>>,
        norms: &[f64],
        ranking: &[usize],
        gen: &Generation,
    ) -> Result<(IterationReport, usize)> {
        let lambda = self.params.lambda;
        self.clip.record_lengths(norms);
        let recorded = self.state.t + 1;
        let modified_all = self.frozen.is_some();
        let mut clipped = 0;
        for (k, &i) in ranking.iter().enumerate() {
            if gen.injected[i] || modified_all {
                let factor = self.clip.step_factor(norms[k], recorded, lambda)?;
                if factor < 1.0 {
                    steps[k] *= factor;
                    clipped += 1;
                }
            }
        }
        steps.truncate(self.params.mu);
        let report = self.update(steps, gen.mean_shift.as_ref(), false)?;
        Ok((report, clipped))
    }

    /// Moves the mean to `x_m` without any ranked candidates; the covariance
    /// update then runs with `c_μ = 0`.
    pub fn shift_mean(&mut self, x_m: &DVector<f64>) -> Result<IterationReport> {
        self.ensure_fresh()?;
        if x_m.len() != self.params.n || x_m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInjection);
        }
        self.update(Vec::new(), Some(x_m), true)
    }

    fn update(
        &mut self,
        steps: Vec<DVector<f64>>,
        mean_shift: Option<&DVector<f64>>,
        shift_only: bool,
    ) -> Result<IterationReport> {
        let p = &self.params;
        let st = &self.state;
        let eff = self.effective_dimension();

        let mut delta_m = match mean_shift {
            Some(x_m) => make_mean_shift(x_m, &st.mean, st.sigma),
            None => steps
                .iter()
                .zip(&p.weights)
                .fold(DVector::zeros(p.n), |acc, (y, w)| acc + y * *w),
        };

        let clip_mean =
            mean_shift.is_some() || self.config.delta_m_clip_mode == DeltaMClipMode::Always;
        let mut delta_m_factor = 1.0;
        let mean = match self.config.mean_update_order {
            MeanUpdateOrder::ClipAfterMean => {
                let mean = &st.mean + &delta_m * (p.c_m * st.sigma);
                if clip_mean {
                    (delta_m, delta_m_factor) =
                        self.clip.clip_delta_m(&delta_m, &st.dec, p.mu_w)?;
                }
                mean
            }
            MeanUpdateOrder::ClipBeforeMean => {
                if clip_mean {
                    (delta_m, delta_m_factor) =
                        self.clip.clip_delta_m(&delta_m, &st.dec, p.mu_w)?;
                }
                &st.mean + &delta_m * (p.c_m * st.sigma)
            }
        };

        let whitened = st.dec.apply_root(&delta_m, RootPower::NegHalf)?;
        let p_sigma = &st.p_sigma * (1.0 - p.c_sigma)
            + whitened * (p.c_sigma * (2.0 - p.c_sigma) * p.mu_w).sqrt();
        let p_sigma_norm = match &self.frozen {
            None => p_sigma.norm(),
            Some(fz) => fz
                .free
                .iter()
                .map(|&i| p_sigma[i] * p_sigma[i])
                .sum::<f64>()
                .sqrt(),
        };
        let h = stall_indicator(p_sigma_norm * p_sigma_norm, eff.n, p.c_sigma, st.t);
        let hf = if h { 1.0 } else { 0.0 };
        let p_c =
            &st.p_c * (1.0 - p.c_c) + &delta_m * (hf * (p.c_c * (2.0 - p.c_c) * p.mu_w).sqrt());

        let c_mu = if shift_only { 0.0 } else { p.c_mu };
        let c1_prime = p.c_1 * (1.0 - (1.0 - hf * hf) * p.c_c * (2.0 - p.c_c));
        let mut cov: DMatrix<f64> = st.cov.as_matrix() * (1.0 - c1_prime - c_mu);
        cov.ger(p.c_1, &p_c, &p_c, 1.0);
        if c_mu > 0.0 {
            for (y, w) in steps.iter().zip(&p.weights) {
                cov.ger(c_mu * w, y, y, 1.0);
            }
        }
        let mut cov = SymMatrix::from_matrix(cov)?;
        if let Some(fz) = &self.frozen {
            floor_frozen_diagonal(&mut cov, fz)?;
        }

        let (raw_exponent, factor) = sigma_factor(p_sigma_norm, eff.expected_norm, p);
        let sigma = st.sigma * factor;

        let t = st.t + 1;
        let mut dec = decompose(&cov, t)?;
        if dec.clamped_count() > 0 {
            cov = dec.reconstruct();
            dec = decompose(&cov, t)?;
        }

        let next = OptimizerState {
            mean,
            sigma,
            cov,
            p_sigma,
            p_c,
            t,
            dec,
            best_ever: st.best_ever.clone(),
        };
        if !next.is_finite() {
            return Err(Error::NonFiniteState);
        }
        let iteration = st.t;
        let condition_number = next.dec.condition_number();
        self.state = next;

        Ok(IterationReport {
            iteration,
            ranking: Vec::new(),
            sorted_fitness: Vec::new(),
            step_norms: Vec::new(),
            ranked_steps: steps,
            clipped: 0,
            delta_m,
            delta_m_factor,
            mean_shift: mean_shift.is_some(),
            h_sigma: h,
            c_mu_used: c_mu,
            sigma_exponent_raw: raw_exponent,
            sigma_factor: factor,
            sigma,
            p_sigma_norm,
            p_sigma_ratio: p_sigma_norm / eff.expected_norm,
            condition_number,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let st = &self.state;
        Checkpoint {
            n: self.params.n,
            t: st.t,
            seed: self.rng.seed(),
            rng_position: self.rng.position(),
            sigma: st.sigma,
            mean: st.mean.iter().copied().collect(),
            p_sigma: st.p_sigma.iter().copied().collect(),
            p_c: st.p_c.iter().copied().collect(),
            cov_lower: st.cov.lower_triangle(),
            best_ever: st
                .best_ever
                .as_ref()
                .map(|b| (b.f, b.x.iter().copied().collect())),
            length_history: self.clip.history_values().to_vec(),
        }
    }

    /// Rebuilds an engine from a checkpoint. `params` and `config` must match
    /// the run that wrote it; the seed is taken from the checkpoint.
    pub fn restore(
        params: StrategyParameters,
        mut config: EngineConfig,
        cp: &Checkpoint,
    ) -> Result<Self> {
        if cp.n != params.n {
            return Err(Error::Checkpoint(format!(
                "dimension {} does not match parameters ({})",
                cp.n, params.n
            )));
        }
        config.seed = cp.seed;
        let mut engine = CmaEs::new(
            params,
            config,
            DVector::from_column_slice(&cp.mean),
            cp.sigma,
        )?;
        let cov = SymMatrix::from_lower_triangle(cp.n, &cp.cov_lower)?;
        let dec = decompose(&cov, cp.t)?;
        let st = &mut engine.state;
        st.t = cp.t;
        st.p_sigma = DVector::from_column_slice(&cp.p_sigma);
        st.p_c = DVector::from_column_slice(&cp.p_c);
        st.cov = cov;
        st.dec = dec;
        st.best_ever = cp.best_ever.as_ref().map(|(f, x)| BestEver {
            x: DVector::from_column_slice(x),
            f: *f,
        });
        engine.rng.set_position(cp.rng_position);
        engine.clip.restore_history(&cp.length_history);
        Ok(engine)
    }
}

fn floor_frozen_diagonal(cov: &mut SymMatrix, fz: &Frozen) -> Result<()> {
    let sub = DMatrix::from_fn(fz.free.len(), fz.free.len(), |a, b| {
        cov.get(fz.free[a], fz.free[b])
    });
    let floor = decompose(&SymMatrix::from_matrix(sub)?, 0)?.min_eigenvalue();
    for &j in &fz.indices {
        if cov.get(j, j) < floor {
            cov.set(j, j, floor);
        }
    }
    Ok(())
}
