//! Default strategy parameters of the (μ_w, λ)-CMA-ES, including the
//! clipping thresholds for injected steps and the cap on the log step-size
//! increment.

use crate::error::{Error, Result};

/// Approximation of `E‖N(0, I)‖` in dimension `n`:
/// `√n (1 − 1/(4n) + 1/(21n²))`.
///
/// The exact value is `√2 Γ((n+1)/2) / Γ(n/2)`.
pub fn expected_norm(n: usize) -> f64 {
    let n = n as f64;
    n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
}

/// Clipping threshold for a single injected step: `√n + 2n/(n+2)`.
pub fn default_c_y(n: usize) -> f64 {
    let n = n as f64;
    n.sqrt() + 2.0 * n / (n + 2.0)
}

/// Clipping threshold for the mean step: `√(2n) + 2n/(n+2)`.
pub fn default_c_ym(n: usize) -> f64 {
    let n = n as f64;
    (2.0 * n).sqrt() + 2.0 * n / (n + 2.0)
}

pub fn default_population_size(n: usize) -> usize {
    4 + (3.0 * (n as f64).ln()).floor() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParameters {
    pub n: usize,
    pub lambda: usize,
    pub mu: usize,
    /// Positive recombination weights summing to one, best first.
    pub weights: Vec<f64>,
    /// Variance-effective selection mass `1 / Σ w_i²`.
    pub mu_w: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub c_m: f64,
    pub alpha_cov: f64,
    pub c_y: f64,
    pub c_ym: f64,
    /// Upper bound on the exponent of the step-size update.
    pub delta_sigma_max: f64,
    pub expected_norm: f64,
}

impl StrategyParameters {
    /// Default parameters for dimension `n` and optional population size.
    pub fn new(n: usize, lambda: Option<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(n));
        }
        let lambda = lambda.unwrap_or_else(|| default_population_size(n));
        if lambda < 2 {
            return Err(Error::InvalidPopulationSize(lambda));
        }
        let mu = lambda / 2;
        let log_half = ((lambda as f64 + 1.0) / 2.0).ln();
        let raw: Vec<f64> = (1..=mu).map(|i| log_half - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_w = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let nf = n as f64;
        let c_sigma = (mu_w + 2.0) / (nf + mu_w + 3.0);
        let d_sigma = 1.0 + c_sigma + 2.0 * (((mu_w - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0);
        let c_c = 4.0 / (nf + 4.0);

        let mut params = StrategyParameters {
            n,
            lambda,
            mu,
            weights,
            mu_w,
            c_sigma,
            d_sigma,
            c_c,
            c_1: 0.0,
            c_mu: 0.0,
            c_m: 1.0,
            alpha_cov: 2.0,
            c_y: default_c_y(n),
            c_ym: default_c_ym(n),
            delta_sigma_max: 1.0,
            expected_norm: expected_norm(n),
        };
        params.set_covariance_rates();
        Ok(params)
    }

    /// Recomputes `c_1` and `c_μ` for a different `α_cov` (e.g. `0.5` on
    /// noisy problems).
    pub fn with_alpha_cov(mut self, alpha_cov: f64) -> Result<Self> {
        if !(alpha_cov > 0.0 && alpha_cov.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha_cov = {alpha_cov}")));
        }
        self.alpha_cov = alpha_cov;
        self.set_covariance_rates();
        Ok(self)
    }

    pub fn with_clip_thresholds(mut self, c_y: f64, c_ym: f64) -> Self {
        self.c_y = c_y;
        self.c_ym = c_ym;
        self
    }

    pub fn with_delta_sigma_max(mut self, delta_sigma_max: f64) -> Self {
        self.delta_sigma_max = delta_sigma_max;
        self
    }

    /// `c_y = c_ym = Δ_σ^max = ∞`: the unmodified CMA-ES.
    pub fn unclipped(self) -> Self {
        self.with_clip_thresholds(f64::INFINITY, f64::INFINITY)
            .with_delta_sigma_max(f64::INFINITY)
    }

    fn set_covariance_rates(&mut self) {
        let nf = self.n as f64;
        let a = self.alpha_cov;
        let mu_w = self.mu_w;
        self.c_1 = a * (self.lambda as f64 / 6.0).min(1.0) / ((nf + 1.3).powi(2) + mu_w);
        self.c_mu = (1.0 - self.c_1)
            .min(a * (mu_w - 2.0 + 1.0 / mu_w) / ((nf + 2.0).powi(2) + a * mu_w / 2.0));
    }

    /// Checks the invariants that user edits of the public fields could break.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if self.lambda < 2 || self.mu == 0 || self.mu > self.lambda {
            return Err(Error::InvalidPopulationSize(self.lambda));
        }
        if self.weights.len() != self.mu || self.weights.iter().any(|w| !(*w > 0.0)) {
            return bad("weights must be mu positive values");
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return bad("weights must sum to one");
        }
        let rate = |x: f64| x > 0.0 && x <= 1.0;
        if !rate(self.c_sigma) || !rate(self.c_c) || !rate(self.c_1) || !rate(self.c_m) {
            return bad("learning rates must lie in (0, 1]");
        }
        if !(self.c_mu >= 0.0 && self.c_1 + self.c_mu <= 1.0 + 1e-15) {
            return bad("c_1 + c_mu must not exceed 1");
        }
        if !(self.d_sigma > 0.0) {
            return bad("d_sigma must be positive");
        }
        if !(self.c_y > 0.0 && self.c_ym > 0.0 && self.delta_sigma_max > 0.0) {
            return bad("clip thresholds and delta_sigma_max must be positive (may be infinite)");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::function::gamma::ln_gamma;

    fn exact_expected_norm(n: usize) -> f64 {
        let n = n as f64;
        2f64.sqrt() * (ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0)).exp()
    }

    #[test]
    fn expected_norm_matches_formula_and_gamma_oracle() {
        // formula values, evaluated independently
        assert_relative_eq!(
            expected_norm(1),
            0.797_619_047_619_047_7,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            expected_norm(2),
            1.254_272_742_818_995,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            expected_norm(7),
            2.553_831_379_703_503,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            expected_norm(100),
            9.975_047_619_047_62,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            exact_expected_norm(1),
            (2.0 / std::f64::consts::PI).sqrt(),
            max_relative = 1e-12
        );
        for n in [1, 2, 3, 5, 10, 40, 100, 1000] {
            assert_relative_eq!(
                expected_norm(n),
                exact_expected_norm(n),
                max_relative = 1e-3
            );
        }
    }

    #[test]
    fn defaults_n10() {
        let p = StrategyParameters::new(10, None).unwrap();
        assert_eq!(p.lambda, 10);
        assert_eq!(p.mu, 5);
        let expected_w = [
            0.456_272_646_903_406,
            0.270_753_097_001_785_2,
            0.162_231_117_158_669_78,
            0.085_233_547_100_164_48,
            0.025_509_591_835_974_777,
        ];
        for (w, e) in p.weights.iter().zip(expected_w) {
            assert_relative_eq!(*w, e, max_relative = 1e-12);
        }
        assert_relative_eq!(p.mu_w, 3.167_299_281_410_701_7, max_relative = 1e-12);
        assert_relative_eq!(p.c_sigma, 0.319_614_252_910_633_4, max_relative = 1e-12);
        assert_relative_eq!(p.d_sigma, 1.319_614_252_910_633_4, max_relative = 1e-12);
        assert_relative_eq!(p.c_1, 0.015_283_824_524_751_714, max_relative = 1e-12);
        assert_relative_eq!(p.c_mu, 0.020_154_282_761_208_37, max_relative = 1e-12);
        assert_relative_eq!(p.c_y, 4.828_944_326_835_046, max_relative = 1e-12);
        assert_relative_eq!(p.c_ym, 6.138_802_621_666_247, max_relative = 1e-12);
        assert_relative_eq!(p.c_c, 4.0 / 14.0, max_relative = 1e-15);
        assert_eq!(p.c_m, 1.0);
        assert_eq!(p.alpha_cov, 2.0);
        assert_eq!(p.delta_sigma_max, 1.0);
        p.validate().unwrap();
    }

    #[test]
    fn invariants_hold_over_dimensions_and_populations() {
        for n in 1..60 {
            for lambda in [None, Some(2), Some(3), Some(6), Some(50)] {
                let p = StrategyParameters::new(n, lambda).unwrap();
                p.validate().unwrap();
                assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(p.mu_w >= 1.0 - 1e-12 && p.mu_w <= p.mu as f64 + 1e-12);
                assert!(p.weights.windows(2).all(|w| w[0] > w[1]));
            }
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(
            StrategyParameters::new(0, None).unwrap_err(),
            Error::InvalidDimension(0)
        );
        assert_eq!(
            StrategyParameters::new(3, Some(1)).unwrap_err(),
            Error::InvalidPopulationSize(1)
        );
    }

    #[test]
    fn alpha_cov_rescales_rates() {
        let p = StrategyParameters::new(10, None).unwrap();
        let q = p.clone().with_alpha_cov(0.5).unwrap();
        assert!(q.c_1 < p.c_1 && q.c_mu < p.c_mu);
        assert_relative_eq!(q.c_1, p.c_1 / 4.0, max_relative = 1e-12);
        assert!(p.with_alpha_cov(-1.0).is_err());
    }
}
