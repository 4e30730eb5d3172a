//! Conjugate normal-gamma model for the observations reaching a single node.
//!
//! `y ~ N(μ, 1/τ)` with prior `μ | τ ~ N(m, 1/(κτ))`, `τ ~ Gamma(α, rate β)`.
//! The posterior predictive is a Student-t with `2α` degrees of freedom,
//! location `m` and squared scale `β(κ+1)/(ακ)`.

use crate::error::{check_finite, Error, Result};
use crate::math;
use alloc::format;

/// Hyperparameters `(m, κ, α, β)` of a normal-gamma distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalGammaParams {
    pub m: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NormalGammaParams {
    /// Validated prior. `alpha` must exceed 1/2 so that every predictive
    /// Student-t has a mean.
    pub fn new(m: f64, kappa: f64, alpha: f64, beta: f64) -> Result<Self> {
        check_finite("m", m)?;
        for (name, v) in [("kappa", kappa), ("alpha", alpha), ("beta", beta)] {
            check_finite(name, v)?;
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if alpha <= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "alpha must be > 1/2 for the predictive mean to exist, got {alpha}"
            )));
        }
        Ok(Self { m, kappa, alpha, beta })
    }

    /// Conjugate update on accumulated statistics. `n = 0` returns `self`.
    pub fn posterior(&self, stats: &SufficientStats) -> Self {
        if stats.n == 0 {
            return *self;
        }
        let n = stats.n as f64;
        let mean = stats.sum_y / n;
        let kappa_n = self.kappa + n;
        // within-sample scatter; clamp away rounding below zero
        let scatter = (stats.sum_y_sq - stats.sum_y * mean).max(0.0);
        let dev = mean - self.m;
        Self {
            m: (self.kappa * self.m + stats.sum_y) / kappa_n,
            kappa: kappa_n,
            alpha: self.alpha + 0.5 * n,
            beta: self.beta + 0.5 * scatter + 0.5 * self.kappa * n * dev * dev / kappa_n,
        }
    }

    pub fn degrees_of_freedom(&self) -> f64 {
        2.0 * self.alpha
    }

    /// Squared scale of the predictive Student-t.
    pub fn predictive_scale_sq(&self) -> f64 {
        self.beta * (self.kappa + 1.0) / (self.alpha * self.kappa)
    }

    /// Log density of the posterior predictive at `y`.
    pub fn predictive_log_density(&self, y: f64) -> Result<f64> {
        check_finite("y", y)?;
        Ok(self.predictive_log_density_unchecked(y))
    }

    pub(crate) fn predictive_log_density_unchecked(&self, y: f64) -> f64 {
        let nu = self.degrees_of_freedom();
        let scale_sq = self.predictive_scale_sq();
        let t = (y - self.m) / math::sqrt(nu * scale_sq);
        // ln(1 + t²) without overflowing t²
        let log_kernel = if math::abs(t) < 1e150 {
            math::ln_1p(t * t)
        } else {
            2.0 * math::ln(math::abs(t))
        };
        math::ln_gamma(0.5 * (nu + 1.0))
            - math::ln_gamma(0.5 * nu)
            - 0.5 * (math::ln(nu * scale_sq) + math::LN_PI)
            - 0.5 * (nu + 1.0) * log_kernel
    }

    /// Mean of the posterior predictive (the Student-t location).
    pub fn predictive_mean(&self) -> f64 {
        self.m
    }
}

/// Count, sum and sum of squares of the observations seen by a node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SufficientStats {
    pub n: u64,
    pub sum_y: f64,
    pub sum_y_sq: f64,
}

impl SufficientStats {
    pub const EMPTY: Self = Self { n: 0, sum_y: 0.0, sum_y_sq: 0.0 };

    pub fn update(&self, y: f64) -> Result<Self> {
        check_finite("y", y)?;
        Ok(self.updated_unchecked(y))
    }

    pub(crate) fn updated_unchecked(&self, y: f64) -> Self {
        Self {
            n: self.n + 1,
            sum_y: self.sum_y + y,
            sum_y_sq: self.sum_y_sq + y * y,
        }
    }

    pub fn from_values(ys: &[f64]) -> Result<Self> {
        ys.iter().try_fold(Self::EMPTY, |acc, &y| acc.update(y))
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum_y / self.n as f64)
    }
}
