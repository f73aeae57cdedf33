//! Parameter pair (alpha, mu) and the regime split at alpha = 1.

use crate::error::{DegwaveError, Result};

/// Weakly degenerate (Dirichlet at x = 0) vs strongly degenerate
/// (weighted Neumann at x = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    WeaklyDegenerate,
    StronglyDegenerate,
}

/// The critical constant (1-alpha)^2/4: the largest mu for which the
/// weighted quadratic form stays nonnegative.
pub fn mu_critical(alpha: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&alpha) {
        return Err(DegwaveError::Parameter(format!("alpha = {alpha} outside [0,2)")));
    }
    Ok((1.0 - alpha) * (1.0 - alpha) / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameters {
    alpha: f64,
    mu: f64,
}

impl Parameters {
    pub fn new(alpha: f64, mu: f64) -> Result<Self> {
        if alpha == 1.0 {
            return Err(DegwaveError::AlphaOne);
        }
        let crit = mu_critical(alpha)?;
        if mu > crit + 1e-14 {
            return Err(DegwaveError::Parameter(format!(
                "mu = {mu} exceeds the critical value {crit} at alpha = {alpha}"
            )));
        }
        Ok(Self { alpha, mu })
    }

    pub fn critical(alpha: f64) -> Result<Self> {
        let mu = mu_critical(alpha)?;
        Self::new(alpha, mu)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn regime(&self) -> Regime {
        if self.alpha < 1.0 {
            Regime::WeaklyDegenerate
        } else {
            Regime::StronglyDegenerate
        }
    }

    pub fn is_critical(&self) -> bool {
        (self.mu - mu_critical(self.alpha).unwrap()).abs() < 1e-14
    }

    /// Observability/controllability time threshold 4/(2-alpha).
    pub fn time_threshold(&self) -> f64 {
        4.0 / (2.0 - self.alpha)
    }
}
