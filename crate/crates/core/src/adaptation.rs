//! Incremental parameter updates.
//!
//! Premises follow the windowed running mean/covariance with
//! `t = min(k + 1, tmax)`. The covariance outer product is taken around the
//! freshly updated center. Consequents use the standard weighted recursive
//! least squares step, one correlation matrix per rule shared by all class
//! hyperplanes.

use nalgebra::{DMatrix, DVector};

use crate::model::{ClassLabel, Rule, RuleSystem};
use crate::{Error, Result};

/// Forgetting factor `α = (tmax - 1) / tmax`; `α = 1` disables forgetting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForgettingFactor {
    alpha: f64,
}

impl ForgettingFactor {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidHyperParams(format!("forgetting factor must lie in (0, 1], got {alpha}")));
        }
        Ok(ForgettingFactor { alpha })
    }

    pub fn none() -> Self {
        ForgettingFactor { alpha: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Window length, `None` when there is no forgetting.
    pub fn tmax(&self) -> Option<u64> {
        if self.alpha >= 1.0 {
            None
        } else {
            Some(((1.0 / (1.0 - self.alpha)).round() as u64).max(2))
        }
    }

    /// Effective sample count for the next update of a rule that has seen
    /// `seen` points.
    pub fn effective_count(&self, seen: u64) -> u64 {
        let t = seen.saturating_add(1);
        match self.tmax() {
            Some(tmax) => t.min(tmax),
            None => t,
        }
    }
}

/// One-hot target over `class_count` classes.
pub fn one_hot(label: ClassLabel, class_count: usize) -> DVector<f64> {
    let mut y = DVector::zeros(class_count);
    y[label.0] = 1.0;
    y
}

/// Moves the rule's center and covariance towards `x`.
pub fn update_premise(rule: &mut Rule, x: &[f64], forgetting: ForgettingFactor) -> Result<()> {
    let n = rule.feature_dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let t = forgetting.effective_count(rule.sample_count()) as f64;
    let keep = (t - 1.0) / t;
    let x = DVector::from_column_slice(x);

    let center = rule.center() * keep + &x / t;
    let diff = &x - &center;
    let mut cov = rule.covariance() * keep;
    cov.ger(1.0 / t, &diff, &diff, 1.0);
    rule.set_premise(center, cov, rule.sample_count() + 1)
}

/// Weighted RLS step on all class hyperplanes of `rule`.
pub fn update_consequent(rule: &mut Rule, x: &[f64], target: &DVector<f64>, beta: f64) -> Result<()> {
    let n = rule.feature_dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if target.len() != rule.class_count() {
        return Err(Error::DimensionMismatch { expected: rule.class_count(), got: target.len() });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::ContractViolation(format!("activation weight {beta} outside [0, 1]")));
    }
    if beta == 0.0 {
        return Ok(());
    }
    let mut xt = DVector::zeros(n + 1);
    xt[0] = 1.0;
    xt.rows_mut(1, n).copy_from_slice(x);

    let (conclusion, correlation) = rule.consequent_mut();
    let cx = &*correlation * &xt;
    let denom = 1.0 + beta * xt.dot(&cx);
    correlation.ger(-beta / denom, &cx, &cx, 1.0);
    // gain = β C_new x̃ = β C_old x̃ / denom
    let gain = cx * (beta / denom);
    let error = target - &*conclusion * &xt;
    conclusion.ger(1.0, &error, &gain, 1.0);
    Ok(())
}

/// WRLS weight of principal rule `rule_index` at `x`: its normalised
/// activation.
pub fn effective_membership(system: &RuleSystem, x: &[f64], rule_index: usize) -> Result<f64> {
    let act = system.normalized_activations(x)?;
    act.get(rule_index).copied().ok_or_else(|| {
        Error::ContractViolation(format!("rule index {rule_index} out of range ({} rules)", act.len()))
    })
}

/// Fresh RLS correlation matrix `Ω · I`.
pub(crate) fn initial_correlation(n: usize, omega: f64) -> DMatrix<f64> {
    DMatrix::identity(n + 1, n + 1) * omega
}
