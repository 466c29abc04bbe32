//! Structural evolution of the rule base.
//!
//! Every principal rule may carry an [`AnticipationPair`]: two sub-rules fed
//! with the same points as their parent but with different forgetting
//! factors. When the two sub-rules become separable (and both have seen
//! enough points) the parent is replaced by them. The distance-threshold
//! criterion and the single-point covariance initialisations are kept as
//! baselines.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::adaptation::{self, initial_correlation, one_hot, ForgettingFactor};
use crate::model::{argmax, quad_form, ClassLabel, CreationRule, InitMethod, Rule, RuleSystem};
use crate::{Error, Result};

/// Diagonal scale of a covariance created on a single point.
pub const POINT_COVARIANCE_SCALE: f64 = 0.01;

/// The two anticipation sub-rules attached to a principal rule.
///
/// `stable` evolves with `alpha1` and `reactive` with `alpha2 <= alpha1`, so
/// `stable` keeps the longer history. Both sample counts restart at zero
/// whenever the pair is (re)created.
#[derive(Debug, Clone, PartialEq)]
pub struct AnticipationPair {
    pub(crate) stable: Rule,
    pub(crate) reactive: Rule,
}

impl AnticipationPair {
    pub fn new(stable: Rule, reactive: Rule) -> Result<Self> {
        if stable.feature_dim() != reactive.feature_dim() {
            return Err(Error::DimensionMismatch { expected: stable.feature_dim(), got: reactive.feature_dim() });
        }
        if stable.class_count() != reactive.class_count() {
            return Err(Error::DimensionMismatch { expected: stable.class_count(), got: reactive.class_count() });
        }
        Ok(AnticipationPair { stable, reactive })
    }

    /// Pair seeded from an existing rule: both antecedents copy the rule,
    /// the stable sub-rule keeps its consequent (and RLS state) while the
    /// reactive one starts from zero.
    pub fn mirror(rule: &Rule, omega: f64) -> Result<Self> {
        let n = rule.feature_dim();
        let mut stable = rule.clone();
        stable.reset_sample_count();
        let reactive = Rule::new(
            rule.center().clone(),
            rule.covariance().clone(),
            DMatrix::zeros(rule.class_count(), n + 1),
            initial_correlation(n, omega),
            0,
        )?;
        Ok(AnticipationPair { stable, reactive })
    }

    /// Pair whose sub-rules are both created on a single point.
    pub fn from_point(x: &[f64], class_count: usize, omega: f64) -> Result<Self> {
        let mut stable = init_rule_from_point(x, class_count, omega)?;
        stable.reset_sample_count();
        let reactive = stable.clone();
        Ok(AnticipationPair { stable, reactive })
    }

    pub fn stable(&self) -> &Rule {
        &self.stable
    }

    pub fn reactive(&self) -> &Rule {
        &self.reactive
    }

    fn add_class(&mut self) {
        self.stable.add_class();
        self.reactive.add_class();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CreationKind {
    NewClass,
    DriftSplit,
}

impl fmt::Display for CreationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CreationKind::NewClass => "NewClass",
            CreationKind::DriftSplit => "DriftSplit",
        })
    }
}

impl FromStr for CreationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "NewClass" => Ok(CreationKind::NewClass),
            "DriftSplit" => Ok(CreationKind::DriftSplit),
            other => Err(format!("unknown event kind {other:?}")),
        }
    }
}

/// A structural change. For `NewClass`, `rule_index` is the created rule;
/// for `DriftSplit` it is the rule that triggered the split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CreationEvent {
    pub stream_index: u64,
    pub rule_index: usize,
    pub kind: CreationKind,
}

/// How a learning step decides on structural changes for known classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Directive {
    /// Evaluate the configured creation criterion.
    #[default]
    Detect,
    /// Skip the criterion and split on the most activated rule.
    ForceSplit,
    /// Skip the criterion and never split.
    Suppress,
}

/// Rule created on a single point: center `x`, covariance `0.01 I`,
/// zero consequent, `Ω I` correlation. The creating point counts as the
/// rule's first sample.
pub fn init_rule_from_point(x: &[f64], class_count: usize, omega: f64) -> Result<Rule> {
    let n = x.len();
    Rule::new(
        DVector::from_column_slice(x),
        DMatrix::identity(n, n) * POINT_COVARIANCE_SCALE,
        DMatrix::zeros(class_count, n + 1),
        initial_correlation(n, omega),
        1,
    )
}

/// Covariance for a rule created on a single point. `I1` and `I3` fall back
/// to `I2` when there is no existing rule; `AnticipationPromotion` maps to
/// `I2` as well since it only applies to splits.
pub fn init_covariance(method: InitMethod, existing: &[Rule], n: usize) -> DMatrix<f64> {
    match method {
        InitMethod::I1 if !existing.is_empty() => {
            let mut diag = existing[0].covariance().diagonal();
            for rule in &existing[1..] {
                diag.zip_apply(&rule.covariance().diagonal(), |a, b| *a = a.min(b));
            }
            DMatrix::from_diagonal(&diag)
        }
        InitMethod::I3 if !existing.is_empty() => {
            let mut sum = DMatrix::zeros(n, n);
            for rule in existing {
                sum += rule.covariance();
            }
            let mut cov = sum / (existing.len() as f64 * 10.0);
            cov = (&cov + cov.transpose()) * 0.5;
            cov
        }
        _ => DMatrix::identity(n, n) * POINT_COVARIANCE_SCALE,
    }
}

/// Radius of the distance-threshold criterion,
/// `κ p^(1/√2) / (1 - 1/(k+1))^m`; infinite for `k = 0`.
pub fn gefs_star_radius(kappa: f64, dim: usize, sample_count: u64, m_exp: f64) -> f64 {
    if sample_count == 0 {
        return f64::INFINITY;
    }
    let k = sample_count as f64;
    kappa * (dim as f64).powf(std::f64::consts::FRAC_1_SQRT_2) / (1.0 - 1.0 / (k + 1.0)).powf(m_exp)
}

/// Whether `x` lies outside the Mahalanobis radius of `rule`.
pub fn gefs_star_should_create(rule: &Rule, x: &[f64], kappa: f64, m_exp: f64) -> Result<bool> {
    let r = gefs_star_radius(kappa, rule.feature_dim(), rule.sample_count(), m_exp);
    if !r.is_finite() {
        return Ok(false);
    }
    Ok(rule.mahalanobis_sq(x)? > r * r)
}

/// Euclidean distance from the rule's center to its unit Mahalanobis
/// ellipsoid, along the direction of `other_center`.
pub fn sigma_along_axis(rule: &Rule, other_center: &DVector<f64>) -> Result<f64> {
    if other_center.len() != rule.feature_dim() {
        return Err(Error::DimensionMismatch { expected: rule.feature_dim(), got: other_center.len() });
    }
    let d = other_center - rule.center();
    let norm = d.norm();
    if norm == 0.0 {
        return Err(Error::UndefinedDirection);
    }
    let q = quad_form(rule.covariance_inverse(), &d);
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::DegenerateCovariance(format!("quadratic form {q}")));
    }
    Ok(norm / q.sqrt())
}

/// Condition 1: the sub-rule centers are further apart than the sum of
/// their envelope radii along the joining axis.
pub fn condition1_separability(pair: &AnticipationPair) -> Result<bool> {
    let a = pair.stable.center();
    let b = pair.reactive.center();
    let dist = (b - a).norm();
    if dist == 0.0 {
        return Ok(false);
    }
    let sa = sigma_along_axis(&pair.stable, b)?;
    let sb = sigma_along_axis(&pair.reactive, a)?;
    Ok(dist > sa + sb)
}

/// Condition 2: both sub-rules have absorbed more than `n_min` points since
/// the pair was created.
pub fn condition2_inertia(pair: &AnticipationPair, n_min: u64) -> bool {
    pair.stable.sample_count().min(pair.reactive.sample_count()) > n_min
}

impl RuleSystem {
    fn covariance_method(&self) -> InitMethod {
        match self.hyper.init_method {
            InitMethod::AnticipationPromotion => InitMethod::I2,
            m => m,
        }
    }

    fn register_class(&mut self, label: ClassLabel) {
        while self.class_count <= label.0 {
            self.class_count += 1;
            self.known_classes.push(false);
            for rule in &mut self.rules {
                rule.add_class();
            }
            for pair in &mut self.anticipation {
                pair.add_class();
            }
        }
        self.known_classes[label.0] = true;
    }

    /// Replaces rule `rule_index` by its two anticipation sub-rules, each
    /// getting a fresh pair. Both separation conditions must hold.
    pub fn promote_subrules(&mut self, rule_index: usize) -> Result<CreationEvent> {
        let pair = self.anticipation.get(rule_index).ok_or_else(|| {
            Error::ContractViolation(format!("rule {rule_index} has no anticipation pair"))
        })?;
        if !(condition1_separability(pair)? && condition2_inertia(pair, self.hyper.n_min)) {
            return Err(Error::ContractViolation(format!(
                "separation conditions do not hold for rule {rule_index}"
            )));
        }
        self.promote_unchecked(rule_index)?;
        Ok(CreationEvent { stream_index: self.steps, rule_index, kind: CreationKind::DriftSplit })
    }

    fn promote_unchecked(&mut self, rule_index: usize) -> Result<()> {
        if self.anticipation.len() != self.rules.len() || rule_index >= self.rules.len() {
            return Err(Error::ContractViolation(format!("rule {rule_index} has no anticipation pair")));
        }
        let omega = self.hyper.omega;
        let AnticipationPair { stable, reactive } = self.anticipation[rule_index].clone();
        let stable_pair = AnticipationPair::mirror(&stable, omega)?;
        let reactive_pair = AnticipationPair::mirror(&reactive, omega)?;
        self.rules[rule_index] = stable;
        self.anticipation[rule_index] = stable_pair;
        self.rules.push(reactive);
        self.anticipation.push(reactive_pair);
        Ok(())
    }

    /// Adds a rule centred on `x` with the configured covariance
    /// initialisation; the triggering rule's pair is restarted.
    fn create_on_point(&mut self, trigger: usize, x: &[f64]) -> Result<()> {
        let cov = init_covariance(self.covariance_method(), &self.rules, self.feature_dim);
        let rule = Rule::new(
            DVector::from_column_slice(x),
            cov,
            DMatrix::zeros(self.class_count, self.feature_dim + 1),
            initial_correlation(self.feature_dim, self.hyper.omega),
            1,
        )?;
        if self.hyper.uses_anticipation() {
            self.anticipation[trigger] = AnticipationPair::mirror(&self.rules[trigger], self.hyper.omega)?;
            self.anticipation.push(AnticipationPair::mirror(&rule, self.hyper.omega)?);
        }
        self.rules.push(rule);
        Ok(())
    }

    fn split_detected(&self, m: usize, x: &[f64]) -> Result<bool> {
        match self.hyper.creation_rule {
            CreationRule::SeparabilityConditions => {
                let pair = &self.anticipation[m];
                Ok(condition2_inertia(pair, self.hyper.n_min) && condition1_separability(pair)?)
            }
            CreationRule::GefsStar => {
                gefs_star_should_create(&self.rules[m], x, self.hyper.kappa, self.hyper.m_exp)
            }
        }
    }

    fn adapt(&mut self, m: usize, x: &[f64], label: ClassLabel) -> Result<()> {
        let anticipation = self.hyper.uses_anticipation();
        adaptation::update_premise(&mut self.rules[m], x, ForgettingFactor::none())?;
        if anticipation {
            let f1 = ForgettingFactor::new(self.hyper.alpha1)?;
            let f2 = ForgettingFactor::new(self.hyper.alpha2)?;
            let pair = &mut self.anticipation[m];
            adaptation::update_premise(&mut pair.stable, x, f1)?;
            adaptation::update_premise(&mut pair.reactive, x, f2)?;
        }

        let target = one_hot(label, self.class_count);
        let act = self.normalized_activations(x)?;
        for (i, beta) in act.iter().enumerate() {
            let beta = beta.clamp(0.0, 1.0);
            adaptation::update_consequent(&mut self.rules[i], x, &target, beta)?;
            if anticipation {
                let pair = &mut self.anticipation[i];
                let k1 = pair.stable.membership(x)?;
                let k2 = pair.reactive.membership(x)?;
                let share = beta / (k1 + k2);
                adaptation::update_consequent(&mut pair.stable, x, &target, (share * k1).clamp(0.0, 1.0))?;
                adaptation::update_consequent(&mut pair.reactive, x, &target, (share * k2).clamp(0.0, 1.0))?;
            }
        }
        Ok(())
    }

    /// One learning step with the configured creation criterion.
    pub fn learn(&mut self, x: &[f64], label: ClassLabel) -> Result<Option<CreationEvent>> {
        self.learn_with(x, label, Directive::Detect)
    }

    /// One learning step. Unknown labels always create a rule; for known
    /// labels `directive` decides whether the most activated rule splits or
    /// adapts.
    pub fn learn_with(
        &mut self,
        x: &[f64],
        label: ClassLabel,
        directive: Directive,
    ) -> Result<Option<CreationEvent>> {
        self.check_dim(x)?;
        let stream_index = self.steps;
        let event = self.learn_inner(x, label, directive, stream_index);
        self.steps += 1;
        event
    }

    fn learn_inner(
        &mut self,
        x: &[f64],
        label: ClassLabel,
        directive: Directive,
        stream_index: u64,
    ) -> Result<Option<CreationEvent>> {
        if !self.is_known(label) {
            self.register_class(label);
            let cov = init_covariance(self.covariance_method(), &self.rules, self.feature_dim);
            let rule = Rule::new(
                DVector::from_column_slice(x),
                cov,
                DMatrix::zeros(self.class_count, self.feature_dim + 1),
                initial_correlation(self.feature_dim, self.hyper.omega),
                1,
            )?;
            if self.hyper.uses_anticipation() {
                self.anticipation.push(AnticipationPair::from_point(x, self.class_count, self.hyper.omega)?);
            }
            self.rules.push(rule);
            return Ok(Some(CreationEvent {
                stream_index,
                rule_index: self.rules.len() - 1,
                kind: CreationKind::NewClass,
            }));
        }

        let act = self.raw_activations(x)?;
        let m = argmax(act).expect("known class implies at least one rule");
        let split = match directive {
            Directive::Detect => self.split_detected(m, x)?,
            Directive::ForceSplit => true,
            Directive::Suppress => false,
        };
        if split {
            match self.hyper.init_method {
                InitMethod::AnticipationPromotion => self.promote_unchecked(m)?,
                _ => self.create_on_point(m, x)?,
            }
            return Ok(Some(CreationEvent { stream_index, rule_index: m, kind: CreationKind::DriftSplit }));
        }
        self.adapt(m, x, label)?;
        Ok(None)
    }
}

/// Free-function form of [`RuleSystem::learn`].
pub fn learn_step(system: &mut RuleSystem, x: &[f64], label: ClassLabel) -> Result<Option<CreationEvent>> {
    system.learn(x, label)
}
