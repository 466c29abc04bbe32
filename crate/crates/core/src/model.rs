//! Rules, rule systems and fuzzy inference.
//!
//! A rule's antecedent is a prototype (center + covariance) evaluated with a
//! Cauchy kernel over the Mahalanobis distance. Its consequent holds one
//! affine hyperplane per class. Rule activations are sum-normalised across
//! the principal rule set; this normalisation is an interpretation of the
//! "normalized" RBF membership and is the single place it is defined.

use nalgebra::{DMatrix, DVector};

use crate::structure::AnticipationPair;
use crate::{Error, Result};

/// Eigenvalue floor applied to every covariance before inversion.
pub const COVARIANCE_FLOOR: f64 = 1e-10;

/// Dense class identifier, assigned in order of first appearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassLabel(pub usize);

impl ClassLabel {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Covariance initialisation used when a rule is created on a single point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMethod {
    /// Diagonal of the element-wise minimum of the existing covariances.
    I1,
    /// `(1/100) * I`.
    I2,
    /// Element-wise mean of the existing covariances, divided by 10.
    I3,
    /// Replace the triggering rule by its two anticipation sub-rules.
    AnticipationPromotion,
}

/// Criterion deciding when a structural change happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CreationRule {
    /// Separability of the anticipation sub-rules plus an inertia count.
    SeparabilityConditions,
    /// Distance-threshold criterion with a sample-count dependent radius.
    GefsStar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Forgetting factor of the first (long memory) sub-rule.
    pub alpha1: f64,
    /// Forgetting factor of the second (recent memory) sub-rule.
    pub alpha2: f64,
    pub n_min: u64,
    /// Initial scale of the RLS correlation matrix.
    pub omega: f64,
    pub init_method: InitMethod,
    pub creation_rule: CreationRule,
    pub kappa: f64,
    pub m_exp: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            alpha1: 1.0,
            alpha2: 0.9,
            n_min: 20,
            omega: 100.0,
            init_method: InitMethod::AnticipationPromotion,
            creation_rule: CreationRule::SeparabilityConditions,
            kappa: 2.6,
            m_exp: 4.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperParams(msg));
        if !(self.alpha2 > 0.0 && self.alpha2 <= self.alpha1 && self.alpha1 <= 1.0) {
            return bad(format!(
                "need 0 < alpha2 <= alpha1 <= 1, got alpha1={}, alpha2={}",
                self.alpha1, self.alpha2
            ));
        }
        if self.n_min < 1 {
            return bad("n_min must be >= 1".into());
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad(format!("omega must be positive, got {}", self.omega));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad(format!("kappa must be positive, got {}", self.kappa));
        }
        if !self.m_exp.is_finite() {
            return bad(format!("m_exp must be finite, got {}", self.m_exp));
        }
        Ok(())
    }

    /// Whether rules carry anticipation sub-rules.
    pub fn uses_anticipation(&self) -> bool {
        self.init_method == InitMethod::AnticipationPromotion
            || self.creation_rule == CreationRule::SeparabilityConditions
    }
}

/// Symmetrises `cov`, lifts it to positive definiteness if its smallest
/// eigenvalue is below [`COVARIANCE_FLOOR`], and returns it with its inverse.
pub(crate) fn regularize(mut cov: DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = cov.nrows();
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateCovariance("non-finite entry".into()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = avg;
            cov[(j, i)] = avg;
        }
    }
    let eig = cov.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.min();
    let shift = if min_eig < COVARIANCE_FLOOR { COVARIANCE_FLOOR } else { 0.0 };
    if min_eig + shift <= 0.0 {
        return Err(Error::DegenerateCovariance(format!(
            "smallest eigenvalue {min_eig:e} is not recoverable"
        )));
    }
    if shift > 0.0 {
        for i in 0..n {
            cov[(i, i)] += shift;
        }
    }
    let inv_vals = eig.eigenvalues.map(|l| 1.0 / (l + shift));
    let v = &eig.eigenvectors;
    let mut inv = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = avg;
            inv[(j, i)] = avg;
        }
    }
    Ok((cov, inv))
}

/// Cauchy kernel `1 / (1 + d²)`.
#[inline]
pub fn cauchy(dist_sq: f64) -> f64 {
    1.0 / (1.0 + dist_sq)
}

/// One Takagi-Sugeno rule: a Mahalanobis prototype and per-class hyperplanes.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    center: DVector<f64>,
    covariance: DMatrix<f64>,
    covariance_inverse: DMatrix<f64>,
    /// `c x (n + 1)`; column 0 is the bias.
    conclusion: DMatrix<f64>,
    /// `(n + 1) x (n + 1)` RLS state.
    correlation: DMatrix<f64>,
    pub(crate) sample_count: u64,
}

impl Rule {
    pub fn new(
        center: DVector<f64>,
        covariance: DMatrix<f64>,
        conclusion: DMatrix<f64>,
        correlation: DMatrix<f64>,
        sample_count: u64,
    ) -> Result<Self> {
        let n = center.len();
        if covariance.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, got: covariance.nrows() });
        }
        if conclusion.ncols() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n + 1, got: conclusion.ncols() });
        }
        if correlation.shape() != (n + 1, n + 1) {
            return Err(Error::DimensionMismatch { expected: n + 1, got: correlation.nrows() });
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation("rule center must be finite".into()));
        }
        let (covariance, covariance_inverse) = regularize(covariance)?;
        Ok(Rule { center, covariance, covariance_inverse, conclusion, correlation, sample_count })
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn covariance_inverse(&self) -> &DMatrix<f64> {
        &self.covariance_inverse
    }

    pub fn conclusion(&self) -> &DMatrix<f64> {
        &self.conclusion
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.correlation
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn feature_dim(&self) -> usize {
        self.center.len()
    }

    pub fn class_count(&self) -> usize {
        self.conclusion.nrows()
    }

    pub(crate) fn set_premise(
        &mut self,
        center: DVector<f64>,
        covariance: DMatrix<f64>,
        sample_count: u64,
    ) -> Result<()> {
        let (covariance, inverse) = regularize(covariance)?;
        self.center = center;
        self.covariance = covariance;
        self.covariance_inverse = inverse;
        self.sample_count = sample_count;
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn set_consequent(&mut self, conclusion: DMatrix<f64>, correlation: DMatrix<f64>) {
        self.conclusion = conclusion;
        self.correlation = correlation;
    }

    pub(crate) fn consequent_mut(&mut self) -> (&mut DMatrix<f64>, &mut DMatrix<f64>) {
        (&mut self.conclusion, &mut self.correlation)
    }

    pub(crate) fn reset_sample_count(&mut self) {
        self.sample_count = 0;
    }

    /// Appends a zero hyperplane for a newly registered class.
    pub(crate) fn add_class(&mut self) {
        let rows = self.conclusion.nrows();
        let conclusion = std::mem::replace(&mut self.conclusion, DMatrix::zeros(0, 0));
        self.conclusion = conclusion.insert_row(rows, 0.0);
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.center.len() {
            return Err(Error::DimensionMismatch { expected: self.center.len(), got: x.len() });
        }
        Ok(())
    }

    /// `(x - μ) A⁻¹ (x - μ)ᵀ`.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let diff = DVector::from_iterator(x.len(), x.iter().zip(self.center.iter()).map(|(a, b)| a - b));
        let d2 = quad_form(&self.covariance_inverse, &diff);
        if !d2.is_finite() {
            return Err(Error::DegenerateCovariance(format!("non-finite distance {d2}")));
        }
        Ok(d2.max(0.0))
    }

    /// Cauchy membership of `x`, in `(0, 1]`.
    pub fn membership(&self, x: &[f64]) -> Result<f64> {
        Ok(cauchy(self.mahalanobis_sq(x)?))
    }

    /// Per-class outputs `Π · (1, x)`.
    pub fn output(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let mut out = self.conclusion.column(0).into_owned();
        for (k, xk) in x.iter().enumerate() {
            out.axpy(*xk, &self.conclusion.column(k + 1), 1.0);
        }
        Ok(out)
    }
}

pub(crate) fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    m.column_iter().zip(v.iter()).map(|(col, vj)| vj * col.dot(v)).sum()
}

/// Membership of `x` to `rule`.
pub fn membership(rule: &Rule, x: &[f64]) -> Result<f64> {
    rule.membership(x)
}

/// Output of `rule` at `x`.
pub fn rule_output(rule: &Rule, x: &[f64]) -> Result<DVector<f64>> {
    rule.output(x)
}

/// Sum-normalises raw kernel values.
pub(crate) fn normalize(raw: &mut [f64]) {
    let total: f64 = raw.iter().sum();
    for v in raw.iter_mut() {
        *v /= total;
    }
}

/// Index of the largest value; the first index wins ties.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: ClassLabel,
    pub scores: Vec<f64>,
}

/// The principal rule set, its anticipation module and the learning state.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSystem {
    pub(crate) rules: Vec<Rule>,
    pub(crate) anticipation: Vec<AnticipationPair>,
    pub(crate) class_count: usize,
    pub(crate) feature_dim: usize,
    pub(crate) hyper: HyperParams,
    pub(crate) known_classes: Vec<bool>,
    pub(crate) steps: u64,
}

impl RuleSystem {
    pub fn new(feature_dim: usize, hyper: HyperParams) -> Result<Self> {
        hyper.validate()?;
        if feature_dim == 0 {
            return Err(Error::InvalidHyperParams("feature dimension must be >= 1".into()));
        }
        Ok(RuleSystem {
            rules: Vec::new(),
            anticipation: Vec::new(),
            class_count: 0,
            feature_dim,
            hyper,
            known_classes: Vec::new(),
            steps: 0,
        })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn anticipation(&self) -> &[AnticipationPair] {
        &self.anticipation
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    /// Number of points consumed by `learn`, i.e. the next stream index.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn is_known(&self, label: ClassLabel) -> bool {
        self.known_classes.get(label.0).copied().unwrap_or(false)
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch { expected: self.feature_dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation("feature vector must be finite".into()));
        }
        Ok(())
    }

    /// Raw Cauchy memberships of every principal rule.
    pub fn raw_activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        if self.rules.is_empty() {
            return Err(Error::NoRules);
        }
        self.rules.iter().map(|r| r.membership(x)).collect()
    }

    /// Activations normalised to sum to one across the principal rules.
    pub fn normalized_activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut act = self.raw_activations(x)?;
        normalize(&mut act);
        Ok(act)
    }

    /// Index of the most activated principal rule.
    pub fn most_activated(&self, x: &[f64]) -> Result<usize> {
        let act = self.raw_activations(x)?;
        Ok(argmax(act).expect("non-empty"))
    }

    /// Weighted class scores and their argmax. The anticipation module is
    /// not consulted.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let act = self.normalized_activations(x)?;
        let mut scores = DVector::zeros(self.class_count);
        for (rule, beta) in self.rules.iter().zip(&act) {
            scores.axpy(*beta, &rule.output(x)?, 1.0);
        }
        let label = argmax(scores.iter().copied()).map(ClassLabel).ok_or(Error::NoRules)?;
        Ok(Prediction { label, scores: scores.iter().copied().collect() })
    }
}

/// Free-function form of [`RuleSystem::normalized_activations`].
pub fn normalized_activations(system: &RuleSystem, x: &[f64]) -> Result<Vec<f64>> {
    system.normalized_activations(x)
}

/// Free-function form of [`RuleSystem::predict`].
pub fn predict(system: &RuleSystem, x: &[f64]) -> Result<Prediction> {
    system.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(center: &[f64], cov: DMatrix<f64>, conclusion: DMatrix<f64>) -> Rule {
        let n = center.len();
        Rule::new(
            DVector::from_column_slice(center),
            cov,
            conclusion,
            DMatrix::identity(n + 1, n + 1) * 100.0,
            1,
        )
        .unwrap()
    }

    fn system_with(rules: Vec<Rule>, classes: usize) -> RuleSystem {
        let n = rules[0].feature_dim();
        let mut s = RuleSystem::new(
            n,
            HyperParams { creation_rule: CreationRule::GefsStar, init_method: InitMethod::I2, ..Default::default() },
        )
        .unwrap();
        s.rules = rules;
        s.class_count = classes;
        s.known_classes = vec![true; classes];
        s
    }

    #[test]
    fn membership_examples() {
        let r = rule(&[0.0, 0.0], DMatrix::identity(2, 2), DMatrix::zeros(1, 3));
        assert_eq!(r.membership(&[0.0, 0.0]).unwrap(), 1.0);
        assert_close!(r.membership(&[1.0, 0.0]).unwrap(), 0.5, 1e-15);

        let r = rule(&[0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])), DMatrix::zeros(1, 3));
        assert_close!(r.mahalanobis_sq(&[2.0, 0.0]).unwrap(), 1.0, 1e-14);
        assert_close!(r.membership(&[2.0, 0.0]).unwrap(), 0.5, 1e-14);
    }

    #[test]
    fn membership_rejects_wrong_dimension() {
        let r = rule(&[0.0, 0.0], DMatrix::identity(2, 2), DMatrix::zeros(1, 3));
        assert!(matches!(r.membership(&[0.0]), Err(Error::DimensionMismatch { expected: 2, got: 1 })));
    }

    proptest::proptest! {
        #[test]
        fn normalization_ignores_a_common_factor(
            raw in proptest::collection::vec(1e-6..1.0f64, 1..10), c in 1e-3..1e3f64
        ) {
            let mut a = raw.clone();
            let mut b: Vec<f64> = raw.iter().map(|v| v * c).collect();
            normalize(&mut a);
            normalize(&mut b);
            proptest::prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                proptest::prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_activation_examples() {
        let r0 = rule(&[0.0, 0.0], DMatrix::identity(2, 2), DMatrix::zeros(1, 3));
        let s = system_with(vec![r0.clone()], 1);
        assert_eq!(s.normalized_activations(&[3.0, -1.0]).unwrap(), vec![1.0]);

        let s = system_with(vec![r0.clone(), r0.clone()], 1);
        assert_eq!(s.normalized_activations(&[0.3, 0.7]).unwrap(), vec![0.5, 0.5]);

        let r1 = rule(&[2.0, 0.0], DMatrix::identity(2, 2), DMatrix::zeros(1, 3));
        let s = system_with(vec![r0, r1], 1);
        let act = s.normalized_activations(&[0.0, 0.0]).unwrap();
        assert_close!(act[0], 5.0 / 6.0, 1e-15);
        assert_close!(act[1], 1.0 / 6.0, 1e-15);
    }

    #[test]
    fn empty_system_has_no_activations() {
        let s = RuleSystem::new(2, HyperParams::default()).unwrap();
        assert!(matches!(s.normalized_activations(&[0.0, 0.0]), Err(Error::NoRules)));
        assert!(matches!(s.predict(&[0.0, 0.0]), Err(Error::NoRules)));
    }

    #[test]
    fn rule_output_examples() {
        let r = rule(&[0.0], DMatrix::identity(1, 1), DMatrix::zeros(3, 2));
        assert_eq!(r.output(&[5.0]).unwrap(), DVector::zeros(3));

        let r = rule(&[0.0], DMatrix::identity(1, 1), DMatrix::from_row_slice(1, 2, &[0.5, 2.0]));
        assert_eq!(r.output(&[3.0]).unwrap()[0], 6.5);

        let pi = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let r = rule(&[0.0, 0.0], DMatrix::identity(2, 2), pi);
        assert_eq!(r.output(&[2.0, 3.0]).unwrap().as_slice(), &[1.0, 5.0]);
    }

    #[test]
    fn predict_single_rule_and_tie() {
        let pi = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.0, 0.9]);
        let s = system_with(vec![rule(&[0.0], DMatrix::identity(1, 1), pi)], 2);
        assert_eq!(s.predict(&[1.0]).unwrap().label, ClassLabel(1));

        let a = rule(&[0.0], DMatrix::identity(1, 1), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let b = rule(&[0.0], DMatrix::identity(1, 1), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        let p = system_with(vec![a, b], 2).predict(&[0.4]).unwrap();
        assert_eq!(p.scores, vec![0.5, 0.5]);
        assert_eq!(p.label, ClassLabel(0));
    }

    #[test]
    fn regularize_lifts_singular_matrix() {
        let (cov, inv) = regularize(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(cov, DMatrix::identity(3, 3) * COVARIANCE_FLOOR);
        assert_close!(inv[(0, 0)], 1.0 / COVARIANCE_FLOOR, 1e-2);
        assert!(regularize(DMatrix::from_element(2, 2, f64::NAN)).is_err());
        assert!(matches!(
            regularize(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]))),
            Err(Error::DegenerateCovariance(_))
        ));
    }

    #[test]
    fn hyper_params_validation() {
        assert!(HyperParams::default().validate().is_ok());
        let bad = HyperParams { alpha1: 0.9, alpha2: 0.95, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = HyperParams { omega: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = HyperParams { n_min: 0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn add_class_appends_zero_row() {
        let mut r = rule(&[0.0], DMatrix::identity(1, 1), DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
        r.add_class();
        assert_eq!(r.conclusion(), &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]));
    }
}
