//! Online evolving Takagi-Sugeno fuzzy classifier with a parallel drift
//! anticipation module, and the tooling to benchmark it on data streams with
//! injected brutal concept drifts.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: rules, rule systems and inference.
//! - [`adaptation`]: premise (center/covariance with forgetting) and
//!   consequent (weighted recursive least squares) updates.
//! - [`structure`]: rule creation criteria, covariance initialisation,
//!   anticipation pairs, promotion and the full learning step.
//! - [`harness`]: dataset loading, drift-stream construction, prequential
//!   evaluation and detection-trace record/replay.
//! - [`analysis`]: score smoothing, reactivity-model fitting and summaries.

#[cfg(test)]
#[macro_use]
mod test_util;

pub mod adaptation;
pub mod analysis;
mod error;
pub mod harness;
pub mod model;
pub mod structure;

pub use error::{Error, Result};
pub use model::{ClassLabel, CreationRule, HyperParams, InitMethod, Prediction, Rule, RuleSystem};
pub use structure::{AnticipationPair, CreationEvent, CreationKind, Directive};
