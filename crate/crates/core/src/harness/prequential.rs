//! Test-then-train evaluation and its repeated, seeded variant.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::dataset::Dataset;
use super::protocol::{build_protocol_p, DriftStream, Phase, ProtocolPConfig};
use super::trace::DriftTrace;
use crate::analysis::smooth;
use crate::model::{HyperParams, RuleSystem};
use crate::structure::{CreationKind, Directive};
use crate::{Error, Result};

/// How structural decisions are taken during a run.
#[derive(Debug, Clone, Copy)]
pub enum TraceMode<'a> {
    /// Live detection; events are not kept.
    Detect,
    /// Live detection; events are returned as a trace.
    Record,
    /// Detection bypassed; splits happen exactly at the trace's indices.
    Replay(&'a DriftTrace),
}

/// Per-step 0/1 scores of a prequential run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrequentialRecord {
    pub scores: Vec<u8>,
    pub phases: Vec<Phase>,
}

impl PrequentialRecord {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn correct(&self) -> usize {
        self.scores.iter().filter(|s| **s == 1).count()
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.correct() as f64 / self.len() as f64
    }

    pub fn scores_f64(&self) -> Vec<f64> {
        self.scores.iter().map(|s| f64::from(*s)).collect()
    }

    /// `step,score,smoothed,phase` with a trailing-window mean of `window`.
    pub fn to_csv(&self, window: usize) -> String {
        let smoothed = smooth(&self.scores_f64(), window);
        let mut out = String::from("step,score,smoothed,phase\n");
        for (i, ((s, m), p)) in self.scores.iter().zip(&smoothed).zip(&self.phases).enumerate() {
            let _ = writeln!(out, "{i},{s},{m},{p}");
        }
        out
    }
}

/// Runs `stream` through a fresh system: every point is scored by the
/// current model, then learned.
pub fn prequential_run<F>(factory: F, stream: &DriftStream, mode: TraceMode<'_>) -> Result<(PrequentialRecord, DriftTrace)>
where
    F: FnOnce() -> Result<RuleSystem>,
{
    let mut system = factory()?;
    if system.steps() != 0 {
        return Err(Error::ContractViolation("prequential runs need a fresh system".into()));
    }
    if system.feature_dim() != stream.feature_dim() {
        return Err(Error::DimensionMismatch { expected: system.feature_dim(), got: stream.feature_dim() });
    }
    let expected = match mode {
        TraceMode::Replay(trace) => {
            if let Some(last) = trace.events().last() {
                if last.stream_index as usize >= stream.len() {
                    return Err(Error::TraceMismatch(format!(
                        "event at index {} is beyond the stream ({} points)",
                        last.stream_index,
                        stream.len()
                    )));
                }
            }
            Some(trace.by_index())
        }
        _ => None,
    };

    let mut scores = Vec::with_capacity(stream.len());
    let mut trace = DriftTrace::default();
    for (i, point) in stream.points.iter().enumerate() {
        let hit = match system.predict(&point.features) {
            Ok(p) => p.label == point.label,
            Err(Error::NoRules) => false,
            Err(e) => return Err(e),
        };
        scores.push(u8::from(hit));

        let directive = match &expected {
            Some(map) => match map.get(&(i as u64)) {
                Some(e) if e.kind == CreationKind::DriftSplit => Directive::ForceSplit,
                _ => Directive::Suppress,
            },
            None => Directive::Detect,
        };
        let event = system.learn_with(&point.features, point.label, directive)?;
        if let Some(map) = &expected {
            let want = map.get(&(i as u64)).map(|e| e.kind);
            if want != event.map(|e| e.kind) {
                return Err(Error::TraceMismatch(format!(
                    "at index {i} the trace expects {want:?} but the run produced {:?}",
                    event.map(|e| e.kind)
                )));
            }
        }
        if let (Some(e), false) = (event, matches!(mode, TraceMode::Detect)) {
            trace.push(e);
        }
    }
    Ok((PrequentialRecord { scores, phases: stream.phases() }, trace))
}

/// Per-repeat seed: SplitMix64 finaliser applied to
/// `master + (repeat + 1) * 0x9E3779B97F4A7C15`.
pub fn derive_seed(master: u64, repeat: usize) -> u64 {
    let mut z = master.wrapping_add((repeat as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Where a replaying model takes its traces from.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplaySource {
    /// Traces recorded, in the same repeat, by another model of the batch.
    Config(String),
    /// One externally supplied trace per repeat.
    Traces(Vec<DriftTrace>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub hyper: HyperParams,
    pub replay: Option<ReplaySource>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record: PrequentialRecord,
    pub trace: DriftTrace,
    pub stream_checksum: u64,
}

/// All repeats of one model, in repeat order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigRuns {
    pub name: String,
    pub runs: Vec<RunOutput>,
}

impl ConfigRuns {
    pub fn mean_accuracy(&self) -> f64 {
        self.runs.iter().map(|r| r.record.mean_accuracy()).sum::<f64>() / self.runs.len() as f64
    }

    /// Mean over repeats of the per-step scores.
    pub fn mean_scores(&self) -> Vec<f64> {
        let len = self.runs[0].record.len();
        let mut acc = vec![0.0; len];
        for run in &self.runs {
            for (a, s) in acc.iter_mut().zip(&run.record.scores) {
                *a += f64::from(*s);
            }
        }
        let m = self.runs.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        acc
    }

    pub fn phases(&self) -> &[Phase] {
        &self.runs[0].record.phases
    }
}

fn execution_order(specs: &[ModelSpec]) -> Result<Vec<usize>> {
    let mut order = Vec::with_capacity(specs.len());
    let mut done = vec![false; specs.len()];
    while order.len() < specs.len() {
        let before = order.len();
        for (i, spec) in specs.iter().enumerate() {
            if done[i] {
                continue;
            }
            let ready = match &spec.replay {
                Some(ReplaySource::Config(src)) => {
                    let j = specs.iter().position(|s| &s.name == src).ok_or_else(|| {
                        Error::Config(format!("model {:?} replays unknown model {src:?}", spec.name))
                    })?;
                    done[j]
                }
                _ => true,
            };
            if ready {
                done[i] = true;
                order.push(i);
            }
        }
        if order.len() == before {
            return Err(Error::Config("replay sources form a cycle".into()));
        }
    }
    Ok(order)
}

/// Runs every model on `repeats` shuffles of the dataset. All models of a
/// repeat share the same stream; results come back in spec and repeat order
/// whatever the scheduling.
pub fn repeated_runs(
    dataset: &Dataset,
    cfg: &ProtocolPConfig,
    repeats: usize,
    master_seed: u64,
    specs: &[ModelSpec],
) -> Result<Vec<ConfigRuns>> {
    if repeats == 0 {
        return Err(Error::Config("need at least one repeat".into()));
    }
    if specs.is_empty() {
        return Err(Error::Config("need at least one model".into()));
    }
    let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("model names must be unique".into()));
    }
    for spec in specs {
        spec.hyper.validate()?;
        if let Some(ReplaySource::Traces(t)) = &spec.replay {
            if t.len() != repeats {
                return Err(Error::TraceMismatch(format!(
                    "model {:?} has {} traces for {repeats} repeats",
                    spec.name,
                    t.len()
                )));
            }
        }
    }
    let order = execution_order(specs)?;

    let per_repeat: Vec<Vec<RunOutput>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let stream = build_protocol_p(dataset, cfg, derive_seed(master_seed, r))?;
            let checksum = stream.checksum();
            let mut outputs: Vec<Option<RunOutput>> = vec![None; specs.len()];
            for &i in &order {
                let spec = &specs[i];
                let factory = || RuleSystem::new(stream.feature_dim(), spec.hyper.clone());
                let (record, trace) = match &spec.replay {
                    None => prequential_run(factory, &stream, TraceMode::Record)?,
                    Some(ReplaySource::Traces(t)) => prequential_run(factory, &stream, TraceMode::Replay(&t[r]))?,
                    Some(ReplaySource::Config(src)) => {
                        let j = specs.iter().position(|s| &s.name == src).expect("checked");
                        let source = outputs[j].as_ref().expect("ordered").trace.clone();
                        prequential_run(factory, &stream, TraceMode::Replay(&source))?
                    }
                };
                outputs[i] = Some(RunOutput { record, trace, stream_checksum: checksum });
            }
            Ok(outputs.into_iter().map(|o| o.expect("all run")).collect())
        })
        .collect::<Result<_>>()?;

    let mut result: Vec<ConfigRuns> =
        specs.iter().map(|s| ConfigRuns { name: s.name.clone(), runs: Vec::with_capacity(repeats) }).collect();
    for outputs in per_repeat {
        for (slot, out) in result.iter_mut().zip(outputs) {
            slot.runs.push(out);
        }
    }
    Ok(result)
}
