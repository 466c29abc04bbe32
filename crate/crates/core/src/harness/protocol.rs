//! Drift-stream construction.
//!
//! The dataset is shuffled once, then three consecutive phases are cut from
//! disjoint class groups taken in file order. Phases B and C are relabeled
//! onto the phase-A labels (j-th class of the group to the j-th phase-A
//! class), which turns each relabeled class into a brutal drift.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use crate::model::ClassLabel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Phase::A => "A",
            Phase::B => "B",
            Phase::C => "C",
        })
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "A" => Ok(Phase::A),
            "B" => Ok(Phase::B),
            "C" => Ok(Phase::C),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolPConfig {
    /// End of phase A (exclusive sample index).
    pub t1: usize,
    /// End of phase B.
    pub t2: usize,
    /// End of phase C, i.e. the stream length.
    pub t3: usize,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    /// Class order overriding the dataset's order of occurrence.
    pub class_order: Option<Vec<String>>,
}

impl ProtocolPConfig {
    pub fn pendigits() -> Self {
        ProtocolPConfig { t1: 2000, t2: 5000, t3: 8000, n1: 4, n2: 3, n3: 3, class_order: None }
    }

    pub fn letters() -> Self {
        ProtocolPConfig { t1: 2000, t2: 6000, t3: 10000, n1: 10, n2: 10, n3: 6, class_order: None }
    }

    pub fn laviola() -> Self {
        ProtocolPConfig { t1: 2000, t2: 5000, t3: 8000, n1: 10, n2: 10, n3: 10, class_order: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 < self.t2 && self.t2 < self.t3) {
            return Err(Error::Config(format!(
                "phase boundaries must satisfy T1 < T2 < T3, got {}, {}, {}",
                self.t1, self.t2, self.t3
            )));
        }
        if self.n1 == 0 || self.t1 == 0 {
            return Err(Error::Config("phase A needs at least one class and one sample".into()));
        }
        if self.n2 > self.n1 || self.n3 > self.n1 {
            return Err(Error::Config(format!(
                "drift phases cannot use more classes than phase A (n1={}, n2={}, n3={})",
                self.n1, self.n2, self.n3
            )));
        }
        Ok(())
    }

    /// Phase lengths actually emitted: a phase with zero classes ends the
    /// stream.
    pub fn phase_lengths(&self) -> [usize; 3] {
        let b = if self.n2 == 0 { 0 } else { self.t2 - self.t1 };
        let c = if self.n2 == 0 || self.n3 == 0 { 0 } else { self.t3 - self.t2 };
        [self.t1, b, c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamPoint {
    pub features: Vec<f64>,
    pub label: ClassLabel,
    pub phase: Phase,
}

/// Ordered labeled samples with known drift times.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftStream {
    pub points: Vec<StreamPoint>,
    /// Presented label names, indexed by [`ClassLabel`].
    pub label_names: Vec<String>,
    /// Stream indices where a drift phase starts.
    pub drift_times: Vec<usize>,
}

impl DriftStream {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.features.len())
    }

    pub fn phases(&self) -> Vec<Phase> {
        self.points.iter().map(|p| p.phase).collect()
    }

    /// FNV-1a over features, labels and phases.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv::new();
        for p in &self.points {
            for v in &p.features {
                h.write(&v.to_bits().to_le_bytes());
            }
            h.write(&(p.label.0 as u64).to_le_bytes());
            h.write(&[p.phase as u8]);
        }
        h.finish()
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

/// Shuffles `dataset` with `seed` and cuts the three phases.
pub fn build_protocol_p(dataset: &Dataset, cfg: &ProtocolPConfig, seed: u64) -> Result<DriftStream> {
    cfg.validate()?;
    let order: Vec<String> = match &cfg.class_order {
        Some(o) => {
            if let Some(unknown) = o.iter().find(|c| !dataset.classes().contains(c)) {
                return Err(Error::Config(format!("class {unknown:?} is not in the dataset")));
            }
            o.clone()
        }
        None => dataset.classes().to_vec(),
    };
    let needed = cfg.n1 + cfg.n2 + cfg.n3;
    if order.len() < needed {
        return Err(Error::Config(format!("protocol needs {needed} distinct classes, dataset has {}", order.len())));
    }
    let groups = [&order[..cfg.n1], &order[cfg.n1..cfg.n1 + cfg.n2], &order[cfg.n1 + cfg.n2..needed]];

    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let lengths = cfg.phase_lengths();
    let mut points = Vec::with_capacity(lengths.iter().sum());
    let mut drift_times = Vec::new();
    for ((phase, group), &len) in Phase::ALL.iter().zip(groups).zip(&lengths) {
        if len == 0 {
            break;
        }
        if *phase != Phase::A {
            drift_times.push(points.len());
        }
        let before = points.len();
        for &i in &indices {
            if points.len() - before == len {
                break;
            }
            if let Some(j) = group.iter().position(|c| *c == dataset.labels()[i]) {
                points.push(StreamPoint {
                    features: dataset.features()[i].clone(),
                    label: ClassLabel(j),
                    phase: *phase,
                });
            }
        }
        let got = points.len() - before;
        if got < len {
            return Err(Error::Config(format!("phase {phase} needs {len} samples, its classes only provide {got}")));
        }
    }
    Ok(DriftStream { points, label_names: groups[0].to_vec(), drift_times })
}
