//! Benchmark harness: datasets, drift streams, prequential evaluation and
//! detection traces.

mod dataset;
mod prequential;
mod protocol;
mod trace;

pub use dataset::{load_dataset, parse_dataset, Dataset, DatasetLayout, LabelPosition};
pub use prequential::{
    derive_seed, prequential_run, repeated_runs, ConfigRuns, ModelSpec, PrequentialRecord, ReplaySource, RunOutput,
    TraceMode,
};
pub use protocol::{build_protocol_p, DriftStream, Phase, ProtocolPConfig, StreamPoint};
pub use trace::DriftTrace;
