//! Experiment driver: runs configured models over protocol-P streams and
//! writes per-run records, drift traces, phase fits and summary tables.
//!
//! Output layout under the output directory:
//!
//! ```text
//! summary.csv   config,mean_S_plus_smin,mean_tau,mean_acc
//! fits.csv      config,phase,S_plus_smin,tau,residual
//! accuracy.csv  config,mean_acc
//! <model>/repeat_<r>.csv    step,score,smoothed,phase
//! <model>/repeat_<r>.trace  stream_index,rule_index,kind
//! <model>/mean.csv          step,mean_score,smoothed,phase
//! <model>/plot.csv          step,smoothed_score
//! ```

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use parafis::analysis::{self, SummaryRow, PLOT_WINDOW};
use parafis::harness::{self, ConfigRuns, DriftTrace, Phase, ReplaySource};

pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments, configuration or missing inputs.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(parafis::Error),
}

impl From<parafis::Error> for CliError {
    fn from(e: parafis::Error) -> Self {
        match e {
            parafis::Error::Config(_) | parafis::Error::InvalidHyperParams(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Command-line overrides of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub runs: Vec<ConfigRuns>,
    pub summary: Vec<SummaryRow>,
}

struct Prepared {
    cfg: ExperimentConfig,
    dataset: harness::Dataset,
    seed: u64,
    out: PathBuf,
}

fn prepare(config_file: &Path, overrides: &Overrides, default_sub: Option<&str>) -> Result<Prepared, CliError> {
    let mut cfg = ExperimentConfig::load(config_file)?;
    if let Some(r) = overrides.repeats {
        cfg.repeats = r;
        cfg.validate()?;
    }
    let seed = overrides
        .seed
        .or(cfg.seed)
        .ok_or_else(|| CliError::Usage("seed: required in the config or via --seed".into()))?;
    if !cfg.dataset.path.is_file() {
        return Err(CliError::Usage(format!("dataset not found: {}", cfg.dataset.path.display())));
    }
    let dataset = harness::load_dataset(&cfg.dataset.path, &cfg.layout()?)?;
    let out = match (&overrides.out, default_sub) {
        (Some(o), _) => o.clone(),
        (None, Some(sub)) => cfg.output.join(sub),
        (None, None) => cfg.output.clone(),
    };
    Ok(Prepared { cfg, dataset, seed, out })
}

/// Runs every configured model with live drift detection.
pub fn cmd_run(config_file: &Path, overrides: &Overrides) -> Result<RunReport, CliError> {
    let p = prepare(config_file, overrides, None)?;
    let specs = p.cfg.specs();
    execute(&p, &specs)
}

/// Runs every configured model with structural changes taken from
/// recorded traces. `trace` is a single trace file (one repeat only) or a
/// directory holding `repeat_<r>.trace` files.
pub fn cmd_replay(config_file: &Path, trace: &Path, overrides: &Overrides) -> Result<RunReport, CliError> {
    let p = prepare(config_file, overrides, Some("replay"))?;
    let traces = load_traces(trace, p.cfg.repeats)?;
    let specs: Vec<_> = p
        .cfg
        .specs()
        .into_iter()
        .map(|mut s| {
            s.replay = Some(ReplaySource::Traces(traces.clone()));
            s
        })
        .collect();
    execute(&p, &specs)
}

fn load_traces(path: &Path, repeats: usize) -> Result<Vec<DriftTrace>, CliError> {
    if path.is_dir() {
        (0..repeats)
            .map(|r| {
                let file = path.join(format!("repeat_{r}.trace"));
                if !file.is_file() {
                    return Err(CliError::Usage(format!("trace not found: {}", file.display())));
                }
                Ok(DriftTrace::read(&file)?)
            })
            .collect()
    } else if path.is_file() {
        if repeats != 1 {
            return Err(CliError::Usage(format!(
                "a single trace file needs repeats = 1 (got {repeats}); pass a directory of repeat_<r>.trace files"
            )));
        }
        Ok(vec![DriftTrace::read(path)?])
    } else {
        Err(CliError::Usage(format!("trace not found: {}", path.display())))
    }
}

fn execute(p: &Prepared, specs: &[harness::ModelSpec]) -> Result<RunReport, CliError> {
    let protocol = p.cfg.protocol()?;
    let runs = harness::repeated_runs(&p.dataset, &protocol, p.cfg.repeats, p.seed, specs)?;

    let curves: Vec<Vec<f64>> = runs.iter().map(|c| analysis::smooth(&c.mean_scores(), p.cfg.smoothing)).collect();
    let summary = analysis::summarize(
        runs.iter().zip(&curves).map(|(c, curve)| (c.name.as_str(), curve.as_slice(), c.phases(), c.mean_accuracy())),
    )?;

    write(&p.out.join("summary.csv"), &analysis::summary_csv(&summary))?;
    write(&p.out.join("fits.csv"), &analysis::fits_csv(&summary))?;
    write(&p.out.join("accuracy.csv"), &analysis::accuracy_csv(&summary))?;
    for (c, curve) in runs.iter().zip(&curves) {
        let dir = p.out.join(&c.name);
        for (r, run) in c.runs.iter().enumerate() {
            write(&dir.join(format!("repeat_{r}.csv")), &run.record.to_csv(p.cfg.smoothing))?;
            write(&dir.join(format!("repeat_{r}.trace")), &run.trace.to_text())?;
        }
        write(&dir.join("mean.csv"), &mean_csv(&c.mean_scores(), curve, c.phases()))?;
        write(&dir.join("plot.csv"), &analysis::plot_csv(&analysis::smooth(&c.mean_scores(), PLOT_WINDOW)))?;
    }
    Ok(RunReport { out_dir: p.out.clone(), runs, summary })
}

fn mean_csv(mean: &[f64], smoothed: &[f64], phases: &[Phase]) -> String {
    let mut out = String::from("step,mean_score,smoothed,phase\n");
    for (i, ((m, s), p)) in mean.iter().zip(smoothed).zip(phases).enumerate() {
        let _ = writeln!(out, "{i},{m},{s},{p}");
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| parafis::Error::io(dir, e))?;
    }
    Ok(std::fs::write(path, contents).map_err(|e| parafis::Error::io(path, e))?)
}

/// Result of fitting an exported curve.
#[derive(Debug)]
pub struct FitReport {
    pub row: SummaryRow,
    pub csv_path: PathBuf,
}

/// Fits each phase of the `smoothed` (or `smoothed_score`) column of a
/// record CSV. Phases come from `boundaries` (exclusive phase ends, at most
/// three) when given, else from a `phase` column, else the whole curve is
/// one phase.
pub fn cmd_fit(record_csv: &Path, boundaries: Option<&[usize]>, out: Option<&Path>) -> Result<FitReport, CliError> {
    let text = std::fs::read_to_string(record_csv)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", record_csv.display())))?;
    let (curve, phase_col) = parse_curve(&text)?;
    let phases = match (boundaries, phase_col) {
        (Some(b), _) => phases_from_boundaries(b, curve.len())?,
        (None, Some(p)) => p,
        (None, None) => vec![Phase::A; curve.len()],
    };
    let config = record_csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let fits = analysis::fit_phases(&curve, &phases)?;
    let mean = curve.iter().sum::<f64>() / curve.len() as f64;
    let row = SummaryRow { config, phases: fits, mean_acc: mean };
    let csv_path = match out {
        Some(o) => o.to_path_buf(),
        None => record_csv.with_file_name(format!("{}_fits.csv", row.config)),
    };
    write(&csv_path, &analysis::fits_csv(std::slice::from_ref(&row)))?;
    Ok(FitReport { row, csv_path })
}

/// Smoothed curve and optional phase column of a record CSV.
pub fn parse_curve(text: &str) -> Result<(Vec<f64>, Option<Vec<Phase>>), CliError> {
    let bad = |line: usize, msg: String| CliError::Runtime(parafis::Error::Parse { line, message: msg });
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let value_col = cols
        .iter()
        .position(|c| *c == "smoothed" || *c == "smoothed_score")
        .ok_or_else(|| bad(1, "no smoothed or smoothed_score column".into()))?;
    let phase_col = cols.iter().position(|c| *c == "phase");

    let mut curve = Vec::new();
    let mut phases = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(bad(idx + 1, format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let v: f64 = fields[value_col]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| bad(idx + 1, format!("bad value {:?}", fields[value_col])))?;
        curve.push(v);
        if let Some(c) = phase_col {
            phases.push(fields[c].parse::<Phase>().map_err(|e| bad(idx + 1, e))?);
        }
    }
    if curve.is_empty() {
        return Err(bad(2, "no data rows".into()));
    }
    Ok((curve, phase_col.map(|_| phases)))
}

fn phases_from_boundaries(b: &[usize], len: usize) -> Result<Vec<Phase>, CliError> {
    if b.is_empty() || b.len() > Phase::ALL.len() {
        return Err(CliError::Usage(format!("boundaries: expected 1 to 3 phase ends, got {}", b.len())));
    }
    if b.windows(2).any(|w| w[0] >= w[1]) || b[0] == 0 {
        return Err(CliError::Usage("boundaries: phase ends must be positive and increasing".into()));
    }
    if *b.last().expect("non-empty") > len {
        return Err(CliError::Usage(format!("boundaries: last phase end {} exceeds the {len} points", b[b.len() - 1])));
    }
    let mut phases = Vec::with_capacity(len);
    let mut start = 0;
    for (&end, phase) in b.iter().zip(Phase::ALL) {
        phases.extend(std::iter::repeat_n(phase, end - start));
        start = end;
    }
    phases.truncate(len);
    Ok(phases)
}

/// Plain-text table for `fit`.
pub fn fit_table(row: &SummaryRow) -> String {
    let mut out = String::from("phase  S+s_min   tau\n");
    for (p, f) in &row.phases {
        let _ = writeln!(out, "{p:<5}  {:<8.4}  {:.1}", f.steady_state(), f.tau);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_phases() {
        let p = phases_from_boundaries(&[2, 5, 7], 7).unwrap();
        assert_eq!(p, [Phase::A, Phase::A, Phase::B, Phase::B, Phase::B, Phase::C, Phase::C]);
        assert!(phases_from_boundaries(&[5, 5], 10).is_err());
        assert!(phases_from_boundaries(&[1, 2, 3, 4], 10).is_err());
        assert!(phases_from_boundaries(&[20], 10).is_err());
    }

    #[test]
    fn curve_columns() {
        let (c, p) = parse_curve("step,score,smoothed,phase\n0,1,1,A\n1,0,0.5,B\n").unwrap();
        assert_eq!(c, vec![1.0, 0.5]);
        assert_eq!(p, Some(vec![Phase::A, Phase::B]));
        let (c, p) = parse_curve("step,smoothed_score\n0,0.25\n").unwrap();
        assert_eq!(c, vec![0.25]);
        assert!(p.is_none());
        assert!(parse_curve("step,score\n0,1\n").is_err());
        let err = parse_curve("step,smoothed\n0,0.5\n1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
