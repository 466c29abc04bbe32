//! Score smoothing and the reactivity model `y(t) = S (1 - e^(-t/τ)) + s_min`.
//!
//! For a fixed `τ` the model is linear in `(S, s_min)`, so the fit profiles
//! those two out with a closed-form least-squares solve and searches `τ`
//! alone: a coarse grid, golden-section refinement on `ln τ`, then a
//! bisection polish on the sign of the profiled derivative.

use std::fmt::Write as _;

use crate::harness::Phase;
use crate::{Error, Result};

/// Starting grid for `τ`, in samples.
pub const TAU_GRID: [f64; 6] = [10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0];
/// Bounds of the `τ` search.
pub const TAU_MIN: f64 = 1.0;
pub const TAU_MAX: f64 = 1e5;
/// Shortest series a phase fit accepts.
pub const MIN_PHASE_LEN: usize = 10;
/// Window used for reported metrics.
pub const METRIC_WINDOW: usize = 5;
/// Window used for plotted curves.
pub const PLOT_WINDOW: usize = 100;

/// Trailing-window mean; the first `n - 1` values average the available
/// prefix.
pub fn smooth(series: &[f64], n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..series.len())
        .map(|i| {
            let window = &series[(i + 1).saturating_sub(n)..=i];
            let (lo, hi) = window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
            (window.iter().sum::<f64>() / window.len() as f64).clamp(lo, hi)
        })
        .collect()
}

/// Fitted reactivity model for one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFit {
    /// Score amplitude.
    pub s: f64,
    /// Score offset at the phase start.
    pub s_min: f64,
    /// Characteristic time in samples; NaN when the curve is flat.
    pub tau: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    /// False when the search ended on a bound of the `τ` range.
    pub converged: bool,
    /// True when `S ≈ 0` and `τ` is unidentifiable.
    pub degenerate: bool,
}

impl PhaseFit {
    pub fn steady_state(&self) -> f64 {
        self.s + self.s_min
    }

    pub fn value_at(&self, t: f64) -> f64 {
        if self.degenerate {
            return self.s_min + self.s;
        }
        model(self.s, self.s_min, self.tau, t)
    }

    /// Whether `0 <= s_min <= s_min + S <= 1`.
    pub fn within_bounds(&self) -> bool {
        let top = self.steady_state();
        self.s_min >= 0.0 && self.s_min <= top && top <= 1.0
    }
}

pub fn model(s: f64, s_min: f64, tau: f64, t: f64) -> f64 {
    s * (1.0 - (-t / tau).exp()) + s_min
}

struct Profile {
    s: f64,
    s_min: f64,
    sse: f64,
}

fn profile(y: &[f64], tau: f64) -> Profile {
    let len = y.len() as f64;
    let basis = |t: usize| 1.0 - (-(t as f64) / tau).exp();
    let b_mean = (0..y.len()).map(basis).sum::<f64>() / len;
    let y_mean = y.iter().sum::<f64>() / len;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in y.iter().enumerate() {
        let db = basis(t) - b_mean;
        sxy += db * (v - y_mean);
        sxx += db * db;
    }
    let s = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let s_min = y_mean - s * b_mean;
    let sse = y.iter().enumerate().map(|(t, v)| (v - s * basis(t) - s_min).powi(2)).sum();
    Profile { s, s_min, sse }
}

/// Sign of d(SSE)/dτ at the profiled optimum of `(S, s_min)`.
fn slope(y: &[f64], tau: f64) -> f64 {
    let p = profile(y, tau);
    let sum: f64 = y
        .iter()
        .enumerate()
        .map(|(t, v)| {
            let t = t as f64;
            let e = (-t / tau).exp();
            (v - p.s * (1.0 - e) - p.s_min) * t * e
        })
        .sum();
    p.s * sum
}

/// Least-squares fit of the reactivity model to `y`, with `t = 0` at the
/// first element.
pub fn fit_phase(y: &[f64]) -> Result<PhaseFit> {
    if y.len() < MIN_PHASE_LEN {
        return Err(Error::Fit(format!("phase has {} points, need at least {MIN_PHASE_LEN}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("series contains non-finite values".into()));
    }
    let rms = |sse: f64| (sse / y.len() as f64).sqrt();

    let (best, _) = TAU_GRID
        .iter()
        .enumerate()
        .map(|(i, &tau)| (i, profile(y, tau).sse))
        .fold((0, f64::INFINITY), |acc, (i, sse)| if sse < acc.1 { (i, sse) } else { acc });

    let grid_fit = |tau: f64, converged: bool| {
        let p = profile(y, tau);
        PhaseFit { s: p.s, s_min: p.s_min, tau, residual: rms(p.sse), converged, degenerate: false }
    };
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let flat = |fit: PhaseFit| {
        if fit.s.abs() <= 1e-9 * scale {
            PhaseFit { tau: f64::NAN, degenerate: true, ..fit }
        } else {
            fit
        }
    };

    let lo = if best == 0 { TAU_MIN } else { TAU_GRID[best - 1] };
    let hi = if best + 1 == TAU_GRID.len() { TAU_MAX } else { TAU_GRID[best + 1] };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let sse_at = |u: f64| profile(y, u.exp()).sse;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (sse_at(c), sse_at(d));
    let mut iterations = 0;
    while (b - a) > 1e-10 {
        iterations += 1;
        if iterations > 200 {
            return Ok(flat(grid_fit(TAU_GRID[best], false)));
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = sse_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = sse_at(d);
        }
    }
    let mut tau = (0.5 * (a + b)).exp();

    // polish on the derivative sign, which stays informative where the SSE
    // itself is flat to machine precision
    let (mut l, mut h) = (tau * (1.0 - 1e-6), tau * (1.0 + 1e-6));
    let (sl, sh) = (slope(y, l), slope(y, h));
    if sl.signum() != sh.signum() && sl != 0.0 && sh != 0.0 {
        for _ in 0..100 {
            let mid = 0.5 * (l + h);
            if mid <= l || mid >= h {
                break;
            }
            if slope(y, mid).signum() == sl.signum() {
                l = mid;
            } else {
                h = mid;
            }
        }
        tau = 0.5 * (l + h);
    }

    let at_bound = tau <= TAU_MIN * (1.0 + 1e-6) || tau >= TAU_MAX * (1.0 - 1e-6);
    if at_bound {
        return Ok(flat(grid_fit(TAU_GRID[best], false)));
    }
    Ok(flat(grid_fit(tau, true)))
}

/// Contiguous phase segments `(phase, start, end)` of a phase annotation.
pub fn phase_segments(phases: &[Phase]) -> Vec<(Phase, usize, usize)> {
    let mut out: Vec<(Phase, usize, usize)> = Vec::new();
    for (i, p) in phases.iter().enumerate() {
        match out.last_mut() {
            Some((q, _, end)) if q == p => *end = i + 1,
            _ => out.push((*p, i, i + 1)),
        }
    }
    out
}

/// Fits every phase of `curve` separately, restarting the clock at each
/// phase boundary.
pub fn fit_phases(curve: &[f64], phases: &[Phase]) -> Result<Vec<(Phase, PhaseFit)>> {
    if curve.len() != phases.len() {
        return Err(Error::DimensionMismatch { expected: phases.len(), got: curve.len() });
    }
    phase_segments(phases)
        .into_iter()
        .map(|(p, start, end)| {
            fit_phase(&curve[start..end])
                .map(|f| (p, f))
                .map_err(|e| Error::Fit(format!("phase {p}: {e}")))
        })
        .collect()
}

/// One model's summary over the phases of a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub config: String,
    pub phases: Vec<(Phase, PhaseFit)>,
    pub mean_acc: f64,
}

impl SummaryRow {
    /// Unweighted mean of `S + s_min` over phases.
    pub fn mean_steady_state(&self) -> f64 {
        self.phases.iter().map(|(_, f)| f.steady_state()).sum::<f64>() / self.phases.len() as f64
    }

    /// Unweighted mean of `τ` over the phases where it is identifiable.
    pub fn mean_tau(&self) -> f64 {
        let taus: Vec<f64> = self.phases.iter().map(|(_, f)| f.tau).filter(|t| t.is_finite()).collect();
        if taus.is_empty() {
            f64::NAN
        } else {
            taus.iter().sum::<f64>() / taus.len() as f64
        }
    }

    pub fn phase(&self, phase: Phase) -> Option<&PhaseFit> {
        self.phases.iter().find(|(p, _)| *p == phase).map(|(_, f)| f)
    }
}

/// Builds summary rows from `(config, mean smoothed curve, phases, mean accuracy)`.
pub fn summarize<'a, I>(entries: I) -> Result<Vec<SummaryRow>>
where
    I: IntoIterator<Item = (&'a str, &'a [f64], &'a [Phase], f64)>,
{
    entries
        .into_iter()
        .map(|(config, curve, phases, mean_acc)| {
            Ok(SummaryRow { config: config.to_string(), phases: fit_phases(curve, phases)?, mean_acc })
        })
        .collect()
}

/// `config,phase,S_plus_smin,tau,residual`.
pub fn fits_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("config,phase,S_plus_smin,tau,residual\n");
    for row in rows {
        for (p, f) in &row.phases {
            let _ = writeln!(out, "{},{},{},{},{}", row.config, p, f.steady_state(), f.tau, f.residual);
        }
    }
    out
}

/// `config,mean_acc`.
pub fn accuracy_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("config,mean_acc\n");
    for row in rows {
        let _ = writeln!(out, "{},{}", row.config, row.mean_acc);
    }
    out
}

/// `config,mean_S_plus_smin,mean_tau,mean_acc`.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("config,mean_S_plus_smin,mean_tau,mean_acc\n");
    for row in rows {
        let _ = writeln!(out, "{},{},{},{}", row.config, row.mean_steady_state(), row.mean_tau(), row.mean_acc);
    }
    out
}

/// `step,smoothed_score`.
pub fn plot_csv(curve: &[f64]) -> String {
    let mut out = String::from("step,smoothed_score\n");
    for (i, v) in curve.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(s: f64, s_min: f64, tau: f64, len: usize) -> Vec<f64> {
        (0..len).map(|t| model(s, s_min, tau, t as f64)).collect()
    }

    #[test]
    fn smoothing_examples() {
        let x = [0.3, 0.9, 0.1];
        assert_eq!(smooth(&x, 1), x.to_vec());
        assert_eq!(smooth(&[1.0, 1.0, 0.0, 0.0], 2), vec![1.0, 1.0, 0.5, 0.0]);
        assert_eq!(smooth(&[], 5), Vec::<f64>::new());
    }

    #[test]
    fn smoothing_long_series_matches_direct_mean() {
        let x: Vec<f64> = (0..5000).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let s = smooth(&x, 100);
        for i in [0usize, 50, 99, 100, 2047, 4999] {
            let lo = (i + 1).saturating_sub(100);
            let direct = x[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
            assert_close!(s[i], direct, 1e-12);
        }
    }

    #[test]
    fn noiseless_round_trip() {
        let fit = fit_phase(&curve(0.2, 0.75, 300.0, 2000)).unwrap();
        assert!(fit.converged && !fit.degenerate);
        assert!(((fit.s - 0.2) / 0.2).abs() < 1e-6, "{fit:?}");
        assert!(((fit.s_min - 0.75) / 0.75).abs() < 1e-6, "{fit:?}");
        assert!(((fit.tau - 300.0) / 300.0).abs() < 1e-6, "{fit:?}");
        assert!(fit.within_bounds());
        let rise = fit.value_at(fit.tau) - fit.s_min;
        assert_close!(rise / fit.s, 1.0 - (-1.0f64).exp(), 1e-12);
        assert_close!(rise / fit.s, 0.632, 1e-3);
    }

    #[test]
    fn flat_curve_is_degenerate() {
        let fit = fit_phase(&vec![0.9; 500]).unwrap();
        assert!(fit.degenerate);
        assert!(fit.tau.is_nan());
        assert_close!(fit.s, 0.0, 1e-9);
        assert_close!(fit.s_min, 0.9, 1e-9);
        assert_close!(fit.steady_state(), 0.9, 1e-9);
    }

    #[test]
    fn short_phase_rejected() {
        assert!(matches!(fit_phase(&[0.5; 9]), Err(Error::Fit(_))));
        assert!(matches!(fit_phase(&[f64::NAN; 20]), Err(Error::Fit(_))));
    }

    #[test]
    fn segments_and_phase_fits() {
        let phases: Vec<Phase> = [Phase::A; 300].into_iter().chain([Phase::B; 400]).collect();
        assert_eq!(phase_segments(&phases), vec![(Phase::A, 0, 300), (Phase::B, 300, 700)]);
        let mut y = curve(0.5, 0.4, 40.0, 300);
        y.extend(curve(0.3, 0.6, 90.0, 400));
        let fits = fit_phases(&y, &phases).unwrap();
        assert_close!(fits[0].1.tau, 40.0, 1e-6);
        assert_close!(fits[1].1.tau, 90.0, 1e-6);
        assert!(fit_phases(&y[..10], &phases).is_err());
    }

    #[test]
    fn summary_rows_and_csv() {
        let phases = vec![Phase::A; 200];
        let y = curve(0.5, 0.4, 40.0, 200);
        let rows = summarize([("solo", y.as_slice(), phases.as_slice(), 0.81)]).unwrap();
        assert_eq!(rows.len(), 1);
        let fit = rows[0].phase(Phase::A).unwrap();
        assert_eq!(rows[0].mean_steady_state(), fit.steady_state());
        assert_eq!(rows[0].mean_tau(), fit.tau);
        assert!(fits_csv(&rows).starts_with("config,phase,S_plus_smin,tau,residual\nsolo,A,"));
        assert_eq!(accuracy_csv(&rows), "config,mean_acc\nsolo,0.81\n");
        assert!(summary_csv(&rows).starts_with("config,mean_S_plus_smin,mean_tau,mean_acc\nsolo,"));
        assert_eq!(plot_csv(&[0.5, 1.0]), "step,smoothed_score\n0,0.5\n1,1\n");
    }
}
