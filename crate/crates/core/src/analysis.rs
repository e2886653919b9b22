//! Exponential decay fits of observable series and the normalized constant
//! `C = gamma / (Gamma n_g n_tot)`.

use std::fmt;

use thiserror::Error;

use crate::grover::GroverConfig;
use crate::observables::{Observable, ObservableSeries};
use crate::trajectory::TrajectoryEnsemble;

/// Minimum usable samples for a direct log-linear fit.
pub const MIN_FIT_SAMPLES: usize = 4;
/// Minimum usable peaks for a peak-envelope fit.
pub const MIN_PEAK_SAMPLES: usize = 2;
/// Absolute part of the fit floor.
pub const FIT_FLOOR: f64 = 0.01;

/// `(t, value, stderr)`.
pub type SeriesPoint = (usize, f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitSource {
    GroverPeaks,
    FourState,
    Fidelity,
}

impl FitSource {
    pub const ALL: [FitSource; 3] = [FitSource::GroverPeaks, FitSource::FourState, FitSource::Fidelity];

    pub fn as_str(self) -> &'static str {
        match self {
            FitSource::GroverPeaks => "w_G-peaks",
            FitSource::FourState => "w_4",
            FitSource::Fidelity => "fidelity",
        }
    }

    pub fn observable(self) -> Observable {
        match self {
            FitSource::GroverPeaks => Observable::Searched,
            FitSource::FourState => Observable::FourState,
            FitSource::Fidelity => Observable::Fidelity,
        }
    }
}

impl fmt::Display for FitSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive iteration range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitWindow {
    pub lo: usize,
    pub hi: usize,
}

impl FitWindow {
    pub fn new(lo: usize, hi: usize) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: usize) -> bool {
        self.lo <= t && t <= self.hi
    }
}

/// Result of a decay fit `v(t) ~ exp(intercept - rate t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub rate_stderr: f64,
    pub intercept: f64,
    /// First and last iteration actually used.
    pub window: FitWindow,
    pub source: FitSource,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitFailure {
    #[error("{what}: only {usable} usable samples in window, need {needed}")]
    InsufficientSamples {
        what: FitSource,
        usable: usize,
        needed: usize,
    },
    #[error("{what}: window {lo}..={hi} outside the recorded series")]
    EmptyWindow { what: FitSource, lo: usize, hi: usize },
    #[error("{what}: degenerate fit ({reason})")]
    Degenerate { what: FitSource, reason: String },
}

/// Weighted least squares of `ln v` against `t` with weights `(v / se)^2`.
///
/// Samples below `max(FIT_FLOOR, 3 se)` are dropped. Zero standard errors are
/// replaced by the smallest positive one in the window; if all are zero the
/// fit is unweighted and the error comes from the residuals. The slope error
/// is inflated by `sqrt(chi2_red)` when the residuals exceed the error bars.
pub fn fit_exponential(
    points: &[SeriesPoint],
    window: FitWindow,
    source: FitSource,
) -> Result<DecayFit, FitFailure> {
    fit_with_min(points, window, source, MIN_FIT_SAMPLES)
}

fn fit_with_min(
    points: &[SeriesPoint],
    window: FitWindow,
    source: FitSource,
    min_samples: usize,
) -> Result<DecayFit, FitFailure> {
    let in_window: Vec<&SeriesPoint> = points.iter().filter(|p| window.contains(p.0)).collect();
    if in_window.is_empty() {
        return Err(FitFailure::EmptyWindow {
            what: source,
            lo: window.lo,
            hi: window.hi,
        });
    }
    let usable: Vec<SeriesPoint> = in_window
        .into_iter()
        .copied()
        .filter(|&(_, v, se)| v.is_finite() && v >= FIT_FLOOR.max(3.0 * se))
        .collect();
    if usable.len() < min_samples.max(2) {
        return Err(FitFailure::InsufficientSamples {
            what: source,
            usable: usable.len(),
            needed: min_samples.max(2),
        });
    }

    let min_se = usable
        .iter()
        .map(|p| p.2)
        .filter(|&s| s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let weighted = min_se.is_finite();
    let data: Vec<(f64, f64, f64)> = usable
        .iter()
        .map(|&(t, v, se)| {
            let w = if weighted {
                let se = if se > 0.0 { se } else { min_se };
                (v / se).powi(2)
            } else {
                1.0
            };
            (t as f64, v.ln(), w)
        })
        .collect();

    let sw: f64 = data.iter().map(|d| d.2).sum();
    let xm = data.iter().map(|d| d.2 * d.0).sum::<f64>() / sw;
    let ym = data.iter().map(|d| d.2 * d.1).sum::<f64>() / sw;
    let sxx: f64 = data.iter().map(|d| d.2 * (d.0 - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FitFailure::Degenerate {
            what: source,
            reason: "all samples at one iteration".into(),
        });
    }
    let sxy: f64 = data.iter().map(|d| d.2 * (d.0 - xm) * (d.1 - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let chi2: f64 = data
        .iter()
        .map(|d| d.2 * (d.1 - intercept - slope * d.0).powi(2))
        .sum();
    let dof = data.len().saturating_sub(2);
    let rate_stderr = if weighted {
        let inflate = if dof > 0 { (chi2 / dof as f64).max(1.0) } else { 1.0 };
        (inflate / sxx).sqrt()
    } else if dof > 0 {
        (chi2 / dof as f64 / sxx).sqrt()
    } else {
        0.0
    };

    Ok(DecayFit {
        rate: -slope,
        rate_stderr,
        intercept,
        window: FitWindow::new(usable[0].0, usable[usable.len() - 1].0),
        source,
        n_samples: usable.len(),
    })
}

/// Fits the envelope of `w_G` through the analytic peak iterations
/// `pi / (2 omega) - 1/2 + k pi / omega` inside `window`.
pub fn fit_grover_peaks(
    points: &[SeriesPoint],
    config: &GroverConfig,
    window: FitWindow,
) -> Result<DecayFit, FitFailure> {
    let last = points.iter().map(|p| p.0).max().unwrap_or(0);
    let peaks: Vec<SeriesPoint> = config
        .peak_iterations(last)
        .into_iter()
        .filter(|&t| window.contains(t))
        .filter_map(|t| points.iter().find(|p| p.0 == t).copied())
        .collect();
    if peaks.len() < MIN_PEAK_SAMPLES {
        return Err(FitFailure::InsufficientSamples {
            what: FitSource::GroverPeaks,
            usable: peaks.len(),
            needed: MIN_PEAK_SAMPLES,
        });
    }
    fit_with_min(&peaks, window, FitSource::GroverPeaks, MIN_PEAK_SAMPLES)
}

/// Fits one source from a series.
pub fn fit_series(
    series: &ObservableSeries,
    config: &GroverConfig,
    source: FitSource,
    window: FitWindow,
) -> Result<DecayFit, FitFailure> {
    let points = series.points(source.observable());
    match source {
        FitSource::GroverPeaks => fit_grover_peaks(&points, config, window),
        _ => fit_exponential(&points, window, source),
    }
}

/// Fits an ensemble series, taking the rate error from a leave-one-block-out
/// jackknife over trajectory blocks (values at different iterations share
/// trajectories, so per-point errors are correlated in time).
pub fn fit_ensemble(
    ensemble: &TrajectoryEnsemble,
    source: FitSource,
    window: FitWindow,
) -> Result<DecayFit, FitFailure> {
    let config = ensemble.config();
    let mut fit = fit_series(&ensemble.series(), config, source, window)?;
    let b = ensemble.blocks();
    if b < 2 {
        return Ok(fit);
    }
    let mut rates = Vec::with_capacity(b);
    for skip in 0..b {
        // Same sample selection as the full fit, so the jackknife sees only
        // the sampling noise.
        match fit_series(&ensemble.leave_one_out(skip), config, source, fit.window) {
            Ok(f) => rates.push(f.rate),
            Err(_) => return Ok(fit),
        }
    }
    let mean = rates.iter().sum::<f64>() / b as f64;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() * (b - 1) as f64 / b as f64;
    fit.rate_stderr = var.sqrt();
    Ok(fit)
}

/// Parameters that turn a rate into `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateScale {
    pub gamma: f64,
    pub n_g: usize,
    pub n_tot: usize,
}

impl RateScale {
    /// `Gamma_max = Gamma n_g n_tot`.
    pub fn gamma_max(&self) -> f64 {
        self.gamma * self.n_g as f64 * self.n_tot as f64
    }

    /// `(C, stderr of C)`; `None` at `Gamma = 0`.
    pub fn normalize(&self, fit: &DecayFit) -> Option<(f64, f64)> {
        let g = self.gamma_max();
        (g > 0.0).then(|| (fit.rate / g, fit.rate_stderr / g))
    }
}

/// Per-fit `C` values (`None` where `Gamma = 0`) with their mean and sample
/// standard deviation over the defined ones.
#[derive(Debug, Clone, PartialEq)]
pub struct CSummary {
    pub values: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub scatter: Option<f64>,
}

pub fn extract_c(fits: &[(DecayFit, RateScale)]) -> CSummary {
    let values: Vec<Option<f64>> = fits.iter().map(|(f, s)| s.normalize(f).map(|c| c.0)).collect();
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let scatter = mean.filter(|_| defined.len() > 1).map(|m| {
        (defined.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (defined.len() - 1) as f64).sqrt()
    });
    CSummary { values, mean, scatter }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(f: impl Fn(usize) -> f64, t_max: usize, se: f64) -> Vec<SeriesPoint> {
        (0..=t_max).map(|t| (t, f(t), se)).collect()
    }

    #[test]
    fn exact_exponential() {
        let pts = series(|t| (-0.01 * t as f64).exp(), 100, 0.0);
        let fit = fit_exponential(&pts, FitWindow::new(0, 100), FitSource::FourState).unwrap();
        assert!((fit.rate - 0.01).abs() < 1e-6);
        assert!(fit.intercept.abs() < 1e-9);
        assert_eq!(fit.window, FitWindow::new(0, 100));
        assert_eq!(fit.n_samples, 101);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let pts = series(|_| 1.0, 50, 0.001);
        let fit = fit_exponential(&pts, FitWindow::new(0, 50), FitSource::Fidelity).unwrap();
        assert!(fit.rate.abs() < 1e-9);
    }

    #[test]
    fn floor_excludes_small_and_noisy_points() {
        let mut pts = series(|t| (-0.05 * t as f64).exp(), 200, 0.0);
        // 0.05 t > ln 100 beyond t = 92.
        let fit = fit_exponential(&pts, FitWindow::new(0, 200), FitSource::FourState).unwrap();
        assert_eq!(fit.window.hi, 92);
        pts[10].2 = 1.0;
        let fit = fit_exponential(&pts, FitWindow::new(0, 200), FitSource::FourState).unwrap();
        assert_eq!(fit.n_samples, 92);
    }

    #[test]
    fn too_few_samples_is_a_failure() {
        let pts = series(|t| (-2.0 * t as f64).exp(), 10, 0.0);
        let err = fit_exponential(&pts, FitWindow::new(0, 10), FitSource::FourState).unwrap_err();
        assert!(matches!(err, FitFailure::InsufficientSamples { usable: 3, .. }));
        let err = fit_exponential(&pts, FitWindow::new(50, 60), FitSource::FourState).unwrap_err();
        assert!(matches!(err, FitFailure::EmptyWindow { .. }));
    }

    #[test]
    fn weighted_fit_recovers_rate_and_error() {
        // Deterministic +-1 sigma pattern: chi2_red close to 1.
        let pts: Vec<SeriesPoint> = (0..=200)
            .map(|t| {
                let v = (-0.004 * t as f64).exp();
                let se = 0.002;
                let sign = if (t * 7) % 3 == 0 { 1.0 } else { -0.5 };
                (t, v + sign * se, se)
            })
            .collect();
        let fit = fit_exponential(&pts, FitWindow::new(0, 200), FitSource::FourState).unwrap();
        assert!((fit.rate - 0.004).abs() < 5.0 * fit.rate_stderr);
        assert!(fit.rate_stderr > 0.0 && fit.rate_stderr < 1e-4);
    }

    #[test]
    fn grover_peaks_of_damped_oscillation() {
        let cfg = GroverConfig::new(8, 100).unwrap();
        let pts: Vec<SeriesPoint> = (0..=600)
            .map(|t| {
                let w = crate::grover::ideal_probability(t, &cfg);
                (t, w * (-0.005 * t as f64).exp(), 0.0)
            })
            .collect();
        let fit = fit_grover_peaks(&pts, &cfg, FitWindow::new(0, 600)).unwrap();
        assert!((fit.rate - 0.005).abs() < 0.1 * 0.005, "{}", fit.rate);
        assert_eq!(fit.source, FitSource::GroverPeaks);
    }

    #[test]
    fn noiseless_peaks_give_zero_rate() {
        let cfg = GroverConfig::new(6, 9).unwrap();
        let pts: Vec<SeriesPoint> = (0..=100)
            .map(|t| (t, crate::grover::ideal_probability(t, &cfg), 0.0))
            .collect();
        let fit = fit_grover_peaks(&pts, &cfg, FitWindow::new(0, 100)).unwrap();
        assert!(fit.rate.abs() < 1e-3);
    }

    #[test]
    fn single_peak_is_a_failure() {
        let cfg = GroverConfig::new(8, 1).unwrap();
        let pts: Vec<SeriesPoint> = (0..=20).map(|t| (t, 0.5, 0.0)).collect();
        assert!(fit_grover_peaks(&pts, &cfg, FitWindow::new(0, 20)).is_err());
    }

    #[test]
    fn c_normalization() {
        let scale = RateScale {
            gamma: 4e-5,
            n_g: 102,
            n_tot: 12,
        };
        let fit = |rate| DecayFit {
            rate,
            rate_stderr: 0.0,
            intercept: 0.0,
            window: FitWindow::new(0, 1),
            source: FitSource::FourState,
            n_samples: 2,
        };
        let gmax = scale.gamma_max();
        assert!((scale.normalize(&fit(gmax)).unwrap().0 - 1.0).abs() < 1e-12);
        assert_eq!(scale.normalize(&fit(0.0)).unwrap().0, 0.0);
        let zero = RateScale { gamma: 0.0, ..scale };
        let summary = extract_c(&[(fit(gmax * 0.4), scale), (fit(0.1), zero), (fit(gmax * 0.5), scale)]);
        assert_eq!(summary.values[1], None);
        assert!((summary.mean.unwrap() - 0.45).abs() < 1e-12);
        assert!((summary.scatter.unwrap() - 0.05f64 * 2f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scale_equivariance(c in 0.05f64..20.0, rate in 0.0f64..0.02) {
            let base: Vec<SeriesPoint> = (0..=150)
                .map(|t| {
                    let v = (-rate * t as f64).exp() * (1.0 + 0.01 * ((t * 13 % 7) as f64 - 3.0));
                    (t, v, 0.003 * v)
                })
                .collect();
            let scaled: Vec<SeriesPoint> = base.iter().map(|&(t, v, s)| (t, v * c, s * c)).collect();
            let w = FitWindow::new(0, 150);
            // Keep both series above the floor so the same samples are used.
            prop_assume!(base.iter().all(|p| p.1 * c.min(1.0) >= FIT_FLOOR));
            let a = fit_exponential(&base, w, FitSource::FourState).unwrap();
            let b = fit_exponential(&scaled, w, FitSource::FourState).unwrap();
            prop_assert!((a.rate - b.rate).abs() < 1e-10);
            prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-8);
        }
    }
}
