//! Logarithmic-growth detection and information-dimension fits.
//!
//! The information dimension is the slope of the entropy against `ln t` in
//! the window between the initial transient and saturation at `ln N`.

use serde::{Deserialize, Serialize};

use crate::error::{QswError, Result};
use crate::observables::EntropyTrace;

/// Minimum points in any fit.
pub const MIN_FIT_POINTS: usize = 5;

/// Minimum `t_hi / t_lo` of a fit window: half a decade; shorter windows
/// produce unstable slopes.
pub const MIN_WINDOW_RATIO: f64 = 3.0;

/// Time interval `[t_lo, t_hi]` for a logarithmic fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    t_lo: f64,
    t_hi: f64,
}

impl FitWindow {
    pub fn new(t_lo: f64, t_hi: f64) -> Result<Self> {
        if !(t_lo > 0.0) || !t_lo.is_finite() || !t_hi.is_finite() {
            return Err(QswError::InvalidParameter(format!(
                "fit window [{t_lo}, {t_hi}] must have positive finite bounds"
            )));
        }
        if t_hi / t_lo < MIN_WINDOW_RATIO {
            return Err(QswError::InvalidParameter(format!(
                "fit window [{t_lo}, {t_hi}] spans less than a factor {MIN_WINDOW_RATIO}"
            )));
        }
        Ok(FitWindow { t_lo, t_hi })
    }

    pub fn t_lo(&self) -> f64 {
        self.t_lo
    }

    pub fn t_hi(&self) -> f64 {
        self.t_hi
    }

    /// Inclusive membership with a relative fudge for grid round-off.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_lo * (1.0 - 1e-12) && t <= self.t_hi * (1.0 + 1e-12)
    }
}

/// Result of a logarithmic fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitResult {
    /// Slope against `ln t`: the information dimension.
    pub d_info: f64,
    pub intercept: f64,
    pub window: FitWindow,
    pub r_squared: f64,
    pub n_points: usize,
    pub alpha: f64,
}

/// Parameters of the automatic scaling-window search.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AutoWindowParams {
    /// Window width in decades.
    pub min_decades: f64,
    /// Samples with entropy above `saturation_margin * ln N` are excluded.
    pub saturation_margin: f64,
    /// Samples before this time are excluded as transient.
    pub transient: f64,
}

impl Default for AutoWindowParams {
    fn default() -> Self {
        AutoWindowParams {
            min_decades: 0.7,
            saturation_margin: 0.9,
            transient: 1.0,
        }
    }
}

/// Centered ordinary least squares of `y` against `x`.
/// Returns `(slope, intercept, r_squared)`.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r_squared.clamp(0.0, 1.0))
}

fn window_points(trace: &EntropyTrace, window: &FitWindow) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&t, &s) in trace.times.iter().zip(&trace.values) {
        if t > 0.0 && window.contains(t) {
            x.push(t.ln());
            y.push(s);
        }
    }
    (x, y)
}

/// Least-squares slope of entropy against `ln t` inside the window.
pub fn fit_information_dimension(trace: &EntropyTrace, window: &FitWindow) -> Result<FitResult> {
    let (x, y) = window_points(trace, window);
    if x.len() < MIN_FIT_POINTS {
        return Err(QswError::FitError(format!(
            "only {} samples inside [{}, {}], need at least {MIN_FIT_POINTS}",
            x.len(),
            window.t_lo(),
            window.t_hi()
        )));
    }
    let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - x.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread <= 0.0 {
        return Err(QswError::FitError(
            "zero variance in ln t inside the fit window".to_string(),
        ));
    }
    let (slope, intercept, r_squared) = ols(&x, &y);
    Ok(FitResult {
        d_info: slope,
        intercept,
        window: *window,
        r_squared,
        n_points: x.len(),
        alpha: trace.alpha,
    })
}

/// Slide a log-window of width `min_decades` over the admissible samples
/// (past the transient, below the saturation margin) and return the window
/// whose local linear fit maximizes R^2; ties break toward late times.
///
/// Errors with a "no scaling regime" message when the trace saturates
/// before any admissible window fits.
pub fn auto_window(trace: &EntropyTrace, params: &AutoWindowParams) -> Result<FitWindow> {
    if params.min_decades < MIN_WINDOW_RATIO.log10() {
        return Err(QswError::InvalidParameter(format!(
            "min_decades = {} yields windows narrower than a factor {MIN_WINDOW_RATIO}",
            params.min_decades
        )));
    }
    if !(0.0 < params.saturation_margin && params.saturation_margin <= 1.0) {
        return Err(QswError::InvalidParameter(format!(
            "saturation_margin = {} outside (0, 1]",
            params.saturation_margin
        )));
    }
    let n_positive = trace.times.iter().filter(|&&t| t > 0.0).count();
    if n_positive < 20 {
        return Err(QswError::FitError(format!(
            "auto window needs at least 20 positive-time samples, got {n_positive}"
        )));
    }
    let ceiling = params.saturation_margin * trace.max_entropy();
    let admissible: Vec<usize> = (0..trace.times.len())
        .filter(|&i| {
            trace.times[i] > 0.0
                && trace.times[i] >= params.transient
                && trace.values[i] < ceiling
        })
        .collect();

    let ratio = 10f64.powf(params.min_decades);
    let mut best: Option<(f64, FitWindow)> = None;
    for &i in &admissible {
        let t_lo = trace.times[i];
        let t_hi = t_lo * ratio;
        let window = FitWindow::new(t_lo, t_hi)?;
        // Every sample inside the window must itself be admissible.
        let inside: Vec<usize> = (0..trace.times.len())
            .filter(|&k| trace.times[k] > 0.0 && window.contains(trace.times[k]))
            .collect();
        if inside.len() < MIN_FIT_POINTS {
            continue;
        }
        if !inside.iter().all(|k| admissible.binary_search(k).is_ok()) {
            continue;
        }
        let x: Vec<f64> = inside.iter().map(|&k| trace.times[k].ln()).collect();
        let y: Vec<f64> = inside.iter().map(|&k| trace.values[k]).collect();
        let (_, _, r2) = ols(&x, &y);
        // >= prefers the latest window on ties; the late regime is the
        // asymptotic one.
        if best.map_or(true, |(br2, _)| r2 >= br2) {
            best = Some((r2, window));
        }
    }
    best.map(|(_, w)| w).ok_or_else(|| {
        QswError::NoScalingRegime(format!(
            "no admissible window of {} decades between t = {} and saturation at {:.3} * ln N",
            params.min_decades, params.transient, params.saturation_margin
        ))
    })
}

/// Short-time dimer entropy `alpha t (1 - ln(alpha t))`, valid for
/// `alpha t < 0.1`.
pub fn dimer_short_time(alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(QswError::InvalidParameter(format!(
            "alpha = {alpha} outside (0, 1]"
        )));
    }
    if !(t > 0.0) {
        return Err(QswError::InvalidParameter(format!("t = {t} must be positive")));
    }
    let x = alpha * t;
    if x >= 0.1 {
        return Err(QswError::InvalidParameter(format!(
            "alpha t = {x} outside the small-time validity domain (< 0.1)"
        )));
    }
    Ok(x * (1.0 - x.ln()))
}

/// Collect `(alpha, d_info, r_squared)` rows sorted by alpha; duplicate
/// alpha values are rejected.
pub fn dimension_curve(results: &[FitResult]) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows: Vec<(f64, f64, f64)> = results
        .iter()
        .map(|r| (r.alpha, r.d_info, r.r_squared))
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite alpha"));
    for w in rows.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(QswError::InvalidParameter(format!(
                "duplicate alpha {} in dimension curve",
                w[0].0
            )));
        }
    }
    Ok(rows)
}

/// Log-log slope of positive samples `(t, v)` inside a window; used for the
/// return-probability exponent `p_jj(t) ~ t^(-d_s/2)`.
pub fn fit_log_log_slope(
    points: &[(f64, f64)],
    window: &FitWindow,
    alpha: f64,
) -> Result<FitResult> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for &(t, v) in points {
        if t > 0.0 && window.contains(t) {
            if v <= 0.0 {
                return Err(QswError::FitError(format!(
                    "nonpositive value {v} at t = {t} in log-log fit"
                )));
            }
            x.push(t.ln());
            y.push(v.ln());
        }
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(QswError::FitError(format!(
            "only {} samples inside [{}, {}], need at least {MIN_FIT_POINTS}",
            x.len(),
            window.t_lo(),
            window.t_hi()
        )));
    }
    let (slope, intercept, r_squared) = ols(&x, &y);
    Ok(FitResult {
        d_info: slope,
        intercept,
        window: *window,
        r_squared,
        n_points: x.len(),
        alpha,
    })
}
