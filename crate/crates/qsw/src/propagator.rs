//! Time propagation of the master equation over a log-spaced grid.
//!
//! The integrator is an explicit adaptive Runge-Kutta 5(4) (Dormand-Prince)
//! scheme acting directly on the dense density matrix; snapshots are taken
//! by clipping the step size to hit every grid sample exactly. The
//! vectorized-superoperator route (matrix exponential of an N^2 x N^2
//! Liouvillian) is deliberately avoided: at N = 123 that operator alone is
//! several GB, while the direct right-hand side costs one dense product per
//! evaluation.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::dynamics::{qsw_rhs, DensityMatrix, QswParams};
use crate::error::{QswError, Result};

/// Default relative tolerance of [`propagate`].
pub const DEFAULT_RTOL: f64 = 1e-8;
/// Default absolute tolerance of [`propagate`].
pub const DEFAULT_ATOL: f64 = 1e-10;

/// Accepted-step budget per propagation.
const MAX_STEPS: usize = 2_000_000;

/// Trace drift beyond which the live state is renormalized at a snapshot.
const RENORMALIZE_THRESHOLD: f64 = 1e-12;

/// Log-uniform sample times with `t = 0` prepended.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    points_per_decade: u32,
    samples: Vec<f64>,
}

impl TimeGrid {
    /// Log-spaced grid over `[t_min, t_max]` with `points_per_decade`
    /// samples per decade; `t = 0` is prepended, both endpoints included.
    pub fn log_spaced(t_min: f64, t_max: f64, points_per_decade: u32) -> Result<Self> {
        if !(t_min > 0.0) || !t_min.is_finite() {
            return Err(QswError::InvalidParameter(format!(
                "t_min = {t_min} must be positive"
            )));
        }
        if !(t_max > t_min) || !t_max.is_finite() {
            return Err(QswError::InvalidParameter(format!(
                "t_max = {t_max} must exceed t_min = {t_min}"
            )));
        }
        if points_per_decade == 0 {
            return Err(QswError::InvalidParameter(
                "points_per_decade must be positive".to_string(),
            ));
        }
        let lg_min = t_min.log10();
        let span = t_max.log10() - lg_min;
        let k_max = (span * points_per_decade as f64 - 1e-9).floor() as usize;
        let mut samples = Vec::with_capacity(k_max + 3);
        samples.push(0.0);
        for k in 0..=k_max {
            samples.push(10f64.powf(lg_min + k as f64 / points_per_decade as f64));
        }
        samples.push(t_max);
        for w in samples.windows(2) {
            if !(w[1] > w[0]) {
                return Err(QswError::InvalidParameter(format!(
                    "grid samples not strictly increasing near t = {}",
                    w[0]
                )));
            }
        }
        Ok(TimeGrid {
            t_min,
            t_max,
            points_per_decade,
            samples,
        })
    }

    /// The default experiment grid: `[1e-2, 1e3]` at 20 points per decade.
    pub fn default_grid() -> Self {
        Self::log_spaced(1e-2, 1e3, 20).expect("default grid parameters are valid")
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn points_per_decade(&self) -> u32 {
        self.points_per_decade
    }

    /// All sample times, starting with 0.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Integrator health counters recorded during a propagation.
#[derive(Debug, Clone, Copy, Default)]
pub struct PropagationDiagnostics {
    /// Largest `|tr rho - 1|` seen at any snapshot before renormalization.
    pub max_trace_drift: f64,
    /// Largest Hermiticity deviation seen at any snapshot before
    /// re-symmetrization.
    pub max_hermiticity_drift: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
}

/// Density-matrix snapshots aligned with a [`TimeGrid`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<DensityMatrix>,
    params: QswParams,
    diagnostics: PropagationDiagnostics,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.samples()
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn params(&self) -> &QswParams {
        &self.params
    }

    pub fn diagnostics(&self) -> &PropagationDiagnostics {
        &self.diagnostics
    }
}

// Dormand-Prince 5(4) tableau. Stage 7 equals the 5th-order solution, so
// its derivative is reused as stage 1 of the next step (FSAL).
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const ERR_EXPONENT: f64 = 0.2; // 1 / order

fn as_slice(a: &Array2<Complex64>) -> &[Complex64] {
    a.as_slice().expect("arrays are standard layout")
}

fn as_slice_mut(a: &mut Array2<Complex64>) -> &mut [Complex64] {
    a.as_slice_mut().expect("arrays are standard layout")
}

/// `out = y + h * sum(coef_m * k_m)` in one pass.
fn combine(
    out: &mut Array2<Complex64>,
    y: &Array2<Complex64>,
    h: f64,
    coefs: &[f64],
    stages: &[&Array2<Complex64>],
) {
    debug_assert_eq!(coefs.len(), stages.len());
    let yv = as_slice(y);
    let kv: Vec<&[Complex64]> = stages.iter().map(|s| as_slice(s)).collect();
    let ov = as_slice_mut(out);
    for i in 0..ov.len() {
        let mut acc = yv[i];
        for (c, k) in coefs.iter().zip(&kv) {
            if *c != 0.0 {
                acc += h * c * k[i];
            }
        }
        ov[i] = acc;
    }
}

/// Scaled RMS error norm of the embedded difference.
fn error_norm(
    err: &Array2<Complex64>,
    y: &Array2<Complex64>,
    y_new: &Array2<Complex64>,
    rtol: f64,
    atol: f64,
) -> f64 {
    let ev = as_slice(err);
    let yv = as_slice(y);
    let nv = as_slice(y_new);
    let mut acc = 0.0;
    for i in 0..ev.len() {
        let scale = atol + rtol * yv[i].norm().max(nv[i].norm());
        let r = ev[i].norm() / scale;
        acc += r * r;
    }
    (acc / ev.len() as f64).sqrt()
}

fn rms(a: &Array2<Complex64>) -> f64 {
    let v = as_slice(a);
    (v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt()
}

/// Hairer-style automatic initial step size.
fn initial_step(
    y0: &Array2<Complex64>,
    f0: &Array2<Complex64>,
    first_target: f64,
    rhs: &mut impl FnMut(&Array2<Complex64>) -> Array2<Complex64>,
) -> f64 {
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(first_target);
    let mut y1 = y0.clone();
    combine(&mut y1, y0, h0, &[1.0], &[f0]);
    let f1 = rhs(&y1);
    let d2 = rms(&(&f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(ERR_EXPONENT)
    };
    (100.0 * h0).min(h1).min(first_target)
}

/// Integrate the master equation from the localized initial state
/// `|j><j|`, capturing a snapshot at every grid sample.
///
/// At each sample the raw integrated state is stored (and validated against
/// the density-matrix tolerances), then the live state is re-symmetrized
/// and, if the trace has drifted by more than 1e-12, renormalized.
pub fn propagate(p: &QswParams, grid: &TimeGrid, rtol: f64, atol: f64) -> Result<Trajectory> {
    if !(rtol > 0.0) || !(atol > 0.0) {
        return Err(QswError::InvalidParameter(format!(
            "tolerances must be positive (rtol = {rtol}, atol = {atol})"
        )));
    }
    let n = p.dim();
    let rho0 = DensityMatrix::pure(n, p.initial_node())?;

    let mut diag = PropagationDiagnostics::default();
    let mut evals = 0usize;
    let mut rhs = |y: &Array2<Complex64>| -> Array2<Complex64> {
        evals += 1;
        qsw_rhs(y, p).expect("dimensions validated at entry")
    };

    let mut states = Vec::with_capacity(grid.len());
    states.push(rho0.clone());

    let mut t = 0.0;
    let mut y = rho0.entries().clone();
    let mut k1 = rhs(&y);
    let mut h = initial_step(&y, &k1, grid.samples()[1], &mut rhs);

    let mut y_stage = Array2::<Complex64>::zeros((n, n));
    let mut y_new = Array2::<Complex64>::zeros((n, n));
    let mut err = Array2::<Complex64>::zeros((n, n));
    let mut just_rejected = false;

    for &target in &grid.samples()[1..] {
        while t < target {
            if diag.accepted_steps >= MAX_STEPS {
                return Err(QswError::StepBudgetExhausted {
                    t,
                    max_steps: MAX_STEPS,
                });
            }
            let h_step = h.min(target - t);
            if h_step < 1e-14 * t.abs().max(1.0) {
                return Err(QswError::StepSizeUnderflow { t, h: h_step });
            }

            combine(&mut y_stage, &y, h_step, &A2, &[&k1]);
            let k2 = rhs(&y_stage);
            combine(&mut y_stage, &y, h_step, &A3, &[&k1, &k2]);
            let k3 = rhs(&y_stage);
            combine(&mut y_stage, &y, h_step, &A4, &[&k1, &k2, &k3]);
            let k4 = rhs(&y_stage);
            combine(&mut y_stage, &y, h_step, &A5, &[&k1, &k2, &k3, &k4]);
            let k5 = rhs(&y_stage);
            combine(&mut y_stage, &y, h_step, &A6, &[&k1, &k2, &k3, &k4, &k5]);
            let k6 = rhs(&y_stage);
            combine(&mut y_new, &y, h_step, &B, &[&k1, &k2, &k3, &k4, &k5, &k6]);
            let k7 = rhs(&y_new);
            combine(
                &mut err,
                &Array2::zeros((n, n)),
                h_step,
                &E,
                &[&k1, &k2, &k3, &k4, &k5, &k6, &k7],
            );

            let err_norm = error_norm(&err, &y, &y_new, rtol, atol);
            if err_norm <= 1.0 {
                t = if (target - (t + h_step)).abs() < 1e-14 * target.abs().max(1.0) {
                    target
                } else {
                    t + h_step
                };
                std::mem::swap(&mut y, &mut y_new);
                k1 = k7;
                diag.accepted_steps += 1;
                let mut fac = SAFETY * err_norm.powf(-ERR_EXPONENT);
                let fac_max = if just_rejected { 1.0 } else { FAC_MAX };
                fac = fac.clamp(FAC_MIN, fac_max);
                h = h_step * fac;
                just_rejected = false;
            } else {
                diag.rejected_steps += 1;
                let fac = (SAFETY * err_norm.powf(-ERR_EXPONENT)).clamp(FAC_MIN, 1.0);
                h = h_step * fac;
                just_rejected = true;
            }
        }

        // Snapshot the raw state, then clean the live one.
        let snapshot = DensityMatrix::new(y.clone()).map_err(|e| match e {
            QswError::NotHermitian { deviation, .. } => QswError::NotHermitian {
                deviation,
                tolerance: DensityMatrix::HERMITICITY_TOL,
            },
            other => other,
        })?;
        diag.max_hermiticity_drift = diag
            .max_hermiticity_drift
            .max(snapshot.hermiticity_deviation());
        states.push(snapshot);

        // rho <- (rho + rho^H) / 2
        for i in 0..n {
            for j in i..n {
                let avg = 0.5 * (y[(i, j)] + y[(j, i)].conj());
                y[(i, j)] = avg;
                y[(j, i)] = avg.conj();
            }
        }
        let tr: f64 = y.diag().iter().map(|z| z.re).sum();
        let drift = (tr - 1.0).abs();
        diag.max_trace_drift = diag.max_trace_drift.max(drift);
        if drift > DensityMatrix::TRACE_TOL {
            return Err(QswError::TraceDrift {
                deviation: drift,
                tolerance: DensityMatrix::TRACE_TOL,
            });
        }
        if drift > RENORMALIZE_THRESHOLD {
            let inv = Complex64::new(1.0 / tr, 0.0);
            y.mapv_inplace(|z| z * inv);
        }
        k1 = rhs(&y);
    }

    diag.rhs_evaluations = evals;
    Ok(Trajectory {
        grid: grid.clone(),
        states,
        params: p.clone(),
        diagnostics: diag,
    })
}

/// Classical occupation probabilities `p(t) = exp(t T) e_j` for a symmetric
/// generator `T`, evaluated by eigendecomposition.
pub fn propagate_classical(
    generator: &Array2<f64>,
    start: usize,
    grid: &TimeGrid,
) -> Result<Vec<Array1<f64>>> {
    let (r, c) = generator.dim();
    if r != c {
        return Err(QswError::DimensionMismatch(format!(
            "generator is {r}x{c}, expected square"
        )));
    }
    if start >= r {
        return Err(QswError::InvalidParameter(format!(
            "start node {start} out of range for dimension {r}"
        )));
    }
    let scale = generator.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for i in 0..r {
        for j in i + 1..r {
            if (generator[(i, j)] - generator[(j, i)]).abs() > 1e-12 * scale {
                return Err(QswError::InvalidParameter(
                    "generator must be symmetric for the spectral propagator".to_string(),
                ));
            }
        }
    }
    for j in 0..r {
        let col: f64 = (0..r).map(|i| generator[(i, j)]).sum();
        if col.abs() > 1e-10 * scale {
            return Err(QswError::InvalidParameter(format!(
                "generator column {j} sums to {col:.3e}, expected 0"
            )));
        }
    }

    let m = nalgebra::DMatrix::from_fn(r, r, |i, j| generator[(i, j)]);
    let eig = m.symmetric_eigen();
    let q = eig.eigenvectors;
    let lam = eig.eigenvalues;

    let mut out = Vec::with_capacity(grid.len());
    for &t in grid.samples() {
        let p = if t == 0.0 {
            let mut e = Array1::<f64>::zeros(r);
            e[start] = 1.0;
            e
        } else {
            let mut p = Array1::<f64>::zeros(r);
            for k in 0..r {
                let w = (lam[k] * t).exp() * q[(start, k)];
                if w != 0.0 {
                    for i in 0..r {
                        p[i] += q[(i, k)] * w;
                    }
                }
            }
            p
        };
        let sum: f64 = p.sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(QswError::InvalidProbability(format!(
                "probabilities sum to {sum} at t = {t}"
            )));
        }
        if let Some(&min) = p
            .iter()
            .min_by(|a, b| a.partial_cmp(b).expect("finite probabilities"))
        {
            if min < -1e-12 {
                return Err(QswError::InvalidProbability(format!(
                    "negative probability {min:.3e} at t = {t}"
                )));
            }
        }
        out.push(p);
    }
    Ok(out)
}
