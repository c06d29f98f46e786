//! Entropy and probability observables over trajectories.

use crate::dynamics::DensityMatrix;
use crate::error::{QswError, Result};
use crate::propagator::Trajectory;

/// Eigenvalues below this threshold contribute nothing to the entropy.
pub const EIGENVALUE_CLAMP: f64 = 1e-14;

/// Which entropy a trace holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyKind {
    VonNeumann,
    Shannon,
}

/// Entropy samples over positive times (natural log, dimensionless).
///
/// The `t = 0` sample of a trajectory is excluded here: the logarithmic fit
/// works against `ln t`. Exports that want the `t = 0` row take it from the
/// trajectory directly.
#[derive(Debug, Clone)]
pub struct EntropyTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: EntropyKind,
    pub alpha: f64,
    pub network_tag: String,
    pub n_nodes: usize,
}

impl EntropyTrace {
    /// Saturation value `ln N`.
    pub fn max_entropy(&self) -> f64 {
        (self.n_nodes as f64).ln()
    }
}

/// Von Neumann entropy `-tr(rho ln rho)` via Hermitian eigendecomposition.
///
/// Eigenvalues in `[-1e-8, 1e-14]` are clamped to zero; anything below
/// `-1e-8` is a positivity violation and errors out. Eigendecomposition is
/// used instead of a matrix logarithm because early-time states are nearly
/// singular.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_from_eigenvalues(&rho.eigenvalues())
}

/// Entropy of a precomputed eigenvalue (or probability) spectrum with the
/// same clamping rules as [`von_neumann_entropy`].
pub fn entropy_from_eigenvalues(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &ev in eigenvalues {
        if ev < DensityMatrix::EIGENVALUE_FLOOR {
            return Err(QswError::NegativeEigenvalue { value: ev });
        }
        if ev > EIGENVALUE_CLAMP {
            s -= ev * ev.ln();
        }
    }
    Ok(s)
}

/// Shannon entropy `-sum p ln p` of a probability vector, with
/// `0 ln 0 := 0`. Entries must be nonnegative to -1e-12 and sum to one
/// within 1e-9.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    let mut sum = 0.0;
    for &pk in p {
        if pk < -1e-12 {
            return Err(QswError::InvalidProbability(format!(
                "negative entry {pk:.3e}"
            )));
        }
        sum += pk;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(QswError::InvalidProbability(format!(
            "entries sum to {sum}, expected 1"
        )));
    }
    let mut s = 0.0;
    for &pk in p {
        if pk > 0.0 {
            s -= pk * pk.ln();
        }
    }
    Ok(s)
}

/// Von Neumann entropy at every positive-time snapshot of a trajectory.
pub fn entropy_trace(traj: &Trajectory) -> Result<EntropyTrace> {
    let mut times = Vec::with_capacity(traj.states().len().saturating_sub(1));
    let mut values = Vec::with_capacity(times.capacity());
    for (&t, state) in traj.times().iter().zip(traj.states()) {
        if t > 0.0 {
            times.push(t);
            values.push(von_neumann_entropy(state)?);
        }
    }
    Ok(EntropyTrace {
        times,
        values,
        kind: EntropyKind::VonNeumann,
        alpha: traj.params().alpha(),
        network_tag: format!("n{}", traj.params().dim()),
        n_nodes: traj.params().dim(),
    })
}

/// Shannon entropy of classical occupation vectors over positive times.
pub fn shannon_trace(
    times: &[f64],
    probs: &[ndarray::Array1<f64>],
    alpha: f64,
    network_tag: &str,
    n_nodes: usize,
) -> Result<EntropyTrace> {
    if times.len() != probs.len() {
        return Err(QswError::DimensionMismatch(format!(
            "{} times vs {} probability vectors",
            times.len(),
            probs.len()
        )));
    }
    let mut out_t = Vec::new();
    let mut out_v = Vec::new();
    for (&t, p) in times.iter().zip(probs) {
        if t > 0.0 {
            out_t.push(t);
            out_v.push(shannon_entropy(p.as_slice().expect("contiguous"))?);
        }
    }
    Ok(EntropyTrace {
        times: out_t,
        values: out_v,
        kind: EntropyKind::Shannon,
        alpha,
        network_tag: network_tag.to_string(),
        n_nodes,
    })
}

/// Probability of remaining at the initial node: `(t, Re rho_jj(t))` for
/// every snapshot, including `t = 0`.
pub fn return_probability(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let j = traj.params().initial_node();
    let mut out = Vec::with_capacity(traj.states().len());
    for (&t, state) in traj.times().iter().zip(traj.states()) {
        let z = state.entries()[(j, j)];
        if z.im.abs() >= 1e-12 {
            return Err(QswError::InvalidProbability(format!(
                "return probability has imaginary part {:.3e} at t = {t}",
                z.im
            )));
        }
        out.push((t, z.re));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Convention;
    use crate::propagator::{propagate, TimeGrid, DEFAULT_ATOL, DEFAULT_RTOL};
    use crate::dynamics::QswParams;
    use crate::network::{make_chain, Network};
    use ndarray::Array2;
    use num_complex::Complex64;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two-sided Jacobi eigenvalue sweep for Hermitian matrices; independent
    /// oracle for the nalgebra-backed spectrum.
    fn jacobi_eigenvalues(m: &Array2<Complex64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.norm() < 1e-300 {
                        continue;
                    }
                    // Unitary 2x2 rotation annihilating (p, q).
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let phase = apq / apq.norm();
                    let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                    let (s, c) = theta.sin_cos();
                    let sp = phase * s;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - sp.conj() * akq;
                        a[(k, q)] = sp * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - sp * aqk;
                        a[(q, k)] = sp.conj() * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    fn random_density(n: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let a = Array2::from_shape_fn((n, n), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let ah = a.t().mapv(|z| z.conj());
        let m = a.dot(&ah);
        let tr: Complex64 = m.diag().sum();
        DensityMatrix::new(m.mapv(|z| z / tr)).unwrap()
    }

    #[test]
    fn pure_state_has_zero_entropy() {
        let rho = DensityMatrix::pure(6, 2).unwrap();
        assert_eq!(von_neumann_entropy(&rho).unwrap(), 0.0);
    }

    #[test]
    fn maximally_mixed_state_has_entropy_ln_n() {
        for n in [2usize, 5, 17] {
            let rho = DensityMatrix::maximally_mixed(n);
            let s = von_neumann_entropy(&rho).unwrap();
            assert!((s - (n as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_level_mixture_scalar_value() {
        // -0.9 ln 0.9 - 0.1 ln 0.1
        let expect = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln());
        let rho = DensityMatrix::from_diagonal(&[0.9, 0.1]).unwrap();
        assert!((von_neumann_entropy(&rho).unwrap() - expect).abs() < 1e-14);
        assert!((shannon_entropy(&[0.9, 0.1]).unwrap() - expect).abs() < 1e-14);
        assert!((expect - 0.3250829733914482).abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_genuinely_negative_eigenvalues() {
        assert!(entropy_from_eigenvalues(&[1.1, -1e-6]).is_err());
        // Noise-scale negatives are clamped away.
        assert_eq!(entropy_from_eigenvalues(&[1.0, -1e-9]).unwrap(), 0.0);
    }

    #[test]
    fn shannon_entropy_basics() {
        let mut e = vec![0.0; 8];
        e[3] = 1.0;
        assert_eq!(shannon_entropy(&e).unwrap(), 0.0);
        let uniform = vec![0.125; 8];
        assert!((shannon_entropy(&uniform).unwrap() - 8f64.ln()).abs() < 1e-12);
        assert!(shannon_entropy(&[0.5, 0.4]).is_err());
        assert!(shannon_entropy(&[1.1, -0.1]).is_err());
    }

    #[test]
    fn von_neumann_matches_shannon_of_spectrum_and_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..8 {
            let rho = random_density(4, &mut rng);
            let s = von_neumann_entropy(&rho).unwrap();
            let ev = jacobi_eigenvalues(rho.entries());
            let s_oracle = -ev
                .iter()
                .filter(|&&l| l > EIGENVALUE_CLAMP)
                .map(|&l| l * l.ln())
                .sum::<f64>();
            assert!(
                (s - s_oracle).abs() < 1e-10,
                "entropy {s} vs jacobi oracle {s_oracle}"
            );
            // And the eigenvalue spectra themselves agree.
            let ev_lib = rho.eigenvalues();
            for (a, b) in ev.iter().zip(&ev_lib) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn entropy_from_known_mixture_construction() {
        // rho = sum_k p_k |v_k><v_k| with orthonormal v_k has entropy
        // -sum p_k ln p_k by construction.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let n = 5;
        let a = nalgebra::DMatrix::<Complex64>::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let q = a.qr().q();
        let p = [0.4, 0.3, 0.15, 0.1, 0.05];
        let mut m = Array2::<Complex64>::zeros((n, n));
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += p[k] * q[(i, k)] * q[(j, k)].conj();
                }
            }
        }
        let rho = DensityMatrix::new(m).unwrap();
        let expect: f64 = -p.iter().map(|&x| x * x.ln()).sum::<f64>();
        assert!((von_neumann_entropy(&rho).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn entropy_is_unitarily_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let n = 5;
        let rho = random_density(n, &mut rng);
        let s0 = von_neumann_entropy(&rho).unwrap();
        let a = nalgebra::DMatrix::<Complex64>::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let u = a.qr().q();
        let mut rotated = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    for l in 0..n {
                        acc += u[(i, k)] * rho.entries()[(k, l)] * u[(j, l)].conj();
                    }
                }
                rotated[(i, j)] = acc;
            }
        }
        let s1 = von_neumann_entropy(&DensityMatrix::new(rotated).unwrap()).unwrap();
        assert!((s0 - s1).abs() < 1e-10);
    }

    #[test]
    fn alpha_zero_trace_is_identically_zero() {
        let net = make_chain(5).unwrap();
        let p = QswParams::for_network(&net, Convention::Laplacian, 0.0, 2).unwrap();
        let grid = TimeGrid::log_spaced(1e-1, 50.0, 5).unwrap();
        let traj = propagate(&p, &grid, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        let trace = entropy_trace(&traj).unwrap();
        for &v in &trace.values {
            assert!(v.abs() < 1e-6, "entropy {v} at alpha = 0");
        }
    }

    #[test]
    fn alpha_one_trace_equals_shannon_of_populations() {
        let net = make_chain(6).unwrap();
        let p = QswParams::for_network(&net, Convention::Laplacian, 1.0, 3).unwrap();
        let grid = TimeGrid::log_spaced(1e-1, 50.0, 5).unwrap();
        let traj = propagate(&p, &grid, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        let trace = entropy_trace(&traj).unwrap();
        let mut k = 0;
        for (&t, state) in traj.times().iter().zip(traj.states()) {
            if t > 0.0 {
                let pops = state.populations();
                let h = shannon_entropy(pops.as_slice().unwrap()).unwrap();
                assert!((trace.values[k] - h).abs() < 1e-9);
                k += 1;
            }
        }
    }

    #[test]
    fn trace_saturates_at_ln_n_past_relaxation_time() {
        // t_max beyond 10x the slowest classical relaxation time: the
        // chain(10) Laplacian gap is 2 (1 - cos(pi/10)) ~ 0.0979.
        let net = make_chain(10).unwrap();
        let p = QswParams::for_network(&net, Convention::Laplacian, 0.8, 5).unwrap();
        let grid = TimeGrid::log_spaced(1e-1, 1100.0, 5).unwrap();
        let traj = propagate(&p, &grid, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        let trace = entropy_trace(&traj).unwrap();
        let ln_n = trace.max_entropy();
        let last = *trace.values.last().unwrap();
        assert!((last - ln_n).abs() / ln_n < 0.01);
        // Entropy never exceeds ln N.
        for &v in &trace.values {
            assert!(v <= ln_n + 1e-9);
        }
    }

    #[test]
    fn return_probability_starts_at_one() {
        let p = QswParams::for_network(&Network::dimer(), Convention::Adjacency, 0.5, 0).unwrap();
        let grid = TimeGrid::log_spaced(1e-2, 5.0, 5).unwrap();
        let traj = propagate(&p, &grid, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        let rp = return_probability(&traj).unwrap();
        assert_eq!(rp[0], (0.0, 1.0));
        for &(_, v) in &rp {
            assert!(v >= -1e-12 && v <= 1.0 + 1e-9);
        }
    }
}
