//! Right-hand side of the quantum-stochastic-walk master equation.
//!
//! The generator interpolates between the coherent commutator term and the
//! incoherent hopping-plus-dephasing dissipator,
//!
//! ```text
//! drho/dt = (1 - alpha) * (-i [H0, rho])
//!         + alpha * (D_hop[rho] + D_deph[rho])
//! ```
//!
//! Both dissipators are evaluated in closed form at O(N^2) cost instead of
//! materializing the N^2 jump operators `|m><n|`:
//!
//! * hopping (`L_mn = |m><n|`, rate `rates[m][n]`): the diagonal gains
//!   `sum_n rates[m][n] rho_nn` minus the anticommutator loss
//!   `(gamma_i + gamma_j) rho_ij / 2` with `gamma_n = sum_m rates[m][n]`;
//! * dephasing (`L_mm = |m><m|`, rate `lam`): `lam (diag(rho) - rho)`.

use ndarray::{linalg::general_mat_mul, Array1, Array2};
use num_complex::Complex64;

use crate::error::{QswError, Result};
use crate::network::{Convention, HermitianMatrix, Network, RateMatrix};

/// Dephasing rate used when none is configured.
pub const DEFAULT_DEPHASING_RATE: f64 = 1.0;

/// Density matrix: Hermitian, unit trace.
///
/// Construction checks Hermiticity (1e-10) and trace (1e-9). Positivity
/// (eigenvalues above -1e-8) is enforced where spectra are actually
/// computed, see [`crate::observables::von_neumann_entropy`].
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: Array2<Complex64>,
}

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-9;
    /// Eigenvalues below this floor are treated as genuine positivity
    /// violations rather than numerical noise.
    pub const EIGENVALUE_FLOOR: f64 = -1e-8;

    pub fn new(entries: Array2<Complex64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(QswError::DimensionMismatch(format!(
                "density matrix is {r}x{c}, expected square"
            )));
        }
        let dm = DensityMatrix { entries };
        let dev = dm.hermiticity_deviation();
        if dev > Self::HERMITICITY_TOL {
            return Err(QswError::NotHermitian {
                deviation: dev,
                tolerance: Self::HERMITICITY_TOL,
            });
        }
        let tr = dm.trace();
        let drift = (tr - Complex64::new(1.0, 0.0)).norm();
        if drift > Self::TRACE_TOL {
            return Err(QswError::TraceDrift {
                deviation: drift,
                tolerance: Self::TRACE_TOL,
            });
        }
        Ok(dm)
    }

    /// `|node><node|`.
    pub fn pure(dim: usize, node: usize) -> Result<Self> {
        if node >= dim {
            return Err(QswError::InvalidParameter(format!(
                "node {node} out of range for dimension {dim}"
            )));
        }
        let mut m = Array2::<Complex64>::zeros((dim, dim));
        m[(node, node)] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix { entries: m })
    }

    /// `I / N`, the stationary state for `alpha > 0`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let mut m = Array2::<Complex64>::zeros((dim, dim));
        let p = Complex64::new(1.0 / dim as f64, 0.0);
        for i in 0..dim {
            m[(i, i)] = p;
        }
        DensityMatrix { entries: m }
    }

    /// Diagonal density matrix from a probability vector.
    pub fn from_diagonal(p: &[f64]) -> Result<Self> {
        let mut m = Array2::<Complex64>::zeros((p.len(), p.len()));
        for (i, &pi) in p.iter().enumerate() {
            m[(i, i)] = Complex64::new(pi, 0.0);
        }
        DensityMatrix::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diag().sum()
    }

    /// Real parts of the diagonal (site populations).
    pub fn populations(&self) -> Array1<f64> {
        self.entries.diag().mapv(|z| z.re)
    }

    /// Max entrywise modulus of `rho - rho^H`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Eigenvalues of the Hermitian matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| self.entries[(i, j)]);
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Purity `tr(rho^2)`; 1 for pure states.
    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum_ij rho_ij rho_ji = sum_ij |rho_ij|^2 for Hermitian rho.
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Parameters of one quantum-stochastic-walk propagation.
#[derive(Debug, Clone)]
pub struct QswParams {
    alpha: f64,
    dephasing_rate: f64,
    hamiltonian: HermitianMatrix,
    rates: RateMatrix,
    initial_node: usize,
}

impl QswParams {
    pub fn new(
        alpha: f64,
        dephasing_rate: f64,
        hamiltonian: HermitianMatrix,
        rates: RateMatrix,
        initial_node: usize,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(QswError::InvalidParameter(format!(
                "alpha = {alpha} outside [0, 1]"
            )));
        }
        if !dephasing_rate.is_finite() || dephasing_rate < 0.0 {
            return Err(QswError::InvalidParameter(format!(
                "dephasing rate = {dephasing_rate} must be nonnegative"
            )));
        }
        if hamiltonian.dim() != rates.dim() {
            return Err(QswError::DimensionMismatch(format!(
                "hamiltonian dim {} vs rate matrix dim {}",
                hamiltonian.dim(),
                rates.dim()
            )));
        }
        if initial_node >= hamiltonian.dim() {
            return Err(QswError::InvalidParameter(format!(
                "initial node {initial_node} out of range for dimension {}",
                hamiltonian.dim()
            )));
        }
        Ok(QswParams {
            alpha,
            dephasing_rate,
            hamiltonian,
            rates,
            initial_node,
        })
    }

    /// Assemble parameters for a network: Hamiltonian under `convention`,
    /// golden-rule rates, unit dephasing.
    pub fn for_network(
        net: &Network,
        convention: Convention,
        alpha: f64,
        initial_node: usize,
    ) -> Result<Self> {
        let h = crate::network::hamiltonian(net, convention);
        let rates = crate::network::golden_rule_rates(&h);
        QswParams::new(alpha, DEFAULT_DEPHASING_RATE, h, rates, initial_node)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dephasing_rate(&self) -> f64 {
        self.dephasing_rate
    }

    pub fn hamiltonian(&self) -> &HermitianMatrix {
        &self.hamiltonian
    }

    pub fn rates(&self) -> &RateMatrix {
        &self.rates
    }

    pub fn initial_node(&self) -> usize {
        self.initial_node
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }
}

fn check_dims(rho: &Array2<Complex64>, dim: usize) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(QswError::DimensionMismatch(format!(
            "state is {}x{}, operator dimension is {dim}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(())
}

/// Coherent term `-i [H, rho]`.
///
/// Uses `[H, rho] = H rho - (H rho)^H`, valid for Hermitian `rho`; the
/// result is Hermitian and traceless by construction. The product is done
/// on real/imaginary planes so the real-symmetric Hamiltonians produced by
/// [`crate::network::hamiltonian`] need only two real matrix multiplies.
pub fn ctqw_term(rho: &Array2<Complex64>, h: &HermitianMatrix) -> Result<Array2<Complex64>> {
    let n = h.dim();
    check_dims(rho, n)?;
    let rx = rho.mapv(|z| z.re);
    let ry = rho.mapv(|z| z.im);
    // C = H rho on planes: Re C = A X - B Y, Im C = A Y + B X.
    let a = h.real_plane();
    let mut cre = Array2::<f64>::zeros((n, n));
    let mut cim = Array2::<f64>::zeros((n, n));
    general_mat_mul(1.0, a, &rx, 0.0, &mut cre);
    general_mat_mul(1.0, a, &ry, 0.0, &mut cim);
    if let Some(b) = h.imag_plane() {
        general_mat_mul(-1.0, b, &ry, 1.0, &mut cre);
        general_mat_mul(1.0, b, &rx, 1.0, &mut cim);
    }
    // -i (C - C^H): entry (i, j) = (Im C_ij + Im C_ji) - i (Re C_ij - Re C_ji).
    let mut out = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = Complex64::new(cim[(i, j)] + cim[(j, i)], cre[(j, i)] - cre[(i, j)]);
        }
    }
    Ok(out)
}

/// Incoherent hopping dissipator in closed form (gain on the diagonal,
/// anticommutator loss everywhere).
pub fn ctrw_dissipator(rho: &Array2<Complex64>, rates: &RateMatrix) -> Result<Array2<Complex64>> {
    let n = rates.dim();
    check_dims(rho, n)?;
    let gamma = rates.out_rates();
    let r = rates.rates();
    let mut out = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = -0.5 * (gamma[i] + gamma[j]) * rho[(i, j)];
        }
        let mut gain = Complex64::new(0.0, 0.0);
        for k in 0..n {
            gain += r[(i, k)] * rho[(k, k)];
        }
        out[(i, i)] += gain;
    }
    Ok(out)
}

/// Localized dephasing dissipator `lam (diag(rho) - rho)`: leaves
/// populations untouched, damps every coherence at rate `lam`.
pub fn dephasing_dissipator(rho: &Array2<Complex64>, lam: f64) -> Result<Array2<Complex64>> {
    if !lam.is_finite() || lam < 0.0 {
        return Err(QswError::InvalidParameter(format!(
            "dephasing rate = {lam} must be nonnegative"
        )));
    }
    let mut out = rho.mapv(|z| -lam * z);
    for i in 0..rho.nrows().min(rho.ncols()) {
        out[(i, i)] = Complex64::new(0.0, 0.0);
    }
    Ok(out)
}

/// Full master-equation right-hand side,
/// `(1 - alpha) * ctqw_term + alpha * (ctrw_dissipator + dephasing_dissipator)`,
/// fused into one pass. The coherent product is skipped at `alpha = 1` and
/// the dissipative terms at `alpha = 0`.
pub fn qsw_rhs(rho: &Array2<Complex64>, p: &QswParams) -> Result<Array2<Complex64>> {
    let n = p.dim();
    check_dims(rho, n)?;
    let alpha = p.alpha;
    let lam = p.dephasing_rate;

    let mut out = if alpha < 1.0 {
        let mut c = ctqw_term(rho, &p.hamiltonian)?;
        if alpha > 0.0 {
            let w = Complex64::new(1.0 - alpha, 0.0);
            c.mapv_inplace(|z| z * w);
        }
        c
    } else {
        Array2::<Complex64>::zeros((n, n))
    };

    if alpha > 0.0 {
        let gamma = p.rates.out_rates();
        let r = p.rates.rates();
        for i in 0..n {
            for j in 0..n {
                // Hopping loss plus dephasing on the coherences.
                let deph = if i == j { 0.0 } else { lam };
                let w = alpha * (0.5 * (gamma[i] + gamma[j]) + deph);
                out[(i, j)] -= w * rho[(i, j)];
            }
            let mut gain = Complex64::new(0.0, 0.0);
            for k in 0..n {
                gain += r[(i, k)] * rho[(k, k)];
            }
            out[(i, i)] += alpha * gain;
        }
    }
    Ok(out)
}

/// Classical CTRW generator: `T[m][n] = rates[m][n]` off the diagonal,
/// `T[n][n] = -sum_m rates[m][n]`; columns sum to zero.
pub fn classical_generator(rates: &RateMatrix) -> Array2<f64> {
    let n = rates.dim();
    let gamma = rates.out_rates();
    let mut t = rates.rates().clone();
    for i in 0..n {
        t[(i, i)] = -gamma[i];
    }
    t
}
