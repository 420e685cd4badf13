//! Truncated Rabi Hamiltonian, parity symmetry and the dressed-state basis.
//!
//! The product basis is ordered `|n, q>` -> index `2 n + q`, with `n` the
//! Fock index and `q = 0` (ground) or `q = 1` (excited) the atomic state.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{RabiError, Result};
use crate::params::{FockTruncation, RabiParams, OMEGA_C};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Energies closer than this are treated as a tie when ordering states.
pub const ENERGY_TIE_TOL: f64 = 1e-12;

/// Largest tolerated distance of `<Pi>` from +-1.
pub const PARITY_TOL: f64 = 1e-6;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigenvalue of the excitation-number parity operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Parity {
    pub fn of_excitations(n: usize) -> Self {
        if n.is_multiple_of(2) {
            Parity::Plus
        } else {
            Parity::Minus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Plus => 1.0,
            Parity::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Plus => Parity::Minus,
            Parity::Minus => Parity::Plus,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Parity::Plus => "+",
            Parity::Minus => "-",
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[inline]
fn product_index(n: usize, q: usize) -> usize {
    2 * n + q
}

/// Cavity annihilation operator `a` on the truncated product space.
pub fn cavity_annihilation(trunc: FockTruncation) -> CMatrix {
    let dim = trunc.dim();
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..trunc.n_fock() {
        let amp = Complex64::new((n as f64).sqrt(), 0.0);
        for q in 0..2 {
            a[(product_index(n - 1, q), product_index(n, q))] = amp;
        }
    }
    a
}

/// Atomic lowering operator `sigma_-` on the truncated product space.
pub fn atom_lowering(trunc: FockTruncation) -> CMatrix {
    let dim = trunc.dim();
    let mut s = CMatrix::zeros(dim, dim);
    for n in 0..trunc.n_fock() {
        s[(product_index(n, 0), product_index(n, 1))] = ONE;
    }
    s
}

/// `H_r = w_c a^dag a + w_a sigma_+ sigma_- - g (a + a^dag) sigma_x`.
///
/// Off-diagonal couplings are written to both triangles with conjugate
/// values, so the result is exactly Hermitian.
pub fn build_rabi_hamiltonian(params: &RabiParams, trunc: FockTruncation) -> Result<CMatrix> {
    params.validate()?;
    let dim = trunc.dim();
    let mut h = CMatrix::zeros(dim, dim);
    for n in 0..trunc.n_fock() {
        for q in 0..2 {
            let i = product_index(n, q);
            h[(i, i)] = Complex64::new(OMEGA_C * n as f64 + params.omega_a * q as f64, 0.0);
        }
    }
    // -g sqrt(n+1) couples |n, q> with |n+1, 1-q>.
    for n in 0..trunc.n_fock() - 1 {
        let amp = Complex64::new(-params.g * ((n + 1) as f64).sqrt(), 0.0);
        for q in 0..2 {
            let i = product_index(n, q);
            let j = product_index(n + 1, 1 - q);
            h[(j, i)] = amp;
            h[(i, j)] = amp.conj();
        }
    }
    Ok(h)
}

/// Diagonal matrix with entries `(-1)^(n + q)`.
pub fn build_parity_operator(trunc: FockTruncation) -> CMatrix {
    let dim = trunc.dim();
    let diag = CVector::from_fn(dim, |i, _| {
        Complex64::new(Parity::of_excitations(i / 2 + i % 2).sign(), 0.0)
    });
    CMatrix::from_diagonal(&diag)
}

/// One eigenstate of the undriven Hamiltonian.
#[derive(Debug, Clone)]
pub struct DressedState {
    pub energy: f64,
    pub parity: Parity,
    /// Energy rank inside its parity sector, counting from zero.
    pub index_in_parity: usize,
    pub vector: CVector,
}

impl DressedState {
    pub fn label(&self) -> String {
        format!("Psi_{}^{}", self.index_in_parity, self.parity)
    }
}

/// Energy-ascending eigenbasis of the Rabi Hamiltonian.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    pub params: RabiParams,
    pub truncation: FockTruncation,
    pub states: Vec<DressedState>,
}

/// Diagonalize `H_r` sector by sector and assemble the dressed basis.
///
/// Each parity block is diagonalized on its own, so every eigenvector has a
/// definite parity even inside degenerate subspaces. The global phase of each
/// vector is fixed by making its largest coefficient real and positive.
pub fn diagonalize_dressed(params: &RabiParams, trunc: FockTruncation) -> Result<DressedBasis> {
    let h = build_rabi_hamiltonian(params, trunc)?;
    let parity_op = build_parity_operator(trunc);
    let dim = trunc.dim();

    let mut states = Vec::with_capacity(dim);
    for parity in [Parity::Plus, Parity::Minus] {
        let sector: Vec<usize> = (0..dim)
            .filter(|&i| Parity::of_excitations(i / 2 + i % 2) == parity)
            .collect();
        let block = CMatrix::from_fn(sector.len(), sector.len(), |r, c| h[(sector[r], sector[c])]);
        let eig = SymmetricEigen::new(block);

        let mut order: Vec<usize> = (0..sector.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

        for (j, &col) in order.iter().enumerate() {
            let mut vector = CVector::zeros(dim);
            for (r, &full) in sector.iter().enumerate() {
                vector[full] = eig.eigenvectors[(r, col)];
            }
            fix_phase(&mut vector);
            let expectation = expectation_value(&parity_op, &vector).re;
            if (expectation - parity.sign()).abs() > PARITY_TOL {
                return Err(RabiError::Diagnostic(format!(
                    "state {j} of sector {parity} has <Pi> = {expectation} at g = {}",
                    params.g
                )));
            }
            states.push(DressedState {
                energy: eig.eigenvalues[col],
                parity,
                index_in_parity: j,
                vector,
            });
        }
    }

    order_states(&mut states);
    if states[0].parity != Parity::Plus {
        return Err(RabiError::Diagnostic(format!(
            "ground state has parity {} at g = {}",
            states[0].parity, params.g
        )));
    }
    Ok(DressedBasis {
        params: *params,
        truncation: trunc,
        states,
    })
}

/// Ascending energy; near-ties list the `+` state first.
fn order_states(states: &mut [DressedState]) {
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    loop {
        let mut swapped = false;
        for i in 1..states.len() {
            let (lo, hi) = (&states[i - 1], &states[i]);
            if (hi.energy - lo.energy).abs() < ENERGY_TIE_TOL
                && lo.parity == Parity::Minus
                && hi.parity == Parity::Plus
            {
                states.swap(i - 1, i);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
}

/// Rotate the global phase so the largest-magnitude entry (first one on
/// ties) is real and positive.
fn fix_phase(v: &mut CVector) {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .find(|c| c.norm() >= max * (1.0 - 1e-9))
        .copied()
        .unwrap_or(ONE);
    let rot = pivot.conj() / pivot.norm();
    v.iter_mut().for_each(|c| *c *= rot);
}

fn expectation_value(op: &CMatrix, v: &CVector) -> Complex64 {
    v.dotc(&(op * v))
}

impl DressedBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn ground(&self) -> &DressedState {
        &self.states[0]
    }

    /// Overall energy rank of `|Psi_j^p>`.
    pub fn rank_of(&self, parity: Parity, j: usize) -> Option<usize> {
        self.states
            .iter()
            .position(|s| s.parity == parity && s.index_in_parity == j)
    }

    pub fn state(&self, parity: Parity, j: usize) -> Option<&DressedState> {
        self.rank_of(parity, j).map(|r| &self.states[r])
    }

    /// `E_j^p`.
    pub fn energy(&self, parity: Parity, j: usize) -> Result<f64> {
        self.state(parity, j).map(|s| s.energy).ok_or_else(|| {
            RabiError::config(format!(
                "basis with n_fock = {} has no state Psi_{j}^{parity}",
                self.truncation.n_fock()
            ))
        })
    }

    pub fn count_in_sector(&self, parity: Parity) -> usize {
        self.states.iter().filter(|s| s.parity == parity).count()
    }

    /// Energies of the lowest `n_keep` states.
    pub fn kept_energies(&self, n_keep: usize) -> Vec<f64> {
        self.states[..n_keep].iter().map(|s| s.energy).collect()
    }

    /// Matrix of `op` between the lowest `n_keep` dressed states,
    /// `<Psi_row| op |Psi_col>`.
    pub fn project(&self, op: &CMatrix, n_keep: usize) -> Result<CMatrix> {
        let dim = self.truncation.dim();
        if op.nrows() != dim || op.ncols() != dim {
            return Err(RabiError::DimensionMismatch {
                expected: dim,
                found_rows: op.nrows(),
                found_cols: op.ncols(),
            });
        }
        if n_keep > self.len() {
            return Err(RabiError::config(format!(
                "cannot keep {n_keep} levels out of {}",
                self.len()
            )));
        }
        let u = CMatrix::from_fn(dim, n_keep, |r, c| self.states[c].vector[r]);
        Ok(u.adjoint() * op * &u)
    }

    /// `E_n^- - E_n^+`, the splitting of the n-th quasi-degenerate doublet.
    pub fn doublet_splitting(&self, n: usize) -> Result<f64> {
        Ok(self.energy(Parity::Minus, n)? - self.energy(Parity::Plus, n)?)
    }

    /// One row per state: `(g, rank, energy, parity, j)`.
    pub fn spectrum_rows(&self) -> Vec<SpectrumRow> {
        self.states
            .iter()
            .enumerate()
            .map(|(rank, s)| SpectrumRow {
                g: self.params.g,
                rank,
                energy: s.energy,
                parity: s.parity,
                j: s.index_in_parity,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub g: f64,
    pub rank: usize,
    pub energy: f64,
    pub parity: Parity,
    pub j: usize,
}

/// `Delta_jk^{p p'} = E_k^{p'} - E_j^p`, the frequency of the transition
/// `|Psi_k^{p'}> -> |Psi_j^p>`.
pub fn transition_frequency(
    basis: &DressedBasis,
    to: (Parity, usize),
    from: (Parity, usize),
) -> Result<f64> {
    Ok(basis.energy(from.0, from.1)? - basis.energy(to.0, to.1)?)
}

/// `eta = Delta_21^{+-} - Delta_10^{-+} = (E_1^- - E_2^+) - (E_0^+ - E_1^-)`.
pub fn anharmonicity(basis: &DressedBasis) -> Result<f64> {
    for parity in [Parity::Plus, Parity::Minus] {
        if basis.count_in_sector(parity) < 3 {
            return Err(RabiError::config(format!(
                "anharmonicity needs three states in sector {parity}"
            )));
        }
    }
    let upper = transition_frequency(basis, (Parity::Plus, 2), (Parity::Minus, 1))?;
    let lower = transition_frequency(basis, (Parity::Minus, 1), (Parity::Plus, 0))?;
    Ok(upper - lower)
}

/// `E_1^- - E_1^+` at coupling `g`; negative below the parity crossing.
fn crossing_gap(params: &RabiParams, trunc: FockTruncation, g: f64) -> Result<f64> {
    let basis = diagonalize_dressed(&params.with_g(g), trunc)?;
    basis.doublet_splitting(1)
}

/// Locate the coupling where the second excited state changes parity by
/// bisecting the sign of `E_1^- - E_1^+`.
pub fn detect_parity_crossing(
    params: &RabiParams,
    trunc: FockTruncation,
    g_lo: f64,
    g_hi: f64,
    tol_g: f64,
) -> Result<f64> {
    if !(g_lo >= 0.0 && g_lo < g_hi) {
        return Err(RabiError::config(format!("invalid bracket [{g_lo}, {g_hi}]")));
    }
    if !(tol_g > 0.0) {
        return Err(RabiError::config(format!("tol_g must be positive, got {tol_g}")));
    }
    let (mut lo, mut hi) = (g_lo, g_hi);
    let mut f_lo = crossing_gap(params, trunc, lo)?;
    let f_hi = crossing_gap(params, trunc, hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(RabiError::NotFound(format!(
            "second excited state keeps its parity on [{g_lo}, {g_hi}]"
        )));
    }
    while hi - lo >= tol_g {
        let mid = 0.5 * (lo + hi);
        let f_mid = crossing_gap(params, trunc, mid)?;
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Laguerre polynomial `L_n(x)` by the three-term recurrence.
pub fn laguerre(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Overlap `<n, -g|n, g>` of displaced Fock states,
/// `exp(-2 g^2) L_n(4 g^2)` with `g` in units of the cavity frequency.
///
/// Times `omega_a`, it approximates the splitting of the n-th doublet at
/// large coupling.
pub fn doublet_splitting_oracle(n: usize, g: f64) -> f64 {
    let x = g / OMEGA_C;
    (-2.0 * x * x).exp() * laguerre(n, 4.0 * x * x)
}
