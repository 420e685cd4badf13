//! Dressed-state dissipation: Theta-gated, frequency-proportional jump rates
//! between eigenstates of opposite parity and the resulting Lindblad term.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{RabiError, Result};
use crate::params::OMEGA_C;
use crate::spectrum::{atom_lowering, cavity_annihilation, CMatrix, DressedBasis, Parity};

/// Default number of dressed levels kept in the open-system simulation.
pub const DEFAULT_LEVELS_KEPT: usize = 12;

/// Step function of the jump rates: open only for strictly positive
/// transition frequencies, so degenerate pairs carry no rate.
#[inline]
pub fn theta(delta: f64) -> bool {
    delta > 0.0
}

/// Reference to a dressed state by label and overall energy rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateRef {
    pub parity: Parity,
    pub j: usize,
    pub rank: usize,
}

/// One allowed downward transition `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpChannel {
    pub from: StateRef,
    pub to: StateRef,
    /// Transition frequency `E_from - E_to`, strictly positive.
    pub delta: f64,
    /// Rate due to cavity losses, `gamma (delta / w_c) |<to|(a - a^dag)|from>|^2`.
    pub rate_cavity: f64,
    /// Rate due to atomic losses, `kappa (delta / w_c) |<to|(s_- - s_+)|from>|^2`.
    pub rate_atom: f64,
}

impl JumpChannel {
    pub fn chi(&self) -> f64 {
        self.rate_cavity + self.rate_atom
    }
}

/// Jump channels among the lowest `n_levels_kept` dressed states.
#[derive(Debug, Clone)]
pub struct DissipatorSpec {
    pub channels: Vec<JumpChannel>,
    pub basis: Arc<DressedBasis>,
    pub n_levels_kept: usize,
    pub gamma: f64,
    pub kappa: f64,
    /// Total departure rate of each kept level.
    out_rates: Vec<f64>,
}

/// Build every Theta-allowed channel between kept levels of opposite parity.
pub fn transition_rates(
    basis: &Arc<DressedBasis>,
    gamma: f64,
    kappa: f64,
    n_levels_kept: usize,
) -> Result<DissipatorSpec> {
    if !(gamma >= 0.0 && kappa >= 0.0) {
        return Err(RabiError::config(format!(
            "decay rates must be nonnegative, got gamma = {gamma}, kappa = {kappa}"
        )));
    }
    if n_levels_kept == 0 || n_levels_kept > basis.len() {
        return Err(RabiError::config(format!(
            "n_levels_kept = {n_levels_kept} must lie in 1..={}",
            basis.len()
        )));
    }
    let trunc = basis.truncation;
    let a = cavity_annihilation(trunc);
    let s = atom_lowering(trunc);
    let photonic = basis.project(&(&a - a.adjoint()), n_levels_kept)?;
    let atomic = basis.project(&(&s - s.adjoint()), n_levels_kept)?;

    let refs: Vec<StateRef> = basis.states[..n_levels_kept]
        .iter()
        .enumerate()
        .map(|(rank, st)| StateRef {
            parity: st.parity,
            j: st.index_in_parity,
            rank,
        })
        .collect();

    let mut channels = Vec::new();
    for from in &refs {
        for to in &refs {
            if from.parity == to.parity {
                continue;
            }
            let delta = basis.states[from.rank].energy - basis.states[to.rank].energy;
            if !theta(delta) {
                continue;
            }
            let scale = delta / OMEGA_C;
            channels.push(JumpChannel {
                from: *from,
                to: *to,
                delta,
                rate_cavity: gamma * scale * photonic[(to.rank, from.rank)].norm_sqr(),
                rate_atom: kappa * scale * atomic[(to.rank, from.rank)].norm_sqr(),
            });
        }
    }

    let mut out_rates = vec![0.0; n_levels_kept];
    for ch in &channels {
        out_rates[ch.from.rank] += ch.chi();
    }
    Ok(DissipatorSpec {
        channels,
        basis: Arc::clone(basis),
        n_levels_kept,
        gamma,
        kappa,
        out_rates,
    })
}

impl DissipatorSpec {
    /// Total rate `chi = Gamma + K` of `|Psi_from> -> |Psi_to>`; zero when
    /// no channel exists.
    pub fn chi(&self, to: (Parity, usize), from: (Parity, usize)) -> f64 {
        self.channels
            .iter()
            .find(|c| (c.to.parity, c.to.j) == to && (c.from.parity, c.from.j) == from)
            .map_or(0.0, JumpChannel::chi)
    }

    pub fn out_rates(&self) -> &[f64] {
        &self.out_rates
    }

    /// Accumulate the dissipator acting on a row-major `n x n` matrix into `out`.
    ///
    /// `sum_c chi_c D[|j><k|] rho` reduces to a population feed
    /// `rho_kk -> rho_jj` plus damping of element `(m, n)` at
    /// `(R_m + R_n) / 2`, with `R` the total departure rate.
    pub(crate) fn accumulate(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let n = self.n_levels_kept;
        for m in 0..n {
            for l in 0..n {
                out[m * n + l] -= 0.5 * (self.out_rates[m] + self.out_rates[l]) * rho[m * n + l];
            }
        }
        for ch in &self.channels {
            let (j, k) = (ch.to.rank, ch.from.rank);
            out[j * n + j] += ch.chi() * rho[k * n + k];
        }
    }

    /// Debug rows `(g, j_to, p_to, k_from, p_from, delta, gamma_rate, kappa_rate, chi)`.
    pub fn channel_rows(&self) -> Vec<ChannelRow> {
        self.channels
            .iter()
            .map(|c| ChannelRow {
                g: self.basis.params.g,
                j_to: c.to.j,
                p_to: c.to.parity,
                k_from: c.from.j,
                p_from: c.from.parity,
                delta: c.delta,
                gamma_rate: c.rate_cavity,
                kappa_rate: c.rate_atom,
                chi: c.chi(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRow {
    pub g: f64,
    pub j_to: usize,
    pub p_to: Parity,
    pub k_from: usize,
    pub p_from: Parity,
    pub delta: f64,
    pub gamma_rate: f64,
    pub kappa_rate: f64,
    pub chi: f64,
}

/// `sum_c chi_c D[|to><from|] rho` on the kept-level dressed basis.
pub fn apply_dissipator(spec: &DissipatorSpec, rho: &CMatrix) -> Result<CMatrix> {
    let n = spec.n_levels_kept;
    if rho.nrows() != n || rho.ncols() != n {
        return Err(RabiError::DimensionMismatch {
            expected: n,
            found_rows: rho.nrows(),
            found_cols: rho.ncols(),
        });
    }
    let flat: Vec<Complex64> = rho.transpose().iter().copied().collect();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    spec.accumulate(&flat, &mut out);
    Ok(CMatrix::from_row_slice(n, n, &out))
}
