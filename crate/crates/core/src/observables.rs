//! Positive-frequency output operator in the dressed basis, emitted
//! intensity and the equal-time second-order correlation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dissipator::theta;
use crate::dynamics::{period_average_real, SteadyCycle};
use crate::error::{RabiError, Result};
use crate::spectrum::{cavity_annihilation, CMatrix, DressedBasis};

/// `g2(0)` is undefined when `i_out <= G2_FLOOR_FACTOR * F^2`.
pub const G2_FLOOR_FACTOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct OutputOperator {
    pub xplus: CMatrix,
    pub xminus: CMatrix,
    /// `X^- X^+`.
    pub intensity_op: CMatrix,
    /// `X^- X^- X^+ X^+`.
    pub pair_op: CMatrix,
}

/// `X^+_{jk} = Delta_jk <Psi_j| i(a^dag - a) |Psi_k>` for downward
/// transitions between opposite parities, zero otherwise.
pub fn build_xplus(basis: &DressedBasis, n_levels_kept: usize) -> Result<OutputOperator> {
    let a = cavity_annihilation(basis.truncation);
    let quadrature = (a.adjoint() - &a) * Complex64::new(0.0, 1.0);
    let elements = basis.project(&quadrature, n_levels_kept)?;
    let states = &basis.states[..n_levels_kept];
    let xplus = CMatrix::from_fn(n_levels_kept, n_levels_kept, |j, k| {
        let delta = states[k].energy - states[j].energy;
        if states[j].parity != states[k].parity && theta(delta) {
            elements[(j, k)] * delta
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let xminus = xplus.adjoint();
    let intensity_op = &xminus * &xplus;
    let pair_op = &xminus * &xminus * &xplus * &xplus;
    Ok(OutputOperator {
        xplus,
        xminus,
        intensity_op,
        pair_op,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionStats {
    pub i_out: f64,
    /// `None` at dark points where the emission falls below the floor.
    pub g2_zero: Option<f64>,
}

/// `I_out = <X^- X^+>` averaged over the steady cycle.
pub fn intensity(cycle: &SteadyCycle, out: &OutputOperator) -> Result<f64> {
    period_average_real(cycle, &out.intensity_op)
}

/// `<X^- X^- X^+ X^+> / <X^- X^+>^2`, with numerator and denominator each
/// averaged over the cycle before dividing.
pub fn g2_zero(cycle: &SteadyCycle, out: &OutputOperator) -> Result<f64> {
    let i_out = intensity(cycle, out)?;
    g2_from_intensity(cycle, out, i_out)
}

fn g2_from_intensity(cycle: &SteadyCycle, out: &OutputOperator, i_out: f64) -> Result<f64> {
    let floor = G2_FLOOR_FACTOR * cycle.drive_amp * cycle.drive_amp;
    if i_out <= floor {
        return Err(RabiError::UndefinedCorrelation { i_out, floor });
    }
    let pairs = period_average_real(cycle, &out.pair_op)?;
    Ok(pairs.max(0.0) / (i_out * i_out))
}

pub fn emission_stats(cycle: &SteadyCycle, out: &OutputOperator) -> Result<EmissionStats> {
    let i_out = intensity(cycle, out)?;
    let g2 = match g2_from_intensity(cycle, out, i_out) {
        Ok(v) => Some(v),
        Err(RabiError::UndefinedCorrelation { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(EmissionStats { i_out, g2_zero: g2 })
}
