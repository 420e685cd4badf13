//! Physical constants and the Fock-space truncation.
//!
//! Every frequency and rate is measured in units of the cavity frequency,
//! which is therefore fixed to one.

use serde::{Deserialize, Serialize};

use crate::error::{RabiError, Result};

/// Cavity frequency, the unit of every other frequency and rate.
pub const OMEGA_C: f64 = 1.0;

/// Default dissipation rate used for both the cavity and the atom.
pub const DEFAULT_DECAY: f64 = 1e-2;

/// Default ratio between the drive amplitude and the cavity decay rate.
pub const DEFAULT_DRIVE_RATIO: f64 = 1e-1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiParams {
    /// Atomic transition frequency.
    pub omega_a: f64,
    /// Atom-cavity coupling strength.
    pub g: f64,
    /// Cavity decay rate.
    pub gamma: f64,
    /// Atom decay rate.
    pub kappa: f64,
    /// Drive amplitude F.
    pub drive_amp: f64,
    /// Drive frequency.
    pub drive_freq: f64,
}

impl Default for RabiParams {
    fn default() -> Self {
        Self {
            omega_a: OMEGA_C,
            g: 0.0,
            gamma: DEFAULT_DECAY,
            kappa: DEFAULT_DECAY,
            drive_amp: DEFAULT_DRIVE_RATIO * DEFAULT_DECAY,
            drive_freq: OMEGA_C,
        }
    }
}

impl RabiParams {
    /// Resonant atom and cavity with the default dissipation and drive.
    pub fn resonant(g: f64) -> Self {
        Self {
            g,
            ..Self::default()
        }
    }

    pub fn omega_c(&self) -> f64 {
        OMEGA_C
    }

    pub fn with_g(self, g: f64) -> Self {
        Self { g, ..self }
    }

    pub fn with_drive(self, drive_amp: f64, drive_freq: f64) -> Self {
        Self {
            drive_amp,
            drive_freq,
            ..self
        }
    }

    pub fn with_decay(self, gamma: f64, kappa: f64) -> Self {
        Self {
            gamma,
            kappa,
            ..self
        }
    }

    /// Smallest strictly positive dissipation rate, if any.
    pub fn slowest_rate(&self) -> Option<f64> {
        [self.gamma, self.kappa]
            .into_iter()
            .filter(|r| *r > 0.0)
            .reduce(f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_a", self.omega_a),
            ("g", self.g),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("drive_amp", self.drive_amp),
            ("drive_freq", self.drive_freq),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(RabiError::config(format!("{name} must be finite, got {value}")));
            }
            if value < 0.0 {
                return Err(RabiError::config(format!("{name} must be nonnegative, got {value}")));
            }
        }
        Ok(())
    }
}

/// Number of Fock states kept for the cavity mode. The full Hilbert space
/// has dimension `2 * n_fock`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockTruncation(usize);

impl FockTruncation {
    pub const MIN: usize = 4;

    pub fn new(n_fock: usize) -> Result<Self> {
        if n_fock < Self::MIN {
            return Err(RabiError::config(format!(
                "n_fock = {n_fock} is below the minimum of {}",
                Self::MIN
            )));
        }
        Ok(Self(n_fock))
    }

    /// `ceil(20 + 4 g^2)`: deep-strong eigenstates are Fock states displaced by
    /// `g`, holding about `g^2` photons.
    pub fn for_coupling(g: f64) -> Self {
        let n = (20.0 + 4.0 * g * g).ceil() as usize;
        Self(n.max(Self::MIN))
    }

    pub fn n_fock(&self) -> usize {
        self.0
    }

    pub fn dim(&self) -> usize {
        2 * self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_rejects_small_spaces() {
        assert!(matches!(FockTruncation::new(3), Err(RabiError::Config(_))));
        assert_eq!(FockTruncation::new(4).unwrap().dim(), 8);
    }

    #[test]
    fn default_truncation_formula() {
        assert_eq!(FockTruncation::for_coupling(0.0).n_fock(), 20);
        assert_eq!(FockTruncation::for_coupling(3.0).n_fock(), 56);
        assert_eq!(FockTruncation::for_coupling(0.75).n_fock(), 23);
    }

    #[test]
    fn negative_rates_rejected() {
        let p = RabiParams::resonant(0.5).with_decay(-1e-2, 1e-2);
        assert!(p.validate().is_err());
        assert!(RabiParams::resonant(0.5).validate().is_ok());
    }

    #[test]
    fn slowest_rate_ignores_zero() {
        let p = RabiParams::resonant(0.5).with_decay(1e-2, 0.0);
        assert_eq!(p.slowest_rate(), Some(1e-2));
        assert_eq!(p.with_decay(0.0, 0.0).slowest_rate(), None);
    }
}
