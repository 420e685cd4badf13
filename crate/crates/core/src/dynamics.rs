//! Lab-frame integration of the driven dressed-state master equation and
//! sampling of its time-periodic steady cycle.
//!
//! The density matrix lives on the lowest `n_levels_kept` dressed states.
//! Only its Hermitian part is evolved: the state vector holds the real
//! diagonal followed by the real and imaginary parts of the strict upper
//! triangle, so every reconstructed sample is exactly Hermitian.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;

use crate::dissipator::DissipatorSpec;
use crate::error::{RabiError, Result};
use crate::integrator::{Dopri5, StepControl, StepStats};
use crate::params::RabiParams;
use crate::spectrum::{cavity_annihilation, CMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest period-to-period change of the averaged populations accepted as
/// stationary.
pub const STALENESS_TOL: f64 = 1e-4;

/// Eigenvalues below `-POSITIVITY_FATAL` abort the integration.
pub const POSITIVITY_FATAL: f64 = 1e-4;

/// Absolute tolerance relative to the requested relative tolerance.
const ATOL_RATIO: f64 = 1e-3;

/// Time controls of a steady-state run. `t_relax = None` selects ten
/// lifetimes of the slowest dissipation rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSettings {
    pub t_relax: Option<f64>,
    pub n_avg_periods: usize,
    pub samples_per_period: usize,
    pub integrator_tol: f64,
    /// Extra relaxation allowed for non-stationary windows, in units of the
    /// longer of `t_relax` and the averaging window.
    pub max_extra_relax: f64,
}

impl Default for IntegrationSettings {
    fn default() -> Self {
        Self {
            t_relax: None,
            n_avg_periods: 10,
            samples_per_period: 64,
            integrator_tol: 1e-8,
            max_extra_relax: 3.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DriveConfig {
    pub params: RabiParams,
    pub spec: Arc<DissipatorSpec>,
    /// Dressed energies of the kept levels.
    pub energies: Vec<f64>,
    /// `(a + a^dag)` between kept dressed levels, all elements included.
    pub drive_matrix: CMatrix,
    pub t_relax: f64,
    pub n_avg_periods: usize,
    pub samples_per_period: usize,
    pub integrator_tol: f64,
    pub max_extra_relax: f64,
}

impl DriveConfig {
    pub fn new(
        params: RabiParams,
        spec: Arc<DissipatorSpec>,
        settings: IntegrationSettings,
    ) -> Result<Self> {
        params.validate()?;
        let slowest = params.slowest_rate().ok_or_else(|| {
            RabiError::config("no dissipation: the driven system has no steady state")
        })?;
        let n = spec.n_levels_kept;
        let basis = &spec.basis;
        let a = cavity_annihilation(basis.truncation);
        let drive_matrix = basis.project(&(&a + a.adjoint()), n)?;
        let config = Self {
            params,
            energies: basis.kept_energies(n),
            drive_matrix,
            t_relax: settings.t_relax.unwrap_or(10.0 / slowest),
            n_avg_periods: settings.n_avg_periods,
            samples_per_period: settings.samples_per_period,
            integrator_tol: settings.integrator_tol,
            max_extra_relax: settings.max_extra_relax,
            spec,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let slowest = self
            .params
            .slowest_rate()
            .ok_or_else(|| RabiError::config("no dissipation: no steady state"))?;
        if !(self.params.drive_freq > 0.0) {
            return Err(RabiError::config("drive frequency must be positive"));
        }
        if !(self.t_relax >= 5.0 / slowest) {
            return Err(RabiError::config(format!(
                "t_relax = {} is shorter than five lifetimes ({})",
                self.t_relax,
                5.0 / slowest
            )));
        }
        if self.n_avg_periods < 5 {
            return Err(RabiError::config("at least 5 drive periods must be averaged"));
        }
        if self.samples_per_period < 32 {
            return Err(RabiError::config("at least 32 samples per period are required"));
        }
        if !(self.integrator_tol > 0.0 && self.integrator_tol < 1e-2) {
            return Err(RabiError::config(format!(
                "integrator tolerance {} outside (0, 1e-2)",
                self.integrator_tol
            )));
        }
        if !(self.max_extra_relax >= 0.0) {
            return Err(RabiError::config("max_extra_relax must be nonnegative"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn period(&self) -> f64 {
        TAU / self.params.drive_freq
    }

    fn check_dim(&self, m: &CMatrix) -> Result<()> {
        let n = self.dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(RabiError::DimensionMismatch {
                expected: n,
                found_rows: m.nrows(),
                found_cols: m.ncols(),
            });
        }
        Ok(())
    }
}

/// Flat row-major evaluation of the master-equation right-hand side.
struct MasterEquation<'a> {
    n: usize,
    energies: &'a [f64],
    drive: Vec<Complex64>,
    amp: f64,
    omega_d: f64,
    spec: &'a DissipatorSpec,
    rho: Vec<Complex64>,
    drho: Vec<Complex64>,
    prod: Vec<Complex64>,
}

impl<'a> MasterEquation<'a> {
    fn new(config: &'a DriveConfig) -> Self {
        let n = config.dim();
        Self {
            n,
            energies: &config.energies,
            drive: config.drive_matrix.transpose().iter().copied().collect(),
            amp: config.params.drive_amp,
            omega_d: config.params.drive_freq,
            spec: &config.spec,
            rho: vec![ZERO; n * n],
            drho: vec![ZERO; n * n],
            prod: vec![ZERO; n * n],
        }
    }

    /// `i[rho, H_diag + F cos(w_d t) V] + dissipator`, into `self.drho`.
    fn eval_full(&mut self, t: f64) {
        let n = self.n;
        let (rho, out, prod) = (&self.rho, &mut self.drho, &mut self.prod);
        for m in 0..n {
            for l in 0..n {
                out[m * n + l] = I * (self.energies[l] - self.energies[m]) * rho[m * n + l];
            }
        }
        let f = self.amp * (self.omega_d * t).cos();
        if f != 0.0 {
            // i f (rho V - V rho), and V rho = (rho V)^dag for Hermitian rho, V.
            prod.fill(ZERO);
            for m in 0..n {
                for k in 0..n {
                    let r = rho[m * n + k];
                    if r == ZERO {
                        continue;
                    }
                    let row = &self.drive[k * n..(k + 1) * n];
                    let dst = &mut prod[m * n..(m + 1) * n];
                    for (d, v) in dst.iter_mut().zip(row) {
                        *d += r * v;
                    }
                }
            }
            let scale = I * f;
            for m in 0..n {
                for l in m..n {
                    let c = scale * (prod[m * n + l] - prod[l * n + m].conj());
                    out[m * n + l] += c;
                    if l != m {
                        out[l * n + m] += c.conj();
                    }
                }
            }
        }
        self.spec.accumulate(rho, out);
    }

    fn eval_packed(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        unpack_into(self.n, y, &mut self.rho);
        self.eval_full(t);
        pack_into(self.n, &self.drho, dy);
    }
}

fn pack_into(n: usize, m: &[Complex64], y: &mut [f64]) {
    for i in 0..n {
        y[i] = m[i * n + i].re;
    }
    let mut p = n;
    for i in 0..n {
        for j in i + 1..n {
            let c = m[i * n + j];
            y[p] = c.re;
            y[p + 1] = c.im;
            p += 2;
        }
    }
}

fn unpack_into(n: usize, y: &[f64], m: &mut [Complex64]) {
    for i in 0..n {
        m[i * n + i] = Complex64::new(y[i], 0.0);
    }
    let mut p = n;
    for i in 0..n {
        for j in i + 1..n {
            let c = Complex64::new(y[p], y[p + 1]);
            m[i * n + j] = c;
            m[j * n + i] = c.conj();
            p += 2;
        }
    }
}

fn pack_matrix(m: &CMatrix) -> Vec<f64> {
    let n = m.nrows();
    let flat: Vec<Complex64> = m.transpose().iter().copied().collect();
    let mut y = vec![0.0; n * n];
    pack_into(n, &flat, &mut y);
    y
}

fn unpack_matrix(n: usize, y: &[f64]) -> CMatrix {
    let mut flat = vec![ZERO; n * n];
    unpack_into(n, y, &mut flat);
    CMatrix::from_row_slice(n, n, &flat)
}

/// `d rho / dt` at time `t`.
pub fn rhs(rho: &CMatrix, t: f64, config: &DriveConfig) -> Result<CMatrix> {
    config.check_dim(rho)?;
    let n = config.dim();
    let mut eq = MasterEquation::new(config);
    eq.rho = rho.transpose().iter().copied().collect();
    eq.eval_full(t);
    Ok(CMatrix::from_row_slice(n, n, &eq.drho))
}

/// Health indicators of a steady-state run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleDiagnostics {
    /// Largest change of period-averaged populations between the last two periods.
    pub staleness: f64,
    pub converged: bool,
    /// Largest `|tr rho - 1|` over all samples.
    pub max_trace_error: f64,
    /// Smallest eigenvalue over all samples.
    pub min_eigenvalue: f64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    /// Windows discarded because they were not yet stationary.
    pub extensions: usize,
    /// Integration time at the end of the returned window.
    pub t_end: f64,
}

/// Density matrices sampled at equally spaced phases over the averaging
/// window, which spans `n_avg_periods` whole drive periods.
#[derive(Debug, Clone)]
pub struct SteadyCycle {
    pub rho_samples: Vec<CMatrix>,
    /// Sample times modulo the drive period.
    pub phase_grid: Vec<f64>,
    pub period: f64,
    pub samples_per_period: usize,
    pub drive_amp: f64,
    pub diagnostics: CycleDiagnostics,
}

impl SteadyCycle {
    pub fn dim(&self) -> usize {
        self.rho_samples.first().map_or(0, |r| r.nrows())
    }

    /// Period-averaged populations of one period of the window.
    pub fn period_populations(&self, period: usize) -> Vec<f64> {
        let s = self.samples_per_period;
        let n = self.dim();
        let mut pops = vec![0.0; n];
        for rho in &self.rho_samples[period * s..(period + 1) * s] {
            for (p, k) in pops.iter_mut().zip(0..n) {
                *p += rho[(k, k)].re / s as f64;
            }
        }
        pops
    }
}

fn ground_projector(n: usize) -> CMatrix {
    let mut rho = CMatrix::zeros(n, n);
    rho[(0, 0)] = Complex64::new(1.0, 0.0);
    rho
}

fn min_eigenvalue(rho: &CMatrix) -> f64 {
    SymmetricEigen::new(rho.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Relax from the dressed ground state for at least `t_relax`, then sample
/// `n_avg_periods * samples_per_period` equally spaced phases.
///
/// The window starts on a whole number of drive periods so that sample `m`
/// always sits at phase `m * T / samples_per_period`. A window that is not
/// yet stationary is discarded and resampled while the extra integration
/// time stays within `max_extra_relax * max(t_relax, window)`.
pub fn evolve_to_steady(config: &DriveConfig) -> Result<SteadyCycle> {
    config.validate()?;
    let n = config.dim();
    let period = config.period();
    let per = config.samples_per_period;
    let periods = config.n_avg_periods;
    let dt = period / per as f64;
    let window = periods as f64 * period;
    let budget = config.max_extra_relax * config.t_relax.max(window);

    let mut eq = MasterEquation::new(config);
    let mut sys = |t: f64, y: &[f64], dy: &mut [f64]| eq.eval_packed(t, y, dy);

    let rtol = config.integrator_tol;
    let mut control = StepControl::new(rtol, rtol * ATOL_RATIO);
    control.h_max = dt;
    let mut ode = Dopri5::new(control, 0.0, pack_matrix(&ground_projector(n)));
    let mut start = (config.t_relax / period).ceil() * period;
    ode.advance_to(&mut sys, start)?;

    let mut extensions = 0;
    let mut max_trace_error: f64 = 0.0;
    loop {
        let mut rho_samples = Vec::with_capacity(periods * per);
        let mut phase_grid = Vec::with_capacity(periods * per);
        let mut min_eig = f64::INFINITY;
        for m in 0..periods * per {
            let t = start + (m / per) as f64 * period + (m % per) as f64 * dt;
            ode.advance_to(&mut sys, t)?;
            let rho = unpack_matrix(n, ode.y());
            let trace: f64 = (0..n).map(|k| rho[(k, k)].re).sum();
            max_trace_error = max_trace_error.max((trace - 1.0).abs());
            let lowest = min_eigenvalue(&rho);
            if lowest < -POSITIVITY_FATAL {
                return Err(RabiError::Integration(format!(
                    "density matrix eigenvalue {lowest:e} at t = {t}; tighten the tolerance or enlarge the truncation"
                )));
            }
            min_eig = min_eig.min(lowest);
            rho_samples.push(rho);
            phase_grid.push((m % per) as f64 * dt);
        }
        // Close the window on the next period boundary.
        start += window;
        ode.advance_to(&mut sys, start)?;

        let StepStats { accepted, rejected } = ode.stats();
        let mut cycle = SteadyCycle {
            rho_samples,
            phase_grid,
            period,
            samples_per_period: per,
            drive_amp: config.params.drive_amp,
            diagnostics: CycleDiagnostics {
                staleness: 0.0,
                converged: false,
                max_trace_error,
                min_eigenvalue: min_eig,
                accepted_steps: accepted,
                rejected_steps: rejected,
                extensions,
                t_end: start,
            },
        };
        let last = cycle.period_populations(periods - 1);
        let before = cycle.period_populations(periods - 2);
        let staleness = last
            .iter()
            .zip(&before)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        cycle.diagnostics.staleness = staleness;
        cycle.diagnostics.converged = staleness < STALENESS_TOL;
        if cycle.diagnostics.converged || (extensions + 1) as f64 * window > budget {
            return Ok(cycle);
        }
        extensions += 1;
    }
}

/// `(1/M) sum_m tr(rho_m O)` over the cycle.
pub fn period_average(cycle: &SteadyCycle, observable: &CMatrix) -> Result<Complex64> {
    if cycle.rho_samples.is_empty() {
        return Err(RabiError::config("empty steady cycle"));
    }
    let n = cycle.dim();
    if observable.nrows() != n || observable.ncols() != n {
        return Err(RabiError::DimensionMismatch {
            expected: n,
            found_rows: observable.nrows(),
            found_cols: observable.ncols(),
        });
    }
    let mut acc = ZERO;
    for rho in &cycle.rho_samples {
        // tr(rho O) = sum_{ij} rho_ij O_ji
        for i in 0..n {
            for j in 0..n {
                acc += rho[(i, j)] * observable[(j, i)];
            }
        }
    }
    Ok(acc / cycle.rho_samples.len() as f64)
}

/// Real period average of a Hermitian observable.
pub fn period_average_real(cycle: &SteadyCycle, observable: &CMatrix) -> Result<f64> {
    let value = period_average(cycle, observable)?;
    let scale = value.re.abs().max(1.0);
    if value.im.abs() > 1e-8 * scale {
        return Err(RabiError::Diagnostic(format!(
            "average of a Hermitian observable has imaginary part {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// One point of a population trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub populations: Vec<f64>,
}

/// Populations every `dt` from `t = 0` to `t_end`, for debugging relaxation.
pub fn trajectory(config: &DriveConfig, t_end: f64, dt: f64) -> Result<Vec<TrajectoryPoint>> {
    config.validate()?;
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(RabiError::config("trajectory needs dt > 0 and t_end >= 0"));
    }
    let n = config.dim();
    let mut eq = MasterEquation::new(config);
    let mut sys = |t: f64, y: &[f64], dy: &mut [f64]| eq.eval_packed(t, y, dy);
    let rtol = config.integrator_tol;
    let mut control = StepControl::new(rtol, rtol * ATOL_RATIO);
    control.h_max = config.period() / config.samples_per_period as f64;
    let mut ode = Dopri5::new(control, 0.0, pack_matrix(&ground_projector(n)));
    let steps = (t_end / dt).floor() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let t = s as f64 * dt;
        ode.advance_to(&mut sys, t)?;
        out.push(TrajectoryPoint {
            t,
            populations: ode.y()[..n].to_vec(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipator::transition_rates;
    use crate::params::FockTruncation;
    use crate::spectrum::{diagonalize_dressed, Parity};

    fn config_at(params: RabiParams, keep: usize) -> DriveConfig {
        let basis = Arc::new(
            diagonalize_dressed(&params, FockTruncation::for_coupling(params.g)).unwrap(),
        );
        let spec = Arc::new(transition_rates(&basis, params.gamma, params.kappa, keep).unwrap());
        DriveConfig::new(params, spec, IntegrationSettings::default()).unwrap()
    }

    fn hermitian_sample(n: usize, seed: usize) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |r, c| {
            let x = (seed * 31 + r * 7 + c * 13) as f64;
            Complex64::new(x.sin(), x.cos())
        });
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn packing_roundtrip() {
        let rho = hermitian_sample(5, 3);
        let y = pack_matrix(&rho);
        assert_eq!(y.len(), 25);
        assert_eq!(unpack_matrix(5, &y), rho);
    }

    #[test]
    fn undriven_ground_state_is_stationary() {
        let config = config_at(RabiParams::resonant(0.5).with_drive(0.0, 1.0), 8);
        let d = rhs(&ground_projector(8), 0.3, &config).unwrap();
        assert!(d.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn undriven_excited_state_decays_to_ground() {
        let config = config_at(RabiParams::resonant(0.5).with_drive(0.0, 1.0), 8);
        let mut rho = CMatrix::zeros(8, 8);
        rho[(1, 1)] = Complex64::new(1.0, 0.0);
        let d = rhs(&rho, 0.0, &config).unwrap();
        let chi = config.spec.chi((Parity::Plus, 0), (Parity::Minus, 0));
        assert!((d[(0, 0)].re - chi).abs() < 1e-15);
        assert!((d[(1, 1)].re + chi).abs() < 1e-15);
        let rest: f64 = d.iter().map(|c| c.norm()).sum::<f64>() - 2.0 * chi;
        assert!(rest.abs() < 1e-15);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let config = config_at(RabiParams::resonant(0.75).with_drive(1e-3, 0.9), 10);
        for seed in 0..5 {
            let rho = hermitian_sample(10, seed);
            let d = rhs(&rho, 1.7 * seed as f64, &config).unwrap();
            assert!(d.trace().norm() < 1e-12);
            assert!((&d - d.adjoint()).iter().all(|c| c.norm() < 1e-12));
        }
    }

    #[test]
    fn rhs_matches_dense_commutator() {
        let params = RabiParams::resonant(0.6).with_drive(2e-3, 1.3);
        let config = config_at(params, 7);
        let rho = hermitian_sample(7, 11);
        let t = 2.5;
        let mut h = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            7,
            config.energies.iter().map(|e| Complex64::new(*e, 0.0)),
        ));
        h += &config.drive_matrix * Complex64::new(params.drive_amp * (params.drive_freq * t).cos(), 0.0);
        let coherent = (&rho * &h - &h * &rho) * I;
        let dense = coherent + crate::dissipator::apply_dissipator(&config.spec, &rho).unwrap();
        let fast = rhs(&rho, t, &config).unwrap();
        assert!((fast - dense).iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn rejects_bad_dimensions_and_settings() {
        let config = config_at(RabiParams::resonant(0.3), 6);
        assert!(matches!(
            rhs(&CMatrix::zeros(5, 5), 0.0, &config),
            Err(RabiError::DimensionMismatch { .. })
        ));
        let mut short = config.clone();
        short.t_relax = 100.0;
        assert!(short.validate().is_err());
        let mut few = config.clone();
        few.samples_per_period = 16;
        assert!(few.validate().is_err());
        let mut brief = config;
        brief.n_avg_periods = 4;
        assert!(brief.validate().is_err());
    }

    #[test]
    fn closed_system_rejected() {
        let params = RabiParams::resonant(0.3).with_decay(0.0, 0.0);
        let basis = Arc::new(diagonalize_dressed(&params, FockTruncation::new(8).unwrap()).unwrap());
        let spec = Arc::new(transition_rates(&basis, 0.0, 0.0, 4).unwrap());
        assert!(DriveConfig::new(params, spec, IntegrationSettings::default()).is_err());
    }

    #[test]
    fn undriven_cycle_is_ground_projector() {
        let config = config_at(RabiParams::resonant(0.4).with_drive(0.0, 1.0), 6);
        let cycle = evolve_to_steady(&config).unwrap();
        assert_eq!(cycle.rho_samples.len(), 640);
        let ground = ground_projector(6);
        assert!(cycle.rho_samples.iter().all(|r| *r == ground));
        assert!(cycle.diagnostics.converged);
        let avg = period_average_real(&cycle, &ground).unwrap();
        assert_eq!(avg, 1.0);
        let id = CMatrix::identity(6, 6);
        assert_eq!(period_average_real(&cycle, &id).unwrap(), 1.0);
    }

    #[test]
    fn empty_cycle_rejected() {
        let cycle = SteadyCycle {
            rho_samples: vec![],
            phase_grid: vec![],
            period: 1.0,
            samples_per_period: 32,
            drive_amp: 0.0,
            diagnostics: CycleDiagnostics {
                staleness: 0.0,
                converged: true,
                max_trace_error: 0.0,
                min_eigenvalue: 0.0,
                accepted_steps: 0,
                rejected_steps: 0,
                extensions: 0,
                t_end: 0.0,
            },
        };
        assert!(period_average(&cycle, &CMatrix::identity(2, 2)).is_err());
    }
}
