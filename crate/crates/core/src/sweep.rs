//! Parameter sweeps: phase-diagram grids, resonance-tracked cuts, frequency
//! scans and purely spectral tables.
//!
//! Grid points are independent. With the `parallel` feature they are
//! evaluated on a rayon pool; rows are always returned in grid order, so
//! serial and parallel runs produce identical tables.

use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

use crate::dissipator::{transition_rates, ChannelRow, DEFAULT_LEVELS_KEPT};
use crate::dynamics::{evolve_to_steady, CycleDiagnostics, DriveConfig, IntegrationSettings};
use crate::error::{RabiError, Result};
use crate::observables::{build_xplus, emission_stats, EmissionStats};
use crate::params::{FockTruncation, RabiParams};
use crate::spectrum::{anharmonicity, diagonalize_dressed, DressedBasis, Parity, SpectrumRow};

/// Relative change of `i_out` and `g2(0)` accepted between refinements.
pub const REFINE_TOL: f64 = 1e-3;
pub const MAX_REFINEMENTS: usize = 6;
pub const FOCK_STEP: usize = 8;
pub const LEVEL_STEP: usize = 4;

/// Which drive line a resonance-tracked cut follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transition {
    /// `|Psi_0^+> -> |Psi_0^->`.
    First,
    /// `|Psi_0^+> -> |Psi_1^->`.
    Second,
}

/// Drive frequency resonant with the chosen transition at coupling `g`.
pub fn track_resonance(
    params: &RabiParams,
    trunc: FockTruncation,
    g: f64,
    which: Transition,
) -> Result<f64> {
    let basis = diagonalize_dressed(&params.with_g(g), trunc)?;
    resonance_of(&basis, which)
}

fn resonance_of(basis: &DressedBasis, which: Transition) -> Result<f64> {
    let j = match which {
        Transition::First => 0,
        Transition::Second => 1,
    };
    Ok(basis.energy(Parity::Minus, j)? - basis.energy(Parity::Plus, 0)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SweepMode {
    Grid { g: Vec<f64>, omega_d: Vec<f64> },
    CutSecondTransition { g: Vec<f64> },
    CutFirstTransition { g: Vec<f64> },
    FreqScan { g: f64, omega_d: Vec<f64> },
    RatesVsG { g: Vec<f64> },
    AnharmonicityVsG { g: Vec<f64> },
    SpectrumVsG { g: Vec<f64> },
}

impl SweepMode {
    pub fn cut(which: Transition, g: Vec<f64>) -> Self {
        match which {
            Transition::First => SweepMode::CutFirstTransition { g },
            Transition::Second => SweepMode::CutSecondTransition { g },
        }
    }

    fn is_emission(&self) -> bool {
        matches!(
            self,
            SweepMode::Grid { .. }
                | SweepMode::CutSecondTransition { .. }
                | SweepMode::CutFirstTransition { .. }
                | SweepMode::FreqScan { .. }
        )
    }
}

/// Truncation, level count and integration controls of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericalControls {
    /// `None` picks `ceil(20 + 4 g^2)` at each point.
    pub n_fock: Option<usize>,
    pub n_levels: usize,
    pub integration: IntegrationSettings,
    pub auto_converge: bool,
}

impl Default for NumericalControls {
    fn default() -> Self {
        Self {
            n_fock: None,
            n_levels: DEFAULT_LEVELS_KEPT,
            integration: IntegrationSettings::default(),
            auto_converge: false,
        }
    }
}

impl NumericalControls {
    pub fn truncation_for(&self, g: f64) -> Result<FockTruncation> {
        match self.n_fock {
            Some(n) => FockTruncation::new(n),
            None => Ok(FockTruncation::for_coupling(g)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub mode: SweepMode,
    /// Template for every point; `g` and `drive_freq` are overwritten per point.
    pub params: RabiParams,
    pub controls: NumericalControls,
}

fn strictly_increasing(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(RabiError::config(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(RabiError::config(format!("{name} axis has non-finite values")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RabiError::config(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let g_axis: &[f64] = match &self.mode {
            SweepMode::Grid { g, omega_d } => {
                strictly_increasing("omega_d", omega_d)?;
                if omega_d[0] <= 0.0 {
                    return Err(RabiError::config("drive frequencies must be positive"));
                }
                g
            }
            SweepMode::FreqScan { g, omega_d } => {
                strictly_increasing("omega_d", omega_d)?;
                if omega_d[0] <= 0.0 {
                    return Err(RabiError::config("drive frequencies must be positive"));
                }
                std::slice::from_ref(g)
            }
            SweepMode::CutSecondTransition { g }
            | SweepMode::CutFirstTransition { g }
            | SweepMode::RatesVsG { g }
            | SweepMode::AnharmonicityVsG { g }
            | SweepMode::SpectrumVsG { g } => g,
        };
        strictly_increasing("g", g_axis)?;
        if g_axis[0] < 0.0 {
            return Err(RabiError::config("coupling values must be nonnegative"));
        }
        if let Some(n) = self.controls.n_fock {
            FockTruncation::new(n)?;
        }
        if self.mode.is_emission() {
            if !(self.params.gamma > 0.0) {
                return Err(RabiError::config(
                    "cavity decay rate must be positive: a closed cavity has no steady emission",
                ));
            }
            if self.controls.n_levels < 2 {
                return Err(RabiError::config("at least two dressed levels must be kept"));
            }
        }
        Ok(())
    }

    /// `(g, omega_d)` of every emission point in output order; `None` marks a
    /// resonance tracked at evaluation time.
    fn emission_points(&self) -> Vec<(f64, DriveChoice)> {
        match &self.mode {
            SweepMode::Grid { g, omega_d } => g
                .iter()
                .flat_map(|&gv| omega_d.iter().map(move |&w| (gv, DriveChoice::Fixed(w))))
                .collect(),
            SweepMode::FreqScan { g, omega_d } => {
                omega_d.iter().map(|&w| (*g, DriveChoice::Fixed(w))).collect()
            }
            SweepMode::CutFirstTransition { g } => g
                .iter()
                .map(|&gv| (gv, DriveChoice::Tracked(Transition::First)))
                .collect(),
            SweepMode::CutSecondTransition { g } => g
                .iter()
                .map(|&gv| (gv, DriveChoice::Tracked(Transition::Second)))
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DriveChoice {
    Fixed(f64),
    Tracked(Transition),
}

/// One row of an emission table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub g: f64,
    pub omega_d: Option<f64>,
    pub i_out: Option<f64>,
    pub g2: Option<f64>,
    pub converged: bool,
    pub n_fock: usize,
    pub n_levels: usize,
    pub refinements: usize,
    pub wall_ms: u64,
    pub error: Option<String>,
}

impl SweepRow {
    /// Equality ignoring wall time.
    pub fn same_result(&self, other: &Self) -> bool {
        Self {
            wall_ms: 0,
            ..self.clone()
        } == Self {
            wall_ms: 0,
            ..other.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnharmonicityRow {
    pub g: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutput {
    Emission(SweepResult),
    Spectrum(Vec<SpectrumRow>),
    Rates(Vec<ChannelRow>),
    Anharmonicity(Vec<AnharmonicityRow>),
}

/// Full outcome of evaluating one parameter point.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub stats: EmissionStats,
    pub diagnostics: CycleDiagnostics,
    pub omega_d: f64,
    pub n_fock: usize,
    pub n_levels: usize,
}

/// spectrum -> dissipator -> dynamics -> observables at fixed controls.
///
/// `drive` overrides `params.drive_freq` with a tracked resonance when set.
pub fn evaluate_point(
    params: &RabiParams,
    trunc: FockTruncation,
    n_levels: usize,
    settings: IntegrationSettings,
    track: Option<Transition>,
) -> Result<PointOutcome> {
    let basis = Arc::new(diagonalize_dressed(params, trunc)?);
    let omega_d = match track {
        Some(which) => resonance_of(&basis, which)?,
        None => params.drive_freq,
    };
    let params = params.with_drive(params.drive_amp, omega_d);
    let spec = Arc::new(transition_rates(&basis, params.gamma, params.kappa, n_levels)?);
    let config = DriveConfig::new(params, spec, settings)?;
    let cycle = evolve_to_steady(&config)?;
    let out = build_xplus(&basis, n_levels)?;
    Ok(PointOutcome {
        stats: emission_stats(&cycle, &out)?,
        diagnostics: cycle.diagnostics,
        omega_d,
        n_fock: trunc.n_fock(),
        n_levels,
    })
}

/// Result of [`auto_converge`]: the settled controls and the outcome there.
#[derive(Debug, Clone)]
pub struct Converged {
    pub outcome: PointOutcome,
    pub refinements: usize,
    pub converged: bool,
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn agrees(a: &EmissionStats, b: &EmissionStats) -> bool {
    let g2_ok = match (a.g2_zero, b.g2_zero) {
        (Some(x), Some(y)) => relative_change(x, y) < REFINE_TOL,
        (None, None) => true,
        _ => false,
    };
    g2_ok && relative_change(a.i_out, b.i_out) < REFINE_TOL
}

/// Grow `n_fock` by 8 and the kept levels by 4 until `i_out` and `g2(0)`
/// settle to a relative change below `1e-3`.
///
/// The returned controls are the coarser member of the first agreeing pair;
/// `refinements` counts how many enlargements that member needed.
pub fn auto_converge(
    params: &RabiParams,
    controls: &NumericalControls,
    track: Option<Transition>,
) -> Result<Converged> {
    params.validate()?;
    if !(params.gamma > 0.0) {
        return Err(RabiError::config(
            "cavity decay rate must be positive: a closed cavity has no steady emission",
        ));
    }
    let start = controls.truncation_for(params.g)?;
    let at_level = |level: usize| {
        let trunc = FockTruncation::new(start.n_fock() + FOCK_STEP * level)?;
        let n_levels = (controls.n_levels + LEVEL_STEP * level).min(trunc.dim());
        evaluate_point(params, trunc, n_levels, controls.integration, track)
    };
    let mut current = at_level(0)?;
    for level in 0..MAX_REFINEMENTS {
        let next = at_level(level + 1)?;
        if agrees(&current.stats, &next.stats) {
            return Ok(Converged {
                outcome: current,
                refinements: level,
                converged: true,
            });
        }
        current = next;
    }
    Ok(Converged {
        outcome: current,
        refinements: MAX_REFINEMENTS,
        converged: false,
    })
}

fn emission_row(spec: &SweepSpec, g: f64, drive: DriveChoice) -> SweepRow {
    let clock = Instant::now();
    let (params, track) = match drive {
        DriveChoice::Fixed(w) => (spec.params.with_g(g).with_drive(spec.params.drive_amp, w), None),
        DriveChoice::Tracked(which) => (spec.params.with_g(g), Some(which)),
    };
    let controls = &spec.controls;
    let result = if controls.auto_converge {
        auto_converge(&params, controls, track).map(|c| (c.outcome, c.refinements, c.converged))
    } else {
        controls.truncation_for(g).and_then(|trunc| {
            evaluate_point(&params, trunc, controls.n_levels, controls.integration, track)
                .map(|o| (o, 0, true))
        })
    };
    let fallback_fock = controls
        .truncation_for(g)
        .map(|t| t.n_fock())
        .unwrap_or_default();
    let mut row = match result {
        Ok((outcome, refinements, settled)) => SweepRow {
            g,
            omega_d: Some(outcome.omega_d),
            i_out: Some(outcome.stats.i_out),
            g2: outcome.stats.g2_zero,
            converged: settled && outcome.diagnostics.converged,
            n_fock: outcome.n_fock,
            n_levels: outcome.n_levels,
            refinements,
            wall_ms: 0,
            error: None,
        },
        Err(e) => SweepRow {
            g,
            omega_d: match drive {
                DriveChoice::Fixed(w) => Some(w),
                DriveChoice::Tracked(_) => None,
            },
            i_out: None,
            g2: None,
            converged: false,
            n_fock: fallback_fock,
            n_levels: controls.n_levels,
            refinements: 0,
            wall_ms: 0,
            error: Some(e.to_string()),
        },
    };
    row.wall_ms = clock.elapsed().as_millis() as u64;
    row
}

/// How grid points are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    /// Rayon pool; `None` uses the global pool. Runs serially when the
    /// `parallel` feature is disabled.
    #[default]
    Parallel,
    ParallelThreads(usize),
}

fn map_points<T, R, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        Execution::Serial => Ok(items.iter().map(f).collect()),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            Ok(items.par_iter().map(f).collect())
        }
        #[cfg(feature = "parallel")]
        Execution::ParallelThreads(threads) => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| RabiError::config(format!("thread pool: {e}")))?;
            Ok(pool.install(|| items.par_iter().map(f).collect()))
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel | Execution::ParallelThreads(_) => Ok(items.iter().map(f).collect()),
    }
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    run_sweep_with(spec, Execution::default())
}

pub fn run_sweep_with(spec: &SweepSpec, exec: Execution) -> Result<SweepOutput> {
    spec.validate()?;
    let controls = &spec.controls;
    match &spec.mode {
        SweepMode::SpectrumVsG { g } => {
            let tables = map_points(g, exec, |&gv| -> Result<Vec<SpectrumRow>> {
                let basis = diagonalize_dressed(&spec.params.with_g(gv), controls.truncation_for(gv)?)?;
                Ok(basis.spectrum_rows())
            })?;
            Ok(SweepOutput::Spectrum(flatten(tables)?))
        }
        SweepMode::RatesVsG { g } => {
            let tables = map_points(g, exec, |&gv| -> Result<Vec<ChannelRow>> {
                let basis = Arc::new(diagonalize_dressed(
                    &spec.params.with_g(gv),
                    controls.truncation_for(gv)?,
                )?);
                let keep = controls.n_levels.min(basis.len());
                let rates = transition_rates(&basis, spec.params.gamma, spec.params.kappa, keep)?;
                Ok(rates.channel_rows())
            })?;
            Ok(SweepOutput::Rates(flatten(tables)?))
        }
        SweepMode::AnharmonicityVsG { g } => {
            let rows = map_points(g, exec, |&gv| -> Result<AnharmonicityRow> {
                let basis = diagonalize_dressed(&spec.params.with_g(gv), controls.truncation_for(gv)?)?;
                Ok(AnharmonicityRow {
                    g: gv,
                    eta: anharmonicity(&basis)?,
                })
            })?;
            Ok(SweepOutput::Anharmonicity(rows.into_iter().collect::<Result<_>>()?))
        }
        _ => {
            let points = spec.emission_points();
            let rows = map_points(&points, exec, |&(g, drive)| emission_row(spec, g, drive))?;
            Ok(SweepOutput::Emission(SweepResult { rows }))
        }
    }
}

fn flatten<R>(tables: Vec<Result<Vec<R>>>) -> Result<Vec<R>> {
    let mut out = Vec::new();
    for t in tables {
        out.extend(t?);
    }
    Ok(out)
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_first_line_is_atomic() {
        let w = track_resonance(&RabiParams::resonant(0.0), FockTruncation::new(10).unwrap(), 0.0, Transition::First)
            .unwrap();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deep_strong_first_line_collapses() {
        let w = track_resonance(&RabiParams::default(), FockTruncation::for_coupling(3.0), 3.0, Transition::First)
            .unwrap();
        assert!(w > 0.0 && w < 1e-3);
    }

    #[test]
    fn validation_rules() {
        let mut spec = SweepSpec {
            mode: SweepMode::CutSecondTransition { g: vec![0.2, 0.1] },
            params: RabiParams::default(),
            controls: NumericalControls::default(),
        };
        assert!(spec.validate().is_err());
        spec.mode = SweepMode::CutSecondTransition { g: vec![-0.1, 0.1] };
        assert!(spec.validate().is_err());
        spec.mode = SweepMode::Grid {
            g: vec![0.1, 0.2],
            omega_d: vec![1.0, 1.0],
        };
        assert!(spec.validate().is_err());
        spec.mode = SweepMode::CutSecondTransition { g: vec![0.1, 0.2] };
        assert!(spec.validate().is_ok());
        spec.params.gamma = 0.0;
        assert!(matches!(spec.validate(), Err(RabiError::Config(_))));
        // Spectral tables do not need dissipation.
        spec.mode = SweepMode::SpectrumVsG { g: vec![0.1] };
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn closed_cavity_rejected_before_refining() {
        let params = RabiParams::resonant(0.3).with_decay(0.0, 1e-2);
        let err = auto_converge(&params, &NumericalControls::default(), Some(Transition::Second));
        assert!(matches!(err, Err(RabiError::Config(_))));
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.3, 0.55, 11);
        assert_eq!(v.len(), 11);
        assert_eq!(v[0], 0.3);
        assert!((v[10] - 0.55).abs() < 1e-15);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }

    #[test]
    fn spectral_modes_produce_tables() {
        let spec = SweepSpec {
            mode: SweepMode::AnharmonicityVsG { g: vec![0.1, 0.5] },
            params: RabiParams::default(),
            controls: NumericalControls::default(),
        };
        match run_sweep_with(&spec, Execution::Serial).unwrap() {
            SweepOutput::Anharmonicity(rows) => {
                assert_eq!(rows.len(), 2);
                assert_eq!(rows[1].g, 0.5);
            }
            other => panic!("unexpected output {other:?}"),
        }
    }
}
