//! Adaptive Dormand-Prince 5(4) integrator for real state vectors.

use crate::error::{RabiError, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus the embedded fourth-order ones.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Right-hand side `dy/dt = f(t, y)` written into the output slice.
pub trait OdeSystem {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F: FnMut(f64, &[f64], &mut [f64])> OdeSystem for F {
    fn eval(&mut self, t: f64, y: &[f64], dy: &mut [f64]) {
        self(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: u64,
}

impl StepControl {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
}

/// Integrator state. `advance_to` lands exactly on the requested time.
pub struct Dopri5 {
    control: StepControl,
    t: f64,
    h: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 7],
    stage: Vec<f64>,
    y_new: Vec<f64>,
    fsal: bool,
    stats: StepStats,
}

impl Dopri5 {
    pub fn new(control: StepControl, t0: f64, y0: Vec<f64>) -> Self {
        let n = y0.len();
        Self {
            h: control.h_init.min(control.h_max),
            control,
            t: t0,
            y: y0,
            k: std::array::from_fn(|_| vec![0.0; n]),
            stage: vec![0.0; n],
            y_new: vec![0.0; n],
            fsal: false,
            stats: StepStats::default(),
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn advance_to<S: OdeSystem>(&mut self, sys: &mut S, t_end: f64) -> Result<()> {
        while self.t < t_end {
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            let err = self.attempt(sys, h);
            if !err.is_finite() {
                return Err(RabiError::Integration(format!(
                    "non-finite error estimate at t = {}",
                    self.t
                )));
            }
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                // A clamped final step says nothing about the natural size.
                if !last || factor < 1.0 {
                    self.h = (h * factor).min(self.control.h_max);
                }
            } else {
                self.stats.rejected += 1;
                self.h = h * factor.min(1.0);
            }
            if self.h < 1e-14 * self.t.abs().max(1.0) {
                return Err(RabiError::Integration(format!(
                    "step size underflow at t = {}",
                    self.t
                )));
            }
            if self.stats.accepted + self.stats.rejected > self.control.max_steps {
                return Err(RabiError::Integration(format!(
                    "exceeded {} steps before t = {t_end}",
                    self.control.max_steps
                )));
            }
        }
        Ok(())
    }

    /// Trial step of size `h`; leaves the candidate in `y_new` and returns the
    /// scaled error norm.
    fn attempt<S: OdeSystem>(&mut self, sys: &mut S, h: f64) -> f64 {
        let t = self.t;
        let n = self.y.len();
        if !self.fsal {
            sys.eval(t, &self.y, &mut self.k[0]);
            self.fsal = true;
        }
        let y = &self.y;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let stage = &mut self.stage;

        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        sys.eval(t + C2 * h, stage, k2);
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.eval(t + C3 * h, stage, k3);
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.eval(t + C4 * h, stage, k4);
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.eval(t + C5 * h, stage, k5);
        for i in 0..n {
            stage[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.eval(t + h, stage, k6);
        let y_new = &mut self.y_new;
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.eval(t + h, y_new, k7);

        let mut acc = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.control.atol + self.control.rtol * y[i].abs().max(y_new[i].abs());
            acc += (e / scale).powi(2);
        }
        if n == 0 {
            0.0
        } else {
            (acc / n as f64).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut sys = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0];
        let mut ode = Dopri5::new(StepControl::new(1e-10, 1e-12), 0.0, vec![1.0]);
        ode.advance_to(&mut sys, 3.0).unwrap();
        assert_eq!(ode.t(), 3.0);
        assert!((ode.y()[0] - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_lands_on_sample_times() {
        let mut sys = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let mut ode = Dopri5::new(StepControl::new(1e-10, 1e-12), 0.0, vec![1.0, 0.0]);
        for m in 1..=40 {
            let t = 0.25 * m as f64;
            ode.advance_to(&mut sys, t).unwrap();
            assert_eq!(ode.t(), t);
            assert!((ode.y()[0] - t.cos()).abs() < 1e-8);
        }
        assert!(ode.stats().accepted > 40);
    }

    #[test]
    fn forced_oscillation_tracks_closed_form() {
        // y' = cos(w t), y(0) = 0.
        let w = 3.0;
        let mut sys = move |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = (w * t).cos();
        let mut ode = Dopri5::new(StepControl::new(1e-9, 1e-12), 0.0, vec![0.0]);
        ode.advance_to(&mut sys, 10.0).unwrap();
        assert!((ode.y()[0] - (w * 10.0).sin() / w).abs() < 1e-8);
    }

    #[test]
    fn step_budget_is_enforced() {
        let mut sys = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0];
        let mut control = StepControl::new(1e-12, 1e-14);
        control.max_steps = 10;
        let mut ode = Dopri5::new(control, 0.0, vec![1.0]);
        assert!(matches!(ode.advance_to(&mut sys, 100.0), Err(RabiError::Integration(_))));
    }
}
