//! Dormand-Prince 5(4) integration of the model with PI step control and
//! dense output sampled on a fixed stride.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rhs_array, CellState, ModelParameters, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub rel_tol: f64,
    /// Absolute tolerance in cells/kg.
    pub abs_tol: f64,
    /// Final time (days).
    pub t_end: f64,
    pub max_step: f64,
    /// First trial step; zero selects one automatically.
    pub initial_step: f64,
    /// Spacing of stored samples (days).
    pub output_stride: f64,
    pub max_steps: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-6,
            t_end: 2000.0,
            max_step: 10.0,
            initial_step: 0.0,
            output_stride: 0.25,
            max_steps: 10_000_000,
        }
    }
}

impl IntegrationConfig {
    pub fn with_t_end(self, t_end: f64) -> Self {
        Self { t_end, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        if !(self.rel_tol >= 1e-12 && self.rel_tol <= 1e-3) {
            return bad("rel_tol", self.rel_tol, "must lie in [1e-12, 1e-3]");
        }
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return bad("abs_tol", self.abs_tol, "must be positive");
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad("t_end", self.t_end, "must be positive");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step", self.max_step, "must be positive");
        }
        if !(self.initial_step >= 0.0) {
            return bad("initial_step", self.initial_step, "must be non-negative");
        }
        if !(self.output_stride > 0.0) || !self.output_stride.is_finite() {
            return bad("output_stride", self.output_stride, "must be positive");
        }
        Ok(())
    }
}

/// States sampled at increasing times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CellState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, CellState)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    /// Samples with `t >= t_from`.
    pub fn tail_from(&self, t_from: f64) -> Trajectory {
        let start = self.times.partition_point(|&t| t < t_from);
        Trajectory {
            times: self.times[start..].to_vec(),
            states: self.states[start..].to_vec(),
        }
    }

    pub fn u3(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.u3).collect()
    }
}

// Dormand-Prince 5(4) tableau. The model is autonomous, so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th and 4th order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;
/// Undershoots below `-abs_tol * UNDERSHOOT_BAND` reject the step.
const UNDERSHOOT_BAND: f64 = 1e-3;

fn stage(y: &Vec3, h: f64, row: &[f64; 6], k: &[Vec3; 7]) -> Vec3 {
    let mut out = *y;
    for (w, kj) in row.iter().zip(k) {
        if *w != 0.0 {
            for i in 0..3 {
                out[i] += h * w * kj[i];
            }
        }
    }
    out
}

fn error_norm(err: &Vec3, y0: &Vec3, y1: &Vec3, cfg: &IntegrationConfig) -> f64 {
    let mut sum = 0.0;
    for i in 0..3 {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        sum += (err[i] / sc).powi(2);
    }
    (sum / 3.0).sqrt()
}

/// Starting step from the local scale of the solution and its derivative.
fn initial_step(p: &ModelParameters, y0: &Vec3, f0: &Vec3, cfg: &IntegrationConfig) -> f64 {
    let scaled = |v: &Vec3| {
        let mut s = 0.0;
        for i in 0..3 {
            let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
            s += (v[i] / sc).powi(2);
        }
        (s / 3.0).sqrt()
    };
    let (dn0, dn1) = (scaled(y0), scaled(f0));
    let h0 = if dn0 < 1e-5 || dn1 < 1e-5 { 1e-6 } else { 0.01 * dn0 / dn1 };
    let h0 = h0.min(cfg.max_step).min(cfg.t_end);
    let y1 = [y0[0] + h0 * f0[0], y0[1] + h0 * f0[1], y0[2] + h0 * f0[2]];
    let f1 = rhs_array(p, &y1);
    let df = [f1[0] - f0[0], f1[1] - f0[1], f1[2] - f0[2]];
    let d2 = scaled(&df) / h0;
    let h1 = if dn1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dn1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cfg.max_step).min(cfg.t_end)
}

fn finite(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Integrates the model from `t = 0` to `config.t_end`.
///
/// Samples are emitted at multiples of `output_stride` (plus `t_end`) by
/// evaluating the continuous extension of each accepted step. Negative
/// components within a small band below zero are discretisation noise and
/// are clamped; a step that undershoots further is rejected and retried
/// with a smaller step.
pub fn integrate(params: &ModelParameters, initial: &CellState, config: &IntegrationConfig) -> Result<Trajectory> {
    params.validate()?;
    config.validate()?;
    if !initial.is_nonnegative() || !initial.is_finite() {
        return Err(Error::InvalidState(format!("initial state must be finite and non-negative, got {initial:?}")));
    }
    let cfg = config;
    let band = -cfg.abs_tol * UNDERSHOOT_BAND;
    let n_samples = (cfg.t_end / cfg.output_stride).floor() as usize;
    let sample_time = |i: usize| -> f64 {
        if i <= n_samples {
            (i as f64 * cfg.output_stride).min(cfg.t_end)
        } else {
            cfg.t_end
        }
    };
    let last_sample = if sample_time(n_samples) < cfg.t_end { n_samples + 1 } else { n_samples };

    let mut traj = Trajectory {
        times: Vec::with_capacity(last_sample + 1),
        states: Vec::with_capacity(last_sample + 1),
    };
    let mut y = initial.to_array();
    let mut t = 0.0;
    traj.times.push(0.0);
    traj.states.push(*initial);
    let mut next = 1;

    let mut k: [Vec3; 7] = [[0.0; 3]; 7];
    k[0] = rhs_array(params, &y);
    if !finite(&k[0]) {
        return Err(Error::NonFinite { t, last: *initial });
    }
    let mut h = if cfg.initial_step > 0.0 {
        cfg.initial_step.min(cfg.max_step)
    } else {
        initial_step(params, &y, &k[0], cfg)
    };
    let h_min = 1e-14 * cfg.t_end;
    let mut err_old: f64 = 1e-4;
    let mut steps = 0usize;
    let mut rejected_last = false;

    while next <= last_sample {
        if steps >= cfg.max_steps {
            return Err(Error::TooManySteps { t, max_steps: cfg.max_steps, last: CellState::from_array(y) });
        }
        if h < h_min {
            return Err(Error::StepSizeUnderflow { t, h, last: CellState::from_array(y) });
        }
        // Stretch the last step to land on t_end instead of leaving a sliver.
        let remaining = cfg.t_end - t;
        if !(remaining > 0.0) {
            break;
        }
        let last_step = h >= 0.99 * remaining;
        let h_step = if last_step { remaining } else { h };
        steps += 1;

        for s in 1..7 {
            let ys = stage(&y, h_step, &A[s], &k);
            k[s] = rhs_array(params, &ys);
        }
        // The seventh stage is evaluated at the 5th order solution (FSAL).
        let y_new = stage(&y, h_step, &A[6], &k);
        if !finite(&y_new) || !finite(&k[6]) {
            h = h_step * 0.25;
            rejected_last = true;
            if !(h >= h_min) {
                return Err(Error::NonFinite { t, last: CellState::from_array(y) });
            }
            continue;
        }
        let err_vec = {
            let mut e = [0.0; 3];
            for (w, kj) in E.iter().zip(k.iter()) {
                for i in 0..3 {
                    e[i] += h_step * w * kj[i];
                }
            }
            e
        };
        let err = error_norm(&err_vec, &y, &y_new, cfg);
        let undershoot = y_new.iter().any(|&x| x < band);

        if err <= 1.0 && !undershoot {
            // dense output coefficients on [t, t + h_step]
            let ydiff = [y_new[0] - y[0], y_new[1] - y[1], y_new[2] - y[2]];
            let mut cont = [[0.0; 3]; 5];
            for i in 0..3 {
                let bspl = h_step * k[0][i] - ydiff[i];
                cont[0][i] = y[i];
                cont[1][i] = ydiff[i];
                cont[2][i] = bspl;
                cont[3][i] = ydiff[i] - h_step * k[6][i] - bspl;
                cont[4][i] = h_step * D.iter().zip(k.iter()).map(|(d, kj)| d * kj[i]).sum::<f64>();
            }
            let t_new = if last_step { cfg.t_end } else { t + h_step };
            while next <= last_sample && sample_time(next) <= t_new {
                let ts = sample_time(next);
                let theta = ((ts - t) / h_step).clamp(0.0, 1.0);
                let th1 = 1.0 - theta;
                let mut ys = [0.0; 3];
                for i in 0..3 {
                    let v = cont[0][i]
                        + theta * (cont[1][i] + th1 * (cont[2][i] + theta * (cont[3][i] + th1 * cont[4][i])));
                    ys[i] = v.max(0.0);
                }
                traj.times.push(ts);
                traj.states.push(CellState::from_array(ys));
                next += 1;
            }

            t = t_new;
            y = y_new.map(|x| x.max(0.0));
            // FSAL: k7 is the derivative at the new point unless clamping moved it.
            k[0] = if y == y_new { k[6] } else { rhs_array(params, &y) };

            let err_c = err.max(1e-10);
            let mut fac = err_c.powf(0.2 - 0.75 * PI_BETA) * err_old.powf(-PI_BETA) / SAFETY;
            fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h_step / fac;
            if rejected_last {
                h_new = h_new.min(h_step);
            }
            err_old = err.max(1e-4);
            h = h_new.min(cfg.max_step);
            rejected_last = false;
        } else {
            let shrink = if undershoot {
                0.5
            } else {
                (1.0 / (err.powf(0.2) / SAFETY).min(1.0 / FAC_MIN)).min(1.0)
            };
            h = h_step * shrink;
            rejected_last = true;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::steady_state_e2;
    use crate::presets;

    #[test]
    fn zero_state_stays_zero() {
        let traj = integrate(&presets::reference(), &CellState::ZERO, &IntegrationConfig::default().with_t_end(50.0)).unwrap();
        assert!(traj.states.iter().all(|s| *s == CellState::ZERO));
        assert_eq!(traj.times.len(), 201);
    }

    #[test]
    fn sample_times_are_strictly_increasing_and_end_at_t_end() {
        let cfg = IntegrationConfig { t_end: 10.1, output_stride: 0.5, ..Default::default() };
        let traj = integrate(&presets::fig3(0.5), &presets::FIG3_INITIAL_A, &cfg).unwrap();
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*traj.times.last().unwrap(), 10.1);
        assert_eq!(traj.times.len(), 22);
    }

    #[test]
    fn decays_to_origin_when_self_renewal_is_low() {
        let p = ModelParameters::basic(0.4, 0.3, 1.0, 0.5, 0.5, 1e-9).unwrap();
        let init = CellState::new(1e6, 1e6, 1e6);
        let traj = integrate(&p, &init, &IntegrationConfig::default().with_t_end(200.0)).unwrap();
        let (_, last) = traj.last().unwrap();
        assert!(last.norm() < 1e-6 * init.norm());
        assert!(traj.states.iter().all(CellState::is_nonnegative));
    }

    #[test]
    fn fig3a_converges_to_e2() {
        let p = presets::fig3(0.5);
        let e2 = steady_state_e2(&p).unwrap().state;
        let traj = integrate(&p, &presets::FIG3_INITIAL_A, &IntegrationConfig::default().with_t_end(2000.0)).unwrap();
        let (_, last) = traj.last().unwrap();
        assert!(last.distance(&e2) < 1e-3 * e2.norm());
    }

    #[test]
    fn tolerance_halving_changes_little() {
        let p = presets::fig3(0.3);
        let base = IntegrationConfig { rel_tol: 1e-6, abs_tol: 1e-2, t_end: 200.0, ..Default::default() };
        let fine = IntegrationConfig { rel_tol: 5e-7, abs_tol: 5e-3, ..base };
        let a = integrate(&p, &presets::FIG3_INITIAL_B[0], &base).unwrap().last().unwrap().1;
        let b = integrate(&p, &presets::FIG3_INITIAL_B[0], &fine).unwrap().last().unwrap().1;
        assert!(a.distance(&b) < 1e-6 * 200.0 * a.norm() / 10.0, "{a:?} vs {b:?}");
    }

    #[test]
    fn last_sample_lands_on_t_end_despite_rounding() {
        for i in 1..200 {
            let p1 = 0.05 + i as f64 * 0.0047;
            let cfg = IntegrationConfig { t_end: 20.0 / p1, output_stride: 0.5 / p1, ..Default::default() };
            let traj = integrate(&presets::fig3(0.5), &presets::FIG3_INITIAL_A, &cfg).unwrap();
            assert_eq!(*traj.times.last().unwrap(), cfg.t_end);
            assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn rejects_bad_config() {
        let p = presets::fig3(0.5);
        let s = presets::FIG3_INITIAL_A;
        for cfg in [
            IntegrationConfig { rel_tol: 1e-2, ..Default::default() },
            IntegrationConfig { abs_tol: 0.0, ..Default::default() },
            IntegrationConfig { t_end: -1.0, ..Default::default() },
            IntegrationConfig { output_stride: 0.0, ..Default::default() },
        ] {
            assert!(integrate(&p, &s, &cfg).is_err());
        }
        assert!(integrate(&p, &CellState::new(-1.0, 1.0, 1.0), &IntegrationConfig::default()).is_err());
    }

    #[test]
    fn step_budget_is_enforced() {
        let cfg = IntegrationConfig { max_steps: 5, ..Default::default() };
        let err = integrate(&presets::fig3(0.3), &presets::FIG3_INITIAL_A, &cfg).unwrap_err();
        assert!(matches!(err, Error::TooManySteps { .. }));
        assert!(err.is_numerical());
    }
}
