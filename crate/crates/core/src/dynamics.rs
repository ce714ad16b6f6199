//! Long-run behaviour of simulated trajectories: convergence to a steady
//! state, a sustained oscillation, or neither.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegrationConfig, Trajectory};
use crate::model::{rhs, steady_state_e2, steady_states, CellState, EquilibriumLabel, ModelParameters};
use crate::stability::{eigenvalues_at, hopf_point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttractorKind {
    Equilibrium { label: EquilibriumLabel },
    LimitCycle,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorVerdict {
    pub kind: AttractorKind,
    /// Days; set for limit cycles.
    pub period: Option<f64>,
    /// Mean peak minus mean trough of `u3`; set for limit cycles.
    pub amplitude_u3: Option<f64>,
    /// Distance from the last sample to the nearest steady state, relative
    /// to that steady state's norm (or the initial norm for the origin).
    pub final_distance: f64,
    pub final_state: CellState,
}

impl AttractorVerdict {
    pub fn is_limit_cycle(&self) -> bool {
        self.kind == AttractorKind::LimitCycle
    }

    pub fn equilibrium(&self) -> Option<EquilibriumLabel> {
        match self.kind {
            AttractorKind::Equilibrium { label } => Some(label),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Leading fraction of the horizon discarded as transient.
    pub transient_fraction: f64,
    /// Relative distance below which a trajectory counts as converged.
    pub equilibrium_tol: f64,
    /// An equilibrium verdict also needs `|rhs(final)|` below this times
    /// the equilibrium's scale (per day).
    pub residual_tol: f64,
    /// Times the integration may be continued while a converging
    /// trajectory has not yet met `residual_tol`.
    pub max_extensions: usize,
    /// Relative spread allowed between trailing periods and peak heights.
    pub agreement_tol: f64,
    /// Number of trailing inter-peak intervals compared.
    pub intervals: usize,
    /// Samples per horizon when the integration stride is derived.
    pub samples: usize,
    pub integration: IntegrationConfig,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            transient_fraction: 0.5,
            equilibrium_tol: 1e-3,
            residual_tol: 1e-6,
            max_extensions: 8,
            agreement_tol: 0.02,
            intervals: 5,
            samples: 100_000,
            integration: IntegrationConfig::default(),
        }
    }
}

/// Horizon in days long enough for 40 oscillation periods and at least
/// 2000 rescaled time units.
///
/// The period estimate is the Hopf period for the basic model when a Hopf
/// point exists, otherwise the rotation period of the complex eigenvalues
/// at E2.
pub fn default_horizon(params: &ModelParameters) -> f64 {
    let floor = 2000.0 / params.p1;
    let omega = if params.is_basic() {
        hopf_point(params.a1, params.a2, params.d3, params.p1).ok().map(|h| h.omega)
    } else {
        None
    };
    let omega = omega.or_else(|| {
        let e2 = steady_state_e2(params)?;
        let im = eigenvalues_at(params, &e2).iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        (im > 0.0).then_some(im)
    });
    match omega {
        Some(w) => floor.max(40.0 * 2.0 * std::f64::consts::PI / w),
        None => floor,
    }
}

/// Classifies the attractor reached from `initial` within `horizon` days.
pub fn classify(params: &ModelParameters, initial: &CellState, horizon: f64) -> Result<AttractorVerdict> {
    classify_with(params, initial, horizon, &ClassifyConfig::default())
}

pub fn classify_with(
    params: &ModelParameters,
    initial: &CellState,
    horizon: f64,
    config: &ClassifyConfig,
) -> Result<AttractorVerdict> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter { name: "horizon", value: horizon, reason: "must be positive" });
    }
    if !(config.transient_fraction >= 0.0 && config.transient_fraction < 1.0) {
        return Err(Error::InvalidParameter {
            name: "transient_fraction",
            value: config.transient_fraction,
            reason: "must lie in [0, 1)",
        });
    }
    let stride = config.integration.output_stride.min(horizon / config.samples.max(1) as f64);
    let icfg = IntegrationConfig { t_end: horizon, output_stride: stride, ..config.integration };
    let traj = integrate(params, initial, &icfg)?;
    let (mut verdict, mut settling) = assess(params, initial, &traj, config);

    // Slowly converging orbits: keep integrating from the last state.
    let tail = IntegrationConfig { t_end: horizon * (1.0 - config.transient_fraction), ..icfg };
    let whole = ClassifyConfig { transient_fraction: 0.0, ..*config };
    let mut extensions = 0;
    while settling && extensions < config.max_extensions {
        let traj = integrate(params, &verdict.final_state, &tail)?;
        (verdict, settling) = assess(params, initial, &traj, &whole);
        extensions += 1;
    }
    Ok(verdict)
}

/// Classifies an already computed trajectory starting at `initial`.
pub fn classify_trajectory(
    params: &ModelParameters,
    initial: &CellState,
    traj: &Trajectory,
    config: &ClassifyConfig,
) -> AttractorVerdict {
    assess(params, initial, traj, config).0
}

/// The verdict, and whether the trajectory sits near an equilibrium
/// without yet meeting the residual requirement.
fn assess(
    params: &ModelParameters,
    initial: &CellState,
    traj: &Trajectory,
    config: &ClassifyConfig,
) -> (AttractorVerdict, bool) {
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    let window = traj.tail_from(config.transient_fraction * t_end);
    let final_state = window.states.last().copied().unwrap_or(*initial);

    let equilibria = steady_states(params);
    let scale = |label: EquilibriumLabel, eq: &CellState| {
        let s = if label == EquilibriumLabel::E0 { initial.norm() } else { eq.norm() };
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let rel = |s: &CellState, eq: &crate::model::SteadyState| s.distance(&eq.state) / scale(eq.label, &eq.state);

    let (nearest, final_distance) = equilibria
        .iter()
        .map(|eq| (eq.label, rel(&final_state, eq)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((EquilibriumLabel::E0, f64::INFINITY));

    let verdict = |kind, period, amplitude_u3| AttractorVerdict { kind, period, amplitude_u3, final_distance, final_state };

    let settled_from = window.len() - window.len() / 4;
    let mut settling = false;
    if let Some(eq) = equilibria.iter().find(|eq| eq.label == nearest) {
        if !window.is_empty() && window.states[settled_from..].iter().all(|s| rel(s, eq) < config.equilibrium_tol) {
            let r = rhs(params, &final_state);
            let residual = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt() / scale(eq.label, &eq.state);
            if residual < config.residual_tol {
                return (verdict(AttractorKind::Equilibrium { label: nearest }, None, None), false);
            }
            settling = true;
        }
    }

    let osc = oscillation_report_with(&window, config.intervals);
    let n = config.intervals;
    if osc.peaks.len() > n && osc.troughs.len() >= n {
        let peaks = &osc.peaks[osc.peaks.len() - n - 1..];
        let intervals: Vec<f64> = peaks.windows(2).map(|w| w[1].t - w[0].t).collect();
        let heights: Vec<f64> = peaks.iter().map(|p| p.value).collect();
        let troughs: Vec<f64> = osc.troughs[osc.troughs.len() - n..].iter().map(|p| p.value).collect();
        let amplitude = mean(&heights) - mean(&troughs);
        // Per-cycle swings must not drift, or a slow spiral passes as a cycle.
        let swings: Vec<f64> = heights[1..].iter().zip(&troughs).map(|(p, t)| p - t).collect();
        if spread(&intervals) <= config.agreement_tol
            && spread(&heights) <= config.agreement_tol
            && amplitude > 0.0
            && spread_about(&troughs, amplitude) <= config.agreement_tol
        {
            if spread(&swings) <= config.agreement_tol {
                return (verdict(AttractorKind::LimitCycle, Some(mean(&intervals)), Some(amplitude)), false);
            }
            settling = true;
        }
    }
    (verdict(AttractorKind::Undecided, None, None), settling)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Largest deviation from the mean relative to the mean.
fn spread(v: &[f64]) -> f64 {
    spread_about(v, mean(v).abs())
}

fn spread_about(v: &[f64], scale: f64) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).abs()).fold(0.0, f64::max) / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OscillationReport {
    pub peaks: Vec<Extremum>,
    pub troughs: Vec<Extremum>,
    pub period: Option<f64>,
    pub amplitude: Option<f64>,
}

/// Peaks and troughs of `u3` with period and amplitude estimated over the
/// last five cycles.
pub fn oscillation_report(traj: &Trajectory) -> OscillationReport {
    oscillation_report_with(traj, 5)
}

/// Like [`oscillation_report`], averaging over `trailing` cycles.
///
/// The signal is split into excursions above and below its mean; each
/// complete excursion contributes one extremum, refined by a parabola
/// through the discrete extremum and its neighbours. Splitting at the mean
/// keeps ripples from being counted as separate peaks.
pub fn oscillation_report_with(traj: &Trajectory, trailing: usize) -> OscillationReport {
    let mut out = OscillationReport::default();
    let u = traj.u3();
    let t = &traj.times;
    if u.len() < 3 {
        return out;
    }
    let level = mean(&u);
    let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !(hi - lo > 1e-12 * hi.abs().max(1.0)) {
        return out;
    }

    // Indices where the sign of u - level changes.
    let above: Vec<bool> = u.iter().map(|&x| x > level).collect();
    let crossings: Vec<usize> = (1..u.len()).filter(|&i| above[i] != above[i - 1]).collect();
    for seg in crossings.windows(2) {
        let (start, end) = (seg[0], seg[1]);
        let range = start..end;
        let idx = if above[start] {
            range.max_by(|&a, &b| u[a].total_cmp(&u[b]))
        } else {
            range.min_by(|&a, &b| u[a].total_cmp(&u[b]))
        };
        let Some(i) = idx else { continue };
        let ext = refine(t, &u, i);
        if above[start] {
            out.peaks.push(ext);
        } else {
            out.troughs.push(ext);
        }
    }

    if out.peaks.len() >= 2 {
        let k = trailing.max(1).min(out.peaks.len() - 1);
        let tail = &out.peaks[out.peaks.len() - k - 1..];
        out.period = Some((tail[k].t - tail[0].t) / k as f64);
    }
    if !out.peaks.is_empty() && !out.troughs.is_empty() {
        let k = trailing.max(1);
        let p: Vec<f64> = out.peaks.iter().rev().take(k).map(|e| e.value).collect();
        let q: Vec<f64> = out.troughs.iter().rev().take(k).map(|e| e.value).collect();
        out.amplitude = Some(mean(&p) - mean(&q));
    }
    out
}

fn refine(t: &[f64], u: &[f64], i: usize) -> Extremum {
    if i == 0 || i + 1 >= u.len() {
        return Extremum { t: t[i], value: u[i] };
    }
    let (y0, y1, y2) = (u[i - 1], u[i], u[i + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let h0 = t[i] - t[i - 1];
    let h1 = t[i + 1] - t[i];
    if denom == 0.0 || (h0 - h1).abs() > 1e-9 * h0.max(h1) {
        return Extremum { t: t[i], value: u[i] };
    }
    let off = (0.5 * (y0 - y2) / denom).clamp(-1.0, 1.0);
    Extremum {
        t: t[i] + off * h0,
        value: y1 - 0.25 * (y0 - y2) * off,
    }
}
