//! Three-compartment feedback model of white blood cell formation.
//!
//! Stem cells (`u1`), progenitors (`u2`) and mature cells (`u3`) are coupled
//! through the feedback signal `s = 1 / (1 + k u3)`, which scales the
//! self-renewal fractions of both immature compartments:
//!
//! ```text
//! du1/dt = (2 a1 s - 1) p1 u1                      - d1 u1
//! du2/dt = (2 a2 s - 1) p2 u2 + 2 (1 - a1 s) p1 u1 - d2 u2
//! du3/dt = 2 (1 - a2 s) p2 u2                      - d3 u3
//! ```
//!
//! With `d1 = d2 = 0` this is the basic model; positive immature death rates
//! give the extended model used for the parameter-space sweeps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// The eight scalars defining one model instance. Rates are per day, `k` is
/// in kg per cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub a1: f64,
    pub a2: f64,
    pub p1: f64,
    pub p2: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub k: f64,
}

impl ModelParameters {
    #[allow(clippy::too_many_arguments)]
    pub fn new(a1: f64, a2: f64, p1: f64, p2: f64, d1: f64, d2: f64, d3: f64, k: f64) -> Result<Self> {
        let params = Self { a1, a2, p1, p2, d1, d2, d3, k };
        params.validate()?;
        Ok(params)
    }

    /// Basic model: no death of immature cells.
    pub fn basic(a1: f64, a2: f64, p1: f64, p2: f64, d3: f64, k: f64) -> Result<Self> {
        Self::new(a1, a2, p1, p2, 0.0, 0.0, d3, k)
    }

    pub fn validate(&self) -> Result<()> {
        fn check(name: &'static str, value: f64, ok: bool, reason: &'static str) -> Result<()> {
            if ok && value.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value, reason })
            }
        }
        check("a1", self.a1, self.a1 > 0.0 && self.a1 < 1.0, "must lie in (0, 1)")?;
        check("a2", self.a2, self.a2 > 0.0 && self.a2 < 1.0, "must lie in (0, 1)")?;
        check("p1", self.p1, self.p1 > 0.0, "must be positive")?;
        check("p2", self.p2, self.p2 > 0.0, "must be positive")?;
        check("d1", self.d1, self.d1 >= 0.0, "must be non-negative")?;
        check("d2", self.d2, self.d2 >= 0.0, "must be non-negative")?;
        check("d3", self.d3, self.d3 > 0.0, "must be positive")?;
        check("k", self.k, self.k > 0.0, "must be positive")?;
        Ok(())
    }

    /// True when immature cells do not die.
    pub fn is_basic(&self) -> bool {
        self.d1 == 0.0 && self.d2 == 0.0
    }

    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::A1 => self.a1,
            ParamName::A2 => self.a2,
            ParamName::P1 => self.p1,
            ParamName::P2 => self.p2,
            ParamName::D1 => self.d1,
            ParamName::D2 => self.d2,
            ParamName::D3 => self.d3,
            ParamName::K => self.k,
        }
    }

    pub fn set(&mut self, name: ParamName, value: f64) {
        match name {
            ParamName::A1 => self.a1 = value,
            ParamName::A2 => self.a2 = value,
            ParamName::P1 => self.p1 = value,
            ParamName::P2 => self.p2 = value,
            ParamName::D1 => self.d1 = value,
            ParamName::D2 => self.d2 = value,
            ParamName::D3 => self.d3 = value,
            ParamName::K => self.k = value,
        }
    }

    pub fn with(mut self, name: ParamName, value: f64) -> Self {
        self.set(name, value);
        self
    }
}

/// Names of the model parameters, in the order used for CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamName {
    A1,
    P1,
    D1,
    A2,
    P2,
    D2,
    D3,
    K,
}

impl ParamName {
    pub const ALL: [ParamName; 8] = [
        ParamName::A1,
        ParamName::P1,
        ParamName::D1,
        ParamName::A2,
        ParamName::P2,
        ParamName::D2,
        ParamName::D3,
        ParamName::K,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::A1 => "a1",
            ParamName::A2 => "a2",
            ParamName::P1 => "p1",
            ParamName::P2 => "p2",
            ParamName::D1 => "d1",
            ParamName::D2 => "d2",
            ParamName::D3 => "d3",
            ParamName::K => "k",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownParameter(s.to_string()))
    }
}

/// Cell counts per kg of body weight.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CellState {
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
}

impl CellState {
    pub const ZERO: CellState = CellState { u1: 0.0, u2: 0.0, u3: 0.0 };

    pub fn new(u1: f64, u2: f64, u3: f64) -> Self {
        Self { u1, u2, u3 }
    }

    pub fn from_array(u: Vec3) -> Self {
        Self { u1: u[0], u2: u[1], u3: u[2] }
    }

    pub fn to_array(self) -> Vec3 {
        [self.u1, self.u2, self.u3]
    }

    pub fn norm(&self) -> f64 {
        norm(&self.to_array())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|&u| u >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|u| u.is_finite())
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &CellState) -> f64 {
        let (a, b) = (self.to_array(), other.to_array());
        norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
    }

    pub fn scaled(&self, f: Vec3) -> Self {
        Self::new(self.u1 * f[0], self.u2 * f[1], self.u3 * f[2])
    }
}

pub(crate) fn norm(v: &Vec3) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EquilibriumLabel {
    E0,
    E1,
    E2,
}

impl fmt::Display for EquilibriumLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EquilibriumLabel::E0 => "E0",
            EquilibriumLabel::E1 => "E1",
            EquilibriumLabel::E2 => "E2",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub label: EquilibriumLabel,
    pub state: CellState,
}

/// Feedback signal `1 / (1 + k u3)`.
pub fn feedback_signal(k: f64, u3: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter { name: "k", value: k, reason: "must be positive" });
    }
    if !(u3 >= 0.0) {
        return Err(Error::InvalidState(format!("mature cell count must be non-negative, got {u3}")));
    }
    Ok(signal(k, u3))
}

#[inline]
pub(crate) fn signal(k: f64, u3: f64) -> f64 {
    1.0 / (1.0 + k * u3)
}

/// Time derivative of the cell counts (cells/kg/day).
pub fn rhs(params: &ModelParameters, state: &CellState) -> Vec3 {
    rhs_array(params, &state.to_array())
}

#[inline]
pub(crate) fn rhs_array(p: &ModelParameters, u: &Vec3) -> Vec3 {
    let s = signal(p.k, u[2]);
    [
        (2.0 * p.a1 * s - 1.0) * p.p1 * u[0] - p.d1 * u[0],
        (2.0 * p.a2 * s - 1.0) * p.p2 * u[1] + 2.0 * (1.0 - p.a1 * s) * p.p1 * u[0] - p.d2 * u[1],
        2.0 * (1.0 - p.a2 * s) * p.p2 * u[1] - p.d3 * u[2],
    ]
}

/// Norm of the right-hand side relative to the gross fluxes entering it.
/// Zero for an exact equilibrium; the denominator makes the measure
/// independent of time units.
pub fn relative_residual(params: &ModelParameters, state: &CellState) -> f64 {
    let p = params;
    let u = state.to_array();
    let s = signal(p.k, u[2]);
    let gross = [
        (2.0 * p.a1 * s * p.p1 + p.p1 + p.d1) * u[0].abs(),
        (2.0 * p.a2 * s * p.p2 + p.p2 + p.d2) * u[1].abs() + 2.0 * (1.0 - p.a1 * s).abs() * p.p1 * u[0].abs(),
        2.0 * (1.0 - p.a2 * s).abs() * p.p2 * u[1].abs() + p.d3 * u[2].abs(),
    ];
    let scale = norm(&gross);
    if scale == 0.0 {
        return 0.0;
    }
    norm(&rhs_array(p, &u)) / scale
}

/// Rescales time by `p1`, so that the stem proliferation rate becomes one.
pub fn nondimensionalize(params: &ModelParameters) -> Result<ModelParameters> {
    let p1 = params.p1;
    if !(p1 > 0.0) || !p1.is_finite() {
        return Err(Error::InvalidParameter { name: "p1", value: p1, reason: "must be positive" });
    }
    Ok(ModelParameters {
        p1: 1.0,
        p2: params.p2 / p1,
        d1: params.d1 / p1,
        d2: params.d2 / p1,
        d3: params.d3 / p1,
        ..*params
    })
}

pub fn steady_state_e0() -> SteadyState {
    SteadyState { label: EquilibriumLabel::E0, state: CellState::ZERO }
}

/// Semi-trivial steady state without stem cells, if it exists.
pub fn steady_state_e1(params: &ModelParameters) -> Option<SteadyState> {
    let p = params;
    let (u2, u3) = if p.d2 == 0.0 {
        let u3 = (2.0 * p.a2 - 1.0) / p.k;
        (p.d3 / p.p2 * u3, u3)
    } else {
        // du2 = 0 with u1 = 0 fixes the signal.
        let s = (p.p2 + p.d2) / (2.0 * p.a2 * p.p2);
        let u3 = (1.0 / s - 1.0) / p.k;
        (p.d3 * u3 / (2.0 * (1.0 - p.a2 * s) * p.p2), u3)
    };
    let ok = |x: f64| x > 0.0 && x.is_finite();
    (ok(u2) && ok(u3)).then(|| SteadyState {
        label: EquilibriumLabel::E1,
        state: CellState::new(0.0, u2, u3),
    })
}

/// Strictly positive steady state, if it exists.
///
/// The basic model uses the textbook closed form, which exists iff
/// `a1 > 1/2` and `a2 < a1`. With immature death rates, `du1 = 0` fixes
/// the signal at `s = (p1 + d1) / (2 a1 p1)`; the remaining two equations
/// then give `u2` and `u1` explicitly, and existence means every component
/// is strictly positive.
pub fn steady_state_e2(params: &ModelParameters) -> Option<SteadyState> {
    let p = params;
    let state = if p.is_basic() {
        let r = p.a2 / p.a1;
        let u3 = (2.0 * p.a1 - 1.0) / p.k;
        let u2 = p.d3 / ((2.0 - r) * p.p2) * u3;
        let u1 = (1.0 - r) * p.p2 / p.p1 * u2;
        CellState::new(u1, u2, u3)
    } else {
        let s = (p.p1 + p.d1) / (2.0 * p.a1 * p.p1);
        let u3 = (1.0 / s - 1.0) / p.k;
        let u2 = p.d3 * u3 / (2.0 * (1.0 - p.a2 * s) * p.p2);
        let u1 = ((1.0 - 2.0 * p.a2 * s) * p.p2 + p.d2) * u2 / (2.0 * (1.0 - p.a1 * s) * p.p1);
        CellState::new(u1, u2, u3)
    };
    let ok = state.to_array().iter().all(|&x| x > 0.0 && x.is_finite());
    ok.then_some(SteadyState { label: EquilibriumLabel::E2, state })
}

/// All equilibria that exist for `params`, in label order.
pub fn steady_states(params: &ModelParameters) -> Vec<SteadyState> {
    let mut all = vec![steady_state_e0()];
    all.extend(steady_state_e1(params));
    all.extend(steady_state_e2(params));
    all
}

/// Basic-model parameters that move E2 to a prescribed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E2Placement {
    pub k: f64,
    pub d3: f64,
    pub p2: f64,
}

pub fn place_e2(target: &CellState, a1: f64, a2: f64, p1: f64) -> Result<E2Placement> {
    if !target.to_array().iter().all(|&x| x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidState("target must be strictly positive".into()));
    }
    if !(a1 > 0.5) {
        return Err(Error::InvalidParameter { name: "a1", value: a1, reason: "must exceed 1/2" });
    }
    if !(a2 < a1) {
        return Err(Error::InvalidParameter { name: "a2", value: a2, reason: "must be below a1" });
    }
    if !(p1 > 0.0) {
        return Err(Error::InvalidParameter { name: "p1", value: p1, reason: "must be positive" });
    }
    let r = a2 / a1;
    let k = (2.0 * a1 - 1.0) / target.u3;
    let d3 = (2.0 - r) / (1.0 - r) * (target.u1 / target.u3) * p1;
    let p2 = d3 / (2.0 - r) * (target.u3 / target.u2);
    Ok(E2Placement { k, d3, p2 })
}

/// Analytic Jacobian of [`rhs`].
pub fn jacobian(params: &ModelParameters, state: &CellState) -> Mat3 {
    let p = params;
    let [u1, u2, u3] = state.to_array();
    let s = signal(p.k, u3);
    // ds/du3 = -k s^2
    let ds = -p.k * s * s;
    [
        [(2.0 * p.a1 * s - 1.0) * p.p1 - p.d1, 0.0, 2.0 * p.a1 * p.p1 * u1 * ds],
        [
            2.0 * (1.0 - p.a1 * s) * p.p1,
            (2.0 * p.a2 * s - 1.0) * p.p2 - p.d2,
            2.0 * p.a2 * p.p2 * u2 * ds - 2.0 * p.a1 * p.p1 * u1 * ds,
        ],
        [0.0, 2.0 * (1.0 - p.a2 * s) * p.p2, -2.0 * p.a2 * p.p2 * u2 * ds - p.d3],
    ]
}

/// Box `[0, c1] x [0, c2] x [0, c3]` that traps every trajectory started
/// from the given initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantBox {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Bound above which `u1/u2` decreases.
    pub b1: f64,
    /// Bound above which `u2/u3` decreases.
    pub b2: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl InvariantBox {
    pub fn contains(&self, state: &CellState) -> bool {
        state.u1 <= self.c1 && state.u2 <= self.c2 && state.u3 <= self.c3
    }

    pub fn upper(&self) -> CellState {
        CellState::new(self.c1, self.c2, self.c3)
    }
}

/// Upper bounds for solutions started at `initial`, built from the ratio
/// bounds `u1/u2 <= m1`, `u2/u3 <= m2` on the rescaled system.
///
/// The ratio `u2/u3` relaxes at rate `2 (1 - a2) p2`, so `b2` carries `p2`
/// in its denominator and the current ratio cap `m1`. `k2` and `k3` use the
/// box sides `c1`, `c2` rather than their asymptotic values so the box holds
/// from time zero, not only eventually.
pub fn invariant_box(params: &ModelParameters, initial: &CellState) -> Result<InvariantBox> {
    params.validate()?;
    if !initial.is_finite() || initial.u1 < 0.0 || initial.u2 <= 0.0 || initial.u3 <= 0.0 {
        return Err(Error::InvalidState(
            "initial state needs u1 >= 0 and u2, u3 > 0 for the ratio bounds".into(),
        ));
    }
    let p = nondimensionalize(params)?;
    let b1 = (1.0 + p.p2 + p.d2 - p.d1) / (2.0 * (1.0 - p.a1));
    let m1 = b1.max(initial.u1 / initial.u2);
    let b2 = (2.0 * m1 + p.d3 + p.p2) / (2.0 * (1.0 - p.a2) * p.p2);
    let m2 = b2.max(initial.u2 / initial.u3);

    let k1 = m2 * m1 * (2.0 * p.a1 - 1.0) / p.k;
    let c1 = k1.max(initial.u1);
    let k2 = ((4.0 * p.a2 - 1.0) * m2 / p.k).max(4.0 * c1 / p.p2);
    let c2 = k2.max(initial.u2);
    let k3 = 2.0 * p.p2 * c2 / p.d3;
    let c3 = k3.max(initial.u3);
    Ok(InvariantBox { c1, c2, c3, b1, b2, k1, k2, k3 })
}
