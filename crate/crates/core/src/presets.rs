//! Published parameter sets: healthy reference values, the phase-portrait
//! example, the cyclic-neutropenia fits and the nine oscillating
//! constellations, plus the biologically plausible parameter ranges.

use serde::{Deserialize, Serialize};

use crate::model::{CellState, ModelParameters, ParamName};

/// Healthy reference values (rates per day).
pub fn reference() -> ModelParameters {
    ModelParameters {
        a1: 0.85,
        a2: 0.841,
        p1: 0.1,
        p2: 0.4,
        d1: 0.0,
        d2: 0.0,
        d3: 2.7,
        k: 1.75e-9,
    }
}

/// Phase-portrait example with the bifurcation parameter `p2` free.
pub fn fig3(p2: f64) -> ModelParameters {
    ModelParameters {
        a1: 0.7,
        a2: 0.5,
        p1: 1.0,
        p2,
        d1: 0.0,
        d2: 0.0,
        d3: 0.1337,
        k: 8.75e-9,
    }
}

/// Initial condition of the converging orbit (`p2 = 0.5`).
pub const FIG3_INITIAL_A: CellState = CellState { u1: 0.1766e7, u2: 1.3082e7, u3: 5.9429e7 };
/// Initial conditions of the two orbits approaching the limit cycle (`p2 = 0.3`).
pub const FIG3_INITIAL_B: [CellState; 2] = [
    CellState { u1: 0.2717e7, u2: 2.6836e7, u3: 9.1429e7 },
    CellState { u1: 0.1766e7, u2: 1.7443e7, u3: 5.9429e7 },
];

/// Cyclic-neutropenia fit (A).
pub fn neutropenia_a() -> ModelParameters {
    ModelParameters {
        a1: 0.85,
        a2: 0.841,
        p1: 1.0,
        p2: 0.4,
        d1: 0.0,
        d2: 0.5592,
        d3: 0.36765,
        k: 3.5e-8,
    }
}

/// Cyclic-neutropenia fit (B).
pub fn neutropenia_b() -> ModelParameters {
    ModelParameters {
        a1: 0.85,
        a2: 0.841,
        p1: 0.9293,
        p2: 0.0150,
        d1: 0.0,
        d2: 0.2541,
        d3: 2.3,
        k: 3.2e-8,
    }
}

/// Open interval of biologically plausible values. `k` has none.
pub fn plausible_range(name: ParamName) -> Option<(f64, f64)> {
    match name {
        ParamName::A1 => Some((0.5, 1.0)),
        ParamName::P1 => Some((0.0, 1.0)),
        ParamName::A2 => Some((0.0, 1.0)),
        ParamName::P2 => Some((0.0, 1.0)),
        ParamName::D1 => Some((0.0, 3.0)),
        ParamName::D2 => Some((0.0, 3.0)),
        ParamName::D3 => Some((0.1, 3.0)),
        ParamName::K => None,
    }
}

/// Parameters that the sweeps vary (everything except `k`).
pub const SWEEP_PARAMETERS: [ParamName; 7] = [
    ParamName::A1,
    ParamName::P1,
    ParamName::D1,
    ParamName::A2,
    ParamName::P2,
    ParamName::D2,
    ParamName::D3,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    /// Whether `value` deviates from `reference` in this direction.
    pub fn matches(self, value: f64, reference: f64) -> bool {
        match self {
            Direction::Up => value > reference,
            Direction::Down => value < reference,
        }
    }
}

/// One of the nine parameter constellations producing a Hopf bifurcation.
/// Parameters not listed stay at their reference values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constellation {
    pub id: u8,
    pub changes: [(ParamName, f64, Direction); 3],
}

impl Constellation {
    pub fn params(&self) -> ModelParameters {
        self.changes
            .iter()
            .fold(reference(), |p, &(name, value, _)| p.with(name, value))
    }

    pub fn varied(&self) -> [ParamName; 3] {
        self.changes.map(|(name, _, _)| name)
    }
}

use Direction::{Down, Up};
use ParamName::{A1, A2, D1, D2, D3, P1, P2};

pub const CONSTELLATIONS: [Constellation; 9] = [
    Constellation { id: 1, changes: [(P1, 0.7171, Up), (A2, 0.32, Down), (D3, 0.132, Down)] },
    Constellation { id: 2, changes: [(P1, 0.9697, Up), (A1, 0.99, Up), (D3, 0.132, Down)] },
    Constellation { id: 3, changes: [(P1, 0.7778, Up), (A2, 0.99, Up), (D2, 2.6644, Up)] },
    Constellation { id: 4, changes: [(P1, 0.8687, Up), (P2, 0.0201, Down), (D2, 0.2541, Up)] },
    Constellation { id: 5, changes: [(P1, 0.707, Up), (D2, 0.2541, Up), (D3, 0.132, Down)] },
    Constellation { id: 6, changes: [(P2, 0.01, Down), (A2, 0.99, Up), (D2, 0.5287, Up)] },
    Constellation { id: 7, changes: [(P2, 0.01, Down), (D2, 0.0405, Up), (D3, 0.132, Down)] },
    Constellation { id: 8, changes: [(A1, 0.95, Up), (D1, 0.0405, Up), (D2, 2.7559, Up)] },
    Constellation { id: 9, changes: [(A2, 0.95, Up), (D1, 0.0405, Up), (D2, 2.5423, Up)] },
];

pub fn constellation(id: u8) -> Option<&'static Constellation> {
    CONSTELLATIONS.iter().find(|c| c.id == id)
}

/// Looks up a named parameter set: `reference`, `fig3`, `neutropenia_a`,
/// `neutropenia_b` or `constellationN`.
pub fn by_name(name: &str) -> Option<ModelParameters> {
    let name = name.trim().to_ascii_lowercase();
    match name.as_str() {
        "reference" => Some(reference()),
        "fig3" => Some(fig3(0.3937)),
        "fig3a" => Some(fig3(0.5)),
        "fig3b" => Some(fig3(0.3)),
        "neutropenia_a" | "cn_a" => Some(neutropenia_a()),
        "neutropenia_b" | "cn_b" => Some(neutropenia_b()),
        _ => name
            .strip_prefix("constellation")
            .and_then(|id| id.parse::<u8>().ok())
            .and_then(constellation)
            .map(Constellation::params),
    }
}
