//! Linear stability of the steady states.
//!
//! The positive steady state E2 has characteristic polynomial
//! `l^3 + b1 l^2 + b2 l + b3`. With `b1, b3 > 0` (always true where E2
//! exists in the basic model), the sign of the Hurwitz quantity
//! `b1 b2 - b3` decides stability, and its zero in `p2` is a Hopf point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cubic;
use crate::error::{Error, Result};
use crate::model::{
    jacobian, nondimensionalize, steady_state_e0, steady_state_e1, steady_state_e2, CellState,
    EquilibriumLabel, Mat3, ModelParameters, SteadyState,
};

/// `|b1 b2 - b3| <= MARGINAL_TOL * max(1, |b1 b2|)` is reported as marginal.
pub const MARGINAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaGamma {
    pub beta: f64,
    pub gamma: f64,
}

/// Coefficients of the monic characteristic polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharPolyCoeffs {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl CharPolyCoeffs {
    pub fn hurwitz(&self) -> f64 {
        self.b1 * self.b2 - self.b3
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.b1, self.b2, self.b3]
    }

    /// `b1 = -trace`, `b2 = ` sum of principal 2x2 minors, `b3 = -det`.
    pub fn from_matrix(j: &Mat3) -> Self {
        let trace = j[0][0] + j[1][1] + j[2][2];
        let minors = j[0][0] * j[1][1] - j[0][1] * j[1][0] + j[0][0] * j[2][2] - j[0][2] * j[2][0]
            + j[1][1] * j[2][2]
            - j[1][2] * j[2][1];
        let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
            - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
        Self { b1: -trace, b2: minors, b3: -det }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Stable,
    Unstable,
    /// One negative real eigenvalue and a purely imaginary pair.
    Marginal,
    Nonexistent,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::Marginal => "marginal",
            Classification::Nonexistent => "nonexistent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub equilibrium: EquilibriumLabel,
    pub exists: bool,
    pub state: Option<CellState>,
    pub coeffs: Option<CharPolyCoeffs>,
    pub hurwitz: Option<f64>,
    pub eigenvalues: Option<[Complex64; 3]>,
    pub classification: Classification,
}

/// Hopf point of E2 in `p2`, with the spectrum at criticality. All
/// quantities are in the caller's time units except `mu_prime`, which is
/// dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfReport {
    pub p2_star: f64,
    pub d3_max: f64,
    pub omega: f64,
    pub lambda3: f64,
    pub mu_prime: f64,
}

impl HopfReport {
    /// Period of the linearised oscillation at criticality.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }
}

fn check_e2_region(a1: f64, a2: f64) -> Result<()> {
    if !(a1 > 0.5 && a1 < 1.0) {
        return Err(Error::InvalidParameter { name: "a1", value: a1, reason: "must lie in (1/2, 1)" });
    }
    if !(a2 > 0.0) {
        return Err(Error::InvalidParameter { name: "a2", value: a2, reason: "must be positive" });
    }
    if !(a2 < a1) {
        return Err(Error::Degenerate(format!("a2 = {a2} must be below a1 = {a1}")));
    }
    Ok(())
}

pub fn beta_gamma(a1: f64, a2: f64) -> Result<BetaGamma> {
    check_e2_region(a1, a2)?;
    let r = a2 / a1;
    let c = 1.0 - 1.0 / (2.0 * a1);
    let beta = 1.0 - r * c / (2.0 - r);
    let gamma = (1.0 / (2.0 * a1)) / c + r / ((2.0 - r) * (1.0 - r));
    Ok(BetaGamma { beta, gamma })
}

/// Characteristic coefficients at E2 in the caller's time units.
///
/// The basic model uses the closed forms of the rescaled system, mapped
/// back through `b_i -> p1^i b_i`; with immature death rates the extended
/// expressions are evaluated directly.
pub fn char_poly_e2(params: &ModelParameters) -> Result<CharPolyCoeffs> {
    steady_state_e2(params).ok_or(Error::NoPositiveEquilibrium)?;
    Ok(if params.is_basic() {
        basic_coeffs(params)
    } else {
        extended_coeffs(params)
    })
}

fn basic_coeffs(params: &ModelParameters) -> CharPolyCoeffs {
    let p = nondimensionalize(params).expect("validated p1");
    let r = p.a2 / p.a1;
    let c = 1.0 - 1.0 / (2.0 * p.a1);
    let beta = 1.0 - r * c / (2.0 - r);
    let b1 = (1.0 - r) * p.p2 + beta * p.d3;
    let b2 = ((1.0 - r) * beta - c * (1.0 - 2.0 * r)) * p.d3 * p.p2;
    let b3 = c * (1.0 - r) * p.d3 * p.p2;
    let s = params.p1;
    CharPolyCoeffs { b1: s * b1, b2: s * s * b2, b3: s * s * s * b3 }
}

fn extended_coeffs(params: &ModelParameters) -> CharPolyCoeffs {
    let ModelParameters { a1, a2, p1, p2, d1, d2, d3, .. } = *params;
    // q = 2 a2 s at the equilibrium signal
    let q = a2 / a1 * (d1 + p1) / p1;
    let r = (1.0 - 1.0 / (2.0 * a1)) * p1 - d1 / (2.0 * a1);
    let f = 1.0 + r * q / ((q - 2.0) * p1);
    let g = p2 * (q - 1.0) - d2;
    let b1 = d2 - (q - 1.0) * p2 + d3 * f;
    let b2 = d3 * r * (d1 + p1) / p1 * (a2 * p2 / (a1 * p1) + g / (p1 - d1)) - g * d3 * f;
    let b3 = -g * r * (d1 + p1) / p1 * d3;
    CharPolyCoeffs { b1, b2, b3 }
}

/// Factored Hurwitz quantity of the basic model,
/// `c (1 - a2/a1) ([(1 - a2/a1) p2 + beta d3] gamma - 1) d3 p2` on the
/// rescaled parameters, mapped back to the caller's units.
pub fn hurwitz_factored(params: &ModelParameters) -> Result<f64> {
    let p = nondimensionalize(params)?;
    let BetaGamma { beta, gamma } = beta_gamma(p.a1, p.a2)?;
    let r = p.a2 / p.a1;
    let c = 1.0 - 1.0 / (2.0 * p.a1);
    let h = c * (1.0 - r) * (((1.0 - r) * p.p2 + beta * p.d3) * gamma - 1.0) * p.d3 * p.p2;
    Ok(h * params.p1.powi(3))
}

/// Classification from the sign of `b1 b2 - b3`, valid when `b1, b3 > 0`.
pub fn hurwitz_classify(coeffs: &CharPolyCoeffs) -> Result<Classification> {
    let CharPolyCoeffs { b1, b3, .. } = *coeffs;
    if !(b1 > 0.0 && b3 > 0.0) {
        return Err(Error::OutOfTheory { b1, b3 });
    }
    let h = coeffs.hurwitz();
    let tol = MARGINAL_TOL * (coeffs.b1 * coeffs.b2).abs().max(1.0);
    Ok(if h.abs() <= tol {
        Classification::Marginal
    } else if h > 0.0 {
        Classification::Stable
    } else {
        Classification::Unstable
    })
}

/// Full Routh-Hurwitz test for any real cubic: stable iff `b1, b3 > 0` and
/// `b1 b2 > b3`.
pub fn routh_hurwitz(coeffs: &CharPolyCoeffs) -> Classification {
    hurwitz_classify(coeffs).unwrap_or(if coeffs.b3 == 0.0 {
        Classification::Marginal
    } else {
        Classification::Unstable
    })
}

/// Closed-form Hopf point of E2 for the basic model.
///
/// Inputs and outputs are in original units; the formulas are evaluated on
/// the rescaled quantities `d3/p1`, `p2/p1` and mapped back.
pub fn hopf_point(a1: f64, a2: f64, d3: f64, p1: f64) -> Result<HopfReport> {
    if !(p1 > 0.0) {
        return Err(Error::InvalidParameter { name: "p1", value: p1, reason: "must be positive" });
    }
    if !(d3 > 0.0) {
        return Err(Error::InvalidParameter { name: "d3", value: d3, reason: "must be positive" });
    }
    let BetaGamma { beta, gamma } = beta_gamma(a1, a2)?;
    let r = a2 / a1;
    let c = 1.0 - 1.0 / (2.0 * a1);
    let d3_max = p1 / (beta * gamma);
    let d3r = d3 / p1;
    let bracket = 1.0 / gamma - beta * d3r;
    if !(d3 < d3_max) || !(bracket > 0.0) {
        return Err(Error::NoPositiveBifurcation { d3, d3_max });
    }
    let p2r = bracket / (1.0 - r);
    let lambda3 = -1.0 / gamma;
    let omega = (bracket * gamma * c * d3r).sqrt();
    // d(b1 b2 - b3)/dp2 at criticality is c (1 - r)^2 gamma d3 p2*.
    let mu_prime = -c * (1.0 - r).powi(2) * gamma * d3r * p2r / (2.0 * (lambda3 * lambda3 + omega * omega));
    Ok(HopfReport {
        p2_star: p2r * p1,
        d3_max,
        omega: omega * p1,
        lambda3: lambda3 * p1,
        mu_prime,
    })
}

/// Eigenvalues of the Jacobian at `equilibrium`, sorted by real part
/// descending, then imaginary part.
pub fn eigenvalues_at(params: &ModelParameters, equilibrium: &SteadyState) -> [Complex64; 3] {
    let j = jacobian(params, &equilibrium.state);
    cubic::roots(CharPolyCoeffs::from_matrix(&j).as_array())
}

/// Sign of the largest real part; exact zero is marginal.
pub fn classify_eigenvalues(eigenvalues: &[Complex64; 3]) -> Classification {
    let max = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if max < 0.0 {
        Classification::Stable
    } else if max > 0.0 {
        Classification::Unstable
    } else {
        Classification::Marginal
    }
}

/// Stability of E0, E1 and E2. E2 is classified by the Hurwitz sign of its
/// characteristic coefficients, the others by their eigenvalues.
pub fn stability_reports(params: &ModelParameters) -> Result<[StabilityReport; 3]> {
    params.validate()?;
    let mut reports = [
        report_from_eigen(params, Some(steady_state_e0()), EquilibriumLabel::E0),
        report_from_eigen(params, steady_state_e1(params), EquilibriumLabel::E1),
        report_from_eigen(params, steady_state_e2(params), EquilibriumLabel::E2),
    ];
    if let Ok(coeffs) = char_poly_e2(params) {
        let e2 = &mut reports[2];
        e2.coeffs = Some(coeffs);
        e2.hurwitz = Some(coeffs.hurwitz());
        e2.classification = routh_hurwitz(&coeffs);
    }
    Ok(reports)
}

fn report_from_eigen(
    params: &ModelParameters,
    equilibrium: Option<SteadyState>,
    label: EquilibriumLabel,
) -> StabilityReport {
    match equilibrium {
        None => StabilityReport {
            equilibrium: label,
            exists: false,
            state: None,
            coeffs: None,
            hurwitz: None,
            eigenvalues: None,
            classification: Classification::Nonexistent,
        },
        Some(eq) => {
            let coeffs = CharPolyCoeffs::from_matrix(&jacobian(params, &eq.state));
            let eigenvalues = cubic::roots(coeffs.as_array());
            StabilityReport {
                equilibrium: label,
                exists: true,
                state: Some(eq.state),
                coeffs: Some(coeffs),
                hurwitz: Some(coeffs.hurwitz()),
                eigenvalues: Some(eigenvalues),
                classification: classify_eigenvalues(&eigenvalues),
            }
        }
    }
}

/// Existence and stability status of one equilibrium in the `(a1, a2)` table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Stable,
    Unstable,
    /// Exists; stability depends on the remaining parameters.
    Exists,
    Nonexistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub e0: Regime,
    pub e1: Regime,
    pub e2: Regime,
}

/// Existence and stability of the three steady states of the basic model
/// as a function of the self-renewal fractions alone.
pub fn regime_table(a1: f64, a2: f64) -> Result<RegimeSummary> {
    for (name, a) in [("a1", a1), ("a2", a2)] {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter {
                name: if name == "a1" { "a1" } else { "a2" },
                value: a,
                reason: "must lie in (0, 1)",
            });
        }
    }
    if a1 == a2 || a1 == 0.5 || a2 == 0.5 {
        return Err(Error::Degenerate(format!(
            "(a1, a2) = ({a1}, {a2}) lies on a boundary of the regime table"
        )));
    }
    let e0 = if a1.max(a2) < 0.5 { Regime::Stable } else { Regime::Unstable };
    let e1 = match (a2 > 0.5, a1 < a2) {
        (false, _) => Regime::Nonexistent,
        (true, true) => Regime::Stable,
        (true, false) => Regime::Unstable,
    };
    let e2 = if a1 > 0.5 && a2 < a1 { Regime::Exists } else { Regime::Nonexistent };
    Ok(RegimeSummary { e0, e1, e2 })
}

/// Axis intercepts of the linear boundary of the instability region in the
/// `(d3, p2)` plane for `p1 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionIntercepts {
    pub d3: f64,
    pub p2: f64,
}

pub fn instability_region_bounds(a1: f64, a2: f64) -> Result<RegionIntercepts> {
    let BetaGamma { beta, gamma } = beta_gamma(a1, a2)?;
    Ok(RegionIntercepts {
        d3: 1.0 / (beta * gamma),
        p2: 1.0 / ((1.0 - a2 / a1) * gamma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rhs;
    use crate::presets;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    /// Exact rational evaluation of beta and gamma for a1 = 7/10, a2 = 1/2:
    /// r = 5/7, c = 2/7, beta = 1 - (10/49)/(9/7) = 53/63,
    /// gamma = 5/2 + (5/7)/((9/7)(2/7)) = 5/2 + 35/18 = 40/9.
    #[test]
    fn beta_gamma_rational_oracle() {
        let bg = beta_gamma(0.7, 0.5).unwrap();
        assert!(close(bg.beta, 53.0 / 63.0, 1e-14));
        assert!(close(bg.gamma, 40.0 / 9.0, 1e-14));
        assert!(close(bg.beta, 0.841270, 1e-6));
        assert!(close(bg.gamma, 4.444444, 1e-6));
    }

    #[test]
    fn beta_gamma_small_a2_limit() {
        let a1: f64 = 0.8;
        let bg = beta_gamma(a1, 1e-12).unwrap();
        let c = 1.0 - 1.0 / (2.0 * a1);
        assert!(close(bg.beta, 1.0, 1e-11));
        assert!(close(bg.gamma, (1.0 / (2.0 * a1)) / c, 1e-11));
    }

    #[test]
    fn beta_gamma_domain() {
        assert!(beta_gamma(0.7, 0.7).is_err());
        assert!(beta_gamma(0.7, 0.8).is_err());
        assert!(beta_gamma(0.4, 0.3).is_err());
        let bg = beta_gamma(0.75, 0.55).unwrap();
        assert!(bg.beta > 0.0 && bg.beta < 1.0 && bg.gamma > 0.0);
    }

    #[test]
    fn hopf_point_fig3() {
        let h = hopf_point(0.7, 0.5, 0.1337, 1.0).unwrap();
        assert!((h.p2_star - 0.3937).abs() < 5e-4);
        assert!(close(h.p2_star, 3.5 * (0.225 - 53.0 / 63.0 * 0.1337), 1e-12));
        assert!(close(h.d3_max, 0.26746, 1e-4));
        assert!(close(h.omega, 0.13822, 1e-4));
        assert!(close(h.lambda3, -0.225, 1e-12));
        assert!(close(h.period(), 45.46, 1e-3));
        assert!(h.mu_prime < 0.0);
    }

    #[test]
    fn hopf_point_rejects_large_d3() {
        let d3_max = 1.0 / (53.0 / 63.0 * 40.0 / 9.0);
        assert!(matches!(hopf_point(0.7, 0.5, d3_max, 1.0), Err(Error::NoPositiveBifurcation { .. })));
        assert!(hopf_point(0.7, 0.5, 0.3, 1.0).is_err());
        assert!(hopf_point(0.7, 0.7, 0.1, 1.0).is_err());
    }

    #[test]
    fn hopf_point_units() {
        // Rescaling time by p1 scales p2*, omega and lambda3 by p1.
        let a = hopf_point(0.7, 0.5, 0.1337, 1.0).unwrap();
        let b = hopf_point(0.7, 0.5, 0.1337 * 0.25, 0.25).unwrap();
        assert!(close(b.p2_star, 0.25 * a.p2_star, 1e-12));
        assert!(close(b.omega, 0.25 * a.omega, 1e-12));
        assert!(close(b.lambda3, 0.25 * a.lambda3, 1e-12));
        assert!(close(b.mu_prime, a.mu_prime, 1e-12));
    }

    #[test]
    fn hurwitz_vanishes_at_hopf_point() {
        let h = hopf_point(0.7, 0.5, 0.1337, 1.0).unwrap();
        let c = char_poly_e2(&presets::fig3(h.p2_star)).unwrap();
        assert!(c.hurwitz().abs() <= 1e-9 * (c.b1 * c.b2).abs());
    }

    #[test]
    fn fig3_classifications() {
        let stable = char_poly_e2(&presets::fig3(0.5)).unwrap();
        assert_eq!(hurwitz_classify(&stable).unwrap(), Classification::Stable);
        let unstable = char_poly_e2(&presets::fig3(0.3)).unwrap();
        assert_eq!(hurwitz_classify(&unstable).unwrap(), Classification::Unstable);
        let marginal = CharPolyCoeffs { b1: 2.0, b2: 1.5, b3: 3.0 };
        assert_eq!(hurwitz_classify(&marginal).unwrap(), Classification::Marginal);
        let bad = CharPolyCoeffs { b1: -1.0, b2: 1.0, b3: 1.0 };
        assert!(matches!(hurwitz_classify(&bad), Err(Error::OutOfTheory { .. })));
        assert_eq!(routh_hurwitz(&bad), Classification::Unstable);
    }

    #[test]
    fn reference_e2_is_stable() {
        let p = presets::reference();
        let c = char_poly_e2(&p).unwrap();
        assert!(c.hurwitz() > 0.0);
        let e2 = steady_state_e2(&p).unwrap();
        let eig = eigenvalues_at(&p, &e2);
        assert!(eig.iter().all(|z| z.re < 0.0));
    }

    #[test]
    fn char_poly_matches_jacobian_on_random_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 500 {
            let p = ModelParameters {
                a1: rng.random_range(0.5..1.0),
                a2: rng.random_range(0.01..0.99),
                p1: rng.random_range(0.01..1.0),
                p2: rng.random_range(0.01..1.0),
                d1: if rng.random_bool(0.5) { rng.random_range(0.0..0.3) } else { 0.0 },
                d2: if rng.random_bool(0.5) { rng.random_range(0.0..3.0) } else { 0.0 },
                d3: rng.random_range(0.1..3.0),
                k: 10f64.powf(rng.random_range(-10.0..-7.0)),
            };
            let Some(e2) = steady_state_e2(&p) else { continue };
            let from_j = CharPolyCoeffs::from_matrix(&jacobian(&p, &e2.state));
            let closed = char_poly_e2(&p).unwrap();
            for (a, b) in closed.as_array().iter().zip(from_j.as_array()) {
                assert!(close(*a, b, 1e-9), "{p:?}: {closed:?} vs {from_j:?}");
            }
            checked += 1;
        }
    }

    #[test]
    fn extended_coefficients_reduce_to_basic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a1 = rng.random_range(0.51..0.99);
            let p = ModelParameters::basic(
                a1,
                rng.random_range(0.01..a1),
                rng.random_range(0.05..1.0),
                rng.random_range(0.01..1.0),
                rng.random_range(0.1..3.0),
                1e-9,
            )
            .unwrap();
            let basic = basic_coeffs(&p);
            let ext = extended_coeffs(&p);
            for (a, b) in basic.as_array().iter().zip(ext.as_array()) {
                assert!(close(*a, b, 1e-12));
            }
        }
    }

    #[test]
    fn eigenvalues_at_e0() {
        let p = nondimensionalize(&presets::reference()).unwrap();
        let eig = eigenvalues_at(&p, &steady_state_e0());
        let mut re: Vec<f64> = eig.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!(close(re[0], -27.0, 1e-12));
        assert!(close(re[1], 0.7, 1e-12));
        assert!(close(re[2], 2.728, 1e-12));
        assert!(eig.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn eigenvalues_at_e1_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a2: f64 = rng.random_range(0.51..0.99);
            let p = ModelParameters::basic(
                rng.random_range(0.01..0.99),
                a2,
                1.0,
                rng.random_range(0.01..2.0),
                rng.random_range(0.1..3.0),
                1e-9,
            )
            .unwrap();
            let e1 = steady_state_e1(&p).unwrap();
            let eig = eigenvalues_at(&p, &e1);
            let l1 = Complex64::new(p.a1 / a2 - 1.0, 0.0);
            let h = p.d3 / (4.0 * a2);
            let disc = Complex64::new(h * h - (1.0 - 1.0 / (2.0 * a2)) * p.d3 * p.p2, 0.0).sqrt();
            let expect = [l1, -h + disc, -h - disc];
            for e in expect {
                let best = eig.iter().map(|z| (z - e).norm()).fold(f64::INFINITY, f64::min);
                assert!(best < 1e-9 * (1.0 + e.norm()), "{e} not in {eig:?}");
            }
            assert!((-h + disc).re < 0.0 && (-h - disc).re < 0.0);
        }
    }

    #[test]
    fn eigen_residuals_on_random_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let a1 = rng.random_range(0.51..0.99);
            let p = ModelParameters::basic(
                a1,
                rng.random_range(0.01..a1),
                rng.random_range(0.05..1.0),
                rng.random_range(0.01..1.0),
                rng.random_range(0.1..3.0),
                1e-9,
            )
            .unwrap();
            let e2 = steady_state_e2(&p).unwrap();
            let c = CharPolyCoeffs::from_matrix(&jacobian(&p, &e2.state));
            for z in eigenvalues_at(&p, &e2) {
                assert!(cubic::eval(c.as_array(), z).norm() < 1e-8 * c.b3.abs().max(1.0));
            }
        }
    }

    #[test]
    fn regime_table_cells() {
        let r = regime_table(0.4, 0.3).unwrap();
        assert_eq!(r, RegimeSummary { e0: Regime::Stable, e1: Regime::Nonexistent, e2: Regime::Nonexistent });
        let r = regime_table(0.4, 0.7).unwrap();
        assert_eq!(r, RegimeSummary { e0: Regime::Unstable, e1: Regime::Stable, e2: Regime::Nonexistent });
        let r = regime_table(0.85, 0.841).unwrap();
        assert_eq!(r, RegimeSummary { e0: Regime::Unstable, e1: Regime::Unstable, e2: Regime::Exists });
        let r = regime_table(0.7, 0.3).unwrap();
        assert_eq!(r, RegimeSummary { e0: Regime::Unstable, e1: Regime::Nonexistent, e2: Regime::Exists });
        assert!(regime_table(0.6, 0.6).is_err());
        assert!(regime_table(0.5, 0.3).is_err());
        assert!(regime_table(0.7, 0.5).is_err());
    }

    #[test]
    fn regime_table_agrees_with_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let (a1, a2) = (rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
            let table = regime_table(a1, a2).unwrap();
            let p = ModelParameters::basic(a1, a2, 1.0, 0.6, 0.5, 1e-9).unwrap();
            let reports = stability_reports(&p).unwrap();
            let expect = |r: Regime, rep: &StabilityReport| match r {
                Regime::Nonexistent => assert!(!rep.exists),
                Regime::Exists => assert!(rep.exists),
                Regime::Stable => assert_eq!(rep.classification, Classification::Stable),
                Regime::Unstable => assert_eq!(rep.classification, Classification::Unstable),
            };
            expect(table.e0, &reports[0]);
            expect(table.e1, &reports[1]);
            expect(table.e2, &reports[2]);
        }
    }

    #[test]
    fn region_intercepts() {
        let b = instability_region_bounds(0.7, 0.5).unwrap();
        assert!(close(b.d3, 0.26746, 1e-4));
        assert!(close(b.p2, 0.7875, 1e-12));
        let b = instability_region_bounds(0.75, 0.55).unwrap();
        assert!(b.d3 < 2.0 && b.p2 < 2.0);
        // the boundary line passes through both intercepts
        let h = hopf_point(0.75, 0.55, 0.5 * b.d3, 1.0).unwrap();
        assert!(close(h.p2_star, 0.5 * b.p2, 1e-12));
    }

    #[test]
    fn e2_is_steady_for_random_extended_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut n = 0;
        while n < 200 {
            let p = ModelParameters {
                a1: rng.random_range(0.5..1.0),
                a2: rng.random_range(0.01..0.99),
                p1: rng.random_range(0.01..1.0),
                p2: rng.random_range(0.01..1.0),
                d1: rng.random_range(0.0..0.2),
                d2: rng.random_range(0.0..3.0),
                d3: rng.random_range(0.1..3.0),
                k: 1e-9,
            };
            let Some(e2) = steady_state_e2(&p) else { continue };
            let r = rhs(&p, &e2.state);
            assert!(crate::model::relative_residual(&p, &e2.state) < 1e-12, "{r:?}");
            n += 1;
        }
    }
}
