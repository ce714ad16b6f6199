//! Grid sweeps of E2 existence and the Hurwitz sign over the plausible
//! parameter box, the constellation checks and Hopf-point bracketing.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{classify, default_horizon, AttractorVerdict};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{relative_residual, steady_state_e2, ModelParameters, ParamName};
use crate::presets::{self, plausible_range, Direction};
use crate::stability::{char_poly_e2, routh_hurwitz, Classification};

/// Residual above which a candidate E2 is rejected.
pub const E2_RESIDUAL_TOL: f64 = 1e-9;
/// Default fraction of the interval length by which open ends move inward.
pub const DEFAULT_NUDGE: f64 = 1e-4;
pub const DEFAULT_POINTS: usize = 100;
const CHUNK: usize = 8192;

/// One swept parameter: `points` equidistant values from `lo` to `hi`,
/// with both ends moved inward by `nudge * (hi - lo)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: ParamName,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub nudge: f64,
}

impl Axis {
    pub fn new(name: ParamName, lo: f64, hi: f64, points: usize) -> Self {
        Self { name, lo, hi, points, nudge: DEFAULT_NUDGE }
    }

    /// The plausible interval of `name` with the default grid.
    pub fn plausible(name: ParamName) -> Result<Self> {
        let (lo, hi) = plausible_range(name)
            .ok_or_else(|| Error::InvalidSweep(format!("{name} has no plausible interval; give bounds explicitly")))?;
        Ok(Self::new(name, lo, hi, DEFAULT_POINTS))
    }

    pub fn value(&self, i: usize) -> f64 {
        let shift = self.nudge * (self.hi - self.lo);
        let (a, b) = (self.lo + shift, self.hi - shift);
        if self.points == 1 {
            return 0.5 * (a + b);
        }
        if i + 1 == self.points {
            return b;
        }
        a + (b - a) * i as f64 / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::InvalidSweep(format!("{}: point count must be positive", self.name)));
        }
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidSweep(format!("{}: need lo < hi, got [{}, {}]", self.name, self.lo, self.hi)));
        }
        if !(self.nudge >= 0.0 && self.nudge < 0.5) {
            return Err(Error::InvalidSweep(format!("{}: nudge must lie in [0, 0.5)", self.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ModelParameters,
    pub axes: Vec<Axis>,
}

impl SweepSpec {
    pub fn new(base: ModelParameters, axes: Vec<Axis>) -> Self {
        Self { base, axes }
    }

    /// Sweeps `names` over their plausible intervals around `base`.
    pub fn plausible(base: ModelParameters, names: &[ParamName]) -> Result<Self> {
        Ok(Self::new(base, names.iter().map(|&n| Axis::plausible(n)).collect::<Result<_>>()?))
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks the grid and returns warnings for intervals leaving the
    /// plausible ranges.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.axes.is_empty() {
            return Err(Error::InvalidSweep("no parameter to vary".into()));
        }
        self.base.validate()?;
        let mut warnings = Vec::new();
        for (i, axis) in self.axes.iter().enumerate() {
            axis.validate()?;
            if self.axes[..i].iter().any(|a| a.name == axis.name) {
                return Err(Error::InvalidSweep(format!("{} varied twice", axis.name)));
            }
            match plausible_range(axis.name) {
                Some((lo, hi)) if axis.lo < lo || axis.hi > hi => warnings.push(format!(
                    "{} interval [{}, {}] leaves the plausible range ({lo}, {hi})",
                    axis.name, axis.lo, axis.hi
                )),
                _ => {}
            }
        }
        self.len_checked()?;
        Ok(warnings)
    }

    fn len_checked(&self) -> Result<usize> {
        self.axes
            .iter()
            .try_fold(1usize, |n, a| n.checked_mul(a.points))
            .ok_or_else(|| Error::InvalidSweep("grid too large".into()))
    }

    /// Grid coordinates of a flat index; the last axis varies fastest.
    pub fn coords(&self, mut index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            *slot = axis.value(index % axis.points);
            index /= axis.points;
        }
        out
    }

    pub fn params_at(&self, coords: &[f64]) -> ModelParameters {
        self.axes.iter().zip(coords).fold(self.base, |p, (a, &v)| p.with(a.name, v))
    }

    fn multi_index(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for (slot, axis) in out.iter_mut().zip(&self.axes).rev() {
            *slot = index % axis.points;
            index /= axis.points;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub index: usize,
    pub coords: Vec<f64>,
    pub e2_exists: bool,
    /// `b1 b2 - b3` of the E2 linearisation; absent when E2 does not exist.
    pub hurwitz: Option<f64>,
    pub class: Classification,
    /// The Hurwitz sign flips towards the next grid point along some axis,
    /// with E2 existing at both.
    pub hopf_crossing: bool,
}

/// Existence and Hurwitz value of E2 for one parameter set.
pub fn evaluate_point(params: &ModelParameters) -> (bool, Option<f64>, Classification) {
    if params.validate().is_err() {
        return (false, None, Classification::Nonexistent);
    }
    let Some(e2) = steady_state_e2(params) else {
        return (false, None, Classification::Nonexistent);
    };
    if !(relative_residual(params, &e2.state) < E2_RESIDUAL_TOL) {
        return (false, None, Classification::Nonexistent);
    }
    match char_poly_e2(params) {
        Ok(c) => (true, Some(c.hurwitz()), routh_hurwitz(&c)),
        Err(_) => (false, None, Classification::Nonexistent),
    }
}

fn evaluate_row(spec: &SweepSpec, index: usize) -> GridRow {
    let coords = spec.coords(index);
    let (e2_exists, hurwitz, class) = evaluate_point(&spec.params_at(&coords));
    let mut hopf_crossing = false;
    if let Some(h) = hurwitz {
        let mi = spec.multi_index(index);
        for (ax, axis) in spec.axes.iter().enumerate() {
            if mi[ax] + 1 >= axis.points {
                continue;
            }
            let mut next = coords.clone();
            next[ax] = axis.value(mi[ax] + 1);
            if let (_, Some(hn), _) = evaluate_point(&spec.params_at(&next)) {
                if h * hn < 0.0 {
                    hopf_crossing = true;
                    break;
                }
            }
        }
    }
    GridRow { index, coords, e2_exists, hurwitz, class, hopf_crossing }
}

/// Aggregate of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axes: Vec<Axis>,
    pub points: usize,
    pub e2_points: usize,
    pub stable_points: usize,
    pub unstable_points: usize,
    pub marginal_points: usize,
    pub hopf_crossings: usize,
    /// Per-axis `[min, max]` over the unstable points.
    pub unstable_bounds: Option<Vec<[f64; 2]>>,
    pub warnings: Vec<String>,
}

impl SweepSummary {
    fn new(spec: &SweepSpec, warnings: Vec<String>) -> Self {
        Self {
            axes: spec.axes.clone(),
            points: 0,
            e2_points: 0,
            stable_points: 0,
            unstable_points: 0,
            marginal_points: 0,
            hopf_crossings: 0,
            unstable_bounds: None,
            warnings,
        }
    }

    fn add(&mut self, row: &GridRow) {
        self.points += 1;
        self.e2_points += usize::from(row.e2_exists);
        self.hopf_crossings += usize::from(row.hopf_crossing);
        match row.class {
            Classification::Stable => self.stable_points += 1,
            Classification::Marginal => self.marginal_points += 1,
            Classification::Unstable => {
                self.unstable_points += 1;
                let bounds = self
                    .unstable_bounds
                    .get_or_insert_with(|| row.coords.iter().map(|&x| [x, x]).collect());
                for (b, &x) in bounds.iter_mut().zip(&row.coords) {
                    b[0] = b[0].min(x);
                    b[1] = b[1].max(x);
                }
            }
            Classification::Nonexistent => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<GridRow>,
    /// Coordinates of the unstable grid points in grid order.
    pub unstable: Vec<Vec<f64>>,
    pub summary: SweepSummary,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run_sweep_with(spec, Execution::default())
}

pub fn run_sweep_with(spec: &SweepSpec, exec: Execution) -> Result<SweepResult> {
    let mut rows = Vec::with_capacity(spec.len_checked()?);
    let summary = run_sweep_streaming(spec, exec, |row| {
        rows.push(row.clone());
        Ok(())
    })?;
    let unstable = rows
        .iter()
        .filter(|r| r.class == Classification::Unstable)
        .map(|r| r.coords.clone())
        .collect();
    Ok(SweepResult { rows, unstable, summary })
}

/// Evaluates the grid in chunks and hands rows to `sink` in grid order,
/// so only one chunk is held in memory at a time.
pub fn run_sweep_streaming<F>(spec: &SweepSpec, exec: Execution, mut sink: F) -> Result<SweepSummary>
where
    F: FnMut(&GridRow) -> Result<()>,
{
    let warnings = spec.validate()?;
    let n = spec.len();
    let mut summary = SweepSummary::new(spec, warnings);
    let runner = exec.runner()?;
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let chunk = runner.map_range(start..end, |i| evaluate_row(spec, i));
        for row in &chunk {
            summary.add(row);
            sink(row)?;
        }
        start = end;
    }
    Ok(summary)
}

/// CSV header: the swept parameter names, then `e2_exists,hurwitz,class`.
pub fn csv_header(spec: &SweepSpec) -> String {
    let mut cols: Vec<&str> = spec.axes.iter().map(|a| a.name.as_str()).collect();
    cols.extend(["e2_exists", "hurwitz", "class"]);
    cols.join(",")
}

pub fn write_csv_row<W: Write + ?Sized>(w: &mut W, row: &GridRow) -> io::Result<()> {
    for x in &row.coords {
        write!(w, "{x:.16e},")?;
    }
    write!(w, "{},", row.e2_exists)?;
    if let Some(h) = row.hurwitz {
        write!(w, "{h:.16e}")?;
    }
    writeln!(w, ",{}", row.class.as_str())
}

/// Refines the Hopf point in `p2` by bisection on the Hurwitz value between
/// two values of opposite sign, down to an interval below `1e-10`.
pub fn bifurcation_bracket(params: &ModelParameters, low_p2: f64, high_p2: f64) -> Result<f64> {
    let h = |p2: f64| -> Result<f64> {
        let p = params.with(ParamName::P2, p2);
        p.validate()?;
        match evaluate_point(&p) {
            (true, Some(h), _) => Ok(h),
            _ => Err(Error::NoPositiveEquilibrium),
        }
    };
    let (mut lo, mut hi) = if low_p2 <= high_p2 { (low_p2, high_p2) } else { (high_p2, low_p2) };
    let (mut h_lo, h_hi) = (h(lo)?, h(hi)?);
    if h_lo == 0.0 {
        return Ok(lo);
    }
    if h_hi == 0.0 {
        return Ok(hi);
    }
    if h_lo.signum() == h_hi.signum() {
        return Err(Error::SameSignBracket { low: h_lo, high: h_hi });
    }
    while hi - lo >= 1e-10 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h_mid = h(mid)?;
        if h_mid == 0.0 {
            return Ok(mid);
        }
        if h_mid.signum() == h_lo.signum() {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of checking one published parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetCheck {
    pub name: String,
    pub params: ModelParameters,
    pub e2_exists: bool,
    pub hurwitz: Option<f64>,
    pub class: Classification,
    pub verdict: AttractorVerdict,
    /// Whether an oscillation was expected.
    pub expect_oscillation: bool,
    pub passed: bool,
}

/// Checks one parameter set: when `expect_oscillation`, E2 must exist with
/// a negative Hurwitz value and the trajectory from E2 with `u1` raised by
/// 10% must end on a limit cycle; otherwise E2 must be stable and attract
/// that trajectory.
pub fn check_parameter_set(name: &str, params: &ModelParameters, expect_oscillation: bool) -> Result<SetCheck> {
    params.validate()?;
    let (e2_exists, hurwitz, class) = evaluate_point(params);
    let e2 = steady_state_e2(params).ok_or(Error::NoPositiveEquilibrium)?;
    let verdict = classify(params, &e2.state.scaled([1.1, 1.0, 1.0]), default_horizon(params))?;
    let passed = if expect_oscillation {
        e2_exists && hurwitz.is_some_and(|h| h < 0.0) && verdict.is_limit_cycle()
    } else {
        e2_exists && class == Classification::Stable && verdict.equilibrium().is_some()
    };
    Ok(SetCheck {
        name: name.to_string(),
        params: *params,
        e2_exists,
        hurwitz,
        class,
        verdict,
        expect_oscillation,
        passed,
    })
}

/// The reference set (expected stable) followed by the nine constellations
/// (expected to oscillate).
pub fn check_constellations(exec: Execution) -> Result<Vec<SetCheck>> {
    let mut sets = vec![("reference".to_string(), presets::reference(), false)];
    sets.extend(
        presets::CONSTELLATIONS
            .iter()
            .map(|c| (format!("constellation{}", c.id), c.params(), true)),
    );
    let runner = exec.runner()?;
    runner
        .map_range(0..sets.len(), |i| check_parameter_set(&sets[i].0, &sets[i].1, sets[i].2))
        .into_iter()
        .collect()
}

/// Whether every varied coordinate of every unstable point deviates from
/// `reference` in the given direction.
pub fn directions_hold(
    axes: &[Axis],
    unstable: &[Vec<f64>],
    reference: &ModelParameters,
    directions: &[Direction],
) -> bool {
    unstable.iter().all(|pt| {
        axes.iter()
            .zip(pt)
            .zip(directions)
            .all(|((a, &x), d)| d.matches(x, reference.get(a.name)))
    })
}
