//! Uniform phase-space grids, quadrature and stencil derivatives.
//!
//! Values of a [`PhaseField`] are stored row-major with the `q` index
//! outermost: node `(i, j)` lives at `i * n_p + j`.
//!
//! Reductions are computed as per-row partial sums in parallel followed by a
//! sequential sum over rows, so results are bit-identical regardless of the
//! number of worker threads.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::{Error, Result};

/// Smallest accepted node count per axis.
pub const MIN_NODES: usize = 8;

/// Physical constants fixing the unit system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    pub hbar: f64,
    pub mass: f64,
    /// Reference trap frequency.
    pub omega0: f64,
}

impl UnitSystem {
    pub fn new(hbar: f64, mass: f64, omega0: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("mass", mass), ("omega0", omega0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        let units = Self { hbar, mass, omega0 };
        let x0 = units.x0();
        if !(x0.is_finite() && x0 > 0.0) {
            return Err(Error::Config(format!(
                "oscillator length is not finite: {x0}"
            )));
        }
        Ok(units)
    }

    /// `hbar = m = omega0 = 1`.
    pub fn natural() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            omega0: 1.0,
        }
    }

    /// Oscillator length `sqrt(hbar / (m omega0))`.
    pub fn x0(&self) -> f64 {
        (self.hbar / (self.mass * self.omega0)).sqrt()
    }

    /// Momentum scale `hbar / x0`.
    pub fn p0(&self) -> f64 {
        self.hbar / self.x0()
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::natural()
    }
}

/// Integration measure attached to a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    /// `d^2 Gamma = 2 pi hbar dq dp`.
    #[default]
    PaperGamma,
    /// Bare `dq dp`.
    Plain,
}

impl Measure {
    pub fn prefactor(self, units: &UnitSystem) -> f64 {
        match self {
            Measure::PaperGamma => 2.0 * PI * units.hbar,
            Measure::Plain => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    Simpson,
    Trapezoid,
}

/// One uniform axis with its 1D quadrature weights (measure excluded).
#[derive(Debug, Clone)]
pub struct Axis {
    min: f64,
    max: f64,
    step: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rule: QuadratureRule,
}

impl Axis {
    fn new(name: &str, range: (f64, f64), n: usize) -> Result<Self> {
        let (min, max) = range;
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(Error::Config(format!(
                "{name} range [{min}, {max}] is degenerate"
            )));
        }
        if n < MIN_NODES {
            return Err(Error::Config(format!(
                "{name} axis needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        let step = (max - min) / (n - 1) as f64;
        let nodes = (0..n).map(|i| min + step * i as f64).collect();
        let rule = if n % 2 == 1 {
            QuadratureRule::Simpson
        } else {
            QuadratureRule::Trapezoid
        };
        let weights = (0..n)
            .map(|i| {
                let interior = match rule {
                    QuadratureRule::Simpson if i % 2 == 1 => 4.0 / 3.0,
                    QuadratureRule::Simpson => 2.0 / 3.0,
                    QuadratureRule::Trapezoid => 1.0,
                };
                let end = match rule {
                    QuadratureRule::Simpson => 1.0 / 3.0,
                    QuadratureRule::Trapezoid => 0.5,
                };
                step * if i == 0 || i == n - 1 { end } else { interior }
            })
            .collect();
        Ok(Self {
            min,
            max,
            step,
            nodes,
            weights,
            rule,
        })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }
}

impl PartialEq for Axis {
    fn eq(&self, other: &Self) -> bool {
        self.min == other.min && self.max == other.max && self.len() == other.len()
    }
}

/// Uniform rectangular discretization of phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    q: Axis,
    p: Axis,
    measure: Measure,
    units: UnitSystem,
}

/// Build a grid; odd node counts get composite Simpson weights, even counts
/// the trapezoid rule.
pub fn make_grid(
    q_range: (f64, f64),
    n_q: usize,
    p_range: (f64, f64),
    n_p: usize,
    measure: Measure,
    units: UnitSystem,
) -> Result<Arc<PhaseGrid>> {
    Ok(Arc::new(PhaseGrid {
        q: Axis::new("q", q_range, n_q)?,
        p: Axis::new("p", p_range, n_p)?,
        measure,
        units,
    }))
}

impl PhaseGrid {
    pub fn q(&self) -> &Axis {
        &self.q
    }

    pub fn p(&self) -> &Axis {
        &self.p
    }

    pub fn n_q(&self) -> usize {
        self.q.len()
    }

    pub fn n_p(&self) -> usize {
        self.p.len()
    }

    pub fn len(&self) -> usize {
        self.n_q() * self.n_p()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dq(&self) -> f64 {
        self.q.step
    }

    pub fn dp(&self) -> f64 {
        self.p.step
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn units(&self) -> &UnitSystem {
        &self.units
    }

    pub fn prefactor(&self) -> f64 {
        self.measure.prefactor(&self.units)
    }

    /// Same nodes under a different measure.
    pub fn with_measure(&self, measure: Measure) -> Arc<PhaseGrid> {
        Arc::new(PhaseGrid {
            measure,
            ..self.clone()
        })
    }

    /// Full 2D quadrature weight of node `(i, j)` under the grid measure.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.q.weights[i] * self.p.weights[j] * self.prefactor()
    }

    /// Weighted sum of `g(value)` over all nodes, with bare `dq dp` weights.
    pub(crate) fn reduce_plain<F>(&self, values: &[f64], g: F) -> f64
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let pw = &self.p.weights;
        let rows: Vec<f64> = values
            .par_chunks(self.n_p())
            .map(|row| row.iter().zip(pw).map(|(&v, &w)| w * g(v)).sum::<f64>())
            .collect();
        rows.iter().zip(&self.q.weights).map(|(r, w)| r * w).sum()
    }
}

/// What a field represents; constrains the admissible values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    Wigner,
    ClassicalDensity,
    SqrtDensity,
    Generic,
}

impl FieldRole {
    pub fn name(self) -> &'static str {
        match self {
            FieldRole::Wigner => "Wigner",
            FieldRole::ClassicalDensity => "ClassicalDensity",
            FieldRole::SqrtDensity => "SqrtDensity",
            FieldRole::Generic => "Generic",
        }
    }
}

/// Real scalar field sampled on a [`PhaseGrid`].
#[derive(Debug, Clone)]
pub struct PhaseField {
    grid: Arc<PhaseGrid>,
    values: Vec<f64>,
    role: FieldRole,
}

impl PhaseField {
    /// Checked constructor: values must be finite, and non-negative for the
    /// density roles.
    pub fn new(grid: Arc<PhaseGrid>, values: Vec<f64>, role: FieldRole) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let n_p = grid.n_p();
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NumericalConsistency(format!(
                    "non-finite value {v} at node ({}, {})",
                    k / n_p,
                    k % n_p
                )));
            }
            if matches!(role, FieldRole::ClassicalDensity | FieldRole::SqrtDensity) && v < 0.0 {
                return Err(Error::Negativity {
                    value: v,
                    i: k / n_p,
                    j: k % n_p,
                });
            }
        }
        Ok(Self { grid, values, role })
    }

    pub(crate) fn from_parts(grid: Arc<PhaseGrid>, values: Vec<f64>, role: FieldRole) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, role }
    }

    /// Sample `f(q, p)` at every node.
    pub fn from_fn<F>(grid: &Arc<PhaseGrid>, role: FieldRole, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let values = sample(grid, f);
        Self::new(grid.clone(), values, role)
    }

    pub fn zeros(grid: &Arc<PhaseGrid>, role: FieldRole) -> Self {
        Self::from_parts(grid.clone(), vec![0.0; grid.len()], role)
    }

    pub fn grid(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_p() + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &PhaseField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn require_same_grid(&self, other: &PhaseField) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub(crate) fn require_role(&self, role: FieldRole) -> Result<()> {
        if self.role == role {
            Ok(())
        } else {
            Err(Error::RoleMismatch {
                expected: role.name(),
                found: self.role.name(),
            })
        }
    }

    /// Pointwise map into a generic field.
    pub fn map<F>(&self, f: F) -> PhaseField
    where
        F: Fn(f64) -> f64 + Sync,
    {
        let values = self.values.par_iter().map(|&v| f(v)).collect();
        Self::from_parts(self.grid.clone(), values, FieldRole::Generic)
    }

    /// Pointwise combination into a generic field. Panics on a grid mismatch.
    pub fn zip_map<F>(&self, other: &PhaseField, f: F) -> PhaseField
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        assert!(self.same_grid(other), "zip_map across different grids");
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_parts(self.grid.clone(), values, FieldRole::Generic)
    }

    /// Same values re-tagged with another role, re-checking invariants.
    pub fn with_role(self, role: FieldRole) -> Result<PhaseField> {
        PhaseField::new(self.grid, self.values, role)
    }

    /// The same values viewed on a grid with a different measure flag.
    pub fn with_measure(&self, measure: Measure) -> PhaseField {
        Self::from_parts(
            self.grid.with_measure(measure),
            self.values.clone(),
            self.role,
        )
    }

    /// Weighted sum over all nodes under the grid measure.
    pub fn integrate(&self) -> f64 {
        self.integrate_with(self.grid.measure)
    }

    /// Weighted sum over all nodes under an explicit measure.
    pub fn integrate_with(&self, measure: Measure) -> f64 {
        measure.prefactor(&self.grid.units) * self.grid.reduce_plain(&self.values, |v| v)
    }

    /// `integrate(|f|)` under the grid measure.
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm_with(self.grid.measure)
    }

    pub fn l1_norm_with(&self, measure: Measure) -> f64 {
        measure.prefactor(&self.grid.units) * self.grid.reduce_plain(&self.values, f64::abs)
    }

    /// `sqrt(integrate(f^2))` under the grid measure.
    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_with(self.grid.measure)
    }

    pub fn l2_norm_with(&self, measure: Measure) -> f64 {
        (measure.prefactor(&self.grid.units) * self.grid.reduce_plain(&self.values, |v| v * v))
            .sqrt()
    }

    /// Fourth-order finite-difference derivative along `q`.
    pub fn partial_q(&self) -> PhaseField {
        let n_q = self.grid.n_q();
        let n_p = self.grid.n_p();
        let h = self.grid.dq();
        let src = &self.values;
        let mut out = vec![0.0; src.len()];
        out.par_chunks_mut(n_p).enumerate().for_each(|(i, row)| {
            let (offset, coeffs) = stencil(i, n_q);
            for (j, slot) in row.iter_mut().enumerate() {
                let acc: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * src[(offset + k) * n_p + j])
                    .sum();
                *slot = acc / (12.0 * h);
            }
        });
        Self::from_parts(self.grid.clone(), out, FieldRole::Generic)
    }

    /// Fourth-order finite-difference derivative along `p`.
    pub fn partial_p(&self) -> PhaseField {
        let n_p = self.grid.n_p();
        let h = self.grid.dp();
        let mut out = vec![0.0; self.values.len()];
        out.par_chunks_mut(n_p)
            .zip(self.values.par_chunks(n_p))
            .for_each(|(row, src)| {
                for (j, slot) in row.iter_mut().enumerate() {
                    let (offset, coeffs) = stencil(j, n_p);
                    let acc: f64 = coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| c * src[offset + k])
                        .sum();
                    *slot = acc / (12.0 * h);
                }
            });
        Self::from_parts(self.grid.clone(), out, FieldRole::Generic)
    }
}

pub(crate) fn sample<F>(grid: &PhaseGrid, f: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let n_p = grid.n_p();
    let qs = grid.q().nodes();
    let ps = grid.p().nodes();
    let mut values = vec![0.0; grid.len()];
    values
        .par_chunks_mut(n_p)
        .zip(qs.par_iter())
        .for_each(|(row, &q)| {
            for (slot, &p) in row.iter_mut().zip(ps) {
                *slot = f(q, p);
            }
        });
    values
}

// Five-point first-derivative stencils, scaled by 12h.
const CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const FORWARD_0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const FORWARD_1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];
const BACKWARD_1: [f64; 5] = [-1.0, 6.0, -18.0, 10.0, 3.0];
const BACKWARD_0: [f64; 5] = [3.0, -16.0, 36.0, -48.0, 25.0];

/// First node index and coefficients of the stencil for node `i` of `n`.
fn stencil(i: usize, n: usize) -> (usize, &'static [f64; 5]) {
    match i {
        0 => (0, &FORWARD_0),
        1 => (0, &FORWARD_1),
        _ if i == n - 2 => (n - 5, &BACKWARD_1),
        _ if i == n - 1 => (n - 5, &BACKWARD_0),
        _ => (i - 2, &CENTRAL),
    }
}
