//! Wigner functions and classical phase-space densities.
//!
//! Evolved states are obtained by composing an analytic initial state with
//! the canonical scaling map `Q = q / b`, `P = b p - m q b'` generated by a
//! solution `b(t)` of the Ermakov equation.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::phasegrid::{sample, FieldRole, PhaseField, PhaseGrid, UnitSystem};
use crate::{Error, Result};

/// Below this a density value is treated as roundoff and clamped to zero.
pub const NEGATIVITY_CLAMP: f64 = 1e-14;

/// Largest imaginary residue tolerated by the Wigner transform.
pub const IMAGINARY_TOLERANCE: f64 = 1e-8;

/// Laguerre polynomial `L_n(x)` by the three-term recurrence.
pub fn laguerre(n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Point `(b, b')` of an Ermakov solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    pub b: f64,
    pub bdot: f64,
}

impl Scaling {
    pub const IDENTITY: Scaling = Scaling { b: 1.0, bdot: 0.0 };

    pub fn new(b: f64, bdot: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) || !bdot.is_finite() {
            return Err(Error::Domain(format!(
                "scaling requires b > 0, got b = {b}, b' = {bdot}"
            )));
        }
        Ok(Self { b, bdot })
    }

    /// Canonical variables `(Q, P)` of the node `(q, p)`.
    #[inline]
    pub fn canonical(&self, mass: f64, q: f64, p: f64) -> (f64, f64) {
        (q / self.b, self.b * p - mass * q * self.bdot)
    }
}

/// Classical Gaussian `exp(-(q-q0)^2/sq^2 - (p-p0)^2/sp^2) / (pi sq sp)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub sigma_q: f64,
    pub sigma_p: f64,
    pub center: (f64, f64),
}

impl GaussianSpec {
    pub fn new(sigma_q: f64, sigma_p: f64, center: (f64, f64)) -> Result<Self> {
        if !(sigma_q.is_finite() && sigma_q > 0.0 && sigma_p.is_finite() && sigma_p > 0.0) {
            return Err(Error::Config(format!(
                "Gaussian widths must be positive, got sigma_q = {sigma_q}, sigma_p = {sigma_p}"
            )));
        }
        if !(center.0.is_finite() && center.1.is_finite()) {
            return Err(Error::Config("Gaussian center must be finite".into()));
        }
        Ok(Self {
            sigma_q,
            sigma_p,
            center,
        })
    }

    /// `sigma_q = x0 / sqrt 2`, `sigma_p = hbar / (x0 sqrt 2)`, centered.
    ///
    /// With `x0 = sqrt(hbar / (m omega0))` this density coincides with
    /// `2 pi hbar W_0^2` of the oscillator ground state.
    pub fn paper_default(units: &UnitSystem) -> Self {
        let x0 = units.x0();
        Self {
            sigma_q: x0 / 2f64.sqrt(),
            sigma_p: units.hbar / (x0 * 2f64.sqrt()),
            center: (0.0, 0.0),
        }
    }

    pub fn density(&self, q: f64, p: f64) -> f64 {
        let dq = (q - self.center.0) / self.sigma_q;
        let dp = (p - self.center.1) / self.sigma_p;
        (-dq * dq - dp * dp).exp() / (PI * self.sigma_q * self.sigma_p)
    }
}

/// Closed-form initial states that can be transported by the scaling map or
/// along characteristics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// Wigner function of the `n`-th eigenstate of the `omega0` oscillator.
    HoEigenstate(u32),
    /// Classical Gaussian density.
    Gaussian(GaussianSpec),
}

impl InitialState {
    pub fn role(&self) -> FieldRole {
        match self {
            InitialState::HoEigenstate(_) => FieldRole::Wigner,
            InitialState::Gaussian(_) => FieldRole::ClassicalDensity,
        }
    }

    pub fn value(&self, units: &UnitSystem, q: f64, p: f64) -> f64 {
        match *self {
            InitialState::HoEigenstate(n) => ho_wigner_value(n, units, q, p),
            InitialState::Gaussian(spec) => spec.density(q, p),
        }
    }
}

/// Ground-oscillator energy `P^2/2m + m omega0^2 Q^2 / 2`.
#[inline]
fn oscillator_energy(units: &UnitSystem, q: f64, p: f64) -> f64 {
    p * p / (2.0 * units.mass) + 0.5 * units.mass * units.omega0 * units.omega0 * q * q
}

/// Static eigenstate Wigner function `W_n(q, p)` of the `omega0` oscillator.
pub fn ho_wigner_value(n: u32, units: &UnitSystem, q: f64, p: f64) -> f64 {
    let e = oscillator_energy(units, q, p) / (units.hbar * units.omega0);
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign / (PI * units.hbar) * (-2.0 * e).exp() * laguerre(n, 4.0 * e)
}

/// Sample `initial` at the canonical preimage of every node.
pub(crate) fn scaled_field(
    grid: &Arc<PhaseGrid>,
    initial: &InitialState,
    scaling: Scaling,
) -> PhaseField {
    let units = *grid.units();
    let values = sample(grid, |q, p| {
        let (qq, pp) = scaling.canonical(units.mass, q, p);
        initial.value(&units, qq, pp)
    });
    PhaseField::from_parts(grid.clone(), values, initial.role())
}

/// Wigner function of the `n`-th eigenstate evolved to scaling `(b, b')`.
pub fn ho_eigenstate_wigner(
    n: u32,
    scaling: (f64, f64),
    grid: &Arc<PhaseGrid>,
) -> Result<PhaseField> {
    let scaling = Scaling::new(scaling.0, scaling.1)?;
    Ok(scaled_field(grid, &InitialState::HoEigenstate(n), scaling))
}

/// Classical Gaussian density evolved to scaling `(b, b')`.
pub fn gaussian_classical_density(
    spec: &GaussianSpec,
    scaling: (f64, f64),
    grid: &Arc<PhaseGrid>,
) -> Result<PhaseField> {
    let scaling = Scaling::new(scaling.0, scaling.1)?;
    Ok(scaled_field(grid, &InitialState::Gaussian(*spec), scaling))
}

/// `rho = 2 pi hbar W^2`.
pub fn classical_from_wigner(w: &PhaseField) -> Result<PhaseField> {
    w.require_role(FieldRole::Wigner)?;
    let scale = 2.0 * PI * w.grid().units().hbar;
    let values = w.values().par_iter().map(|v| scale * v * v).collect();
    Ok(PhaseField::from_parts(
        w.grid().clone(),
        values,
        FieldRole::ClassicalDensity,
    ))
}

/// Pointwise square root of a classical density.
///
/// Values in `[-1e-14, 0)` are treated as roundoff and clamped; anything more
/// negative means a quasi-probability slipped in where a density belongs.
pub fn sqrt_density(rho: &PhaseField) -> Result<PhaseField> {
    rho.require_role(FieldRole::ClassicalDensity)?;
    let n_p = rho.grid().n_p();
    if let Some((k, &v)) = rho
        .values()
        .iter()
        .enumerate()
        .find(|(_, &v)| v < -NEGATIVITY_CLAMP)
    {
        return Err(Error::Negativity {
            value: v,
            i: k / n_p,
            j: k % n_p,
        });
    }
    let values = rho.values().par_iter().map(|v| v.max(0.0).sqrt()).collect();
    Ok(PhaseField::from_parts(
        rho.grid().clone(),
        values,
        FieldRole::SqrtDensity,
    ))
}

/// Complex wavefunction sampled on a uniform coordinate grid.
#[derive(Debug, Clone)]
pub struct SampledWavefunction {
    q_min: f64,
    dq: f64,
    amplitudes: Vec<Complex64>,
}

impl SampledWavefunction {
    /// Requires at least two nodes and `sum |psi|^2 dq = 1` within `1e-6`.
    pub fn new(q_min: f64, dq: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 || !(dq.is_finite() && dq > 0.0) || !q_min.is_finite() {
            return Err(Error::Domain(
                "wavefunction needs >= 2 nodes and dq > 0".into(),
            ));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dq;
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "wavefunction norm is {norm}, expected 1"
            )));
        }
        Ok(Self {
            q_min,
            dq,
            amplitudes,
        })
    }

    /// Sample `psi` on `n` uniform nodes of `[q_min, q_max]` and normalize.
    pub fn from_fn<F>(q_min: f64, q_max: f64, n: usize, psi: F) -> Result<Self>
    where
        F: Fn(f64) -> Complex64,
    {
        if n < 2 || q_max <= q_min {
            return Err(Error::Domain("wavefunction support is degenerate".into()));
        }
        let dq = (q_max - q_min) / (n - 1) as f64;
        let mut amplitudes: Vec<Complex64> = (0..n).map(|k| psi(q_min + dq * k as f64)).collect();
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * dq;
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Domain("wavefunction has zero norm".into()));
        }
        let scale = norm.sqrt().recip();
        amplitudes.iter_mut().for_each(|a| *a *= scale);
        Self::new(q_min, dq, amplitudes)
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_min + self.dq * (self.amplitudes.len() - 1) as f64
    }

    pub fn dq(&self) -> f64 {
        self.dq
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Linear interpolation, zero outside the sampled support.
    pub fn at(&self, q: f64) -> Complex64 {
        let x = (q - self.q_min) / self.dq;
        let last = self.amplitudes.len() - 1;
        if !(x >= -1e-9 && x <= last as f64 + 1e-9) {
            return Complex64::new(0.0, 0.0);
        }
        let x = x.clamp(0.0, last as f64);
        let k = (x.floor() as usize).min(last - 1);
        let frac = x - k as f64;
        self.amplitudes[k] * (1.0 - frac) + self.amplitudes[k + 1] * frac
    }
}

/// Wigner transform `(1/pi hbar) int psi(q-y) psi*(q+y) exp(-2ipy/hbar) dy`
/// by the trapezoid rule on the wavefunction's own spacing.
pub fn wigner_from_wavefunction(
    psi: &SampledWavefunction,
    grid: &Arc<PhaseGrid>,
) -> Result<PhaseField> {
    let tol = 1e-9 * psi.dq;
    if grid.q().min() < psi.q_min() - tol || grid.q().max() > psi.q_max() + tol {
        return Err(Error::Domain(format!(
            "grid q-range [{}, {}] exceeds wavefunction support [{}, {}]",
            grid.q().min(),
            grid.q().max(),
            psi.q_min(),
            psi.q_max()
        )));
    }
    let hbar = grid.units().hbar;
    let n_p = grid.n_p();
    let ps = grid.p().nodes();
    let dy = psi.dq();

    let rows: Vec<(Vec<f64>, f64)> = grid
        .q()
        .nodes()
        .par_iter()
        .map(|&q| {
            let reach = (q - psi.q_min()).min(psi.q_max() - q).max(0.0);
            let k_max = ((reach + tol) / dy).floor() as i64;
            let terms: Vec<(f64, Complex64)> = (-k_max..=k_max)
                .map(|k| {
                    let y = k as f64 * dy;
                    let w = if k.abs() == k_max && k_max > 0 {
                        0.5
                    } else {
                        1.0
                    };
                    (y, psi.at(q - y) * psi.at(q + y).conj() * (w * dy))
                })
                .collect();
            let mut row = Vec::with_capacity(n_p);
            let mut worst: f64 = 0.0;
            for &p in ps {
                let sum: Complex64 = terms
                    .iter()
                    .map(|&(y, c)| c * Complex64::from_polar(1.0, -2.0 * p * y / hbar))
                    .sum();
                let value = sum / (PI * hbar);
                worst = worst.max(value.im.abs());
                row.push(value.re);
            }
            (row, worst)
        })
        .collect();

    let residue = rows.iter().fold(0.0f64, |m, r| m.max(r.1));
    if residue >= IMAGINARY_TOLERANCE {
        return Err(Error::NumericalConsistency(format!(
            "Wigner transform left an imaginary residue of {residue:e}"
        )));
    }
    let values = rows.into_iter().flat_map(|r| r.0).collect();
    PhaseField::new(grid.clone(), values, FieldRole::Wigner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasegrid::{make_grid, Measure};

    fn natural_grid(n: usize, extent: f64) -> Arc<PhaseGrid> {
        make_grid(
            (-extent, extent),
            n,
            (-extent, extent),
            n,
            Measure::Plain,
            UnitSystem::natural(),
        )
        .unwrap()
    }

    /// Explicit series `sum_k (-1)^k C(n,k) x^k / k!`.
    fn laguerre_series(n: u32, x: f64) -> f64 {
        let mut binom = 1.0;
        let mut fact = 1.0;
        let mut sum = 0.0;
        for k in 0..=n {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
                fact *= k as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * binom * x.powi(k as i32) / fact;
        }
        sum
    }

    #[test]
    fn laguerre_low_orders() {
        for x in [-2.0, 0.0, 0.3, 7.5] {
            assert_eq!(laguerre(0, x), 1.0);
        }
        assert_eq!(laguerre(1, 2.0), -1.0);
        assert!((laguerre(2, 1.5) - (1.0 - 3.0 + 1.125)).abs() < 1e-15);
    }

    #[test]
    fn laguerre_matches_series() {
        assert!((laguerre(5, 3.7) - laguerre_series(5, 3.7)).abs() < 1e-12);
        for n in 0..12 {
            for x in [0.0, 0.5, 2.0, 6.0, 11.0] {
                let (a, b) = (laguerre(n, x), laguerre_series(n, x));
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "n={n} x={x}");
            }
        }
    }

    #[test]
    fn ground_state_is_normalized_gaussian() {
        let g = natural_grid(257, 6.0);
        let w = ho_eigenstate_wigner(0, (1.0, 0.0), &g).unwrap();
        assert_eq!(w.role(), FieldRole::Wigner);
        let (i, j) = (100, 180);
        let (q, p) = (g.q().nodes()[i], g.p().nodes()[j]);
        assert!((w.at(i, j) - (-q * q - p * p).exp() / PI).abs() < 1e-15);
        assert!((w.integrate() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn first_excited_state_dips_at_origin() {
        let g = natural_grid(129, 6.0);
        let w = ho_eigenstate_wigner(1, (1.0, 0.0), &g).unwrap();
        let min = w.values().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((w.at(64, 64) + 1.0 / PI).abs() < 1e-15);
        assert!((min + 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn scaled_state_is_composition() {
        let g = natural_grid(65, 6.0);
        let (b, bdot) = (2f64.sqrt(), 1.0 / 2f64.sqrt());
        let w = ho_eigenstate_wigner(0, (b, bdot), &g).unwrap();
        let u = UnitSystem::natural();
        let mut err: f64 = 0.0;
        for (i, &q) in g.q().nodes().iter().enumerate() {
            for (j, &p) in g.p().nodes().iter().enumerate() {
                let v = ho_wigner_value(0, &u, q / b, b * p - q * bdot);
                err = err.max((w.at(i, j) - v).abs());
            }
        }
        assert!(err < 1e-12);
    }

    #[test]
    fn nonpositive_b_is_a_domain_error() {
        let g = natural_grid(16, 6.0);
        assert!(matches!(
            ho_eigenstate_wigner(0, (0.0, 0.0), &g),
            Err(Error::Domain(_))
        ));
        let spec = GaussianSpec::paper_default(&UnitSystem::natural());
        assert!(gaussian_classical_density(&spec, (-1.0, 0.0), &g).is_err());
    }

    #[test]
    fn classical_gaussian_defaults() {
        let u = UnitSystem::natural();
        let spec = GaussianSpec::paper_default(&u);
        assert!((spec.sigma_q - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((spec.density(0.0, 0.0) - 2.0 / PI).abs() < 1e-14);
        let g = natural_grid(257, 6.0);
        let rho = gaussian_classical_density(&spec, (1.0, 0.0), &g).unwrap();
        assert!((rho.integrate() - 1.0).abs() < 1e-6);
        let wide = natural_grid(513, 20.0);
        let rho = gaussian_classical_density(&spec, (3.0, 1.2), &wide).unwrap();
        assert!((rho.integrate() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn classical_from_ground_state_is_normalized() {
        let g = natural_grid(257, 6.0);
        let w = ho_eigenstate_wigner(0, (1.0, 0.0), &g).unwrap();
        let rho = classical_from_wigner(&w).unwrap();
        assert_eq!(rho.role(), FieldRole::ClassicalDensity);
        assert!((rho.integrate() - 1.0).abs() < 1e-6);
        let spec = GaussianSpec::paper_default(&UnitSystem::natural());
        let direct = gaussian_classical_density(&spec, (1.0, 0.0), &g).unwrap();
        assert!(rho.zip_map(&direct, |a, b| a - b).max_abs() < 1e-14);

        let zero = PhaseField::zeros(&g, FieldRole::Wigner);
        assert_eq!(classical_from_wigner(&zero).unwrap().max_abs(), 0.0);
        assert!(classical_from_wigner(&rho).is_err());
    }

    #[test]
    fn sqrt_density_clamps_roundoff_only() {
        let g = natural_grid(16, 6.0);
        let mut v = vec![0.25; g.len()];
        v[7] = -1e-15;
        let rho = PhaseField::from_parts(g.clone(), v.clone(), FieldRole::ClassicalDensity);
        let s = sqrt_density(&rho).unwrap();
        assert_eq!(s.values()[7], 0.0);
        assert_eq!(s.values()[0], 0.5);
        v[7] = -1e-10;
        let rho = PhaseField::from_parts(g.clone(), v, FieldRole::ClassicalDensity);
        assert!(matches!(sqrt_density(&rho), Err(Error::Negativity { .. })));
        let w = ho_eigenstate_wigner(1, (1.0, 0.0), &g).unwrap();
        assert!(sqrt_density(&w).is_err());
    }

    #[test]
    fn sqrt_of_gaussian_has_doubled_variance() {
        let g = natural_grid(33, 5.0);
        let spec = GaussianSpec::new(0.8, 1.3, (0.0, 0.0)).unwrap();
        let rho = gaussian_classical_density(&spec, (1.0, 0.0), &g).unwrap();
        let s = sqrt_density(&rho).unwrap();
        let amp = 1.0 / (PI * 0.8 * 1.3f64).sqrt();
        for (i, &q) in g.q().nodes().iter().enumerate() {
            for (j, &p) in g.p().nodes().iter().enumerate() {
                let expect = amp * (-q * q / (2.0 * 0.64) - p * p / (2.0 * 1.69)).exp();
                assert!((s.at(i, j) - expect).abs() < 1e-15);
            }
        }
    }

    fn ho_wavefunction(n: u32, q: f64) -> Complex64 {
        let g = (-q * q / 2.0).exp() / PI.powf(0.25);
        let v = match n {
            0 => g,
            1 => 2f64.sqrt() * q * g,
            _ => unreachable!(),
        };
        Complex64::new(v, 0.0)
    }

    #[test]
    fn wigner_transform_reproduces_eigenstates() {
        // Grid q nodes coincide with wavefunction nodes (spacing 0.05).
        let psi0 =
            SampledWavefunction::from_fn(-12.0, 12.0, 481, |q| ho_wavefunction(0, q)).unwrap();
        let psi1 =
            SampledWavefunction::from_fn(-12.0, 12.0, 481, |q| ho_wavefunction(1, q)).unwrap();
        let g = natural_grid(61, 6.0);
        for (n, psi) in [(0, &psi0), (1, &psi1)] {
            let w = wigner_from_wavefunction(psi, &g).unwrap();
            let exact = ho_eigenstate_wigner(n, (1.0, 0.0), &g).unwrap();
            let err = w.zip_map(&exact, |a, b| a - b).max_abs();
            assert!(err < 1e-5, "n={n}: {err}");
            assert!((w.integrate() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn wigner_transform_of_moving_packet_is_normalized() {
        let psi = SampledWavefunction::from_fn(-12.0, 12.0, 481, |q| {
            let env = (-(q - 0.7) * (q - 0.7) / 1.2).exp();
            Complex64::from_polar(env, 1.3 * q)
        })
        .unwrap();
        let g = make_grid(
            (-6.0, 6.0),
            121,
            (-7.0, 7.0),
            141,
            Measure::Plain,
            UnitSystem::natural(),
        )
        .unwrap();
        let w = wigner_from_wavefunction(&psi, &g).unwrap();
        assert!((w.integrate() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn wigner_transform_rejects_narrow_support() {
        let psi = SampledWavefunction::from_fn(-3.0, 3.0, 121, |q| ho_wavefunction(0, q)).unwrap();
        let g = natural_grid(16, 6.0);
        assert!(matches!(
            wigner_from_wavefunction(&psi, &g),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn parity_of_eigenstates() {
        let g = natural_grid(41, 5.0);
        for n in 0..4 {
            let w = ho_eigenstate_wigner(n, (1.7, -0.4), &g).unwrap();
            let m = g.n_q() - 1;
            for i in 0..g.n_q() {
                for j in 0..g.n_p() {
                    let (a, b) = (w.at(i, j), w.at(m - i, m - j));
                    assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300), "{a} {b}");
                }
            }
        }
    }
}
