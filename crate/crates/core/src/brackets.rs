//! Polynomial Hamiltonians, Poisson brackets and the truncated Moyal bracket.
//!
//! Derivatives of the Hamiltonian are exact (polynomial differentiation);
//! derivatives of the state use the fourth-order stencils of
//! [`PhaseField::partial_q`] and [`PhaseField::partial_p`].
//!
//! Both brackets are oriented as the generator of motion, `df/dt = {H, f}`:
//!
//! ```text
//! {H, f}   = H_q f_p - H_p f_q
//! {{H, f}} = {H, f} - hbar^2/24 (H_qqq f_ppp - 3 H_qqp f_qpp + 3 H_qpp f_qqp - H_ppp f_qqq) + O(hbar^4)
//! ```

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::phasegrid::{sample, FieldRole, PhaseField, PhaseGrid};
use crate::{Error, Result};

/// Largest total degree `a + b` of a Hamiltonian monomial.
pub const MAX_DEGREE: u32 = 6;

pub type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Monomial `c(t) q^a p^b`.
#[derive(Clone)]
pub struct HamiltonianTerm {
    coeff: Coefficient,
    q_pow: u32,
    p_pow: u32,
}

impl HamiltonianTerm {
    pub fn q_pow(&self) -> u32 {
        self.q_pow
    }

    pub fn p_pow(&self) -> u32 {
        self.p_pow
    }

    pub fn coefficient(&self, t: f64) -> f64 {
        (self.coeff)(t)
    }
}

impl fmt::Debug for HamiltonianTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c(t) q^{} p^{}", self.q_pow, self.p_pow)
    }
}

/// Polynomial in `(q, p)` with time-dependent coefficients.
#[derive(Clone, Debug, Default)]
pub struct HamiltonianSpec {
    terms: Vec<HamiltonianTerm>,
}

/// `d^k/dx^k x^n` as `(falling factorial, remaining power)`.
fn differentiate(n: u32, k: u32) -> Option<(f64, u32)> {
    if k > n {
        return None;
    }
    let factor = ((n - k + 1)..=n).fold(1.0, |acc, m| acc * m as f64);
    Some((factor, n - k))
}

impl HamiltonianSpec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append `c(t) q^a p^b`.
    pub fn with_term<F>(mut self, coeff: F, q_pow: u32, p_pow: u32) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if q_pow + p_pow > MAX_DEGREE {
            return Err(Error::UnsupportedDegree(q_pow + p_pow));
        }
        self.terms.push(HamiltonianTerm {
            coeff: Arc::new(coeff),
            q_pow,
            p_pow,
        });
        Ok(self)
    }

    /// `p^2 / 2m + m omega(t)^2 q^2 / 2`.
    pub fn harmonic<F>(mass: f64, omega: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let kinetic = 0.5 / mass;
        Self::new()
            .with_term(move |_| kinetic, 0, 2)
            .and_then(|h| {
                h.with_term(
                    move |t| {
                        let w = omega(t);
                        0.5 * mass * w * w
                    },
                    2,
                    0,
                )
            })
            .expect("quadratic terms are within the supported degree")
    }

    pub fn terms(&self) -> &[HamiltonianTerm] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.q_pow + t.p_pow)
            .max()
            .unwrap_or(0)
    }

    /// Every term depends on `q` alone or on `p` alone.
    pub fn is_separable(&self) -> bool {
        self.terms.iter().all(|t| t.q_pow == 0 || t.p_pow == 0)
    }

    /// True when `d_q^a d_p^b H` vanishes identically (structurally).
    pub fn partial_vanishes(&self, dq_order: u32, dp_order: u32) -> bool {
        self.terms
            .iter()
            .all(|t| dq_order > t.q_pow || dp_order > t.p_pow)
    }

    pub fn eval(&self, t: f64, q: f64, p: f64) -> f64 {
        self.partial_at(t, 0, 0, q, p)
    }

    /// `d_q^a d_p^b H (t, q, p)`.
    pub fn partial_at(&self, t: f64, dq_order: u32, dp_order: u32, q: f64, p: f64) -> f64 {
        self.terms
            .iter()
            .filter_map(|term| {
                let (fq, nq) = differentiate(term.q_pow, dq_order)?;
                let (fp, np) = differentiate(term.p_pow, dp_order)?;
                Some(term.coefficient(t) * fq * fp * q.powi(nq as i32) * p.powi(np as i32))
            })
            .sum()
    }

    /// `d_q^a d_p^b H` at time `t` as `(coefficient, q power, p power)` triples.
    pub(crate) fn monomials(&self, t: f64, dq_order: u32, dp_order: u32) -> Vec<Monomial> {
        self.terms
            .iter()
            .filter_map(|term| {
                let (fq, nq) = differentiate(term.q_pow, dq_order)?;
                let (fp, np) = differentiate(term.p_pow, dp_order)?;
                Some((term.coefficient(t) * fq * fp, nq as i32, np as i32))
            })
            .collect()
    }

    fn partial_fn(&self, t: f64, dq_order: u32, dp_order: u32) -> impl Fn(f64, f64) -> f64 + Sync {
        let monomials = self.monomials(t, dq_order, dp_order);
        move |q: f64, p: f64| eval_monomials(&monomials, q, p)
    }
}

pub(crate) type Monomial = (f64, i32, i32);

#[inline]
pub(crate) fn eval_monomials(monomials: &[Monomial], q: f64, p: f64) -> f64 {
    monomials
        .iter()
        .map(|&(c, nq, np)| c * q.powi(nq) * p.powi(np))
        .sum()
}

/// Exact `d_q^a d_p^b H` at every node of `grid`.
pub fn h_partial(
    h: &HamiltonianSpec,
    t: f64,
    dq_order: u32,
    dp_order: u32,
    grid: &Arc<PhaseGrid>,
) -> PhaseField {
    let f = h.partial_fn(t, dq_order, dp_order);
    PhaseField::from_parts(grid.clone(), sample(grid, f), FieldRole::Generic)
}

/// `{H, f} = H_q f_p - H_p f_q`, the rate `df/dt` under Hamiltonian flow.
pub fn poisson_bracket(h: &HamiltonianSpec, t: f64, f: &PhaseField) -> PhaseField {
    let grid = f.grid();
    let hq = h.partial_fn(t, 1, 0);
    let hp = h.partial_fn(t, 0, 1);
    let fq = f.partial_q();
    let fp = f.partial_p();
    let n_p = grid.n_p();
    let ps = grid.p().nodes();
    let mut values = vec![0.0; grid.len()];
    values
        .par_chunks_mut(n_p)
        .zip(grid.q().nodes().par_iter())
        .enumerate()
        .for_each(|(i, (row, &q))| {
            let base = i * n_p;
            for (j, (slot, &p)) in row.iter_mut().zip(ps).enumerate() {
                *slot = hq(q, p) * fp.values()[base + j] - hp(q, p) * fq.values()[base + j];
            }
        });
    PhaseField::from_parts(grid.clone(), values, FieldRole::Generic)
}

/// Truncation order of the Moyal bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MoyalOrder {
    /// Poisson bracket only.
    Hbar0,
    /// Poisson bracket plus the `hbar^2` sine-series term.
    #[default]
    Hbar2,
}

/// The `hbar^2` term of `{{H, f}}`, or `None` when every third derivative of
/// `H` vanishes identically (quadratic Hamiltonians).
pub fn moyal_correction(h: &HamiltonianSpec, t: f64, f: &PhaseField) -> Result<Option<PhaseField>> {
    let degree = h.degree();
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    // (H derivative orders, f derivative orders, weight)
    #[allow(clippy::type_complexity)]
    const TERMS: [((u32, u32), (u32, u32), f64); 4] = [
        ((3, 0), (0, 3), 1.0),
        ((2, 1), (1, 2), -3.0),
        ((1, 2), (2, 1), 3.0),
        ((0, 3), (3, 0), -1.0),
    ];
    let active: Vec<_> = TERMS
        .iter()
        .filter(|(hd, _, _)| !h.partial_vanishes(hd.0, hd.1))
        .collect();
    if active.is_empty() {
        return Ok(None);
    }
    let grid = f.grid();
    let hbar = grid.units().hbar;
    let scale = -hbar * hbar / 24.0;
    let mut acc = PhaseField::zeros(grid, FieldRole::Generic);
    for &&((ha, hb), (fa, fb), weight) in &active {
        let mut df = f.clone();
        for _ in 0..fa {
            df = df.partial_q();
        }
        for _ in 0..fb {
            df = df.partial_p();
        }
        let hd = h_partial(h, t, ha, hb, grid);
        let term = hd.zip_map(&df, |a, b| a * b);
        acc = acc.zip_map(&term, |a, b| a + scale * weight * b);
    }
    Ok(Some(acc))
}

/// Moyal bracket `{{H, f}}` truncated at the requested order.
pub fn moyal_bracket(
    h: &HamiltonianSpec,
    t: f64,
    f: &PhaseField,
    order: MoyalOrder,
) -> Result<PhaseField> {
    let poisson = poisson_bracket(h, t, f);
    match order {
        MoyalOrder::Hbar0 => Ok(poisson),
        MoyalOrder::Hbar2 => match moyal_correction(h, t, f)? {
            Some(c) => Ok(poisson.zip_map(&c, |a, b| a + b)),
            None => Ok(poisson),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasegrid::{make_grid, Measure, UnitSystem};
    use crate::states::ho_eigenstate_wigner;

    fn grid(n: usize, extent: f64) -> Arc<PhaseGrid> {
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

    fn gaussian(g: &Arc<PhaseGrid>) -> PhaseField {
        PhaseField::from_fn(g, FieldRole::Generic, |q, p| {
            (-(q - 0.4).powi(2) - 0.8 * p * p).exp()
        })
        .unwrap()
    }

    #[test]
    fn oscillator_partials() {
        let h = HamiltonianSpec::harmonic(2.0, |t| 1.0 + t);
        let g = grid(16, 4.0);
        let t = 0.5;
        let hq = h_partial(&h, t, 1, 0, &g);
        let hp = h_partial(&h, t, 0, 1, &g);
        let hqqq = h_partial(&h, t, 3, 0, &g);
        for (i, &q) in g.q().nodes().iter().enumerate() {
            for (j, &p) in g.p().nodes().iter().enumerate() {
                assert!((hq.at(i, j) - 2.0 * 1.5 * 1.5 * q).abs() < 1e-13);
                assert!((hp.at(i, j) - p / 2.0).abs() < 1e-15);
            }
        }
        assert_eq!(hqqq.max_abs(), 0.0);
        assert!(h.partial_vanishes(3, 0));
        assert!(h.is_separable());
        assert_eq!(h.degree(), 2);
    }

    #[test]
    fn degree_limit() {
        assert!(matches!(
            HamiltonianSpec::new().with_term(|_| 1.0, 4, 3),
            Err(Error::UnsupportedDegree(7))
        ));
        assert!(HamiltonianSpec::new().with_term(|_| 1.0, 3, 3).is_ok());
    }

    #[test]
    fn bracket_of_constant_vanishes() {
        let g = grid(32, 5.0);
        let h = HamiltonianSpec::harmonic(1.0, |_| 1.0);
        let f = PhaseField::from_fn(&g, FieldRole::Generic, |_, _| 2.0).unwrap();
        assert!(poisson_bracket(&h, 0.0, &f).max_abs() < 1e-12);
        let zero = PhaseField::zeros(&g, FieldRole::Generic);
        let m = moyal_bracket(&h, 0.0, &zero, MoyalOrder::Hbar2).unwrap();
        assert_eq!(m.max_abs(), 0.0);
    }

    #[test]
    fn free_particle_transport() {
        let g = grid(201, 6.0);
        let h = HamiltonianSpec::new().with_term(|_| 0.5, 0, 2).unwrap();
        let f = gaussian(&g);
        let pb = poisson_bracket(&h, 0.0, &f);
        let mut err: f64 = 0.0;
        for (i, &q) in g.q().nodes().iter().enumerate() {
            for (j, &p) in g.p().nodes().iter().enumerate() {
                let e = (-(q - 0.4).powi(2) - 0.8 * p * p).exp();
                // -(p/m) df/dq
                let expect = -p * (-2.0 * (q - 0.4) * e);
                err = err.max((pb.at(i, j) - expect).abs());
            }
        }
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn eigenstates_are_stationary() {
        let g = grid(1024, 6.0);
        let h = HamiltonianSpec::harmonic(1.0, |_| 1.0);
        for n in 0..3 {
            let w = ho_eigenstate_wigner(n, (1.0, 0.0), &g).unwrap();
            let l1 = poisson_bracket(&h, 0.0, &w).l1_norm();
            assert!(l1 < 1e-6, "n={n}: {l1}");
        }
    }

    #[test]
    fn orientation_rotates_clockwise() {
        // q' = p, p' = -q for the unit oscillator: a blob at (1, 0) starts
        // moving toward p < 0.
        let g = grid(201, 5.0);
        let h = HamiltonianSpec::harmonic(1.0, |_| 1.0);
        let f = PhaseField::from_fn(&g, FieldRole::Generic, |q, p| {
            (-(q - 1.0).powi(2) - p * p).exp()
        })
        .unwrap();
        let rate = poisson_bracket(&h, 0.0, &f);
        let first_moment_p: f64 = rate
            .zip_map(
                &PhaseField::from_fn(&g, FieldRole::Generic, |_, p| p).unwrap(),
                |a, b| a * b,
            )
            .integrate();
        assert!(first_moment_p < -0.1, "{first_moment_p}");
    }

    #[test]
    fn antisymmetry_on_polynomial_fields() {
        // {H, f} for f = q^2 p computed with f as a field vs. as a polynomial.
        let g = grid(41, 2.0);
        let h = HamiltonianSpec::harmonic(1.3, |_| 0.7);
        let f_poly = HamiltonianSpec::new().with_term(|_| 1.0, 2, 1).unwrap();
        let f_field = h_partial(&f_poly, 0.0, 0, 0, &g);
        let h_field = h_partial(&h, 0.0, 0, 0, &g);
        let a = poisson_bracket(&h, 0.0, &f_field);
        let b = poisson_bracket(&f_poly, 0.0, &h_field);
        let diff = a.zip_map(&b, |x, y| x + y).max_abs();
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn leibniz_rule() {
        let g = grid(321, 6.0);
        let h = HamiltonianSpec::harmonic(1.0, |_| 1.2);
        let f = gaussian(&g);
        let k = PhaseField::from_fn(&g, FieldRole::Generic, |q, p| {
            (-0.5 * q * q - (p + 0.3).powi(2)).exp()
        })
        .unwrap();
        let fk = f.zip_map(&k, |a, b| a * b);
        let lhs = poisson_bracket(&h, 0.0, &fk);
        let rhs = poisson_bracket(&h, 0.0, &f)
            .zip_map(&k, |a, b| a * b)
            .zip_map(
                &poisson_bracket(&h, 0.0, &k).zip_map(&f, |a, b| a * b),
                |a, b| a + b,
            );
        let diff = lhs.zip_map(&rhs, |a, b| a - b).max_abs();
        assert!(diff < 1e-5, "{diff}");
    }

    #[test]
    fn quadratic_moyal_equals_poisson() {
        let g = grid(64, 5.0);
        let h = HamiltonianSpec::harmonic(0.8, |t| 2.0 - t)
            .with_term(|t| 0.1 * t, 1, 1)
            .unwrap();
        let f = gaussian(&g);
        let p = poisson_bracket(&h, 0.3, &f);
        let m = moyal_bracket(&h, 0.3, &f, MoyalOrder::Hbar2).unwrap();
        assert!(p.zip_map(&m, |a, b| a - b).max_abs() < 1e-12);
    }

    #[test]
    fn quartic_correction_matches_symbolic() {
        let lambda = 0.3;
        let g = grid(241, 6.0);
        let h = HamiltonianSpec::harmonic(1.0, |_| 1.0)
            .with_term(move |_| lambda, 4, 0)
            .unwrap();
        let f = PhaseField::from_fn(&g, FieldRole::Generic, |q, p| (-q * q - p * p).exp()).unwrap();
        let corr = moyal_correction(&h, 0.0, &f).unwrap().unwrap();
        let mut err: f64 = 0.0;
        for (i, &q) in g.q().nodes().iter().enumerate() {
            for (j, &p) in g.p().nodes().iter().enumerate() {
                // d^3/dp^3 exp(-p^2) = (-8p^3 + 12p) exp(-p^2)
                let fppp = (-8.0 * p.powi(3) + 12.0 * p) * (-q * q - p * p).exp();
                let expect = -lambda * q * fppp;
                err = err.max((corr.at(i, j) - expect).abs());
            }
        }
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn liouville_conserves_trace() {
        let g = grid(201, 7.0);
        let h = HamiltonianSpec::harmonic(1.0, |_| 0.6)
            .with_term(|_| 0.05, 4, 0)
            .unwrap();
        let f = gaussian(&g);
        let total = poisson_bracket(&h, 0.0, &f).integrate();
        assert!(total.abs() < 1e-8, "{total}");
    }
}
