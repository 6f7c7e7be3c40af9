//! Distances and overlaps between phase-space states.
//!
//! The Wigner trace distance follows the grid measure. The classical metrics
//! always integrate with bare `dq dp`, whatever the grid flag says.

use crate::phasegrid::{FieldRole, Measure, PhaseField, UnitSystem};
use crate::states::{sqrt_density, GaussianSpec, Scaling};
use crate::Result;

/// Window within which a Bhattacharyya coefficient is snapped onto `[0, 1]`.
pub const BHATTACHARYYA_CLIP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    WignerTrace,
    ClassicalTrace,
    Bhattacharyya,
    Hellinger,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceSample {
    pub t: f64,
    pub value: f64,
    pub kind: DistanceKind,
}

fn check_pair(a: &PhaseField, b: &PhaseField, role: FieldRole) -> Result<()> {
    a.require_role(role)?;
    b.require_role(role)?;
    a.require_same_grid(b)
}

/// `int d^2Gamma |W_t - W_0|` under the grid measure.
pub fn wigner_trace_distance(w_t: &PhaseField, w_0: &PhaseField) -> Result<f64> {
    check_pair(w_t, w_0, FieldRole::Wigner)?;
    Ok(w_t.zip_map(w_0, |a, b| a - b).l1_norm())
}

/// `int dq dp |sqrt(rho_t) - sqrt(rho_0)|`.
pub fn classical_trace_distance(rho_t: &PhaseField, rho_0: &PhaseField) -> Result<f64> {
    check_pair(rho_t, rho_0, FieldRole::ClassicalDensity)?;
    let (a, b) = (sqrt_density(rho_t)?, sqrt_density(rho_0)?);
    Ok(a.zip_map(&b, |x, y| x - y).l1_norm_with(Measure::Plain))
}

/// `int dq dp sqrt(rho_t rho_0)`, snapped onto `[0, 1]` when within `1e-9`.
pub fn bhattacharyya(rho_t: &PhaseField, rho_0: &PhaseField) -> Result<f64> {
    check_pair(rho_t, rho_0, FieldRole::ClassicalDensity)?;
    let raw = bhattacharyya_raw(rho_t, rho_0);
    Ok(clip_unit(raw))
}

pub(crate) fn bhattacharyya_raw(rho_t: &PhaseField, rho_0: &PhaseField) -> f64 {
    rho_t
        .zip_map(rho_0, |a, b| (a.max(0.0) * b.max(0.0)).sqrt())
        .integrate_with(Measure::Plain)
}

fn clip_unit(x: f64) -> f64 {
    if x > 1.0 && x <= 1.0 + BHATTACHARYYA_CLIP {
        1.0
    } else if (-BHATTACHARYYA_CLIP..0.0).contains(&x) {
        0.0
    } else {
        x
    }
}

/// Closed-form overlap between a centered Gaussian and its scaled image:
/// `2 [(1 + b^2)^2 / b^2 + (m sigma_q b' / sigma_p)^2]^(-1/2)`.
pub fn bhattacharyya_analytic(scaling: Scaling, spec: &GaussianSpec, units: &UnitSystem) -> f64 {
    let Scaling { b, bdot } = scaling;
    let cross = units.mass * spec.sigma_q * bdot / spec.sigma_p;
    2.0 / ((1.0 + b * b).powi(2) / (b * b) + cross * cross).sqrt()
}

/// `sqrt(1/2 int dq dp (sqrt(rho_0) - sqrt(rho_t))^2)`.
pub fn hellinger(rho_t: &PhaseField, rho_0: &PhaseField) -> Result<f64> {
    check_pair(rho_t, rho_0, FieldRole::ClassicalDensity)?;
    let (a, b) = (sqrt_density(rho_t)?, sqrt_density(rho_0)?);
    let sq = a
        .zip_map(&b, |x, y| (x - y) * (x - y))
        .integrate_with(Measure::Plain);
    Ok((0.5 * sq).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasegrid::{make_grid, PhaseGrid};
    use crate::states::{classical_from_wigner, gaussian_classical_density, ho_eigenstate_wigner};
    use crate::Error;
    use proptest::prelude::*;
    use std::f64::consts::{E, PI};
    use std::sync::Arc;

    fn grid(n: usize, extent: f64, measure: Measure) -> Arc<PhaseGrid> {
        make_grid(
            (-extent, extent),
            n,
            (-extent, extent),
            n,
            measure,
            UnitSystem::natural(),
        )
        .unwrap()
    }

    #[test]
    fn identical_states() {
        let g = grid(128, 6.0, Measure::PaperGamma);
        let w = ho_eigenstate_wigner(0, (1.0, 0.0), &g).unwrap();
        let rho = classical_from_wigner(&w).unwrap();
        assert_eq!(wigner_trace_distance(&w, &w).unwrap(), 0.0);
        assert_eq!(classical_trace_distance(&rho, &rho).unwrap(), 0.0);
        assert_eq!(hellinger(&rho, &rho).unwrap(), 0.0);
        assert!((bhattacharyya(&rho, &rho).unwrap() - 1.0).abs() < 1e-6);
    }

    /// Radial integral `2 int_0^inf e^-s |1 - s| ds` (with `s = r^2`) by composite Simpson.
    fn radial_oracle() -> f64 {
        let simpson = |a: f64, b: f64, n: usize| {
            let h = (b - a) / n as f64;
            let f = |s: f64| 2.0 * (-s).exp() * (1.0 - s).abs();
            let mut acc = f(a) + f(b);
            for k in 1..n {
                acc += f(a + h * k as f64) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0
        };
        simpson(0.0, 1.0, 2000) + simpson(1.0, 60.0, 200_000)
    }

    #[test]
    fn orthogonal_eigenstates_distance() {
        let oracle = radial_oracle();
        assert!((oracle - 4.0 / E).abs() < 1e-10);
        let g = grid(512, 6.0, Measure::Plain);
        let w0 = ho_eigenstate_wigner(0, (1.0, 0.0), &g).unwrap();
        let w1 = ho_eigenstate_wigner(1, (1.0, 0.0), &g).unwrap();
        let d = wigner_trace_distance(&w1, &w0).unwrap();
        assert!((d - oracle).abs() < 1e-4, "{d}");
        let gamma = d * 2.0 * PI;
        let d_gamma = wigner_trace_distance(
            &w1.with_measure(Measure::PaperGamma),
            &w0.with_measure(Measure::PaperGamma),
        )
        .unwrap();
        assert!((d_gamma - gamma).abs() < 1e-10);
    }

    #[test]
    fn quench_bhattacharyya() {
        let u = UnitSystem::natural();
        let spec = GaussianSpec::paper_default(&u);
        let s = Scaling::new(2f64.sqrt(), 0.5f64.sqrt()).unwrap();
        let exact = 2.0 / 5f64.sqrt();
        assert!((bhattacharyya_analytic(s, &spec, &u) - exact).abs() < 1e-15);
        let g = make_grid((-10.0, 10.0), 401, (-6.0, 6.0), 241, Measure::Plain, u).unwrap();
        let rho0 = gaussian_classical_density(&spec, (1.0, 0.0), &g).unwrap();
        let rho1 = gaussian_classical_density(&spec, (s.b, s.bdot), &g).unwrap();
        let b = bhattacharyya(&rho1, &rho0).unwrap();
        assert!((b - exact).abs() < 1e-5, "{b}");
        let h = hellinger(&rho1, &rho0).unwrap();
        assert!((1.0 - h * h - b).abs() < 1e-10);
    }

    #[test]
    fn analytic_limits() {
        let u = UnitSystem::natural();
        let spec = GaussianSpec::paper_default(&u);
        assert!((bhattacharyya_analytic(Scaling::IDENTITY, &spec, &u) - 1.0).abs() < 1e-15);
        let far = bhattacharyya_analytic(Scaling::new(1e8, 1.0).unwrap(), &spec, &u);
        assert!(far < 1e-7);
    }

    #[test]
    fn general_widths_match_quadrature() {
        let u = UnitSystem::new(1.0, 1.7, 0.8).unwrap();
        let spec = GaussianSpec::new(0.9, 0.4, (0.0, 0.0)).unwrap();
        let s = Scaling::new(1.6, -0.7).unwrap();
        let g = make_grid((-9.0, 9.0), 601, (-6.0, 6.0), 601, Measure::Plain, u).unwrap();
        let rho0 = gaussian_classical_density(&spec, (1.0, 0.0), &g).unwrap();
        let rho1 = gaussian_classical_density(&spec, (s.b, s.bdot), &g).unwrap();
        let b = bhattacharyya(&rho1, &rho0).unwrap();
        assert!(
            (b - bhattacharyya_analytic(s, &spec, &u)).abs() < 1e-8,
            "{b}"
        );
    }

    fn boxes(g: &Arc<PhaseGrid>) -> (PhaseField, PhaseField) {
        let a = PhaseField::from_fn(g, FieldRole::ClassicalDensity, |q, p| {
            if (-4.0..-1.0).contains(&q) && p.abs() < 1.5 {
                1.0 / 9.0
            } else {
                0.0
            }
        })
        .unwrap();
        let b = PhaseField::from_fn(g, FieldRole::ClassicalDensity, |q, p| {
            if (1.0..4.0).contains(&q) && p.abs() < 1.5 {
                1.0 / 9.0
            } else {
                0.0
            }
        })
        .unwrap();
        (a, b)
    }

    #[test]
    fn disjoint_supports() {
        let g = grid(64, 6.0, Measure::PaperGamma);
        let (a, b) = boxes(&g);
        assert_eq!(bhattacharyya(&a, &b).unwrap(), 0.0);
        let sa = sqrt_density(&a).unwrap().integrate_with(Measure::Plain);
        let sb = sqrt_density(&b).unwrap().integrate_with(Measure::Plain);
        let t = classical_trace_distance(&a, &b).unwrap();
        assert!((t - (sa + sb)).abs() < 1e-12);
        let h = hellinger(&a, &b).unwrap();
        let na = a.integrate_with(Measure::Plain);
        let nb = b.integrate_with(Measure::Plain);
        assert!((h * h - 0.5 * (na + nb)).abs() < 1e-12);
    }

    #[test]
    fn role_and_grid_checks() {
        let g = grid(16, 6.0, Measure::Plain);
        let g2 = grid(18, 6.0, Measure::Plain);
        let w = ho_eigenstate_wigner(0, (1.0, 0.0), &g).unwrap();
        let w2 = ho_eigenstate_wigner(0, (1.0, 0.0), &g2).unwrap();
        assert_eq!(wigner_trace_distance(&w, &w2), Err(Error::GridMismatch));
        assert!(matches!(
            bhattacharyya(&w, &w),
            Err(Error::RoleMismatch { .. })
        ));
    }

    #[test]
    fn clipping_window() {
        assert_eq!(clip_unit(1.0 + 5e-10), 1.0);
        assert_eq!(clip_unit(-5e-10), 0.0);
        assert_eq!(clip_unit(1.1), 1.1);
        assert_eq!(clip_unit(0.3), 0.3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn metric_properties(
            b in 0.5f64..3.0,
            bdot in -1.5f64..1.5,
            sq in 0.4f64..1.2,
            sp in 0.4f64..1.2,
        ) {
            let u = UnitSystem::natural();
            let g = make_grid((-14.0, 14.0), 161, (-8.0, 8.0), 161, Measure::PaperGamma, u).unwrap();
            let spec = GaussianSpec::new(sq, sp, (0.0, 0.0)).unwrap();
            let r0 = gaussian_classical_density(&spec, (1.0, 0.0), &g).unwrap();
            let r1 = gaussian_classical_density(&spec, (b, bdot), &g).unwrap();
            let bc = bhattacharyya(&r1, &r0).unwrap();
            prop_assert_eq!(bc, bhattacharyya(&r0, &r1).unwrap());
            prop_assert!(bc <= 1.0 + 1e-9);
            let h = hellinger(&r1, &r0).unwrap();
            prop_assert!((h - hellinger(&r0, &r1).unwrap()).abs() < 1e-13);
            let n0 = r0.integrate_with(Measure::Plain);
            let n1 = r1.integrate_with(Measure::Plain);
            // B = 1 - H^2 exactly up to the normalization defects.
            prop_assert!((1.0 - h * h - bc - (1.0 - 0.5 * (n0 + n1))).abs() < 1e-12);
            let t = classical_trace_distance(&r1, &r0).unwrap();
            prop_assert!((t - classical_trace_distance(&r0, &r1).unwrap()).abs() < 1e-13);
            prop_assert_eq!(classical_trace_distance(&r1, &r1).unwrap(), 0.0);
        }
    }
}
