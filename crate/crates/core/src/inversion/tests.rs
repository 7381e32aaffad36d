use super::*;
use crate::amplitude_data::{add_noise, harmonic_coefficients};
use crate::directions::{make_real_dir, s2_quadrature, ComplexDirection};
use crate::forward::{partial_wave_matrix, Potential};
use crate::specfun::sph_bessel_j;
use approx::assert_abs_diff_eq;
use std::f64::consts::PI;

fn sched() -> Schedules {
    Schedules::new(1.0, 1.5, 2.0).unwrap()
}

fn zero_coeffs(order: usize, l: usize) -> HarmonicCoefficients {
    let quad = s2_quadrature(order);
    let n = quad.len();
    let a = AmplitudeMatrix::new(1.0, quad, vec![Complex64::new(0.0, 0.0); n * n]).unwrap();
    harmonic_coefficients(&a, l).unwrap()
}

fn well_coeffs(order: usize, l: usize) -> HarmonicCoefficients {
    let q = Potential::constant_well(-1.0, 1.0);
    let a = partial_wave_matrix(&q, &s2_quadrature(order), order - 1).unwrap();
    harmonic_coefficients(&a, l).unwrap()
}

#[test]
fn zero_nu_gives_minus_one() {
    let g = annulus_grid(&sched(), 6, 8).unwrap();
    let c = zero_coeffs(6, 5);
    let th = ComplexDirection::from_real(&make_real_dir(0.3, 0.2));
    let rho = rho_field(&NuExpansion::zero(3), &th, &ExteriorData::full(&c), &g).unwrap();
    assert!(rho.iter().all(|v| (*v + 1.0).norm() < 1e-15));
    assert_abs_diff_eq!(g.norm(&rho), 4.40150, epsilon = 1e-5);
}

#[test]
fn single_column_projection() {
    let g = annulus_grid(&sched(), 6, 10).unwrap();
    let c = zero_coeffs(6, 5);
    let th = ComplexDirection::from_real(&make_real_dir(0.7, 1.1));
    let fit = minimize_nu(&th, 0, &ExteriorData::full(&c), &g, Ridge::Absolute(0.0)).unwrap();
    // Column e^{-iθ·x} √(4π) j₀(|x|); project 1 onto it.
    let mut gg = 0.0;
    let mut g1 = Complex64::new(0.0, 0.0);
    for (x, w) in g.nodes.iter().zip(&g.weights) {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let col = (-Complex64::i() * th.dot_point(x)).exp() * (4.0 * PI).sqrt() * sph_bessel_j(0, r);
        gg += col.norm_sqr() * w;
        g1 += col.conj() * w;
    }
    let one2: f64 = g.weights.iter().sum();
    let expected = (one2 - g1.norm_sqr() / gg).sqrt();
    assert_abs_diff_eq!(fit.residual, expected, epsilon = 1e-10);
}

#[test]
fn residual_nonincreasing_in_l_nu() {
    let g = annulus_grid(&sched(), 6, 12).unwrap();
    let c = zero_coeffs(10, 5);
    let th = ComplexDirection::from_real(&make_real_dir(0.4, 2.0));
    let data = ExteriorData::full(&c);
    let mut prev = f64::INFINITY;
    for l in 0..=8 {
        let r = minimize_nu(&th, l, &data, &g, Ridge::Absolute(0.0)).unwrap().residual;
        assert!(r <= prev + 1e-12, "L = {l}: {r} > {prev}");
        prev = r;
    }
}

#[test]
fn series_and_direct_rho_agree() {
    let g = annulus_grid(&sched(), 3, 6).unwrap();
    let c = well_coeffs(14, 12);
    let pair = theta_pair([0.3, -0.2, 0.5], 2.0).unwrap();
    let nu = NuExpansion {
        l_nu: 4,
        coeffs: (0..25)
            .map(|k| Complex64::new((k as f64).sin(), 0.1 * k as f64))
            .collect(),
    };
    let data = ExteriorData::full(&c);
    let a = rho_field(&nu, &pair.theta, &data, &g).unwrap();
    let b = rho_field_direct(&nu, &pair.theta, &data, &g).unwrap();
    let d = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(d < 1e-10, "{d}");
}

#[test]
fn affine_in_nu() {
    let g = annulus_grid(&sched(), 4, 6).unwrap();
    let c = well_coeffs(10, 8);
    let pair = theta_pair([0.0, 0.5, 0.5], 3.0).unwrap();
    let data = ExteriorData::full(&c);
    let n1 = NuExpansion {
        l_nu: 2,
        coeffs: (0..9).map(|k| Complex64::new(k as f64, 1.0)).collect(),
    };
    let n2 = NuExpansion {
        l_nu: 2,
        coeffs: (0..9).map(|k| Complex64::new(-1.0, (k as f64).cos())).collect(),
    };
    let t = 0.3;
    let mix = NuExpansion {
        l_nu: 2,
        coeffs: n1
            .coeffs
            .iter()
            .zip(&n2.coeffs)
            .map(|(a, b)| a * t + b * (1.0 - t))
            .collect(),
    };
    let r1 = rho_field(&n1, &pair.theta, &data, &g).unwrap();
    let r2 = rho_field(&n2, &pair.theta, &data, &g).unwrap();
    let rm = rho_field(&mix, &pair.theta, &data, &g).unwrap();
    for i in 0..g.len() {
        let e = r1[i] * t + r2[i] * (1.0 - t);
        assert!((rm[i] - e).norm() < 1e-9 * (1.0 + e.norm()));
    }
}

#[test]
fn q_hat_pairing_matches_node_sum_and_is_linear() {
    let g = annulus_grid(&sched(), 3, 6).unwrap();
    let c = well_coeffs(12, 10);
    let pair = theta_pair([0.4, 0.1, -0.3], 2.5).unwrap();
    let setup = InversionSetup::new(ExteriorData::full(&c), &g, 5, Ridge::default()).unwrap();
    let fit = setup.fit(&pair).unwrap();
    for l_a in [3, 6, 10] {
        let lit = q_hat(&c, &pair, &fit.nu, l_a).unwrap();
        let pf = setup.basis.q_hat(&pair.theta_prime, &fit.nu, l_a);
        assert!((lit - pf).norm() < 1e-9 * lit.norm().max(1.0), "{lit} vs {pf}");
    }
    let k = Complex64::new(-2.0, 0.5);
    let a = q_hat(&c, &pair, &fit.nu.scaled(k), 8).unwrap();
    let b = q_hat(&c, &pair, &fit.nu, 8).unwrap() * k;
    assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
    let z = zero_coeffs(12, 10);
    assert_eq!(q_hat(&z, &pair, &fit.nu, 10).unwrap(), Complex64::new(0.0, 0.0));
}

#[test]
fn recorded_residual_matches_reevaluation() {
    let g = annulus_grid(&sched(), 4, 8).unwrap();
    let c = well_coeffs(10, 8);
    let pair = theta_pair([0.2, 0.2, 0.2], 2.0).unwrap();
    let data = ExteriorData::full(&c);
    let fit = minimize_nu(&pair.theta, 6, &data, &g, Ridge::default()).unwrap();
    let again = g.norm(&rho_field(&fit.nu, &pair.theta, &data, &g).unwrap());
    assert!((fit.residual - again).abs() < 1e-10);
}

#[test]
fn zero_potential_inverts_to_zero() {
    let g = annulus_grid(&sched(), 4, 8).unwrap();
    let c = zero_coeffs(10, 8);
    let lams = [[0.0, 0.0, 0.0], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]];
    let res = invert_exact(&c, &lams, &g, &[1.5, 2.0, 3.0], 6, Ridge::default(), None).unwrap();
    for r in &res {
        assert_eq!(r.flag, None);
        assert!(r.q_hat.unwrap().norm() < 1e-12);
    }
}

#[test]
fn unreachable_constant_is_flagged() {
    let g = annulus_grid(&sched(), 4, 8).unwrap();
    let c = zero_coeffs(10, 8);
    let res = invert_exact(&c, &[[0.0, 0.0, 0.5]], &g, &[2.0, 3.0], 4, Ridge::default(), Some(0.0)).unwrap();
    assert_eq!(res[0].q_hat, None);
    assert_eq!(res[0].flag.as_deref(), Some("NoFeasibleTheta"));
}

#[test]
fn noisy_selection_terminates_and_rechecks() {
    let g = annulus_grid(&sched(), 4, 8).unwrap();
    let quad = s2_quadrature(8);
    let n = quad.len();
    let a = AmplitudeMatrix::new(1.0, quad, vec![Complex64::new(0.0, 0.0); n * n]).unwrap();
    let an = add_noise(&a, 1e-3, 7).unwrap();
    let c = harmonic_coefficients(&an, 4).unwrap();
    let setup = InversionSetup::new(ExteriorData::full(&c), &g, 6, Ridge::default()).unwrap();
    let s = sched();
    let sel = setup
        .select_theta_noisy(1e-3, [0.0, 0.3, 0.4], &s, &[3.0, 2.0, 1.0, 0.5], 1e6)
        .unwrap();
    assert!(sel.constraint_value <= sel.c_constant / sel.theta_of_delta.theta_norm());
    let err = setup
        .select_theta_noisy(1e-3, [0.0, 0.3, 0.4], &s, &[3.0, 2.0], 1e-9)
        .unwrap_err();
    assert_eq!(err.code(), "NoFeasibleTheta");
    assert!(setup.select_theta_noisy(1e-3, [0.0; 3], &s, &[1.0, 2.0], 1.0).is_err());
}

#[test]
fn alt_method_picks_grid_minimum() {
    let g = annulus_grid(&sched(), 4, 8).unwrap();
    let c = well_coeffs(10, 6);
    let out = alt_method(
        &c,
        1e-3,
        [0.3, 0.0, 0.3],
        &sched(),
        &g,
        &[3.0, 2.0, 1.0],
        6,
        Ridge::default(),
    )
    .unwrap();
    assert_eq!(out.trace.len(), 3);
    let min = out.trace.iter().map(|t| t.h).fold(f64::INFINITY, f64::min);
    assert_eq!(out.omega, min);
    assert!((out.result.kappa() - out.trace.iter().find(|t| t.h == min).unwrap().kappa).abs() < 1e-12);
}

#[test]
fn bound_examples() {
    let s = sched();
    assert_abs_diff_eq!(theta_lower_bound(1e-6, &s).unwrap(), 0.02873, epsilon = 1e-5);
    assert_abs_diff_eq!(theorem_c_bound(1e-6, 2.0).unwrap(), 15.204, epsilon = 1e-3);
    let wider = Schedules::new(1.0, 1.8, 2.0).unwrap();
    assert!(theta_lower_bound(1e-6, &wider).unwrap() > theta_lower_bound(1e-6, &s).unwrap());
    assert!(theta_lower_bound(1e-300, &s).unwrap() > theta_lower_bound(1e-6, &s).unwrap());
    assert_abs_diff_eq!(
        theorem_c_bound(1e-6, 4.0).unwrap(),
        2.0 * theorem_c_bound(1e-6, 2.0).unwrap(),
        epsilon = 1e-12
    );
    assert!(theorem_c_bound(1e-8, 2.0).unwrap() < theorem_c_bound(1e-6, 2.0).unwrap());
    assert!(theta_lower_bound(0.5, &s).is_err());
    assert!(theorem_c_bound(0.0, 2.0).is_err());
}

#[test]
fn kappa_scale_roundtrip() {
    let lam = [0.3, -0.4, 1.0];
    let p = theta_pair(lam, scale_for_kappa(lam, 4.0)).unwrap();
    assert_abs_diff_eq!(p.kappa(), 4.0, epsilon = 1e-10);
    assert_eq!(default_l_nu_exact(2.0, 1.0), 6);
    assert_eq!(default_l_nu_exact(2.0, 40.0), 24);
    assert_eq!(default_l_nu_noisy(1e-3).unwrap(), 8);
}
