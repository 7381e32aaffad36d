use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::{
    legendre_p_all, sph_bessel_j_all, sph_bessel_j_deriv_all, sph_bessel_y_all, sph_bessel_y_deriv_all,
};

use super::{Potential, PotentialKind};

const ODE_START: f64 = 1e-6;
const ODE_RTOL: f64 = 1e-11;

/// `t_l = e^{iδ_l} sin δ_l` from the exterior matching of a log-derivative `β = R'/R` at `r = a`.
fn t_from_log_derivative(l: usize, a: f64, beta: f64) -> Complex64 {
    let j = sph_bessel_j_all(l, a)[l];
    let y = sph_bessel_y_all(l, a)[l];
    let dj = sph_bessel_j_deriv_all(l, a)[l];
    let dy = sph_bessel_y_deriv_all(l, a)[l];
    let num = dj - beta * j;
    let den = dy - beta * y;
    // tan δ = num / den, t = tan δ / (1 - i tan δ)
    Complex64::new(num, 0.0) / Complex64::new(den, -num)
}

/// Interior log-derivative for a constant well: `k′ j_l′(k′a) / j_l(k′a)`.
fn constant_well_log_derivative(l: usize, q0: f64, a: f64) -> Result<f64> {
    let k2 = 1.0 - q0;
    if k2 <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "constant well with q0 = {q0} >= 1 has no oscillatory interior at unit energy"
        )));
    }
    let k = k2.sqrt();
    let j = sph_bessel_j_all(l, k * a)[l];
    let dj = sph_bessel_j_deriv_all(l, k * a)[l];
    Ok(k * dj / j)
}

/// Adaptive Dormand–Prince integration of `u'' = (l(l+1)/r² + q(r) − 1) u`
/// from the regular start `u ∝ r^{l+1}`; returns `u'/u − 1/a` at `r = a`.
fn ode_log_derivative(l: usize, q: &Potential) -> Result<f64> {
    let a = q.support_radius_a;
    let ll = (l * (l + 1)) as f64;
    let f = |r: f64, y: [f64; 2]| -> [f64; 2] { [y[1], (ll / (r * r) + q.profile(r) - 1.0) * y[0]] };
    let mut r = ODE_START;
    let mut y = [1.0, (l + 1) as f64 / r];
    let mut h = r * 1e-2;
    let (c2, c3, c4, c5) = (1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0);
    let a21 = 1.0 / 5.0;
    let (a31, a32) = (3.0 / 40.0, 9.0 / 40.0);
    let (a41, a42, a43) = (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0);
    let (a51, a52, a53, a54) = (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0);
    let (a61, a62, a63, a64, a65) = (
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    );
    let (b1, b3, b4, b5, b6) = (
        35.0 / 384.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    );
    let (e1, e3, e4, e5, e6, e7) = (
        71.0 / 57600.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    );
    let mut steps = 0usize;
    while r < a {
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::SolverFailure(format!(
                "radial ODE for l = {l} did not reach r = a"
            )));
        }
        if r + h > a {
            h = a - r;
        }
        let add = |y: [f64; 2], ks: &[([f64; 2], f64)]| -> [f64; 2] {
            let mut out = y;
            for (k, c) in ks {
                out[0] += h * c * k[0];
                out[1] += h * c * k[1];
            }
            out
        };
        let k1 = f(r, y);
        let k2 = f(r + c2 * h, add(y, &[(k1, a21)]));
        let k3 = f(r + c3 * h, add(y, &[(k1, a31), (k2, a32)]));
        let k4 = f(r + c4 * h, add(y, &[(k1, a41), (k2, a42), (k3, a43)]));
        let k5 = f(r + c5 * h, add(y, &[(k1, a51), (k2, a52), (k3, a53), (k4, a54)]));
        let k6 = f(r + h, add(y, &[(k1, a61), (k2, a62), (k3, a63), (k4, a64), (k5, a65)]));
        let y_new = add(y, &[(k1, b1), (k3, b3), (k4, b4), (k5, b5), (k6, b6)]);
        let k7 = f(r + h, y_new);
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            let sc = ODE_RTOL * y[i].abs().max(y_new[i].abs()) + 1e-300;
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            r += h;
            y = y_new;
            let big = y[0].abs().max(y[1].abs() * r);
            if big > 1e100 {
                y = [y[0] * 1e-100, y[1] * 1e-100];
            }
        }
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= fac;
    }
    Ok(y[1] / y[0] - 1.0 / a)
}

/// Partial-wave coefficients `t_l = e^{iδ_l} sin δ_l`, `l = 0..=lmax`.
pub fn partial_wave_t(q: &Potential, lmax: usize) -> Result<Vec<Complex64>> {
    if !q.is_radial() {
        return Err(Error::InvalidArgument(
            "partial waves require a radial potential".into(),
        ));
    }
    let a = q.support_radius_a;
    (0..=lmax)
        .map(|l| {
            if q.is_zero() {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let beta = match q.kind {
                PotentialKind::ConstantWell { q0 } => constant_well_log_derivative(l, q0, a)?,
                _ => ode_log_derivative(l, q)?,
            };
            Ok(t_from_log_derivative(l, a, beta))
        })
        .collect()
}

/// Same as [`partial_wave_t`] but always integrating the radial equation.
pub fn partial_wave_t_ode(q: &Potential, lmax: usize) -> Result<Vec<Complex64>> {
    if !q.is_radial() {
        return Err(Error::InvalidArgument(
            "partial waves require a radial potential".into(),
        ));
    }
    (0..=lmax)
        .map(|l| Ok(t_from_log_derivative(l, q.support_radius_a, ode_log_derivative(l, q)?)))
        .collect()
}

/// Phase shifts `δ_l` in `(-π/2, π/2]`.
pub fn phase_shifts(q: &Potential, lmax: usize) -> Result<Vec<f64>> {
    Ok(partial_wave_t(q, lmax)?
        .iter()
        .map(|t| {
            // t = sin δ e^{iδ}: arg t = δ for sin δ > 0, δ + π otherwise
            if t.norm() == 0.0 {
                0.0
            } else {
                let d = t.arg();
                if d > std::f64::consts::FRAC_PI_2 {
                    d - std::f64::consts::PI
                } else {
                    d
                }
            }
        })
        .collect())
}

/// `Σ_{l<=L} (2l+1) t_l P_l(cos γ)`.
pub fn radial_partial_wave(q: &Potential, cos_gamma: f64, lmax: usize) -> Result<Complex64> {
    let t = partial_wave_t(q, lmax)?;
    Ok(partial_wave_sum(&t, cos_gamma))
}

pub fn partial_wave_sum(t: &[Complex64], cos_gamma: f64) -> Complex64 {
    let lmax = t.len().saturating_sub(1);
    let p = legendre_p_all(lmax, cos_gamma.clamp(-1.0, 1.0));
    t.iter().enumerate().map(|(l, t)| t * ((2 * l + 1) as f64 * p[l])).sum()
}
