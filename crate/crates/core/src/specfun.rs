//! Spherical Bessel and Hankel functions, Legendre derivative polynomials and
//! spherical harmonics on the unit sphere and on the complex variety θ·θ = 1.
//!
//! Harmonics carry no Condon–Shortley phase:
//! `Y_lm(θ) = c_lm (θ1 + i sgn(m) θ2)^|m| d^|m| P_l(θ3) / dz^|m|`,
//! so `Y_{l,-m} = conj(Y_lm)` on real directions.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::directions::{bilinear_dot, ComplexDirection, RealDirection, M_TOLERANCE};
use crate::error::{Error, Result};

/// Degree/order pair with `|m| <= ell`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    pub ell: usize,
    pub m: i64,
}

impl HarmonicIndex {
    pub fn new(ell: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > ell {
            return Err(Error::InvalidArgument(format!("|m| = {} exceeds ell = {ell}", m.abs())));
        }
        Ok(Self { ell, m })
    }

    /// Flattened position `ell^2 + ell + m`.
    #[inline]
    pub fn flat(self) -> usize {
        ((self.ell * self.ell + self.ell) as i64 + self.m) as usize
    }

    pub fn from_flat(k: usize) -> Self {
        let ell = (k as f64).sqrt().floor() as usize;
        let ell = if (ell + 1) * (ell + 1) <= k {
            ell + 1
        } else if ell * ell > k {
            ell - 1
        } else {
            ell
        };
        let m = k as i64 - (ell * ell + ell) as i64;
        Self { ell, m }
    }

    /// All indices with degree at most `l`, in flattened order.
    pub fn up_to(l: usize) -> impl Iterator<Item = HarmonicIndex> {
        (0..crate::n_harmonics(l)).map(HarmonicIndex::from_flat)
    }
}

/// `j_l(r)` for a single degree.
pub fn sph_bessel_j(ell: usize, r: f64) -> f64 {
    sph_bessel_j_all(ell, r)[ell]
}

/// `j_0(r), ..., j_lmax(r)` by downward recurrence normalized on the closed forms.
pub fn sph_bessel_j_all(lmax: usize, r: f64) -> Vec<f64> {
    let mut out = vec![0.0; lmax + 1];
    if r == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if r < 1e-3 {
        // two-term series; the next correction is O(r^4)
        let mut lead = 1.0;
        for (l, o) in out.iter_mut().enumerate() {
            if l > 0 {
                lead *= r / (2 * l + 1) as f64;
            }
            *o = lead
                * (1.0 - r * r / (2.0 * (2 * l + 3) as f64) + r.powi(4) / (8.0 * ((2 * l + 3) * (2 * l + 5)) as f64));
        }
        return out;
    }
    let big = lmax.max(r.ceil() as usize);
    let start = big + 30 + (50.0 * big as f64).sqrt().ceil() as usize;
    let mut f_hi = 0.0_f64;
    let mut f = 1e-300_f64;
    for n in (1..=start).rev() {
        let f_lo = (2 * n + 1) as f64 / r * f - f_hi;
        f_hi = f;
        f = f_lo;
        if n - 1 <= lmax {
            out[n - 1] = f;
        }
        if f.abs() > 1e250 {
            f *= 1e-250;
            f_hi *= 1e-250;
            if n - 1 <= lmax {
                for o in out.iter_mut().skip(n - 1) {
                    *o *= 1e-250;
                }
            }
        }
    }
    let j0 = r.sin() / r;
    let j1 = r.sin() / (r * r) - r.cos() / r;
    let scale = if j0.abs() >= j1.abs() { j0 / f } else { j1 / f_hi };
    for o in out.iter_mut() {
        *o *= scale;
    }
    out
}

/// `y_0(r), ..., y_lmax(r)` by upward recurrence.
pub fn sph_bessel_y_all(lmax: usize, r: f64) -> Vec<f64> {
    let mut out = vec![0.0; lmax + 1];
    let (s, c) = r.sin_cos();
    out[0] = -c / r;
    if lmax >= 1 {
        out[1] = -c / (r * r) - s / r;
    }
    for n in 1..lmax {
        out[n + 1] = (2 * n + 1) as f64 / r * out[n] - out[n - 1];
    }
    out
}

/// Derivatives `j_l'(r)` for `l <= lmax`.
pub fn sph_bessel_j_deriv_all(lmax: usize, r: f64) -> Vec<f64> {
    let j = sph_bessel_j_all(lmax + 1, r);
    (0..=lmax)
        .map(|l| {
            if l == 0 {
                -j[1]
            } else if r == 0.0 {
                if l == 1 {
                    1.0 / 3.0
                } else {
                    0.0
                }
            } else {
                j[l - 1] - (l + 1) as f64 / r * j[l]
            }
        })
        .collect()
}

/// Derivatives `y_l'(r)` for `l <= lmax`.
pub fn sph_bessel_y_deriv_all(lmax: usize, r: f64) -> Vec<f64> {
    let y = sph_bessel_y_all(lmax + 1, r);
    (0..=lmax)
        .map(|l| {
            if l == 0 {
                -y[1]
            } else {
                y[l - 1] - (l + 1) as f64 / r * y[l]
            }
        })
        .collect()
}

/// `h_l(r) = i^{l+1} (j_l + i y_l)`, normalized so `h_l(r) ~ e^{ir}/r`.
pub fn sph_hankel_h(ell: usize, r: f64) -> Result<Complex64> {
    Ok(sph_hankel_h_all(ell, r)?[ell])
}

pub fn sph_hankel_h_all(lmax: usize, r: f64) -> Result<Vec<Complex64>> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("spherical Hankel function at r = {r}")));
    }
    let j = sph_bessel_j_all(lmax, r);
    let y = sph_bessel_y_all(lmax, r);
    let mut phase = Complex64::i();
    Ok((0..=lmax)
        .map(|l| {
            let v = phase * Complex64::new(j[l], y[l]);
            phase *= Complex64::i();
            v
        })
        .collect())
}

/// `i^l` without rounding error.
#[inline]
pub fn i_pow(l: usize) -> Complex64 {
    match l % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Legendre polynomials `P_0(x), ..., P_lmax(x)`.
pub fn legendre_p_all(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; lmax + 1];
    p[0] = 1.0;
    if lmax >= 1 {
        p[1] = x;
    }
    for l in 1..lmax {
        p[l + 1] = ((2 * l + 1) as f64 * x * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
    }
    p
}

/// `d^|m| P_l(z) / dz^|m|` at complex `z`.
pub fn legendre_derivative_poly(idx: HarmonicIndex, z: Complex64) -> Complex64 {
    let m = idx.m.unsigned_abs() as usize;
    let l = idx.ell;
    if m > l {
        return Complex64::new(0.0, 0.0);
    }
    let mut dmm = Complex64::new(1.0, 0.0);
    for k in 1..=m {
        dmm *= (2 * k - 1) as f64;
    }
    if l == m {
        return dmm;
    }
    let mut prev = dmm;
    let mut cur = z * (2 * m + 1) as f64 * dmm;
    for n in (m + 1)..l {
        let next = (z * (2 * n + 1) as f64 * cur - prev * (n + m) as f64) / (n - m + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully normalized `c_lm d^m P_l(z)/dz^m` for `0 <= m <= l <= lmax`, triangular layout.
fn normalized_legendre(lmax: usize, z: Complex64) -> Vec<Complex64> {
    let mut p = vec![Complex64::new(0.0, 0.0); tri(lmax, lmax) + 1];
    let mut pmm = Complex64::new(1.0 / (4.0 * PI).sqrt(), 0.0);
    for m in 0..=lmax {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        p[tri(m, m)] = pmm;
        if m < lmax {
            p[tri(m + 1, m)] = z * ((2 * m + 3) as f64).sqrt() * pmm;
        }
        for l in (m + 2)..=lmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[tri(l, m)] = (z * p[tri(l - 1, m)] - p[tri(l - 2, m)] * b) * a;
        }
    }
    p
}

/// All `Y_lm(v)` for `l <= lmax` at a complex 3-vector, flattened order.
///
/// Uses the polynomial form only, so it is the analytic continuation of the
/// real-sphere harmonics; no check of `v·v = 1` is made here.
pub fn sph_harm_all_vec(lmax: usize, v: &[Complex64; 3]) -> Vec<Complex64> {
    let p = normalized_legendre(lmax, v[2]);
    let plus = v[0] + Complex64::i() * v[1];
    let minus = v[0] - Complex64::i() * v[1];
    let mut pw_plus = vec![Complex64::new(1.0, 0.0); lmax + 1];
    let mut pw_minus = vec![Complex64::new(1.0, 0.0); lmax + 1];
    for m in 1..=lmax {
        pw_plus[m] = pw_plus[m - 1] * plus;
        pw_minus[m] = pw_minus[m - 1] * minus;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); crate::n_harmonics(lmax)];
    for l in 0..=lmax {
        let base = l * l + l;
        out[base] = p[tri(l, 0)];
        for m in 1..=l {
            let pl = p[tri(l, m)];
            out[base + m] = pl * pw_plus[m];
            out[base - m] = pl * pw_minus[m];
        }
    }
    out
}

/// All `Y_lm(alpha)` for `l <= lmax` on a real unit direction.
pub fn sph_harm_all(lmax: usize, dir: &RealDirection) -> Vec<Complex64> {
    sph_harm_all_vec(lmax, &dir.as_complex())
}

/// All `Y_lm(theta)` for `l <= lmax` on the complex variety.
pub fn sph_harm_all_complex(lmax: usize, theta: &ComplexDirection) -> Vec<Complex64> {
    sph_harm_all_vec(lmax, theta.components())
}

pub fn sph_harm(idx: HarmonicIndex, dir: &RealDirection) -> Complex64 {
    sph_harm_all(idx.ell, dir)[idx.flat()]
}

pub fn sph_harm_complex(idx: HarmonicIndex, theta: &ComplexDirection) -> Complex64 {
    sph_harm_all_complex(idx.ell, theta)[idx.flat()]
}

/// `Y_lm` at raw complex components, rejecting points off `θ·θ = 1`.
pub fn sph_harm_complex_checked(idx: HarmonicIndex, v: &[Complex64; 3]) -> Result<Complex64> {
    let res = (bilinear_dot(v, v) - 1.0).norm();
    let scale: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().max(1.0);
    if res > M_TOLERANCE * scale {
        return Err(Error::NotOnVariety {
            point: format!("{v:?}"),
            residual: res,
        });
    }
    Ok(sph_harm_all_vec(idx.ell, v)[idx.flat()])
}

/// Truncated expansion `sum_{l<=L} 4π i^l j_l(|x|) Y_l(x̂) conj(Y_l(alpha))`.
pub fn plane_wave_series(x: [f64; 3], alpha: &RealDirection, lmax: usize) -> Complex64 {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let xhat = if r > 0.0 {
        RealDirection::normalized(x).expect("nonzero vector")
    } else {
        RealDirection::e3()
    };
    let j = sph_bessel_j_all(lmax, r);
    let yx = sph_harm_all(lmax, &xhat);
    let ya = sph_harm_all(lmax, alpha);
    let mut sum = Complex64::new(0.0, 0.0);
    for l in 0..=lmax {
        let mut inner = Complex64::new(0.0, 0.0);
        for k in (l * l)..((l + 1) * (l + 1)) {
            inner += yx[k] * ya[k].conj();
        }
        sum += i_pow(l) * (4.0 * PI * j[l]) * inner;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::{make_real_dir, s2_quadrature};
    use approx::assert_abs_diff_eq;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn flat_index_roundtrip() {
        for k in 0..400 {
            let h = HarmonicIndex::from_flat(k);
            assert!(h.m.unsigned_abs() as usize <= h.ell);
            assert_eq!(h.flat(), k);
        }
        assert!(HarmonicIndex::new(2, 3).is_err());
    }

    #[test]
    fn bessel_spot_values() {
        assert_abs_diff_eq!(sph_bessel_j(0, 1.0), 1f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(sph_bessel_j(1, 1.0), 0.30116867893975674, epsilon = 1e-14);
        assert_eq!(sph_bessel_j(0, 0.0), 1.0);
        assert_eq!(sph_bessel_j(3, 0.0), 0.0);
    }

    // Ascending power series of j_l; accurate for moderate r.
    fn j_series(l: usize, r: f64) -> f64 {
        let mut dfact = 1.0;
        for k in 1..=l {
            dfact *= (2 * k + 1) as f64;
        }
        let mut term = r.powi(l as i32) / dfact;
        let mut sum = term;
        for k in 1..200 {
            term *= -r * r / (2.0 * k as f64 * (2 * l + 2 * k + 1) as f64);
            sum += term;
            if term.abs() < 1e-30 * sum.abs() {
                break;
            }
        }
        sum
    }

    #[test]
    fn bessel_matches_series() {
        for &r in &[0.0005, 0.01, 0.3, 1.0, 2.5, 4.0] {
            let all = sph_bessel_j_all(30, r);
            for l in 0..=30 {
                let s = j_series(l, r);
                assert!(
                    (all[l] - s).abs() <= 1e-13 * s.abs().max(1e-300),
                    "l={l} r={r}: {} vs {s}",
                    all[l]
                );
            }
        }
    }

    #[test]
    fn bessel_large_argument_wronskian() {
        // j_l y_{l-1} - j_{l-1} y_l = 1/r^2
        for &r in &[5.0, 17.3, 50.0] {
            let j = sph_bessel_j_all(64, r);
            let y = sph_bessel_y_all(64, r);
            for l in 1..=40 {
                let w = j[l] * y[l - 1] - j[l - 1] * y[l];
                assert!((w * r * r - 1.0).abs() < 1e-9, "l={l} r={r} w={w}");
            }
        }
    }

    #[test]
    fn hankel_normalization() {
        let h = sph_hankel_h(0, 2.0).unwrap();
        assert!(close(
            h,
            Complex64::new(-0.2080734182735712, 0.45464871341284085),
            1e-14
        ));
        // h_l(r) r e^{-ir} = 1 + i l(l+1)/(2r) + O(r^-2)
        for l in 0..=5 {
            for &r in &[100.0, 1e4] {
                let h = sph_hankel_h(l, r).unwrap();
                let ratio = h * r * Complex64::new(0.0, -r).exp();
                let lead = (l * (l + 1)) as f64 / (2.0 * r);
                assert!(
                    (ratio - Complex64::new(1.0, lead)).norm() < 2.0 * lead * lead + 1e-12,
                    "l={l}: {ratio}"
                );
                if r >= 1e4 || l == 0 {
                    assert!((ratio - 1.0).norm() < 1e-2, "l={l}: {ratio}");
                }
            }
        }
        assert!(sph_hankel_h(1, 0.0).is_err());
    }

    #[test]
    fn hankel_one_against_closed_form() {
        // h_1 = i^2 (j_1 + i y_1) with closed forms at r=1
        let r: f64 = 1.0;
        let j1 = r.sin() / (r * r) - r.cos() / r;
        let y1 = -r.cos() / (r * r) - r.sin() / r;
        let h = sph_hankel_h(1, r).unwrap();
        assert!(close(h, -Complex64::new(j1, y1), 1e-14));
    }

    #[test]
    fn legendre_derivative_examples() {
        let z = Complex64::new(0.3, 0.4);
        assert!(close(
            legendre_derivative_poly(HarmonicIndex { ell: 1, m: 0 }, z),
            z,
            1e-15
        ));
        assert!(close(
            legendre_derivative_poly(HarmonicIndex { ell: 2, m: 1 }, z),
            Complex64::new(0.9, 1.2),
            1e-14
        ));
        let p5 = |x: f64| legendre_p_all(5, x)[5];
        let h = 1e-3;
        let x = 0.7;
        let fd = (p5(x + h) - 2.0 * p5(x) + p5(x - h)) / (h * h);
        let d2 = legendre_derivative_poly(HarmonicIndex { ell: 5, m: 2 }, Complex64::new(x, 0.0));
        // second difference error is O(h^2 * P5'''') ~ 1e-5
        assert!((d2.re - fd).abs() < 1e-4, "{} vs {fd}", d2.re);
        // exact: P5'' = (315 x^3 - 105 x) / 2
        assert_abs_diff_eq!(d2.re, (315.0 * x * x * x - 105.0 * x) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn y21_direct_formula() {
        let (th, ph) = (PI / 3.0, PI / 4.0);
        let d = make_real_dir(th, ph);
        let c = (5.0 / (4.0 * PI) / 6.0).sqrt();
        let expect = Complex64::from_polar(c * 3.0 * th.cos() * th.sin(), ph);
        assert!(close(sph_harm(HarmonicIndex { ell: 2, m: 1 }, &d), expect, 1e-14));
        assert!(close(
            sph_harm(HarmonicIndex { ell: 0, m: 0 }, &d),
            Complex64::new(0.28209479177387814, 0.0),
            1e-15
        ));
    }

    #[test]
    fn gram_matrix_is_identity() {
        let q = s2_quadrature(20);
        let l = 8;
        let ys: Vec<Vec<Complex64>> = q.nodes.iter().map(|n| sph_harm_all(l, n)).collect();
        let nh = crate::n_harmonics(l);
        for a in 0..nh {
            for b in 0..nh {
                let g: Complex64 = ys.iter().zip(&q.weights).map(|(y, w)| y[a] * y[b].conj() * *w).sum();
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((g - e).norm() < 1e-10, "({a},{b}) {g}");
            }
        }
    }

    #[test]
    fn plane_wave_series_examples() {
        let alpha = make_real_dir(0.7, 1.9);
        assert!(close(
            plane_wave_series([0.0; 3], &alpha, 0),
            Complex64::new(1.0, 0.0),
            1e-14
        ));
        assert!(close(
            plane_wave_series([0.0; 3], &alpha, 7),
            Complex64::new(1.0, 0.0),
            1e-14
        ));
        let x: [f64; 3] = [1.2, -0.8, 1.3];
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let x2 = [x[0] * 2.0 / r, x[1] * 2.0 / r, x[2] * 2.0 / r];
        let a = alpha.as_array();
        let exact = Complex64::new(0.0, a[0] * x2[0] + a[1] * x2[1] + a[2] * x2[2]).exp();
        assert!(close(plane_wave_series(x2, &alpha, 20), exact, 1e-10));
        let s = plane_wave_series(x, &alpha, 0);
        assert!(close(s, Complex64::new(r.sin() / r, 0.0), 1e-14));
    }

    #[test]
    fn identity_on_complex_directions() {
        // ∫ e^{iθ·α r} Y_l(α) dα = 4π i^l j_l(r) Y_l(θ)
        use crate::directions::theta_pair;
        let q = s2_quadrature(30);
        let lmax = 8;
        let ys: Vec<Vec<Complex64>> = q.nodes.iter().map(|n| sph_harm_all(lmax, n)).collect();
        for &scale in &[1.2, 2.0, 3.0] {
            let pair = theta_pair([0.3, -0.2, 0.4], scale).unwrap();
            let th = pair.theta;
            let yt = sph_harm_all_complex(lmax, &th);
            for &r in &[1.0, 2.0] {
                let j = sph_bessel_j_all(lmax, r);
                for k in 0..crate::n_harmonics(lmax) {
                    let l = HarmonicIndex::from_flat(k).ell;
                    let lhs: Complex64 = q
                        .nodes
                        .iter()
                        .zip(&q.weights)
                        .zip(&ys)
                        .map(|((n, w), y)| {
                            let d = th.dot_real(n);
                            (Complex64::i() * d * r).exp() * y[k] * *w
                        })
                        .sum();
                    let rhs = i_pow(l) * 4.0 * PI * j[l] * yt[k];
                    assert!((lhs - rhs).norm() < 1e-8, "k={k} r={r} scale={scale}: {lhs} {rhs}");
                }
            }
        }
    }
}
