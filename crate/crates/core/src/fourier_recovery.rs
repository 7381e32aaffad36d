//! Recovery of `q(x)` from a noisy Fourier transform on a ball `|λ| <= λ₀`.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSamples {
    pub lambda_nodes: Vec<[f64; 3]>,
    pub values: Vec<Complex64>,
    pub delta: f64,
    #[serde(rename = "c1")]
    pub decay_c1: f64,
    #[serde(rename = "dtilde")]
    pub decay_dtilde: f64,
    /// Cartesian grid spacing; inferred from the nodes when absent.
    #[serde(default)]
    pub spacing: Option<f64>,
}

impl FourierSamples {
    pub fn validate(&self) -> Result<()> {
        check_dtilde(self.decay_dtilde)?;
        if self.lambda_nodes.len() != self.values.len() {
            return Err(Error::Schema(format!(
                "{} nodes but {} values",
                self.lambda_nodes.len(),
                self.values.len()
            )));
        }
        if !(self.delta >= 0.0) || !(self.decay_c1 > 0.0) {
            return Err(Error::Schema("need delta >= 0 and c1 > 0".into()));
        }
        Ok(())
    }

    /// Largest sampled `|λ|`.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_nodes.iter().map(norm).fold(0.0, f64::max)
    }

    pub fn grid_spacing(&self) -> Result<f64> {
        if let Some(h) = self.spacing {
            return Ok(h);
        }
        let mut h = f64::INFINITY;
        for l in &self.lambda_nodes {
            for c in l {
                if c.abs() > 1e-12 {
                    h = h.min(c.abs());
                }
            }
        }
        if h.is_finite() {
            Ok(h)
        } else {
            Err(Error::Schema("cannot infer grid spacing from the nodes".into()))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let s: Self = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    /// Adds the same complex offset `δ e^{iφ}` to every sample.
    pub fn with_constant_noise(&self, delta: f64, phase: f64) -> Self {
        let off = Complex64::from_polar(delta, phase);
        Self {
            values: self.values.iter().map(|v| v + off).collect(),
            delta,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub x_nodes: Vec<[f64; 3]>,
    pub q_values: Vec<f64>,
    /// `max |Im q_δ(x)|` over the nodes.
    pub imag_residue: f64,
    pub lambda0_used: f64,
    pub predicted_error: f64,
}

fn norm(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn check_dtilde(dtilde: f64) -> Result<()> {
    if !(dtilde > 1.5) {
        return Err(Error::Domain(format!("dtilde = {dtilde} must exceed 3/2")));
    }
    Ok(())
}

/// `λ₀(δ) = (c₁/δ)^{1/(2d̃)}`.
pub fn lambda0(delta: f64, c1: f64, dtilde: f64) -> Result<f64> {
    check_dtilde(dtilde)?;
    if !(delta > 0.0 && c1 > 0.0) {
        return Err(Error::Domain(format!("need delta > 0 and c1 > 0, got {delta}, {c1}")));
    }
    Ok((c1 / delta).powf(1.0 / (2.0 * dtilde)))
}

/// `δ λ₀³ / (6π²)`.
pub fn noise_term(delta: f64, lambda0: f64) -> f64 {
    delta * lambda0.powi(3) / (6.0 * PI * PI)
}

/// `c₁ λ₀^{3−2d̃} / (2π² (2d̃ − 3))`.
pub fn tail_term(c1: f64, dtilde: f64, lambda0: f64) -> f64 {
    c1 * lambda0.powf(3.0 - 2.0 * dtilde) / (2.0 * PI * PI * (2.0 * dtilde - 3.0))
}

/// `c₀ δ^{1−3/(2d̃)}` with `c₀ = [1/(6π²) + 1/(2π²(2d̃−3))] c₁^{3/(2d̃)}`.
pub fn error_bound(delta: f64, c1: f64, dtilde: f64) -> Result<f64> {
    check_dtilde(dtilde)?;
    let c0 = (1.0 / (6.0 * PI * PI) + 1.0 / (2.0 * PI * PI * (2.0 * dtilde - 3.0))) * c1.powf(3.0 / (2.0 * dtilde));
    Ok(c0 * delta.powf(1.0 - 3.0 / (2.0 * dtilde)))
}

/// Radius beyond which a `c₁|x|^{−d′}` tail drops under the noise:
/// `a = (c₁ c_sol / ((d′ − 3) δ))^{1/(d′−3)}`.
pub fn support_radius(delta: f64, c1: f64, d_prime: f64, c_sol: f64) -> Result<f64> {
    if !(d_prime > 3.0) {
        return Err(Error::Domain(format!("d' = {d_prime} must exceed 3")));
    }
    if !(delta > 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok((c1 * c_sol / ((d_prime - 3.0) * delta)).powf(1.0 / (d_prime - 3.0)))
}

/// Cartesian nodes `h·(i, j, k)` with `|λ| <= lambda_max`.
pub fn cartesian_lambda_grid(lambda_max: f64, spacing: f64) -> Result<Vec<[f64; 3]>> {
    if !(spacing > 0.0 && lambda_max >= 0.0) {
        return Err(Error::InvalidArgument("need spacing > 0 and lambda_max >= 0".into()));
    }
    let n = (lambda_max / spacing).floor() as i64;
    let mut out = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            for k in -n..=n {
                let l = [i as f64 * spacing, j as f64 * spacing, k as f64 * spacing];
                if norm(&l) <= lambda_max * (1.0 + 1e-12) {
                    out.push(l);
                }
            }
        }
    }
    Ok(out)
}

/// Largest spacing that resolves a support of radius `a`, `π/(4a)`.
pub fn nyquist_spacing(a: f64) -> f64 {
    PI / (4.0 * a)
}

/// `q_δ(x) = (2π)⁻³ Σ_{|λ|<=λ₀} h³ q̃_δ(λ) e^{iλ·x}`; returns the real part.
pub fn recover_q(
    samples: &FourierSamples,
    x_grid: &[[f64; 3]],
    lambda0_override: Option<f64>,
) -> Result<RecoveryResult> {
    samples.validate()?;
    let l0 = match lambda0_override {
        Some(l) => l,
        None => lambda0(samples.delta, samples.decay_c1, samples.decay_dtilde)?,
    };
    let h = samples.grid_spacing()?;
    // cells of width h around the nodes
    let sampled = samples.lambda_max() + 0.5 * h;
    if l0 > sampled * (1.0 + 1e-12) {
        return Err(Error::Coverage { lambda0: l0, sampled });
    }
    let w = h * h * h / (8.0 * PI * PI * PI);
    let active: Vec<(&[f64; 3], &Complex64)> = samples
        .lambda_nodes
        .iter()
        .zip(&samples.values)
        .filter(|(l, _)| norm(l) <= l0 * (1.0 + 1e-12))
        .collect();
    let vals: Vec<Complex64> = x_grid
        .par_iter()
        .map(|x| {
            active
                .iter()
                .map(|(l, v)| *v * Complex64::from_polar(1.0, l[0] * x[0] + l[1] * x[1] + l[2] * x[2]))
                .sum::<Complex64>()
                * w
        })
        .collect();
    let imag_residue = vals.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    Ok(RecoveryResult {
        x_nodes: x_grid.to_vec(),
        q_values: vals.iter().map(|v| v.re).collect(),
        imag_residue,
        lambda0_used: l0,
        predicted_error: noise_term(samples.delta, l0) + tail_term(samples.decay_c1, samples.decay_dtilde, l0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::Potential;
    use approx::assert_abs_diff_eq;

    fn well_samples(q0: f64, lmax: f64, h: f64) -> FourierSamples {
        let q = Potential::constant_well(q0, 1.0);
        let nodes = cartesian_lambda_grid(lmax, h).unwrap();
        let values = nodes.iter().map(|l| q.fourier_transform(l)).collect();
        FourierSamples {
            lambda_nodes: nodes,
            values,
            delta: 0.0,
            decay_c1: 1.0,
            decay_dtilde: 2.0,
            spacing: Some(h),
        }
    }

    #[test]
    fn lambda0_examples() {
        assert_abs_diff_eq!(lambda0(1e-4, 1.0, 2.0).unwrap(), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lambda0(0.3, 0.3, 5.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(lambda0(5e-5, 1.0, 2.0).unwrap() > lambda0(1e-4, 1.0, 2.0).unwrap());
        assert!(lambda0(1e-4, 1.0, 1.5).is_err());
    }

    #[test]
    fn error_bound_examples() {
        let c0 = error_bound(1.0, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(c0, 0.0675475, epsilon = 1e-7);
        assert_abs_diff_eq!(error_bound(1e-4, 1.0, 2.0).unwrap(), 6.7547e-3, epsilon = 1e-7);
        assert!(error_bound(1e-4, 2.0, 2.0).unwrap() > error_bound(1e-4, 1.0, 2.0).unwrap());
        // exponent tends to 1
        let r = error_bound(1e-4, 1.0, 1e6).unwrap() / error_bound(1e-3, 1.0, 1e6).unwrap();
        assert_abs_diff_eq!(r, 0.1, epsilon = 1e-4);
        assert!(error_bound(1e-4, 1.0, 1.0).is_err());
    }

    #[test]
    fn split_terms_sum_to_bound_at_lambda0() {
        for (d, c1, dt) in [(1e-3, 1.0, 2.0), (1e-6, 3.5, 2.7), (0.02, 0.4, 1.9)] {
            let l0 = lambda0(d, c1, dt).unwrap();
            let sum = noise_term(d, l0) + tail_term(c1, dt, l0);
            assert!((sum - error_bound(d, c1, dt).unwrap()).abs() < 1e-12 * sum);
        }
    }

    #[test]
    fn support_radius_examples() {
        assert_abs_diff_eq!(support_radius(1e-2, 1.0, 4.0, 1.0).unwrap(), 100.0, epsilon = 1e-9);
        assert!(support_radius(1e-8, 1.0, 4.0, 1.0).unwrap() > support_radius(1e-4, 1.0, 4.0, 1.0).unwrap());
        assert_eq!(support_radius(0.0, 1.0, 4.0, 1.0).unwrap(), f64::INFINITY);
        for d in [1e-4, 1e-6] {
            assert!(support_radius(d, 1.0, 6.0, 1.0).unwrap() < support_radius(d, 1.0, 4.0, 1.0).unwrap());
        }
        assert!(support_radius(1e-2, 1.0, 3.0, 1.0).is_err());
    }

    /// `(2/π)(Si(Λ) − sin Λ)`: the radial partial integral at the center of a unit well.
    fn center_partial_integral(cutoff: f64) -> f64 {
        let (x, w) = crate::directions::gauss_legendre(200);
        let si: f64 = x
            .iter()
            .zip(&w)
            .map(|(t, w)| {
                let u = 0.5 * cutoff * (t + 1.0);
                w * 0.5 * cutoff * if u == 0.0 { 1.0 } else { u.sin() / u }
            })
            .sum();
        2.0 / PI * (si - cutoff.sin())
    }

    #[test]
    fn constant_well_center_value() {
        let s = well_samples(1.0, 13.0, nyquist_spacing(1.0) / 2.0);
        for l0 in [10.0, 4.0 * PI] {
            let r = recover_q(&s, &[[0.0; 3]], Some(l0)).unwrap();
            let exact = center_partial_integral(l0);
            assert!(
                (r.q_values[0] - exact).abs() < 0.02,
                "{l0}: {} vs {exact}",
                r.q_values[0]
            );
            assert!(r.imag_residue <= 1e-10 * r.q_values[0].abs());
        }
        assert!((center_partial_integral(10.0) - 1.40212).abs() < 1e-4);
        assert!((center_partial_integral(4.0 * PI) - 1.0).abs() < 0.06);
    }

    #[test]
    fn zero_samples_and_coverage() {
        let mut s = well_samples(1.0, 4.0, 0.5);
        s.values.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let r = recover_q(&s, &[[0.1, 0.2, 0.0], [0.5, 0.0, 0.0]], Some(4.0)).unwrap();
        assert!(r.q_values.iter().all(|v| *v == 0.0));
        let e = recover_q(&s, &[[0.0; 3]], Some(4.3)).unwrap_err();
        assert_eq!(e.code(), "CoverageError");
    }

    #[test]
    fn translation_shifts_recovery() {
        let s = well_samples(-1.0, 6.0, 0.5);
        let x0 = [0.5, 0.0, -0.5];
        let shifted = FourierSamples {
            values: s
                .lambda_nodes
                .iter()
                .zip(&s.values)
                .map(|(l, v)| v * Complex64::from_polar(1.0, -(l[0] * x0[0] + l[1] * x0[1] + l[2] * x0[2])))
                .collect(),
            ..s.clone()
        };
        let xs = [[0.2, 0.1, 0.0], [-0.3, 0.4, 0.2]];
        let moved: Vec<[f64; 3]> = xs.iter().map(|x| [x[0] + x0[0], x[1] + x0[1], x[2] + x0[2]]).collect();
        let a = recover_q(&s, &xs, Some(6.0)).unwrap();
        let b = recover_q(&shifted, &moved, Some(6.0)).unwrap();
        for (u, v) in a.q_values.iter().zip(&b.q_values) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn predicted_error_recorded() {
        let s = well_samples(1.0, 12.0, 0.7).with_constant_noise(1e-4, 0.0);
        let r = recover_q(&s, &[[0.0; 3]], None).unwrap();
        assert_abs_diff_eq!(r.lambda0_used, 10.0, epsilon = 1e-12);
        assert!((r.predicted_error - error_bound(1e-4, 1.0, 2.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn samples_json_roundtrip() {
        let s = well_samples(1.0, 2.0, 0.5);
        let text = serde_json::to_string(&s).unwrap();
        assert!(text.contains("\"c1\"") && text.contains("\"dtilde\""));
        let back: FourierSamples = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let mut no_h = s.clone();
        no_h.spacing = None;
        assert_abs_diff_eq!(no_h.grid_spacing().unwrap(), 0.5, epsilon = 1e-15);
    }
}
