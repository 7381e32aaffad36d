//! Amplitude matrices on sphere quadrature nodes, harmonic coefficient
//! transforms, bounded noise, truncation schedules and the data-driven
//! exterior field.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::directions::{ComplexDirection, RealDirection, SphereQuadrature};
use crate::error::{Error, Result};
use crate::forward::exterior_field;
use crate::n_harmonics;
use crate::specfun::{sph_harm_all, sph_harm_all_complex};

/// `A[p][j] = A(α′_p, α_j)` on the nodes of one quadrature, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMatrix {
    pub a: f64,
    pub quad: SphereQuadrature,
    pub entries: Vec<Complex64>,
    pub delta: f64,
    pub seed: Option<u64>,
}

impl AmplitudeMatrix {
    pub fn new(a: f64, quad: SphereQuadrature, entries: Vec<Complex64>) -> Result<Self> {
        let n = quad.len();
        if entries.len() != n * n {
            return Err(Error::Schema(format!(
                "{} entries for {n} quadrature nodes (expected {})",
                entries.len(),
                n * n
            )));
        }
        Ok(Self {
            a,
            quad,
            entries,
            delta: 0.0,
            seed: None,
        })
    }

    pub fn n(&self) -> usize {
        self.quad.len()
    }

    #[inline]
    pub fn get(&self, p: usize, j: usize) -> Complex64 {
        self.entries[p * self.n() + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `sup |self − other|` entrywise.
    pub fn sup_distance(&self, other: &AmplitudeMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(0.0, |m, (x, y)| m.max((x - y).norm()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(&AmplitudeFile::from(self))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: AmplitudeFile =
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        file.try_into()
    }
}

/// On-disk layout of an amplitude matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct AmplitudeFile {
    k: f64,
    a: f64,
    order: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    entries: Vec<[f64; 2]>,
    delta: f64,
    seed: Option<u64>,
}

impl From<&AmplitudeMatrix> for AmplitudeFile {
    fn from(m: &AmplitudeMatrix) -> Self {
        Self {
            k: 1.0,
            a: m.a,
            order: m.quad.order,
            nodes: m.quad.nodes.iter().map(|n| n.as_array()).collect(),
            weights: m.quad.weights.clone(),
            entries: m.entries.iter().map(|c| [c.re, c.im]).collect(),
            delta: m.delta,
            seed: m.seed,
        }
    }
}

impl TryFrom<AmplitudeFile> for AmplitudeMatrix {
    type Error = Error;
    fn try_from(f: AmplitudeFile) -> Result<Self> {
        if f.k != 1.0 {
            return Err(Error::Schema(format!("energy k = {} (only k = 1 is supported)", f.k)));
        }
        if f.nodes.len() != f.weights.len() {
            return Err(Error::Schema(format!(
                "{} nodes but {} weights",
                f.nodes.len(),
                f.weights.len()
            )));
        }
        if !(f.delta >= 0.0) {
            return Err(Error::Schema(format!("delta = {}", f.delta)));
        }
        let nodes = f
            .nodes
            .into_iter()
            .map(|v| RealDirection::new(v).map_err(|e| Error::Schema(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let quad = SphereQuadrature {
            order: f.order,
            nodes,
            weights: f.weights,
        };
        let entries = f.entries.into_iter().map(|[re, im]| Complex64::new(re, im)).collect();
        let mut m = AmplitudeMatrix::new(f.a, quad, entries)?;
        m.delta = f.delta;
        m.seed = f.seed;
        Ok(m)
    }
}

/// Adds independent noise drawn uniformly from the disk of radius `δ(1 − 1e-9)`.
pub fn add_noise(a: &AmplitudeMatrix, delta: f64, seed: u64) -> Result<AmplitudeMatrix> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise level delta = {delta} must be positive"
        )));
    }
    if a.delta != 0.0 {
        return Err(Error::InvalidArgument("noise must be added to exact data".into()));
    }
    let radius = delta * (1.0 - 1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = a
        .entries
        .iter()
        .map(|v| {
            let r = radius * rng.random::<f64>().sqrt();
            let phi = 2.0 * PI * rng.random::<f64>();
            v + Complex64::from_polar(r, phi)
        })
        .collect();
    Ok(AmplitudeMatrix {
        a: a.a,
        quad: a.quad.clone(),
        entries,
        delta,
        seed: Some(seed),
    })
}

/// `A_lm(α_j) = Σ_p w_p A[p][j] conj(Y_lm(α′_p))`, stored `[k][j]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    pub l_max: usize,
    pub coeffs: Vec<Complex64>,
    pub quad: SphereQuadrature,
    pub a: f64,
    pub delta: f64,
}

impl HarmonicCoefficients {
    pub fn n_in(&self) -> usize {
        self.quad.len()
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> Complex64 {
        self.coeffs[k * self.n_in() + j]
    }

    /// Coefficients for incident node `j`, degrees `<= l`.
    pub fn column(&self, j: usize, l: usize) -> Vec<Complex64> {
        let l = l.min(self.l_max);
        (0..n_harmonics(l)).map(|k| self.get(k, j)).collect()
    }

    /// `sup_j |A_lm(α_j)|` for each degree `l`, maximized over `m`.
    pub fn sup_per_degree(&self) -> Vec<f64> {
        (0..=self.l_max)
            .map(|l| {
                let mut s: f64 = 0.0;
                for k in (l * l)..((l + 1) * (l + 1)) {
                    for j in 0..self.n_in() {
                        s = s.max(self.get(k, j).norm());
                    }
                }
                s
            })
            .collect()
    }

    /// Copy restricted to degrees `<= l`.
    pub fn truncated(&self, l: usize) -> Self {
        let l = l.min(self.l_max);
        let n = self.n_in();
        Self {
            l_max: l,
            coeffs: self.coeffs[..n_harmonics(l) * n].to_vec(),
            quad: self.quad.clone(),
            a: self.a,
            delta: self.delta,
        }
    }

    /// Largest degree whose sup coefficient stands above `floor`.
    pub fn noise_floor_degree(&self, floor: f64) -> usize {
        let sup = self.sup_per_degree();
        sup.iter().rposition(|s| *s > floor).unwrap_or(0)
    }
}

pub fn harmonic_coefficients(a: &AmplitudeMatrix, l: usize) -> Result<HarmonicCoefficients> {
    let max = a.quad.max_harmonic_degree();
    if l > max {
        return Err(Error::Aliasing {
            degree: l,
            order: a.quad.order,
            max,
        });
    }
    let n = a.n();
    let nh = n_harmonics(l);
    let ys: Vec<Vec<Complex64>> = a.quad.nodes.iter().map(|d| sph_harm_all(l, d)).collect();
    let rows: Vec<Vec<Complex64>> = (0..nh)
        .into_par_iter()
        .map(|k| {
            (0..n)
                .map(|j| {
                    let mut s = Complex64::new(0.0, 0.0);
                    for p in 0..n {
                        s += a.entries[p * n + j] * ys[p][k].conj() * a.quad.weights[p];
                    }
                    s
                })
                .collect()
        })
        .collect();
    Ok(HarmonicCoefficients {
        l_max: l,
        coeffs: rows.concat(),
        quad: a.quad.clone(),
        a: a.a,
        delta: a.delta,
    })
}

/// Radii and `γ = ln(a₁/a)` for the annulus `a < a₁ < |x| < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedules {
    pub a: f64,
    pub a1: f64,
    pub b: f64,
}

impl Schedules {
    pub fn new(a: f64, a1: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a < a1 && a1 < b && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < a < a1 < b, got a={a}, a1={a1}, b={b}"
            )));
        }
        Ok(Self { a, a1, b })
    }

    pub fn gamma(&self) -> f64 {
        (self.a1 / self.a).ln()
    }

    /// `ln(a₁/(a√2))`, the variant rate.
    pub fn gamma1(&self) -> f64 {
        (self.a1 / (self.a * 2f64.sqrt())).ln()
    }
}

fn check_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < (-1.0f64).exp()) {
        return Err(Error::Domain(format!("delta = {delta} must lie in (0, 1/e)")));
    }
    Ok(delta.ln().abs())
}

/// Nearest integer to `|ln δ| / ln|ln δ|`, ties away from zero.
pub fn truncation_n(delta: f64) -> Result<usize> {
    let l = check_delta(delta)?;
    Ok((l / l.ln()).round() as usize)
}

/// `μ(δ) = exp(−γ N(δ))`.
pub fn mu(delta: f64, s: &Schedules) -> Result<f64> {
    Ok((-s.gamma() * truncation_n(delta)? as f64).exp())
}

/// `exp(−γ₁ N(δ))` with `γ₁ = ln(a₁/(a√2))`.
pub fn mu1(delta: f64, s: &Schedules) -> Result<f64> {
    Ok((-s.gamma1() * truncation_n(delta)? as f64).exp())
}

/// Result of a complex-direction evaluation of the data series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEval {
    pub value: Complex64,
    pub degree_used: usize,
    pub converged: bool,
}

/// `Σ_{l<=L} A_l(α_j) Y_l(θ′)`.
pub fn eval_a_complex(
    coeffs: &HarmonicCoefficients,
    theta_prime: &ComplexDirection,
    j: usize,
    l: usize,
) -> Result<Complex64> {
    if l > coeffs.l_max {
        return Err(Error::InvalidArgument(format!(
            "degree {l} exceeds stored {}",
            coeffs.l_max
        )));
    }
    let y = sph_harm_all_complex(l, theta_prime);
    Ok(y.iter().enumerate().map(|(k, y)| coeffs.get(k, j) * y).sum())
}

/// Adaptive evaluation: stops after three consecutive degree blocks below
/// `1e-8` of the running sum; caps at the stored degree (at most 64).
pub fn eval_a_complex_adaptive(coeffs: &HarmonicCoefficients, theta_prime: &ComplexDirection, j: usize) -> SeriesEval {
    let cap = coeffs.l_max.min(64);
    let y = sph_harm_all_complex(cap, theta_prime);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut small = 0;
    for l in 0..=cap {
        let mut block = Complex64::new(0.0, 0.0);
        for k in (l * l)..((l + 1) * (l + 1)) {
            block += coeffs.get(k, j) * y[k];
        }
        sum += block;
        if block.norm() <= 1e-8 * sum.norm() {
            small += 1;
            if small == 3 {
                return SeriesEval {
                    value: sum,
                    degree_used: l,
                    converged: true,
                };
            }
        } else {
            small = 0;
        }
    }
    SeriesEval {
        value: sum,
        degree_used: cap,
        converged: false,
    }
}

/// Majorant tail `e^{κr} Σ_{l>L} sqrt(2l+1) (a/r)^{(2l+1)/2}` (up to a constant).
pub fn majorant_tail(l: usize, kappa: f64, a: f64, r: f64) -> f64 {
    let q = a / r;
    let mut s = 0.0;
    for ll in (l + 1)..(l + 2000) {
        let t = ((2 * ll + 1) as f64).sqrt() * q.powf((2 * ll + 1) as f64 / 2.0);
        s += t;
        if t < 1e-30 * s {
            break;
        }
    }
    (kappa * r).exp() * s
}

/// Truncated exterior field `e^{iα_j·x} + Σ_{l<=N} A_l(α_j) Y_l(x̂) h_l(|x|)`.
pub fn u_delta(coeffs: &HarmonicCoefficients, x: &[f64; 3], j: usize, n: usize) -> Result<Complex64> {
    if n > coeffs.l_max {
        return Err(Error::InvalidArgument(format!(
            "degree {n} exceeds stored {}",
            coeffs.l_max
        )));
    }
    exterior_field(&coeffs.column(j, n), &coeffs.quad.nodes[j], x, coeffs.a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::s2_quadrature;
    use crate::specfun::{sph_harm, HarmonicIndex};
    use approx::assert_abs_diff_eq;

    fn synthetic(order: usize, f: impl Fn(&RealDirection, &RealDirection) -> Complex64) -> AmplitudeMatrix {
        let q = s2_quadrature(order);
        let mut e = Vec::new();
        for p in &q.nodes {
            for j in &q.nodes {
                e.push(f(p, j));
            }
        }
        AmplitudeMatrix::new(1.0, q, e).unwrap()
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncation_n(1e-3).unwrap(), 4);
        assert_eq!(truncation_n(1e-6).unwrap(), 5);
        assert_eq!(truncation_n(0.1).unwrap(), 3);
        assert_eq!(truncation_n(1e-2).unwrap(), 3);
        assert_eq!(truncation_n(1e-4).unwrap(), 4);
        assert!(truncation_n(0.5).is_err());
        assert!(truncation_n(0.0).is_err());
    }

    #[test]
    fn mu_examples() {
        let s = Schedules::new(1.0, 1.5, 2.0).unwrap();
        assert_abs_diff_eq!(mu(1e-6, &s).unwrap(), 0.131687, epsilon = 1e-6);
        let near = Schedules::new(1.0, 1.0 + 1e-12, 2.0).unwrap();
        assert_abs_diff_eq!(mu(1e-3, &near).unwrap(), 1.0, epsilon = 1e-10);
        let seq: Vec<f64> = [1e-2, 1e-4, 1e-6, 1e-8].iter().map(|d| mu(*d, &s).unwrap()).collect();
        for w in seq.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(Schedules::new(1.0, 0.9, 2.0).is_err());
    }

    #[test]
    fn noise_is_bounded_and_deterministic() {
        let m = synthetic(50, |_, _| Complex64::new(0.0, 0.0));
        let a = add_noise(&m, 1e-2, 7).unwrap();
        let b = add_noise(&m, 1e-2, 7).unwrap();
        assert_eq!(a, b);
        let sup = a.sup_distance(&m);
        assert!(a.entries.len() >= 10_000);
        assert!(sup < 1e-2 && sup > 0.5e-2, "{sup}");
        let tiny = add_noise(&m, 1e-300, 1).unwrap();
        assert!(tiny.sup_distance(&m) < 1e-299);
        assert!(add_noise(&m, 0.0, 1).is_err());
        assert!(add_noise(&a, 1e-3, 1).is_err());
    }

    #[test]
    fn coefficients_pick_out_single_harmonic() {
        let idx = HarmonicIndex::new(2, 1).unwrap();
        let g = |d: &RealDirection| Complex64::new(d.as_array()[0], 1.0 + d.as_array()[2]);
        let m = synthetic(8, |p, j| sph_harm(idx, p) * g(j));
        let c = harmonic_coefficients(&m, 6).unwrap();
        for k in 0..n_harmonics(6) {
            for j in 0..m.n() {
                let expect = if k == idx.flat() {
                    g(&m.quad.nodes[j])
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((c.get(k, j) - expect).norm() < 1e-10);
            }
        }
        assert!(matches!(harmonic_coefficients(&m, 8), Err(Error::Aliasing { .. })));
        let z = synthetic(4, |_, _| Complex64::new(0.0, 0.0));
        assert!(harmonic_coefficients(&z, 3)
            .unwrap()
            .coeffs
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn save_load_roundtrip() {
        let m = synthetic(3, |p, j| Complex64::new(p.dot(&j.as_array()), 1.0 / 3.0));
        let noisy = add_noise(&m, 1e-3, 99).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("amp.json");
        noisy.save(&path).unwrap();
        let back = AmplitudeMatrix::load(&path).unwrap();
        assert_eq!(back, noisy);
        assert_eq!(back.seed, Some(99));
        assert_eq!(back.delta, 1e-3);

        let text = std::fs::read_to_string(&path).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["entries"].as_array_mut().unwrap().pop();
        std::fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(AmplitudeMatrix::load(&path), Err(Error::Schema(_))));
    }

    #[test]
    fn majorant_halves_beyond_two_kappa() {
        let (kappa, a, r) = (2.0, 1.0, 2.0);
        let t: Vec<f64> = (0..40).map(|l| majorant_tail(l, kappa, a, r)).collect();
        for l in 4..39 {
            let ratio = t[l + 1] / t[l];
            assert!(ratio > 0.45 && ratio < 0.56, "l={l}: {ratio}");
        }
        let first_small = (0..40).find(|&l| t[l] < 1e-6 * t[0]).unwrap();
        assert!(first_small <= 30);
    }

    #[test]
    fn zero_coefficients_give_incident_wave() {
        let m = synthetic(4, |_, _| Complex64::new(0.0, 0.0));
        let c = harmonic_coefficients(&m, 3).unwrap();
        let x = [0.3, 1.4, -0.9];
        let v = u_delta(&c, &x, 5, 3).unwrap();
        assert!((v - Complex64::from_polar(1.0, m.quad.nodes[5].dot(&x))).norm() < 1e-15);
        assert!(u_delta(&c, &[0.1, 0.0, 0.0], 0, 3).is_err());
        let th = ComplexDirection::from_real(&m.quad.nodes[2]);
        assert_eq!(eval_a_complex(&c, &th, 1, 3).unwrap(), Complex64::new(0.0, 0.0));
    }
}
