use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::amplitude_data::{u_delta, HarmonicCoefficients};
use crate::directions::{ComplexDirection, RealDirection, ThetaPair};
use crate::error::{Error, Result};
use crate::linalg;
use crate::n_harmonics;
use crate::specfun::{i_pow, sph_bessel_j_all, sph_hankel_h_all, sph_harm_all, sph_harm_all_complex, HarmonicIndex};

use super::AnnulusGrid;

/// Pivot threshold of the least-squares factorization, relative to the largest pivot.
pub const RANK_RCOND: f64 = 1e-13;

/// `ν(α) = Σ ν_lm Y_lm(α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuExpansion {
    pub l_nu: usize,
    pub coeffs: Vec<Complex64>,
}

impl NuExpansion {
    pub fn zero(l_nu: usize) -> Self {
        Self {
            l_nu,
            coeffs: vec![Complex64::new(0.0, 0.0); n_harmonics(l_nu)],
        }
    }

    /// `a(ν) = ||ν||_{L²(S²)}`.
    pub fn a_nu(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn eval(&self, alpha: &RealDirection) -> Complex64 {
        sph_harm_all(self.l_nu, alpha)
            .iter()
            .zip(&self.coeffs)
            .map(|(y, c)| y * c)
            .sum()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            l_nu: self.l_nu,
            coeffs: self.coeffs.iter().map(|v| v * c).collect(),
        }
    }
}

/// Exterior data: harmonic coefficients used to degree `degree` in the field
/// `u(x, α_j) = e^{iα_j·x} + Σ_{l<=degree} A_l(α_j) Y_l(x̂) h_l(|x|)`.
#[derive(Debug, Clone, Copy)]
pub struct ExteriorData<'a> {
    pub coeffs: &'a HarmonicCoefficients,
    pub degree: usize,
}

impl<'a> ExteriorData<'a> {
    pub fn new(coeffs: &'a HarmonicCoefficients, degree: usize) -> Result<Self> {
        if degree > coeffs.l_max {
            return Err(Error::InvalidArgument(format!(
                "data degree {degree} exceeds stored degree {}",
                coeffs.l_max
            )));
        }
        Ok(Self { coeffs, degree })
    }

    pub fn full(coeffs: &'a HarmonicCoefficients) -> Self {
        Self {
            coeffs,
            degree: coeffs.l_max,
        }
    }
}

/// `B[L][L′] = Σ_j w_j A_L(α_j) Y_L′(α_j)` for `L <= degree`, `L′ <= l_nu`.
pub(crate) fn pairing_matrix(data: &ExteriorData<'_>, l_nu: usize) -> Vec<Complex64> {
    let c = data.coeffs;
    let nl = n_harmonics(data.degree);
    let np = n_harmonics(l_nu);
    let ys: Vec<Vec<Complex64>> = c.quad.nodes.iter().map(|d| sph_harm_all(l_nu, d)).collect();
    let mut b = vec![Complex64::new(0.0, 0.0); nl * np];
    for (j, (y, w)) in ys.iter().zip(&c.quad.weights).enumerate() {
        for l in 0..nl {
            let a = c.get(l, j) * *w;
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row = &mut b[l * np..(l + 1) * np];
            for (r, yv) in row.iter_mut().zip(y) {
                *r += a * yv;
            }
        }
    }
    b
}

/// θ-independent part of the design matrix:
/// `F[x][L′] = ∫ u(x, α) Y_L′(α) dα = 4π i^l′ j_l′(r) Y_L′(x̂) + Σ_L h_l(r) Y_L(x̂) B[L][L′]`.
#[derive(Debug, Clone)]
pub struct DesignBasis {
    pub l_nu: usize,
    pub degree: usize,
    base: Vec<Complex64>,
    b: Vec<Complex64>,
    rows: usize,
}

impl DesignBasis {
    pub fn new(data: &ExteriorData<'_>, grid: &AnnulusGrid, l_nu: usize) -> Result<Self> {
        let max = data.coeffs.quad.max_harmonic_degree();
        if l_nu > max {
            return Err(Error::Aliasing {
                degree: l_nu,
                order: data.coeffs.quad.order,
                max,
            });
        }
        let np = n_harmonics(l_nu);
        let nl = n_harmonics(data.degree);
        let lmax = l_nu.max(data.degree);
        let b = pairing_matrix(data, l_nu);
        let ydirs: Vec<Vec<Complex64>> = grid.dirs.nodes.iter().map(|d| sph_harm_all(lmax, d)).collect();
        let ns = grid.dirs.len();
        let rows = grid.len();
        let mut base = vec![Complex64::new(0.0, 0.0); rows * np];
        for (ir, &r) in grid.radii.iter().enumerate() {
            let j = sph_bessel_j_all(l_nu, r);
            let h = sph_hankel_h_all(data.degree, r)?;
            for (is, y) in ydirs.iter().enumerate() {
                let row = &mut base[(ir * ns + is) * np..(ir * ns + is + 1) * np];
                for (k, v) in row.iter_mut().enumerate() {
                    let l = HarmonicIndex::from_flat(k).ell;
                    *v = i_pow(l) * (4.0 * PI * j[l]) * y[k];
                }
                for lk in 0..nl {
                    let l = HarmonicIndex::from_flat(lk).ell;
                    let c = h[l] * y[lk];
                    let brow = &b[lk * np..(lk + 1) * np];
                    for (v, bv) in row.iter_mut().zip(brow) {
                        *v += c * bv;
                    }
                }
            }
        }
        Ok(Self {
            l_nu,
            degree: data.degree,
            base,
            b,
            rows,
        })
    }

    fn n_cols(&self) -> usize {
        n_harmonics(self.l_nu)
    }

    /// `ρ(ν)` at the annulus nodes.
    pub fn rho(&self, nu: &NuExpansion, theta: &ComplexDirection, grid: &AnnulusGrid) -> Vec<Complex64> {
        let np = self.n_cols();
        grid.nodes
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let row = &self.base[i * np..(i + 1) * np];
                let s: Complex64 = row.iter().zip(&nu.coeffs).map(|(f, c)| f * c).sum();
                (-Complex64::i() * theta.dot_point(x)).exp() * s - 1.0
            })
            .collect()
    }

    /// Least-squares fit of `ν` with ridge `ridge·||ν||²`.
    pub fn fit(&self, theta: &ComplexDirection, grid: &AnnulusGrid, ridge: f64) -> Result<NuFit> {
        let fit = self.fit_with(theta, grid, ridge, RANK_RCOND)?;
        if ridge <= 0.0 && fit.rank < self.n_cols() {
            return Err(Error::RankDeficient {
                rank: fit.rank,
                dim: self.n_cols(),
            });
        }
        Ok(fit)
    }

    /// As [`DesignBasis::fit`], dropping singular directions below `rcond · s₀`.
    pub fn fit_with(&self, theta: &ComplexDirection, grid: &AnnulusGrid, ridge: f64, rcond: f64) -> Result<NuFit> {
        let np = self.n_cols();
        let mut g = Mat::<Complex64>::zeros(self.rows, np);
        let mut rhs = Vec::with_capacity(self.rows);
        let mut fro2 = 0.0;
        for (i, (x, w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
            let sw = w.sqrt();
            let e = (-Complex64::i() * theta.dot_point(x)).exp() * sw;
            for k in 0..np {
                let v = e * self.base[i * np + k];
                fro2 += v.norm_sqr();
                g[(i, k)] = v;
            }
            rhs.push(Complex64::new(sw, 0.0));
        }
        let ridge_abs = ridge.max(0.0);
        let sol = linalg::svd_lstsq(g.as_ref(), &rhs, ridge_abs, rcond)
            .ok_or_else(|| Error::SolverFailure("SVD of the design matrix did not converge".into()))?;
        let nu = NuExpansion {
            l_nu: self.l_nu,
            coeffs: sol.x,
        };
        let residual = grid.norm(&self.rho(&nu, theta, grid));
        Ok(NuFit {
            nu,
            residual,
            rank: sol.rank,
            design_norm_sq: fro2,
        })
    }

    /// Frobenius norm² of the weighted design matrix at `θ`.
    pub fn design_norm_sq(&self, theta: &ComplexDirection, grid: &AnnulusGrid) -> f64 {
        let np = self.n_cols();
        grid.nodes
            .iter()
            .zip(&grid.weights)
            .enumerate()
            .map(|(i, (x, w))| {
                let e = (-Complex64::i() * theta.dot_point(x)).exp().norm_sqr() * w;
                e * self.base[i * np..(i + 1) * np]
                    .iter()
                    .map(|v| v.norm_sqr())
                    .sum::<f64>()
            })
            .sum()
    }

    /// `-4π Σ_{L<=l_a} Y_L(θ′) Σ_L′ B[L][L′] ν_L′`, the pairing form of [`q_hat`].
    pub fn q_hat(&self, theta_prime: &ComplexDirection, nu: &NuExpansion, l_a: usize) -> Complex64 {
        let l_a = l_a.min(self.degree);
        let np = self.n_cols();
        let y = sph_harm_all_complex(l_a, theta_prime);
        let mut s = Complex64::new(0.0, 0.0);
        for (l, yl) in y.iter().enumerate() {
            let bn: Complex64 = self.b[l * np..(l + 1) * np]
                .iter()
                .zip(&nu.coeffs)
                .map(|(b, c)| b * c)
                .sum();
            s += yl * bn;
        }
        -4.0 * PI * s
    }
}

/// Result of one least-squares determination of `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct NuFit {
    pub nu: NuExpansion,
    /// Unregularized `||ρ(ν)||` on the annulus.
    pub residual: f64,
    pub rank: usize,
    pub design_norm_sq: f64,
}

/// How the ridge weight is set from the design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum Ridge {
    /// `value · ||G||_F²`.
    Relative(f64),
    Absolute(f64),
    /// No ridge; singular directions below `value · s₀` are dropped.
    Truncated(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-20)
    }
}

impl Ridge {
    pub fn resolve(&self, design_norm_sq: f64) -> f64 {
        match *self {
            Ridge::Relative(v) => v * design_norm_sq,
            Ridge::Absolute(v) => v,
            Ridge::Truncated(_) => 0.0,
        }
    }
}

/// `ρ(ν)(x) = e^{-iθ·x} ∫ u(x, α) ν(α) dα − 1` at the annulus nodes.
pub fn rho_field(
    nu: &NuExpansion,
    theta: &ComplexDirection,
    data: &ExteriorData<'_>,
    grid: &AnnulusGrid,
) -> Result<Vec<Complex64>> {
    Ok(DesignBasis::new(data, grid, nu.l_nu)?.rho(nu, theta, grid))
}

/// Same as [`rho_field`] but summing the exterior field at every data node.
pub fn rho_field_direct(
    nu: &NuExpansion,
    theta: &ComplexDirection,
    data: &ExteriorData<'_>,
    grid: &AnnulusGrid,
) -> Result<Vec<Complex64>> {
    let quad = &data.coeffs.quad;
    let nu_at: Vec<Complex64> = quad.nodes.iter().map(|d| nu.eval(d)).collect();
    grid.nodes
        .iter()
        .map(|x| {
            let mut s = Complex64::new(0.0, 0.0);
            for (j, w) in quad.weights.iter().enumerate() {
                s += u_delta(data.coeffs, x, j, data.degree)? * nu_at[j] * *w;
            }
            Ok((-Complex64::i() * theta.dot_point(x)).exp() * s - 1.0)
        })
        .collect()
}

/// Minimizes `||ρ(ν)||² + ridge ||ν||²` over `ν` of degree `<= l_nu`.
pub fn minimize_nu(
    theta: &ComplexDirection,
    l_nu: usize,
    data: &ExteriorData<'_>,
    grid: &AnnulusGrid,
    ridge: Ridge,
) -> Result<NuFit> {
    let basis = DesignBasis::new(data, grid, l_nu)?;
    let r = ridge.resolve(basis.design_norm_sq(theta, grid));
    match ridge {
        Ridge::Truncated(rc) => basis.fit_with(theta, grid, r, rc),
        _ => basis.fit(theta, grid, r),
    }
}

/// `q̂ = −4π Σ_j w_j (Σ_{l<=L_A} A_l(α_j) Y_l(θ′)) ν(α_j)`.
pub fn q_hat(coeffs: &HarmonicCoefficients, pair: &ThetaPair, nu: &NuExpansion, l_a: usize) -> Result<Complex64> {
    if l_a > coeffs.l_max {
        return Err(Error::InvalidArgument(format!(
            "L_A = {l_a} exceeds stored degree {}",
            coeffs.l_max
        )));
    }
    let y = sph_harm_all_complex(l_a, &pair.theta_prime);
    let mut s = Complex64::new(0.0, 0.0);
    for (j, (d, w)) in coeffs.quad.nodes.iter().zip(&coeffs.quad.weights).enumerate() {
        let a: Complex64 = y.iter().enumerate().map(|(k, yk)| coeffs.get(k, j) * yk).sum();
        s += a * nu.eval(d) * *w;
    }
    Ok(-4.0 * PI * s)
}
