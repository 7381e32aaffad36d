//! Variational inversion on complex directions: the functional `ρ(ν)`, least-squares
//! determination of `ν`, the `q̂` formulas and θ selection.

mod annulus;
mod checks;
mod functional;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use annulus::{annulus_grid, AnnulusGrid};
pub use checks::{interior_rho_norm, two_potential_residual, TwoPotentialReport};
pub use functional::{
    minimize_nu, q_hat, rho_field, rho_field_direct, DesignBasis, ExteriorData, NuExpansion, NuFit, Ridge, RANK_RCOND,
};

use crate::amplitude_data::{
    harmonic_coefficients, mu, truncation_n, AmplitudeMatrix, HarmonicCoefficients, Schedules,
};
use crate::directions::{theta_pair, ThetaPair};
use crate::error::{Error, Result};

/// `√2 γ₁ |ln δ| / (ln|ln δ|)²` with `γ₁ = ln(a₁/a)/(20b)`.
pub fn theta_lower_bound(delta: f64, s: &Schedules) -> Result<f64> {
    let l = log_abs(delta)?;
    let g1 = s.gamma() / (20.0 * s.b);
    Ok(2f64.sqrt() * g1 * l / (l.ln() * l.ln()))
}

/// `40 b ln|ln δ| / |ln δ|`.
pub fn theorem_c_bound(delta: f64, b: f64) -> Result<f64> {
    let l = log_abs(delta)?;
    Ok(40.0 * b * l.ln() / l)
}

fn log_abs(delta: f64) -> Result<f64> {
    truncation_n(delta)?;
    Ok(delta.ln().abs())
}

/// Scale `|Re θ|` giving `|Im θ| = κ` at frequency `λ`.
pub fn scale_for_kappa(lambda: [f64; 3], kappa: f64) -> f64 {
    let t2 = lambda.iter().map(|v| v * v).sum::<f64>();
    (kappa * kappa + 1.0 - t2 / 4.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub lambda: [f64; 3],
    /// `None` when no candidate θ passed the acceptance test.
    pub q_hat: Option<Complex64>,
    pub theta_pair: Option<ThetaPair>,
    pub nu: Option<NuExpansion>,
    pub residual_d: f64,
    pub a_nu: f64,
    pub scale: f64,
    pub l_a: usize,
    pub delta: f64,
    pub flag: Option<String>,
}

impl InversionResult {
    fn accepted(
        lambda: [f64; 3],
        pair: ThetaPair,
        fit: NuFit,
        scale: f64,
        q: Complex64,
        l_a: usize,
        delta: f64,
    ) -> Self {
        Self {
            lambda,
            q_hat: Some(q),
            a_nu: fit.nu.a_nu(),
            theta_pair: Some(pair),
            nu: Some(fit.nu),
            residual_d: fit.residual,
            scale,
            l_a,
            delta,
            flag: None,
        }
    }

    /// A result carrying `err.code()` and no values.
    pub fn flagged(lambda: [f64; 3], l_a: usize, delta: f64, err: &Error) -> Self {
        Self {
            lambda,
            q_hat: None,
            theta_pair: None,
            nu: None,
            residual_d: f64::NAN,
            a_nu: f64::NAN,
            scale: f64::NAN,
            l_a,
            delta,
            flag: Some(err.code().to_string()),
        }
    }

    pub fn theta_norm(&self) -> f64 {
        self.theta_pair.as_ref().map_or(f64::NAN, |p| p.theta_norm())
    }

    pub fn kappa(&self) -> f64 {
        self.theta_pair.as_ref().map_or(f64::NAN, |p| p.kappa())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalSelection {
    pub delta: f64,
    pub theta_of_delta: ThetaPair,
    pub nu_delta: NuExpansion,
    pub residual: f64,
    pub constraint_value: f64,
    pub c_constant: f64,
}

/// `||ρ_δ(ν)|| + a(ν) e^{κb} μ(δ)`.
pub fn constraint_value(residual: f64, a_nu: f64, kappa: f64, b: f64, mu: f64) -> f64 {
    residual + a_nu * (kappa * b).exp() * mu
}

/// Everything an inversion needs once the data and `L_ν` are fixed.
#[derive(Debug, Clone)]
pub struct InversionSetup<'a> {
    pub coeffs: &'a HarmonicCoefficients,
    pub grid: &'a AnnulusGrid,
    pub basis: DesignBasis,
    pub ridge: Ridge,
}

impl<'a> InversionSetup<'a> {
    pub fn new(data: ExteriorData<'a>, grid: &'a AnnulusGrid, l_nu: usize, ridge: Ridge) -> Result<Self> {
        Ok(Self {
            coeffs: data.coeffs,
            grid,
            basis: DesignBasis::new(&data, grid, l_nu)?,
            ridge,
        })
    }

    pub fn fit(&self, pair: &ThetaPair) -> Result<NuFit> {
        let r = self.ridge.resolve(self.basis.design_norm_sq(&pair.theta, self.grid));
        match self.ridge {
            Ridge::Truncated(rc) => self.basis.fit_with(&pair.theta, self.grid, r, rc),
            _ => self.basis.fit(&pair.theta, self.grid, r),
        }
    }

    /// Fit and `q̂` at one θ pair, with `L_A` equal to the data degree.
    pub fn at_scale(&self, lambda: [f64; 3], scale: f64) -> Result<InversionResult> {
        let pair = theta_pair(lambda, scale)?;
        let fit = self.fit(&pair)?;
        let q = self.basis.q_hat(&pair.theta_prime, &fit.nu, self.basis.degree);
        Ok(InversionResult::accepted(
            lambda,
            pair,
            fit,
            scale,
            q,
            self.basis.degree,
            self.coeffs.delta,
        ))
    }

    /// Exact-data inversion at one λ: the largest scale with `|θ| d(θ) <= c17`.
    ///
    /// With `c17 = None` the constant is twice the smallest `|θ| d(θ)` seen over `scales`.
    pub fn invert_exact_one(&self, lambda: [f64; 3], scales: &[f64], c17: Option<f64>) -> Result<InversionResult> {
        let mut cands = Vec::with_capacity(scales.len());
        for &s in scales {
            let pair = theta_pair(lambda, s)?;
            let fit = self.fit(&pair)?;
            cands.push((s, pair, fit));
        }
        let c = match c17 {
            Some(c) => c,
            None => {
                2.0 * cands
                    .iter()
                    .map(|(_, p, f)| p.theta_norm() * f.residual)
                    .fold(f64::INFINITY, f64::min)
            }
        };
        let best = cands
            .into_iter()
            .filter(|(_, p, f)| p.theta_norm() * f.residual <= c)
            .max_by(|x, y| x.0.total_cmp(&y.0));
        match best {
            Some((s, pair, fit)) => {
                let q = self.basis.q_hat(&pair.theta_prime, &fit.nu, self.basis.degree);
                Ok(InversionResult::accepted(
                    lambda,
                    pair,
                    fit,
                    s,
                    q,
                    self.basis.degree,
                    self.coeffs.delta,
                ))
            }
            None => Err(Error::NoFeasibleTheta { lambda }),
        }
    }

    /// First κ on the descending grid meeting the noisy constraint.
    pub fn select_theta_noisy(
        &self,
        delta: f64,
        lambda: [f64; 3],
        s: &Schedules,
        kappa_grid: &[f64],
        c_cal: f64,
    ) -> Result<VariationalSelection> {
        check_descending(kappa_grid)?;
        let m = mu(delta, s)?;
        for &k in kappa_grid {
            let pair = theta_pair(lambda, scale_for_kappa(lambda, k))?;
            let fit = self.fit(&pair)?;
            let cv = constraint_value(fit.residual, fit.nu.a_nu(), pair.kappa(), s.b, m);
            if cv <= c_cal / pair.theta_norm() {
                return Ok(VariationalSelection {
                    delta,
                    theta_of_delta: pair,
                    nu_delta: fit.nu,
                    residual: fit.residual,
                    constraint_value: cv,
                    c_constant: c_cal,
                });
            }
        }
        Err(Error::NoFeasibleTheta { lambda })
    }

    /// Grid minimization of `H(δ,θ) = ||ρ_δ(ν_θ)|| + a(ν_θ) e^{κb} μ(δ)`.
    pub fn alt_method(&self, delta: f64, lambda: [f64; 3], s: &Schedules, kappa_grid: &[f64]) -> Result<AltResult> {
        if kappa_grid.is_empty() {
            return Err(Error::InvalidArgument("empty kappa grid".into()));
        }
        let m = if delta > 0.0 { mu(delta, s)? } else { 0.0 };
        let mut trace = Vec::with_capacity(kappa_grid.len());
        let mut best: Option<(f64, ThetaPair, NuFit)> = None;
        for &k in kappa_grid {
            let pair = theta_pair(lambda, scale_for_kappa(lambda, k))?;
            let fit = self.fit(&pair)?;
            let h = constraint_value(fit.residual, fit.nu.a_nu(), pair.kappa(), s.b, m);
            trace.push(HTrace {
                kappa: pair.kappa(),
                theta_norm: pair.theta_norm(),
                residual: fit.residual,
                a_nu: fit.nu.a_nu(),
                h,
            });
            if best.as_ref().is_none_or(|(hb, _, _)| h < *hb) {
                best = Some((h, pair, fit));
            }
        }
        let (omega, pair, fit) = best.expect("nonempty grid");
        let scale = pair.theta.real_part().iter().map(|v| v * v).sum::<f64>().sqrt();
        let q = self.basis.q_hat(&pair.theta_prime, &fit.nu, self.basis.degree);
        Ok(AltResult {
            result: InversionResult::accepted(lambda, pair, fit, scale, q, self.basis.degree, delta),
            omega,
            trace,
        })
    }
}

fn check_descending(kappa_grid: &[f64]) -> Result<()> {
    if kappa_grid.is_empty() || kappa_grid.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidArgument(
            "kappa grid must be nonempty and strictly descending".into(),
        ));
    }
    Ok(())
}

/// One grid point of the alternative method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HTrace {
    pub kappa: f64,
    pub theta_norm: f64,
    pub residual: f64,
    pub a_nu: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltResult {
    pub result: InversionResult,
    /// Grid minimum of `H`.
    pub omega: f64,
    pub trace: Vec<HTrace>,
}

/// Per-λ exact inversion; λ entries with no accepted scale come back flagged.
pub fn invert_exact(
    coeffs: &HarmonicCoefficients,
    lambda_grid: &[[f64; 3]],
    grid: &AnnulusGrid,
    scale_list: &[f64],
    l_nu: usize,
    ridge: Ridge,
    c17: Option<f64>,
) -> Result<Vec<InversionResult>> {
    let setup = InversionSetup::new(ExteriorData::full(coeffs), grid, l_nu, ridge)?;
    Ok(lambda_grid
        .par_iter()
        .map(|&l| {
            setup
                .invert_exact_one(l, scale_list, c17)
                .unwrap_or_else(|e| InversionResult::flagged(l, coeffs.l_max, coeffs.delta, &e))
        })
        .collect())
}

/// `c = 2 max |θ| (d + a(ν) e^{κb} μ(δ_ref))` over accepted exact-data results.
pub fn calibrate_c(results: &[InversionResult], s: &Schedules, delta_ref: f64) -> Result<f64> {
    let m = mu(delta_ref, s)?;
    let c = results
        .iter()
        .filter(|r| r.q_hat.is_some())
        .map(|r| r.theta_norm() * constraint_value(r.residual_d, r.a_nu, r.kappa(), s.b, m))
        .fold(f64::NEG_INFINITY, f64::max);
    if !c.is_finite() {
        return Err(Error::InvalidArgument(
            "no accepted exact results to calibrate from".into(),
        ));
    }
    Ok(2.0 * c)
}

/// Default `L_ν` for noisy data, `N(δ) + 4`.
pub fn default_l_nu_noisy(delta: f64) -> Result<usize> {
    Ok(truncation_n(delta)? + 4)
}

/// Default `L_ν` for exact data, `⌈e b κ⌉` capped at 24.
pub fn default_l_nu_exact(b: f64, kappa: f64) -> usize {
    ((std::f64::consts::E * b * kappa).ceil() as usize).min(24)
}

/// Noisy pipeline: `N(δ)`, truncated coefficients, per-λ selection and `q̂_δ` with `L_A = N(δ)`.
#[allow(clippy::too_many_arguments)]
pub fn invert_noisy(
    a_noisy: &AmplitudeMatrix,
    delta: f64,
    lambda_grid: &[[f64; 3]],
    s: &Schedules,
    grid: &AnnulusGrid,
    kappa_grid: &[f64],
    l_nu: Option<usize>,
    ridge: Ridge,
    c_cal: f64,
) -> Result<Vec<InversionResult>> {
    if a_noisy.delta != delta {
        return Err(Error::InvalidArgument(format!(
            "amplitude noise level {} differs from requested delta {delta}",
            a_noisy.delta
        )));
    }
    check_descending(kappa_grid)?;
    let n = truncation_n(delta)?;
    let coeffs = harmonic_coefficients(a_noisy, n)?;
    let l_nu = match l_nu {
        Some(l) => l,
        None => default_l_nu_noisy(delta)?,
    };
    let setup = InversionSetup::new(ExteriorData::full(&coeffs), grid, l_nu, ridge)?;
    Ok(lambda_grid
        .par_iter()
        .map(|&l| match setup.select_theta_noisy(delta, l, s, kappa_grid, c_cal) {
            Ok(sel) => {
                let q = setup.basis.q_hat(&sel.theta_of_delta.theta_prime, &sel.nu_delta, n);
                let scale = sel
                    .theta_of_delta
                    .theta
                    .real_part()
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt();
                InversionResult {
                    lambda: l,
                    q_hat: Some(q),
                    a_nu: sel.nu_delta.a_nu(),
                    theta_pair: Some(sel.theta_of_delta),
                    nu: Some(sel.nu_delta),
                    residual_d: sel.residual,
                    scale,
                    l_a: n,
                    delta,
                    flag: None,
                }
            }
            Err(e) => InversionResult::flagged(l, n, delta, &e),
        })
        .collect())
}

/// Alternative method at one λ on harmonic coefficients already truncated as desired.
pub fn alt_method(
    coeffs: &HarmonicCoefficients,
    delta: f64,
    lambda: [f64; 3],
    s: &Schedules,
    grid: &AnnulusGrid,
    kappa_grid: &[f64],
    l_nu: usize,
    ridge: Ridge,
) -> Result<AltResult> {
    InversionSetup::new(ExteriorData::full(coeffs), grid, l_nu, ridge)?.alt_method(delta, lambda, s, kappa_grid)
}

#[cfg(test)]
mod tests;
