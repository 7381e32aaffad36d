//! Forward synthesis: Lippmann–Schwinger solves on a ball grid, scattering
//! amplitudes, and the partial-wave oracle for radial potentials.

mod grid;
mod partial_wave;
mod potential;
mod solver;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use grid::{BallGrid, CELL_SUBSAMPLES};
pub use partial_wave::{partial_wave_sum, partial_wave_t, partial_wave_t_ode, phase_shifts, radial_partial_wave};
pub use potential::{Potential, PotentialKind};
pub use solver::{green, self_cell_integral, ForwardSolver, ScatteringField};

use crate::amplitude_data::{AmplitudeMatrix, HarmonicCoefficients};
use crate::directions::{RealDirection, SphereQuadrature};
use crate::error::{Error, Result};
use crate::specfun::{sph_hankel_h_all, sph_harm_all, HarmonicIndex};

pub fn solve_scattering(q: &Potential, alpha: &RealDirection, grid: &BallGrid) -> Result<ScatteringField> {
    ForwardSolver::new(q, grid.clone())?.solve(alpha)
}

pub fn amplitude(
    q: &Potential,
    alpha_out: &RealDirection,
    alpha_in: &RealDirection,
    grid: &BallGrid,
) -> Result<Complex64> {
    let s = ForwardSolver::new(q, grid.clone())?;
    let f = s.solve(alpha_in)?;
    Ok(s.amplitude(&f, alpha_out))
}

/// Solver statistics gathered while building an amplitude matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub cells: usize,
    pub max_iterations: usize,
    pub max_relative_residual: f64,
    /// `sup |u(x, α)|` over cells and incident directions.
    pub sup_field: f64,
}

impl ForwardSolver {
    /// `A[p][j]` for all quadrature node pairs; optionally keeps the fields.
    pub fn amplitude_matrix_with_fields(
        &self,
        quad: &SphereQuadrature,
        keep_fields: bool,
    ) -> Result<(AmplitudeMatrix, Option<Vec<ScatteringField>>, SolveStats)> {
        let grid = self.grid();
        let nq = quad.len();
        let mc = grid.len();
        let q = self.q_cell();
        let active: Vec<usize> = (0..mc).filter(|&i| q[i] != 0.0).collect();
        let phases: Vec<Complex64> = quad
            .nodes
            .iter()
            .flat_map(|n| {
                active
                    .iter()
                    .map(move |&i| Complex64::from_polar(1.0, -n.dot(&grid.cell_centers[i])))
            })
            .collect();
        let na = active.len();
        let scale = -grid.cell_volume / (4.0 * PI);
        let solved: Vec<Result<(Vec<Complex64>, ScatteringField)>> = quad
            .nodes
            .par_iter()
            .map(|alpha| {
                let f = self.solve(alpha)?;
                let src: Vec<Complex64> = active.iter().map(|&i| f.values[i] * q[i]).collect();
                let col = (0..nq)
                    .map(|p| {
                        let row = &phases[p * na..(p + 1) * na];
                        row.iter().zip(&src).map(|(e, s)| e * s).sum::<Complex64>() * scale
                    })
                    .collect();
                Ok((col, f))
            })
            .collect();
        let mut entries = vec![Complex64::new(0.0, 0.0); nq * nq];
        let mut fields = Vec::with_capacity(if keep_fields { nq } else { 0 });
        let mut stats = SolveStats {
            cells: mc,
            ..Default::default()
        };
        for (j, r) in solved.into_iter().enumerate() {
            let (col, f) = r?;
            for p in 0..nq {
                entries[p * nq + j] = col[p];
            }
            stats.max_iterations = stats.max_iterations.max(f.iterations);
            stats.max_relative_residual = stats.max_relative_residual.max(f.relative_residual);
            stats.sup_field = f.values.iter().fold(stats.sup_field, |m, v| m.max(v.norm()));
            if keep_fields {
                fields.push(f);
            }
        }
        let m = AmplitudeMatrix::new(grid.a, quad.clone(), entries)?;
        Ok((m, keep_fields.then_some(fields), stats))
    }

    pub fn amplitude_matrix(&self, quad: &SphereQuadrature) -> Result<AmplitudeMatrix> {
        Ok(self.amplitude_matrix_with_fields(quad, false)?.0)
    }

    /// 2-norm condition number of the dense `I + T_q`.
    pub fn condition_number(&self) -> f64 {
        let m = self.dense_matrix();
        let sv = crate::linalg::singular_values(m.as_ref());
        match (sv.first(), sv.last()) {
            (Some(hi), Some(lo)) if *lo > 0.0 => hi / lo,
            _ => f64::INFINITY,
        }
    }
}

pub fn amplitude_matrix(q: &Potential, quad: &SphereQuadrature, grid: &BallGrid) -> Result<AmplitudeMatrix> {
    ForwardSolver::new(q, grid.clone())?.amplitude_matrix(quad)
}

/// Amplitude matrix synthesized from partial waves: `A[p][j] = Σ (2l+1) t_l P_l(α′_p·α_j)`.
pub fn partial_wave_matrix(q: &Potential, quad: &SphereQuadrature, lmax: usize) -> Result<AmplitudeMatrix> {
    let t = partial_wave_t(q, lmax)?;
    let n = quad.len();
    let mut entries = Vec::with_capacity(n * n);
    for p in &quad.nodes {
        for j in &quad.nodes {
            entries.push(partial_wave_sum(&t, p.dot(&j.as_array())));
        }
    }
    AmplitudeMatrix::new(q.support_radius_a, quad.clone(), entries)
}

/// Harmonic coefficients straight from partial waves, `A_lm(α_j) = 4π t_l conj(Y_lm(α_j))`.
///
/// Unlike the quadrature transform of a sampled matrix these carry relative, not
/// absolute, precision at every degree.
pub fn partial_wave_coefficients(q: &Potential, quad: &SphereQuadrature, lmax: usize) -> Result<HarmonicCoefficients> {
    let t = partial_wave_t(q, lmax)?;
    let nh = crate::n_harmonics(lmax);
    let n = quad.len();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); nh * n];
    for (j, d) in quad.nodes.iter().enumerate() {
        for (k, y) in sph_harm_all(lmax, d).iter().enumerate() {
            let l = HarmonicIndex::from_flat(k).ell;
            coeffs[k * n + j] = t[l] * 4.0 * PI * y.conj();
        }
    }
    Ok(HarmonicCoefficients {
        l_max: lmax,
        coeffs,
        quad: quad.clone(),
        a: q.support_radius_a,
        delta: 0.0,
    })
}

/// `e^{iα·x} + Σ_{l<=L} A_l(α) Y_l(x̂) h_l(|x|)` for `|x| > a`; `coeffs` in flattened harmonic order.
pub fn exterior_field(coeffs: &[Complex64], alpha: &RealDirection, x: &[f64; 3], a: f64) -> Result<Complex64> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r <= a {
        return Err(Error::Domain(format!("exterior field at |x| = {r} <= a = {a}")));
    }
    let lmax = ((coeffs.len() as f64).sqrt() as usize).saturating_sub(1);
    if crate::n_harmonics(lmax) != coeffs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients is not a full harmonic block",
            coeffs.len()
        )));
    }
    let xhat = RealDirection::normalized(*x)?;
    let y = sph_harm_all(lmax, &xhat);
    let h = sph_hankel_h_all(lmax, r)?;
    let mut s = Complex64::from_polar(1.0, alpha.dot(x));
    for l in 0..=lmax {
        let mut inner = Complex64::new(0.0, 0.0);
        for k in (l * l)..((l + 1) * (l + 1)) {
            inner += coeffs[k] * y[k];
        }
        s += inner * h[l];
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::{make_real_dir, s2_quadrature};
    use crate::specfun::sph_harm_all;

    fn radial_coeffs(t: &[Complex64], alpha: &RealDirection) -> Vec<Complex64> {
        let lmax = t.len() - 1;
        let y = sph_harm_all(lmax, alpha);
        y.iter()
            .enumerate()
            .map(|(k, y)| {
                let l = crate::specfun::HarmonicIndex::from_flat(k).ell;
                t[l] * 4.0 * PI * y.conj()
            })
            .collect()
    }

    #[test]
    fn exterior_field_with_zero_coefficients() {
        let alpha = make_real_dir(0.4, 0.1);
        let x = [1.0, 1.0, 0.5];
        let v = exterior_field(&vec![Complex64::new(0.0, 0.0); 16], &alpha, &x, 1.0).unwrap();
        assert!((v - Complex64::from_polar(1.0, alpha.dot(&x))).norm() < 1e-15);
        assert!(exterior_field(&[Complex64::new(0.0, 0.0)], &alpha, &[0.5, 0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn exterior_field_far_zone_gives_amplitude() {
        let q = Potential::constant_well(-1.0, 1.0);
        let t = partial_wave_t(&q, 20).unwrap();
        let alpha = make_real_dir(0.3, 0.2);
        let c = radial_coeffs(&t, &alpha);
        let xhat = make_real_dir(1.1, 2.0);
        let r = 100.0;
        let x = xhat.as_array().map(|v| v * r);
        let u = exterior_field(&c, &alpha, &x, 1.0).unwrap();
        let scat = (u - Complex64::from_polar(1.0, alpha.dot(&x))) * r * Complex64::from_polar(1.0, -r);
        let a = partial_wave_sum(&t, xhat.dot(&alpha.as_array()));
        assert!((scat - a).norm() < 1e-2 * a.norm().max(1.0));
    }

    #[test]
    fn small_grid_amplitude_matrix_is_rotation_invariant_in_structure() {
        let q = Potential::constant_well(-1.0, 1.0);
        let s = ForwardSolver::new(&q, BallGrid::new(1.0, 8).unwrap()).unwrap();
        let quad = s2_quadrature(3);
        let m = s.amplitude_matrix(&quad).unwrap();
        assert_eq!(m.entries.len(), quad.len() * quad.len());
        let z = Potential::zero(1.0);
        let zs = ForwardSolver::new(&z, BallGrid::new(1.0, 8).unwrap()).unwrap();
        let zm = zs.amplitude_matrix(&quad).unwrap();
        assert!(zm.entries.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }
}
