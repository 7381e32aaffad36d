use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::directions::{ComplexDirection, SphereQuadrature};
use crate::error::{Error, Result};
use crate::forward::{BallGrid, ForwardSolver, Potential, ScatteringField};

use super::NuExpansion;

/// `||ρ(ν)||_{L²(B_a)}` from volume-solver fields at the quadrature nodes.
pub fn interior_rho_norm(
    nu: &NuExpansion,
    theta: &ComplexDirection,
    fields: &[ScatteringField],
    quad: &SphereQuadrature,
    grid: &BallGrid,
) -> Result<f64> {
    if fields.len() != quad.len() {
        return Err(Error::InvalidArgument(format!(
            "{} fields for {} quadrature nodes",
            fields.len(),
            quad.len()
        )));
    }
    let coef: Vec<Complex64> = quad
        .nodes
        .iter()
        .zip(&quad.weights)
        .map(|(d, w)| nu.eval(d) * *w)
        .collect();
    let mut s = 0.0;
    for (i, x) in grid.cell_centers.iter().enumerate() {
        let v: Complex64 = fields.iter().zip(&coef).map(|(f, c)| f.values[i] * c).sum();
        let rho = (-Complex64::i() * theta.dot_point(x)).exp() * v - 1.0;
        s += rho.norm_sqr() * grid.occupancy[i] * grid.cell_volume;
    }
    Ok(s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPotentialReport {
    /// `max |−4π(A₁ − A₂) − ∫ p u₁(·,α) u₂(·,−α′)|` over sampled pairs.
    pub max_residual: f64,
    /// `max |4π(A₁ − A₂)|` over the same pairs.
    pub max_difference: f64,
}

impl TwoPotentialReport {
    pub fn relative(&self) -> f64 {
        if self.max_difference > 0.0 {
            self.max_residual / self.max_difference
        } else {
            self.max_residual
        }
    }
}

/// Two-potential identity checked over all node pairs `(α′, α)` of `quad`.
///
/// Amplitudes come from the far-field formula of each solver; the right side is a
/// separate cell sum of `p u₁(x,α) u₂(x,−α′)`.
pub fn two_potential_residual(
    q1: &Potential,
    q2: &Potential,
    grid: &BallGrid,
    quad: &SphereQuadrature,
) -> Result<TwoPotentialReport> {
    if q1.support_radius_a != q2.support_radius_a || grid.a != q1.support_radius_a {
        return Err(Error::InvalidArgument(
            "potentials and grid must share the support ball".into(),
        ));
    }
    let s1 = ForwardSolver::new(q1, grid.clone())?;
    let s2 = ForwardSolver::new(q2, grid.clone())?;
    let u1: Vec<ScatteringField> = quad.nodes.iter().map(|a| s1.solve(a)).collect::<Result<_>>()?;
    let u2m: Vec<ScatteringField> = quad.nodes.iter().map(|a| s2.solve(&a.neg())).collect::<Result<_>>()?;
    let u2: Vec<ScatteringField> = quad.nodes.iter().map(|a| s2.solve(a)).collect::<Result<_>>()?;
    let p: Vec<f64> = s1.q_cell().iter().zip(s2.q_cell()).map(|(a, b)| a - b).collect();
    let mut rep = TwoPotentialReport {
        max_residual: 0.0,
        max_difference: 0.0,
    };
    for (ip, ap) in quad.nodes.iter().enumerate() {
        for j in 0..quad.len() {
            let lhs = -4.0 * PI * (s1.amplitude(&u1[j], ap) - s2.amplitude(&u2[j], ap));
            let rhs: Complex64 = p
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| u1[j].values[i] * u2m[ip].values[i] * *v)
                .sum::<Complex64>()
                * grid.cell_volume;
            rep.max_residual = rep.max_residual.max((lhs - rhs).norm());
            rep.max_difference = rep.max_difference.max(lhs.norm());
        }
    }
    Ok(rep)
}
