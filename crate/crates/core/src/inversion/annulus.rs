use num_complex::Complex64;

use crate::amplitude_data::Schedules;
use crate::directions::{gauss_legendre, s2_quadrature, SphereQuadrature};
use crate::error::{Error, Result};

/// Tensor grid on `a₁ < |x| < b`: radial Gauss–Legendre times sphere quadrature.
///
/// Node `ir * dirs.len() + is` sits at `radii[ir] · dirs.nodes[is]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusGrid {
    pub radii: Vec<f64>,
    pub radial_weights: Vec<f64>,
    pub dirs: SphereQuadrature,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

pub fn annulus_grid(s: &Schedules, radial_order: usize, sphere_order: usize) -> Result<AnnulusGrid> {
    if !(s.a < s.a1 && s.a1 < s.b) {
        return Err(Error::InvalidArgument(format!("annulus needs a < a1 < b, got {s:?}")));
    }
    if radial_order == 0 || sphere_order == 0 {
        return Err(Error::InvalidArgument("annulus orders must be positive".into()));
    }
    let (x, w) = gauss_legendre(radial_order);
    let half = 0.5 * (s.b - s.a1);
    let mid = 0.5 * (s.b + s.a1);
    let radii: Vec<f64> = x.iter().map(|t| mid + half * t).collect();
    let radial_weights: Vec<f64> = w.iter().zip(&radii).map(|(w, r)| w * half * r * r).collect();
    let dirs = s2_quadrature(sphere_order);
    let mut nodes = Vec::with_capacity(radii.len() * dirs.len());
    let mut weights = Vec::with_capacity(radii.len() * dirs.len());
    for (r, rw) in radii.iter().zip(&radial_weights) {
        for (d, dw) in dirs.nodes.iter().zip(&dirs.weights) {
            nodes.push(d.as_array().map(|c| c * r));
            weights.push(rw * dw);
        }
    }
    Ok(AnnulusGrid {
        radii,
        radial_weights,
        dirs,
        nodes,
        weights,
    })
}

impl AnnulusGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `L²` norm of a field sampled at the nodes.
    pub fn norm(&self, field: &[Complex64]) -> f64 {
        field
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| f.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }
}
