use crate::error::{Error, Result};

use super::Potential;

/// Sub-samples per axis used for cell averages.
pub const CELL_SUBSAMPLES: usize = 4;

/// Uniform cells of the cube `[-a, a]^3` that meet the ball `|x| <= a`.
///
/// Boundary cells are kept when any sub-sample point lies in the ball;
/// `occupancy` records the sampled fraction inside.
#[derive(Debug, Clone, PartialEq)]
pub struct BallGrid {
    pub a: f64,
    pub n_per_axis: usize,
    pub h: f64,
    pub cell_volume: f64,
    pub cell_centers: Vec<[f64; 3]>,
    pub cell_ijk: Vec<[usize; 3]>,
    pub occupancy: Vec<f64>,
}

fn subsample_offsets(h: f64) -> Vec<[f64; 3]> {
    let s = CELL_SUBSAMPLES;
    let off: Vec<f64> = (0..s).map(|k| ((k as f64 + 0.5) / s as f64 - 0.5) * h).collect();
    let mut out = Vec::with_capacity(s * s * s);
    for &dx in &off {
        for &dy in &off {
            for &dz in &off {
                out.push([dx, dy, dz]);
            }
        }
    }
    out
}

impl BallGrid {
    pub fn new(a: f64, n_per_axis: usize) -> Result<Self> {
        if !(a > 0.0) || n_per_axis < 2 {
            return Err(Error::InvalidArgument(format!("ball grid a = {a}, n = {n_per_axis}")));
        }
        let n = n_per_axis;
        let h = 2.0 * a / n as f64;
        let offs = subsample_offsets(h);
        let mut cell_centers = Vec::new();
        let mut cell_ijk = Vec::new();
        let mut occupancy = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = [i, j, k].map(|t| -a + (t as f64 + 0.5) * h);
                    let inside = offs
                        .iter()
                        .filter(|o| {
                            let p = [c[0] + o[0], c[1] + o[1], c[2] + o[2]];
                            p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= a * a
                        })
                        .count();
                    if inside > 0 {
                        cell_centers.push(c);
                        cell_ijk.push([i, j, k]);
                        occupancy.push(inside as f64 / offs.len() as f64);
                    }
                }
            }
        }
        Ok(Self {
            a,
            n_per_axis: n,
            h,
            cell_volume: h * h * h,
            cell_centers,
            cell_ijk,
            occupancy,
        })
    }

    pub fn len(&self) -> usize {
        self.cell_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_centers.is_empty()
    }

    /// `Σ occupancy · h³`, the discretized ball volume.
    pub fn effective_volume(&self) -> f64 {
        self.occupancy.iter().sum::<f64>() * self.cell_volume
    }

    /// Cell averages of `q` over sub-samples (zero outside the support).
    pub fn cell_average(&self, q: &Potential) -> Vec<f64> {
        let offs = subsample_offsets(self.h);
        self.cell_centers
            .iter()
            .map(|c| {
                offs.iter()
                    .map(|o| q.eval(&[c[0] + o[0], c[1] + o[1], c[2] + o[2]]))
                    .sum::<f64>()
                    / offs.len() as f64
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn effective_volume_close_to_ball() {
        for &n in &[16, 24] {
            let g = BallGrid::new(1.0, n).unwrap();
            let v = g.effective_volume();
            let exact = 4.0 * PI / 3.0;
            assert!((v / exact - 1.0).abs() < 1e-2, "n={n}: {v}");
            let raw = g.len() as f64 * g.cell_volume;
            assert!(raw >= v);
        }
    }

    #[test]
    fn centers_near_ball() {
        let g = BallGrid::new(1.0, 16).unwrap();
        let half_diag = g.h * 3f64.sqrt() / 2.0;
        for c in &g.cell_centers {
            let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            assert!(r <= 1.0 + half_diag);
        }
    }

    #[test]
    fn cell_average_of_constant_is_occupancy() {
        let g = BallGrid::new(1.0, 12).unwrap();
        let q = Potential::constant_well(-2.0, 1.0);
        for (v, o) in g.cell_average(&q).iter().zip(&g.occupancy) {
            assert!((v + 2.0 * o).abs() < 1e-14);
        }
    }
}
