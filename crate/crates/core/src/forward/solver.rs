use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::directions::RealDirection;
use crate::error::{Error, Result};

use super::{BallGrid, Potential};

const GMRES_TOL: f64 = 1e-12;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_ITERS: usize = 600;

/// Outgoing kernel `e^{i r} / (4π r)`.
#[inline]
pub fn green(r: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (4.0 * PI * r), r)
}

/// `∫_{|y|<R} e^{i|y|}/(4π|y|) dy = ∫_0^R r e^{ir} dr`.
pub fn self_cell_integral(radius: f64) -> Complex64 {
    let e = Complex64::from_polar(1.0, radius);
    let i = Complex64::i();
    -i * radius * e + e - 1.0
}

struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // innermost axis: contiguous rows
        plan.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        // middle axis
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    line[j] = data[(i * n + j) * n + k];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for j in 0..n {
                    data[(i * n + j) * n + k] = line[j];
                }
            }
        }
        // outer axis
        for j in 0..n {
            for k in 0..n {
                for i in 0..n {
                    line[i] = data[(i * n + j) * n + k];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for i in 0..n {
                    data[(i * n + j) * n + k] = line[i];
                }
            }
        }
        if inverse {
            let s = 1.0 / (n * n * n) as f64;
            for v in data.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// Solution of the discretized Lippmann–Schwinger equation for one incident direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringField {
    pub values: Vec<Complex64>,
    pub incident_dir: RealDirection,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// `(I + T_q) u = e^{iα·x}` on a [`BallGrid`], kernel applied by FFT convolution.
///
/// The convolution kernel is midpoint `g(x_i - x_j) h³` off the diagonal and the
/// equal-volume-ball integral on it.
pub struct ForwardSolver {
    grid: BallGrid,
    q_cell: Vec<f64>,
    kernel_hat: Vec<Complex64>,
    fft: Fft3,
    zero: bool,
}

impl ForwardSolver {
    pub fn new(q: &Potential, grid: BallGrid) -> Result<Self> {
        q.validate()?;
        if (grid.a - q.support_radius_a).abs() > 1e-12 * q.support_radius_a {
            return Err(Error::InvalidArgument(format!(
                "grid radius {} does not match support radius {}",
                grid.a, q.support_radius_a
            )));
        }
        let q_cell = grid.cell_average(q);
        let zero = q_cell.iter().all(|v| *v == 0.0);
        let n = grid.n_per_axis;
        let m = 2 * n;
        let h = grid.h;
        let self_radius = (3.0 / (4.0 * PI)).cbrt() * h;
        let mut kernel = vec![Complex64::new(0.0, 0.0); m * m * m];
        let wrap = |t: usize| -> f64 {
            if t < n {
                t as f64
            } else if t == n {
                0.0
            } else {
                t as f64 - m as f64
            }
        };
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    if i == n || j == n || k == n {
                        continue;
                    }
                    let d = [wrap(i), wrap(j), wrap(k)];
                    let r = h * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    kernel[(i * m + j) * m + k] = if r == 0.0 {
                        self_cell_integral(self_radius)
                    } else {
                        green(r) * grid.cell_volume
                    };
                }
            }
        }
        let fft = Fft3::new(m);
        fft.run(&mut kernel, false);
        Ok(Self {
            grid,
            q_cell,
            kernel_hat: kernel,
            fft,
            zero,
        })
    }

    pub fn grid(&self) -> &BallGrid {
        &self.grid
    }

    /// Cell-averaged potential values.
    pub fn q_cell(&self) -> &[f64] {
        &self.q_cell
    }

    /// `(T_q u)` at the cell centers.
    fn apply_t(&self, u: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid.n_per_axis;
        let m = 2 * n;
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m * m];
        for ((ijk, q), v) in self.grid.cell_ijk.iter().zip(&self.q_cell).zip(u) {
            buf[(ijk[0] * m + ijk[1]) * m + ijk[2]] = v * *q;
        }
        self.fft.run(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft.run(&mut buf, true);
        self.grid
            .cell_ijk
            .iter()
            .map(|ijk| buf[(ijk[0] * m + ijk[1]) * m + ijk[2]])
            .collect()
    }

    /// `(I + T_q) u`.
    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let t = self.apply_t(u);
        u.iter().zip(t).map(|(a, b)| a + b).collect()
    }

    pub fn incident(&self, alpha: &RealDirection) -> Vec<Complex64> {
        self.grid
            .cell_centers
            .iter()
            .map(|x| Complex64::from_polar(1.0, alpha.dot(x)))
            .collect()
    }

    pub fn solve(&self, alpha: &RealDirection) -> Result<ScatteringField> {
        let b = self.incident(alpha);
        if self.zero {
            return Ok(ScatteringField {
                values: b,
                incident_dir: *alpha,
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        let (values, iterations, rel) = gmres(|v| self.apply(v), &b, GMRES_TOL, GMRES_RESTART, GMRES_MAX_ITERS)?;
        Ok(ScatteringField {
            values,
            incident_dir: *alpha,
            iterations,
            relative_residual: rel,
        })
    }

    /// `A(α′, α) = -(1/4π) Σ e^{-iα′·x} u q h³`.
    pub fn amplitude(&self, field: &ScatteringField, alpha_out: &RealDirection) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for ((x, q), u) in self.grid.cell_centers.iter().zip(&self.q_cell).zip(&field.values) {
            s += Complex64::from_polar(*q, -alpha_out.dot(x)) * u;
        }
        -s * self.grid.cell_volume / (4.0 * PI)
    }

    /// Field at a point away from the grid, `u_inc(x) - Σ g(x - y) q u h³`.
    pub fn field_at(&self, field: &ScatteringField, x: &[f64; 3]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for ((y, q), u) in self.grid.cell_centers.iter().zip(&self.q_cell).zip(&field.values) {
            if *q == 0.0 {
                continue;
            }
            let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            s += green(r) * *q * u;
        }
        Complex64::from_polar(1.0, field.incident_dir.dot(x)) - s * self.grid.cell_volume
    }

    /// Dense `I + T_q` (row-major), for small grids only.
    pub fn dense_matrix(&self) -> faer::Mat<Complex64> {
        let mm = self.grid.len();
        let h = self.grid.h;
        let self_radius = (3.0 / (4.0 * PI)).cbrt() * h;
        let diag = self_cell_integral(self_radius);
        faer::Mat::from_fn(mm, mm, |i, j| {
            let k = if i == j {
                diag
            } else {
                let a = self.grid.cell_ijk[i];
                let b = self.grid.cell_ijk[j];
                let d = [0, 1, 2].map(|t| a[t] as f64 - b[t] as f64);
                green(h * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()) * self.grid.cell_volume
            };
            let id = if i == j { 1.0 } else { 0.0 };
            k * self.q_cell[j] + id
        })
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations.
pub(crate) fn gmres<F>(
    apply: F,
    b: &[Complex64],
    tol: f64,
    restart: usize,
    max_iters: usize,
) -> Result<(Vec<Complex64>, usize, f64)>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut total = 0;
    loop {
        let ax = apply(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= tol * bnorm {
            return Ok((x, total, beta / bnorm));
        }
        if total >= max_iters {
            return Err(Error::SolverFailure(format!(
                "GMRES stalled at relative residual {:e} after {total} iterations",
                beta / bnorm
            )));
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|c| c / beta).collect()];
        let mut hcols: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<(f64, Complex64)> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut k = 0;
        while k < restart && total < max_iters {
            let mut w = apply(&basis[k]);
            let mut hcol = vec![Complex64::new(0.0, 0.0); k + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dotc(v, &w);
                hcol[i] = hij;
                for (wt, vt) in w.iter_mut().zip(v) {
                    *wt -= hij * vt;
                }
            }
            let wn = norm(&w);
            hcol[k + 1] = Complex64::new(wn, 0.0);
            for (i, (c, s)) in cs.iter().enumerate() {
                let a = hcol[i];
                let bb = hcol[i + 1];
                hcol[i] = a * *c + s * bb;
                hcol[i + 1] = -s.conj() * a + bb * *c;
            }
            let a = hcol[k];
            let bb = hcol[k + 1];
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if den == 0.0 {
                (1.0, Complex64::new(0.0, 0.0))
            } else if a.norm() == 0.0 {
                (0.0, bb.conj() / bb.norm())
            } else {
                let c = a.norm() / den;
                let s = (a / a.norm()) * bb.conj() / den;
                (c, s)
            };
            hcol[k] = a * c + s * bb;
            hcol[k + 1] = Complex64::new(0.0, 0.0);
            let gk = g[k];
            g[k] = gk * c;
            g.push(-s.conj() * gk);
            cs.push((c, s));
            hcols.push(hcol);
            total += 1;
            k += 1;
            let res = g[k].norm();
            if wn > 0.0 {
                basis.push(w.iter().map(|c| c / wn).collect());
            }
            if res <= tol * bnorm || wn == 0.0 {
                break;
            }
        }
        let mut y = vec![Complex64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= hcols[j][i] * y[j];
            }
            y[i] = s / hcols[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (xt, vt) in x.iter_mut().zip(&basis[j]) {
                *xt += yj * vt;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::directions::make_real_dir;

    #[test]
    fn self_cell_matches_quadrature() {
        let r: f64 = 0.17;
        let nq = 20000;
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..nq {
            let t = (k as f64 + 0.5) / nq as f64 * r;
            s += t * Complex64::from_polar(1.0, t) * (r / nq as f64);
        }
        assert!((s - self_cell_integral(r)).norm() < 1e-9);
    }

    #[test]
    fn zero_potential_gives_incident_field() {
        let g = BallGrid::new(1.0, 8).unwrap();
        let s = ForwardSolver::new(&Potential::zero(1.0), g).unwrap();
        let a = make_real_dir(0.3, 1.1);
        let f = s.solve(&a).unwrap();
        assert_eq!(f.values, s.incident(&a));
        assert_eq!(s.amplitude(&f, &make_real_dir(1.0, 2.0)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn fft_operator_matches_dense() {
        let g = BallGrid::new(1.0, 6).unwrap();
        let s = ForwardSolver::new(&Potential::constant_well(-1.0, 1.0), g).unwrap();
        let m = s.dense_matrix();
        let u: Vec<Complex64> = (0..s.grid().len())
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let fast = s.apply(&u);
        for i in 0..u.len() {
            let mut d = Complex64::new(0.0, 0.0);
            for j in 0..u.len() {
                d += m[(i, j)] * u[j];
            }
            assert!((d - fast[i]).norm() < 1e-12, "{i}");
        }
    }

    #[test]
    fn gmres_solves_to_tolerance() {
        let g = BallGrid::new(1.0, 8).unwrap();
        let s = ForwardSolver::new(&Potential::constant_well(-1.0, 1.0), g).unwrap();
        let a = make_real_dir(0.9, 0.2);
        let f = s.solve(&a).unwrap();
        let r = s.apply(&f.values);
        let b = s.incident(&a);
        let res: f64 = r.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        assert!(res <= 1e-11 * norm(&b));
        assert!(f.iterations < 40);
    }
}
