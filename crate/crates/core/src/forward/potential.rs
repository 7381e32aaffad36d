use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::directions::{gauss_legendre, norm3};
use crate::error::{Error, Result};
use crate::specfun::sph_bessel_j;

/// Shape of a compactly supported real potential.
///
/// Every kind is radial about `center` (the origin unless stated), which
/// keeps a closed or one-dimensional Fourier transform available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `q0` on `|x| <= a`.
    ConstantWell { q0: f64 },
    /// `Σ c_k (|x|/a)^k` on `|x| <= a`.
    RadialPolynomial { coeffs: Vec<f64> },
    /// `amplitude · exp(-sharpness ρ²/(1-ρ²))`, `ρ = |x - center| / radius`.
    SmoothBump {
        amplitude: f64,
        sharpness: f64,
        #[serde(default)]
        center: [f64; 3],
        #[serde(default)]
        radius: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    #[serde(rename = "a")]
    pub support_radius_a: f64,
    #[serde(flatten)]
    pub kind: PotentialKind,
    #[serde(default, rename = "C")]
    pub gradient_bound_c: f64,
}

impl Potential {
    pub fn new(a: f64, kind: PotentialKind, gradient_bound_c: f64) -> Result<Self> {
        let p = Self {
            support_radius_a: a,
            kind,
            gradient_bound_c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn constant_well(q0: f64, a: f64) -> Self {
        Self {
            support_radius_a: a,
            kind: PotentialKind::ConstantWell { q0 },
            gradient_bound_c: q0.abs(),
        }
    }

    pub fn zero(a: f64) -> Self {
        Self::constant_well(0.0, a)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.support_radius_a;
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidArgument(format!("support radius {a}")));
        }
        match &self.kind {
            PotentialKind::ConstantWell { q0 } if !q0.is_finite() => {
                Err(Error::InvalidArgument("q0 must be finite".into()))
            }
            PotentialKind::RadialPolynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::InvalidArgument("polynomial coefficients must be finite".into()))
            }
            PotentialKind::SmoothBump { sharpness, center, .. } => {
                if !(*sharpness > 0.0) {
                    return Err(Error::InvalidArgument("bump sharpness must be positive".into()));
                }
                let r = self.bump_radius();
                if !(r > 0.0) || norm3(center) + r > a * (1.0 + 1e-12) {
                    return Err(Error::InvalidArgument(format!(
                        "bump of radius {r} at {center:?} leaves the ball of radius {a}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn bump_radius(&self) -> f64 {
        match &self.kind {
            PotentialKind::SmoothBump { center, radius, .. } => radius.unwrap_or(self.support_radius_a - norm3(center)),
            _ => self.support_radius_a,
        }
    }

    /// Center of radial symmetry.
    pub fn center(&self) -> [f64; 3] {
        match &self.kind {
            PotentialKind::SmoothBump { center, .. } => *center,
            _ => [0.0; 3],
        }
    }

    pub fn is_radial(&self) -> bool {
        self.center() == [0.0; 3]
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::ConstantWell { q0 } => *q0 == 0.0,
            PotentialKind::RadialPolynomial { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            PotentialKind::SmoothBump { amplitude, .. } => *amplitude == 0.0,
        }
    }

    /// Radius of the profile's own support about [`Potential::center`].
    pub fn profile_radius(&self) -> f64 {
        self.bump_radius()
    }

    /// Profile value at distance `r` from the center.
    pub fn profile(&self, r: f64) -> f64 {
        let a = self.support_radius_a;
        match &self.kind {
            PotentialKind::ConstantWell { q0 } => {
                if r <= a {
                    *q0
                } else {
                    0.0
                }
            }
            PotentialKind::RadialPolynomial { coeffs } => {
                if r > a {
                    return 0.0;
                }
                let s = r / a;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
            }
            PotentialKind::SmoothBump {
                amplitude, sharpness, ..
            } => {
                let rho = r / self.bump_radius();
                if rho >= 1.0 {
                    0.0
                } else {
                    let r2 = rho * rho;
                    amplitude * (-sharpness * r2 / (1.0 - r2)).exp()
                }
            }
        }
    }

    /// Profile derivative in `r`.
    pub fn profile_derivative(&self, r: f64) -> f64 {
        let a = self.support_radius_a;
        match &self.kind {
            PotentialKind::ConstantWell { .. } => 0.0,
            PotentialKind::RadialPolynomial { coeffs } => {
                if r > a {
                    return 0.0;
                }
                let s = r / a;
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| k as f64 * c * s.powi(k as i32 - 1))
                    .sum::<f64>()
                    / a
            }
            PotentialKind::SmoothBump { sharpness, .. } => {
                let rr = self.bump_radius();
                let rho = r / rr;
                if rho >= 1.0 {
                    return 0.0;
                }
                let r2 = rho * rho;
                let dexp = -sharpness * 2.0 * rho / (1.0 - r2).powi(2) / rr;
                self.profile(r) * dexp
            }
        }
    }

    /// `q(x)`.
    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        let c = self.center();
        let d = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
        if norm3(x) > self.support_radius_a {
            return 0.0;
        }
        self.profile(norm3(&d))
    }

    /// Sampled `sup|q| + sup|∇q|` over the profile.
    pub fn sup_norm_plus_gradient(&self, samples: usize) -> f64 {
        let rr = self.profile_radius();
        let mut sq: f64 = 0.0;
        let mut sg: f64 = 0.0;
        for i in 0..=samples {
            let r = rr * i as f64 / samples as f64;
            sq = sq.max(self.profile(r).abs());
            sg = sg.max(self.profile_derivative(r).abs());
        }
        sq + sg
    }

    /// Radial Fourier transform of the profile: `4π ∫ q(r) j0(s r) r² dr`.
    fn profile_transform(&self, s: f64) -> f64 {
        if let PotentialKind::ConstantWell { q0 } = self.kind {
            let a = self.support_radius_a;
            if s * a < 1e-3 {
                let x2 = (s * a).powi(2);
                return q0 * 4.0 * PI * a.powi(3) / 3.0 * (1.0 - x2 / 10.0 + x2 * x2 / 280.0);
            }
            let x = s * a;
            return 4.0 * PI * q0 * (x.sin() - x * x.cos()) / s.powi(3);
        }
        let rr = self.profile_radius();
        let panels = ((s * rr / 2.0).ceil() as usize).max(1) + 2;
        let (gx, gw) = gauss_legendre(24);
        let mut sum = 0.0;
        for p in 0..panels {
            let lo = rr * p as f64 / panels as f64;
            let hi = rr * (p + 1) as f64 / panels as f64;
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in gx.iter().zip(&gw) {
                let r = mid + half * x;
                sum += w * half * self.profile(r) * sph_bessel_j(0, s * r) * r * r;
            }
        }
        4.0 * PI * sum
    }

    /// `q̃(λ) = ∫ q(x) e^{-iλ·x} dx`.
    pub fn fourier_transform(&self, lambda: &[f64; 3]) -> num_complex::Complex64 {
        let s = norm3(lambda);
        let c = self.center();
        let phase = -(lambda[0] * c[0] + lambda[1] * c[1] + lambda[2] * c[2]);
        num_complex::Complex64::from_polar(1.0, phase) * self.profile_transform(s)
    }

    /// Same potential with every value multiplied by `eps`.
    pub fn scaled(&self, eps: f64) -> Self {
        let kind = match &self.kind {
            PotentialKind::ConstantWell { q0 } => PotentialKind::ConstantWell { q0: q0 * eps },
            PotentialKind::RadialPolynomial { coeffs } => PotentialKind::RadialPolynomial {
                coeffs: coeffs.iter().map(|c| c * eps).collect(),
            },
            PotentialKind::SmoothBump {
                amplitude,
                sharpness,
                center,
                radius,
            } => PotentialKind::SmoothBump {
                amplitude: amplitude * eps,
                sharpness: *sharpness,
                center: *center,
                radius: *radius,
            },
        };
        Self {
            support_radius_a: self.support_radius_a,
            kind,
            gradient_bound_c: self.gradient_bound_c * eps.abs(),
        }
    }
}
