use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::amplitude_data::Schedules;
use crate::error::{Error, Result};
use crate::forward::Potential;
use crate::inversion::Ridge;

/// Source of the amplitude matrix written by `forward`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Lippmann–Schwinger solves on the ball grid.
    #[default]
    Volume,
    /// Partial-wave synthesis; radial potentials only.
    PartialWave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_per_axis: usize,
    pub sphere_order: usize,
    pub annulus_radial_order: usize,
    pub annulus_sphere_order: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibrate {
    Calibrate,
}

/// The selection constant: a number, or `"calibrate"` to derive it from exact data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CCal {
    Value(f64),
    Keyword(Calibrate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    /// Degree of ν; `null` picks the mode's default.
    #[serde(rename = "L_nu", default)]
    pub l_nu: Option<usize>,
    #[serde(default)]
    pub ridge: Ridge,
    pub kappa_grid: Vec<f64>,
    pub c_cal: CCal,
    /// `|Re θ|` values tried by the exact pipeline.
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub delta: Vec<f64>,
    pub seed: u64,
}

/// Cartesian nodes `h·(i, j, k)` inside `|λ| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGridConfig {
    pub radius: f64,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    pub c1: f64,
    pub dtilde: f64,
    pub x_grid: LambdaGridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub potential: Potential,
    pub schedules: Schedules,
    pub grid: GridConfig,
    #[serde(default)]
    pub data_source: DataSource,
    pub inversion: InversionConfig,
    pub noise: NoiseConfig,
    pub lambda_grid: LambdaGridConfig,
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub sweep: super::SweepConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.schedules;
        if !(s.a > 0.0 && s.a < s.a1 && s.a1 < s.b && s.b.is_finite()) {
            return Err(Error::config(
                "schedules",
                format!("need 0 < a < a1 < b, got {}, {}, {}", s.a, s.a1, s.b),
            ));
        }
        self.potential
            .validate()
            .map_err(|e| Error::config("potential", e.to_string()))?;
        if self.potential.support_radius_a != s.a {
            return Err(Error::config("potential.a", "must equal schedules.a"));
        }
        if self.grid.n_per_axis < 2 {
            return Err(Error::config("grid.n_per_axis", "must be at least 2"));
        }
        for (name, v) in [
            ("grid.sphere_order", self.grid.sphere_order),
            ("grid.annulus_radial_order", self.grid.annulus_radial_order),
            ("grid.annulus_sphere_order", self.grid.annulus_sphere_order),
        ] {
            if v == 0 {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if self.data_source == DataSource::PartialWave && !self.potential.is_radial() {
            return Err(Error::config("data_source", "partial_wave needs a radial potential"));
        }
        let inv = &self.inversion;
        if inv.kappa_grid.is_empty() || inv.kappa_grid.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::config(
                "inversion.kappa_grid",
                "must be nonempty and strictly descending",
            ));
        }
        if inv.kappa_grid.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::config("inversion.kappa_grid", "entries must be positive"));
        }
        if inv.scales.is_empty() || inv.scales.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::config("inversion.scales", "must be nonempty and positive"));
        }
        if let CCal::Value(c) = inv.c_cal {
            if !(c > 0.0) {
                return Err(Error::config("inversion.c_cal", "must be positive or \"calibrate\""));
            }
        }
        for (i, d) in self.noise.delta.iter().enumerate() {
            if !(*d > 0.0 && *d < (-1.0f64).exp()) {
                return Err(Error::config(
                    format!("noise.delta[{i}]"),
                    format!("{d} must lie in (0, 1/e)"),
                ));
            }
        }
        for (name, g) in [
            ("lambda_grid", &self.lambda_grid),
            ("recovery.x_grid", &self.recovery.x_grid),
        ] {
            if !(g.spacing > 0.0 && g.radius >= 0.0) {
                return Err(Error::config(name, "need spacing > 0 and radius >= 0"));
            }
        }
        if !(self.recovery.c1 > 0.0) {
            return Err(Error::config("recovery.c1", "must be positive"));
        }
        if !(self.recovery.dtilde > 1.5) {
            return Err(Error::config("recovery.dtilde", "must exceed 3/2"));
        }
        Ok(())
    }

    pub fn schedules(&self) -> Result<Schedules> {
        Schedules::new(self.schedules.a, self.schedules.a1, self.schedules.b)
    }
}
