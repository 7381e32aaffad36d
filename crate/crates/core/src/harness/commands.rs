use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude_data::{add_noise, harmonic_coefficients, mu, truncation_n, AmplitudeMatrix, Schedules};
use crate::directions::s2_quadrature;
use crate::error::{Error, Result};
use crate::forward::{partial_wave_matrix, BallGrid, ForwardSolver, Potential, SolveStats};
use crate::fourier_recovery::{cartesian_lambda_grid, recover_q, FourierSamples};
use crate::inversion::{
    annulus_grid, calibrate_c, default_l_nu_exact, default_l_nu_noisy, invert_exact, invert_noisy, theta_lower_bound,
    AnnulusGrid, ExteriorData, HTrace, InversionResult, InversionSetup,
};

use super::config::{CCal, DataSource, ExperimentConfig};
use super::report::{
    csv_bytes, fmt_f64, read_report, report_bytes, write_atomic, write_json, ReportRow, ScheduleColumns,
};

/// Partial-wave degree used for oracle synthesis.
pub const PW_LMAX: usize = 40;

/// Reference noise level at which `"calibrate"` evaluates the selection constant.
pub const CALIBRATION_DELTA: f64 = 1e-3;

/// Largest ball grid whose dense `I + T_q` is factored for a condition number.
pub const DENSE_CELL_LIMIT: usize = 1500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Noisy,
    Alt,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Noisy => "noisy",
            Mode::Alt => "alt",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "noisy" => Ok(Mode::Noisy),
            "alt" => Ok(Mode::Alt),
            _ => Err(Error::InvalidArgument(format!(
                "mode `{s}`: expected exact, noisy or alt"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardDiagnostics {
    pub experiment_id: String,
    pub data_source: DataSource,
    pub sphere_order: usize,
    pub directions: usize,
    pub n_per_axis: Option<usize>,
    pub solve: Option<SolveStats>,
    /// Dense 2-norm condition number of `I + T_q`; small grids only.
    pub condition_number: Option<f64>,
    /// `max |A − A_pw| / max |A_pw|` for radial potentials.
    pub oracle_residual: Option<f64>,
}

/// Exact amplitude matrix for `q` on the configured sphere quadrature.
pub fn synthesize(
    q: &Potential,
    source: DataSource,
    sphere_order: usize,
    n_per_axis: usize,
) -> Result<(AmplitudeMatrix, Option<ForwardSolver>, Option<SolveStats>)> {
    let quad = s2_quadrature(sphere_order);
    match source {
        DataSource::PartialWave => Ok((partial_wave_matrix(q, &quad, PW_LMAX)?, None, None)),
        DataSource::Volume => {
            let solver = ForwardSolver::new(q, BallGrid::new(q.support_radius_a, n_per_axis)?)?;
            let (a, _, stats) = solver.amplitude_matrix_with_fields(&quad, false)?;
            Ok((a, Some(solver), Some(stats)))
        }
    }
}

/// Relative sup distance to the partial-wave oracle.
pub fn oracle_residual(q: &Potential, a: &AmplitudeMatrix) -> Result<f64> {
    let pw = partial_wave_matrix(q, &a.quad, PW_LMAX)?;
    let scale = pw.max_abs();
    let d = a.sup_distance(&pw);
    Ok(if scale > 0.0 { d / scale } else { d })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutputs {
    pub amplitude: PathBuf,
    pub diagnostics: PathBuf,
}

pub fn cmd_forward(cfg: &ExperimentConfig, out: &Path) -> Result<ForwardOutputs> {
    let (a, solver, solve) = synthesize(
        &cfg.potential,
        cfg.data_source,
        cfg.grid.sphere_order,
        cfg.grid.n_per_axis,
    )?;
    let condition_number = solver
        .as_ref()
        .filter(|s| s.grid().len() <= DENSE_CELL_LIMIT)
        .map(|s| s.condition_number());
    let oracle = match (cfg.data_source, cfg.potential.is_radial()) {
        (DataSource::Volume, true) => Some(oracle_residual(&cfg.potential, &a)?),
        _ => None,
    };
    let diag = ForwardDiagnostics {
        experiment_id: cfg.id.clone(),
        data_source: cfg.data_source,
        sphere_order: cfg.grid.sphere_order,
        directions: a.n(),
        n_per_axis: solver.as_ref().map(|_| cfg.grid.n_per_axis),
        solve,
        condition_number,
        oracle_residual: oracle,
    };
    let outputs = ForwardOutputs {
        amplitude: out.join("amplitude.json"),
        diagnostics: out.join("forward_diagnostics.json"),
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    a.save(&outputs.amplitude)?;
    write_json(&outputs.diagnostics, &diag)?;
    Ok(outputs)
}

/// Everything `invert` and the sweep share for one exact amplitude matrix.
pub struct InversionInputs<'a> {
    pub cfg: &'a ExperimentConfig,
    pub amplitude: &'a AmplitudeMatrix,
    pub schedules: Schedules,
    pub annulus: AnnulusGrid,
    pub lambdas: Vec<[f64; 3]>,
}

impl<'a> InversionInputs<'a> {
    pub fn new(cfg: &'a ExperimentConfig, amplitude: &'a AmplitudeMatrix) -> Result<Self> {
        if amplitude.delta != 0.0 {
            return Err(Error::Schema(
                "amplitude file must hold exact data; noise is injected by invert".into(),
            ));
        }
        let schedules = cfg.schedules()?;
        let annulus = annulus_grid(&schedules, cfg.grid.annulus_radial_order, cfg.grid.annulus_sphere_order)?;
        let lambdas = cartesian_lambda_grid(cfg.lambda_grid.radius, cfg.lambda_grid.spacing)?;
        Ok(Self {
            cfg,
            amplitude,
            schedules,
            annulus,
            lambdas,
        })
    }

    pub fn with_lambdas(mut self, lambdas: Vec<[f64; 3]>) -> Self {
        self.lambdas = lambdas;
        self
    }

    fn data_degree(&self) -> usize {
        self.amplitude.quad.max_harmonic_degree()
    }

    /// Configured `L_ν`, or the exact-data default for the largest scale, capped by the data degree.
    pub fn l_nu_exact(&self) -> usize {
        let smax = self.cfg.inversion.scales.iter().cloned().fold(0.0, f64::max);
        let kappa = (smax * smax - 1.0).max(0.0).sqrt();
        self.cfg
            .inversion
            .l_nu
            .unwrap_or_else(|| default_l_nu_exact(self.schedules.b, kappa))
            .min(self.data_degree())
    }

    pub fn l_nu_noisy(&self, delta: f64) -> Result<usize> {
        Ok(match self.cfg.inversion.l_nu {
            Some(l) => l,
            None => default_l_nu_noisy(delta)?,
        }
        .min(self.data_degree()))
    }

    fn truth(&self, lambda: &[f64; 3]) -> Complex64 {
        self.cfg.potential.fourier_transform(lambda)
    }

    fn rows(&self, mode: Mode, results: &[InversionResult], sched: ScheduleColumns) -> Vec<ReportRow> {
        results
            .iter()
            .map(|r| ReportRow::new(&self.cfg.id, mode.as_str(), r, self.truth(&r.lambda), sched))
            .collect()
    }

    fn noisy_schedule(&self, delta: f64) -> Result<ScheduleColumns> {
        Ok(ScheduleColumns {
            n_delta: Some(truncation_n(delta)?),
            mu_delta: Some(mu(delta, &self.schedules)?),
            theta_lower_bound: theta_lower_bound(delta, &self.schedules).ok(),
        })
    }

    pub fn exact_results(&self) -> Result<Vec<InversionResult>> {
        let coeffs = harmonic_coefficients(self.amplitude, self.data_degree())?;
        let inv = &self.cfg.inversion;
        invert_exact(
            &coeffs,
            &self.lambdas,
            &self.annulus,
            &inv.scales,
            self.l_nu_exact(),
            inv.ridge,
            None,
        )
    }

    pub fn exact_rows(&self) -> Result<Vec<ReportRow>> {
        Ok(self.rows(Mode::Exact, &self.exact_results()?, ScheduleColumns::default()))
    }

    /// The configured selection constant, or one calibrated on exact results at [`CALIBRATION_DELTA`].
    pub fn selection_constant(&self) -> Result<f64> {
        match self.cfg.inversion.c_cal {
            CCal::Value(c) => Ok(c),
            CCal::Keyword(_) => calibrate_c(&self.exact_results()?, &self.schedules, CALIBRATION_DELTA),
        }
    }

    /// Per-δ noisy rows, all with the same selection constant.
    pub fn noisy_rows(&self) -> Result<Vec<ReportRow>> {
        let inv = &self.cfg.inversion;
        let c = self.selection_constant()?;
        let mut rows = Vec::new();
        for &delta in &self.cfg.noise.delta {
            let noisy = add_noise(self.amplitude, delta, self.cfg.noise.seed)?;
            let res = invert_noisy(
                &noisy,
                delta,
                &self.lambdas,
                &self.schedules,
                &self.annulus,
                &inv.kappa_grid,
                Some(self.l_nu_noisy(delta)?),
                inv.ridge,
                c,
            )?;
            rows.extend(self.rows(Mode::Noisy, &res, self.noisy_schedule(delta)?));
        }
        Ok(rows)
    }

    /// Alternative method on exact data and on each noisy level, with the `H` trace.
    pub fn alt_rows(&self) -> Result<(Vec<ReportRow>, Vec<TraceRow>)> {
        let mut rows = Vec::new();
        let mut trace = Vec::new();
        let mut levels = vec![0.0];
        levels.extend(&self.cfg.noise.delta);
        for delta in levels {
            let (coeffs, l_nu, sched) = if delta == 0.0 {
                let c = harmonic_coefficients(self.amplitude, self.data_degree())?;
                (c, self.l_nu_exact(), ScheduleColumns::default())
            } else {
                let noisy = add_noise(self.amplitude, delta, self.cfg.noise.seed)?;
                let c = harmonic_coefficients(&noisy, truncation_n(delta)?)?;
                (c, self.l_nu_noisy(delta)?, self.noisy_schedule(delta)?)
            };
            let setup = InversionSetup::new(
                ExteriorData::full(&coeffs),
                &self.annulus,
                l_nu,
                self.cfg.inversion.ridge,
            )?;
            let out: Vec<(InversionResult, Vec<HTrace>)> = self
                .lambdas
                .par_iter()
                .map(
                    |&l| match setup.alt_method(delta, l, &self.schedules, &self.cfg.inversion.kappa_grid) {
                        Ok(a) => (a.result, a.trace),
                        Err(e) => (InversionResult::flagged(l, coeffs.l_max, delta, &e), Vec::new()),
                    },
                )
                .collect();
            let mut results = Vec::with_capacity(out.len());
            for (r, t) in out {
                trace.extend(t.into_iter().map(|h| TraceRow {
                    lambda: r.lambda,
                    delta,
                    h,
                }));
                results.push(r);
            }
            rows.extend(self.rows(Mode::Alt, &results, sched));
        }
        Ok((rows, trace))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub lambda: [f64; 3],
    pub delta: f64,
    pub h: HTrace,
}

pub const TRACE_HEADER: [&str; 9] = [
    "lambda_x",
    "lambda_y",
    "lambda_z",
    "delta",
    "kappa",
    "theta_norm",
    "residual_d",
    "a_nu",
    "H",
];

pub fn trace_bytes(rows: &[TraceRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &TRACE_HEADER,
        rows.iter().map(|t| {
            [
                t.lambda[0],
                t.lambda[1],
                t.lambda[2],
                t.delta,
                t.h.kappa,
                t.h.theta_norm,
                t.h.residual,
                t.h.a_nu,
                t.h.h,
            ]
            .map(fmt_f64)
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertOutputs {
    pub report: PathBuf,
    pub trace: Option<PathBuf>,
    pub rows: usize,
    pub flagged: usize,
}

pub fn cmd_invert(cfg: &ExperimentConfig, amplitude: &Path, mode: Mode, out: &Path) -> Result<InvertOutputs> {
    let a = AmplitudeMatrix::load(amplitude)?;
    if a.a != cfg.schedules.a {
        return Err(Error::Schema(format!(
            "amplitude support radius {} differs from schedules.a {}",
            a.a, cfg.schedules.a
        )));
    }
    if mode != Mode::Exact && cfg.noise.delta.is_empty() {
        return Err(Error::config(
            "noise.delta",
            format!("mode {} needs at least one noise level", mode.as_str()),
        ));
    }
    let inputs = InversionInputs::new(cfg, &a)?;
    let report = out.join(format!("report_{}.csv", mode.as_str()));
    let (rows, trace) = match mode {
        Mode::Exact => (inputs.exact_rows()?, None),
        Mode::Noisy => (inputs.noisy_rows()?, None),
        Mode::Alt => {
            let (r, t) = inputs.alt_rows()?;
            (r, Some(t))
        }
    };
    write_atomic(&report, &report_bytes(&rows)?)?;
    let trace_path = match trace {
        Some(t) => {
            let p = out.join("alt_trace.csv");
            write_atomic(&p, &trace_bytes(&t)?)?;
            Some(p)
        }
        None => None,
    };
    Ok(InvertOutputs {
        report,
        trace: trace_path,
        flagged: rows.iter().filter(|r| r.failure_code.is_some()).count(),
        rows: rows.len(),
    })
}

#[derive(Debug, Deserialize)]
struct QtildeRow {
    lambda_x: f64,
    lambda_y: f64,
    lambda_z: f64,
    re_qtilde: f64,
    im_qtilde: f64,
    #[serde(default)]
    delta: Option<f64>,
}

fn samples_from_rows(
    cfg: &ExperimentConfig,
    nodes: Vec<[f64; 3]>,
    values: Vec<Complex64>,
    deltas: &[f64],
) -> Result<FourierSamples> {
    let delta = deltas.first().copied().unwrap_or(0.0);
    if deltas.iter().any(|d| *d != delta) {
        return Err(Error::Schema(
            "input mixes several noise levels; split it per delta".into(),
        ));
    }
    let s = FourierSamples {
        lambda_nodes: nodes,
        values,
        delta,
        decay_c1: cfg.recovery.c1,
        decay_dtilde: cfg.recovery.dtilde,
        spacing: Some(cfg.lambda_grid.spacing),
    };
    s.validate()?;
    Ok(s)
}

/// Reads Fourier samples from a samples JSON, a `q̃` CSV or an inversion report.
pub fn load_samples(cfg: &ExperimentConfig, input: &Path) -> Result<FourierSamples> {
    if input.extension().is_some_and(|e| e == "json") {
        return FourierSamples::load(input);
    }
    let mut rd = csv::Reader::from_path(input).map_err(|e| Error::Schema(format!("{}: {e}", input.display())))?;
    let headers = rd.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    if headers.iter().any(|h| h == "re_qhat") {
        let rows = read_report(input)?;
        let mut nodes = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        for (i, r) in rows.iter().enumerate() {
            let q = r.q_hat().ok_or_else(|| {
                Error::Schema(format!(
                    "row {} is flagged ({}); recovery needs every node",
                    i + 1,
                    r.failure_code.as_deref().unwrap_or("missing value")
                ))
            })?;
            nodes.push(r.lambda());
            values.push(q);
        }
        let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
        return samples_from_rows(cfg, nodes, values, &deltas);
    }
    let rows: Vec<QtildeRow> = rd
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Schema(format!("{} row {}: {e}", input.display(), i + 1))))
        .collect::<Result<_>>()?;
    let deltas: Vec<f64> = rows.iter().map(|r| r.delta.unwrap_or(0.0)).collect();
    samples_from_rows(
        cfg,
        rows.iter().map(|r| [r.lambda_x, r.lambda_y, r.lambda_z]).collect(),
        rows.iter().map(|r| Complex64::new(r.re_qtilde, r.im_qtilde)).collect(),
        &deltas,
    )
}

pub const RECOVERY_HEADER: [&str; 8] = [
    "x",
    "y",
    "z",
    "q_recovered",
    "q_true",
    "abs_err",
    "lambda0",
    "predicted_bound",
];

/// Recovery at the configured `x` nodes; exact samples use every node, noisy ones stop at `λ₀(δ)`.
pub fn recover_samples(cfg: &ExperimentConfig, s: &FourierSamples) -> Result<(Vec<u8>, f64)> {
    let xs = cartesian_lambda_grid(cfg.recovery.x_grid.radius, cfg.recovery.x_grid.spacing)?;
    let over = (s.delta == 0.0).then(|| s.lambda_max());
    let r = recover_q(s, &xs, over)?;
    let mut worst: f64 = 0.0;
    let rows: Vec<[String; 8]> = r
        .x_nodes
        .iter()
        .zip(&r.q_values)
        .map(|(x, q)| {
            let t = cfg.potential.eval(x);
            worst = worst.max((q - t).abs());
            [
                x[0],
                x[1],
                x[2],
                *q,
                t,
                (q - t).abs(),
                r.lambda0_used,
                r.predicted_error,
            ]
            .map(fmt_f64)
        })
        .collect();
    Ok((csv_bytes(&RECOVERY_HEADER, rows)?, worst))
}

pub fn cmd_recover(cfg: &ExperimentConfig, input: &Path, out: &Path) -> Result<PathBuf> {
    let s = load_samples(cfg, input)?;
    let (bytes, _) = recover_samples(cfg, &s)?;
    let p = out.join("recovery.csv");
    write_atomic(&p, &bytes)?;
    Ok(p)
}

/// Descending `κ` values that reproduce the `|Re θ|` values `scales` at frequency `λ`.
pub fn kappa_grid_for_scales(lambda: [f64; 3], scales: &[f64]) -> Vec<f64> {
    let t2: f64 = lambda.iter().map(|v| v * v).sum();
    let mut k: Vec<f64> = scales
        .iter()
        .map(|s| (s * s - 1.0 + t2 / 4.0).max(0.0).sqrt())
        .collect();
    k.sort_by(|a, b| b.total_cmp(a));
    k.dedup();
    k
}
