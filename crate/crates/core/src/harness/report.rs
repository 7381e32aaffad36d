use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::InversionResult;

/// 17 significant digits; empty for values that do not apply.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Schema(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Schema(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub const REPORT_HEADER: [&str; 21] = [
    "experiment_id",
    "mode",
    "lambda_x",
    "lambda_y",
    "lambda_z",
    "re_qhat",
    "im_qhat",
    "re_qtilde_true",
    "im_qtilde_true",
    "abs_err",
    "theta_norm",
    "kappa",
    "scale",
    "residual_d",
    "a_nu",
    "L_A",
    "delta",
    "N_delta",
    "mu_delta",
    "theta_lower_bound",
    "failure_code",
];

/// One inversion output row; a flagged row has no `q̂` and carries `failure_code`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment_id: String,
    pub mode: String,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub lambda_z: f64,
    pub re_qhat: Option<f64>,
    pub im_qhat: Option<f64>,
    pub re_qtilde_true: f64,
    pub im_qtilde_true: f64,
    pub abs_err: Option<f64>,
    pub theta_norm: Option<f64>,
    pub kappa: Option<f64>,
    pub scale: Option<f64>,
    pub residual_d: Option<f64>,
    pub a_nu: Option<f64>,
    #[serde(rename = "L_A")]
    pub l_a: usize,
    pub delta: f64,
    #[serde(rename = "N_delta")]
    pub n_delta: Option<usize>,
    pub mu_delta: Option<f64>,
    pub theta_lower_bound: Option<f64>,
    pub failure_code: Option<String>,
}

/// Noise schedule columns of a row.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScheduleColumns {
    pub n_delta: Option<usize>,
    pub mu_delta: Option<f64>,
    pub theta_lower_bound: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ReportRow {
    pub fn new(id: &str, mode: &str, r: &InversionResult, truth: Complex64, sched: ScheduleColumns) -> Self {
        let q = r.q_hat.filter(|q| q.re.is_finite() && q.im.is_finite());
        let ok = q.is_some();
        let pick = |v: f64| if ok { finite(v) } else { None };
        let failure_code = match (&r.flag, ok) {
            (Some(f), _) => Some(f.clone()),
            (None, false) => Some("NonFinite".to_string()),
            (None, true) => None,
        };
        Self {
            experiment_id: id.to_string(),
            mode: mode.to_string(),
            lambda_x: r.lambda[0],
            lambda_y: r.lambda[1],
            lambda_z: r.lambda[2],
            re_qhat: q.map(|q| q.re),
            im_qhat: q.map(|q| q.im),
            re_qtilde_true: truth.re,
            im_qtilde_true: truth.im,
            abs_err: q.map(|q| (q - truth).norm()),
            theta_norm: pick(r.theta_norm()),
            kappa: pick(r.kappa()),
            scale: pick(r.scale),
            residual_d: pick(r.residual_d),
            a_nu: pick(r.a_nu),
            l_a: r.l_a,
            delta: r.delta,
            n_delta: sched.n_delta,
            mu_delta: sched.mu_delta,
            theta_lower_bound: sched.theta_lower_bound,
            failure_code,
        }
    }

    pub fn lambda(&self) -> [f64; 3] {
        [self.lambda_x, self.lambda_y, self.lambda_z]
    }

    pub fn q_hat(&self) -> Option<Complex64> {
        Some(Complex64::new(self.re_qhat?, self.im_qhat?))
    }

    pub fn record(&self) -> Vec<String> {
        vec![
            self.experiment_id.clone(),
            self.mode.clone(),
            fmt_f64(self.lambda_x),
            fmt_f64(self.lambda_y),
            fmt_f64(self.lambda_z),
            fmt_opt(self.re_qhat),
            fmt_opt(self.im_qhat),
            fmt_f64(self.re_qtilde_true),
            fmt_f64(self.im_qtilde_true),
            fmt_opt(self.abs_err),
            fmt_opt(self.theta_norm),
            fmt_opt(self.kappa),
            fmt_opt(self.scale),
            fmt_opt(self.residual_d),
            fmt_opt(self.a_nu),
            self.l_a.to_string(),
            fmt_f64(self.delta),
            self.n_delta.map_or_else(String::new, |n| n.to_string()),
            fmt_opt(self.mu_delta),
            fmt_opt(self.theta_lower_bound),
            self.failure_code.clone().unwrap_or_default(),
        ]
    }
}

pub fn report_bytes(rows: &[ReportRow]) -> Result<Vec<u8>> {
    csv_bytes(&REPORT_HEADER, rows.iter().map(ReportRow::record))
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Schema(format!("{} row {}: {e}", path.display(), i + 1))))
        .collect()
}
