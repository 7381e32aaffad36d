use std::f64::consts::PI;
use std::path::Path;

use isp_core::amplitude_data::AmplitudeMatrix;
use isp_core::fourier_recovery::{cartesian_lambda_grid, error_bound, lambda0};
use isp_core::harness::{cmd_forward, cmd_invert, cmd_recover, read_report, ExperimentConfig, Mode};

fn config(q0: f64, data_source: &str, out: &Path) -> ExperimentConfig {
    let text = format!(
        r#"{{
  "id": "small",
  "potential": {{ "kind": "constant_well", "q0": {q0}, "a": 1.0, "C": 1.0 }},
  "schedules": {{ "a": 1.0, "a1": 1.5, "b": 2.0 }},
  "grid": {{ "n_per_axis": 6, "sphere_order": 8, "annulus_radial_order": 4, "annulus_sphere_order": 12 }},
  "data_source": "{data_source}",
  "inversion": {{
    "L_nu": null,
    "kappa_grid": [2.0, 1.0],
    "c_cal": "calibrate",
    "scales": [1.5]
  }},
  "noise": {{ "delta": [1e-2], "seed": 7 }},
  "lambda_grid": {{ "radius": 1.0, "spacing": 1.0 }},
  "recovery": {{ "c1": 1.0, "dtilde": 2.0, "x_grid": {{ "radius": 0.5, "spacing": 0.5 }} }},
  "out": "{}"
}}"#,
        out.display()
    );
    ExperimentConfig::from_json(&text).unwrap()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn forward_on_zero_potential_writes_zero_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(0.0, "volume", dir.path());
    let out = cmd_forward(&cfg, dir.path()).unwrap();
    let a = AmplitudeMatrix::load(&out.amplitude).unwrap();
    assert!(a.n() > 0);
    assert!(a.entries.iter().all(|z| z.norm() == 0.0));
    let diag: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out.diagnostics).unwrap()).unwrap();
    assert_eq!(diag["experiment_id"], "small");
    assert_eq!(diag["directions"].as_u64().unwrap() as usize, a.n());
}

#[test]
fn exact_invert_report_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(-1.0, "partial_wave", dir.path());
    let fwd = cmd_forward(&cfg, dir.path()).unwrap();
    let out = cmd_invert(&cfg, &fwd.amplitude, Mode::Exact, dir.path()).unwrap();
    let rows = read_report(&out.report).unwrap();
    assert_eq!(rows.len(), out.rows);
    assert_eq!(rows.len(), 7);
    assert_eq!(out.flagged, 0);
    assert!(out.trace.is_none());
    for r in &rows {
        assert_eq!(r.mode, "exact");
        assert!(r.abs_err.unwrap().is_finite());
        assert!(r.theta_norm.unwrap() > 1.0);
        assert_eq!(r.n_delta, None);
    }
    let origin = rows.iter().find(|r| r.lambda() == [0.0; 3]).unwrap();
    assert!((origin.re_qtilde_true + 4.0 * PI / 3.0).abs() < 1e-12);
}

#[test]
fn invert_rejects_noisy_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(-1.0, "partial_wave", dir.path());
    let fwd = cmd_forward(&cfg, dir.path()).unwrap();
    let mut a = AmplitudeMatrix::load(&fwd.amplitude).unwrap();
    a.delta = 1e-3;
    let noisy = dir.path().join("noisy.json");
    a.save(&noisy).unwrap();
    assert!(cmd_invert(&cfg, &noisy, Mode::Exact, dir.path()).is_err());
}

#[test]
fn recover_zero_samples_gives_zero_with_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(0.0, "volume", dir.path());
    let delta = 1e-2;
    let l0 = lambda0(delta, 1.0, 2.0).unwrap();
    let nodes = cartesian_lambda_grid(l0 + 1.0, 1.0).unwrap();
    let input = dir.path().join("qtilde.csv");
    let mut w = csv::Writer::from_path(&input).unwrap();
    w.write_record(["lambda_x", "lambda_y", "lambda_z", "re_qtilde", "im_qtilde", "delta"])
        .unwrap();
    for n in &nodes {
        w.write_record([n[0], n[1], n[2], 0.0, 0.0, delta].map(|v| v.to_string()))
            .unwrap();
    }
    w.flush().unwrap();
    drop(w);
    let out = cmd_recover(&cfg, &input, dir.path()).unwrap();
    assert!(column(&out, "q_recovered").iter().all(|q| *q == 0.0));
    let bound = error_bound(delta, 1.0, 2.0).unwrap();
    for b in column(&out, "predicted_bound") {
        assert!((b - bound).abs() <= 1e-12 * bound, "{b} vs {bound}");
    }
}

#[test]
fn recover_refuses_flagged_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report_exact.csv");
    let header = isp_core::harness::REPORT_HEADER.join(",");
    let row = "small,exact,0,0,2,,,1,0,,,,,,,3,0,,,,ExcludedDirection";
    std::fs::write(&report, format!("{header}\n{row}\n")).unwrap();
    let cfg = config(0.0, "volume", dir.path());
    let err = cmd_recover(&cfg, &report, dir.path()).unwrap_err();
    assert!(err.to_string().contains("ExcludedDirection"), "{err}");
}

#[test]
fn config_errors_name_the_field() {
    let good = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json")).unwrap();
    assert!(ExperimentConfig::from_json(&good).is_ok());

    let unknown = good.replace("\"sphere_order\": 16", "\"sphere_order\": 16, \"spherical\": 1");
    let e = ExperimentConfig::from_json(&unknown).unwrap_err().to_string();
    assert!(e.contains("grid"), "{e}");

    let delta = good.replace("[1e-2, 1e-3, 1e-4]", "[1e-2, 0.5]");
    let e = ExperimentConfig::from_json(&delta).unwrap_err().to_string();
    assert!(e.contains("noise.delta[1]"), "{e}");

    let kappa = good.replace("[3.0, 2.0, 1.5, 1.0, 0.5]", "[1.0, 2.0]");
    let e = ExperimentConfig::from_json(&kappa).unwrap_err().to_string();
    assert!(e.contains("kappa_grid"), "{e}");

    let a1 = good.replace("\"a1\": 1.5", "\"a1\": 2.5");
    assert!(ExperimentConfig::from_json(&a1).is_err());
}
