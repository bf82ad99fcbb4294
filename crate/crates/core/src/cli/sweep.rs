use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{estimate_from_stack, fwhm_from_sigma, CorrelationEstimate};
use crate::synth::expected_stack;

use super::config::RunConfig;

/// One grid point of a sweep, aggregated over its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub w_p: f64,
    pub d: f64,
    pub photon_scale: f64,
    pub seeds: usize,
    pub n_ok: usize,
    pub sigma_c_true: Option<f64>,
    pub regime_parameter_true: Option<f64>,
    /// Closed-form Gaussian FWHM at the true σ_c.
    pub fwhm_closed_form: Option<f64>,
    pub fwhm_mean: Option<f64>,
    pub fwhm_std: Option<f64>,
    pub sigma_c_mean: Option<f64>,
    pub sigma_c_std: Option<f64>,
    pub variance_mean: Option<f64>,
    pub variance_std: Option<f64>,
    pub theory_variance: f64,
    pub regime_valid: Option<bool>,
    /// `ok`, or the label of the first failure.
    pub status: String,
    pub message: String,
}

pub const SWEEP_COLUMNS: [&str; 18] = [
    "w_p",
    "d",
    "photon_scale",
    "seeds",
    "n_ok",
    "sigma_c_true",
    "regime_parameter_true",
    "fwhm_closed_form",
    "fwhm_mean",
    "fwhm_std",
    "sigma_c_mean",
    "sigma_c_std",
    "variance_mean",
    "variance_std",
    "theory_variance",
    "variance_ratio",
    "regime_valid",
    "status",
];

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

/// Grid points in output order: `d` outermost, then photon scale, then `w_p`.
pub fn sweep_points(cfg: &RunConfig) -> Vec<(f64, f64, f64)> {
    let mut points = Vec::new();
    for &d in &cfg.sweep.d {
        for &p in &cfg.sweep.photon_scale {
            for &w in &cfg.sweep.w_p {
                points.push((w, d, p));
            }
        }
    }
    points
}

/// Simulates and analyzes every grid point. Failures are recorded in the
/// row; only configuration errors abort the sweep.
pub fn run_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    Ok(sweep_points(cfg)
        .into_par_iter()
        .map(|(w_p, d, photon_scale)| sweep_point(cfg, w_p, d, photon_scale))
        .collect())
}

fn sweep_point(cfg: &RunConfig, w_p: f64, d: f64, photon_scale: f64) -> SweepRow {
    let setup = cfg.setup.with_pump_waist(w_p).with_distance(d);
    let noise = crate::synth::NoiseModel {
        photon_scale,
        ..cfg.noise
    };
    let mut row = SweepRow {
        w_p,
        d,
        photon_scale,
        seeds: cfg.sweep.seeds,
        n_ok: 0,
        sigma_c_true: None,
        regime_parameter_true: None,
        fwhm_closed_form: None,
        fwhm_mean: None,
        fwhm_std: None,
        sigma_c_mean: None,
        sigma_c_std: None,
        variance_mean: None,
        variance_std: None,
        theory_variance: 1.0 / (w_p * w_p),
        regime_valid: None,
        status: "ok".into(),
        message: String::new(),
    };
    let fail = |mut row: SweepRow, e: Error| {
        row.status = e.label().into();
        row.message = e.to_string();
        row
    };

    let expected = match setup
        .validate(cfg.energy_tolerance)
        .and_then(|_| cfg.build_model(&setup))
        .and_then(|model| {
            row.sigma_c_true = Some(model.sigma_c());
            row.regime_parameter_true = Some(setup.regime_parameter(model.sigma_c()));
            row.fwhm_closed_form =
                fwhm_from_sigma(model.sigma_c(), &setup, cfg.analysis.inversion.regime_bound).ok();
            expected_stack(
                &model,
                &cfg.envelope,
                &setup,
                &cfg.geometry,
                &noise,
                &cfg.phases(),
                &cfg.quadrature,
            )
        }) {
        Ok(e) => e,
        Err(e) => return fail(row, e),
    };

    let outcomes: Vec<Result<CorrelationEstimate>> = (0..cfg.sweep.seeds)
        .into_par_iter()
        .map(|k| {
            let seeded = noise.with_seed(noise.rng_seed.wrapping_add(k as u64));
            let stack = expected.realize(&seeded)?;
            Ok(estimate_from_stack(&stack, &cfg.analysis)?.estimate)
        })
        .collect();
    let mut ok = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(e) => ok.push(e),
            Err(e) if row.message.is_empty() => {
                row.status = e.label().into();
                row.message = e.to_string();
            }
            Err(_) => {}
        }
    }
    row.n_ok = ok.len();
    let collect = |f: fn(&CorrelationEstimate) -> f64| ok.iter().map(f).collect::<Vec<f64>>();
    (row.fwhm_mean, row.fwhm_std) = mean_std(&collect(|e| e.fwhm_camera));
    (row.sigma_c_mean, row.sigma_c_std) = mean_std(&collect(|e| e.sigma_c));
    (row.variance_mean, row.variance_std) = mean_std(&collect(|e| e.variance));
    if !ok.is_empty() {
        row.regime_valid = Some(ok.iter().all(|e| e.regime_valid));
    }
    row
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = SWEEP_COLUMNS.join(",");
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.w_p,
            r.d,
            r.photon_scale,
            r.seeds,
            r.n_ok,
            opt(r.sigma_c_true),
            opt(r.regime_parameter_true),
            opt(r.fwhm_closed_form),
            opt(r.fwhm_mean),
            opt(r.fwhm_std),
            opt(r.sigma_c_mean),
            opt(r.sigma_c_std),
            opt(r.variance_mean),
            opt(r.variance_std),
            r.theory_variance,
            opt(r.variance_mean.map(|v| v / r.theory_variance)),
            opt(r.regime_valid),
            r.status,
        );
    }
    s
}
