//! Acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use icfringe::cli::{run_sweep, sweep_csv, RunConfig};
use icfringe::estimate::{
    estimate_from_stack, fwhm_from_sigma, regime_sigma, sigma_from_fwhm, AnalysisConfig,
    InversionConfig,
};
use icfringe::model::{
    visibility_by_quadrature, visibility_closed_form, OpticalSetup,
    SignalEnvelope, TransverseWaveVector,
};
use icfringe::pipeline::{fit_visibility, PhaseDesign};
use icfringe::quadrature::QuadratureConfig;
use icfringe::stackio::{encode_stack, estimate_header, estimate_row, read_stack, write_stack};
use icfringe::synth::{synthesize_stack, uniform_phases, CameraGeometry, NoiseModel, PixelCoord};
use icfringe::{Error, Result};

use common::{gaussian, reference_expected, reference_stack};

const WAISTS: [f64; 3] = [125e-6, 160e-6, 200e-6];

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { passed, detail })
}

fn report(id: &str, title: &str, run: impl FnOnce() -> Result<Verdict>) -> bool {
    let start = Instant::now();
    let (passed, detail) = match run() {
        Ok(v) => (v.passed, v.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{id} {} {title}: {detail} [{:.1} s]",
        if passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    passed
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| a + (b - a) * k as f64 / (n - 1) as f64)
}

fn ac1() -> Result<Verdict> {
    let start = Instant::now();
    let setup = OpticalSetup::default();
    let quad = QuadratureConfig::default();
    let mut worst: f64 = 0.0;
    for sigma in linspace(2000.0, 10000.0, 21) {
        let model = gaussian(sigma);
        for rho in linspace(0.0, 2e-3, 21) {
            let q = rho / setup.camera_scale();
            let q_s = TransverseWaveVector::new(q * 0.8, q * 0.6);
            let v = visibility_by_quadrature(&model, &setup, q_s, &quad)?;
            worst = worst.max((v - visibility_closed_form(sigma, &setup, rho)).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-6 && secs <= 60.0,
        format!("441 points, max |error| {worst:.2e} (limit 1e-6), {secs:.1} s (limit 60 s)"),
    )
}

fn ac2() -> Result<Verdict> {
    let setup = OpticalSetup::default();
    let flat = setup.with_distance(0.0);
    let quad = QuadratureConfig::default();
    let geometry = CameraGeometry::default();
    // Evaluation region: every q the default sensor images, corners included.
    let q_corner = geometry.center.x.hypot(geometry.center.y) * geometry.pixel_pitch / setup.camera_scale();
    let region: Vec<TransverseWaveVector> = linspace(0.0, q_corner, 9)
        .flat_map(|q| linspace(0.0, 0.5 * PI, 4).map(move |t| TransverseWaveVector::new(q * t.cos(), q * t.sin())))
        .collect();

    let mut flat_worst: f64 = 0.0;
    for sigma in [1.0, 2000.0, 8000.0, 20000.0] {
        for &q_s in &region {
            flat_worst = flat_worst.max((visibility_by_quadrature(&gaussian(sigma), &flat, q_s, &quad)? - 1.0).abs());
        }
    }
    let a = setup.alpha();
    let mut central_worst: f64 = 0.0;
    for sigma in [20000.0, 40000.0, 80000.0] {
        let v = visibility_by_quadrature(&gaussian(sigma), &setup, TransverseWaveVector::ZERO, &quad)?;
        central_worst = central_worst.max((v - 1.0 / (1.0 + 4.0 * a * a * sigma.powi(4)).sqrt()).abs());
    }
    let mut narrow_min: f64 = 1.0;
    for &q_s in &region {
        narrow_min = narrow_min.min(visibility_by_quadrature(&gaussian(1.0), &setup, q_s, &quad)?);
    }
    verdict(
        flat_worst <= 1e-9 && central_worst <= 1e-6 && narrow_min >= 1.0 - 1e-6,
        format!(
            "d = 0 max |v-1| {flat_worst:.1e} (limit 1e-9); large-sigma centre error {central_worst:.1e} (limit 1e-6); sigma = 1 min v {narrow_min:.9} (limit 1-1e-6)"
        ),
    )
}

struct Noiseless {
    fwhm: [f64; 3],
    ratio: [f64; 3],
}

fn noiseless_runs() -> Result<Noiseless> {
    let geometry = CameraGeometry::default();
    let mut out = Noiseless { fwhm: [0.0; 3], ratio: [0.0; 3] };
    for (k, &w_p) in WAISTS.iter().enumerate() {
        let stack = reference_stack(w_p, &NoiseModel::noiseless(1e4), &geometry);
        let est = estimate_from_stack(&stack, &AnalysisConfig::default())?.estimate;
        out.fwhm[k] = est.fwhm_camera;
        out.ratio[k] = est.variance * w_p * w_p;
    }
    Ok(out)
}

fn ac3(noiseless: &Noiseless) -> Result<Verdict> {
    let start = Instant::now();
    let geometry = CameraGeometry::default();
    let noise = NoiseModel::default();
    let mut means = [0.0; 3];
    for (k, &w_p) in WAISTS.iter().enumerate() {
        let expected = reference_expected(w_p, &noise, &geometry);
        let mut sum = 0.0;
        for seed in 0..20 {
            let stack = expected.realize(&noise.with_seed(seed))?;
            sum += estimate_from_stack(&stack, &AnalysisConfig::default())?.estimate.variance;
        }
        means[k] = sum / 20.0 * w_p * w_p;
    }
    let secs = start.elapsed().as_secs_f64();
    let clean_ok = noiseless.ratio.iter().all(|r| (r - 1.0).abs() <= 0.01);
    let noisy_ok = means.iter().all(|r| (r - 1.0).abs() <= 0.10);
    verdict(
        clean_ok && noisy_ok && secs <= 600.0,
        format!(
            "noiseless variance·w_p² {:.5}/{:.5}/{:.5} (limit ±1%); 20-seed means {:.5}/{:.5}/{:.5} (limit ±10%); {secs:.0} s",
            noiseless.ratio[0], noiseless.ratio[1], noiseless.ratio[2], means[0], means[1], means[2]
        ),
    )
}

fn ac4(noiseless: &Noiseless) -> Result<Verdict> {
    let f = noiseless.fwhm;
    let increasing = f[0] < f[1] && f[1] < f[2];
    let e125 = (f[0] / 2.07e-3 - 1.0).abs();
    let e200 = (f[2] / 3.27e-3 - 1.0).abs();
    verdict(
        increasing && e125 <= 0.02 && e200 <= 0.02,
        format!(
            "FWHM {:.4}/{:.4}/{:.4} mm; vs 2.07 mm {:.2}%, vs 3.27 mm {:.2}% (limit 2%)",
            f[0] * 1e3,
            f[1] * 1e3,
            f[2] * 1e3,
            e125 * 100.0,
            e200 * 100.0
        ),
    )
}

fn ac5() -> Result<Verdict> {
    let geometry = CameraGeometry::default();
    let setup = OpticalSetup::default();
    let mut worst: f64 = 0.0;
    for &w_p in &WAISTS {
        let stack = reference_stack(w_p, &NoiseModel::noiseless(1e4), &geometry);
        let vmap = fit_visibility(&stack, 0.2)?;
        let sigma = 1.0 / w_p;
        for y in 0..geometry.height {
            for x in 0..geometry.width {
                if let Some(v) = vmap.visibility_at(x, y) {
                    let rho = PixelCoord::new(x as f64, y as f64).distance(geometry.center) * geometry.pixel_pitch;
                    worst = worst.max((v - visibility_closed_form(sigma, &setup.with_pump_waist(w_p), rho)).abs());
                }
            }
        }
    }
    let mut residual: f64 = 0.0;
    let irregular = [0.0, 0.7, 1.9, 2.2, 3.9, 5.1];
    for phases in [uniform_phases(25), uniform_phases(4), irregular.to_vec()] {
        let design = PhaseDesign::new(&phases)?;
        let samples: Vec<f64> = phases.iter().map(|p| 3.0 + 1.7 * (p - 0.4).cos()).collect();
        residual = residual.max(design.fit(&samples).rms_residual);
    }
    verdict(
        worst <= 1e-6 && residual <= 1e-10,
        format!("per-pixel max |error| {worst:.2e} (limit 1e-6); harmonic residual {residual:.1e} (limit 1e-10)"),
    )
}

fn ac6() -> Result<Verdict> {
    let setup = OpticalSetup::default();
    let model = gaussian(8000.0);
    let offsets = [-0.4, -0.2, 0.0, 0.2, 0.4];
    let mut worst: f64 = 0.0;
    for dy in offsets {
        for dx in offsets {
            let truth = PixelCoord::new(127.5 + dx + 3.0, 127.5 + dy - 2.0);
            let geometry = CameraGeometry::default().with_center(truth);
            let stack = synthesize_stack(
                &model,
                &SignalEnvelope::default(),
                &setup,
                &geometry,
                &NoiseModel::noiseless(1e4),
                &uniform_phases(25),
                &QuadratureConfig::default(),
            )?;
            let est = estimate_from_stack(&stack, &AnalysisConfig::default())?.estimate;
            let found = est.diagnostics.center.ok_or(Error::CenterNotFound)?;
            worst = worst.max(found.distance(truth));
        }
    }
    verdict(worst <= 0.5, format!("25 sub-pixel centres, max distance {worst:.1e} px (limit 0.5)"))
}

fn ac7() -> Result<Verdict> {
    let cfg = InversionConfig::default();
    let mut missed = Vec::new();
    let mut checked = 0;
    for (d, lambda_i) in [(11.7e-3, 1550e-9), (5e-3, 1550e-9), (30e-3, 1550e-9), (11.7e-3, 1200e-9)] {
        let mut setup = OpticalSetup::default().with_distance(d);
        setup.lambda_i = lambda_i;
        setup.lambda_s = 1.0 / (1.0 / setup.lambda_p - 1.0 / lambda_i);
        let edge = regime_sigma(&setup, 0.5);
        for factor in [1.0 + 1e-9, 1.01, 1.2, 2.0, 5.0] {
            let sigma = edge * factor;
            checked += 1;
            if !matches!(fwhm_from_sigma(sigma, &setup, 0.5), Err(Error::RegimeViolation { .. })) {
                missed.push(format!("fwhm_from_sigma d={d} σ={sigma:.0}"));
            }
            // The width fixes only p + 1/p, so p ≥ 2 reads as p' ≤ 0.5 and is
            // left to the peak guard below.
            let p = setup.regime_parameter(sigma);
            if p < 1.99 {
                let g = p + 1.0 / p;
                let fwhm = 2.0 * setup.camera_scale() * (g * 2f64.ln() / setup.alpha()).sqrt();
                checked += 1;
                if !matches!(sigma_from_fwhm(fwhm, &setup, &cfg), Err(Error::RegimeViolation { .. })) {
                    missed.push(format!("sigma_from_fwhm d={d} σ={sigma:.0}"));
                }
            }
        }
    }
    // Full analysis of stacks past the bound, including p > 2.
    let setup = OpticalSetup::default();
    let edge = regime_sigma(&setup, 0.5);
    for factor in [1.02, 1.3, 2.5, 4.0] {
        let stack = synthesize_stack(
            &gaussian(edge * factor),
            &SignalEnvelope::default(),
            &setup,
            &CameraGeometry::default(),
            &NoiseModel::noiseless(1e4),
            &uniform_phases(25),
            &QuadratureConfig::default(),
        )?;
        checked += 1;
        let outcome = estimate_from_stack(&stack, &AnalysisConfig::default()).map_err(|e| e.root().label());
        if !matches!(outcome, Err("RegimeViolation")) {
            missed.push(format!("pipeline at p = {:.3}", 0.5 * factor * factor));
        }
    }

    // Baseline parameters never trigger it.
    let mut baseline_max: f64 = 0.0;
    let mut false_alarms = 0;
    for w_p in linspace(125e-6, 200e-6, 16) {
        let s = setup.with_pump_waist(w_p);
        let sigma = 1.0 / w_p;
        baseline_max = baseline_max.max(s.regime_parameter(sigma));
        match fwhm_from_sigma(sigma, &s, 0.5).and_then(|f| sigma_from_fwhm(f, &s, &cfg)) {
            Ok(e) if e.regime_valid => {}
            _ => false_alarms += 1,
        }
    }
    for &w_p in &WAISTS {
        let est = estimate_from_stack(&reference_stack(w_p, &NoiseModel::default().with_seed(3), &CameraGeometry::default()), &AnalysisConfig::default())?
            .estimate;
        if !est.regime_valid {
            false_alarms += 1;
        }
    }
    verdict(
        missed.is_empty() && false_alarms == 0 && baseline_max <= 0.185 + 1e-3,
        format!(
            "{checked} violating cases, {} missed {missed:?}; baseline max 2ασ² {baseline_max:.4}, {false_alarms} false alarms",
            missed.len()
        ),
    )
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn ac8() -> Result<Verdict> {
    let dir = tempfile::tempdir()?;
    let geometry = CameraGeometry::default();
    let noise = NoiseModel::default().with_seed(42);

    let stack = reference_stack(160e-6, &noise, &geometry);
    let path = dir.path().join("a.icfs");
    write_stack(&stack, &path)?;
    let back = read_stack(&path)?;
    let (mut first, mut second) = (Vec::new(), Vec::new());
    encode_stack(&stack, &mut first)?;
    encode_stack(&back, &mut second)?;
    let roundtrip = back == stack && first == second && std::fs::read(&path)? == first;

    let mut encodings = Vec::new();
    let mut estimates = Vec::new();
    for threads in [1, 2, 4] {
        let s = in_pool(threads, || reference_stack(160e-6, &noise, &geometry));
        let mut bytes = Vec::new();
        encode_stack(&s, &mut bytes)?;
        encodings.push(bytes);
        let est = in_pool(threads, || estimate_from_stack(&s, &AnalysisConfig::default()))?.estimate;
        estimates.push(format!("{}\n{}", estimate_header(), estimate_row(&est)));
    }
    let seeds_identical = encodings.iter().all(|b| *b == first);
    let estimates_identical = estimates.iter().all(|e| *e == estimates[0]);

    let cfg = RunConfig::parse(
        "width = 96\nheight = 96\npixel_pitch = 40e-6\nsweep_w_p = 125e-6, 200e-6\nsweep_photon_scale = 1e3, 1e4\nsweep_seeds = 3\nseed = 7\n",
    )?;
    let sweeps: Vec<String> = [1, 2, 4]
        .into_iter()
        .map(|t| in_pool(t, || run_sweep(&cfg)).map(|rows| sweep_csv(&rows)))
        .collect::<Result<_>>()?;
    let sweeps_identical = sweeps.iter().all(|s| *s == sweeps[0]);

    verdict(
        roundtrip && seeds_identical && estimates_identical && sweeps_identical,
        format!(
            "write∘read identical: {roundtrip}; stacks over 1/2/4 threads identical: {seeds_identical}; estimate CSV identical: {estimates_identical}; sweep CSV identical: {sweeps_identical}"
        ),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let mut all = true;
    all &= report("AC1", "quadrature vs closed form", ac1);
    all &= report("AC2", "limit cases", ac2);
    let noiseless = noiseless_runs();
    match &noiseless {
        Ok(n) => {
            all &= report("AC3", "end-to-end recovery", || ac3(n));
            all &= report("AC4", "FWHM ordering and scale", || ac4(n));
        }
        Err(e) => {
            println!("AC3 FAIL end-to-end recovery: error: {e}");
            println!("AC4 FAIL FWHM ordering and scale: error: {e}");
            all = false;
        }
    }
    all &= report("AC5", "pipeline exactness", ac5);
    all &= report("AC6", "centre finding", ac6);
    all &= report("AC7", "regime guard", ac7);
    all &= report("AC8", "format and determinism", ac8);
    println!(
        "acceptance: {} ({:.0} s)",
        if all { "all criteria passed" } else { "FAILED" },
        start.elapsed().as_secs_f64()
    );
    if !all {
        std::process::exit(1);
    }
}
