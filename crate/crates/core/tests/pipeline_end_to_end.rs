mod common;

use icfringe::estimate::{estimate_from_stack, AnalysisConfig};
use icfringe::model::{visibility_closed_form, OpticalSetup};
use icfringe::pipeline::{fit_visibility, preprocess};
use icfringe::synth::{CameraGeometry, NoiseModel, PixelCoord};
use icfringe::Error;

use common::reference_stack;

// Half-maximum widths of the closed form on the camera, metres.
const FWHM_125: f64 = 0.002_072_300_8;
const FWHM_160: f64 = 0.002_624_942_1;
const FWHM_200: f64 = 0.003_268_997_2;

#[test]
fn noiseless_recovery_of_pump_waist() {
    let geometry = CameraGeometry::default();
    for (w_p, fwhm) in [(125e-6, FWHM_125), (160e-6, FWHM_160), (200e-6, FWHM_200)] {
        let stack = reference_stack(w_p, &NoiseModel::noiseless(1e4), &geometry);
        let est = estimate_from_stack(&stack, &AnalysisConfig::default()).unwrap().estimate;
        let theory = 1.0 / (w_p * w_p);
        assert!((est.variance / theory - 1.0).abs() < 0.01, "w_p {w_p}: {}", est.variance);
        assert!((est.fwhm_camera / fwhm - 1.0).abs() < 0.01, "w_p {w_p}: {}", est.fwhm_camera);
        assert!(est.regime_valid);
        assert!((est.theoretical_variance.unwrap() / theory - 1.0).abs() < 1e-12);
    }
}

#[test]
fn zero_distance_has_no_decay() {
    let geometry = CameraGeometry::centered(64, 64, 64e-6);
    let stack = {
        use icfringe::model::SignalEnvelope;
        use icfringe::quadrature::QuadratureConfig;
        use icfringe::synth::{synthesize_stack, uniform_phases};
        synthesize_stack(
            &common::gaussian(8000.0),
            &SignalEnvelope::default(),
            &OpticalSetup::default().with_distance(0.0),
            &geometry,
            &NoiseModel::noiseless(1e4),
            &uniform_phases(25),
            &QuadratureConfig::default(),
        )
        .unwrap()
    };
    let vmap = fit_visibility(&stack, 0.2).unwrap();
    for y in 0..64 {
        for x in 0..64 {
            if let Some(v) = vmap.visibility_at(x, y) {
                assert!((v - 1.0).abs() < 1e-6, "({x}, {y}): {v}");
            }
        }
    }
    let err = estimate_from_stack(&stack, &AnalysisConfig::default()).unwrap_err();
    assert!(matches!(err.root(), Error::NoDecay), "{err}");
}

#[test]
fn estimate_ignores_intensity_scale() {
    let geometry = CameraGeometry::default();
    let stack = reference_stack(160e-6, &NoiseModel::noiseless(1e4), &geometry);
    let cfg = AnalysisConfig::default();
    let base = estimate_from_stack(&stack, &cfg).unwrap().estimate;
    for factor in [1e-3, 7.5, 1e4] {
        let scaled = estimate_from_stack(&stack.scaled(factor), &cfg).unwrap().estimate;
        assert!((scaled.sigma_c / base.sigma_c - 1.0).abs() < 1e-9, "{factor}");
    }
}

#[test]
fn noise_robustness_over_seeds() {
    let geometry = CameraGeometry::default();
    let cfg = AnalysisConfig::default();
    let clean = estimate_from_stack(&reference_stack(125e-6, &NoiseModel::noiseless(1e4), &geometry), &cfg)
        .unwrap()
        .estimate
        .fwhm_camera;
    let expected = common::reference_expected(125e-6, &NoiseModel::default(), &geometry);
    let within = (0..20)
        .filter(|&seed| {
            let stack = expected.realize(&NoiseModel::default().with_seed(seed)).unwrap();
            let f = estimate_from_stack(&stack, &cfg).unwrap().estimate.fwhm_camera;
            (f / clean - 1.0).abs() <= 0.03
        })
        .count();
    assert!(within >= 19, "{within}/20 within 3%");
}

#[test]
fn noiseless_visibility_never_exceeds_one() {
    let geometry = CameraGeometry::default();
    for w_p in [125e-6, 200e-6] {
        let stack = reference_stack(w_p, &NoiseModel::noiseless(1e4), &geometry);
        let vmap = fit_visibility(&stack, 0.2).unwrap();
        for y in 0..geometry.height {
            for x in 0..geometry.width {
                if let Some(v) = vmap.visibility_at(x, y) {
                    assert!((0.0..=1.0 + 1e-9).contains(&v), "({x}, {y}): {v}");
                }
            }
        }
    }
}

#[test]
fn noiseless_map_matches_closed_form() {
    let geometry = CameraGeometry::default();
    let setup = OpticalSetup::default();
    let stack = reference_stack(125e-6, &NoiseModel::noiseless(1e4), &geometry);
    let vmap = fit_visibility(&stack, 0.2).unwrap();
    let mut worst: f64 = 0.0;
    for y in 0..geometry.height {
        for x in 0..geometry.width {
            if let Some(v) = vmap.visibility_at(x, y) {
                let rho = PixelCoord::new(x as f64, y as f64).distance(geometry.center) * geometry.pixel_pitch;
                worst = worst.max((v - visibility_closed_form(8000.0, &setup, rho)).abs());
            }
        }
    }
    assert!(worst <= 1e-6, "{worst:e}");
}

/// A Gaussian blur of width s averages the fringe phase α|q|² over the
/// kernel, attenuating visibility by about exp(−(∇φ·s)²/2).
#[test]
fn blur_attenuation_follows_phase_gradient() {
    let geometry = CameraGeometry::default();
    let setup = OpticalSetup::default();
    let stack = reference_stack(125e-6, &NoiseModel::noiseless(1e4), &geometry);
    let blurred = fit_visibility(&preprocess(&stack, 0.0, 1.0).unwrap(), 0.2).unwrap();
    let k = geometry.pixel_pitch / setup.camera_scale();
    let c = geometry.center;
    for r in 30..100 {
        let (x, y) = ((c.x + r as f64).round() as usize, c.y.round() as usize);
        let Some(v) = blurred.visibility_at(x, y) else { continue };
        let rho_px = PixelCoord::new(x as f64, y as f64).distance(c);
        let v0 = visibility_closed_form(8000.0, &setup, rho_px * geometry.pixel_pitch);
        let gradient = 2.0 * setup.alpha() * rho_px * k * k;
        let predicted = v0 * (-0.5 * gradient * gradient).exp();
        let raw = (v / v0 - 1.0).abs();
        let model = (v / predicted - 1.0).abs();
        assert!(model < 0.2 * raw, "r {r}: model {model:e}, raw {raw:e}");
    }
}
