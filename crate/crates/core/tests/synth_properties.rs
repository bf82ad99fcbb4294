mod common;

use icfringe::model::OpticalSetup;
use icfringe::synth::{pixel_to_q, CameraGeometry, NoiseModel, PixelCoord};

use common::reference_expected;

#[test]
fn pixel_two_millimetres_off_axis() {
    let setup = OpticalSetup::default();
    let geometry = CameraGeometry::centered(256, 256, 16e-6);
    let offset = 2e-3 / geometry.pixel_pitch;
    let q = pixel_to_q(
        PixelCoord::new(geometry.center.x + offset, geometry.center.y),
        &geometry,
        &setup,
    );
    // 2 mm · 2π / (155 mm · 810 nm)
    let expected = 100_090.566_422_613_9;
    assert!((q.qx / expected - 1.0).abs() < 1e-9, "{}", q.qx);
    assert_eq!(q.qy, 0.0);
}

#[test]
fn noiseless_frames_have_quarter_turn_symmetry() {
    let geometry = CameraGeometry::centered(64, 64, 64e-6);
    let expected = reference_expected(125e-6, &NoiseModel::noiseless(1e4), &geometry);
    let n = geometry.width;
    let mut worst: f64 = 0.0;
    for frame in expected.frames() {
        let peak = frame.as_slice().iter().cloned().fold(0.0, f64::max);
        for y in 0..n {
            for x in 0..n {
                let a = *frame.get(x, y);
                let b = *frame.get(n - 1 - y, x);
                worst = worst.max((a - b).abs() / peak);
            }
        }
    }
    assert!(worst <= 1e-10, "worst relative asymmetry {worst:e}");
}

#[test]
fn noisy_pixel_means_converge_to_expected_counts() {
    let geometry = CameraGeometry::centered(16, 16, 256e-6);
    let noise = NoiseModel {
        photon_scale: 400.0,
        ..NoiseModel::default()
    };
    let expected = reference_expected(160e-6, &noise, &geometry);
    let realizations = 200;
    let frames = expected.frames();
    let mut sums = vec![0.0; frames.len() * geometry.pixel_count()];
    for seed in 0..realizations {
        let stack = expected.realize(&noise.with_seed(seed)).unwrap();
        for (k, frame) in stack.frames().iter().enumerate() {
            for (i, v) in frame.as_slice().iter().enumerate() {
                sums[k * geometry.pixel_count() + i] += v;
            }
        }
    }
    let mut outliers = 0;
    for (k, frame) in frames.iter().enumerate() {
        for (i, &mean) in frame.as_slice().iter().enumerate() {
            let signal = (mean - noise.background_level).max(0.0);
            let variance = signal + noise.read_noise_sigma.powi(2);
            let se = (variance / realizations as f64).sqrt();
            let got = sums[k * geometry.pixel_count() + i] / realizations as f64;
            if (got - mean).abs() > 5.0 * se {
                outliers += 1;
            }
        }
    }
    assert_eq!(outliers, 0, "{outliers} pixel means outside five standard errors");
}
