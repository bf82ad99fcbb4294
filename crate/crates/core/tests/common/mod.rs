#![allow(dead_code)]

use icfringe::model::{CorrelationModel, GaussianCorrelationModel, OpticalSetup, SignalEnvelope};
use icfringe::quadrature::QuadratureConfig;
use icfringe::synth::{
    expected_stack, synthesize_stack, uniform_phases, CameraGeometry, ExpectedStack, FrameStack,
    NoiseModel,
};

pub fn gaussian(sigma_c: f64) -> CorrelationModel {
    CorrelationModel::Gaussian(GaussianCorrelationModel::new(sigma_c).unwrap())
}

/// 256×256, 25 phases, Gaussian model with σ_c = 1/w_p.
pub fn reference_stack(w_p: f64, noise: &NoiseModel, geometry: &CameraGeometry) -> FrameStack {
    let setup = OpticalSetup::default().with_pump_waist(w_p);
    synthesize_stack(
        &gaussian(1.0 / w_p),
        &SignalEnvelope::default(),
        &setup,
        geometry,
        noise,
        &uniform_phases(25),
        &QuadratureConfig::default(),
    )
    .unwrap()
}

pub fn reference_expected(w_p: f64, noise: &NoiseModel, geometry: &CameraGeometry) -> ExpectedStack {
    let setup = OpticalSetup::default().with_pump_waist(w_p);
    expected_stack(
        &gaussian(1.0 / w_p),
        &SignalEnvelope::default(),
        &setup,
        geometry,
        noise,
        &uniform_phases(25),
        &QuadratureConfig::default(),
    )
    .unwrap()
}
