use std::time::Instant;

use crate::error::Result;
use crate::estimate::{estimate_from_stack, fwhm_from_sigma, sigma_from_fwhm, AnalysisConfig, InversionConfig};
use crate::grid::Grid;
use crate::model::{
    visibility_closed_form, visibility_closed_form_q, CorrelationModel, GaussianCorrelationModel,
    OpticalSetup, SignalEnvelope, TransverseWaveVector,
};
use crate::pipeline::{fit_visibility, PhaseDesign};
use crate::quadrature::QuadratureConfig;
use crate::stackio::{decode_stack, encode_stack};
use crate::synth::{
    synthesize_stack, uniform_phases, CameraGeometry, FrameStack, NoiseModel, PixelCoord,
    StackMetadata,
};

/// Knobs for exercising the self-test itself.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelftestOptions {
    /// Relative error injected into the closed-form curvature constant α
    /// used as the oracle.
    pub alpha_perturbation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl SelftestCheck {
    pub fn line(&self) -> String {
        format!(
            "{} {:<28} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn check(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> SelftestCheck {
    let start = Instant::now();
    match run() {
        Ok((passed, detail)) => SelftestCheck {
            name,
            passed,
            detail: format!("{detail} ({:.2} s)", start.elapsed().as_secs_f64()),
        },
        Err(e) => SelftestCheck {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

pub fn run_selftest(options: &SelftestOptions) -> Vec<SelftestCheck> {
    let setup = OpticalSetup::default();
    // The oracle's α is scaled through d, which enters α linearly.
    let oracle = setup.with_distance(setup.d * (1.0 + options.alpha_perturbation));
    let quad = QuadratureConfig::default();
    vec![
        check("quadrature-vs-closed-form", || {
            let mut worst: f64 = 0.0;
            for sigma in [2000.0, 8000.0, 12000.0] {
                let model = CorrelationModel::Gaussian(GaussianCorrelationModel::new(sigma)?);
                for k in 0..5 {
                    let q = 2.5e4 * k as f64;
                    let q_s = TransverseWaveVector::new(0.6 * q, -0.8 * q);
                    let v = model.coherence(q_s, &setup, &quad)?.visibility();
                    worst = worst.max((v - visibility_closed_form_q(sigma, &oracle, q)).abs());
                }
            }
            Ok((worst <= 1e-6, format!("max |error| {worst:.2e} (limit 1e-6)")))
        }),
        check("inversion-round-trip", || {
            let cfg = InversionConfig::default();
            let mut worst: f64 = 0.0;
            for k in 0..=16 {
                let sigma = 2000.0 + 500.0 * k as f64;
                let f = fwhm_from_sigma(sigma, &oracle, cfg.regime_bound)?;
                let est = sigma_from_fwhm(f, &setup, &cfg)?;
                worst = worst.max((est.sigma_c / sigma - 1.0).abs());
            }
            Ok((worst <= 1e-3, format!("max relative error {worst:.2e} (limit 1e-3)")))
        }),
        check("pipeline-exactness", || {
            let geometry = CameraGeometry::centered(64, 64, 64e-6);
            let model = CorrelationModel::Gaussian(GaussianCorrelationModel::new(8000.0)?);
            let stack = synthesize_stack(
                &model,
                &SignalEnvelope::default(),
                &setup,
                &geometry,
                &NoiseModel::noiseless(1e4),
                &uniform_phases(25),
                &quad,
            )?;
            let vmap = fit_visibility(&stack, 0.0)?;
            let mut worst: f64 = 0.0;
            for y in 0..64 {
                for x in 0..64 {
                    if let Some(v) = vmap.visibility_at(x, y) {
                        let rho = PixelCoord::new(x as f64, y as f64).distance(geometry.center)
                            * geometry.pixel_pitch;
                        worst = worst.max((v - visibility_closed_form(8000.0, &oracle, rho)).abs());
                    }
                }
            }
            let phases = uniform_phases(25);
            let samples: Vec<f64> = phases.iter().map(|p| 2.0 + p.cos()).collect();
            let residual = PhaseDesign::new(&phases)?.fit(&samples).rms_residual;
            Ok((
                worst <= 1e-6 && residual <= 1e-10,
                format!("max |error| {worst:.2e} (limit 1e-6), harmonic residual {residual:.1e}"),
            ))
        }),
        check("format-round-trip", || {
            let frames = (0..3)
                .map(|k| Grid::from_fn(17, 19, |x, y| ((x * 31 + y * 7 + k) as f32 * 0.37) as f64))
                .collect();
            let stack = FrameStack::new(
                CameraGeometry::centered(17, 19, 1e-5),
                uniform_phases(3),
                frames,
                StackMetadata::Unknown,
            )?;
            let mut first = Vec::new();
            encode_stack(&stack, &mut first)?;
            let raw = decode_stack(&first[..])?;
            let again = FrameStack::new(*stack.geometry(), raw.phases, raw.frames, StackMetadata::Unknown)?;
            let mut second = Vec::new();
            encode_stack(&again, &mut second)?;
            Ok((
                first == second && again == stack,
                format!("{} bytes, bit-identical: {}", first.len(), first == second),
            ))
        }),
        check("end-to-end", || {
            let model = CorrelationModel::Gaussian(GaussianCorrelationModel::new(8000.0)?);
            let stack = synthesize_stack(
                &model,
                &SignalEnvelope::default(),
                &setup,
                &CameraGeometry::default(),
                &NoiseModel::noiseless(1e4),
                &uniform_phases(25),
                &quad,
            )?;
            let est = estimate_from_stack(&stack, &AnalysisConfig::default())?.estimate;
            let expected = fwhm_from_sigma(8000.0, &oracle, 0.5)?;
            let fwhm_err = (est.fwhm_camera / expected - 1.0).abs();
            let var_err = (est.variance / 6.4e7 - 1.0).abs();
            Ok((
                fwhm_err <= 0.01 && var_err <= 0.01,
                format!("FWHM error {fwhm_err:.2e}, variance error {var_err:.2e} (limit 1e-2)"),
            ))
        }),
    ]
}
