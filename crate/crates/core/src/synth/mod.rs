//! Phase-stepped synthetic camera stacks.
//!
//! The expected count at a pixel is
//! `photon_scale · I(q_s; φ0) / 2 + background_level`, where `I` is the
//! model intensity whose envelope peak under full constructive
//! interference equals 2. Shot noise is Poisson on the signal part; read
//! noise is additive Gaussian. Every pixel of every frame draws from its
//! own generator seeded by `(rng_seed, frame, pixel)`, so the result does
//! not depend on how the work is split across threads.

mod camera;
mod stack;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{
    Coherence, CorrelationModel, OpticalSetup, SignalEnvelope, SpdcCorrelationModel,
    TransverseWaveVector,
};
use crate::quadrature::QuadratureConfig;

pub use camera::{pixel_to_q, q_to_pixel, CameraGeometry, PixelCoord};
pub use stack::{
    uniform_phases, validate_phases, FrameStack, ModelKind, StackMetadata, SynthesisRecord,
};

/// Default number of phase settings.
pub const DEFAULT_PHASE_COUNT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Expected counts at the envelope peak under full constructive
    /// interference.
    pub photon_scale: f64,
    pub read_noise_sigma: f64,
    pub background_level: f64,
    /// Poisson sampling of the signal counts.
    pub shot_noise: bool,
    pub rng_seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            photon_scale: 1e4,
            read_noise_sigma: 5.0,
            background_level: 100.0,
            shot_noise: true,
            rng_seed: 0,
        }
    }
}

impl NoiseModel {
    /// Deterministic frames: no shot noise, no read noise, no background.
    pub fn noiseless(photon_scale: f64) -> Self {
        Self {
            photon_scale,
            read_noise_sigma: 0.0,
            background_level: 0.0,
            shot_noise: false,
            rng_seed: 0,
        }
    }

    pub fn with_seed(self, rng_seed: u64) -> Self {
        Self { rng_seed, ..self }
    }

    pub fn is_deterministic(&self) -> bool {
        !self.shot_noise && self.read_noise_sigma == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.photon_scale >= 0.0 && self.photon_scale.is_finite()) {
            return Err(Error::invalid("photon_scale", "must be non-negative"));
        }
        if !(self.read_noise_sigma >= 0.0 && self.read_noise_sigma.is_finite()) {
            return Err(Error::invalid("read_noise_sigma", "must be non-negative"));
        }
        if !self.background_level.is_finite() {
            return Err(Error::invalid("background_level", "must be finite"));
        }
        Ok(())
    }
}

/// Noise-free expected counts, kept so that many noise realizations can
/// share one quadrature pass.
#[derive(Debug, Clone)]
pub struct ExpectedStack {
    geometry: CameraGeometry,
    phases: Vec<f64>,
    frames: Vec<Grid<f64>>,
    record: SynthesisRecord,
}

impl ExpectedStack {
    pub fn frames(&self) -> &[Grid<f64>] {
        &self.frames
    }

    pub fn geometry(&self) -> &CameraGeometry {
        &self.geometry
    }

    /// Draws one noisy realization with `noise.rng_seed`.
    ///
    /// `noise.photon_scale` and `noise.background_level` must match the
    /// values the expected frames were built with.
    pub fn realize(&self, noise: &NoiseModel) -> Result<FrameStack> {
        noise.validate()?;
        let same_scale = noise.photon_scale == self.record.noise.photon_scale
            && noise.background_level == self.record.noise.background_level;
        if !same_scale {
            return Err(Error::invalid(
                "photon_scale",
                "noise realization must reuse the expected frames' scale and background",
            ));
        }
        let width = self.geometry.width;
        let frames = self
            .frames
            .iter()
            .enumerate()
            .map(|(k, expected)| {
                let data: Vec<f64> = expected
                    .as_slice()
                    .par_iter()
                    .enumerate()
                    .map(|(index, &mean)| sample_pixel(mean, noise, k as u64, index as u64))
                    .collect();
                Grid::from_vec(width, self.geometry.height, data)
            })
            .collect();
        let record = SynthesisRecord {
            noise: *noise,
            ..self.record
        };
        FrameStack::new(
            self.geometry,
            self.phases.clone(),
            frames,
            StackMetadata::Synthetic(record),
        )
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn pixel_seed(seed: u64, frame: u64, pixel: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ frame) ^ pixel)
}

/// Stored pixels are 32-bit floats; quantize here so that a stack written
/// to disk reads back identically.
fn quantize(v: f64) -> f64 {
    v as f32 as f64
}

fn sample_pixel(mean: f64, noise: &NoiseModel, frame: u64, pixel: u64) -> f64 {
    if noise.is_deterministic() {
        return quantize(mean);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(pixel_seed(noise.rng_seed, frame, pixel));
    let signal = mean - noise.background_level;
    let mut value = if noise.shot_noise {
        if signal > 0.0 {
            Poisson::new(signal)
                .expect("positive finite Poisson mean")
                .sample(&mut rng)
        } else {
            0.0
        }
    } else {
        signal
    };
    value += noise.background_level;
    if noise.read_noise_sigma > 0.0 {
        value += Normal::new(0.0, noise.read_noise_sigma)
            .expect("finite read noise")
            .sample(&mut rng);
    }
    quantize(value)
}

/// Builds the noise-free expected frames.
#[allow(clippy::too_many_arguments)]
pub fn expected_stack(
    model: &CorrelationModel,
    envelope: &SignalEnvelope,
    setup: &OpticalSetup,
    geometry: &CameraGeometry,
    noise: &NoiseModel,
    phases: &[f64],
    quad: &QuadratureConfig,
) -> Result<ExpectedStack> {
    geometry.validate()?;
    noise.validate()?;
    validate_phases(phases)?;
    let coherence = coherence_map(model, setup, geometry, quad)?;
    let frames = phases
        .iter()
        .map(|&phi0| {
            Grid::from_fn(geometry.width, geometry.height, |x, y| {
                let q = pixel_to_q(PixelCoord::new(x as f64, y as f64), geometry, setup);
                let intensity = envelope.value(q) * coherence.get(x, y).fringe(phi0);
                noise.photon_scale * intensity / 2.0 + noise.background_level
            })
        })
        .collect();
    let kind = match model {
        CorrelationModel::Gaussian(_) => ModelKind::Gaussian,
        CorrelationModel::Spdc(_) => ModelKind::Spdc,
    };
    Ok(ExpectedStack {
        geometry: *geometry,
        phases: phases.to_vec(),
        frames,
        record: SynthesisRecord {
            setup: *setup,
            model: kind,
            sigma_c: model.sigma_c(),
            envelope: *envelope,
            noise: *noise,
        },
    })
}

/// Expected frames plus one noise realization.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_stack(
    model: &CorrelationModel,
    envelope: &SignalEnvelope,
    setup: &OpticalSetup,
    geometry: &CameraGeometry,
    noise: &NoiseModel,
    phases: &[f64],
    quad: &QuadratureConfig,
) -> Result<FrameStack> {
    expected_stack(model, envelope, setup, geometry, noise, phases, quad)?.realize(noise)
}

/// Per-pixel coherence of the conditional density.
fn coherence_map(
    model: &CorrelationModel,
    setup: &OpticalSetup,
    geometry: &CameraGeometry,
    quad: &QuadratureConfig,
) -> Result<Grid<Coherence>> {
    match model {
        CorrelationModel::Gaussian(g) => {
            // The Gaussian integrand factorizes, so one 1-D integral per
            // column and per row gives the exact tensor-product result.
            let alpha = setup.alpha();
            let columns = (0..geometry.width)
                .into_par_iter()
                .map(|x| {
                    let q = pixel_to_q(PixelCoord::new(x as f64, 0.0), geometry, setup);
                    g.axis_factor(q.qx, alpha, quad)
                })
                .collect::<Result<Vec<_>>>()?;
            let rows = (0..geometry.height)
                .into_par_iter()
                .map(|y| {
                    let q = pixel_to_q(PixelCoord::new(0.0, y as f64), geometry, setup);
                    g.axis_factor(q.qy, alpha, quad)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut cells = Vec::with_capacity(geometry.pixel_count());
            for row in &rows {
                for column in &columns {
                    cells.push(Coherence::from_axes(column, row, quad.tolerance)?);
                }
            }
            Ok(Grid::from_vec(geometry.width, geometry.height, cells))
        }
        CorrelationModel::Spdc(s) => {
            let corners = [
                (0.0, 0.0),
                ((geometry.width - 1) as f64, 0.0),
                (0.0, (geometry.height - 1) as f64),
                ((geometry.width - 1) as f64, (geometry.height - 1) as f64),
            ];
            let q_max = corners
                .iter()
                .map(|&(x, y)| pixel_to_q(PixelCoord::new(x, y), geometry, setup).norm())
                .fold(0.0, f64::max);
            let table = RadialCoherence::build(s, setup, q_max)?;
            Ok(Grid::from_fn(geometry.width, geometry.height, |x, y| {
                let q = pixel_to_q(PixelCoord::new(x as f64, y as f64), geometry, setup);
                table.at(q.norm())
            }))
        }
    }
}

/// Coherence of a rotationally symmetric model tabulated against `|q_s|`
/// and read back by 4-point Lagrange interpolation.
///
/// The SPDC density depends only on `|q_s + q_i|` and `|q_s − r·q_i|` and the
/// idler phase only on `|q_i|`, so the coherence depends only on `|q_s|`.
/// Nodes are spaced so the chirp advances at most π/16 between them.
#[derive(Debug, Clone)]
pub struct RadialCoherence {
    step: f64,
    values: Vec<Complex64>,
}

impl RadialCoherence {
    pub fn build(model: &SpdcCorrelationModel, setup: &OpticalSetup, q_max: f64) -> Result<Self> {
        let by_phase = if setup.alpha() > 0.0 {
            (PI / 16.0) / (2.0 * setup.alpha() * (q_max + model.sigma_c()))
        } else {
            f64::INFINITY
        };
        let step = by_phase.min(model.sigma_c() / 4.0);
        let n = (q_max / step).ceil() as usize + 3;
        if n > 1 << 14 {
            return Err(Error::QuadratureFailure {
                estimate: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        let values = (0..n)
            .into_par_iter()
            .map(|k| {
                // Tabulate on both sides of zero by symmetry.
                let q = TransverseWaveVector::new(step * k as f64, 0.0);
                model.coherence(q, setup).map(|c| c.moment)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { step, values })
    }

    pub fn at(&self, q: f64) -> Coherence {
        let t = q / self.step;
        let i = (t.floor() as isize).clamp(1, self.values.len() as isize - 3) as usize;
        let x = t - i as f64;
        // Lagrange basis on nodes −1, 0, 1, 2 relative to `i`.
        let w = [
            -x * (x - 1.0) * (x - 2.0) / 6.0,
            (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0,
            -(x + 1.0) * x * (x - 2.0) / 2.0,
            (x + 1.0) * x * (x - 1.0) / 6.0,
        ];
        let moment = (0..4).fold(Complex64::new(0.0, 0.0), |acc, j| {
            acc + self.values[i + j - 1] * w[j]
        });
        Coherence {
            mass: 1.0,
            moment,
            error: 0.0,
        }
    }
}
