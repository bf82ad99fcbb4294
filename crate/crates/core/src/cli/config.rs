//! `key = value` run configuration.
//!
//! Every key is optional. Recognised keys, with defaults:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `lambda_p`, `lambda_s`, `lambda_i` | 532e-9, 810e-9, 1550e-9 | wavelengths, m |
//! | `d` | 11.7e-3 | idler propagation distance, m |
//! | `f_c` | 155e-3 | camera lens focal length, m |
//! | `w_p` | 125e-6 | pump waist, m |
//! | `crystal_length` | 1e-3 | m |
//! | `energy_tolerance` | 1e-3 | relative photon-energy mismatch allowed |
//! | `model` | gaussian | `gaussian` or `spdc` |
//! | `sigma_c` | 1/w_p | Gaussian correlation width, 1/m |
//! | `sigma_env` | 5e4 | signal envelope width, 1/m |
//! | `width`, `height` | 256 | pixels |
//! | `pixel_pitch` | 16e-6 | m |
//! | `center_x`, `center_y` | sensor middle | optical axis, pixels |
//! | `photon_scale` | 1e4 | counts at full constructive interference |
//! | `read_noise_sigma` | 5 | counts |
//! | `background_level` | 100 | counts |
//! | `shot_noise` | true | Poisson sampling |
//! | `seed` | 0 | noise seed |
//! | `n_phases` | 25 | phase settings on [0, 2π) |
//! | `quad_tolerance` | 1e-8 | quadrature error bound |
//! | `background` | from metadata | counts subtracted before fitting |
//! | `blur_sigma` | 0 | frame smoothing, pixels |
//! | `mask_threshold` | 0.2 | fraction of central intensity |
//! | `mask_disk_radius` | 5 | pixels |
//! | `search_window` | 10 | centre search half-width, pixels |
//! | `center_angles` | 64 | rays in the centre score |
//! | `n_angles` | 201 | profile cross-sections |
//! | `radial_step` | 1 | profile bin width, pixels |
//! | `regime_bound` | 0.5 | largest accepted 2ασ_c² |
//! | `sigma_min` | 100 | lower bisection bound, 1/m |
//! | `peak_guard` | true | reject peaks implying 2ασ_c² ≥ bound |
//! | `sweep_w_p` | w_p | comma-separated pump waists |
//! | `sweep_d` | d | comma-separated distances |
//! | `sweep_photon_scale` | photon_scale | comma-separated scales |
//! | `sweep_seeds` | 1 | repeats per point, seeds `seed, seed+1, …` |

use std::collections::HashMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimate::AnalysisConfig;
use crate::model::{
    CorrelationModel, GaussianCorrelationModel, OpticalSetup, SignalEnvelope, SpdcCorrelationModel,
    DEFAULT_ENERGY_TOLERANCE,
};
use crate::quadrature::QuadratureConfig;
use crate::stackio::parse_key_values;
use crate::synth::{CameraGeometry, ModelKind, NoiseModel, PixelCoord, DEFAULT_PHASE_COUNT};

const SETUP_KEYS: [&str; 7] = ["lambda_p", "lambda_s", "lambda_i", "d", "f_c", "w_p", "crystal_length"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxes {
    pub w_p: Vec<f64>,
    pub d: Vec<f64>,
    pub photon_scale: Vec<f64>,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub setup: OpticalSetup,
    pub energy_tolerance: f64,
    pub model: ModelKind,
    pub sigma_c: Option<f64>,
    pub envelope: SignalEnvelope,
    pub geometry: CameraGeometry,
    pub noise: NoiseModel,
    pub n_phases: usize,
    pub quadrature: QuadratureConfig,
    pub analysis: AnalysisConfig,
    pub sweep: SweepAxes,
    /// Line on which each key was set.
    lines: HashMap<String, usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let setup = OpticalSetup::default();
        let noise = NoiseModel::default();
        Self {
            setup,
            energy_tolerance: DEFAULT_ENERGY_TOLERANCE,
            model: ModelKind::Gaussian,
            sigma_c: None,
            envelope: SignalEnvelope::default(),
            geometry: CameraGeometry::default(),
            noise,
            n_phases: DEFAULT_PHASE_COUNT,
            quadrature: QuadratureConfig::default(),
            analysis: AnalysisConfig::default(),
            sweep: SweepAxes {
                w_p: vec![setup.w_p],
                d: vec![setup.d],
                photon_scale: vec![noise.photon_scale],
                seeds: 1,
            },
            lines: HashMap::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("cannot parse `{key}` from `{value}`"),
    })
}

fn parse_list(key: &str, value: &str, line: usize) -> Result<Vec<f64>> {
    let items: Vec<f64> = value
        .split(',')
        .map(|item| parse(key, item.trim(), line))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config {
            line,
            message: format!("`{key}` needs at least one value"),
        });
    }
    Ok(items)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut center_x = None;
        let mut center_y = None;
        let mut sweep_w_p = None;
        let mut sweep_d = None;
        let mut sweep_photon = None;
        for kv in parse_key_values(text)? {
            let (k, v, line) = (kv.key.as_str(), kv.value.as_str(), kv.line);
            match k {
                "lambda_p" => cfg.setup.lambda_p = parse(k, v, line)?,
                "lambda_s" => cfg.setup.lambda_s = parse(k, v, line)?,
                "lambda_i" => cfg.setup.lambda_i = parse(k, v, line)?,
                "d" => cfg.setup.d = parse(k, v, line)?,
                "f_c" => cfg.setup.f_c = parse(k, v, line)?,
                "w_p" => cfg.setup.w_p = parse(k, v, line)?,
                "crystal_length" => cfg.setup.crystal_length = parse(k, v, line)?,
                "energy_tolerance" => cfg.energy_tolerance = parse(k, v, line)?,
                "model" => {
                    cfg.model = ModelKind::parse(v).ok_or_else(|| Error::Config {
                        line,
                        message: format!("`model` must be gaussian or spdc, got `{v}`"),
                    })?
                }
                "sigma_c" => cfg.sigma_c = Some(parse(k, v, line)?),
                "sigma_env" => cfg.envelope.sigma_env = parse(k, v, line)?,
                "width" => cfg.geometry.width = parse(k, v, line)?,
                "height" => cfg.geometry.height = parse(k, v, line)?,
                "pixel_pitch" => cfg.geometry.pixel_pitch = parse(k, v, line)?,
                "center_x" => center_x = Some(parse(k, v, line)?),
                "center_y" => center_y = Some(parse(k, v, line)?),
                "photon_scale" => cfg.noise.photon_scale = parse(k, v, line)?,
                "read_noise_sigma" => cfg.noise.read_noise_sigma = parse(k, v, line)?,
                "background_level" => cfg.noise.background_level = parse(k, v, line)?,
                "shot_noise" => cfg.noise.shot_noise = parse(k, v, line)?,
                "seed" => cfg.noise.rng_seed = parse(k, v, line)?,
                "n_phases" => cfg.n_phases = parse(k, v, line)?,
                "quad_tolerance" => cfg.quadrature.tolerance = parse(k, v, line)?,
                "background" => cfg.analysis.background = Some(parse(k, v, line)?),
                "blur_sigma" => cfg.analysis.blur_sigma = parse(k, v, line)?,
                "mask_threshold" => cfg.analysis.mask_threshold = parse(k, v, line)?,
                "mask_disk_radius" => cfg.analysis.mask_disk_radius = parse(k, v, line)?,
                "search_window" => cfg.analysis.center.window = parse(k, v, line)?,
                "center_angles" => cfg.analysis.center.n_angles = parse(k, v, line)?,
                "n_angles" => cfg.analysis.n_angles = parse(k, v, line)?,
                "radial_step" => cfg.analysis.radial_step = parse(k, v, line)?,
                "regime_bound" => cfg.analysis.inversion.regime_bound = parse(k, v, line)?,
                "sigma_min" => cfg.analysis.inversion.sigma_min = parse(k, v, line)?,
                "peak_guard" => cfg.analysis.peak_guard = parse(k, v, line)?,
                "sweep_w_p" => sweep_w_p = Some(parse_list(k, v, line)?),
                "sweep_d" => sweep_d = Some(parse_list(k, v, line)?),
                "sweep_photon_scale" => sweep_photon = Some(parse_list(k, v, line)?),
                "sweep_seeds" => cfg.sweep.seeds = parse(k, v, line)?,
                _ => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown key `{k}`"),
                    })
                }
            }
            cfg.lines.insert(kv.key.clone(), line);
        }
        let g = cfg.geometry;
        let centred = CameraGeometry::centered(g.width, g.height, g.pixel_pitch);
        cfg.geometry.center = PixelCoord::new(
            center_x.unwrap_or(centred.center.x),
            center_y.unwrap_or(centred.center.y),
        );
        cfg.sweep.w_p = sweep_w_p.unwrap_or(vec![cfg.setup.w_p]);
        cfg.sweep.d = sweep_d.unwrap_or(vec![cfg.setup.d]);
        cfg.sweep.photon_scale = sweep_photon.unwrap_or(vec![cfg.noise.photon_scale]);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Line a key was set on, if it was.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    /// True when the file set any optical-setup key.
    pub fn sets_setup(&self) -> bool {
        SETUP_KEYS.iter().any(|k| self.lines.contains_key(*k))
    }

    /// Rewrites a parameter error as a config error on the offending line.
    fn locate(&self, err: Error) -> Error {
        match err {
            Error::InvalidParameter { name, reason } => Error::Config {
                line: self.line_of(name).unwrap_or(0),
                message: format!("`{name}` {reason}"),
            },
            other => other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_inner().map_err(|e| self.locate(e))
    }

    fn validate_inner(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be strictly positive, got {v}")))
            }
        };
        positive("energy_tolerance", self.energy_tolerance)?;
        self.setup.validate(self.energy_tolerance)?;
        if let Some(s) = self.sigma_c {
            positive("sigma_c", s)?;
            if self.model == ModelKind::Spdc {
                return Err(Error::invalid("sigma_c", "applies to the gaussian model only"));
            }
        }
        SignalEnvelope::new(self.envelope.sigma_env)?;
        self.geometry.validate()?;
        self.noise.validate()?;
        if self.n_phases < 3 {
            return Err(Error::invalid("n_phases", "at least three phase settings are needed"));
        }
        positive("quad_tolerance", self.quadrature.tolerance)?;
        let a = &self.analysis;
        if let Some(b) = a.background {
            if !b.is_finite() {
                return Err(Error::invalid("background", "must be finite"));
            }
        }
        if !(a.blur_sigma >= 0.0 && a.blur_sigma.is_finite()) {
            return Err(Error::invalid("blur_sigma", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&a.mask_threshold) {
            return Err(Error::invalid("mask_threshold", "must lie in [0, 1)"));
        }
        positive("mask_disk_radius", a.mask_disk_radius)?;
        if a.center.n_angles == 0 {
            return Err(Error::invalid("center_angles", "must be positive"));
        }
        if a.n_angles == 0 {
            return Err(Error::invalid("n_angles", "must be positive"));
        }
        positive("radial_step", a.radial_step)?;
        a.inversion.validate()?;
        for &w in &self.sweep.w_p {
            positive("sweep_w_p", w)?;
        }
        for &d in &self.sweep.d {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::invalid("sweep_d", format!("must be non-negative, got {d}")));
            }
        }
        for &p in &self.sweep.photon_scale {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::invalid("sweep_photon_scale", format!("must be non-negative, got {p}")));
            }
        }
        if self.sweep.seeds == 0 {
            return Err(Error::invalid("sweep_seeds", "must be positive"));
        }
        Ok(())
    }

    /// Correlation model for `setup`; the Gaussian width defaults to `1/w_p`.
    pub fn build_model(&self, setup: &OpticalSetup) -> Result<CorrelationModel> {
        match self.model {
            ModelKind::Gaussian => {
                let sigma = self.sigma_c.unwrap_or(setup.theoretical_sigma_c());
                Ok(CorrelationModel::Gaussian(GaussianCorrelationModel::new(sigma)?))
            }
            ModelKind::Spdc => Ok(CorrelationModel::Spdc(SpdcCorrelationModel::new(
                *setup,
                self.quadrature,
            )?)),
        }
    }

    pub fn phases(&self) -> Vec<f64> {
        crate::synth::uniform_phases(self.n_phases)
    }

    /// `key = value` echo of every resolved parameter.
    pub fn echo(&self) -> String {
        let s = &self.setup;
        let g = &self.geometry;
        let n = &self.noise;
        let a = &self.analysis;
        let mut lines = vec![
            format!("lambda_p = {}", s.lambda_p),
            format!("lambda_s = {}", s.lambda_s),
            format!("lambda_i = {}", s.lambda_i),
            format!("d = {}", s.d),
            format!("f_c = {}", s.f_c),
            format!("w_p = {}", s.w_p),
            format!("crystal_length = {}", s.crystal_length),
            format!("energy_tolerance = {}", self.energy_tolerance),
            format!("model = {}", self.model.as_str()),
        ];
        if self.model == ModelKind::Gaussian {
            lines.push(format!(
                "sigma_c = {}",
                self.sigma_c.unwrap_or(s.theoretical_sigma_c())
            ));
        }
        lines.extend([
            format!("sigma_env = {}", self.envelope.sigma_env),
            format!("width = {}", g.width),
            format!("height = {}", g.height),
            format!("pixel_pitch = {}", g.pixel_pitch),
            format!("center_x = {}", g.center.x),
            format!("center_y = {}", g.center.y),
            format!("photon_scale = {}", n.photon_scale),
            format!("read_noise_sigma = {}", n.read_noise_sigma),
            format!("background_level = {}", n.background_level),
            format!("shot_noise = {}", n.shot_noise),
            format!("seed = {}", n.rng_seed),
            format!("n_phases = {}", self.n_phases),
            format!("quad_tolerance = {}", self.quadrature.tolerance),
            format!("blur_sigma = {}", a.blur_sigma),
            format!("mask_threshold = {}", a.mask_threshold),
            format!("regime_bound = {}", a.inversion.regime_bound),
        ]);
        lines.join("\n") + "\n"
    }
}
