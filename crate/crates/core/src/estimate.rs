//! Inversion of the visibility FWHM to the correlation width σ_c.
//!
//! In the Gaussian model the camera-plane FWHM obeys
//!
//! ```text
//! (FWHM / 2·s)² · α / ln 2 = p + 1/p,   p = 2ασ_c²,  s = f_cλ_S/2π
//! ```
//!
//! which is monotone only for `p < 1`. Inversion is restricted to
//! `p < regime_bound` (default 0.5).

use crate::error::{Error, Result};
use crate::model::OpticalSetup;
use crate::pipeline::{
    find_center, fit_visibility, intensity_centroid, preprocess, profile_fwhm, radial_profile,
    CenterSearch, FwhmMeasurement, RadialProfile, VisibilityMap, DEFAULT_ANGLES,
    DEFAULT_MASK_DISK_RADIUS, DEFAULT_MASK_THRESHOLD,
};
use crate::synth::{FrameStack, PixelCoord};

pub const DEFAULT_REGIME_BOUND: f64 = 0.5;
pub const DEFAULT_SIGMA_MIN: f64 = 100.0;
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-6;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    pub regime_bound: f64,
    /// Lower end of the bisection bracket, m⁻¹.
    pub sigma_min: f64,
    /// Upper end; `None` places it on the regime bound.
    pub sigma_max: Option<f64>,
    pub relative_tolerance: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            regime_bound: DEFAULT_REGIME_BOUND,
            sigma_min: DEFAULT_SIGMA_MIN,
            sigma_max: None,
            relative_tolerance: DEFAULT_RELATIVE_TOLERANCE,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.regime_bound > 0.0 && self.regime_bound <= 1.0) {
            return Err(Error::invalid("regime_bound", "must lie in (0, 1]"));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min.is_finite()) {
            return Err(Error::invalid("sigma_min", "must be strictly positive"));
        }
        if let Some(max) = self.sigma_max {
            if !(max > self.sigma_min && max.is_finite()) {
                return Err(Error::invalid("sigma_max", "must exceed sigma_min"));
            }
        }
        if !(self.relative_tolerance > 0.0 && self.relative_tolerance < 1.0) {
            return Err(Error::invalid("relative_tolerance", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Bisection bracket for `setup`; errors if any part of it lies at or
    /// beyond the regime bound.
    pub fn bracket(&self, setup: &OpticalSetup) -> Result<(f64, f64)> {
        self.validate()?;
        if setup.alpha() == 0.0 {
            return Err(Error::NoDecay);
        }
        let limit = regime_sigma(setup, self.regime_bound);
        let hi = self.sigma_max.unwrap_or(limit);
        if hi > limit {
            return Err(Error::RegimeViolation {
                regime_parameter: setup.regime_parameter(hi),
                bound: self.regime_bound,
            });
        }
        if self.sigma_min >= hi {
            return Err(Error::RegimeViolation {
                regime_parameter: setup.regime_parameter(self.sigma_min),
                bound: self.regime_bound,
            });
        }
        Ok((self.sigma_min, hi))
    }
}

/// σ_c at which `2ασ_c²` reaches `bound`.
pub fn regime_sigma(setup: &OpticalSetup, bound: f64) -> f64 {
    (bound / (2.0 * setup.alpha())).sqrt()
}

/// Camera-plane FWHM without any regime check.
fn fwhm_unchecked(sigma_c: f64, setup: &OpticalSetup) -> f64 {
    let a = setup.alpha();
    let s2 = sigma_c * sigma_c;
    let ratio = 2f64.ln() * (1.0 + 4.0 * a * a * s2 * s2) / (2.0 * a * a * s2);
    2.0 * setup.camera_scale() * ratio.sqrt()
}

/// Camera-plane FWHM of the closed-form visibility peak.
pub fn fwhm_from_sigma(sigma_c: f64, setup: &OpticalSetup, regime_bound: f64) -> Result<f64> {
    if !(sigma_c > 0.0 && sigma_c.is_finite()) {
        return Err(Error::invalid("sigma_c", "must be strictly positive"));
    }
    if setup.alpha() == 0.0 {
        return Err(Error::NoDecay);
    }
    let p = setup.regime_parameter(sigma_c);
    if p >= regime_bound {
        return Err(Error::RegimeViolation {
            regime_parameter: p,
            bound: regime_bound,
        });
    }
    Ok(fwhm_unchecked(sigma_c, setup))
}

/// Regime parameter on the monotone branch that yields `fwhm`, clamped to
/// the turning point `p = 1` when no branch reaches it.
pub fn implied_regime_parameter(fwhm: f64, setup: &OpticalSetup) -> f64 {
    let g = (fwhm / (2.0 * setup.camera_scale())).powi(2) * setup.alpha() / 2f64.ln();
    if g <= 2.0 {
        1.0
    } else {
        0.5 * (g - (g * g - 4.0).sqrt())
    }
}

/// Regime parameter implied by a peak visibility `v₀ = (1 + p²)^(-1/2)`.
pub fn regime_parameter_from_peak(peak_visibility: f64) -> f64 {
    if peak_visibility >= 1.0 {
        0.0
    } else if peak_visibility <= 0.0 {
        f64::INFINITY
    } else {
        (1.0 / (peak_visibility * peak_visibility) - 1.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub iterations: usize,
    pub bracket: (f64, f64),
    /// FWHM at the bracket ends `(σ_max, σ_min)`, i.e. ascending.
    pub fwhm_range: (f64, f64),
    /// `|fwhm(σ̂) − fwhm| / fwhm`.
    pub roundtrip_residual: f64,
    pub peak_visibility: Option<f64>,
    /// `√(1/v₀² − 1)` from the measured peak.
    pub peak_regime_parameter: Option<f64>,
    pub center: Option<PixelCoord>,
    pub center_score: Option<f64>,
    /// The symmetry score was flat and the intensity centroid was used.
    pub center_degenerate: bool,
    pub profile_fit: Option<ProfileFit>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate {
    pub sigma_c: f64,
    /// `sigma_c²`, the conditional momentum variance.
    pub variance: f64,
    pub fwhm_camera: f64,
    pub fwhm_q: f64,
    pub regime_parameter: f64,
    pub regime_bound: f64,
    pub regime_valid: bool,
    /// `1/w_p²` when the pump waist is known.
    pub theoretical_variance: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// Bisection for σ_c with `fwhm_from_sigma(σ_c) = fwhm`.
pub fn sigma_from_fwhm(
    fwhm: f64,
    setup: &OpticalSetup,
    config: &InversionConfig,
) -> Result<CorrelationEstimate> {
    if !(fwhm > 0.0 && fwhm.is_finite()) {
        return Err(Error::invalid("fwhm", "must be strictly positive"));
    }
    let (mut lo, mut hi) = config.bracket(setup)?;
    let bracket = (lo, hi);
    let (f_lo, f_hi) = (fwhm_unchecked(lo, setup), fwhm_unchecked(hi, setup));
    if fwhm > f_lo {
        return Err(Error::BracketFailure {
            fwhm,
            min: f_hi,
            max: f_lo,
        });
    }
    if fwhm < f_hi {
        // Narrower than anything on the monotone branch.
        let implied = implied_regime_parameter(fwhm, setup);
        return Err(if implied >= config.regime_bound || config.sigma_max.is_none() {
            Error::RegimeViolation {
                regime_parameter: implied.max(config.regime_bound),
                bound: config.regime_bound,
            }
        } else {
            Error::BracketFailure {
                fwhm,
                min: f_hi,
                max: f_lo,
            }
        });
    }

    let tol = config.relative_tolerance;
    let mut iterations = 0;
    let mut mid = 0.5 * (lo + hi);
    while iterations < MAX_BISECTIONS {
        iterations += 1;
        mid = 0.5 * (lo + hi);
        let f = fwhm_unchecked(mid, setup);
        if f > fwhm {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * mid && (f / fwhm - 1.0).abs() <= tol {
            break;
        }
    }
    let roundtrip_residual = (fwhm_unchecked(mid, setup) / fwhm - 1.0).abs();
    let p = setup.regime_parameter(mid);
    Ok(CorrelationEstimate {
        sigma_c: mid,
        variance: mid * mid,
        fwhm_camera: fwhm,
        fwhm_q: fwhm / setup.camera_scale(),
        regime_parameter: p,
        regime_bound: config.regime_bound,
        regime_valid: p < config.regime_bound,
        theoretical_variance: Some(setup.theoretical_sigma_c().powi(2)),
        diagnostics: Diagnostics {
            iterations,
            bracket,
            fwhm_range: (f_hi, f_lo),
            roundtrip_residual,
            ..Diagnostics::default()
        },
    })
}

/// Least-squares fit of `A·exp(−B·ρ²)` to the central part of a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileFit {
    pub amplitude: f64,
    /// Camera-plane decay rate, m⁻².
    pub decay: f64,
    /// Regime parameter implied by the decay rate (monotone branch).
    pub regime_parameter: f64,
    pub sigma_c: f64,
    /// Regime parameter implied by the fitted amplitude.
    pub amplitude_regime_parameter: f64,
    pub rms_residual: f64,
    pub bins_used: usize,
}

/// Fits the closed-form profile shape to every populated bin whose
/// visibility is at least a tenth of the peak, up to the first bin below it.
pub fn fit_profile(profile: &RadialProfile, setup: &OpticalSetup) -> Result<ProfileFit> {
    if setup.alpha() == 0.0 {
        return Err(Error::NoDecay);
    }
    let fwhm = profile_fwhm(profile)?;
    let cut = 0.1 * fwhm.peak;
    let mut points = Vec::new();
    for k in 0..profile.len() {
        if profile.sample_counts[k] == 0 {
            continue;
        }
        let v = profile.visibility[k];
        if v < cut {
            break;
        }
        points.push((profile.radii[k].powi(2), v, profile.sample_counts[k] as f64));
    }
    if points.len() < 4 {
        return Err(Error::invalid("profile", "too few bins above a tenth of the peak"));
    }

    // Weighted log-linear start, then Gauss-Newton on the linear residuals.
    let (mut a, mut b) = {
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, v, n) in &points {
            let w = n * v * v;
            let y = v.ln();
            sw += w;
            sx += w * x;
            sy += w * y;
            sxx += w * x * x;
            sxy += w * x * y;
        }
        let slope = (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
        (((sy - slope * sx) / sw).exp(), -slope)
    };
    for _ in 0..50 {
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, v, n) in &points {
            let e = (-b * x).exp();
            let r = v - a * e;
            let (da, db) = (e, -a * x * e);
            jaa += n * da * da;
            jab += n * da * db;
            jbb += n * db * db;
            ga += n * da * r;
            gb += n * db * r;
        }
        let det = jaa * jbb - jab * jab;
        if !(det.abs() > 0.0) {
            break;
        }
        let step_a = (jbb * ga - jab * gb) / det;
        let step_b = (jaa * gb - jab * ga) / det;
        a += step_a;
        b += step_b;
        if step_a.abs() <= 1e-14 * a.abs() && step_b.abs() <= 1e-14 * b.abs() {
            break;
        }
    }
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::invalid("profile", "closed-form profile fit did not converge"));
    }
    let (sw, ss) = points.iter().fold((0.0, 0.0), |(sw, ss), &(x, v, n)| {
        (sw + n, ss + n * (v - a * (-b * x).exp()).powi(2))
    });

    // q-space decay k = αp/(1+p²); the smaller root is the monotone branch.
    let alpha = setup.alpha();
    let k = b * setup.camera_scale().powi(2);
    let disc = alpha * alpha - 4.0 * k * k;
    let p = if disc > 0.0 {
        (alpha - disc.sqrt()) / (2.0 * k)
    } else {
        1.0
    };
    Ok(ProfileFit {
        amplitude: a,
        decay: b,
        regime_parameter: p,
        sigma_c: (p / (2.0 * alpha)).sqrt(),
        amplitude_regime_parameter: regime_parameter_from_peak(a),
        rms_residual: (ss / sw).sqrt(),
        bins_used: points.len(),
    })
}

/// Settings for the full stack analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    /// Taken from synthesis metadata when `None`.
    pub setup: Option<OpticalSetup>,
    /// Counts subtracted before fitting; metadata background or zero when
    /// `None`.
    pub background: Option<f64>,
    /// Frame smoothing in pixels. Off by default: the fringe phase varies
    /// across the sensor, so smoothing lowers the visibility away from
    /// the centre.
    pub blur_sigma: f64,
    pub mask_threshold: f64,
    pub mask_disk_radius: f64,
    pub center: CenterSearch,
    /// Skips the centre search.
    pub fixed_center: Option<PixelCoord>,
    pub n_angles: usize,
    /// Pixels.
    pub radial_step: f64,
    pub inversion: InversionConfig,
    /// Reject peaks whose visibility implies `p ≥ regime_bound`; the FWHM
    /// alone cannot tell `p` from `1/p`.
    pub peak_guard: bool,
    pub profile_fit: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            setup: None,
            background: None,
            blur_sigma: 0.0,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
            mask_disk_radius: DEFAULT_MASK_DISK_RADIUS,
            center: CenterSearch::default(),
            fixed_center: None,
            n_angles: DEFAULT_ANGLES,
            radial_step: 1.0,
            inversion: InversionConfig::default(),
            peak_guard: true,
            profile_fit: true,
        }
    }
}

/// Estimate plus the intermediate products it was derived from.
#[derive(Debug, Clone)]
pub struct StackAnalysis {
    pub estimate: CorrelationEstimate,
    pub visibility_map: VisibilityMap,
    pub profile: RadialProfile,
    pub fwhm: FwhmMeasurement,
}

/// Visibility map, centre and profile; the parts of the analysis that do
/// not need the optical setup.
#[derive(Debug, Clone)]
pub struct ProfileAnalysis {
    pub visibility_map: VisibilityMap,
    pub profile: RadialProfile,
    pub center: PixelCoord,
    pub center_score: Option<f64>,
    pub center_degenerate: bool,
}

pub fn profile_from_stack(stack: &FrameStack, config: &AnalysisConfig) -> Result<ProfileAnalysis> {
    let synthesis = stack.metadata().synthesis();
    let background = config
        .background
        .or(synthesis.map(|r| r.noise.background_level))
        .unwrap_or(0.0);
    let cleaned =
        preprocess(stack, background, config.blur_sigma).map_err(|e| e.at_stage("preprocess"))?;
    let mut vmap = fit_visibility(&cleaned, config.mask_threshold).map_err(|e| e.at_stage("fit"))?;
    if !(config.mask_disk_radius > 0.0) {
        return Err(Error::invalid("mask_disk_radius", "must be strictly positive").at_stage("fit"));
    }
    vmap.mask_disk_radius = config.mask_disk_radius;

    let (center, center_score, center_degenerate) = match config.fixed_center {
        Some(c) => (c, None, false),
        None => {
            vmap.remask(intensity_centroid(&vmap.mean_intensity));
            match find_center(&vmap, &config.center) {
                Ok(fit) => (fit.center, Some(fit.score), false),
                Err(Error::DegenerateScore) => {
                    (intensity_centroid(&vmap.mean_intensity), None, true)
                }
                Err(e) => return Err(e.at_stage("center")),
            }
        }
    };
    vmap.remask(center);
    let profile = radial_profile(&vmap, center, config.n_angles, config.radial_step)
        .map_err(|e| e.at_stage("profile"))?;
    Ok(ProfileAnalysis {
        visibility_map: vmap,
        profile,
        center,
        center_score,
        center_degenerate,
    })
}

/// Background removal, sinusoid fits, centre search, radial profile, FWHM
/// and inversion. Errors carry the stage that produced them.
pub fn estimate_from_stack(stack: &FrameStack, config: &AnalysisConfig) -> Result<StackAnalysis> {
    let synthesis = stack.metadata().synthesis();
    let setup = config
        .setup
        .or(synthesis.map(|r| r.setup))
        .ok_or_else(|| {
            Error::invalid("setup", "stack carries no optical setup; supply one").at_stage("setup")
        })?;
    let parts = profile_from_stack(stack, config)?;
    let fwhm = match profile_fwhm(&parts.profile) {
        Ok(m) => m,
        // Without idler phase curvature there is no peak to measure.
        Err(_) if setup.alpha() == 0.0 => {
            return Err(Error::NoDecay.at_stage("fwhm"));
        }
        Err(e) => return Err(e.at_stage("fwhm")),
    };

    let bound = config.inversion.regime_bound;
    let peak_p = regime_parameter_from_peak(fwhm.peak);
    if config.peak_guard && peak_p >= bound {
        return Err(Error::RegimeViolation {
            regime_parameter: peak_p,
            bound,
        }
        .at_stage("inversion"));
    }
    let mut estimate = sigma_from_fwhm(fwhm.fwhm, &setup, &config.inversion)
        .map_err(|e| e.at_stage("inversion"))?;
    if peak_p >= bound {
        estimate.regime_valid = false;
    }
    let d = &mut estimate.diagnostics;
    d.peak_visibility = Some(fwhm.peak);
    d.peak_regime_parameter = Some(peak_p);
    d.center = Some(parts.center);
    d.center_score = parts.center_score;
    d.center_degenerate = parts.center_degenerate;
    if config.profile_fit {
        d.profile_fit = fit_profile(&parts.profile, &setup).ok();
    }
    Ok(StackAnalysis {
        estimate,
        visibility_map: parts.visibility_map,
        profile: parts.profile,
        fwhm,
    })
}
