//! Biphoton angular-spectrum model and the single-beam interference
//! intensity of the two-crystal arrangement.
//!
//! All transverse wave vectors are in inverse meters, lengths in meters.
//! The detected intensity at signal mode `q_s` is
//!
//! ```text
//! I(q_s; φ0) = p_S(q_s) · ∫ p(q_i | q_s) · (1 + cos[φ_I(q_i) + φ0]) d²q_i
//! ```
//!
//! which is evaluated here as `p_S · (N + Re[e^{iφ0} · E])` with
//! `N = ∫ p d²q_i` and `E = ∫ p · e^{iφ_I} d²q_i`, both from one quadrature
//! pass. The fringe visibility at `q_s` is then `|E| / N`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_2d_pair, PanelRule, QuadratureConfig};

/// Paraxial bound on transverse wave-vector magnitudes, m⁻¹.
pub const DEFAULT_Q_MAX: f64 = 5e5;
/// Relative tolerance on `1/λp = 1/λs + 1/λi`; loose enough for rounded
/// catalogue wavelengths.
pub const DEFAULT_ENERGY_TOLERANCE: f64 = 1e-3;
/// Relative tolerance for numerically normalized conditional densities.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Physical parameters of the two-crystal interferometer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalSetup {
    pub lambda_p: f64,
    pub lambda_s: f64,
    pub lambda_i: f64,
    /// Effective free-space propagation of the idler between the crystals.
    /// Zero is admitted: it switches the idler phase off entirely.
    pub d: f64,
    /// Focal length of the lens in front of the camera.
    pub f_c: f64,
    /// Gaussian pump waist at both crystals.
    pub w_p: f64,
    pub crystal_length: f64,
}

impl Default for OpticalSetup {
    /// 532 nm pump, 810 nm signal, 1550 nm idler, d = 11.7 mm,
    /// f_c = 155 mm, w_p = 125 µm, L = 1 mm.
    fn default() -> Self {
        Self {
            lambda_p: 532e-9,
            lambda_s: 810e-9,
            lambda_i: 1550e-9,
            d: 11.7e-3,
            f_c: 155e-3,
            w_p: 125e-6,
            crystal_length: 1e-3,
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be strictly positive, got {value}")))
    }
}

impl OpticalSetup {
    pub fn with_pump_waist(self, w_p: f64) -> Self {
        Self { w_p, ..self }
    }

    pub fn with_distance(self, d: f64) -> Self {
        Self { d, ..self }
    }

    pub fn validate(&self, energy_tolerance: f64) -> Result<()> {
        positive("lambda_p", self.lambda_p)?;
        positive("lambda_s", self.lambda_s)?;
        positive("lambda_i", self.lambda_i)?;
        if !(self.d >= 0.0 && self.d.is_finite()) {
            return Err(Error::invalid("d", format!("must be non-negative, got {}", self.d)));
        }
        positive("f_c", self.f_c)?;
        positive("w_p", self.w_p)?;
        positive("crystal_length", self.crystal_length)?;
        let pump = 1.0 / self.lambda_p;
        let mismatch = (pump - 1.0 / self.lambda_s - 1.0 / self.lambda_i).abs() / pump;
        if mismatch > energy_tolerance {
            return Err(Error::invalid(
                "lambda_p",
                format!(
                    "energy conservation violated: relative mismatch {mismatch:.3e} exceeds {energy_tolerance:.1e}"
                ),
            ));
        }
        Ok(())
    }

    /// Curvature of the idler phase, `λ_I·d / 4π` (m²).
    pub fn alpha(&self) -> f64 {
        self.lambda_i * self.d / (4.0 * PI)
    }

    /// Camera-plane distance per unit signal wave vector, `f_c·λ_S / 2π`.
    pub fn camera_scale(&self) -> f64 {
        self.f_c * self.lambda_s / (2.0 * PI)
    }

    /// Dimensionless `2·α·σ_c²`; FWHM(σ_c) is monotone while it stays below 1.
    pub fn regime_parameter(&self, sigma_c: f64) -> f64 {
        2.0 * self.alpha() * sigma_c * sigma_c
    }

    /// Correlation width predicted by the Gaussian pump angular spectrum.
    pub fn theoretical_sigma_c(&self) -> f64 {
        1.0 / self.w_p
    }
}

/// Transverse wave vector (m⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransverseWaveVector {
    pub qx: f64,
    pub qy: f64,
}

impl TransverseWaveVector {
    pub const ZERO: Self = Self { qx: 0.0, qy: 0.0 };

    pub const fn new(qx: f64, qy: f64) -> Self {
        Self { qx, qy }
    }

    /// Rejects non-finite components and magnitudes above `q_max`.
    pub fn checked(qx: f64, qy: f64, q_max: f64) -> Result<Self> {
        let q = Self { qx, qy };
        if !(qx.is_finite() && qy.is_finite()) {
            return Err(Error::invalid("q", "components must be finite"));
        }
        if q.norm() > q_max {
            return Err(Error::invalid(
                "q",
                format!("|q| = {:.4e} exceeds paraxial bound {q_max:.4e}", q.norm()),
            ));
        }
        Ok(q)
    }

    pub fn norm_sqr(self) -> f64 {
        self.qx * self.qx + self.qy * self.qy
    }

    pub fn norm(self) -> f64 {
        self.qx.hypot(self.qy)
    }
}

impl Add for TransverseWaveVector {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.qx + rhs.qx, self.qy + rhs.qy)
    }
}

impl Sub for TransverseWaveVector {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.qx - rhs.qx, self.qy - rhs.qy)
    }
}

impl Mul<f64> for TransverseWaveVector {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.qx * rhs, self.qy * rhs)
    }
}

impl Neg for TransverseWaveVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.qx, -self.qy)
    }
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        // Taylor remainder at |x| = 1e-4 is below 1e-18.
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Longitudinal phase mismatch `|q_s − (λI/λS)·q_i|² · λP·λS / (4π·λI)`.
pub fn delta_kz(
    q_s: TransverseWaveVector,
    q_i: TransverseWaveVector,
    setup: &OpticalSetup,
) -> f64 {
    let ratio = setup.lambda_i / setup.lambda_s;
    let mismatch = q_s - q_i * ratio;
    mismatch.norm_sqr() * setup.lambda_p * setup.lambda_s / (4.0 * PI * setup.lambda_i)
}

/// Unnormalized joint density `|A(|q_s+q_i|²) · sinc(L·Δk_z/2)|²` with the
/// Gaussian pump spectrum `A = exp(−|q_s+q_i|²·w_p²/4)`.
pub fn biphoton_density(
    q_s: TransverseWaveVector,
    q_i: TransverseWaveVector,
    setup: &OpticalSetup,
) -> f64 {
    let pump = (-(q_s + q_i).norm_sqr() * setup.w_p * setup.w_p / 2.0).exp();
    let phase_matching = sinc(0.5 * setup.crystal_length * delta_kz(q_s, q_i, setup));
    pump * phase_matching * phase_matching
}

/// Idler phase acquired over the effective propagation distance,
/// `(λ_I·d / 4π)·|q_i|²`.
pub fn phase_free_space(q_i: TransverseWaveVector, setup: &OpticalSetup) -> f64 {
    setup.alpha() * q_i.norm_sqr()
}

/// Gaussian conditional density centred on perfect anti-correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianCorrelationModel {
    sigma_c: f64,
}

/// One axis of the separable Gaussian integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisFactor {
    pub mass: f64,
    pub moment: Complex64,
    pub error: f64,
}

impl GaussianCorrelationModel {
    pub fn new(sigma_c: f64) -> Result<Self> {
        positive("sigma_c", sigma_c)?;
        Ok(Self { sigma_c })
    }

    /// `σ_c = 1/w_p`, the prediction for a Gaussian pump.
    pub fn from_pump_waist(w_p: f64) -> Result<Self> {
        positive("w_p", w_p)?;
        Self::new(1.0 / w_p)
    }

    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    pub fn density(&self, q_i: TransverseWaveVector, q_s: TransverseWaveVector) -> f64 {
        let var = self.sigma_c * self.sigma_c;
        (-(q_s + q_i).norm_sqr() / (2.0 * var)).exp() / (2.0 * PI * var)
    }

    /// `∫ g(x + q) · e^{iαx²} dx` for the 1-D normalized Gaussian `g`.
    ///
    /// The 2-D coherence is the product of the two axis factors, which is
    /// algebraically identical to the tensor-product rule.
    pub fn axis_factor(&self, q: f64, alpha: f64, quad: &QuadratureConfig) -> Result<AxisFactor> {
        let rule = PanelRule::for_chirped_gaussian(-q, self.sigma_c, alpha, quad)?;
        let var = self.sigma_c * self.sigma_c;
        let norm = 1.0 / (2.0 * PI * var).sqrt();
        let (mass, moment) = rule.integrate_pair(|x| {
            let g = norm * (-(x + q) * (x + q) / (2.0 * var)).exp();
            (g, Complex64::from_polar(g, alpha * x * x))
        });
        Ok(AxisFactor {
            mass: mass.value,
            moment: moment.value,
            error: moment.error.max(mass.error),
        })
    }

    pub fn coherence_separable(
        &self,
        q_s: TransverseWaveVector,
        setup: &OpticalSetup,
        quad: &QuadratureConfig,
    ) -> Result<Coherence> {
        let alpha = setup.alpha();
        let fx = self.axis_factor(q_s.qx, alpha, quad)?;
        let fy = self.axis_factor(q_s.qy, alpha, quad)?;
        Coherence::from_axes(&fx, &fy, quad.tolerance)
    }
}

/// Conditional density built from the full biphoton amplitude, normalized
/// numerically at each signal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdcCorrelationModel {
    setup: OpticalSetup,
    quadrature: QuadratureConfig,
    /// `∫ |C(0, q_i)|² d²q_i`, the on-axis normalization.
    normalization: f64,
}

/// SPDC conditional density frozen at one signal mode; holds that mode's
/// normalization so repeated density evaluations do not re-integrate.
#[derive(Debug, Clone, Copy)]
pub struct SpdcConditional<'a> {
    model: &'a SpdcCorrelationModel,
    q_s: TransverseWaveVector,
    normalization: f64,
}

impl SpdcConditional<'_> {
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn density(&self, q_i: TransverseWaveVector) -> f64 {
        biphoton_density(self.q_s, q_i, &self.model.setup) / self.normalization
    }
}

impl SpdcCorrelationModel {
    pub fn new(setup: OpticalSetup, quadrature: QuadratureConfig) -> Result<Self> {
        setup.validate(DEFAULT_ENERGY_TOLERANCE)?;
        let mut model = Self {
            setup,
            quadrature,
            normalization: 1.0,
        };
        model.normalization = model.joint_mass(TransverseWaveVector::ZERO)?;
        Ok(model)
    }

    pub fn setup(&self) -> &OpticalSetup {
        &self.setup
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// Width of the pump-limited correlation, `1/w_p`.
    pub fn sigma_c(&self) -> f64 {
        self.setup.theoretical_sigma_c()
    }

    fn rules(&self, q_s: TransverseWaveVector, alpha: f64) -> Result<(PanelRule, PanelRule)> {
        let sigma = self.sigma_c();
        Ok((
            PanelRule::for_chirped_gaussian(-q_s.qx, sigma, alpha, &self.quadrature)?,
            PanelRule::for_chirped_gaussian(-q_s.qy, sigma, alpha, &self.quadrature)?,
        ))
    }

    /// `∫ |C(q_s, q_i)|² d²q_i`.
    pub fn joint_mass(&self, q_s: TransverseWaveVector) -> Result<f64> {
        let (rx, ry) = self.rules(q_s, 0.0)?;
        let (mass, _) = integrate_2d_pair(&rx, &ry, |x, y| {
            let m = biphoton_density(q_s, TransverseWaveVector::new(x, y), &self.setup);
            (m, Complex64::new(0.0, 0.0))
        });
        check_normalization(mass.value, mass.error)?;
        Ok(mass.value)
    }

    pub fn at_signal(&self, q_s: TransverseWaveVector) -> Result<SpdcConditional<'_>> {
        Ok(SpdcConditional {
            model: self,
            q_s,
            normalization: self.joint_mass(q_s)?,
        })
    }

    /// Coherence with the idler phase of `phase_setup`; the density itself
    /// always comes from the model's own setup.
    pub fn coherence(
        &self,
        q_s: TransverseWaveVector,
        phase_setup: &OpticalSetup,
    ) -> Result<Coherence> {
        let alpha = phase_setup.alpha();
        let (rx, ry) = self.rules(q_s, alpha)?;
        let (mass, moment) = integrate_2d_pair(&rx, &ry, |x, y| {
            let q_i = TransverseWaveVector::new(x, y);
            let m = biphoton_density(q_s, q_i, &self.setup);
            (m, Complex64::from_polar(m, alpha * q_i.norm_sqr()))
        });
        check_normalization(mass.value, mass.error)?;
        let relative = moment.error / mass.value;
        if relative > self.quadrature.tolerance {
            return Err(Error::QuadratureFailure {
                estimate: relative,
                tolerance: self.quadrature.tolerance,
            });
        }
        Ok(Coherence {
            mass: 1.0,
            moment: moment.value / mass.value,
            error: relative,
        })
    }

    /// Largest `1 − sinc²(L·Δk_z/2)` along the pump-matched ridge
    /// `q_i = −q_s` for `|q_s| ≤ q_max`.
    pub fn sinc_deviation(&self, q_max: f64) -> f64 {
        sinc_deviation(&self.setup, q_max)
    }
}

fn check_normalization(value: f64, error: f64) -> Result<()> {
    let relative = if value > 0.0 { error / value } else { f64::INFINITY };
    if relative > NORMALIZATION_TOLERANCE || !value.is_finite() {
        return Err(Error::NormalizationFailure {
            relative_error: relative,
        });
    }
    Ok(())
}

/// See [`SpdcCorrelationModel::sinc_deviation`].
pub fn sinc_deviation(setup: &OpticalSetup, q_max: f64) -> f64 {
    const SAMPLES: usize = 1000;
    (0..=SAMPLES)
        .map(|k| {
            let q = TransverseWaveVector::new(q_max * k as f64 / SAMPLES as f64, 0.0);
            let s = sinc(0.5 * setup.crystal_length * delta_kz(q, -q, setup));
            1.0 - s * s
        })
        .fold(0.0, f64::max)
}

/// Longest crystal for which the ridge sinc² stays within `deviation` of
/// one over `|q_s| ≤ q_max`.
pub fn max_crystal_length(setup: &OpticalSetup, q_max: f64, deviation: f64) -> f64 {
    let q = TransverseWaveVector::new(q_max, 0.0);
    let dk = delta_kz(q, -q, setup);
    if dk == 0.0 {
        return f64::INFINITY;
    }
    // sinc² falls monotonically on [0, π).
    let (mut lo, mut hi) = (0.0_f64, PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - sinc(mid).powi(2) > deviation {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    2.0 * lo / dk
}

/// Either conditional-density variant.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationModel {
    Gaussian(GaussianCorrelationModel),
    Spdc(SpdcCorrelationModel),
}

impl CorrelationModel {
    pub fn sigma_c(&self) -> f64 {
        match self {
            CorrelationModel::Gaussian(g) => g.sigma_c(),
            CorrelationModel::Spdc(s) => s.sigma_c(),
        }
    }

    pub fn conditional_density(
        &self,
        q_i: TransverseWaveVector,
        q_s: TransverseWaveVector,
    ) -> Result<f64> {
        match self {
            CorrelationModel::Gaussian(g) => Ok(g.density(q_i, q_s)),
            CorrelationModel::Spdc(s) => Ok(s.at_signal(q_s)?.density(q_i)),
        }
    }

    /// Mass and chirped moment of the conditional density at `q_s` by 2-D
    /// tensor-product quadrature.
    pub fn coherence(
        &self,
        q_s: TransverseWaveVector,
        setup: &OpticalSetup,
        quad: &QuadratureConfig,
    ) -> Result<Coherence> {
        match self {
            CorrelationModel::Gaussian(g) => {
                let alpha = setup.alpha();
                let sigma = g.sigma_c();
                let rx = PanelRule::for_chirped_gaussian(-q_s.qx, sigma, alpha, quad)?;
                let ry = PanelRule::for_chirped_gaussian(-q_s.qy, sigma, alpha, quad)?;
                let (mass, moment) = integrate_2d_pair(&rx, &ry, |x, y| {
                    let q_i = TransverseWaveVector::new(x, y);
                    let p = g.density(q_i, q_s);
                    (p, Complex64::from_polar(p, alpha * q_i.norm_sqr()))
                });
                let error = moment.error.max(mass.error);
                if error > quad.tolerance {
                    return Err(Error::QuadratureFailure {
                        estimate: error,
                        tolerance: quad.tolerance,
                    });
                }
                Ok(Coherence {
                    mass: mass.value,
                    moment: moment.value,
                    error,
                })
            }
            CorrelationModel::Spdc(s) => s.coherence(q_s, setup),
        }
    }
}

/// `N = ∫ p d²q_i` and `E = ∫ p·e^{iφ_I} d²q_i` at one signal mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub mass: f64,
    pub moment: Complex64,
    pub error: f64,
}

impl Coherence {
    pub fn from_axes(fx: &AxisFactor, fy: &AxisFactor, tolerance: f64) -> Result<Self> {
        let error = fx.error + fy.error;
        if error > tolerance {
            return Err(Error::QuadratureFailure {
                estimate: error,
                tolerance,
            });
        }
        Ok(Self {
            mass: fx.mass * fy.mass,
            moment: fx.moment * fy.moment,
            error,
        })
    }

    pub fn visibility(&self) -> f64 {
        self.moment.norm() / self.mass
    }

    /// `∫ p·(1 + cos[φ_I + φ0])`, without the signal envelope.
    pub fn fringe(&self, phi0: f64) -> f64 {
        self.mass + (Complex64::from_polar(1.0, phi0) * self.moment).re
    }
}

/// Marginal signal intensity envelope `exp(−|q_s|²/(2σ_env²))`, peak 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalEnvelope {
    pub sigma_env: f64,
}

impl Default for SignalEnvelope {
    fn default() -> Self {
        Self { sigma_env: 5e4 }
    }
}

impl SignalEnvelope {
    pub fn new(sigma_env: f64) -> Result<Self> {
        positive("sigma_env", sigma_env)?;
        Ok(Self { sigma_env })
    }

    pub fn value(&self, q_s: TransverseWaveVector) -> f64 {
        (-q_s.norm_sqr() / (2.0 * self.sigma_env * self.sigma_env)).exp()
    }
}

/// Detected intensity at signal mode `q_s` for interferometric phase `phi0`.
pub fn intensity_pattern(
    model: &CorrelationModel,
    envelope: &SignalEnvelope,
    setup: &OpticalSetup,
    q_s: TransverseWaveVector,
    phi0: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    Ok(intensity_stepped(model, envelope, setup, q_s, &[phi0], quad)?[0])
}

/// Intensities for several phase settings; the integral is computed once.
pub fn intensity_stepped(
    model: &CorrelationModel,
    envelope: &SignalEnvelope,
    setup: &OpticalSetup,
    q_s: TransverseWaveVector,
    phases: &[f64],
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let coherence = model.coherence(q_s, setup, quad)?;
    let p_s = envelope.value(q_s);
    Ok(phases.iter().map(|&phi0| p_s * coherence.fringe(phi0)).collect())
}

/// Fringe visibility from four quadrature-evaluated phase steps,
/// `(I_max − I_min)/(I_max + I_min)` of the fitted sinusoid.
pub fn visibility_by_quadrature(
    model: &CorrelationModel,
    setup: &OpticalSetup,
    q_s: TransverseWaveVector,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let envelope = SignalEnvelope { sigma_env: f64::INFINITY };
    let steps = [0.0, 0.5 * PI, PI, 1.5 * PI];
    let i = intensity_stepped(model, &envelope, setup, q_s, &steps, quad)?;
    let mean = 0.25 * (i[0] + i[1] + i[2] + i[3]);
    let c = 0.5 * (i[0] - i[2]);
    let s = 0.5 * (i[3] - i[1]);
    Ok(c.hypot(s) / mean)
}

/// Closed-form Gaussian-model visibility at signal wave-vector magnitude `q`:
/// `(1+4α²σ⁴)^(-1/2) · exp(−2α²σ²q² / (1+4α²σ⁴))`.
pub fn visibility_closed_form_q(sigma_c: f64, setup: &OpticalSetup, q: f64) -> f64 {
    let a = setup.alpha();
    let s2 = sigma_c * sigma_c;
    let spread = 1.0 + 4.0 * a * a * s2 * s2;
    (-2.0 * a * a * s2 * q * q / spread).exp() / spread.sqrt()
}

/// Closed-form visibility at camera radius `rho` (meters from the centre).
pub fn visibility_closed_form(sigma_c: f64, setup: &OpticalSetup, rho: f64) -> f64 {
    visibility_closed_form_q(sigma_c, setup, rho / setup.camera_scale())
}
