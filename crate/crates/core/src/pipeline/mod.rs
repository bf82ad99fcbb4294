//! Visibility extraction from phase-stepped frames.
//!
//! Stages, in order: background subtraction and smoothing
//! ([`preprocess`]), per-pixel sinusoid fits and masking
//! ([`fit_visibility`]), centre search by opposite-ray symmetry
//! ([`find_center`]), angle-averaged radial profile ([`radial_profile`])
//! and the width of its central peak ([`profile_fwhm`]).

mod center;
mod fit;
mod preprocess;
mod profile;

use crate::grid::Grid;
use crate::synth::{CameraGeometry, PixelCoord};

pub use center::{find_center, CenterFit, CenterSearch, DEFAULT_SEARCH_WINDOW};
pub use fit::{
    fit_visibility, intensity_centroid, PhaseDesign, SinusoidFit, DEFAULT_MASK_DISK_RADIUS,
    DEFAULT_MASK_THRESHOLD,
};
pub use preprocess::{gaussian_kernel, preprocess};
pub use profile::{profile_fwhm, radial_profile, FwhmMeasurement, DEFAULT_ANGLES};

/// Per-pixel fit results. Visibility is only meaningful where `mask` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMap {
    pub geometry: CameraGeometry,
    /// `√(c₁² + c₂²)/c₀` for every pixel with a positive offset, NaN otherwise.
    pub visibility: Grid<f64>,
    pub mean_intensity: Grid<f64>,
    pub mask: Grid<bool>,
    pub fit_residual: Grid<f64>,
    /// Approximate one-sigma uncertainty of the visibility.
    pub uncertainty: Grid<f64>,
    pub mask_threshold_fraction: f64,
    pub mask_disk_radius: f64,
}

impl VisibilityMap {
    /// Recomputes the mask with the reference disk centred at `center`.
    pub fn remask(&mut self, center: PixelCoord) {
        let (w, h) = (self.geometry.width, self.geometry.height);
        let r2 = self.mask_disk_radius * self.mask_disk_radius;
        let (mut sum, mut count) = (0.0, 0usize);
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - center.x;
                let dy = y as f64 - center.y;
                if dx * dx + dy * dy <= r2 {
                    sum += self.mean_intensity.get(x, y);
                    count += 1;
                }
            }
        }
        let reference = if count > 0 { sum / count as f64 } else { f64::NAN };
        let cut = self.mask_threshold_fraction * reference;
        self.mask = Grid::from_fn(w, h, |x, y| {
            let m = *self.mean_intensity.get(x, y);
            m > 0.0 && m >= cut && self.visibility.get(x, y).is_finite()
        });
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        *self.mask.get(x, y)
    }

    pub fn visibility_at(&self, x: usize, y: usize) -> Option<f64> {
        self.is_valid(x, y).then(|| *self.visibility.get(x, y))
    }

    pub fn unmasked_count(&self) -> usize {
        self.mask.as_slice().iter().filter(|&&m| m).count()
    }

    /// Unmasked pixels whose visibility exceeds one.
    pub fn over_unity_count(&self) -> usize {
        self.visibility
            .as_slice()
            .iter()
            .zip(self.mask.as_slice())
            .filter(|(&v, &m)| m && v > 1.0)
            .count()
    }

    /// Unmasked pixels above one by more than three standard errors.
    pub fn significant_over_unity_count(&self) -> usize {
        self.visibility
            .as_slice()
            .iter()
            .zip(self.uncertainty.as_slice())
            .zip(self.mask.as_slice())
            .filter(|((&v, &s), &m)| m && v > 1.0 + 3.0 * s)
            .count()
    }

    /// Bilinear sample honouring the mask.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        self.visibility.bilinear(x, y, |px, py| self.is_valid(px, py))
    }
}

/// Angle-averaged visibility versus camera-plane radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub center: PixelCoord,
    /// Meters on the camera, starting at zero.
    pub radii: Vec<f64>,
    /// NaN where `sample_counts` is zero.
    pub visibility: Vec<f64>,
    pub sample_counts: Vec<usize>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }
}
