use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::synth::{FrameStack, PixelCoord};

use super::VisibilityMap;

/// Default fraction of the central mean intensity below which pixels are
/// discarded.
pub const DEFAULT_MASK_THRESHOLD: f64 = 0.20;
/// Radius (pixels) of the disk that defines the central reference intensity.
pub const DEFAULT_MASK_DISK_RADIUS: f64 = 5.0;

/// Coefficients of `I(φ) = offset + cos_coef·cos φ + sin_coef·sin φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub offset: f64,
    pub cos_coef: f64,
    pub sin_coef: f64,
    pub rms_residual: f64,
}

impl SinusoidFit {
    pub fn amplitude(&self) -> f64 {
        self.cos_coef.hypot(self.sin_coef)
    }

    pub fn visibility(&self) -> f64 {
        self.amplitude() / self.offset
    }
}

/// Least-squares design for a fixed set of phase settings; the inverse
/// normal matrix is shared by every pixel.
#[derive(Debug, Clone)]
pub struct PhaseDesign {
    basis: Vec<[f64; 3]>,
    inverse: [[f64; 3]; 3],
}

impl PhaseDesign {
    pub fn new(phases: &[f64]) -> Result<Self> {
        let basis: Vec<[f64; 3]> = phases.iter().map(|p| [1.0, p.cos(), p.sin()]).collect();
        let mut normal = [[0.0; 3]; 3];
        for row in &basis {
            for i in 0..3 {
                for j in 0..3 {
                    normal[i][j] += row[i] * row[j];
                }
            }
        }
        let inverse = invert_symmetric(&normal).ok_or(Error::DegeneratePhases)?;
        Ok(Self { basis, inverse })
    }

    pub fn fit(&self, samples: &[f64]) -> SinusoidFit {
        debug_assert_eq!(samples.len(), self.basis.len());
        let mut rhs = [0.0; 3];
        for (row, &s) in self.basis.iter().zip(samples) {
            for i in 0..3 {
                rhs[i] += row[i] * s;
            }
        }
        let mut c = [0.0; 3];
        for i in 0..3 {
            c[i] = (0..3).map(|j| self.inverse[i][j] * rhs[j]).sum();
        }
        let ssr: f64 = self
            .basis
            .iter()
            .zip(samples)
            .map(|(row, &s)| (s - c[0] - c[1] * row[1] - c[2] * row[2]).powi(2))
            .sum();
        SinusoidFit {
            offset: c[0],
            cos_coef: c[1],
            sin_coef: c[2],
            rms_residual: (ssr / samples.len() as f64).sqrt(),
        }
    }
}

/// Cofactor inverse; `None` when the matrix is numerically singular.
fn invert_symmetric(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
    let scale = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if !(det.abs() > 1e-10 * scale.powi(3)) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = adj[i][j] / det;
        }
    }
    Some(inv)
}

/// Per-pixel sinusoid fits across the phase steps.
///
/// The mask keeps pixels whose mean intensity is at least
/// `mask_threshold_fraction` of the mean over a disk at the intensity
/// centroid; [`VisibilityMap::remask`] moves that disk once a better centre
/// is known.
pub fn fit_visibility(stack: &FrameStack, mask_threshold_fraction: f64) -> Result<VisibilityMap> {
    if !(0.0..1.0).contains(&mask_threshold_fraction) {
        return Err(Error::invalid("mask_threshold", "must lie in [0, 1)"));
    }
    let design = PhaseDesign::new(stack.phases())?;
    let geometry = *stack.geometry();
    let (w, h) = (geometry.width, geometry.height);
    let frames = stack.frames();
    let fits: Vec<SinusoidFit> = (0..w * h)
        .into_par_iter()
        .map_init(
            || vec![0.0; frames.len()],
            |samples, index| {
                for (s, f) in samples.iter_mut().zip(frames) {
                    *s = f.as_slice()[index];
                }
                design.fit(samples)
            },
        )
        .collect();

    let n = stack.len() as f64;
    let dof_factor = if n > 3.0 { (n / (n - 3.0)).sqrt() } else { 1.0 };
    let visibility = Grid::from_vec(
        w,
        h,
        fits.iter()
            .map(|f| if f.offset > 0.0 { f.visibility() } else { f64::NAN })
            .collect(),
    );
    let uncertainty = Grid::from_vec(
        w,
        h,
        fits.iter()
            .map(|f| f.rms_residual * dof_factor * (2.0 / n).sqrt() / f.offset)
            .collect(),
    );
    let mean_intensity = Grid::from_vec(w, h, fits.iter().map(|f| f.offset).collect());
    let fit_residual = Grid::from_vec(w, h, fits.iter().map(|f| f.rms_residual).collect());

    let mut vmap = VisibilityMap {
        geometry,
        visibility,
        mean_intensity,
        mask: Grid::filled(w, h, false),
        fit_residual,
        uncertainty,
        mask_threshold_fraction,
        mask_disk_radius: DEFAULT_MASK_DISK_RADIUS,
    };
    let centroid = intensity_centroid(&vmap.mean_intensity);
    vmap.remask(centroid);
    Ok(vmap)
}

/// Centroid of the mean intensity over pixels above 20% of its maximum.
pub fn intensity_centroid(mean_intensity: &Grid<f64>) -> PixelCoord {
    let peak = mean_intensity
        .as_slice()
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let cut = 0.2 * peak;
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for y in 0..mean_intensity.height() {
        for x in 0..mean_intensity.width() {
            let v = *mean_intensity.get(x, y);
            if v > cut {
                sw += v;
                sx += v * x as f64;
                sy += v * y as f64;
            }
        }
    }
    if sw > 0.0 {
        PixelCoord::new(sx / sw, sy / sw)
    } else {
        PixelCoord::new(
            (mean_intensity.width() as f64 - 1.0) / 2.0,
            (mean_intensity.height() as f64 - 1.0) / 2.0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{uniform_phases, CameraGeometry, StackMetadata};

    #[test]
    fn exact_harmonic() {
        let phases = uniform_phases(25);
        let design = PhaseDesign::new(&phases).unwrap();
        let samples: Vec<f64> = phases.iter().map(|p| 2.0 + p.cos()).collect();
        let fit = design.fit(&samples);
        assert!((fit.offset - 2.0).abs() < 1e-14);
        assert!((fit.amplitude() - 1.0).abs() < 1e-14);
        assert!((fit.visibility() - 0.5).abs() < 1e-14);
        assert!(fit.rms_residual < 1e-10);
    }

    #[test]
    fn nonuniform_phases_recover_phase_offset() {
        let phases = [0.1, 0.7, 1.9, 2.2, 4.0, 5.5];
        let design = PhaseDesign::new(&phases).unwrap();
        let samples: Vec<f64> = phases.iter().map(|p| 10.0 + 3.0 * (p + 0.4).cos()).collect();
        let fit = design.fit(&samples);
        assert!((fit.visibility() - 0.3).abs() < 1e-12);
        assert!(fit.rms_residual < 1e-10);
    }

    #[test]
    fn constant_signal_has_zero_visibility() {
        let design = PhaseDesign::new(&uniform_phases(25)).unwrap();
        let fit = design.fit(&[4.0; 25]);
        assert!(fit.visibility() < 1e-14);
    }

    #[test]
    fn degenerate_phases() {
        assert!(matches!(PhaseDesign::new(&[1.0; 5]), Err(Error::DegeneratePhases)));
        assert!(matches!(PhaseDesign::new(&[0.0, 1.0]), Err(Error::DegeneratePhases)));
        assert!(matches!(
            PhaseDesign::new(&[0.5, 0.5, 2.0, 2.0]),
            Err(Error::DegeneratePhases)
        ));
    }

    #[test]
    fn mask_follows_threshold() {
        let g = CameraGeometry::centered(32, 32, 1e-5);
        let phases = uniform_phases(4);
        // Radial falloff of the mean, unit modulation.
        let frames = phases
            .iter()
            .map(|p| {
                Grid::from_fn(32, 32, |x, y| {
                    let r2 = (x as f64 - 15.5).powi(2) + (y as f64 - 15.5).powi(2);
                    let m = (-r2 / 200.0).exp();
                    m * (1.0 + 0.5 * p.cos())
                })
            })
            .collect();
        let stack = FrameStack::new(g, phases, frames, StackMetadata::Unknown).unwrap();
        let vmap = fit_visibility(&stack, 0.2).unwrap();
        assert!(vmap.is_valid(15, 15));
        assert!(!vmap.is_valid(0, 0));
        for y in 0..32 {
            for x in 0..32 {
                if vmap.is_valid(x, y) {
                    assert!((vmap.visibility_at(x, y).unwrap() - 0.5).abs() < 1e-12);
                }
            }
        }
    }
}
