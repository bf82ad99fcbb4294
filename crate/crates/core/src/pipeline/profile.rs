use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::synth::PixelCoord;

use super::{RadialProfile, VisibilityMap};

/// Cross-sections averaged into one profile.
pub const DEFAULT_ANGLES: usize = 201;

/// Averages the visibility over `n_angles` cross-sections through `center`.
///
/// Angles are uniform on `[0, π)`; every cross-section contributes the
/// samples on both sides of the centre. A sample counts only if all four
/// bilinear neighbours are unmasked.
pub fn radial_profile(
    vmap: &VisibilityMap,
    center: PixelCoord,
    n_angles: usize,
    radial_step: f64,
) -> Result<RadialProfile> {
    if !vmap.geometry.contains(center) {
        return Err(Error::invalid("center", "profile centre must lie on the sensor"));
    }
    if n_angles == 0 {
        return Err(Error::invalid("n_angles", "must be positive"));
    }
    if !(radial_step > 0.0 && radial_step.is_finite()) {
        return Err(Error::invalid("radial_step", "must be strictly positive"));
    }
    let (w, h) = (vmap.geometry.width as f64 - 1.0, vmap.geometry.height as f64 - 1.0);
    let reach = [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
        .iter()
        .map(|&(x, y)| center.distance(PixelCoord::new(x, y)))
        .fold(0.0, f64::max);
    let bins = (reach / radial_step).floor() as usize + 1;
    let directions: Vec<(f64, f64)> = (0..n_angles)
        .map(|k| {
            let theta = PI * k as f64 / n_angles as f64;
            (theta.cos(), theta.sin())
        })
        .collect();

    // Each bin sums its own samples in a fixed angle order.
    let (visibility, sample_counts): (Vec<f64>, Vec<usize>) = (0..bins)
        .into_par_iter()
        .map(|k| {
            let r = k as f64 * radial_step;
            let (mut sum, mut count) = (0.0, 0usize);
            for &(ux, uy) in &directions {
                for sign in [1.0, -1.0] {
                    if let Some(v) = vmap.sample(center.x + sign * r * ux, center.y + sign * r * uy) {
                        sum += v;
                        count += 1;
                    }
                }
            }
            let mean = if count > 0 { sum / count as f64 } else { f64::NAN };
            (mean, count)
        })
        .unzip();
    let pitch = vmap.geometry.pixel_pitch;
    Ok(RadialProfile {
        center,
        radii: (0..bins).map(|k| k as f64 * radial_step * pitch).collect(),
        visibility,
        sample_counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwhmMeasurement {
    /// Full width at half maximum, meters on the camera.
    pub fwhm: f64,
    /// Mean of the three innermost populated bins.
    pub peak: f64,
    pub half_radius: f64,
}

/// Width of the central visibility peak.
///
/// The half-maximum radius is the first crossing of `peak/2` going
/// outwards, linearly interpolated between consecutive populated bins.
pub fn profile_fwhm(profile: &RadialProfile) -> Result<FwhmMeasurement> {
    let valid: Vec<usize> = (0..profile.len())
        .filter(|&k| profile.sample_counts[k] > 0)
        .collect();
    if valid.len() < 4 {
        return Err(Error::invalid("profile", "fewer than four populated radius bins"));
    }
    // Innermost bin on ties.
    let argmax = valid.iter().copied().fold(valid[0], |best, k| {
        if profile.visibility[k] > profile.visibility[best] {
            k
        } else {
            best
        }
    });
    let last = *valid.last().expect("non-empty");
    if argmax as f64 > 0.1 * last as f64 && argmax > valid[2] {
        return Err(Error::invalid(
            "profile",
            format!("visibility maximum at bin {argmax} is outside the innermost 10% of radii"),
        ));
    }
    let peak = valid[..3].iter().map(|&k| profile.visibility[k]).sum::<f64>() / 3.0;
    let half = 0.5 * peak;
    for pair in valid.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (va, vb) = (profile.visibility[a], profile.visibility[b]);
        if vb < half && va >= half {
            let (ra, rb) = (profile.radii[a], profile.radii[b]);
            let half_radius = ra + (half - va) * (rb - ra) / (vb - va);
            return Ok(FwhmMeasurement {
                fwhm: 2.0 * half_radius,
                peak,
                half_radius,
            });
        }
    }
    Err(Error::NoHalfCrossing { peak })
}
