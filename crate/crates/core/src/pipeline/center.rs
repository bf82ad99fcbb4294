use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::synth::PixelCoord;

use super::fit::intensity_centroid;
use super::VisibilityMap;

/// Half-width (pixels) of the integer candidate grid.
pub const DEFAULT_SEARCH_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterSearch {
    pub window: usize,
    /// Ray directions in `[0, π)`; each is compared with its opposite.
    pub n_angles: usize,
    /// Grid origin; the intensity centroid when `None`.
    pub initial: Option<PixelCoord>,
    /// Fewest valid radius pairs for a ray's correlation to count.
    pub min_pairs: usize,
}

impl Default for CenterSearch {
    fn default() -> Self {
        Self {
            window: DEFAULT_SEARCH_WINDOW,
            n_angles: 64,
            initial: None,
            min_pairs: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterFit {
    pub center: PixelCoord,
    /// Mean opposite-ray correlation at the best integer candidate.
    pub score: f64,
    pub initial: PixelCoord,
}

enum Score {
    Finite(f64),
    /// Pairs existed but every ray was flat.
    Flat,
    Empty,
}

/// Centre of radial symmetry of the visibility map.
///
/// Each candidate is scored by the mean, over ray angles, of the Pearson
/// correlation between the visibility sampled along `+θ` and along `−θ`.
/// The best integer candidate is refined by a quadratic fit to the 3×3
/// neighbourhood of scores. Ties go to the smallest `(y, x)`.
pub fn find_center(vmap: &VisibilityMap, search: &CenterSearch) -> Result<CenterFit> {
    if vmap.unmasked_count() < 100 || search.n_angles == 0 {
        return Err(Error::CenterNotFound);
    }
    let initial = search
        .initial
        .unwrap_or_else(|| intensity_centroid(&vmap.mean_intensity));
    let (w, h) = (vmap.geometry.width as isize, vmap.geometry.height as isize);
    let win = search.window as isize;
    let (ix, iy) = (initial.x.round() as isize, initial.y.round() as isize);
    let rays = ray_directions(search.n_angles);
    let max_radius = vmap.geometry.width.max(vmap.geometry.height);

    let side = (2 * win + 1) as usize;
    let mut scores = vec![None; side * side];
    let mut any_flat = false;
    let mut best: Option<(f64, usize)> = None;
    for (row, y) in (iy - win..=iy + win).enumerate() {
        for (col, x) in (ix - win..=ix + win).enumerate() {
            if x < 0 || y < 0 || x >= w || y >= h {
                continue;
            }
            let idx = row * side + col;
            match symmetry_score(vmap, x as f64, y as f64, &rays, max_radius, search.min_pairs) {
                Score::Finite(s) => {
                    scores[idx] = Some(s);
                    if best.is_none_or(|(b, _)| s > b) {
                        best = Some((s, idx));
                    }
                }
                Score::Flat => any_flat = true,
                Score::Empty => {}
            }
        }
    }
    let Some((best_score, best_idx)) = best else {
        return Err(if any_flat {
            Error::DegenerateScore
        } else {
            Error::CenterNotFound
        });
    };
    let finite: Vec<f64> = scores.iter().flatten().copied().collect();
    let spread = finite.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - finite.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if finite.len() > 1 && spread <= 1e-12 {
        return Err(Error::DegenerateScore);
    }

    let (brow, bcol) = ((best_idx / side) as isize, (best_idx % side) as isize);
    let (dx, dy) = refine(&scores, side, brow, bcol);
    Ok(CenterFit {
        center: PixelCoord::new((ix - win + bcol) as f64 + dx, (iy - win + brow) as f64 + dy),
        score: best_score,
        initial,
    })
}

fn ray_directions(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let theta = PI * k as f64 / n as f64;
            (theta.cos(), theta.sin())
        })
        .collect()
}

fn symmetry_score(
    vmap: &VisibilityMap,
    cx: f64,
    cy: f64,
    rays: &[(f64, f64)],
    max_radius: usize,
    min_pairs: usize,
) -> Score {
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut saw_pairs = false;
    let mut forward = Vec::with_capacity(max_radius);
    let mut backward = Vec::with_capacity(max_radius);
    for &(ux, uy) in rays {
        forward.clear();
        backward.clear();
        for r in 1..=max_radius {
            let r = r as f64;
            let a = vmap.sample(cx + r * ux, cy + r * uy);
            let b = vmap.sample(cx - r * ux, cy - r * uy);
            if let (Some(a), Some(b)) = (a, b) {
                forward.push(a);
                backward.push(b);
            }
        }
        if forward.len() < min_pairs {
            continue;
        }
        saw_pairs = true;
        if let Some(c) = pearson(&forward, &backward) {
            sum += c;
            count += 1;
        }
    }
    if count > 0 {
        Score::Finite(sum / count as f64)
    } else if saw_pairs {
        Score::Flat
    } else {
        Score::Empty
    }
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // Relative cut keeps rounding noise on flat rays from scoring.
    let floor = 1e-24 * n * (ma * ma + mb * mb).max(1e-300);
    if saa <= floor || sbb <= floor {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Sub-pixel offset from a least-squares quadratic over the 3×3 scores
/// around the best candidate; falls back to zero when the surface is not
/// concave or a neighbour is missing.
fn refine(scores: &[Option<f64>], side: usize, row: isize, col: isize) -> (f64, f64) {
    let mut s = [[0.0; 3]; 3];
    for (j, dy) in (-1..=1).enumerate() {
        for (i, dx) in (-1..=1).enumerate() {
            let (r, c) = (row + dy, col + dx);
            if r < 0 || c < 0 || r >= side as isize || c >= side as isize {
                return (0.0, 0.0);
            }
            match scores[r as usize * side + c as usize] {
                Some(v) => s[j][i] = v,
                None => return (0.0, 0.0),
            }
        }
    }
    // Orthogonal stencil coefficients of a + bx + cy + dx² + exy + fy².
    let (mut b, mut c, mut d, mut e, mut f) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 0..3 {
        for i in 0..3 {
            let (x, y) = (i as f64 - 1.0, j as f64 - 1.0);
            let v = s[j][i];
            b += x * v / 6.0;
            c += y * v / 6.0;
            e += x * y * v / 4.0;
            d += (x * x - 2.0 / 3.0) * v / 2.0;
            f += (y * y - 2.0 / 3.0) * v / 2.0;
        }
    }
    // Stationary point of the quadratic: H·δ = −g.
    let (hxx, hxy, hyy) = (2.0 * d, e, 2.0 * f);
    let det = hxx * hyy - hxy * hxy;
    if !(hxx < 0.0 && det > 0.0) {
        return (0.0, 0.0);
    }
    let dx = (-b * hyy + c * hxy) / det;
    let dy = (-c * hxx + b * hxy) / det;
    (dx.clamp(-1.0, 1.0), dy.clamp(-1.0, 1.0))
}
