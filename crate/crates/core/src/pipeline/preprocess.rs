use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::synth::FrameStack;

/// Subtracts `background` from every pixel and smooths each frame with a
/// normalized Gaussian of `blur_sigma` pixels.
///
/// Negative values after subtraction are kept. The kernel is truncated at
/// 4σ; near the border it is renormalized over the taps that fall on the
/// sensor, so flat frames stay flat. `blur_sigma == 0` skips smoothing.
pub fn preprocess(stack: &FrameStack, background: f64, blur_sigma: f64) -> Result<FrameStack> {
    if !(blur_sigma >= 0.0 && blur_sigma.is_finite()) {
        return Err(Error::invalid("blur_sigma", "must be non-negative"));
    }
    if !background.is_finite() {
        return Err(Error::invalid("background", "must be finite"));
    }
    let kernel = gaussian_kernel(blur_sigma);
    let frames = stack
        .frames()
        .iter()
        .map(|frame| {
            let shifted = Grid::from_vec(
                frame.width(),
                frame.height(),
                frame.as_slice().iter().map(|v| v - background).collect(),
            );
            match &kernel {
                Some(k) => blur(&shifted, k),
                None => shifted,
            }
        })
        .collect();
    stack.with_frames(frames)
}

/// Half-kernel weights `w[0..=radius]`, summing to one over `−radius..=radius`.
pub fn gaussian_kernel(sigma: f64) -> Option<Vec<f64>> {
    if sigma == 0.0 {
        return None;
    }
    let radius = (4.0 * sigma).ceil() as usize;
    let raw: Vec<f64> = (0..=radius)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total = raw[0] + 2.0 * raw[1..].iter().sum::<f64>();
    Some(raw.into_iter().map(|w| w / total).collect())
}

fn blur(frame: &Grid<f64>, kernel: &[f64]) -> Grid<f64> {
    let (w, h) = (frame.width(), frame.height());
    let horizontal = Grid::from_fn(w, h, |x, y| {
        convolve_at(kernel, x, w, |i| *frame.get(i, y))
    });
    Grid::from_fn(w, h, |x, y| {
        convolve_at(kernel, y, h, |j| *horizontal.get(x, j))
    })
}

fn convolve_at(kernel: &[f64], at: usize, len: usize, sample: impl Fn(usize) -> f64) -> f64 {
    let radius = kernel.len() - 1;
    let lo = at.saturating_sub(radius);
    let hi = (at + radius).min(len - 1);
    let mut acc = 0.0;
    let mut weight = 0.0;
    for i in lo..=hi {
        let wk = kernel[i.abs_diff(at)];
        acc += wk * sample(i);
        weight += wk;
    }
    acc / weight
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{uniform_phases, CameraGeometry, StackMetadata};

    fn stack_of(frames: Vec<Grid<f64>>) -> FrameStack {
        let g = CameraGeometry::centered(frames[0].width(), frames[0].height(), 1e-5);
        let n = frames.len();
        FrameStack::new(g, uniform_phases(n), frames, StackMetadata::Unknown).unwrap()
    }

    #[test]
    fn identity_when_disabled() {
        let frame = Grid::from_fn(20, 18, |x, y| (x * 3 + y) as f64);
        let stack = stack_of(vec![frame]);
        assert_eq!(preprocess(&stack, 0.0, 0.0).unwrap(), stack);
    }

    #[test]
    fn constant_minus_background() {
        let stack = stack_of(vec![Grid::filled(16, 16, 7.5); 3]);
        let out = preprocess(&stack, 2.0, 1.3).unwrap();
        for f in out.frames() {
            assert!(f.as_slice().iter().all(|v| (v - 5.5).abs() < 1e-12));
        }
    }

    #[test]
    fn delta_becomes_the_kernel() {
        let mut frame = Grid::filled(32, 32, 0.0);
        *frame.get_mut(16, 15) = 1.0;
        let out = preprocess(&stack_of(vec![frame]), 0.0, 1.0).unwrap();
        let blurred = &out.frames()[0];
        let sum: f64 = blurred.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let k = gaussian_kernel(1.0).unwrap();
        assert!((blurred.get(16, 15) - k[0] * k[0]).abs() < 1e-15);
        assert!((blurred.get(18, 14) - k[2] * k[1]).abs() < 1e-15);
        assert_eq!(*blurred.get(21, 15), 0.0);
    }

    #[test]
    fn negative_sigma_rejected() {
        let stack = stack_of(vec![Grid::filled(16, 16, 1.0)]);
        assert!(preprocess(&stack, 0.0, -1.0).is_err());
    }
}
