/// Row-major 2-D array indexed as `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid data length mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, T> {
        self.data.chunks(self.width)
    }
}

impl Grid<f64> {
    /// Bilinear interpolation at `(x, y)`; `None` if any of the four
    /// neighbours is outside the grid or rejected by `valid`.
    pub fn bilinear(&self, x: f64, y: f64, valid: impl Fn(usize, usize) -> bool) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        // Exactly on the last row/column: reuse it as both neighbours.
        let x1 = if fx == 0.0 { x0 } else { x0 + 1 };
        let y1 = if fy == 0.0 { y0 } else { y0 + 1 };
        if x1 >= self.width || y1 >= self.height {
            return None;
        }
        for (px, py) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
            if !valid(px, py) {
                return None;
            }
        }
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_affine_fields() {
        let g = Grid::from_fn(8, 6, |x, y| 2.0 + 0.5 * x as f64 - 1.5 * y as f64);
        let v = g.bilinear(3.25, 2.75, |_, _| true).unwrap();
        assert!((v - (2.0 + 0.5 * 3.25 - 1.5 * 2.75)).abs() < 1e-14);
        assert_eq!(g.bilinear(7.0, 5.0, |_, _| true), Some(*g.get(7, 5)));
        assert_eq!(g.bilinear(7.5, 1.0, |_, _| true), None);
        assert_eq!(g.bilinear(-0.1, 1.0, |_, _| true), None);
        assert_eq!(g.bilinear(1.5, 1.5, |x, _| x != 2), None);
    }
}
