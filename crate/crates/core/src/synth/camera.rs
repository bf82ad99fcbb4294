use crate::error::{Error, Result};
use crate::model::{OpticalSetup, TransverseWaveVector};

/// Sub-pixel position; integer values sit on pixel centres.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: PixelCoord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Sensor placed in the back focal plane of the camera lens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraGeometry {
    pub width: usize,
    pub height: usize,
    /// Meters per pixel.
    pub pixel_pitch: f64,
    /// Where the optical axis meets the sensor.
    pub center: PixelCoord,
}

impl Default for CameraGeometry {
    fn default() -> Self {
        Self::centered(256, 256, 16e-6)
    }
}

impl CameraGeometry {
    pub fn centered(width: usize, height: usize, pixel_pitch: f64) -> Self {
        Self {
            width,
            height,
            pixel_pitch,
            center: PixelCoord::new(
                (width as f64 - 1.0) / 2.0,
                (height as f64 - 1.0) / 2.0,
            ),
        }
    }

    pub fn with_center(self, center: PixelCoord) -> Self {
        Self { center, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 16 {
            return Err(Error::invalid("width", format!("must be at least 16, got {}", self.width)));
        }
        if self.height < 16 {
            return Err(Error::invalid(
                "height",
                format!("must be at least 16, got {}", self.height),
            ));
        }
        if !(self.pixel_pitch > 0.0 && self.pixel_pitch.is_finite()) {
            return Err(Error::invalid("pixel_pitch", "must be strictly positive"));
        }
        if !self.contains(self.center) {
            return Err(Error::invalid("center_x", "pattern center must lie on the sensor"));
        }
        Ok(())
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x <= (self.width - 1) as f64
            && p.y <= (self.height - 1) as f64
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Signal wave vector imaged onto `pixel`: `q = (r − r_center)·2π/(f_c·λ_S)`.
pub fn pixel_to_q(
    pixel: PixelCoord,
    geometry: &CameraGeometry,
    setup: &OpticalSetup,
) -> TransverseWaveVector {
    let k = geometry.pixel_pitch / setup.camera_scale();
    TransverseWaveVector::new(
        (pixel.x - geometry.center.x) * k,
        (pixel.y - geometry.center.y) * k,
    )
}

pub fn q_to_pixel(
    q: TransverseWaveVector,
    geometry: &CameraGeometry,
    setup: &OpticalSetup,
) -> PixelCoord {
    let k = setup.camera_scale() / geometry.pixel_pitch;
    PixelCoord::new(geometry.center.x + q.qx * k, geometry.center.y + q.qy * k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn center_maps_to_zero() {
        let g = CameraGeometry::default().with_center(PixelCoord::new(100.3, 140.7));
        let q = pixel_to_q(g.center, &g, &OpticalSetup::default());
        assert_eq!(q, TransverseWaveVector::ZERO);
    }

    #[test]
    fn two_millimetres_is_about_1e5() {
        // 125 px · 16 µm = 2.0 mm off-centre
        let g = CameraGeometry::default();
        let p = PixelCoord::new(g.center.x + 125.0, g.center.y);
        let q = pixel_to_q(p, &g, &OpticalSetup::default());
        // mpmath: 100090.56642261388...
        assert!((q.norm() - 100_090.566_422_613_88).abs() < 1e-6, "{}", q.norm());
    }

    #[test]
    fn geometry_validation() {
        assert!(CameraGeometry::default().validate().is_ok());
        assert!(CameraGeometry::centered(8, 64, 1e-5).validate().is_err());
        let off = CameraGeometry::default().with_center(PixelCoord::new(300.0, 5.0));
        assert!(off.validate().is_err());
    }

    proptest! {
        #[test]
        fn pixel_q_round_trip(x in 0.0f64..255.0, y in 0.0f64..255.0,
                              cx in 50.0f64..200.0, cy in 50.0f64..200.0) {
            let g = CameraGeometry::default().with_center(PixelCoord::new(cx, cy));
            let setup = OpticalSetup::default();
            let p = PixelCoord::new(x, y);
            let back = q_to_pixel(pixel_to_q(p, &g, &setup), &g, &setup);
            prop_assert!((back.x - x).abs() <= 1e-12 * x.abs().max(1.0));
            prop_assert!((back.y - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}
