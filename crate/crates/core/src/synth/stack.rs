use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::model::{OpticalSetup, SignalEnvelope};

use super::camera::CameraGeometry;
use super::NoiseModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gaussian,
    Spdc,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gaussian => "gaussian",
            ModelKind::Spdc => "spdc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(ModelKind::Gaussian),
            "spdc" => Some(ModelKind::Spdc),
            _ => None,
        }
    }
}

/// Everything that went into a synthetic stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisRecord {
    pub setup: OpticalSetup,
    pub model: ModelKind,
    pub sigma_c: f64,
    pub envelope: SignalEnvelope,
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StackMetadata {
    /// Experimental or otherwise undocumented frames.
    Unknown,
    Synthetic(SynthesisRecord),
}

impl StackMetadata {
    pub fn synthesis(&self) -> Option<&SynthesisRecord> {
        match self {
            StackMetadata::Synthetic(r) => Some(r),
            StackMetadata::Unknown => None,
        }
    }
}

/// Phase-stepped camera frames, one per interferometric phase setting.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    geometry: CameraGeometry,
    phases: Vec<f64>,
    frames: Vec<Grid<f64>>,
    metadata: StackMetadata,
}

/// `n` phases evenly spaced on `[0, 2π)`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

pub fn validate_phases(phases: &[f64]) -> Result<()> {
    if phases.is_empty() {
        return Err(Error::invalid("n_phases", "at least one phase setting is required"));
    }
    if phases.iter().any(|p| !(0.0..TAU).contains(p)) {
        return Err(Error::invalid("phases", "phases must lie in [0, 2π)"));
    }
    if phases.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("phases", "phases must be strictly increasing"));
    }
    Ok(())
}

impl FrameStack {
    pub fn new(
        geometry: CameraGeometry,
        phases: Vec<f64>,
        frames: Vec<Grid<f64>>,
        metadata: StackMetadata,
    ) -> Result<Self> {
        validate_phases(&phases)?;
        if phases.len() != frames.len() {
            return Err(Error::invalid(
                "frames",
                format!("{} phases but {} frames", phases.len(), frames.len()),
            ));
        }
        if frames
            .iter()
            .any(|f| f.width() != geometry.width || f.height() != geometry.height)
        {
            return Err(Error::invalid("frames", "frame dimensions differ from the geometry"));
        }
        Ok(Self {
            geometry,
            phases,
            frames,
            metadata,
        })
    }

    pub fn geometry(&self) -> &CameraGeometry {
        &self.geometry
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn frames(&self) -> &[Grid<f64>] {
        &self.frames
    }

    pub fn metadata(&self) -> &StackMetadata {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Same phases and metadata, new frame contents.
    pub fn with_frames(&self, frames: Vec<Grid<f64>>) -> Result<Self> {
        Self::new(self.geometry, self.phases.clone(), frames, self.metadata)
    }

    pub fn with_geometry(mut self, geometry: CameraGeometry) -> Result<Self> {
        if geometry.width != self.geometry.width || geometry.height != self.geometry.height {
            return Err(Error::invalid("width", "geometry change must keep the sensor size"));
        }
        self.geometry = geometry;
        Ok(self)
    }

    /// Multiplies every pixel by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|f| Grid::from_vec(f.width(), f.height(), f.as_slice().iter().map(|v| v * factor).collect()))
            .collect();
        Self {
            frames,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_validation() {
        assert!(validate_phases(&uniform_phases(25)).is_ok());
        assert!(validate_phases(&[]).is_err());
        assert!(validate_phases(&[0.0, 0.0]).is_err());
        assert!(validate_phases(&[0.0, TAU]).is_err());
        assert!(validate_phases(&[1.0, 0.5]).is_err());
    }

    #[test]
    fn frame_count_must_match_phases() {
        let g = CameraGeometry::centered(16, 16, 1e-5);
        let frame = Grid::filled(16, 16, 0.0);
        let err = FrameStack::new(g, uniform_phases(2), vec![frame], StackMetadata::Unknown);
        assert!(err.is_err());
    }
}
