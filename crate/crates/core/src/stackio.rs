//! Binary stack files, their metadata sidecars, and CSV/text outputs.
//!
//! Stack file layout, all little-endian:
//!
//! | offset | size | content |
//! |---|---|---|
//! | 0 | 5 | magic `ICFS1` |
//! | 5 | 4 | width (u32) |
//! | 9 | 4 | height (u32) |
//! | 13 | 4 | frame count n (u32) |
//! | 17 | 16 | reserved, zero |
//! | 33 | 8·n | phases (f64) |
//! | 33 + 8·n | 4·w·h·n | pixels (f32), frame-major, then row-major |
//!
//! The sidecar `<file>.meta` holds `key = value` lines describing the
//! camera geometry and, for synthetic stacks, every synthesis parameter.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimate::CorrelationEstimate;
use crate::grid::Grid;
use crate::model::{OpticalSetup, SignalEnvelope};
use crate::pipeline::{RadialProfile, VisibilityMap};
use crate::synth::{
    CameraGeometry, FrameStack, ModelKind, NoiseModel, PixelCoord, StackMetadata, SynthesisRecord,
};

pub const MAGIC: &[u8; 5] = b"ICFS1";
pub const HEADER_LEN: usize = 33;

/// Binary length of a stack with the given dimensions.
pub fn stack_file_len(width: u32, height: u32, n_frames: u32) -> u64 {
    let (w, h, n) = (width as u64, height as u64, n_frames as u64);
    HEADER_LEN as u64 + 8 * n + 4 * w * h * n
}

fn dim(value: usize, name: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| Error::MalformedHeader(format!("{name} {value} exceeds u32")))
}

/// Writes the binary part of `stack`; returns the number of bytes written.
pub fn encode_stack(stack: &FrameStack, mut out: impl Write) -> Result<u64> {
    let g = stack.geometry();
    let (w, h, n) = (dim(g.width, "width")?, dim(g.height, "height")?, dim(stack.len(), "n_frames")?);
    let mut buf = Vec::with_capacity(stack_file_len(w, h, n) as usize);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&w.to_le_bytes());
    buf.extend_from_slice(&h.to_le_bytes());
    buf.extend_from_slice(&n.to_le_bytes());
    buf.extend_from_slice(&[0u8; 16]);
    for p in stack.phases() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    for frame in stack.frames() {
        for &v in frame.as_slice() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(buf.len() as u64)
}

/// Dimensions, phases and frames of a binary stack.
#[derive(Debug, Clone, PartialEq)]
pub struct RawStack {
    pub width: usize,
    pub height: usize,
    pub phases: Vec<f64>,
    pub frames: Vec<Grid<f64>>,
}

pub fn decode_stack(mut input: impl Read) -> Result<RawStack> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode_bytes(&bytes)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn decode_bytes(bytes: &[u8]) -> Result<RawStack> {
    let found = bytes.len() as u64;
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        if bytes.len() < MAGIC.len() && MAGIC.starts_with(bytes) {
            return Err(Error::TruncatedFile {
                expected: HEADER_LEN as u64,
                found,
            });
        }
        return Err(Error::MalformedHeader("bad magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN as u64,
            found,
        });
    }
    let (w, h, n) = (u32_at(bytes, 5), u32_at(bytes, 9), u32_at(bytes, 13));
    if w == 0 || h == 0 || n == 0 {
        return Err(Error::MalformedHeader(format!("zero dimension {w}×{h}×{n}")));
    }
    if bytes[17..HEADER_LEN].iter().any(|&b| b != 0) {
        return Err(Error::MalformedHeader("reserved bytes are not zero".into()));
    }
    let expected = stack_file_len(w, h, n);
    if found < expected {
        return Err(Error::TruncatedFile { expected, found });
    }
    if found > expected {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes after {expected}",
            found - expected
        )));
    }
    let (width, height, n) = (w as usize, h as usize, n as usize);
    let mut at = HEADER_LEN;
    let phases = (0..n)
        .map(|_| {
            let v = f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
            at += 8;
            v
        })
        .collect();
    let frames = (0..n)
        .map(|_| {
            let data = bytes[at..at + 4 * width * height]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            at += 4 * width * height;
            Grid::from_vec(width, height, data)
        })
        .collect();
    Ok(RawStack {
        width,
        height,
        phases,
        frames,
    })
}

/// `<path>.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// One `key = value` line with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyValue {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
/// Duplicate keys are rejected.
pub fn parse_key_values(text: &str) -> Result<Vec<KeyValue>> {
    let mut out: Vec<KeyValue> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(Error::Config {
                line,
                message: "empty key".into(),
            });
        }
        if let Some(prev) = out.iter().find(|kv| kv.key == key) {
            return Err(Error::Config {
                line,
                message: format!("key `{key}` already set on line {}", prev.line),
            });
        }
        out.push(KeyValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

/// Sidecar text for `stack`. Floats use shortest round-trip formatting.
pub fn sidecar_text(stack: &FrameStack) -> String {
    let g = stack.geometry();
    let mut s = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    put("format", "ICFS1".into());
    put("width", g.width.to_string());
    put("height", g.height.to_string());
    put("n_frames", stack.len().to_string());
    put("pixel_pitch", g.pixel_pitch.to_string());
    put("center_x", g.center.x.to_string());
    put("center_y", g.center.y.to_string());
    match stack.metadata() {
        StackMetadata::Unknown => put("source", "unknown".into()),
        StackMetadata::Synthetic(r) => {
            put("source", "synthetic".into());
            put("model", r.model.as_str().into());
            put("sigma_c", r.sigma_c.to_string());
            put("lambda_p", r.setup.lambda_p.to_string());
            put("lambda_s", r.setup.lambda_s.to_string());
            put("lambda_i", r.setup.lambda_i.to_string());
            put("d", r.setup.d.to_string());
            put("f_c", r.setup.f_c.to_string());
            put("w_p", r.setup.w_p.to_string());
            put("crystal_length", r.setup.crystal_length.to_string());
            put("sigma_env", r.envelope.sigma_env.to_string());
            put("photon_scale", r.noise.photon_scale.to_string());
            put("read_noise_sigma", r.noise.read_noise_sigma.to_string());
            put("background_level", r.noise.background_level.to_string());
            put("shot_noise", r.noise.shot_noise.to_string());
            put("rng_seed", r.noise.rng_seed.to_string());
        }
    }
    s
}

/// Parsed sidecar contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Sidecar {
    pub n_frames: usize,
    pub geometry: CameraGeometry,
    pub metadata: StackMetadata,
}

struct Fields {
    entries: Vec<KeyValue>,
}

impl Fields {
    fn raw(&self, key: &str) -> Result<&KeyValue> {
        self.entries
            .iter()
            .find(|kv| kv.key == key)
            .ok_or_else(|| Error::MalformedHeader(format!("sidecar lacks `{key}`")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let kv = self.raw(key)?;
        kv.value.parse().map_err(|_| {
            Error::MalformedHeader(format!(
                "sidecar line {}: cannot parse `{key}` from `{}`",
                kv.line, kv.value
            ))
        })
    }
}

pub fn parse_sidecar(text: &str) -> Result<Sidecar> {
    let entries = parse_key_values(text).map_err(|e| match e {
        Error::Config { line, message } => Error::MalformedHeader(format!("sidecar line {line}: {message}")),
        other => other,
    })?;
    let f = Fields { entries };
    let format: String = f.get("format")?;
    if format != "ICFS1" {
        return Err(Error::MalformedHeader(format!("sidecar format `{format}`")));
    }
    let geometry = CameraGeometry {
        width: f.get("width")?,
        height: f.get("height")?,
        pixel_pitch: f.get("pixel_pitch")?,
        center: PixelCoord::new(f.get("center_x")?, f.get("center_y")?),
    };
    let source: String = f.get("source")?;
    let metadata = match source.as_str() {
        "unknown" => StackMetadata::Unknown,
        "synthetic" => {
            let model_name: String = f.get("model")?;
            let model = ModelKind::parse(&model_name)
                .ok_or_else(|| Error::MalformedHeader(format!("unknown model `{model_name}`")))?;
            StackMetadata::Synthetic(SynthesisRecord {
                setup: OpticalSetup {
                    lambda_p: f.get("lambda_p")?,
                    lambda_s: f.get("lambda_s")?,
                    lambda_i: f.get("lambda_i")?,
                    d: f.get("d")?,
                    f_c: f.get("f_c")?,
                    w_p: f.get("w_p")?,
                    crystal_length: f.get("crystal_length")?,
                },
                model,
                sigma_c: f.get("sigma_c")?,
                envelope: SignalEnvelope {
                    sigma_env: f.get("sigma_env")?,
                },
                noise: NoiseModel {
                    photon_scale: f.get("photon_scale")?,
                    read_noise_sigma: f.get("read_noise_sigma")?,
                    background_level: f.get("background_level")?,
                    shot_noise: f.get("shot_noise")?,
                    rng_seed: f.get("rng_seed")?,
                },
            })
        }
        other => return Err(Error::MalformedHeader(format!("unknown source `{other}`"))),
    };
    Ok(Sidecar {
        n_frames: f.get("n_frames")?,
        geometry,
        metadata,
    })
}

/// Checks the sidecar against the binary and assembles the stack.
pub fn assemble(raw: RawStack, sidecar: Sidecar) -> Result<FrameStack> {
    let g = sidecar.geometry;
    if g.width != raw.width || g.height != raw.height || sidecar.n_frames != raw.phases.len() {
        return Err(Error::MetadataMismatch(format!(
            "sidecar {}×{}×{} vs binary {}×{}×{}",
            g.width,
            g.height,
            sidecar.n_frames,
            raw.width,
            raw.height,
            raw.phases.len()
        )));
    }
    FrameStack::new(g, raw.phases, raw.frames, sidecar.metadata)
        .map_err(|e| Error::MalformedHeader(format!("stack contents rejected: {e}")))
}

/// Writes the stack and its sidecar; returns the binary byte count.
pub fn write_stack(stack: &FrameStack, path: &Path) -> Result<u64> {
    let mut file = io::BufWriter::new(fs::File::create(path)?);
    let n = encode_stack(stack, &mut file)?;
    file.flush()?;
    fs::write(sidecar_path(path), sidecar_text(stack))?;
    Ok(n)
}

pub fn read_stack(path: &Path) -> Result<FrameStack> {
    let raw = decode_bytes(&fs::read(path)?)?;
    let sidecar = parse_sidecar(&fs::read_to_string(sidecar_path(path))?)?;
    assemble(raw, sidecar)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const PROFILE_HEADER: &str = "radius_m,visibility,samples";

pub fn write_profile_csv(profile: &RadialProfile, mut out: impl Write) -> Result<()> {
    let mut s = String::with_capacity(32 * profile.len());
    s.push_str(PROFILE_HEADER);
    s.push('\n');
    for k in 0..profile.len() {
        let _ = writeln!(
            s,
            "{},{},{}",
            profile.radii[k], profile.visibility[k], profile.sample_counts[k]
        );
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub const VISIBILITY_MAP_HEADER: &str = "x,y,visibility,mean_intensity,fit_residual,uncertainty,mask";

/// One row per pixel, row-major.
pub fn write_visibility_map_csv(vmap: &VisibilityMap, mut out: impl Write) -> Result<()> {
    let (w, h) = (vmap.geometry.width, vmap.geometry.height);
    let mut s = String::with_capacity(64 * w * h);
    s.push_str(VISIBILITY_MAP_HEADER);
    s.push('\n');
    for y in 0..h {
        for x in 0..w {
            let _ = writeln!(
                s,
                "{x},{y},{},{},{},{},{}",
                vmap.visibility.get(x, y),
                vmap.mean_intensity.get(x, y),
                vmap.fit_residual.get(x, y),
                vmap.uncertainty.get(x, y),
                u8::from(*vmap.mask.get(x, y)),
            );
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Fixed column order of estimate CSV rows.
pub const ESTIMATE_COLUMNS: [&str; 18] = [
    "sigma_c",
    "variance",
    "fwhm_camera_m",
    "fwhm_q",
    "regime_parameter",
    "regime_bound",
    "regime_valid",
    "theoretical_variance",
    "peak_visibility",
    "peak_regime_parameter",
    "center_x",
    "center_y",
    "center_score",
    "center_degenerate",
    "iterations",
    "roundtrip_residual",
    "fit_sigma_c",
    "fit_amplitude",
];

pub fn estimate_header() -> String {
    ESTIMATE_COLUMNS.join(",")
}

pub fn estimate_row(e: &CorrelationEstimate) -> String {
    let d = &e.diagnostics;
    [
        e.sigma_c.to_string(),
        e.variance.to_string(),
        e.fwhm_camera.to_string(),
        e.fwhm_q.to_string(),
        e.regime_parameter.to_string(),
        e.regime_bound.to_string(),
        e.regime_valid.to_string(),
        opt(e.theoretical_variance),
        opt(d.peak_visibility),
        opt(d.peak_regime_parameter),
        opt(d.center.map(|c| c.x)),
        opt(d.center.map(|c| c.y)),
        opt(d.center_score),
        d.center_degenerate.to_string(),
        d.iterations.to_string(),
        d.roundtrip_residual.to_string(),
        opt(d.profile_fit.map(|f| f.sigma_c)),
        opt(d.profile_fit.map(|f| f.amplitude)),
    ]
    .join(",")
}

pub fn write_estimate_csv(e: &CorrelationEstimate, mut out: impl Write) -> Result<()> {
    out.write_all(format!("{}\n{}\n", estimate_header(), estimate_row(e)).as_bytes())?;
    Ok(())
}

/// Human-readable summary.
pub fn estimate_report(e: &CorrelationEstimate) -> String {
    let d = &e.diagnostics;
    let mut s = String::new();
    let _ = writeln!(s, "correlation width sigma_c   {:.6e} 1/m", e.sigma_c);
    let _ = writeln!(s, "conditional variance        {:.6e} 1/m^2", e.variance);
    if let Some(t) = e.theoretical_variance {
        let _ = writeln!(
            s,
            "  expected 1/w_p^2           {:.6e} 1/m^2 (ratio {:.5})",
            t,
            e.variance / t
        );
    }
    let _ = writeln!(s, "visibility FWHM (camera)    {:.6e} m", e.fwhm_camera);
    let _ = writeln!(s, "visibility FWHM (q)         {:.6e} 1/m", e.fwhm_q);
    let _ = writeln!(
        s,
        "regime parameter 2*a*s^2    {:.5} (bound {}, {})",
        e.regime_parameter,
        e.regime_bound,
        if e.regime_valid { "valid" } else { "INVALID" }
    );
    if let Some(v) = d.peak_visibility {
        let _ = writeln!(s, "peak visibility             {v:.6}");
    }
    if let Some(c) = d.center {
        let _ = writeln!(
            s,
            "pattern center (px)         ({:.3}, {:.3}){}",
            c.x,
            c.y,
            if d.center_degenerate { " degenerate score, intensity centroid used" } else { "" }
        );
    }
    let _ = writeln!(
        s,
        "inversion                   {} bisections, bracket [{:.4e}, {:.4e}] 1/m, residual {:.2e}",
        d.iterations, d.bracket.0, d.bracket.1, d.roundtrip_residual
    );
    if let Some(f) = d.profile_fit {
        let _ = writeln!(
            s,
            "profile fit sigma_c         {:.6e} 1/m (amplitude {:.5}, {} bins)",
            f.sigma_c, f.amplitude, f.bins_used
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::uniform_phases;

    fn tiny() -> FrameStack {
        FrameStack::new(
            CameraGeometry::centered(2, 2, 1e-5),
            vec![0.0],
            vec![Grid::filled(2, 2, 1.0)],
            StackMetadata::Unknown,
        )
        .unwrap()
    }

    #[test]
    fn tiny_stack_length() {
        let mut buf = Vec::new();
        assert_eq!(encode_stack(&tiny(), &mut buf).unwrap(), 57);
        assert_eq!(buf.len(), 57);
        assert_eq!(stack_file_len(2, 2, 1), 57);
        assert_eq!(&buf[..5], b"ICFS1");
        assert_eq!(&buf[5..9], &[2, 0, 0, 0]);
        assert_eq!(&buf[33..41], &0f64.to_le_bytes());
        assert_eq!(&buf[41..45], &1f32.to_le_bytes());
    }

    #[test]
    fn decode_roundtrip() {
        let stack = FrameStack::new(
            CameraGeometry::centered(3, 2, 1e-5),
            uniform_phases(2),
            vec![
                Grid::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]),
                Grid::from_vec(3, 2, vec![-1.0, 0.0, 0.25, 1e6, 7.0, 8.0]),
            ],
            StackMetadata::Unknown,
        )
        .unwrap();
        let mut buf = Vec::new();
        encode_stack(&stack, &mut buf).unwrap();
        let raw = decode_stack(&buf[..]).unwrap();
        assert_eq!(raw.phases, stack.phases());
        assert_eq!(raw.frames, stack.frames());
    }

    #[test]
    fn truncation_and_corruption() {
        let mut buf = Vec::new();
        encode_stack(&tiny(), &mut buf).unwrap();
        for cut in [0, 3, 20, 40, 56] {
            assert!(
                matches!(decode_stack(&buf[..cut]), Err(Error::TruncatedFile { .. })),
                "cut {cut}"
            );
        }
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(decode_stack(&bad[..]), Err(Error::MalformedHeader(_))));
        let mut bad = buf.clone();
        bad[20] = 1;
        assert!(matches!(decode_stack(&bad[..]), Err(Error::MalformedHeader(_))));
        let mut bad = buf.clone();
        bad.push(0);
        assert!(matches!(decode_stack(&bad[..]), Err(Error::MalformedHeader(_))));
        let mut bad = buf;
        bad[13..17].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_stack(&bad[..]), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn key_values() {
        let kv = parse_key_values("# comment\n\n a = 1 \nb=x # trailing\n").unwrap();
        assert_eq!(kv.len(), 2);
        assert_eq!((kv[0].line, kv[0].key.as_str(), kv[0].value.as_str()), (3, "a", "1"));
        assert_eq!((kv[1].line, kv[1].value.as_str()), (4, "x"));
        assert!(matches!(parse_key_values("a = 1\nnoequals\n"), Err(Error::Config { line: 2, .. })));
        assert!(matches!(parse_key_values("a = 1\na = 2\n"), Err(Error::Config { line: 2, .. })));
    }

    #[test]
    fn sidecar_roundtrip() {
        let record = SynthesisRecord {
            setup: OpticalSetup::default().with_pump_waist(160e-6),
            model: ModelKind::Spdc,
            sigma_c: 6250.123456789,
            envelope: SignalEnvelope { sigma_env: 4.5e4 },
            noise: NoiseModel::default().with_seed(u64::MAX),
        };
        let stack = FrameStack::new(
            CameraGeometry::centered(2, 2, 1.6e-5).with_center(PixelCoord::new(0.3, 0.7)),
            vec![0.0],
            vec![Grid::filled(2, 2, 1.0)],
            StackMetadata::Synthetic(record),
        )
        .unwrap();
        let parsed = parse_sidecar(&sidecar_text(&stack)).unwrap();
        assert_eq!(parsed.geometry, *stack.geometry());
        assert_eq!(parsed.metadata, *stack.metadata());
        assert_eq!(parsed.n_frames, 1);
    }

    #[test]
    fn dimension_mismatch() {
        let stack = tiny();
        let mut buf = Vec::new();
        encode_stack(&stack, &mut buf).unwrap();
        let raw = decode_stack(&buf[..]).unwrap();
        let text = sidecar_text(&stack).replace("width = 2", "width = 3");
        assert!(matches!(
            assemble(raw, parse_sidecar(&text).unwrap()),
            Err(Error::MetadataMismatch(_))
        ));
    }

    #[test]
    fn profile_csv() {
        let p = RadialProfile {
            center: PixelCoord::new(1.0, 1.0),
            radii: vec![0.0, 1.6e-5],
            visibility: vec![0.5, f64::NAN],
            sample_counts: vec![402, 0],
        };
        let mut out = Vec::new();
        write_profile_csv(&p, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "radius_m,visibility,samples\n0,0.5,402\n0.000016,NaN,0\n"
        );
    }
}
