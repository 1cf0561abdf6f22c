//! Embedding backends and the `PLDE` tensor file format.
//!
//! Only the spectrogram and the deterministic `test-random` backend compute
//! natively. Encoder embeddings (Jukebox, MERT, Audio-MAE, DAC and their
//! fine-tuned variants) are computed elsewhere and imported as `PLDE` files:
//!
//! ```text
//! "PLDE" | u32 version=1 | u32 n_segments | u32 frames | u32 dim | f64 frame_rate_hz
//! | u32 len + backend_id | u32 len + recording_id | n_segments mask bytes (0/1)
//! | n_segments * frames * dim f32 values, row-major (segment, frame, dim)
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::audio::{self, SegmentedAudio};
use crate::error::{Error, Result};
use crate::{MAX_SEGMENTS, SEGMENT_SECONDS};

pub const SPECTROGRAM: &str = "spectrogram";
pub const TEST_RANDOM: &str = "test-random";

const MAGIC: &[u8; 4] = b"PLDE";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BackendSpec {
    pub backend_id: String,
    /// Frames per second (F).
    pub frame_rate_hz: f64,
    /// Feature dimension (D).
    pub dim: usize,
    /// Codebook size (C), descriptive only.
    pub codebook: Option<String>,
}

impl BackendSpec {
    pub fn new(backend_id: &str, frame_rate_hz: f64, dim: usize, codebook: Option<&str>) -> Self {
        BackendSpec {
            backend_id: backend_id.to_string(),
            frame_rate_hz,
            dim,
            codebook: codebook.map(str::to_string),
        }
    }

    /// `round(F * 10)`.
    pub fn frames_per_segment(&self) -> usize {
        (self.frame_rate_hz * SEGMENT_SECONDS).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if self.backend_id.is_empty() {
            return Err(Error::validation("backend_id", "must not be empty"));
        }
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(Error::validation(
                "frame_rate_hz",
                format!("must be positive, got {}", self.frame_rate_hz),
            ));
        }
        if self.dim == 0 {
            return Err(Error::validation("dim", "must be positive"));
        }
        Ok(())
    }
}

/// Encoder shapes of the probed models plus the native backends.
pub fn builtin_backends() -> Vec<BackendSpec> {
    vec![
        BackendSpec::new("jukebox", 345.0, 64, Some("2048")),
        BackendSpec::new("mert", 75.0, 1024, None),
        BackendSpec::new("audiomae", 51.2, 768, None),
        BackendSpec::new("dac", 87.0, 1024, Some("9x1024")),
        BackendSpec::new(SPECTROGRAM, 150.0, 128, None),
        BackendSpec::new(TEST_RANDOM, 15.0, 16, None),
    ]
}

/// Backend registry. Built once, then shared read-only.
#[derive(Debug, Clone)]
pub struct BackendRegistry {
    specs: BTreeMap<String, BackendSpec>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut registry = BackendRegistry::empty();
        for spec in builtin_backends() {
            registry.register(spec).expect("builtin backends are valid and unique");
        }
        registry
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        BackendRegistry {
            specs: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, spec: BackendSpec) -> Result<()> {
        spec.validate()?;
        if self.specs.contains_key(&spec.backend_id) {
            return Err(Error::DuplicateBackend(spec.backend_id));
        }
        self.specs.insert(spec.backend_id.clone(), spec);
        Ok(())
    }

    pub fn get(&self, backend_id: &str) -> Result<&BackendSpec> {
        self.specs
            .get(backend_id)
            .ok_or_else(|| Error::UnknownBackend(backend_id.to_string()))
    }

    pub fn specs(&self) -> impl Iterator<Item = &BackendSpec> {
        self.specs.values()
    }

    pub fn is_native(backend_id: &str) -> bool {
        backend_id == SPECTROGRAM || backend_id == TEST_RANDOM
    }

    /// Compute an embedding natively. External encoders must be imported.
    pub fn encode(&self, backend_id: &str, segmented: &SegmentedAudio) -> Result<EmbeddingTensor> {
        let spec = self.get(backend_id)?;
        match backend_id {
            SPECTROGRAM => audio::mel_spectrogram(segmented),
            TEST_RANDOM => Ok(test_random(spec, segmented)),
            _ => Err(Error::ExternalBackend(backend_id.to_string())),
        }
    }

    /// Shape/metadata disagreements with the registered spec. These are
    /// warnings, not errors, so fine-tuned variants with other shapes load.
    pub fn check(&self, tensor: &EmbeddingTensor) -> Vec<String> {
        let mut warnings = Vec::new();
        let Ok(spec) = self.get(&tensor.backend_id) else {
            warnings.push(format!("backend `{}` is not registered", tensor.backend_id));
            return warnings;
        };
        if tensor.dim != spec.dim {
            warnings.push(format!(
                "shape mismatch: `{}` declares dim {} but backend dim is {}",
                tensor.recording_id, tensor.dim, spec.dim
            ));
        }
        if tensor.frames_per_segment != spec.frames_per_segment() {
            warnings.push(format!(
                "shape mismatch: `{}` declares {} frames per segment but backend expects {}",
                tensor.recording_id,
                tensor.frames_per_segment,
                spec.frames_per_segment()
            ));
        }
        if tensor.frame_rate_hz != spec.frame_rate_hz {
            warnings.push(format!(
                "metadata mismatch: `{}` declares {} Hz but backend is {} Hz",
                tensor.recording_id, tensor.frame_rate_hz, spec.frame_rate_hz
            ));
        }
        warnings
    }

    /// Read a `PLDE` file and validate it against the registry.
    pub fn import(&self, path: impl AsRef<Path>) -> Result<(EmbeddingTensor, Vec<String>)> {
        let tensor = read_embedding(path)?;
        let warnings = self.check(&tensor);
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok((tensor, warnings))
    }
}

/// Seeded standard-normal features keyed by recording id.
fn test_random(spec: &BackendSpec, segmented: &SegmentedAudio) -> EmbeddingTensor {
    let frames = spec.frames_per_segment();
    let mut seed = [0u8; 32];
    for (i, byte) in segmented.recording_id.bytes().enumerate() {
        seed[i % 32] ^= byte.rotate_left((i / 32) as u32);
    }
    seed[31] ^= segmented.recording_id.len() as u8;
    let mut rng = ChaCha8Rng::from_seed(seed);
    let n = segmented.n_segments() * frames * spec.dim;
    let data = (0..n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    EmbeddingTensor {
        recording_id: segmented.recording_id.clone(),
        backend_id: spec.backend_id.clone(),
        n_segments: segmented.n_segments(),
        frames_per_segment: frames,
        dim: spec.dim,
        frame_rate_hz: spec.frame_rate_hz,
        data,
        valid_mask: segmented.valid_mask.clone(),
    }
}

/// Stacked segment embeddings of shape (segments, frames, dim).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTensor {
    pub recording_id: String,
    pub backend_id: String,
    pub n_segments: usize,
    pub frames_per_segment: usize,
    pub dim: usize,
    pub frame_rate_hz: f64,
    pub data: Vec<f32>,
    pub valid_mask: Vec<bool>,
}

impl EmbeddingTensor {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        recording_id: &str,
        backend_id: &str,
        frame_rate_hz: f64,
        n_segments: usize,
        frames_per_segment: usize,
        dim: usize,
        data: Vec<f32>,
        valid_mask: Vec<bool>,
    ) -> Result<Self> {
        let tensor = EmbeddingTensor {
            recording_id: recording_id.to_string(),
            backend_id: backend_id.to_string(),
            n_segments,
            frames_per_segment,
            dim,
            frame_rate_hz,
            data,
            valid_mask,
        };
        tensor.validate()?;
        Ok(tensor)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 || self.n_segments > MAX_SEGMENTS {
            return Err(Error::Shape(format!(
                "{} segments; expected 1..={MAX_SEGMENTS}",
                self.n_segments
            )));
        }
        let expected = self.n_segments * self.frames_per_segment * self.dim;
        if self.data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values for shape ({}, {}, {})",
                self.data.len(),
                self.n_segments,
                self.frames_per_segment,
                self.dim
            )));
        }
        if self.valid_mask.len() != self.n_segments {
            return Err(Error::Shape("mask length differs from segment count".into()));
        }
        if !self.valid_mask.iter().any(|&v| v) {
            return Err(Error::Shape("no valid segment".into()));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite embedding value".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n_segments, self.frames_per_segment, self.dim)
    }

    /// Row-major (frames, dim) slice of segment `i`.
    pub fn segment(&self, i: usize) -> &[f32] {
        let len = self.frames_per_segment * self.dim;
        &self.data[i * len..(i + 1) * len]
    }

    pub fn n_valid(&self) -> usize {
        self.valid_mask.iter().filter(|&&v| v).count()
    }
}

pub fn encode_to<W: Write>(tensor: &EmbeddingTensor, mut w: W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(tensor.n_segments as u32)?;
    w.write_u32::<LittleEndian>(tensor.frames_per_segment as u32)?;
    w.write_u32::<LittleEndian>(tensor.dim as u32)?;
    w.write_f64::<LittleEndian>(tensor.frame_rate_hz)?;
    for s in [&tensor.backend_id, &tensor.recording_id] {
        w.write_u32::<LittleEndian>(s.len() as u32)?;
        w.write_all(s.as_bytes())?;
    }
    let mask: Vec<u8> = tensor.valid_mask.iter().map(|&v| u8::from(v)).collect();
    w.write_all(&mask)?;
    let mut bytes = Vec::with_capacity(tensor.data.len() * 4);
    for &v in &tensor.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    w.flush()
}

fn eof(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("unexpected end of data".into())
    } else {
        Error::Format(e.to_string())
    }
}

fn read_string<R: Read>(r: &mut R, what: &str) -> Result<String> {
    let len = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    if len > 1 << 16 {
        return Err(Error::Format(format!("{what} length {len} is implausible")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(eof)?;
    String::from_utf8(buf).map_err(|_| Error::Format(format!("{what} is not UTF-8")))
}

pub fn decode_from<R: Read>(mut r: R) -> Result<EmbeddingTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(eof)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a PLDE file".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(eof)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n_segments = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let frames = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let dim = r.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let frame_rate_hz = r.read_f64::<LittleEndian>().map_err(eof)?;
    if n_segments == 0 || n_segments > MAX_SEGMENTS {
        return Err(Error::Format(format!("corrupt header: {n_segments} segments")));
    }
    let backend_id = read_string(&mut r, "backend id")?;
    let recording_id = read_string(&mut r, "recording id")?;

    let mut mask = vec![0u8; n_segments];
    r.read_exact(&mut mask).map_err(eof)?;
    if mask.iter().any(|&m| m > 1) {
        return Err(Error::Format("corrupt mask byte".into()));
    }
    let n_values = n_segments
        .checked_mul(frames)
        .and_then(|v| v.checked_mul(dim))
        .ok_or_else(|| Error::Format("corrupt header: shape overflow".into()))?;
    let mut bytes = Vec::new();
    (&mut r)
        .take(n_values as u64 * 4)
        .read_to_end(&mut bytes)
        .map_err(eof)?;
    if bytes.len() != n_values * 4 {
        return Err(Error::Format("unexpected end of data".into()));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(eof)? != 0 {
        return Err(Error::Format("trailing bytes after tensor data".into()));
    }

    let tensor = EmbeddingTensor {
        recording_id,
        backend_id,
        n_segments,
        frames_per_segment: frames,
        dim,
        frame_rate_hz,
        data,
        valid_mask: mask.into_iter().map(|m| m == 1).collect(),
    };
    tensor
        .validate()
        .map_err(|e| Error::Format(format!("invalid tensor: {e}")))?;
    Ok(tensor)
}

pub fn write_embedding(tensor: &EmbeddingTensor, path: impl AsRef<Path>) -> Result<()> {
    tensor.validate()?;
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    encode_to(tensor, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_embedding(path: impl AsRef<Path>) -> Result<EmbeddingTensor> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    decode_from(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{segment_audio, Waveform, WORKING_SAMPLE_RATE};

    fn segmented(id: &str, seconds: usize) -> SegmentedAudio {
        segment_audio(id, &Waveform::mono(WORKING_SAMPLE_RATE, vec![0.1; seconds * 24_000])).unwrap()
    }

    #[test]
    fn builtin_frame_counts() {
        let reg = BackendRegistry::default();
        let frames = |id: &str| reg.get(id).unwrap().frames_per_segment();
        assert_eq!(frames("jukebox"), 3450);
        assert_eq!(frames("mert"), 750);
        assert_eq!(frames("audiomae"), 512);
        assert_eq!(frames("dac"), 870);
        assert_eq!(frames("spectrogram"), 1500);
        for spec in reg.specs() {
            let implied = spec.frames_per_segment() as f64 / SEGMENT_SECONDS;
            assert!((implied - spec.frame_rate_hz).abs() <= 1.0 / SEGMENT_SECONDS);
        }
    }

    #[test]
    fn registration_rules() {
        let mut reg = BackendRegistry::default();
        reg.register(BackendSpec::new("audiomae-ft", 51.2, 768, None)).unwrap();
        assert_eq!(reg.get("audiomae-ft").unwrap().frames_per_segment(), 512);
        assert!(matches!(
            reg.register(BackendSpec::new(SPECTROGRAM, 150.0, 128, None)),
            Err(Error::DuplicateBackend(_))
        ));
        assert!(reg.register(BackendSpec::new("bad", 0.0, 10, None)).is_err());
        assert!(reg.register(BackendSpec::new("bad", -3.0, 10, None)).is_err());
    }

    #[test]
    fn external_backends_need_import() {
        let reg = BackendRegistry::default();
        let err = reg.encode("mert", &segmented("a", 10)).unwrap_err();
        assert!(err.to_string().contains("external backend: import required"));
        assert!(matches!(reg.encode("nope", &segmented("a", 10)), Err(Error::UnknownBackend(_))));
    }

    #[test]
    fn test_random_is_keyed_by_recording() {
        let reg = BackendRegistry::default();
        let a = reg.encode(TEST_RANDOM, &segmented("rec-1", 25)).unwrap();
        let b = reg.encode(TEST_RANDOM, &segmented("rec-1", 25)).unwrap();
        let c = reg.encode(TEST_RANDOM, &segmented("rec-2", 25)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.data, c.data);
        assert_eq!(a.shape(), (3, 150, 16));
    }

    #[test]
    fn truncated_file_reports_eof() {
        let reg = BackendRegistry::default();
        let t = reg.encode(TEST_RANDOM, &segmented("x", 10)).unwrap();
        let mut bytes = Vec::new();
        encode_to(&t, &mut bytes).unwrap();
        for cut in [2, 10, 30, bytes.len() - 1] {
            let err = decode_from(&bytes[..cut]).unwrap_err();
            assert_eq!(err.to_string(), "embedding format: unexpected end of data", "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_from(&bad[..]).is_err());
    }

    #[test]
    fn dim_mismatch_is_a_warning() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.plde");
        let t = EmbeddingTensor::new("r", "mert", 75.0, 1, 750, 64, vec![0.0; 750 * 64], vec![true]).unwrap();
        write_embedding(&t, &path).unwrap();
        let (back, warnings) = BackendRegistry::default().import(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("dim 64"));
    }

    #[test]
    fn rejects_non_finite() {
        let err = EmbeddingTensor::new("r", "x", 1.0, 1, 1, 2, vec![0.0, f32::NAN], vec![true]);
        assert!(err.is_err());
    }
}
