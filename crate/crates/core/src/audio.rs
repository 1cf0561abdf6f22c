//! Decoding, resampling, 10-second segmentation and the log-mel baseline.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rubato::{FftFixedInOut, Resampler};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::embeddings::{EmbeddingTensor, SPECTROGRAM};
use crate::error::{Error, Result};
use crate::{MAX_SEGMENTS, SEGMENT_SECONDS};

/// Working sample rate of the pipeline: hop 160 at 150 frames per second.
pub const WORKING_SAMPLE_RATE: u32 = 24_000;
pub const N_FFT: usize = 400;
pub const HOP: usize = 160;
pub const N_MELS: usize = 128;
pub const MEL_FMIN: f64 = 20.0;
pub const MEL_FMAX: f64 = 12_000.0;
pub const LOG_FLOOR: f64 = 1e-6;

/// Decoded audio, one sample vector per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f32>>,
}

impl Waveform {
    pub fn mono(sample_rate: u32, samples: Vec<f32>) -> Self {
        Waveform {
            sample_rate,
            channels: vec![samples],
        }
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate.max(1))
    }

    /// Channel average.
    pub fn to_mono(&self) -> Vec<f32> {
        match self.channels.len() {
            0 => Vec::new(),
            1 => self.channels[0].clone(),
            n => {
                let scale = 1.0 / n as f32;
                (0..self.len())
                    .map(|i| self.channels.iter().map(|c| c[i]).sum::<f32>() * scale)
                    .collect()
            }
        }
    }
}

/// A recording cut into equal 10-second segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedAudio {
    pub recording_id: String,
    pub sample_rate: u32,
    pub segments: Vec<Vec<f32>>,
    pub valid_mask: Vec<bool>,
    pub last_segment_pad_samples: usize,
}

impl SegmentedAudio {
    pub fn segment_len(&self) -> usize {
        samples_per_segment(self.sample_rate)
    }

    pub fn n_segments(&self) -> usize {
        self.segments.len()
    }

    /// Concatenation of all real (non-padding) samples.
    pub fn valid_samples(&self) -> Vec<f32> {
        let mut out: Vec<f32> = self.segments.concat();
        out.truncate(out.len() - self.last_segment_pad_samples);
        out
    }
}

pub fn samples_per_segment(sample_rate: u32) -> usize {
    (f64::from(sample_rate) * SEGMENT_SECONDS).round() as usize
}

fn check_input(waveform: &Waveform) -> Result<()> {
    if waveform.sample_rate == 0 {
        return Err(Error::Audio("sample rate must be positive".into()));
    }
    if waveform.is_empty() {
        return Err(Error::Audio("empty waveform".into()));
    }
    if waveform.channels.iter().any(|c| c.len() != waveform.len()) {
        return Err(Error::Audio("channels differ in length".into()));
    }
    Ok(())
}

fn cut(recording_id: &str, sample_rate: u32, samples: &[f32], max_segments: usize) -> SegmentedAudio {
    let seg_len = samples_per_segment(sample_rate);
    let n = samples.len().div_ceil(seg_len).clamp(1, max_segments);
    let kept = samples.len().min(n * seg_len);
    let mut segments = Vec::with_capacity(n);
    for i in 0..n {
        let start = i * seg_len;
        let end = ((i + 1) * seg_len).min(kept);
        let mut seg = samples[start..end].to_vec();
        seg.resize(seg_len, 0.0);
        segments.push(seg);
    }
    SegmentedAudio {
        recording_id: recording_id.to_string(),
        sample_rate,
        segments,
        valid_mask: vec![true; n],
        last_segment_pad_samples: n * seg_len - kept,
    }
}

/// Mix down to mono and cut into at most 30 ten-second segments.
///
/// The trailing partial segment is zero padded and audio past five minutes
/// is discarded.
pub fn segment_audio(recording_id: &str, waveform: &Waveform) -> Result<SegmentedAudio> {
    check_input(waveform)?;
    let mono = waveform.to_mono();
    Ok(cut(recording_id, waveform.sample_rate, &mono, MAX_SEGMENTS))
}

/// Long recordings as consecutive five-minute chunks, at most `max_chunks`.
pub fn segment_chunks(
    recording_id: &str,
    waveform: &Waveform,
    max_chunks: usize,
) -> Result<Vec<SegmentedAudio>> {
    check_input(waveform)?;
    let mono = waveform.to_mono();
    let chunk_len = samples_per_segment(waveform.sample_rate) * MAX_SEGMENTS;
    let total = mono.len().div_ceil(chunk_len);
    if total > max_chunks {
        log::info!(
            "{recording_id}: {total} five-minute chunks, keeping the first {max_chunks}"
        );
    }
    Ok(mono
        .chunks(chunk_len)
        .take(max_chunks.max(1))
        .map(|chunk| cut(recording_id, waveform.sample_rate, chunk, MAX_SEGMENTS))
        .collect())
}

/// Band-limited resampling of a mono signal. Output length is
/// `round(len * to / from)`.
pub fn resample(samples: &[f32], from: u32, to: u32) -> Result<Vec<f32>> {
    if from == 0 || to == 0 {
        return Err(Error::Audio("sample rate must be positive".into()));
    }
    if from == to || samples.is_empty() {
        return Ok(samples.to_vec());
    }
    let expected = (samples.len() as f64 * f64::from(to) / f64::from(from)).round() as usize;
    let mut resampler = FftFixedInOut::<f64>::new(from as usize, to as usize, 4096, 1)
        .map_err(|e| Error::Audio(format!("resampler: {e}")))?;
    let delay = resampler.output_delay();
    let input: Vec<f64> = samples.iter().map(|&s| f64::from(s)).collect();

    let mut out: Vec<f64> = Vec::with_capacity(expected + delay + 8192);
    let mut pos = 0;
    let fail = |e: rubato::ResampleError| Error::Audio(format!("resampler: {e}"));
    while input.len() - pos >= resampler.input_frames_next() {
        let need = resampler.input_frames_next();
        let chunk = resampler.process(&[&input[pos..pos + need]], None).map_err(fail)?;
        out.extend_from_slice(&chunk[0]);
        pos += need;
    }
    if pos < input.len() {
        let chunk = resampler
            .process_partial(Some(&[&input[pos..]]), None)
            .map_err(fail)?;
        out.extend_from_slice(&chunk[0]);
    }
    while out.len() < delay + expected {
        let chunk = resampler.process_partial::<&[f64]>(None, None).map_err(fail)?;
        out.extend_from_slice(&chunk[0]);
    }
    Ok(out[delay..delay + expected].iter().map(|&s| s as f32).collect())
}

/// Mono, resampled to the working rate, segmented.
pub fn prepare(recording_id: &str, waveform: &Waveform) -> Result<SegmentedAudio> {
    check_input(waveform)?;
    let mono = Waveform::mono(
        WORKING_SAMPLE_RATE,
        resample(&waveform.to_mono(), waveform.sample_rate, WORKING_SAMPLE_RATE)?,
    );
    segment_audio(recording_id, &mono)
}

/// Decode a WAV (PCM 16/24-bit, float32) or FLAC file.
pub fn decode_file(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let mut magic = [0u8; 4];
    {
        use std::io::Read;
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    }
    match &magic {
        b"RIFF" => decode_wav(path),
        b"fLaC" => decode_flac(path),
        _ => Err(Error::Audio(format!(
            "{}: unsupported container (WAV or FLAC expected)",
            path.display()
        ))),
    }
}

fn deinterleave(interleaved: Vec<f32>, n_channels: usize) -> Vec<Vec<f32>> {
    let n_channels = n_channels.max(1);
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_channels); n_channels];
    for (i, s) in interleaved.into_iter().enumerate() {
        channels[i % n_channels].push(s);
    }
    channels
}

fn decode_wav(path: &Path) -> Result<Waveform> {
    let bad = |e: hound::Error| Error::Audio(format!("{}: {e}", path.display()));
    let mut reader = hound::WavReader::open(path).map_err(bad)?;
    let spec = reader.spec();
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(bad)?,
        hound::SampleFormat::Int => {
            let scale = 1.0 / (1i64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(bad)?
        }
    };
    Ok(Waveform {
        sample_rate: spec.sample_rate,
        channels: deinterleave(interleaved, spec.channels as usize),
    })
}

fn decode_flac(path: &Path) -> Result<Waveform> {
    let bad = |e: claxon::Error| Error::Audio(format!("{}: {e}", path.display()));
    let mut reader = claxon::FlacReader::open(path).map_err(bad)?;
    let info = reader.streaminfo();
    let scale = 1.0 / (1i64 << (info.bits_per_sample - 1)) as f32;
    let interleaved: Vec<f32> = reader
        .samples()
        .map(|s| s.map(|v| v as f32 * scale))
        .collect::<std::result::Result<_, _>>()
        .map_err(bad)?;
    Ok(Waveform {
        sample_rate: info.sample_rate,
        channels: deinterleave(interleaved, info.channels as usize),
    })
}

/// Write 32-bit float WAV.
pub fn write_wav(path: impl AsRef<Path>, waveform: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let bad = |e: hound::Error| Error::Audio(format!("{}: {e}", path.display()));
    let spec = hound::WavSpec {
        channels: waveform.channels.len() as u16,
        sample_rate: waveform.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(bad)?;
    for i in 0..waveform.len() {
        for c in &waveform.channels {
            writer.write_sample(c[i]).map_err(bad)?;
        }
    }
    writer.finalize().map_err(bad)
}

fn hz_to_mel(hz: f64) -> f64 {
    // Slaney scale: linear below 1 kHz, logarithmic above.
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = 6.4f64.ln() / 27.0;
    if hz >= min_log_hz {
        min_log_mel + (hz / min_log_hz).ln() / logstep
    } else {
        hz / f_sp
    }
}

fn mel_to_hz(mel: f64) -> f64 {
    let f_sp = 200.0 / 3.0;
    let min_log_hz = 1000.0;
    let min_log_mel = min_log_hz / f_sp;
    let logstep = 6.4f64.ln() / 27.0;
    if mel >= min_log_mel {
        min_log_hz * (logstep * (mel - min_log_mel)).exp()
    } else {
        f_sp * mel
    }
}

/// Triangular, area-normalized mel filters over the `n_fft / 2 + 1` bins.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize, fmin: f64, fmax: f64) -> Vec<Vec<f64>> {
    let n_bins = n_fft / 2 + 1;
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * f64::from(sample_rate) / n_fft as f64)
        .collect();
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    (0..n_mels)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (right - left);
            bin_hz
                .iter()
                .map(|&f| {
                    let rising = (f - left) / (center - left);
                    let falling = (right - f) / (right - center);
                    rising.min(falling).max(0.0) * norm
                })
                .collect()
        })
        .collect()
}

/// Log-mel front end: 400-point periodic Hann window, hop 160, 128 bands
/// from 20 Hz to 12 kHz, natural log of power + 1e-6.
///
/// Frame `t` covers samples `[160 t, 160 t + 400)` of its segment; the last
/// windows extend past the segment end with zeros, so a 10 s segment gives
/// exactly 1500 frames.
pub struct MelSpectrogram {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    /// Sparse filters: (first bin, weights).
    filters: Vec<(usize, Vec<f64>)>,
}

impl Default for MelSpectrogram {
    fn default() -> Self {
        Self::new()
    }
}

impl MelSpectrogram {
    pub fn new() -> Self {
        let fft = FftPlanner::new().plan_fft_forward(N_FFT);
        let window = (0..N_FFT)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / N_FFT as f64).cos())
            .collect();
        let filters = mel_filterbank(WORKING_SAMPLE_RATE, N_FFT, N_MELS, MEL_FMIN, MEL_FMAX)
            .into_iter()
            .map(|w| {
                let first = w.iter().position(|&x| x > 0.0).unwrap_or(0);
                let last = w.iter().rposition(|&x| x > 0.0).map_or(0, |i| i + 1);
                (first, w[first..last.max(first)].to_vec())
            })
            .collect();
        MelSpectrogram { fft, window, filters }
    }

    pub fn frames_for(n_samples: usize) -> usize {
        n_samples / HOP
    }

    /// Row-major (frames, 128) log-mel matrix of one segment.
    pub fn segment(&self, samples: &[f32]) -> Vec<f32> {
        let n_frames = Self::frames_for(samples.len());
        let n_bins = N_FFT / 2 + 1;
        let mut out = Vec::with_capacity(n_frames * N_MELS);
        let mut buf = vec![Complex::new(0.0, 0.0); N_FFT];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut power = vec![0.0f64; n_bins];

        for t in 0..n_frames {
            let start = t * HOP;
            for (n, slot) in buf.iter_mut().enumerate() {
                let s = samples.get(start + n).copied().unwrap_or(0.0);
                *slot = Complex::new(f64::from(s) * self.window[n], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (p, c) in power.iter_mut().zip(&buf[..n_bins]) {
                *p = c.norm_sqr();
            }
            for (first, weights) in &self.filters {
                let energy: f64 = weights
                    .iter()
                    .zip(&power[*first..])
                    .map(|(w, p)| w * p)
                    .sum();
                out.push((energy + LOG_FLOOR).ln() as f32);
            }
        }
        out
    }
}

/// Spectrogram embedding of a segmented recording at the working rate.
pub fn mel_spectrogram(segmented: &SegmentedAudio) -> Result<EmbeddingTensor> {
    if segmented.sample_rate != WORKING_SAMPLE_RATE {
        return Err(Error::Audio(format!(
            "spectrogram needs {WORKING_SAMPLE_RATE} Hz input, got {} Hz; resample first",
            segmented.sample_rate
        )));
    }
    let mel = MelSpectrogram::new();
    let frames = MelSpectrogram::frames_for(segmented.segment_len());
    let mut data = Vec::with_capacity(segmented.n_segments() * frames * N_MELS);
    for seg in &segmented.segments {
        data.extend(mel.segment(seg));
    }
    EmbeddingTensor::new(
        &segmented.recording_id,
        SPECTROGRAM,
        150.0,
        segmented.n_segments(),
        frames,
        N_MELS,
        data,
        segmented.valid_mask.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(seconds: f64, rate: u32, hz: f64) -> Vec<f32> {
        let n = (seconds * f64::from(rate)).round() as usize;
        (0..n)
            .map(|i| (2.0 * PI * hz * i as f64 / f64::from(rate)).sin() as f32 * 0.5)
            .collect()
    }

    #[test]
    fn seven_minutes_caps_at_thirty_segments() {
        let w = Waveform::mono(1000, vec![0.1; 420 * 1000]);
        let s = segment_audio("r", &w).unwrap();
        assert_eq!(s.n_segments(), 30);
        assert_eq!(s.last_segment_pad_samples, 0);
        assert!(s.valid_mask.iter().all(|&v| v));
    }

    #[test]
    fn partial_segment_is_zero_padded() {
        let w = Waveform::mono(24_000, vec![1.0; 25 * 24_000]);
        let s = segment_audio("r", &w).unwrap();
        assert_eq!(s.n_segments(), 3);
        assert_eq!(s.last_segment_pad_samples, 120_000);
        assert!(s.segments[2][120_000..].iter().all(|&x| x == 0.0));
        assert!(s.segments.iter().all(|seg| seg.len() == 240_000));
    }

    #[test]
    fn exact_ten_seconds_is_one_segment() {
        let w = Waveform::mono(24_000, vec![0.5; 240_000]);
        let s = segment_audio("r", &w).unwrap();
        assert_eq!(s.n_segments(), 1);
        assert_eq!(s.last_segment_pad_samples, 0);
    }

    #[test]
    fn stereo_is_averaged() {
        let w = Waveform {
            sample_rate: 100,
            channels: vec![vec![1.0; 50], vec![0.0; 50]],
        };
        let s = segment_audio("r", &w).unwrap();
        assert_eq!(s.segments[0][0], 0.5);
        assert_eq!(s.last_segment_pad_samples, 950);
    }

    #[test]
    fn rejects_empty_and_zero_rate() {
        assert!(segment_audio("r", &Waveform::mono(24_000, vec![])).is_err());
        assert!(segment_audio("r", &Waveform::mono(0, vec![1.0])).is_err());
    }

    #[test]
    fn resegmenting_valid_samples_is_stable() {
        for secs in [3.0, 10.0, 25.5, 61.0] {
            let w = Waveform::mono(800, vec![0.25; (secs * 800.0) as usize]);
            let s = segment_audio("r", &w).unwrap();
            let again = segment_audio("r", &Waveform::mono(800, s.valid_samples())).unwrap();
            assert_eq!(again.n_segments(), s.n_segments());
        }
    }

    #[test]
    fn chunks_cover_long_recordings() {
        let w = Waveform::mono(100, vec![0.1; 100 * 60 * 12]);
        let chunks = segment_chunks("r", &w, 30).unwrap();
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[0].n_segments(), 30);
        assert_eq!(chunks[2].n_segments(), 12);
        assert_eq!(segment_chunks("r", &w, 2).unwrap().len(), 2);
    }

    #[test]
    fn resample_length_and_tone() {
        let x = tone(1.0, 44_100, 440.0);
        let y = resample(&x, 44_100, 24_000).unwrap();
        assert_eq!(y.len(), 24_000);
        // compare against the analytic tone away from the edges
        let reference = tone(1.0, 24_000, 440.0);
        let err = y[2000..22000]
            .iter()
            .zip(&reference[2000..22000])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(err < 1e-3, "max error {err}");
    }

    #[test]
    fn spectrogram_frames_and_silence() {
        let w = Waveform::mono(WORKING_SAMPLE_RATE, vec![0.0; 240_000]);
        let s = segment_audio("silence", &w).unwrap();
        let t = mel_spectrogram(&s).unwrap();
        assert_eq!((t.n_segments, t.frames_per_segment, t.dim), (1, 1500, 128));
        let floor = (LOG_FLOOR).ln() as f32;
        assert!(t.data.iter().all(|&v| v == floor));
    }

    #[test]
    fn spectrogram_rejects_other_rates() {
        let w = Waveform::mono(16_000, vec![0.0; 160_000]);
        let s = segment_audio("r", &w).unwrap();
        assert!(mel_spectrogram(&s).is_err());
    }

    #[test]
    fn sine_energy_peaks_in_its_band() {
        let w = Waveform::mono(WORKING_SAMPLE_RATE, tone(10.0, WORKING_SAMPLE_RATE, 440.0));
        let t = mel_spectrogram(&segment_audio("a", &w).unwrap()).unwrap();
        let frame = &t.data[700 * 128..701 * 128];
        let peak = (0..128).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
        let bank = mel_filterbank(WORKING_SAMPLE_RATE, N_FFT, N_MELS, MEL_FMIN, MEL_FMAX);
        let bin = (440.0f64 / 60.0).round() as usize;
        let expected = (0..128)
            .max_by(|&a, &b| bank[a][bin].total_cmp(&bank[b][bin]))
            .unwrap();
        assert_eq!(peak, expected);
    }

    #[test]
    fn padding_does_not_touch_earlier_segments() {
        let mut samples = tone(15.0, WORKING_SAMPLE_RATE, 300.0);
        let a = mel_spectrogram(&segment_audio("a", &Waveform::mono(24_000, samples.clone())).unwrap()).unwrap();
        samples.extend(tone(3.0, WORKING_SAMPLE_RATE, 900.0));
        let b = mel_spectrogram(&segment_audio("a", &Waveform::mono(24_000, samples)).unwrap()).unwrap();
        assert_eq!(a.segment(0), b.segment(0));
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let w = Waveform {
            sample_rate: 22_050,
            channels: vec![vec![0.25, -0.5, 0.0], vec![0.1, 0.2, 0.3]],
        };
        write_wav(&path, &w).unwrap();
        assert_eq!(decode_file(&path).unwrap(), w);
    }

    #[test]
    fn pcm16_wav_is_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pcm.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut writer = hound::WavWriter::create(&path, spec).unwrap();
        for v in [i16::MIN, 0, 16384] {
            writer.write_sample(v).unwrap();
        }
        writer.finalize().unwrap();
        let w = decode_file(&path).unwrap();
        assert_eq!(w.channels[0], vec![-1.0, 0.0, 0.5]);
    }

    #[test]
    fn unknown_container_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.mp3");
        std::fs::write(&path, b"ID3\x03junk").unwrap();
        assert!(matches!(decode_file(&path), Err(Error::Audio(_))));
    }
}
