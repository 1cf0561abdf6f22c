use pianojudge::audio::{decode_file, prepare, write_wav, mel_spectrogram, Waveform};
use pianojudge::embeddings::{BackendRegistry, SPECTROGRAM};

fn tone(sr: u32, seconds: f64, channels: usize) -> Waveform {
    let n = (seconds * f64::from(sr)) as usize;
    let ch: Vec<f32> = (0..n)
        .map(|i| (0.3 * (std::f64::consts::TAU * 523.25 * i as f64 / f64::from(sr)).sin()) as f32)
        .collect();
    Waveform {
        sample_rate: sr,
        channels: vec![ch; channels],
    }
}

#[test]
fn long_inputs_give_full_spectrogram_tensors() {
    let registry = BackendRegistry::default();
    for (sr, seconds, channels) in [(44_100, 300.0, 2), (22_050, 420.0, 1), (48_000, 301.5, 1), (24_000, 300.0, 1), (16_000, 360.0, 1)] {
        let seg = prepare("r", &tone(sr, seconds, channels)).unwrap();
        let t = registry.encode(SPECTROGRAM, &seg).unwrap();
        assert_eq!(t.shape(), (30, 1500, 128), "rate {sr}");
        assert_eq!(t.frame_rate_hz, 150.0);
        assert!(t.valid_mask.iter().all(|&m| m));
    }
}

#[test]
fn short_input_is_padded_and_masked() {
    let seg = prepare("r", &tone(44_100, 25.0, 1)).unwrap();
    assert_eq!(seg.n_segments(), 3);
    let t = mel_spectrogram(&seg).unwrap();
    assert_eq!(t.shape(), (3, 1500, 128));
}

#[test]
fn wav_file_round_trip_through_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.wav");
    let wave = tone(32_000, 12.0, 2);
    write_wav(&path, &wave).unwrap();
    let back = decode_file(&path).unwrap();
    assert_eq!(back, wave);
    let t = mel_spectrogram(&prepare("clip", &back).unwrap()).unwrap();
    assert_eq!(t.shape(), (2, 1500, 128));
}
