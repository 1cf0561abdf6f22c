//! Synthetic piano-like recordings whose "expertise" shows up as cleaner
//! signal and denser playing. Used for end-to-end checks and the demo.

use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::audio::Waveform;
use crate::error::{Error, Result};

/// Generation parameters of one level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStyle {
    pub noise_amplitude: f32,
    pub notes_per_second: f64,
}

/// Styles for levels 0 (beginner), 1 (advanced), 2 (virtuoso).
pub const LEVEL_STYLES: [LevelStyle; 3] = [
    LevelStyle {
        noise_amplitude: 0.08,
        notes_per_second: 2.0,
    },
    LevelStyle {
        noise_amplitude: 0.03,
        notes_per_second: 5.0,
    },
    LevelStyle {
        noise_amplitude: 0.01,
        notes_per_second: 10.0,
    },
];

fn midi_to_hz(note: f64) -> f64 {
    440.0 * 2f64.powf((note - 69.0) / 12.0)
}

/// A mono clip at `sample_rate` for an expertise `level` in 0..=2.
///
/// Notes start at jittered regular onsets, pick a random pitch between C3
/// and C6, and decay exponentially with three harmonics. White noise of the
/// level's amplitude is mixed in.
pub fn expertise_clip(level: u8, duration_s: f64, sample_rate: u32, seed: u64) -> Result<Waveform> {
    let style = *LEVEL_STYLES
        .get(level as usize)
        .ok_or_else(|| Error::validation("level", format!("synthetic levels are 0..=2, got {level}")))?;
    if !(duration_s > 0.0) || sample_rate == 0 {
        return Err(Error::validation("duration_s", "duration and rate must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(level) << 56));
    let n = (duration_s * f64::from(sample_rate)).round() as usize;
    let sr = f64::from(sample_rate);
    let mut out = vec![0f32; n];

    let spacing = 1.0 / style.notes_per_second;
    let mut onset = rng.random_range(0.0..spacing);
    while onset < duration_s {
        let f0 = midi_to_hz(rng.random_range(48..=84) as f64);
        let velocity = rng.random_range(0.15..0.3);
        let decay = rng.random_range(3.0..6.0);
        let start = (onset * sr) as usize;
        let len = ((1.5 * sr) as usize).min(n - start);
        for i in 0..len {
            let t = i as f64 / sr;
            let env = velocity * (-decay * t).exp();
            let mut s = 0.0;
            for (h, amp) in [(1.0, 1.0), (2.0, 0.5), (3.0, 0.25)] {
                s += amp * (std::f64::consts::TAU * f0 * h * t).sin();
            }
            out[start + i] += (env * s) as f32;
        }
        onset += spacing * rng.random_range(0.8..1.2);
    }

    let noise = Normal::new(0.0f32, style.noise_amplitude).expect("finite amplitude");
    for s in &mut out {
        *s += noise.sample(&mut rng);
    }
    Ok(Waveform::mono(sample_rate, out))
}
