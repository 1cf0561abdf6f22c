//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations: the log-mel spectrogram of a synthetic performance, a
//! tournament run with a noisy comparator and its hit-rate curve, and
//! accuracy-within-n for hand-entered class predictions.

use std::collections::BTreeMap;

use pianojudge::aggregation::{hitrate_curve, run_tournament};
use pianojudge::audio::{mel_spectrogram, prepare, N_MELS, WORKING_SAMPLE_RATE};
use pianojudge::metrics::{acc_within_n, ClassBatch};
use pianojudge::rng::substream;
use pianojudge::synth::expertise_clip;
use rand::seq::SliceRandom;
use rand::Rng;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct MelView {
    frames: usize,
    values: Vec<f32>,
}

#[wasm_bindgen]
impl MelView {
    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[wasm_bindgen(getter)]
    pub fn bands(&self) -> usize {
        N_MELS
    }

    /// Frame-major log-mel values.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f32> {
        self.values.clone()
    }
}

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Ten seconds of synthetic piano at expertise level 0, 1 or 2.
pub fn mel_of_level(level: u8, seed: u64) -> pianojudge::Result<MelView> {
    let wave = expertise_clip(level, 10.0, WORKING_SAMPLE_RATE, seed)?;
    let t = mel_spectrogram(&prepare("demo", &wave)?)?;
    Ok(MelView {
        frames: t.frames_per_segment,
        values: t.segment(0).to_vec(),
    })
}

#[wasm_bindgen(js_name = synthMel)]
pub fn synth_mel(level: u8, seed: u32) -> Result<MelView, JsError> {
    mel_of_level(level, u64::from(seed)).map_err(js)
}

/// Tournament over `n` candidates whose true order is random. The
/// comparator answers wrongly with probability `flip`; the top
/// `pass_fraction` of the true order passed. Returns JSON.
pub fn tournament_json(n: usize, flip: f64, pass_fraction: f64, seed: u64) -> pianojudge::Result<String> {
    let ids: Vec<String> = (0..n).map(|i| format!("c{i:02}")).collect();
    let mut rng = substream(seed, "demo");
    let mut order = ids.clone();
    order.shuffle(&mut rng);
    let pos: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let flip = flip.clamp(0.0, 1.0);
    let result = run_tournament(&ids, |a, b| Ok((pos[a] < pos[b]) != rng.random_bool(flip)))?;
    let cutoff = (pass_fraction.clamp(0.0, 1.0) * n as f64).round() as usize;
    let passed: BTreeMap<String, bool> = ids.iter().map(|c| (c.clone(), pos[c.as_str()] < cutoff)).collect();
    let tiers: BTreeMap<String, i32> = ids.iter().map(|c| (c.clone(), (n - pos[c.as_str()]) as i32)).collect();
    let curve = hitrate_curve(&result, &passed, &tiers)?;
    let rows: Vec<_> = curve
        .candidates
        .iter()
        .map(|c| {
            serde_json::json!({
                "id": c.candidate_id,
                "wins": c.win_count,
                "rank": c.rank,
                "true_rank": n - c.tier as usize + 1,
                "passed": c.passed,
            })
        })
        .collect();
    Ok(serde_json::json!({
        "inverse_consistency": result.inverse_consistency,
        "hit_rate": curve.points.iter().map(|p| p.1).collect::<Vec<_>>(),
        "candidates": rows,
    })
    .to_string())
}

#[wasm_bindgen(js_name = noisyTournament)]
pub fn noisy_tournament(n: usize, flip: f64, pass_fraction: f64, seed: u32) -> Result<String, JsError> {
    if !(2..=200).contains(&n) {
        return Err(JsError::new("between 2 and 200 candidates"));
    }
    tournament_json(n, flip, pass_fraction, u64::from(seed)).map_err(js)
}

fn parse_classes(text: &str) -> Result<Vec<usize>, String> {
    text.split([',', ' ', '\n'])
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse::<usize>().map_err(|_| format!("`{s}` is not a class index")))
        .collect()
}

/// Accuracy within `n` classes for comma-separated predicted and true class
/// lists.
pub fn accuracy_within_text(predicted: &str, truth: &str, n: usize) -> Result<f64, String> {
    let p = parse_classes(predicted)?;
    let t = parse_classes(truth)?;
    let batch = ClassBatch::from_predictions(&p, &t).map_err(|e| e.to_string())?;
    acc_within_n(&batch, n).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = accuracyWithin)]
pub fn accuracy_within(predicted: &str, truth: &str, n: usize) -> Result<f64, JsError> {
    accuracy_within_text(predicted, truth, n).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_view_shape() {
        let m = mel_of_level(2, 1).unwrap();
        assert_eq!(m.values.len(), m.frames * N_MELS);
    }

    #[test]
    fn clean_tournament_is_consistent() {
        let v: serde_json::Value = serde_json::from_str(&tournament_json(8, 0.0, 0.5, 3).unwrap()).unwrap();
        assert_eq!(v["inverse_consistency"], 1.0);
        assert_eq!(v["hit_rate"][3], 1.0);
        assert_eq!(v["candidates"][0]["true_rank"], 1);
    }

    #[test]
    fn within_n_from_text() {
        assert_eq!(accuracy_within_text("0,1,2", "0,2,2", 0).unwrap(), accuracy_within_text("0 1 2", "0 2 2", 0).unwrap());
        assert_eq!(accuracy_within_text("0,1,2", "0,2,2", 1).unwrap(), 1.0);
        assert!(accuracy_within_text("0,x", "0,1", 0).is_err());
    }
}
