//! Train the default head on synthetic expertise levels and report held-out
//! pair accuracy for two-way and four-way ranking.
//!
//! cargo run --release -p pianojudge --example synthetic_ranking

use std::sync::Arc;
use std::time::Instant;

use pianojudge::audio::{mel_spectrogram, prepare, WORKING_SAMPLE_RATE};
use pianojudge::embeddings::EmbeddingTensor;
use pianojudge::manifest::{Dataset, Recording, Split};
use pianojudge::model::{build_head, evaluate, train, Example, HeadConfig, TaskKind, TrainConfig};
use pianojudge::pairing::{make_expertise_pairs, RankMode};
use pianojudge::synth::expertise_clip;

fn recordings(prefix: &str, per_level: usize, seed: u64) -> Vec<(Recording, Arc<EmbeddingTensor>)> {
    let mut out = Vec::new();
    for level in 0..3u8 {
        for i in 0..per_level {
            let id = format!("{prefix}-{level}-{i:03}");
            let clip_seed = seed * 100_000 + u64::from(level) * 1000 + i as u64;
            let wave = expertise_clip(level, 10.0, WORKING_SAMPLE_RATE, clip_seed).unwrap();
            let emb = mel_spectrogram(&prepare(&id, &wave).unwrap()).unwrap();
            let mut rec = Recording::new(&id, Dataset::Expertise, format!("synth://{id}"));
            rec.expertise = Some(level);
            rec.split = Split::Train;
            out.push((rec, Arc::new(emb)));
        }
    }
    out
}

fn examples(set: &[(Recording, Arc<EmbeddingTensor>)], mode: RankMode, seeds: u64, limit: usize) -> Vec<Example> {
    let recs: Vec<Recording> = set.iter().map(|(r, _)| r.clone()).collect();
    let lookup = |id: &str| set.iter().find(|(r, _)| r.id == id).unwrap().1.clone();
    let mut out = Vec::new();
    for s in 0..seeds {
        for p in make_expertise_pairs(&recs, s, mode).unwrap() {
            out.push(Example::pair(lookup(&p.first), lookup(&p.second), p.label.unwrap() as usize));
        }
    }
    out.truncate(limit);
    out
}

fn main() {
    let t = Instant::now();
    let train_set = recordings("train", 40, 1);
    let test_set = recordings("test", 20, 2);
    println!("features ready in {:.1?}", t.elapsed());
    for mode in [RankMode::TwoWay, RankMode::FourWay] {
        let t = Instant::now();
        let train_ex = examples(&train_set, mode, 4, usize::MAX);
        let test_ex = examples(&test_set, mode, 4, 200);
        let head = build_head(&HeadConfig::new(128, mode.n_classes(), TaskKind::Rank), 0).unwrap();
        let mut cfg = TrainConfig::for_task(TaskKind::Rank);
        cfg.learning_rate = 1e-3;
        cfg.epochs = 8;
        let (head, history) = train(&head, &train_ex, None, &cfg).unwrap();
        print!("{}", history.log_lines());
        let m = evaluate(&head, &test_ex).unwrap();
        println!(
            "{mode}: {} train pairs, held-out accuracy {:.3} on {} pairs ({:.1?})",
            train_ex.len(),
            m.values["accuracy"],
            test_ex.len(),
            t.elapsed()
        );
    }
}
