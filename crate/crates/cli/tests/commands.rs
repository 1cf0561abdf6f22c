mod common;

use common::{code, stderr, Project};
use pianojudge::pairing::read_pairs;

#[test]
fn usage_and_config_errors_exit_2() {
    let p = Project::new("");
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_pianojudge"))
        .arg("calibrate")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);

    let out = std::process::Command::new(env!("CARGO_BIN_EXE_pianojudge"))
        .arg("train")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2, "--config is required");

    let out = p.run("ingest", &["--task", "expertise3"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("run.task"), "{}", stderr(&out));

    let out = p.run("embed", &["--backend", "spectrogram", "--sample-rate", "16000"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sample_rate"));

    std::fs::write(p.path().join("bad.ini"), "[train]\nlearning_rat = 0.1\n").unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_pianojudge"))
        .args(["ingest", "--config"])
        .arg(p.path().join("bad.ini"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("train.learning_rat"), "{}", stderr(&out));

    let out = p.run("pair", &["--task", "difficulty9"]);
    assert_eq!(code(&out), 2, "pair needs a ranking task");
}

#[test]
fn missing_inputs_are_runtime_errors() {
    let p = Project::new("");
    let out = p.run("train", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("ingest"), "{}", stderr(&out));

    p.ok("ingest", &[]);
    let out = p.run("evaluate", &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("checkpoint"), "{}", stderr(&out));
}

#[test]
fn ranking_pipeline_end_to_end() {
    let p = Project::new("[case_study]\nfitting = true\nfit_epochs = 2\n");
    p.ok("ingest", &[]);
    let summary = p.read("ingest/summary.txt");
    assert!(summary.contains("expertise.recordings=18"));
    assert!(summary.starts_with("test_fraction=0.2\n"));
    assert!(summary.contains("expertise.test=3"), "{summary}");
    assert!(summary.contains("icpc2015.test=0"));

    p.ok("embed", &[]);
    let index = p.read("embed/test-random_index.csv");
    assert_eq!(index.lines().count(), 1 + 18 + 27 + 14 + 6);
    assert!(p.path().join("cache/test-random/icpc-0.chunk00.plde").exists());
    assert!(p.path().join("cache/test-random/exp-0-0.plde").exists());

    p.ok("pair", &["--task", "expertise4"]);
    let pairs = read_pairs(p.out("pair/expertise4_train.csv")).unwrap();
    assert!(!pairs.is_empty());
    assert!(pairs.iter().all(|x| x.label.is_some_and(|l| l <= 3)));
    assert!(pairs.iter().any(|x| x.label == Some(0) || x.label == Some(3)));
    assert_eq!(p.read("pair/tournament.csv").lines().count(), 1 + 30);

    p.ok("train", &[]);
    let report = p.read("train/expertise2/report.txt");
    assert!(report.contains("best_epoch=") && report.contains("accuracy="), "{report}");
    assert_eq!(p.read("train/expertise2/epochs.log").lines().count(), 3);
    let manifest = p.read("train/run_manifest.ini");
    assert!(manifest.contains("command = train") && manifest.contains("seed = 7"));
    assert!(manifest.contains("[train]"));

    p.ok("evaluate", &[]);
    let metrics = p.read("evaluate/expertise2/metrics.csv");
    assert!(metrics.starts_with("task,backend,metric,value,n,split,seed\n"));
    assert!(metrics.contains("expertise2,test-random,accuracy,"));

    p.ok("tournament", &[]);
    let candidates = p.read("tournament/candidates.csv");
    assert_eq!(candidates.lines().count(), 7);
    assert!(p.read("tournament/summary.txt").contains("hit_rate@6="));
    assert!(p.read("tournament/hitrate.svg").starts_with("<svg"));

    p.ok("case-study", &[]);
    let s = p.read("case-study/summary.txt");
    assert!(s.contains("fitting=true") && s.contains("fit_candidates=3"), "{s}");
    assert!(p.out("case-study/decisions.csv").exists());
    assert_eq!(p.read("case-study/fit_epochs.log").lines().count(), 2);

    let out = p.run("evaluate", &["--task", "expertise4"]);
    assert_eq!(code(&out), 1, "no expertise4 checkpoint yet");
}

#[test]
fn difficulty_evaluate_reports_acc_0_and_acc_1() {
    let p = Project::new("[run]\n");
    p.ok("ingest", &[]);
    p.ok("embed", &[]);
    p.ok("train", &["--task", "difficulty9"]);
    p.ok("evaluate", &["--task", "difficulty9"]);
    let report = p.read("evaluate/difficulty9/report.txt");
    assert!(report.contains("\nacc_0=") && report.contains("\nacc_1="), "{report}");

    p.ok("train", &["--task", "difficulty3"]);
    let out = p.run("evaluate", &["--task", "difficulty3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(p.read("evaluate/difficulty3/report.txt").contains("split=test"));
}

#[test]
fn technique_runs_write_ap_curves() {
    let p = Project::new("");
    p.ok("ingest", &[]);
    p.ok("embed", &[]);
    p.ok("train", &["--task", "technique_multi"]);
    assert!(p.read("train/technique_multi/ap_epochs.svg").starts_with("<svg"));
    let metrics = p.read("train/technique_multi/metrics.csv");
    assert!(metrics.contains(",map,") && metrics.contains(",ap_"), "{metrics}");
    p.ok("evaluate", &["--task", "technique_multi"]);
    p.ok("train", &["--task", "technique_single"]);
    p.ok("evaluate", &["--task", "technique_single"]);
    assert!(p.read("evaluate/technique_single/report.txt").contains("single_label_accuracy="));
}

#[test]
fn grid_search_writes_table() {
    let p = Project::new("[grid]\nlearning_rate = 1e-4, 1e-3\nepochs = 1, 2\n");
    p.ok("ingest", &[]);
    p.ok("embed", &[]);
    p.ok("train", &[]);
    let grid = p.read("train/expertise2/grid.csv");
    assert_eq!(grid.lines().count(), 5, "{grid}");
}

#[test]
fn fetch_uses_the_downloader_template() {
    let p = Project::new("");
    let src = p.path().join("remote");
    std::fs::create_dir_all(&src).unwrap();
    std::fs::copy(p.path().join("audio/exp-0-0.wav"), src.join("piece.wav")).unwrap();
    let mut recs = pianojudge::manifest::load_manifest(p.path().join("expertise.csv"), pianojudge::manifest::Dataset::Expertise).unwrap();
    recs[0].audio_uri = "https://example.org/media/piece.wav".into();
    pianojudge::manifest::save_manifest(p.path().join("expertise.csv"), &recs).unwrap();
    let config = std::fs::read_to_string(p.path().join("config.ini")).unwrap();
    let config = format!(
        "{config}\n[fetch]\ndownloader = cp {}/$(basename {{uri}}) {{out}}\n",
        src.display()
    );
    std::fs::write(p.path().join("config.ini"), config).unwrap();

    p.ok("ingest", &[]);
    let out = p.run("embed", &[]);
    assert_eq!(code(&out), 1, "remote audio needs fetch first");
    p.ok("fetch", &[]);
    assert!(p.read("fetch/fetched.csv").contains("exp-0-0,"));
    assert!(p.path().join("cache/audio/exp-0-0.wav").exists());
    p.ok("embed", &[]);
}

#[test]
fn imported_backends_come_from_import_dir() {
    let p = Project::new("[embed]\nimport_dir = imports\n");
    p.ok("ingest", &[]);
    let out = p.run("embed", &["--backend", "mert"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("imports"), "{}", stderr(&out));
}
