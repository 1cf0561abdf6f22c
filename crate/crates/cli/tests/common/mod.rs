//! A throwaway project directory with synthetic audio, manifests and a run
//! config, plus a runner for the `pianojudge` binary.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pianojudge::audio::write_wav;
use pianojudge::manifest::{save_manifest, Dataset, Recording, Technique};
use pianojudge::synth::expertise_clip;
use tempfile::TempDir;

pub struct Project {
    pub dir: TempDir,
}

fn clip(dir: &Path, name: &str, level: u8, seconds: f64, rate: u32, seed: u64) -> String {
    let wave = expertise_clip(level, seconds, rate, seed).unwrap();
    write_wav(dir.join("audio").join(name), &wave).unwrap();
    format!("audio/{name}")
}

impl Project {
    /// Small datasets for every task. `extra_config` is appended to the
    /// generated config file.
    pub fn new(extra_config: &str) -> Project {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::create_dir_all(root.join("audio")).unwrap();

        let mut expertise = Vec::new();
        for level in 0..3u8 {
            for i in 0..6 {
                let id = format!("exp-{level}-{i}");
                let rate = if i % 2 == 0 { 24_000 } else { 22_050 };
                let uri = clip(root, &format!("{id}.wav"), level, 10.0, rate, 100 + i as u64);
                let mut r = Recording::new(&id, Dataset::Expertise, uri);
                r.expertise = Some(level);
                r.duration_s = 10.0;
                expertise.push(r);
            }
        }
        save_manifest(root.join("expertise.csv"), &expertise).unwrap();

        let mut difficulty = Vec::new();
        for grade in 1..=9u8 {
            for i in 0..3 {
                let id = format!("cipi-{grade}-{i}");
                let uri = clip(root, &format!("{id}.wav"), (grade - 1) / 3, 6.0, 24_000, 200 + i as u64);
                let mut r = Recording::new(&id, Dataset::Difficulty, uri);
                r.difficulty = Some(grade);
                difficulty.push(r);
            }
        }
        save_manifest(root.join("difficulty.csv"), &difficulty).unwrap();

        let mut techniques = Vec::new();
        for i in 0..14 {
            let id = format!("tech-{i}");
            let uri = clip(root, &format!("{id}.wav"), (i % 3) as u8, 5.0, 24_000, 300 + i as u64);
            let mut r = Recording::new(&id, Dataset::Techniques, uri);
            let set: BTreeSet<Technique> = [Technique::ALL[i % 7], Technique::ALL[(i * 3 + 1) % 7]].into();
            r.techniques = Some(set);
            techniques.push(r);
        }
        save_manifest(root.join("techniques.csv"), &techniques).unwrap();

        let mut icpc = Vec::new();
        for i in 0..6u32 {
            let id = format!("icpc-{i}");
            let uri = clip(root, &format!("{id}.wav"), (i % 3) as u8, 12.0, 24_000, 400 + u64::from(i));
            let mut r = Recording::new(&id, Dataset::Icpc2015, uri);
            r.candidate_id = Some(format!("cand-{i}"));
            r.rounds_reached = Some(i % 4);
            icpc.push(r);
        }
        save_manifest(root.join("icpc.csv"), &icpc).unwrap();

        let config = format!(
            "[run]\nbackend = test-random\nseed = 7\nout = runs\n\n\
             [data]\nexpertise_manifest = expertise.csv\ndifficulty_manifest = difficulty.csv\n\
             techniques_manifest = techniques.csv\nicpc_manifest = icpc.csv\n\n\
             [train]\nepochs = 3\nbatch_size = 4\nvalidation_fraction = 0.25\n\n{extra_config}\n"
        );
        std::fs::write(root.join("config.ini"), config).unwrap();
        Project { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.path().join("runs").join(rel)
    }

    pub fn read(&self, rel: &str) -> String {
        let p = self.out(rel);
        std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
    }

    /// Run `pianojudge <command> --config config.ini <args>`.
    pub fn run(&self, command: &str, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_pianojudge"));
        cmd.current_dir(self.path())
            .env_remove("PIANOJUDGE_CACHE")
            .env("RUST_LOG", "warn")
            .arg(command)
            .arg("--config")
            .arg(self.path().join("config.ini"))
            .args(args);
        cmd.output().unwrap()
    }

    /// Run and require exit status 0.
    pub fn ok(&self, command: &str, args: &[&str]) {
        let out = self.run(command, args);
        assert!(
            out.status.success(),
            "`{command} {args:?}` failed with {:?}:\n{}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}
