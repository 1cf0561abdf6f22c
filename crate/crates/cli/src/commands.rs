//! The subcommands. Each writes under `<out>/<command>/` next to a
//! `run_manifest.ini` describing the run.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process;
use std::sync::Arc;

use anyhow::{anyhow, Context as _};
use pianojudge::aggregation::{run_case_study, CaseStudyOptions, CaseStudyReport};
use pianojudge::audio::{self, Waveform, WORKING_SAMPLE_RATE};
use pianojudge::embeddings::{read_embedding, write_embedding, BackendRegistry, EmbeddingTensor};
use pianojudge::manifest::{
    icpc_candidates, load_manifest, manifest_to_string, split_recordings, Dataset, Recording, Split,
};
use pianojudge::model::{
    build_head, evaluate, grid_search, load_checkpoint, save_checkpoint, train, Checkpoint,
    Example, TaskKind, TaskMetrics,
};
use pianojudge::pairing::{
    icpc_scores, make_expertise_pairs, make_icpc_pairs, make_tournament_pairs, pairs_to_csv,
    RankMode, RankPair,
};
use pianojudge::{plot, report};

use crate::config::{ConfigError, RunConfig};
use crate::task::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Fetch,
    Embed,
    Pair,
    Train,
    Evaluate,
    Tournament,
    CaseStudy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Fetch => "fetch",
            Command::Embed => "embed",
            Command::Pair => "pair",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Tournament => "tournament",
            Command::CaseStudy => "case-study",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Runtime(e) => {
                // causes already quoted by their parent are skipped
                let mut shown = String::new();
                for cause in e.chain() {
                    let text = cause.to_string();
                    if !shown.contains(&text) {
                        if !shown.is_empty() {
                            shown.push_str(": ");
                        }
                        shown.push_str(&text);
                    }
                }
                f.write_str(&shown)
            }
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<pianojudge::Error> for CliError {
    fn from(e: pianojudge::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command, cfg: &RunConfig) -> Result<()> {
    let ctx = Ctx::new(cfg);
    log::info!("{} (task {}, backend {}, seed {})", command.name(), cfg.task, cfg.backend, cfg.seed);
    match command {
        Command::Ingest => ingest(&ctx),
        Command::Fetch => fetch(&ctx),
        Command::Embed => embed(&ctx),
        Command::Pair => pair(&ctx),
        Command::Train => train_cmd(&ctx),
        Command::Evaluate => evaluate_cmd(&ctx),
        Command::Tournament => competition(&ctx, false),
        Command::CaseStudy => competition(&ctx, true),
    }?;
    ctx.write_run_manifest(command)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    registry: BackendRegistry,
    loaded: RefCell<HashMap<PathBuf, Arc<EmbeddingTensor>>>,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// File-name-safe form of a recording id.
fn safe_id(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Ctx {
            cfg,
            registry: BackendRegistry::default(),
            loaded: RefCell::new(HashMap::new()),
        }
    }

    fn dir(&self, command: Command) -> PathBuf {
        self.cfg.out.join(command.name())
    }

    fn task_dir(&self, command: Command) -> PathBuf {
        self.dir(command).join(self.cfg.task.as_str())
    }

    fn write_run_manifest(&self, command: Command) -> Result<()> {
        let mut text = String::new();
        let _ = writeln!(text, "[manifest]");
        let _ = writeln!(text, "command = {}", command.name());
        let _ = writeln!(text, "pianojudge_version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "seed = {}", self.cfg.seed);
        let _ = writeln!(text, "task = {}", self.cfg.task);
        let _ = writeln!(text, "backend = {}", self.cfg.backend);
        text.push('\n');
        text.push_str(&self.cfg.snapshot());
        write_file(&self.dir(command).join("run_manifest.ini"), text)
    }

    fn ingested(&self, dataset: Dataset) -> Result<Vec<Recording>> {
        self.cfg.manifest(dataset)?;
        let path = self.dir(Command::Ingest).join(format!("{dataset}.csv"));
        if !path.exists() {
            return Err(anyhow!("{} not found; run `ingest` first", path.display()).into());
        }
        Ok(load_manifest(&path, dataset)?)
    }

    fn embedding_path(&self, id: &str, chunk: Option<usize>) -> PathBuf {
        let name = match chunk {
            Some(k) => format!("{}.chunk{k:02}.plde", safe_id(id)),
            None => format!("{}.plde", safe_id(id)),
        };
        self.cfg.cache_dir.join(&self.cfg.backend).join(name)
    }

    fn load(&self, path: &Path) -> Result<Arc<EmbeddingTensor>> {
        if let Some(t) = self.loaded.borrow().get(path) {
            return Ok(t.clone());
        }
        if !path.exists() {
            return Err(anyhow!("embedding {} not found; run `embed` first", path.display()).into());
        }
        let t = Arc::new(read_embedding(path)?);
        if t.backend_id != self.cfg.backend {
            return Err(anyhow!(
                "{} holds backend `{}`, config says `{}`",
                path.display(),
                t.backend_id,
                self.cfg.backend
            )
            .into());
        }
        self.loaded.borrow_mut().insert(path.to_path_buf(), t.clone());
        Ok(t)
    }

    fn embedding(&self, id: &str) -> Result<Arc<EmbeddingTensor>> {
        self.load(&self.embedding_path(id, None))
    }

    fn chunks(&self, id: &str) -> Result<Vec<Arc<EmbeddingTensor>>> {
        let mut out = Vec::new();
        while self.embedding_path(id, Some(out.len())).exists() {
            out.push(self.load(&self.embedding_path(id, Some(out.len())))?);
        }
        if out.is_empty() {
            return Err(anyhow!("no chunk embeddings for `{id}`; run `embed` first").into());
        }
        Ok(out)
    }

    fn fetched_path(&self, r: &Recording) -> PathBuf {
        let last = r.audio_uri.rsplit('/').next().unwrap_or("");
        let last = last.split(['?', '#']).next().unwrap_or("");
        let ext = Path::new(last)
            .extension()
            .and_then(|e| e.to_str())
            .filter(|e| e.chars().all(|c| c.is_ascii_alphanumeric()))
            .unwrap_or("audio");
        self.cfg.cache_dir.join("audio").join(format!("{}.{ext}", safe_id(&r.id)))
    }

    fn audio_path(&self, r: &Recording) -> PathBuf {
        if r.is_remote() {
            self.fetched_path(r)
        } else {
            self.cfg.audio_root.join(&r.audio_uri)
        }
    }

    fn decode(&self, r: &Recording) -> Result<Waveform> {
        let path = self.audio_path(r);
        if r.is_remote() && !path.exists() {
            return Err(anyhow!("`{}` is remote and not fetched yet; run `fetch`", r.id).into());
        }
        Ok(audio::decode_file(&path).with_context(|| format!("recording `{}`", r.id))?)
    }

    fn import_source(&self, id: &str, chunk: Option<usize>) -> Result<PathBuf> {
        let dir = self.cfg.import_dir.as_ref().ok_or_else(|| {
            ConfigError::new(
                "embed.import_dir",
                format!("backend `{}` is computed externally; point import_dir at its PLDE files", self.cfg.backend),
            )
        })?;
        let file = self.embedding_path(id, chunk);
        Ok(dir.join(&self.cfg.backend).join(file.file_name().unwrap()))
    }
}

fn ingest(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    if cfg.manifests.is_empty() {
        return Err(ConfigError::new("data", "no manifest configured").into());
    }
    let dir = ctx.dir(Command::Ingest);
    let mut summary = format!("test_fraction={}\n", cfg.test_fraction);
    for (&dataset, path) in &cfg.manifests {
        let recs = load_manifest(path, dataset)?;
        let presplit = recs.iter().any(|r| r.split != Split::Unassigned);
        let recs = if dataset == Dataset::Icpc2015 || presplit {
            recs
        } else {
            let (tr, te) = split_recordings(&recs, cfg.test_fraction, cfg.seed)?;
            let tags: HashMap<String, Split> =
                tr.iter().chain(&te).map(|r| (r.id.clone(), r.split)).collect();
            recs.into_iter()
                .map(|mut r| {
                    r.split = tags[&r.id];
                    r
                })
                .collect()
        };
        write_file(&dir.join(format!("{dataset}.csv")), manifest_to_string(&recs))?;
        let count = |s: Split| recs.iter().filter(|r| r.split == s).count();
        let _ = writeln!(summary, "{dataset}.recordings={}", recs.len());
        let _ = writeln!(summary, "{dataset}.train={}", count(Split::Train));
        let _ = writeln!(summary, "{dataset}.test={}", count(Split::Test));
        log::info!("{dataset}: {} recordings", recs.len());
    }
    write_file(&dir.join("summary.txt"), summary)
}

fn fetch(ctx: &Ctx) -> Result<()> {
    let template = ctx
        .cfg
        .downloader
        .clone()
        .ok_or_else(|| ConfigError::new("fetch.downloader", "required by `fetch`"))?;
    let mut rows = String::from("id,path\n");
    for &dataset in ctx.cfg.manifests.keys() {
        for r in ctx.ingested(dataset)?.iter().filter(|r| r.is_remote()) {
            let target = ctx.fetched_path(r);
            if !target.exists() {
                std::fs::create_dir_all(target.parent().unwrap())
                    .with_context(|| format!("creating {}", target.display()))?;
                let partial = target.with_extension("part");
                let cmd = template
                    .replace("{uri}", &shell_quote(&r.audio_uri))
                    .replace("{out}", &shell_quote(&partial.display().to_string()));
                log::info!("fetching {}", r.id);
                let status = process::Command::new("sh")
                    .arg("-c")
                    .arg(&cmd)
                    .status()
                    .with_context(|| format!("running downloader for `{}`", r.id))?;
                if !status.success() || !partial.exists() {
                    bail_runtime(format!("downloader failed for `{}` ({status})", r.id))?;
                }
                std::fs::rename(&partial, &target).context("finalizing download")?;
            }
            let _ = writeln!(rows, "{},{}", r.id, target.display());
        }
    }
    write_file(&ctx.dir(Command::Fetch).join("fetched.csv"), rows)
}

fn bail_runtime(msg: String) -> Result<()> {
    Err(CliError::Runtime(anyhow!(msg)))
}

fn embed(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let native = BackendRegistry::is_native(&cfg.backend);
    let cache = cfg.cache_dir.join(&cfg.backend);
    std::fs::create_dir_all(&cache).with_context(|| format!("creating {}", cache.display()))?;
    let mut index = String::from("dataset,id,file,segments,warnings\n");
    for &dataset in cfg.manifests.keys() {
        for r in ctx.ingested(dataset)? {
            let chunked = dataset == Dataset::Icpc2015;
            let first = ctx.embedding_path(&r.id, chunked.then_some(0));
            if !first.exists() {
                if native {
                    let wave = ctx.decode(&r)?;
                    if chunked {
                        let mono = Waveform::mono(
                            WORKING_SAMPLE_RATE,
                            audio::resample(&wave.to_mono(), wave.sample_rate, WORKING_SAMPLE_RATE)?,
                        );
                        for (k, seg) in audio::segment_chunks(&r.id, &mono, cfg.max_chunks)?.iter().enumerate() {
                            let t = ctx.registry.encode(&cfg.backend, seg)?;
                            write_embedding(&t, ctx.embedding_path(&r.id, Some(k)))?;
                        }
                    } else {
                        let t = ctx.registry.encode(&cfg.backend, &audio::prepare(&r.id, &wave)?)?;
                        write_embedding(&t, &first)?;
                    }
                } else {
                    let mut k = 0;
                    loop {
                        let chunk = chunked.then_some(k);
                        let src = ctx.import_source(&r.id, chunk)?;
                        if !src.exists() {
                            if k == 0 {
                                bail_runtime(format!("no imported embedding at {}", src.display()))?;
                            }
                            break;
                        }
                        let (mut t, _) = ctx.registry.import(&src)?;
                        t.recording_id = r.id.clone();
                        write_embedding(&t, ctx.embedding_path(&r.id, chunk))?;
                        k += 1;
                        if !chunked || k == cfg.max_chunks {
                            break;
                        }
                    }
                }
            }
            let mut k = 0;
            loop {
                let path = ctx.embedding_path(&r.id, chunked.then_some(k));
                if !path.exists() {
                    break;
                }
                let t = read_embedding(&path)?;
                let warnings = ctx.registry.check(&t).join("; ");
                let file = path.file_name().unwrap().to_string_lossy().to_string();
                let _ = writeln!(index, "{dataset},{},{file},{},\"{}\"", r.id, t.n_segments, warnings.replace('"', "'"));
                k += 1;
                if !chunked {
                    break;
                }
            }
        }
    }
    write_file(&ctx.dir(Command::Embed).join(format!("{}_index.csv", cfg.backend)), index)
}

fn rank_mode(task: Task) -> Result<RankMode> {
    task.rank_mode().ok_or_else(|| {
        ConfigError::new("run.task", format!("`{task}` is not a ranking task (use expertise2 or expertise4)")).into()
    })
}

/// Pairs from `repeats` independent draws.
fn draw_pairs(recs: &[Recording], seed: u64, mode: RankMode, repeats: usize) -> Result<Vec<RankPair>> {
    let mut out = Vec::new();
    for k in 0..repeats as u64 {
        out.extend(make_expertise_pairs(recs, seed.wrapping_add(k), mode)?);
    }
    Ok(out)
}

fn split_of(recs: &[Recording], split: Split) -> Vec<Recording> {
    recs.iter().filter(|r| r.split == split).cloned().collect()
}

fn pair(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let mode = rank_mode(cfg.task)?;
    let dir = ctx.dir(Command::Pair);
    let recs = ctx.ingested(Dataset::Expertise)?;
    let mut summary = String::new();
    for split in [Split::Train, Split::Test] {
        let pairs = draw_pairs(&split_of(&recs, split), cfg.seed, mode, cfg.pair_repeats)?;
        let _ = writeln!(summary, "{}_{split}.pairs={}", cfg.task, pairs.len());
        write_file(&dir.join(format!("{}_{split}.csv", cfg.task)), pairs_to_csv(&pairs))?;
    }
    if cfg.manifests.contains_key(&Dataset::Icpc2015) {
        let candidates = icpc_candidates(&ctx.ingested(Dataset::Icpc2015)?)?;
        let labeled = make_icpc_pairs(&candidates, &icpc_scores(&candidates), mode)?;
        let _ = writeln!(summary, "icpc_{mode}.pairs={}", labeled.pairs.len());
        let _ = writeln!(summary, "icpc_{mode}.ties_skipped={}", labeled.ties_skipped);
        let _ = writeln!(summary, "icpc_{mode}.gap_skipped={}", labeled.gap_skipped);
        write_file(&dir.join(format!("icpc_{mode}.csv")), pairs_to_csv(&labeled.pairs))?;
        let ids: Vec<String> = candidates.iter().map(|c| c.candidate_id.clone()).collect();
        let mut text = String::from("first_id,second_id\n");
        for (a, b) in make_tournament_pairs(&ids)? {
            let _ = writeln!(text, "{a},{b}");
        }
        write_file(&dir.join("tournament.csv"), text)?;
    }
    write_file(&dir.join("summary.txt"), summary)
}

/// Labeled examples of the task from `recs`.
fn examples(ctx: &Ctx, recs: &[Recording], seed: u64) -> Result<Vec<Example>> {
    let cfg = ctx.cfg;
    match cfg.task.rank_mode() {
        Some(mode) => draw_pairs(recs, seed, mode, cfg.pair_repeats)?
            .iter()
            .map(|p| {
                Ok(Example::pair(
                    ctx.embedding(&p.first)?,
                    ctx.embedding(&p.second)?,
                    usize::from(p.label.expect("expertise pairs are labeled")),
                ))
            })
            .collect(),
        None => recs
            .iter()
            .filter_map(|r| cfg.task.target(r).map(|t| (r, t)))
            .map(|(r, t)| Ok(Example::single(ctx.embedding(&r.id)?, t)))
            .collect(),
    }
}

fn check_dims(ctx: &Ctx, ex: &[Example]) -> Result<usize> {
    let first = ex
        .first()
        .ok_or_else(|| anyhow!("no labeled {} examples for task {}", ctx.cfg.task.dataset(), ctx.cfg.task))?;
    Ok(first.first.dim)
}

fn report_text(task: Task, header: &[(&str, String)], metrics: &TaskMetrics) -> String {
    let mut out = String::new();
    for (k, v) in header {
        let _ = writeln!(out, "{k}={v}");
    }
    for name in task.report_metrics() {
        let v = metrics.values.get(*name).copied().unwrap_or(f64::NAN);
        let _ = writeln!(out, "{name}={}", report::fmt_value(v));
    }
    if task == Task::TechniqueMulti {
        for (c, ap) in metrics.per_class_ap.iter().enumerate() {
            let name = pianojudge::manifest::Technique::ALL[c].as_str();
            let _ = writeln!(out, "ap_{name}={}", ap.map_or("nan".into(), report::fmt_value));
        }
    }
    out
}

fn train_cmd(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let task = cfg.task;
    let recs = split_of(&ctx.ingested(task.dataset())?, Split::Train);
    let (fit, valid) = if cfg.validation_fraction > 0.0 && recs.len() >= 2 {
        let (fit, valid) = split_recordings(&recs, cfg.validation_fraction, cfg.seed)?;
        (fit, valid)
    } else {
        (recs, Vec::new())
    };
    let train_ex = examples(ctx, &fit, cfg.seed)?;
    let valid_ex = if valid.is_empty() {
        Vec::new()
    } else {
        examples(ctx, &valid, cfg.seed)?
    };
    let dim = check_dims(ctx, &train_ex)?;
    let head = build_head(&cfg.head_config(dim), cfg.seed)?;
    log::info!(
        "{} parameters, {} training and {} validation examples",
        head.n_params(),
        train_ex.len(),
        valid_ex.len()
    );
    let dir = ctx.task_dir(Command::Train);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let validation = (!valid_ex.is_empty()).then_some(valid_ex.as_slice());

    let mut tcfg = cfg.train_config();
    if !cfg.grid.is_empty() {
        let Some(v) = validation else {
            return Err(ConfigError::new(
                "train.validation_fraction",
                "grid search needs a validation split",
            )
            .into());
        };
        let result = grid_search(&head, &cfg.grid, &train_ex, v, &tcfg)?;
        write_file(&dir.join("grid.csv"), result.to_csv())?;
        tcfg = result.best;
    }

    let (model, history) = train(&head, &train_ex, validation, &tcfg)?;
    let best = &history.records[history.best_epoch - 1];
    save_checkpoint(
        dir.join("model.ckpt"),
        &Checkpoint {
            head: model,
            train: tcfg.clone(),
            epoch: history.best_epoch,
            metrics: best.metrics.clone(),
        },
    )?;
    write_file(&dir.join("epochs.log"), history.log_lines())?;
    let n = if validation.is_some() { valid_ex.len() } else { train_ex.len() };
    let rows = report::metric_rows(task.as_str(), &cfg.backend, &history.metric_source, cfg.seed, n, &best.metrics);
    write_file(&dir.join("metrics.csv"), report::rows_to_csv(&rows))?;
    let header = [
        ("task", task.to_string()),
        ("backend", cfg.backend.clone()),
        ("seed", cfg.seed.to_string()),
        ("learning_rate", tcfg.learning_rate.to_string()),
        ("weight_decay", tcfg.weight_decay.to_string()),
        ("batch_size", tcfg.batch_size.to_string()),
        ("epochs", tcfg.epochs.to_string()),
        ("best_epoch", history.best_epoch.to_string()),
        ("train_examples", train_ex.len().to_string()),
        ("validation_examples", valid_ex.len().to_string()),
        ("metric_split", history.metric_source.clone()),
        ("final_loss", report::fmt_value(history.records.last().unwrap().loss)),
    ];
    write_file(&dir.join("report.txt"), report_text(task, &header, &best.metrics))?;
    if task.kind() == TaskKind::Multilabel {
        write_file(
            &dir.join("ap_epochs.svg"),
            plot::ap_epochs_svg(&history, &format!("{task} / {}: AP per class", cfg.backend)),
        )?;
    }
    log::info!("best epoch {}: {:?}", history.best_epoch, best.metrics.values);
    Ok(())
}

fn checkpoint_path(ctx: &Ctx) -> PathBuf {
    ctx.cfg
        .checkpoint
        .clone()
        .unwrap_or_else(|| ctx.task_dir(Command::Train).join("model.ckpt"))
}

fn load_model(ctx: &Ctx) -> Result<Checkpoint> {
    let path = checkpoint_path(ctx);
    if !path.exists() {
        return Err(anyhow!("checkpoint {} not found; run `train` first", path.display()).into());
    }
    let ck = load_checkpoint(&path, None)?;
    let hc = ck.head.config();
    if hc.task_kind != ctx.cfg.task.kind() || hc.output_classes != ctx.cfg.task.output_classes() {
        return Err(anyhow!(
            "checkpoint {} is a {:?} head with {} outputs, task {} needs {}",
            path.display(),
            hc.task_kind,
            hc.output_classes,
            ctx.cfg.task,
            ctx.cfg.task.output_classes()
        )
        .into());
    }
    Ok(ck)
}

fn evaluate_cmd(ctx: &Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let task = cfg.task;
    let ck = load_model(ctx)?;
    let test = split_of(&ctx.ingested(task.dataset())?, Split::Test);
    let ex = examples(ctx, &test, cfg.seed)?;
    check_dims(ctx, &ex)?;
    let metrics = evaluate(&ck.head, &ex)?;
    let dir = ctx.task_dir(Command::Evaluate);
    let rows = report::metric_rows(task.as_str(), &cfg.backend, "test", cfg.seed, ex.len(), &metrics);
    write_file(&dir.join("metrics.csv"), report::rows_to_csv(&rows))?;
    let header = [
        ("task", task.to_string()),
        ("backend", cfg.backend.clone()),
        ("seed", cfg.seed.to_string()),
        ("checkpoint_epoch", ck.epoch.to_string()),
        ("split", "test".to_string()),
        ("n", ex.len().to_string()),
    ];
    let text = report_text(task, &header, &metrics);
    print!("{text}");
    write_file(&dir.join("report.txt"), text)
}

fn competition(ctx: &Ctx, case_study: bool) -> Result<()> {
    let cfg = ctx.cfg;
    rank_mode(cfg.task)?;
    let ck = load_model(ctx)?;
    let candidates = icpc_candidates(&ctx.ingested(Dataset::Icpc2015)?)?;
    let mut chunks = BTreeMap::new();
    for c in &candidates {
        chunks.insert(c.candidate_id.clone(), ctx.chunks(&c.preliminary_recording.id)?);
    }
    let options = CaseStudyOptions {
        fitting: case_study && cfg.fitting,
        fit_epochs: cfg.fit_epochs,
        seed: cfg.seed,
        fit_config: cfg.train_config(),
    };
    let result = run_case_study(&ck.head, &candidates, &chunks, &options)?;
    let dir = ctx.dir(if case_study { Command::CaseStudy } else { Command::Tournament });
    write_outputs(&dir, cfg, &result, case_study)
}

fn write_outputs(dir: &Path, cfg: &RunConfig, r: &CaseStudyReport, case_study: bool) -> Result<()> {
    write_file(&dir.join("candidates.csv"), r.hitrate.candidates_csv())?;
    let title = format!("{} / {}: win-count threshold vs hit rate", cfg.task, cfg.backend);
    write_file(&dir.join("hitrate.svg"), plot::hitrate_svg(&r.hitrate, &title))?;
    let mut summary = format!("task={}\nbackend={}\nseed={}\n", cfg.task, cfg.backend, cfg.seed);
    summary.push_str(&r.summary());
    let n = r.hitrate.points.len();
    for k in [1, 5, 10, 18, n / 2, n] {
        if let Some(h) = r.hitrate.hit_rate(k) {
            let _ = writeln!(summary, "hit_rate@{k}={}", report::fmt_value(h));
        }
    }
    write_file(&dir.join("summary.txt"), summary)?;
    if case_study {
        let mut text = String::from("first_id,second_id,chunks,label\n");
        for d in &r.decisions {
            let _ = writeln!(text, "{},{},{},{}", d.first, d.second, d.chunks_compared, d.label);
        }
        write_file(&dir.join("decisions.csv"), text)?;
        if let Some(h) = &r.fit_history {
            write_file(&dir.join("fit_epochs.log"), h.log_lines())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_quotes() {
        assert_eq!(safe_id("a/b c.wav"), "a_b_c.wav");
        assert_eq!(shell_quote("it's"), r"'it'\''s'");
    }
}
