//! Run configuration: the embedded defaults file overlaid with a user INI
//! file and command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ini::Ini;
use pianojudge::manifest::Dataset;
use pianojudge::model::{GridSpace, HeadConfig, TaskKind};

use crate::task::Task;

pub const DEFAULTS: &str = include_str!("../config/defaults.ini");
pub const CACHE_ENV: &str = "PIANOJUDGE_CACHE";

/// A config problem tied to one `section.key`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn manifest_key(dataset: Dataset) -> &'static str {
    match dataset {
        Dataset::Expertise => "expertise_manifest",
        Dataset::Difficulty => "difficulty_manifest",
        Dataset::Techniques => "techniques_manifest",
        Dataset::Icpc2015 => "icpc_manifest",
    }
}

type Sections = Vec<(String, Vec<(String, String)>)>;

fn parse_ini(text: &str, origin: &str) -> Result<Sections, ConfigError> {
    let ini = Ini::load_from_str(text).map_err(|e| ConfigError::new(origin, e.to_string()))?;
    let mut out: Sections = Vec::new();
    for (section, props) in ini.iter() {
        let Some(section) = section else {
            if let Some((k, _)) = props.iter().next() {
                return Err(ConfigError::new(k, "keys must be inside a [section]"));
            }
            continue;
        };
        let entries = props.iter().map(|(k, v)| (k.to_string(), v.trim().to_string())).collect();
        out.push((section.to_string(), entries));
    }
    Ok(out)
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub backend: Option<String>,
    pub task: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Effective `section -> key -> value` table, in defaults-file order.
    values: Sections,
    base_dir: PathBuf,
    pub task: Task,
    pub backend: String,
    pub seed: u64,
    pub out: PathBuf,
    pub manifests: BTreeMap<Dataset, PathBuf>,
    pub audio_root: PathBuf,
    pub test_fraction: f64,
    pub downloader: Option<String>,
    pub cache_dir: PathBuf,
    pub import_dir: Option<PathBuf>,
    pub max_chunks: usize,
    pub pair_repeats: usize,
    pub head: HeadConfig,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub grid: GridSpace,
    pub fitting: bool,
    pub fit_epochs: usize,
    pub checkpoint: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let cache_env = std::env::var(CACHE_ENV).ok().filter(|v| !v.is_empty());
        Self::from_str(&text, &base_dir, overrides, cache_env.as_deref())
    }

    pub fn from_str(
        text: &str,
        base_dir: &Path,
        overrides: &Overrides,
        cache_env: Option<&str>,
    ) -> Result<Self, ConfigError> {
        let mut values = parse_ini(DEFAULTS, "defaults")?;
        for (section, entries) in parse_ini(text, "config")? {
            let Some((_, known)) = values.iter_mut().find(|(s, _)| *s == section) else {
                return Err(ConfigError::new(section, "unknown section"));
            };
            for (key, value) in entries {
                let Some(slot) = known.iter_mut().find(|(k, _)| *k == key) else {
                    return Err(ConfigError::new(format!("{section}.{key}"), "unknown key"));
                };
                slot.1 = value;
            }
        }
        let mut cfg_set = |section: &str, key: &str, value: String| {
            let entries = &mut values.iter_mut().find(|(s, _)| s == section).unwrap().1;
            entries.iter_mut().find(|(k, _)| k == key).unwrap().1 = value;
        };
        if let Some(seed) = overrides.seed {
            cfg_set("run", "seed", seed.to_string());
        }
        if let Some(backend) = &overrides.backend {
            cfg_set("run", "backend", backend.clone());
        }
        if let Some(task) = &overrides.task {
            cfg_set("run", "task", task.clone());
        }
        Self::typed(values, base_dir, overrides, cache_env)
    }

    fn typed(
        values: Sections,
        base_dir: &Path,
        overrides: &Overrides,
        cache_env: Option<&str>,
    ) -> Result<Self, ConfigError> {
        let get = |section: &str, key: &str| -> &str {
            let entries = &values.iter().find(|(s, _)| s == section).unwrap().1;
            &entries.iter().find(|(k, _)| k == key).unwrap().1
        };
        let field = |section: &str, key: &str| format!("{section}.{key}");
        fn parse<T: std::str::FromStr>(raw: &str, field: String, what: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            raw.parse::<T>()
                .map_err(|e| ConfigError::new(field, format!("`{raw}` is not {what}: {e}")))
        }
        let path = |raw: &str| -> Option<PathBuf> {
            (!raw.is_empty()).then(|| base_dir.join(raw))
        };
        let positive = |section: &str, key: &str| -> Result<usize, ConfigError> {
            let v: usize = parse(get(section, key), field(section, key), "a non-negative integer")?;
            if v == 0 {
                return Err(ConfigError::new(field(section, key), "must be positive"));
            }
            Ok(v)
        };
        let real = |section: &str, key: &str| -> Result<f64, ConfigError> {
            let v: f64 = parse(get(section, key), field(section, key), "a number")?;
            if !v.is_finite() {
                return Err(ConfigError::new(field(section, key), "must be finite"));
            }
            Ok(v)
        };
        fn list<T: std::str::FromStr>(raw: &str, field: String) -> Result<Vec<T>, ConfigError>
        where
            T::Err: fmt::Display,
        {
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| parse(s, field.clone(), "a valid list item"))
                .collect()
        }

        let task: Task = get("run", "task")
            .parse()
            .map_err(|e: String| ConfigError::new("run.task", e))?;
        let backend = get("run", "backend").to_string();
        let registry = pianojudge::embeddings::BackendRegistry::default();
        let spec = registry
            .get(&backend)
            .map_err(|e| ConfigError::new("run.backend", e.to_string()))?;
        let seed: u64 = parse(get("run", "seed"), field("run", "seed"), "an unsigned integer")?;
        let out = match &overrides.out {
            Some(p) => p.clone(),
            None => path(get("run", "out")).ok_or_else(|| ConfigError::new("run.out", "must not be empty"))?,
        };

        let mut manifests = BTreeMap::new();
        for dataset in Dataset::ALL {
            if let Some(p) = path(get("data", manifest_key(dataset))) {
                manifests.insert(dataset, p);
            }
        }
        let audio_root = path(get("data", "audio_root")).unwrap_or_else(|| base_dir.to_path_buf());
        let test_fraction = real("data", "test_fraction")?;
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(ConfigError::new("data.test_fraction", "must lie in (0, 1)"));
        }
        let downloader = Some(get("fetch", "downloader").to_string()).filter(|s| !s.is_empty());
        if let Some(d) = &downloader {
            if !(d.contains("{uri}") && d.contains("{out}")) {
                return Err(ConfigError::new(
                    "fetch.downloader",
                    "template must contain both {uri} and {out}",
                ));
            }
        }
        let cache_dir = match cache_env {
            Some(env) => PathBuf::from(env),
            None => path(get("embed", "cache_dir"))
                .ok_or_else(|| ConfigError::new("embed.cache_dir", "must not be empty"))?,
        };
        let import_dir = path(get("embed", "import_dir"));
        let max_chunks = positive("embed", "max_chunks")?;
        if max_chunks > pianojudge::MAX_SEGMENTS {
            return Err(ConfigError::new("embed.max_chunks", "at most 30 chunks per recording"));
        }
        let pair_repeats = positive("pair", "repeats")?;

        let mut head = HeadConfig::new(spec.dim, task.output_classes(), task.kind());
        head.conv_kernel = positive("head", "conv_kernel")?;
        head.conv_stride = positive("head", "conv_stride")?;
        head.conv_padding = parse(get("head", "conv_padding"), field("head", "conv_padding"), "an integer")?;
        head.conv1_channels = positive("head", "conv1_channels")?;
        head.conv2_channels = positive("head", "conv2_channels")?;
        head.attention_heads = positive("head", "attention_heads")?;
        head.attention_dim = positive("head", "attention_dim")?;
        head.validate().map_err(|e| match e {
            pianojudge::Error::Validation { field, message } => ConfigError::new(format!("head.{field}"), message),
            other => ConfigError::new("head", other.to_string()),
        })?;

        let learning_rate = real("train", "learning_rate")?;
        if learning_rate <= 0.0 {
            return Err(ConfigError::new("train.learning_rate", "must be positive"));
        }
        let weight_decay = real("train", "weight_decay")?;
        if weight_decay < 0.0 {
            return Err(ConfigError::new("train.weight_decay", "must be non-negative"));
        }
        let batch_size = positive("train", "batch_size")?;
        let epochs = positive("train", "epochs")?;
        let validation_fraction = real("train", "validation_fraction")?;
        if !(0.0..1.0).contains(&validation_fraction) {
            return Err(ConfigError::new("train.validation_fraction", "must lie in [0, 1)"));
        }

        let grid = GridSpace {
            learning_rate: list(get("grid", "learning_rate"), field("grid", "learning_rate"))?,
            weight_decay: list(get("grid", "weight_decay"), field("grid", "weight_decay"))?,
            batch_size: list(get("grid", "batch_size"), field("grid", "batch_size"))?,
            epochs: list(get("grid", "epochs"), field("grid", "epochs"))?,
        };
        if grid.learning_rate.iter().any(|&v: &f64| !(v > 0.0))
            || grid.weight_decay.iter().any(|&v: &f64| !(v >= 0.0))
            || grid.batch_size.contains(&0)
            || grid.epochs.contains(&0)
        {
            return Err(ConfigError::new("grid", "grid values must be valid training settings"));
        }

        let fitting: bool = parse(get("case_study", "fitting"), field("case_study", "fitting"), "true or false")?;
        let fit_epochs = positive("case_study", "fit_epochs")?;
        let checkpoint = path(get("case_study", "checkpoint"));

        Ok(RunConfig {
            task,
            backend,
            seed,
            out,
            manifests,
            audio_root,
            test_fraction,
            downloader,
            cache_dir,
            import_dir,
            max_chunks,
            pair_repeats,
            head,
            learning_rate,
            weight_decay,
            batch_size,
            epochs,
            validation_fraction,
            grid,
            fitting,
            fit_epochs,
            checkpoint,
            values,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn manifest(&self, dataset: Dataset) -> Result<&Path, ConfigError> {
        self.manifests.get(&dataset).map(PathBuf::as_path).ok_or_else(|| {
            ConfigError::new(
                format!("data.{}", manifest_key(dataset)),
                format!("required for dataset `{dataset}`"),
            )
        })
    }

    pub fn train_config(&self) -> pianojudge::model::TrainConfig {
        pianojudge::model::TrainConfig {
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            loss: pianojudge::model::LossKind::for_task(self.task.kind()),
        }
    }

    /// Head config sized for embeddings of width `dim`.
    pub fn head_config(&self, dim: usize) -> HeadConfig {
        HeadConfig {
            input_dim: dim,
            ..self.head.clone()
        }
    }

    pub fn is_rank(&self) -> bool {
        self.task.kind() == TaskKind::Rank
    }

    /// The effective configuration as INI text.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for (section, entries) in &self.values {
            out.push_str(&format!("[{section}]\n"));
            for (k, v) in entries {
                let v = match (section.as_str(), k.as_str()) {
                    ("run", "out") => self.out.display().to_string(),
                    ("embed", "cache_dir") => self.cache_dir.display().to_string(),
                    _ => v.clone(),
                };
                out.push_str(&format!("{k} = {v}\n"));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_str(text, Path::new("/cfg"), &Overrides::default(), None)
    }

    #[test]
    fn defaults_parse() {
        let cfg = load("").unwrap();
        assert_eq!(cfg.task, Task::Expertise2);
        assert_eq!(cfg.backend, "spectrogram");
        assert_eq!(cfg.head.input_dim, 128);
        assert_eq!(cfg.epochs, 50);
        assert_eq!(cfg.out, Path::new("/cfg/runs"));
        assert!(cfg.grid.is_empty());
    }

    #[test]
    fn field_level_errors() {
        let err = load("[train]\nepochs = 0\n").unwrap_err();
        assert_eq!(err.field, "train.epochs");
        let err = load("[train]\nlearnin_rate = 1\n").unwrap_err();
        assert_eq!(err.field, "train.learnin_rate");
        let err = load("[model]\nx = 1\n").unwrap_err();
        assert_eq!(err.field, "model");
        let err = load("[head]\nattention_dim = 127\n").unwrap_err();
        assert_eq!(err.field, "head.attention_dim");
        let err = load("[run]\nbackend = wav2vec\n").unwrap_err();
        assert_eq!(err.field, "run.backend");
        let err = load("[fetch]\ndownloader = curl {uri}\n").unwrap_err();
        assert_eq!(err.field, "fetch.downloader");
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            seed: Some(9),
            out: Some(PathBuf::from("elsewhere")),
            backend: Some("mert".into()),
            task: Some("difficulty3".into()),
        };
        let cfg = RunConfig::from_str("[run]\nseed = 1\n", Path::new("."), &o, Some("/tmp/c")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.out, Path::new("elsewhere"));
        assert_eq!(cfg.head.input_dim, 1024);
        assert_eq!(cfg.head.output_classes, 3);
        assert_eq!(cfg.cache_dir, Path::new("/tmp/c"));
        assert!(cfg.snapshot().contains("seed = 9\n"));
    }

    #[test]
    fn grid_lists() {
        let cfg = load("[grid]\nlearning_rate = 1e-3, 1e-4\nbatch_size = 4,8\n").unwrap();
        assert_eq!(cfg.grid.learning_rate, vec![1e-3, 1e-4]);
        assert_eq!(cfg.grid.batch_size, vec![4, 8]);
        assert_eq!(load("[grid]\nbatch_size = 0\n").unwrap_err().field, "grid");
    }
}
