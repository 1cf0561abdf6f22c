//! Dataset manifests: one CSV row per recording with its task labels.
//!
//! The header is fixed:
//!
//! ```text
//! id,dataset,audio_uri,duration_s,expertise,difficulty,techniques,split,candidate_id,rounds_reached
//! ```
//!
//! Empty cells are absent values and `techniques` is a `|`-joined list.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const MANIFEST_HEADER: [&str; 10] = [
    "id",
    "dataset",
    "audio_uri",
    "duration_s",
    "expertise",
    "difficulty",
    "techniques",
    "split",
    "candidate_id",
    "rounds_reached",
];

/// Techniques carried by a single recording never exceed this count.
pub const MAX_TECHNIQUES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Expertise,
    Icpc2015,
    Difficulty,
    Techniques,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [
        Dataset::Expertise,
        Dataset::Icpc2015,
        Dataset::Difficulty,
        Dataset::Techniques,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Expertise => "expertise",
            Dataset::Icpc2015 => "icpc2015",
            Dataset::Difficulty => "difficulty",
            Dataset::Techniques => "techniques",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| Error::validation("dataset", format!("unknown dataset `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "" | "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::validation("split", format!("unknown split `{other}`"))),
        }
    }
}

/// The seven technique classes, in label-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Scales,
    Arpeggios,
    Ornaments,
    RepeatedNotes,
    DoubleNotes,
    Octave,
    Staccato,
}

impl Technique {
    pub const ALL: [Technique; 7] = [
        Technique::Scales,
        Technique::Arpeggios,
        Technique::Ornaments,
        Technique::RepeatedNotes,
        Technique::DoubleNotes,
        Technique::Octave,
        Technique::Staccato,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Technique::Scales => "scales",
            Technique::Arpeggios => "arpeggios",
            Technique::Ornaments => "ornaments",
            Technique::RepeatedNotes => "repeated_notes",
            Technique::DoubleNotes => "double_notes",
            Technique::Octave => "octave",
            Technique::Staccato => "staccato",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Technique::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::validation("techniques", format!("unknown technique `{s}`")))
    }
}

/// One audio track plus its task labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub id: String,
    pub dataset: Dataset,
    pub audio_uri: String,
    pub duration_s: f64,
    /// 0 beginner, 1 advanced, 2 virtuoso.
    pub expertise: Option<u8>,
    /// Henle grade 1..=9.
    pub difficulty: Option<u8>,
    pub techniques: Option<BTreeSet<Technique>>,
    pub split: Split,
    pub candidate_id: Option<String>,
    pub rounds_reached: Option<u32>,
}

impl Recording {
    pub fn new(id: impl Into<String>, dataset: Dataset, audio_uri: impl Into<String>) -> Self {
        Recording {
            id: id.into(),
            dataset,
            audio_uri: audio_uri.into(),
            duration_s: 0.0,
            expertise: None,
            difficulty: None,
            techniques: None,
            split: Split::Unassigned,
            candidate_id: None,
            rounds_reached: None,
        }
    }

    /// Multi-hot vector over [`Technique::ALL`].
    pub fn technique_vector(&self) -> Option<[bool; 7]> {
        self.techniques.as_ref().map(|set| {
            let mut v = [false; 7];
            for t in set {
                v[t.index()] = true;
            }
            v
        })
    }

    pub fn is_remote(&self) -> bool {
        self.audio_uri.starts_with("http://") || self.audio_uri.starts_with("https://")
    }
}

/// A competition candidate with its round progression.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpcCandidate {
    pub candidate_id: String,
    pub preliminary_recording: Recording,
    /// Rounds entered beyond the preliminary.
    pub rounds_reached: u32,
    /// Score S(c); always equal to `rounds_reached`.
    pub score: i32,
}

/// Candidates from an `icpc2015` manifest, one per recording.
pub fn icpc_candidates(recordings: &[Recording]) -> Result<Vec<IcpcCandidate>> {
    recordings
        .iter()
        .map(|r| {
            let candidate_id = r.candidate_id.clone().unwrap_or_else(|| r.id.clone());
            let rounds = r.rounds_reached.ok_or_else(|| {
                Error::validation("rounds_reached", format!("missing for recording `{}`", r.id))
            })?;
            Ok(IcpcCandidate {
                candidate_id,
                preliminary_recording: r.clone(),
                rounds_reached: rounds,
                score: rounds as i32,
            })
        })
        .collect()
}

fn optional<T: FromStr>(cell: &str, field: &str, row: usize) -> Result<Option<T>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse().map(Some).map_err(|_| Error::ManifestRow {
        row,
        message: format!("cannot parse {field} `{cell}`"),
    })
}

fn parse_techniques(cell: &str, row: usize) -> Result<Option<BTreeSet<Technique>>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let mut set = BTreeSet::new();
    for name in cell.split('|') {
        let t = name.trim().parse::<Technique>().map_err(|e| Error::ManifestRow {
            row,
            message: e.to_string(),
        })?;
        set.insert(t);
    }
    Ok(Some(set))
}

fn parse_row(record: &csv::StringRecord, row: usize) -> Result<Recording> {
    let cell = |i: usize| record.get(i).unwrap_or("");
    let bad = |message: String| Error::ManifestRow { row, message };

    let id = cell(0).trim().to_string();
    if id.is_empty() {
        return Err(bad("empty id".into()));
    }
    let dataset = cell(1).trim().parse::<Dataset>().map_err(|e| bad(e.to_string()))?;
    let duration_s = optional::<f64>(cell(3), "duration_s", row)?.unwrap_or(0.0);
    let split = cell(7).trim().parse::<Split>().map_err(|e| bad(e.to_string()))?;
    let candidate_id = Some(cell(8).trim().to_string()).filter(|s| !s.is_empty());

    Ok(Recording {
        id,
        dataset,
        audio_uri: cell(2).trim().to_string(),
        duration_s,
        expertise: optional(cell(4), "expertise", row)?,
        difficulty: optional(cell(5), "difficulty", row)?,
        techniques: parse_techniques(cell(6), row)?,
        split,
        candidate_id,
        rounds_reached: optional(cell(9), "rounds_reached", row)?,
    })
}

/// Parse manifest CSV text. Row numbers in errors are 1-based data rows.
pub fn parse_manifest(text: &str, dataset: Dataset) -> Result<Vec<Recording>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(|e| Error::ManifestRow {
        row: 0,
        message: e.to_string(),
    })?;
    let header: Vec<&str> = header.iter().map(str::trim).collect();
    if header != MANIFEST_HEADER {
        let unknown: Vec<&str> = header
            .iter()
            .copied()
            .filter(|h| !MANIFEST_HEADER.contains(h))
            .collect();
        let message = if unknown.is_empty() {
            format!("header must be exactly `{}`", MANIFEST_HEADER.join(","))
        } else {
            format!("unknown columns: {}", unknown.join(", "))
        };
        return Err(Error::ManifestRow { row: 0, message });
    }

    let mut recordings = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::ManifestRow {
            row,
            message: e.to_string(),
        })?;
        recordings.push(parse_row(&record, row)?);
    }

    let report = validate_manifest(&recordings, dataset);
    if let Some(first) = report.violations.first() {
        return Err(Error::Validation {
            field: first.field.clone(),
            message: format!("{} (recording `{}`)", first.message, first.recording_id),
        });
    }
    Ok(recordings)
}

/// Load and validate a manifest file for `dataset`.
pub fn load_manifest(path: impl AsRef<Path>, dataset: Dataset) -> Result<Vec<Recording>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, dataset)
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub fn manifest_to_string(recordings: &[Recording]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(MANIFEST_HEADER).expect("in-memory write");
    for r in recordings {
        let techniques = r
            .techniques
            .as_ref()
            .map(|set| set.iter().map(|t| t.as_str()).collect::<Vec<_>>().join("|"))
            .unwrap_or_default();
        writer
            .write_record([
                r.id.clone(),
                r.dataset.to_string(),
                r.audio_uri.clone(),
                r.duration_s.to_string(),
                fmt_opt(&r.expertise),
                fmt_opt(&r.difficulty),
                techniques,
                r.split.to_string(),
                fmt_opt(&r.candidate_id),
                fmt_opt(&r.rounds_reached),
            ])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn save_manifest(path: impl AsRef<Path>, recordings: &[Recording]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, manifest_to_string(recordings)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub recording_id: String,
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, id: &str, field: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            recording_id: id.to_string(),
            field: field.to_string(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{}\t{}\t{}", v.recording_id, v.field, v.message)?;
        }
        Ok(())
    }
}

/// Check every manifest invariant; violations are collected, never raised.
pub fn validate_manifest(recordings: &[Recording], dataset: Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: HashMap<&str, usize> = HashMap::new();

    for r in recordings {
        let id = r.id.as_str();
        let count = seen.entry(id).or_default();
        *count += 1;
        if *count > 1 {
            report.push(id, "id", "duplicate id");
        }
        if r.dataset != dataset {
            report.push(id, "dataset", format!("expected {dataset}, found {}", r.dataset));
        }
        if !(r.duration_s.is_finite() && r.duration_s >= 0.0) {
            report.push(id, "duration_s", "duration must be a non-negative number");
        }
        if let Some(level) = r.expertise {
            if level > 2 {
                report.push(id, "expertise", "expertise out of 0..2");
            }
        }
        if let Some(grade) = r.difficulty {
            if !(1..=9).contains(&grade) {
                report.push(id, "difficulty", "difficulty out of 1..9");
            }
        }
        if let Some(set) = &r.techniques {
            if set.is_empty() {
                report.push(id, "techniques", "technique set is empty");
            } else if set.len() > MAX_TECHNIQUES {
                report.push(
                    id,
                    "techniques",
                    format!("{} techniques exceed the maximum of {MAX_TECHNIQUES}", set.len()),
                );
            }
        }

        match dataset {
            Dataset::Expertise if r.expertise.is_none() => {
                report.push(id, "expertise", "expertise dataset requires an expertise level")
            }
            Dataset::Difficulty if r.difficulty.is_none() => {
                report.push(id, "difficulty", "difficulty out of 1..9 (missing)")
            }
            Dataset::Techniques if r.techniques.is_none() => {
                report.push(id, "techniques", "techniques dataset requires a technique set")
            }
            Dataset::Icpc2015 if r.rounds_reached.is_none() => {
                report.push(id, "rounds_reached", "icpc2015 dataset requires rounds_reached")
            }
            _ => {}
        }
    }
    report
}

/// Split into (train, test), stratified by expertise level when present.
///
/// Per stratum of size `n` the test set holds `floor(n * test_fraction)`
/// recordings, raised to 1 when `n >= 2`. Output keeps input order and
/// carries the assigned split tag.
pub fn split_recordings(
    recordings: &[Recording],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<Recording>, Vec<Recording>)> {
    if recordings.is_empty() {
        return Err(Error::validation("recordings", "cannot split an empty manifest"));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::validation(
            "test_fraction",
            format!("{test_fraction} is outside (0, 1)"),
        ));
    }

    let mut strata: BTreeMap<Option<u8>, Vec<usize>> = BTreeMap::new();
    for (i, r) in recordings.iter().enumerate() {
        strata.entry(r.expertise).or_default().push(i);
    }

    let mut rng = rng::substream(seed, rng::SPLIT);
    let mut is_test = vec![false; recordings.len()];
    for indices in strata.values() {
        let n = indices.len();
        let mut n_test = (n as f64 * test_fraction).floor() as usize;
        if n >= 2 {
            n_test = n_test.max(1);
        }
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..n_test] {
            is_test[i] = true;
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (r, test_member) in recordings.iter().zip(is_test) {
        let mut r = r.clone();
        if test_member {
            r.split = Split::Test;
            test.push(r);
        } else {
            r.split = Split::Train;
            train.push(r);
        }
    }
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        "id,dataset,audio_uri,duration_s,expertise,difficulty,techniques,split,candidate_id,rounds_reached";

    fn expertise_manifest(per_level: &[usize]) -> Vec<Recording> {
        let mut out = Vec::new();
        for (level, &n) in per_level.iter().enumerate() {
            for i in 0..n {
                let mut r = Recording::new(format!("l{level}-{i}"), Dataset::Expertise, "a.wav");
                r.expertise = Some(level as u8);
                out.push(r);
            }
        }
        out
    }

    #[test]
    fn parses_expertise_rows() {
        let text = format!(
            "{HEADER}\na,expertise,a.wav,12.5,0,,,train,,\nb,expertise,b.wav,3,1,,,,,\nc,expertise,c.wav,4,2,,,test,,\n"
        );
        let recs = parse_manifest(&text, Dataset::Expertise).unwrap();
        assert_eq!(recs.len(), 3);
        let levels: Vec<_> = recs.iter().map(|r| r.expertise.unwrap()).collect();
        assert_eq!(levels, vec![0, 1, 2]);
        assert_eq!(recs[1].split, Split::Unassigned);
        assert_eq!(recs[0].duration_s, 12.5);
    }

    #[test]
    fn difficulty_zero_is_rejected() {
        let text = format!("{HEADER}\na,difficulty,a.wav,1,,0,,,,\n");
        let err = parse_manifest(&text, Dataset::Difficulty).unwrap_err();
        assert!(err.to_string().contains("difficulty out of 1..9"), "{err}");
        let text = format!("{HEADER}\na,difficulty,a.wav,1,,10,,,,\n");
        let err = parse_manifest(&text, Dataset::Difficulty).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "difficulty"));
    }

    #[test]
    fn technique_cell_is_pipe_separated() {
        let text = format!("{HEADER}\na,techniques,a.wav,1,,,scales|octave,,,\n");
        let recs = parse_manifest(&text, Dataset::Techniques).unwrap();
        let set = recs[0].techniques.as_ref().unwrap();
        assert_eq!(
            set.iter().copied().collect::<Vec<_>>(),
            vec![Technique::Scales, Technique::Octave]
        );
        let v = recs[0].technique_vector().unwrap();
        assert_eq!(v, [true, false, false, false, false, true, false]);
    }

    #[test]
    fn unknown_column_rejected() {
        let text = format!("{HEADER},extra\na,expertise,a.wav,1,0,,,,,,x\n");
        let err = parse_manifest(&text, Dataset::Expertise).unwrap_err();
        assert!(err.to_string().contains("unknown columns: extra"), "{err}");
    }

    #[test]
    fn unparseable_row_names_row_number() {
        let text = format!("{HEADER}\na,expertise,a.wav,1,0,,,,,\nb,expertise,b.wav,1,high,,,,,\n");
        match parse_manifest(&text, Dataset::Expertise).unwrap_err() {
            Error::ManifestRow { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_id_is_an_error_on_load() {
        let text = format!("{HEADER}\na,expertise,a.wav,1,0,,,,,\na,expertise,b.wav,1,1,,,,,\n");
        let err = parse_manifest(&text, Dataset::Expertise).unwrap_err();
        assert!(err.to_string().contains("duplicate id"));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_manifest("/nonexistent/manifest.csv", Dataset::Expertise).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn validation_report_entries() {
        let recs = expertise_manifest(&[2, 2, 2]);
        assert!(validate_manifest(&recs, Dataset::Expertise).is_valid());

        let mut r = Recording::new("t", Dataset::Techniques, "t.wav");
        r.techniques = Some(Technique::ALL[..4].iter().copied().collect());
        let report = validate_manifest(&[r], Dataset::Techniques);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].field, "techniques");

        let mut recs = expertise_manifest(&[1, 1, 0]);
        recs[1].id = recs[0].id.clone();
        let mut third = recs[0].clone();
        third.expertise = Some(2);
        recs.push(third);
        let report = validate_manifest(&recs, Dataset::Expertise);
        assert_eq!(report.violations.len(), 2);
        assert!(report.violations.iter().all(|v| v.field == "id"));
    }

    #[test]
    fn stratified_split_is_deterministic() {
        let recs = expertise_manifest(&[10, 10, 10]);
        let (train, test) = split_recordings(&recs, 0.2, 7).unwrap();
        for level in 0..3u8 {
            assert_eq!(test.iter().filter(|r| r.expertise == Some(level)).count(), 2);
            assert_eq!(train.iter().filter(|r| r.expertise == Some(level)).count(), 8);
        }
        let (train2, test2) = split_recordings(&recs, 0.2, 7).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        assert!(test.iter().all(|r| r.split == Split::Test));
    }

    #[test]
    fn paper_scale_split_covers_everything() {
        let recs = expertise_manifest(&[562, 570, 562]);
        let (train, test) = split_recordings(&recs, 0.2, 1).unwrap();
        assert_eq!(train.len() + test.len(), 1694);
        assert_eq!(test.iter().filter(|r| r.expertise == Some(0)).count(), 112);
        assert_eq!(test.iter().filter(|r| r.expertise == Some(1)).count(), 114);
    }

    #[test]
    fn single_recording_strata_stay_in_train() {
        let recs = expertise_manifest(&[1, 1, 1]);
        let (train, test) = split_recordings(&recs, 0.5, 3).unwrap();
        assert_eq!(train.len(), 3);
        assert!(test.is_empty());
    }

    #[test]
    fn split_rejects_bad_inputs() {
        assert!(split_recordings(&[], 0.2, 0).is_err());
        let recs = expertise_manifest(&[2, 2, 2]);
        assert!(split_recordings(&recs, 0.0, 0).is_err());
        assert!(split_recordings(&recs, 1.0, 0).is_err());
    }

    #[test]
    fn icpc_score_equals_rounds() {
        let mut r = Recording::new("c1", Dataset::Icpc2015, "c1.wav");
        r.rounds_reached = Some(2);
        let c = icpc_candidates(&[r]).unwrap();
        assert_eq!(c[0].score, 2);
        assert_eq!(c[0].candidate_id, "c1");
    }
}
