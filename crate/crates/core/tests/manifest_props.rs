use std::collections::{BTreeMap, BTreeSet};

use pianojudge::manifest::{
    manifest_to_string, parse_manifest, split_recordings, validate_manifest, Dataset, Recording,
    Split, Technique,
};
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;

fn recording(i: usize, dataset: Dataset, label: u8, dur: f64, techs: Vec<usize>) -> Recording {
    let mut r = Recording::new(format!("rec-{i:04}"), dataset, format!("audio/{i}.flac"));
    r.duration_s = dur;
    match dataset {
        Dataset::Expertise => r.expertise = Some(label % 3),
        Dataset::Difficulty => r.difficulty = Some(label % 9 + 1),
        Dataset::Techniques => {
            let set: BTreeSet<Technique> = techs.iter().map(|&t| Technique::ALL[t % 7]).collect();
            r.techniques = Some(set);
        }
        Dataset::Icpc2015 => {
            r.candidate_id = Some(format!("cand-{i}"));
            r.rounds_reached = Some(u32::from(label % 4));
        }
    }
    r
}

fn manifest() -> impl Strategy<Value = (Dataset, Vec<Recording>)> {
    (
        prop::sample::select(Dataset::ALL.to_vec()),
        prop::collection::vec(
            (any::<u8>(), 0.0f64..4000.0, prop::collection::vec(0usize..7, 1..=3)),
            1..40,
        ),
    )
        .prop_map(|(dataset, rows)| {
            let recs = rows
                .into_iter()
                .enumerate()
                .map(|(i, (label, dur, techs))| recording(i, dataset, label, dur, techs))
                .collect();
            (dataset, recs)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_failure_persistence(FileFailurePersistence::WithSource("regressions")))]

    #[test]
    fn round_trip((dataset, recs) in manifest()) {
        prop_assert!(validate_manifest(&recs, dataset).is_valid());
        let text = manifest_to_string(&recs);
        let back = parse_manifest(&text, dataset).unwrap();
        prop_assert_eq!(back, recs);
    }

    #[test]
    fn split_partitions_and_stratifies(
        counts in prop::collection::vec(0usize..30, 3),
        frac in 0.05f64..0.6,
        seed in any::<u64>(),
    ) {
        let mut recs = Vec::new();
        for (level, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                let i = recs.len();
                recs.push(recording(i, Dataset::Expertise, level as u8, 60.0, vec![]));
            }
        }
        prop_assume!(!recs.is_empty());
        let (train, test) = split_recordings(&recs, frac, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), recs.len());
        let ids: BTreeSet<_> = train.iter().chain(&test).map(|r| r.id.clone()).collect();
        prop_assert_eq!(ids.len(), recs.len());
        prop_assert!(train.iter().all(|r| r.split == Split::Train));
        prop_assert!(test.iter().all(|r| r.split == Split::Test));
        let mut per_level: BTreeMap<u8, usize> = BTreeMap::new();
        for r in &test {
            *per_level.entry(r.expertise.unwrap()).or_default() += 1;
        }
        for (level, &n) in counts.iter().enumerate() {
            let expected = if n == 0 { 0 } else { ((n as f64 * frac).floor() as usize).max(usize::from(n >= 2)) };
            prop_assert_eq!(per_level.get(&(level as u8)).copied().unwrap_or(0), expected);
        }
        let again = split_recordings(&recs, frac, seed).unwrap();
        prop_assert_eq!(again, (train, test));
    }
}

#[test]
fn unknown_column_and_bad_rows_are_rejected() {
    let header = "id,dataset,audio_uri,duration_s,expertise,difficulty,techniques,split,candidate_id,rounds_reached";
    let ok = format!("{header}\nr1,difficulty,a.wav,10,,4,,train,,\n");
    assert_eq!(parse_manifest(&ok, Dataset::Difficulty).unwrap().len(), 1);
    let extra = format!("{header},mood\nr1,difficulty,a.wav,10,,4,,train,,,happy\n");
    assert!(parse_manifest(&extra, Dataset::Difficulty).is_err());
    let bad = format!("{header}\nr1,difficulty,a.wav,10,,12,,train,,\n");
    let err = parse_manifest(&bad, Dataset::Difficulty).unwrap_err().to_string();
    assert!(err.contains("difficulty"), "{err}");
}
