//! Ranked pairs: expertise pairs, competition candidate pairs and full
//! tournament enumeration.
//!
//! Labels follow the pairwise ranking function over levels `q1 = Q(p1)`,
//! `q2 = Q(p2)`:
//!
//! | mode     | case            | label |
//! |----------|-----------------|-------|
//! | two-way  | q1 < q2         | 0     |
//! | two-way  | q1 > q2         | 1     |
//! | four-way | q2 - q1 = 2     | 0     |
//! | four-way | q2 - q1 = 1     | 1     |
//! | four-way | q1 - q2 = 1     | 2     |
//! | four-way | q1 - q2 = 2     | 3     |

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{IcpcCandidate, Recording};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMode {
    TwoWay,
    FourWay,
}

impl RankMode {
    pub fn n_classes(self) -> usize {
        match self {
            RankMode::TwoWay => 2,
            RankMode::FourWay => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RankMode::TwoWay => "two_way",
            RankMode::FourWay => "four_way",
        }
    }

    /// Label of the same pair with its members swapped.
    pub fn swap_label(self, label: u8) -> u8 {
        match self {
            RankMode::TwoWay => 1 - label,
            RankMode::FourWay => 3 - label,
        }
    }
}

impl fmt::Display for RankMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_way" | "2" => Ok(RankMode::TwoWay),
            "four_way" | "4" => Ok(RankMode::FourWay),
            other => Err(Error::validation("mode", format!("unknown rank mode `{other}`"))),
        }
    }
}

pub fn rank_label(q1: i32, q2: i32, mode: RankMode) -> Result<u8> {
    if q1 == q2 {
        return Err(Error::TiedLevels(q1));
    }
    match mode {
        RankMode::TwoWay => Ok(u8::from(q1 > q2)),
        RankMode::FourWay => match q1 - q2 {
            -2 => Ok(0),
            -1 => Ok(1),
            1 => Ok(2),
            2 => Ok(3),
            d => Err(Error::validation(
                "levels",
                format!("four-way labels need |q1 - q2| in {{1, 2}}, got {}", d.abs()),
            )),
        },
    }
}

/// An ordered pair of recording (or candidate) ids. `label` is `None` for
/// unlabeled tournament pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankPair {
    pub first: String,
    pub second: String,
    pub mode: RankMode,
    pub label: Option<u8>,
}

/// Random cross-level pairs within one split.
///
/// Each of the three level-pair categories (0-1, 0-2, 1-2) is paired
/// independently; a recording appears at most once per category. Which
/// member comes first is a seeded coin flip.
pub fn make_expertise_pairs(recordings: &[Recording], seed: u64, mode: RankMode) -> Result<Vec<RankPair>> {
    let splits: BTreeSet<_> = recordings.iter().map(|r| r.split.as_str()).collect();
    if splits.len() > 1 {
        return Err(Error::validation(
            "split",
            format!("pairs must come from one split, found {splits:?}"),
        ));
    }
    let mut levels: [Vec<&str>; 3] = Default::default();
    for r in recordings {
        let level = r.expertise.ok_or_else(|| {
            Error::validation("expertise", format!("recording `{}` has no expertise level", r.id))
        })?;
        let slot = levels.get_mut(level as usize).ok_or_else(|| {
            Error::validation("expertise", format!("level {level} of `{}` out of 0..2", r.id))
        })?;
        slot.push(&r.id);
    }

    let mut rng = rng::substream(seed, rng::PAIRING);
    let mut pairs = Vec::new();
    for (lo, hi) in [(0usize, 1usize), (0, 2), (1, 2)] {
        if levels[lo].is_empty() || levels[hi].is_empty() {
            log::warn!("no recordings for level pair {lo}-{hi}; category left empty");
            continue;
        }
        let mut a = levels[lo].clone();
        let mut b = levels[hi].clone();
        a.shuffle(&mut rng);
        b.shuffle(&mut rng);
        for (x, y) in a.into_iter().zip(b) {
            let ((p1, q1), (p2, q2)) = if rng.random::<bool>() {
                ((x, lo), (y, hi))
            } else {
                ((y, hi), (x, lo))
            };
            pairs.push(RankPair {
                first: p1.to_string(),
                second: p2.to_string(),
                mode,
                label: Some(rank_label(q1 as i32, q2 as i32, mode)?),
            });
        }
    }
    Ok(pairs)
}

/// S(c): one point per round entered beyond the preliminary.
pub fn icpc_scores(candidates: &[IcpcCandidate]) -> BTreeMap<String, i32> {
    candidates
        .iter()
        .map(|c| (c.candidate_id.clone(), c.rounds_reached as i32))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IcpcPairs {
    pub pairs: Vec<RankPair>,
    /// Unordered pairs skipped because both scores are equal.
    pub ties_skipped: usize,
    /// Four-way pairs skipped because the score gap exceeds two.
    pub gap_skipped: usize,
}

/// One labeled pair per unordered candidate pair with distinct scores, in
/// candidate order. Ids are candidate ids.
pub fn make_icpc_pairs(
    candidates: &[IcpcCandidate],
    scores: &BTreeMap<String, i32>,
    mode: RankMode,
) -> Result<IcpcPairs> {
    let score = |c: &IcpcCandidate| {
        scores.get(&c.candidate_id).copied().ok_or_else(|| {
            Error::validation("scores", format!("no score for candidate `{}`", c.candidate_id))
        })
    };
    let mut out = IcpcPairs {
        pairs: Vec::new(),
        ties_skipped: 0,
        gap_skipped: 0,
    };
    for (i, a) in candidates.iter().enumerate() {
        for b in &candidates[i + 1..] {
            let (sa, sb) = (score(a)?, score(b)?);
            if sa == sb {
                out.ties_skipped += 1;
                continue;
            }
            if mode == RankMode::FourWay && (sa - sb).abs() > 2 {
                out.gap_skipped += 1;
                continue;
            }
            out.pairs.push(RankPair {
                first: a.candidate_id.clone(),
                second: b.candidate_id.clone(),
                mode,
                label: Some(rank_label(sa, sb, mode)?),
            });
        }
    }
    Ok(out)
}

/// Every ordered pair `(a, b)` with `a != b`.
pub fn make_tournament_pairs(candidates: &[String]) -> Result<Vec<(String, String)>> {
    if candidates.len() < 2 {
        return Err(Error::validation(
            "candidates",
            format!("a tournament needs at least 2 candidates, got {}", candidates.len()),
        ));
    }
    let mut pairs = Vec::with_capacity(candidates.len() * (candidates.len() - 1));
    for a in candidates {
        for b in candidates {
            if a != b {
                pairs.push((a.clone(), b.clone()));
            }
        }
    }
    Ok(pairs)
}

pub fn pairs_to_csv(pairs: &[RankPair]) -> String {
    let mut out = String::from("first_id,second_id,mode,label\n");
    for p in pairs {
        let label = p.label.map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", p.first, p.second, p.mode, label));
    }
    out
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[RankPair]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, pairs_to_csv(pairs)).map_err(|e| Error::io(path, e))
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<RankPair>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("first_id,second_id,mode,label") {
        return Err(Error::ManifestRow {
            row: 0,
            message: "pair file header must be `first_id,second_id,mode,label`".into(),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = |message: String| Error::ManifestRow { row: i + 1, message };
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != 4 {
                return Err(bad(format!("expected 4 cells, got {}", cells.len())));
            }
            let mode: RankMode = cells[2].parse().map_err(|e: Error| bad(e.to_string()))?;
            let label = if cells[3].is_empty() {
                None
            } else {
                let l: u8 = cells[3].parse().map_err(|_| bad(format!("bad label `{}`", cells[3])))?;
                if usize::from(l) >= mode.n_classes() {
                    return Err(bad(format!("label {l} out of range for {mode}")));
                }
                Some(l)
            };
            Ok(RankPair {
                first: cells[0].to_string(),
                second: cells[1].to_string(),
                mode,
                label,
            })
        })
        .collect()
}
