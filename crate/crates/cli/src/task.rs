use std::fmt;
use std::str::FromStr;

use pianojudge::manifest::{Dataset, Recording};
use pianojudge::model::{TaskKind, Target};
use pianojudge::pairing::RankMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Expertise2,
    Expertise4,
    Difficulty9,
    Difficulty3,
    TechniqueMulti,
    TechniqueSingle,
}

/// Henle grade 1..=9 to one of three merged groups.
pub fn difficulty3(grade: u8) -> u8 {
    (grade - 1) / 3
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Expertise2,
        Task::Expertise4,
        Task::Difficulty9,
        Task::Difficulty3,
        Task::TechniqueMulti,
        Task::TechniqueSingle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Expertise2 => "expertise2",
            Task::Expertise4 => "expertise4",
            Task::Difficulty9 => "difficulty9",
            Task::Difficulty3 => "difficulty3",
            Task::TechniqueMulti => "technique_multi",
            Task::TechniqueSingle => "technique_single",
        }
    }

    pub fn dataset(self) -> Dataset {
        match self {
            Task::Expertise2 | Task::Expertise4 => Dataset::Expertise,
            Task::Difficulty9 | Task::Difficulty3 => Dataset::Difficulty,
            Task::TechniqueMulti | Task::TechniqueSingle => Dataset::Techniques,
        }
    }

    pub fn kind(self) -> TaskKind {
        match self {
            Task::Expertise2 | Task::Expertise4 => TaskKind::Rank,
            Task::Difficulty9 | Task::Difficulty3 => TaskKind::Multiclass,
            Task::TechniqueMulti | Task::TechniqueSingle => TaskKind::Multilabel,
        }
    }

    pub fn output_classes(self) -> usize {
        match self {
            Task::Expertise2 => 2,
            Task::Expertise4 => 4,
            Task::Difficulty9 => 9,
            Task::Difficulty3 => 3,
            Task::TechniqueMulti | Task::TechniqueSingle => 7,
        }
    }

    pub fn rank_mode(self) -> Option<RankMode> {
        match self {
            Task::Expertise2 => Some(RankMode::TwoWay),
            Task::Expertise4 => Some(RankMode::FourWay),
            _ => None,
        }
    }

    /// Classification target of a recording; `None` for ranking tasks or
    /// unlabeled rows.
    pub fn target(self, r: &Recording) -> Option<Target> {
        match self {
            Task::Difficulty9 => r.difficulty.map(|g| Target::Class(usize::from(g - 1))),
            Task::Difficulty3 => r.difficulty.map(|g| Target::Class(usize::from(difficulty3(g)))),
            Task::TechniqueMulti | Task::TechniqueSingle => {
                r.technique_vector().map(|v| Target::Labels(v.to_vec()))
            }
            Task::Expertise2 | Task::Expertise4 => None,
        }
    }

    /// Metric names shown in reports, in report order.
    pub fn report_metrics(self) -> &'static [&'static str] {
        match self {
            Task::Expertise2 | Task::Expertise4 => &["accuracy", "macro_f1"],
            Task::Difficulty9 | Task::Difficulty3 => &["acc_0", "acc_1", "accuracy", "macro_f1"],
            Task::TechniqueMulti => &["map", "auc", "multilabel_accuracy"],
            Task::TechniqueSingle => &["single_label_accuracy", "single_label_f1"],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Task::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Task::ALL.iter().map(|t| t.as_str()).collect();
                format!("unknown task `{s}` (expected one of {})", names.join(", "))
            })
    }
}
