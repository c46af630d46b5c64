//! Trial scheduling for the arrow-cue and character-writing paradigms.
//!
//! A trial is a fixation period, an imagery period starting with the cue and
//! a blank break. Trials follow one another with no gap, runs follow one
//! another with no gap, and each run holds the same number of left and right
//! trials in a seeded random order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::io::PLAN_FORMAT;
use crate::model::{seconds_to_samples, ClassLabel, EventMarker};

const DEFAULT_CATALOG_CSV: &str = include_str!("../data/characters.csv");

/// Number of strokes every catalog character must have.
pub const STROKES_PER_CHARACTER: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParadigmKind {
    Arrow,
    #[serde(alias = "writing")]
    WritingTask,
}

impl std::str::FromStr for ParadigmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arrow" => Ok(ParadigmKind::Arrow),
            "writing" | "writing_task" => Ok(ParadigmKind::WritingTask),
            other => Err(Error::Config(format!("unknown paradigm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParadigmSpec {
    pub kind: ParadigmKind,
    pub fixation_s: f64,
    pub imagery_s: f64,
    pub break_s: f64,
    /// Analysis window relative to trial onset.
    pub feature_window: (f64, f64),
    pub runs: usize,
    pub trials_per_run: usize,
}

impl Default for ParadigmSpec {
    fn default() -> Self {
        ParadigmSpec {
            kind: ParadigmKind::WritingTask,
            fixation_s: 2.0,
            imagery_s: 6.0,
            break_s: 2.0,
            feature_window: (3.0, 7.0),
            runs: 2,
            trials_per_run: 50,
        }
    }
}

impl ParadigmSpec {
    pub fn with_kind(kind: ParadigmKind) -> Self {
        ParadigmSpec {
            kind,
            ..Default::default()
        }
    }

    pub fn trial_duration_s(&self) -> f64 {
        self.fixation_s + self.imagery_s + self.break_s
    }

    pub fn total_trials(&self) -> usize {
        self.runs * self.trials_per_run
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fixation_s", self.fixation_s),
            ("imagery_s", self.imagery_s),
            ("break_s", self.break_s),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be a non-negative duration, got {v}"
                )));
            }
        }
        if self.trial_duration_s() <= 0.0 {
            return Err(Error::Config("trial duration must be positive".into()));
        }
        let (start, end) = self.feature_window;
        let active = self.fixation_s + self.imagery_s;
        if !(0.0 <= start && start < end && end <= active) {
            return Err(Error::Config(format!(
                "feature window ({start}, {end}) must lie within [0, {active}] s and be non-empty"
            )));
        }
        if self.runs == 0 || self.trials_per_run == 0 {
            return Err(Error::Config("runs and trials_per_run must be positive".into()));
        }
        if !self.trials_per_run.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "trials_per_run must be even for balanced classes, got {}",
                self.trials_per_run
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterEntry {
    pub id: String,
    pub stroke_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CharacterCatalog {
    entries: Vec<CharacterEntry>,
}

impl CharacterCatalog {
    pub fn new(entries: Vec<CharacterEntry>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|e| e.stroke_count != STROKES_PER_CHARACTER) {
            return Err(Error::Config(format!(
                "character {:?} has {} strokes, expected {STROKES_PER_CHARACTER}",
                bad.id, bad.stroke_count
            )));
        }
        Ok(CharacterCatalog { entries })
    }

    pub fn empty() -> Self {
        CharacterCatalog { entries: vec![] }
    }

    /// A small bundled set of five-stroke characters.
    pub fn bundled() -> Self {
        Self::from_csv(DEFAULT_CATALOG_CSV).expect("bundled catalog is valid")
    }

    /// Parses `character,strokes` rows after a header line.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, strokes) = line
                .split_once(',')
                .ok_or_else(|| Error::parse(format!("line {}", i + 1), "expected character,strokes"))?;
            let stroke_count = strokes.trim().parse().map_err(|_| {
                Error::parse(format!("line {}", i + 1), format!("bad stroke count {strokes:?}"))
            })?;
            entries.push(CharacterEntry {
                id: id.trim().to_string(),
                stroke_count,
            });
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[CharacterEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CueDescriptor {
    Arrow { direction: ClassLabel },
    Character { id: String, side: ClassLabel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    #[serde(rename = "trial")]
    pub trial_index: usize,
    pub label: ClassLabel,
    pub cue: CueDescriptor,
    pub onset_s: f64,
}

/// Builds the full session: `runs * trials_per_run` trials, balanced per run.
pub fn generate_sequence(
    spec: &ParadigmSpec,
    catalog: &CharacterCatalog,
    seed: u64,
) -> Result<Vec<TrialPlan>> {
    spec.validate()?;
    if spec.kind == ParadigmKind::WritingTask && catalog.is_empty() {
        return Err(Error::Config(
            "writing-task paradigm needs a non-empty character catalog".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = spec.trials_per_run / 2;
    let mut labels = Vec::with_capacity(spec.total_trials());
    for _ in 0..spec.runs {
        let mut run: Vec<ClassLabel> = std::iter::repeat_n(ClassLabel::LeftHand, half)
            .chain(std::iter::repeat_n(ClassLabel::RightHand, half))
            .collect();
        run.shuffle(&mut rng);
        labels.extend(run);
    }

    let characters = match spec.kind {
        ParadigmKind::Arrow => Vec::new(),
        ParadigmKind::WritingTask => character_sequence(catalog, labels.len(), &mut rng),
    };

    let spacing = spec.trial_duration_s();
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| TrialPlan {
            trial_index: i,
            label,
            cue: match spec.kind {
                ParadigmKind::Arrow => CueDescriptor::Arrow { direction: label },
                ParadigmKind::WritingTask => CueDescriptor::Character {
                    id: characters[i].clone(),
                    side: label,
                },
            },
            onset_s: i as f64 * spacing,
        })
        .collect())
}

/// Successive shuffled passes through the catalog. A pass whose first entry
/// would repeat the previous trial's character is rotated by one.
fn character_sequence(catalog: &CharacterCatalog, n: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let ids: Vec<&str> = catalog.entries().iter().map(|e| e.id.as_str()).collect();
    let mut out: Vec<String> = Vec::with_capacity(n);
    while out.len() < n {
        let mut pass = ids.clone();
        pass.shuffle(rng);
        if ids.len() >= 2 && out.last().map(String::as_str) == Some(pass[0]) {
            pass.rotate_left(1);
        }
        out.extend(pass.into_iter().map(str::to_string));
    }
    out.truncate(n);
    out
}

pub fn plans_to_markers(plans: &[TrialPlan], sample_rate: f64) -> Vec<EventMarker> {
    plans
        .iter()
        .map(|p| EventMarker {
            sample_index: seconds_to_samples(p.onset_s, sample_rate).max(0) as usize,
            label: p.label,
            trial_index: p.trial_index,
        })
        .collect()
}

/// The `plan-v1` JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub format: String,
    pub spec: ParadigmSpec,
    pub seed: u64,
    pub trials: Vec<TrialPlan>,
}

impl SessionPlan {
    pub fn generate(spec: &ParadigmSpec, catalog: &CharacterCatalog, seed: u64) -> Result<Self> {
        Ok(SessionPlan {
            format: PLAN_FORMAT.to_string(),
            spec: spec.clone(),
            seed,
            trials: generate_sequence(spec, catalog, seed)?,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: SessionPlan = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
        if plan.format != PLAN_FORMAT {
            return Err(Error::Validation(format!(
                "unsupported plan format {:?}, expected {PLAN_FORMAT}",
                plan.format
            )));
        }
        plan.spec.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}
