//! End-to-end synthetic experiments: for every simulated subject and both
//! paradigm conditions, plan a session, synthesise it, filter, epoch,
//! cross-validate the CSP + SVM chain and export spectra and patterns, then
//! compare the conditions across subjects with a paired t-test.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::{design_butterworth_bandpass, filter_recording, welch_psd, PsdEstimate, PsdParams};
use crate::error::{Error, Result};
use crate::eval::{
    cross_validate, paired_t_test, screen_subjects, CvReport, PairedTestResult, PipelineConfig, Screening,
    SubjectAccuracy, DEFAULT_SCREEN_THRESHOLD,
};
use crate::model::io::{write_markers, write_recording, FORMAT_VERSIONS};
use crate::model::{extract_epochs, ClassLabel, Montage};
use crate::paradigm::{
    plans_to_markers, CharacterCatalog, CharacterEntry, ParadigmKind, ParadigmSpec, SessionPlan,
};
use crate::spatial::fit_csp;
use crate::synth::{synthesize, SynthConfig};

pub const REPORT_FORMAT: &str = "report-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    pub name: String,
    pub paradigm: ParadigmKind,
    pub erd_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub repeats: usize,
    pub folds: usize,
    pub screen_threshold: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            repeats: 10,
            folds: 10,
            screen_threshold: DEFAULT_SCREEN_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    /// Full csv-v1 recordings; large, off by default.
    pub recordings: bool,
    pub plans: bool,
    pub psd: bool,
    pub patterns: bool,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig {
            recordings: false,
            plans: true,
            psd: true,
            patterns: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub subjects: usize,
    pub base_seed: u64,
    /// Timing shared by both conditions; `kind` is taken from each condition.
    pub paradigm: ParadigmSpec,
    /// `None` uses the bundled five-stroke characters.
    pub catalog: Option<Vec<CharacterEntry>>,
    /// Exactly two; the first is compared against the second.
    pub conditions: Vec<ConditionConfig>,
    /// Generator settings shared by all sessions; `seed` and `erd_depth` are
    /// set per session.
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
    pub psd: PsdParams,
    pub evaluation: EvaluationConfig,
    pub exports: ExportConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "experiment".into(),
            subjects: 10,
            base_seed: 0,
            paradigm: ParadigmSpec::default(),
            catalog: None,
            conditions: vec![
                ConditionConfig {
                    name: "writing".into(),
                    paradigm: ParadigmKind::WritingTask,
                    erd_depth: 0.75,
                },
                ConditionConfig {
                    name: "arrow".into(),
                    paradigm: ParadigmKind::Arrow,
                    erd_depth: 0.35,
                },
            ],
            synth: SynthConfig::default(),
            pipeline: PipelineConfig::default(),
            psd: PsdParams::default(),
            evaluation: EvaluationConfig::default(),
            exports: ExportConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn catalog(&self) -> Result<CharacterCatalog> {
        match &self.catalog {
            Some(entries) => CharacterCatalog::new(entries.clone()),
            None => Ok(CharacterCatalog::bundled()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subjects == 0 {
            return Err(Error::Config("subjects must be positive".into()));
        }
        if self.conditions.len() != 2 {
            return Err(Error::Config(format!(
                "exactly two conditions are compared, found {}",
                self.conditions.len()
            )));
        }
        if self.conditions[0].name == self.conditions[1].name {
            return Err(Error::Config("condition names must differ".into()));
        }
        for c in &self.conditions {
            let safe = !c.name.is_empty()
                && c.name
                    .chars()
                    .all(|ch| ch.is_ascii_alphanumeric() || ch == '-' || ch == '_');
            if !safe {
                return Err(Error::Config(format!(
                    "condition name {:?} must be non-empty ASCII letters, digits, '-' or '_'",
                    c.name
                )));
            }
            self.synth_for(c, 0).validate()?;
            self.spec_for(c).validate()?;
        }
        self.catalog()?;
        if self.evaluation.folds < 2 || self.evaluation.repeats == 0 {
            return Err(Error::Config("need at least one repeat and two folds".into()));
        }
        let per_class = self.paradigm.total_trials() / 2;
        if per_class < self.evaluation.folds {
            return Err(Error::Config(format!(
                "{per_class} trials per class cannot fill {} folds",
                self.evaluation.folds
            )));
        }
        if let Some((low, high)) = self.pipeline.band {
            design_butterworth_bandpass(self.pipeline.order, low, high, self.synth.sample_rate)?;
        }
        Ok(())
    }

    fn spec_for(&self, c: &ConditionConfig) -> ParadigmSpec {
        ParadigmSpec {
            kind: c.paradigm,
            ..self.paradigm.clone()
        }
    }

    fn synth_for(&self, c: &ConditionConfig, seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            erd_depth: c.erd_depth,
            ..self.synth.clone()
        }
    }

    /// SHA-256 over the canonical JSON of the config, output directory excluded.
    pub fn hash(&self) -> String {
        let mut hashed = self.clone();
        hashed.output_dir = PathBuf::new();
        short_hash(&serde_json::to_string(&hashed).expect("config serializes"))
    }

    /// Human-readable list of what `run_experiment` will do.
    pub fn stage_plan(&self) -> Vec<String> {
        let band = self.pipeline.band.map_or("none".to_string(), |(l, h)| {
            format!("{l}-{h} Hz order {}", self.pipeline.order)
        });
        let mut out = vec![format!(
            "config {} ({} subjects x {} conditions, output {})",
            self.hash(),
            self.subjects,
            self.conditions.len(),
            self.output_dir.display()
        )];
        for c in &self.conditions {
            out.push(format!(
                "condition {}: paradigm {:?}, erd_depth {}",
                c.name, c.paradigm, c.erd_depth
            ));
        }
        out.extend([
            format!(
                "plan: {} runs x {} trials",
                self.paradigm.runs, self.paradigm.trials_per_run
            ),
            format!(
                "simulate: {} Hz, noise {} uV",
                self.synth.sample_rate, self.synth.noise_scale
            ),
            format!("filter: {band}, {:?}", self.pipeline.mode),
            format!("epoch: window {:?} s", self.paradigm.feature_window),
            format!(
                "csp: {} pairs, ridge {}",
                self.pipeline.pairs, self.pipeline.ridge
            ),
            format!("svm: c {:?}", self.pipeline.c),
            format!(
                "crossval: {} x {}-fold, screening threshold {}",
                self.evaluation.repeats, self.evaluation.folds, self.evaluation.screen_threshold
            ),
            "compare: paired t-test across included subjects".to_string(),
        ]);
        out
    }
}

pub fn short_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

/// Deterministic per-stage seed.
pub fn derive_seed(base: u64, subject: usize, condition: usize, purpose: u64) -> u64 {
    let mut h = Sha256::new();
    for v in [base, subject as u64, condition as u64, purpose] {
        h.update(v.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

const SEED_PLAN: u64 = 1;
const SEED_SYNTH: u64 = 2;
const SEED_CV: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSeeds {
    pub plan: u64,
    pub synth: u64,
    pub cv: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub condition: String,
    pub seeds: SessionSeeds,
    pub cv: CvReport,
    /// Channels where the first and last CSP patterns peak (all trials).
    pub pattern_peaks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectResult {
    pub subject: String,
    pub sessions: Vec<SessionResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub name: String,
    /// Over included subjects.
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    /// Over every subject, screening ignored.
    pub mean_accuracy_all: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub conditions: Vec<ConditionSummary>,
    pub screening: Screening,
    /// First condition minus second, over included subjects.
    pub paired_test: Option<PairedTestResult>,
    pub mean_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub base_seed: u64,
    pub formats: Vec<String>,
    pub report_format: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub config: RunConfig,
    pub subjects: Vec<SubjectResult>,
    pub summary: ExperimentSummary,
    pub provenance: Provenance,
}

#[derive(Debug, Clone)]
pub struct ExperimentBundle {
    pub report: ExperimentReport,
    pub summary_text: String,
    pub files: Vec<PathBuf>,
}

struct SessionOutput {
    result: SessionResult,
    psd: Option<[PsdEstimate; 2]>,
    files: Vec<PathBuf>,
}

fn stage<T>(name: &str, inputs: &impl Serialize, r: Result<T>) -> Result<T> {
    r.map_err(|source| Error::Stage {
        stage: name.to_string(),
        input_hash: short_hash(&serde_json::to_string(inputs).unwrap_or_default()),
        source: Box::new(source),
    })
}

fn subject_name(s: usize) -> String {
    format!("S{:02}", s + 1)
}

fn run_session(
    cfg: &RunConfig,
    hash: &str,
    montage: &Montage,
    catalog: &CharacterCatalog,
    subject: usize,
    cond_index: usize,
) -> Result<SessionOutput> {
    let cond = &cfg.conditions[cond_index];
    let sname = subject_name(subject);
    let tag = format!("{sname}_{}", cond.name);
    let seeds = SessionSeeds {
        plan: derive_seed(cfg.base_seed, subject, cond_index, SEED_PLAN),
        synth: derive_seed(cfg.base_seed, subject, cond_index, SEED_SYNTH),
        cv: derive_seed(cfg.base_seed, subject, cond_index, SEED_CV),
    };
    let spec = cfg.spec_for(cond);
    let synth_cfg = cfg.synth_for(cond, seeds.synth);
    let out = &cfg.output_dir;
    let mut files = Vec::new();

    let plan = stage(
        &format!("plan {tag}"),
        &(&spec, seeds.plan),
        SessionPlan::generate(&spec, catalog, seeds.plan),
    )?;
    let markers = plans_to_markers(&plan.trials, synth_cfg.sample_rate);
    if cfg.exports.plans {
        let path = out.join("plans").join(format!("{tag}.json"));
        write_json_with_hash(&path, &plan, hash)?;
        files.push(path);
        let path = out.join("markers").join(format!("{tag}.tsv"));
        write_markers(&path, &markers, Some(hash))?;
        files.push(path);
    }

    let rec = stage(
        &format!("simulate {tag}"),
        &(&synth_cfg, seeds.plan),
        synthesize(&spec, &plan.trials, &synth_cfg, montage),
    )?;
    if cfg.exports.recordings {
        let path = out.join("recordings").join(format!("{tag}.csv"));
        write_recording(&path, &rec, Some(hash))?;
        files.push(path);
    }

    let filtered = match cfg.pipeline.band {
        Some((low, high)) => stage(&format!("filter {tag}"), &(&cfg.pipeline, seeds.synth), {
            design_butterworth_bandpass(cfg.pipeline.order, low, high, rec.sample_rate())
                .and_then(|f| filter_recording(&f, &rec, cfg.pipeline.mode))
        })?,
        None => rec,
    };
    let epochs = stage(
        &format!("epoch {tag}"),
        &(spec.feature_window, seeds.synth),
        extract_epochs(&filtered, &markers, spec.feature_window),
    )?;
    drop(filtered);

    let cv_pipeline = PipelineConfig {
        band: None,
        ..cfg.pipeline.clone()
    };
    let cv = stage(
        &format!("crossval {tag}"),
        &(&cv_pipeline, &cfg.evaluation, seeds.cv),
        cross_validate(
            &epochs,
            &cv_pipeline,
            cfg.evaluation.repeats,
            cfg.evaluation.folds,
            seeds.cv,
        ),
    )?;

    let csp = stage(
        &format!("csp-fit {tag}"),
        &(cfg.pipeline.pairs, cfg.pipeline.ridge, seeds.synth),
        fit_csp(&epochs, cfg.pipeline.pairs, cfg.pipeline.ridge),
    )?;
    let n = csp.n_channels();
    let pattern_peaks = [0, n - 1]
        .iter()
        .map(|&j| montage.channels()[csp.pattern_peak(j)].clone())
        .collect();
    if cfg.exports.patterns {
        let path = out.join("patterns").join(format!("{tag}.csv"));
        write_with(&path, |w| csp.write_patterns_csv(w, montage, Some(hash)))?;
        files.push(path);
    }

    let psd = if cfg.exports.psd {
        let by_class = |label| {
            stage(
                &format!("psd {tag}"),
                &(&cfg.psd, seeds.synth),
                welch_psd(&epochs, Some(label), cfg.psd),
            )
        };
        Some([by_class(ClassLabel::LeftHand)?, by_class(ClassLabel::RightHand)?])
    } else {
        None
    };

    Ok(SessionOutput {
        result: SessionResult {
            condition: cond.name.clone(),
            seeds,
            cv,
            pattern_peaks,
        },
        psd,
        files,
    })
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(path, e))?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes `value` as pretty JSON with a top-level `config_hash` field added.
fn write_json_with_hash(path: &Path, value: &impl Serialize, hash: &str) -> Result<()> {
    let mut json = serde_json::to_value(value).map_err(|e| Error::Validation(e.to_string()))?;
    if let serde_json::Value::Object(map) = &mut json {
        map.insert("config_hash".into(), serde_json::Value::String(hash.to_string()));
    }
    let text = serde_json::to_string_pretty(&json).map_err(|e| Error::Validation(e.to_string()))?;
    write_with(path, |w| writeln!(w, "{text}"))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Element-wise mean of per-subject spectra.
fn average_psd(estimates: &[&PsdEstimate]) -> PsdEstimate {
    let mut avg = estimates[0].clone();
    for ch in 0..avg.power.len() {
        for bin in 0..avg.freqs.len() {
            avg.power[ch][bin] =
                estimates.iter().map(|e| e.power[ch][bin]).sum::<f64>() / estimates.len() as f64;
        }
    }
    avg
}

pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentBundle> {
    cfg.validate()?;
    let hash = cfg.hash();
    let montage = Montage::default_30();
    let catalog = cfg.catalog()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let jobs: Vec<(usize, usize)> = (0..cfg.subjects)
        .flat_map(|s| (0..cfg.conditions.len()).map(move |c| (s, c)))
        .collect();
    let outputs: Vec<SessionOutput> = jobs
        .par_iter()
        .map(|&(s, c)| run_session(cfg, &hash, &montage, &catalog, s, c))
        .collect::<Result<_>>()?;

    let mut files = Vec::new();
    let mut subjects: Vec<SubjectResult> = (0..cfg.subjects)
        .map(|s| SubjectResult {
            subject: subject_name(s),
            sessions: Vec::new(),
        })
        .collect();
    for ((s, _), o) in jobs.iter().zip(&outputs) {
        subjects[*s].sessions.push(o.result.clone());
        files.extend(o.files.iter().cloned());
    }

    if cfg.exports.psd {
        for (ci, cond) in cfg.conditions.iter().enumerate() {
            for (k, label) in ClassLabel::BOTH.iter().enumerate() {
                let per_subject: Vec<&PsdEstimate> = jobs
                    .iter()
                    .zip(&outputs)
                    .filter(|((_, c), _)| *c == ci)
                    .filter_map(|(_, o)| o.psd.as_ref().map(|p| &p[k]))
                    .collect();
                let avg = average_psd(&per_subject);
                let path = out.join(format!("psd_{}_{}.csv", cond.name, label));
                write_with(&path, |w| avg.write_csv(w, montage.channels(), Some(&hash)))?;
                files.push(path);
            }
        }
    }

    let accuracy = |s: &SubjectResult, c: usize| s.sessions[c].cv.mean_accuracy;
    let screening = screen_subjects(
        &subjects
            .iter()
            .map(|s| SubjectAccuracy {
                subject: s.subject.clone(),
                first: accuracy(s, 0),
                second: accuracy(s, 1),
            })
            .collect::<Vec<_>>(),
        cfg.evaluation.screen_threshold,
    );
    let included: Vec<&SubjectResult> = subjects
        .iter()
        .filter(|s| screening.included.contains(&s.subject))
        .collect();
    let first: Vec<f64> = included.iter().map(|s| accuracy(s, 0)).collect();
    let second: Vec<f64> = included.iter().map(|s| accuracy(s, 1)).collect();
    let conditions = cfg
        .conditions
        .iter()
        .zip([&first, &second])
        .enumerate()
        .map(|(ci, (c, v))| {
            let (mean, sd) = if v.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_sd(v)
            };
            let all: Vec<f64> = subjects.iter().map(|s| accuracy(s, ci)).collect();
            ConditionSummary {
                name: c.name.clone(),
                mean_accuracy: mean,
                sd_accuracy: sd,
                mean_accuracy_all: mean_sd(&all).0,
            }
        })
        .collect::<Vec<_>>();
    let paired_test = if included.len() >= 2 {
        paired_t_test(&first, &second).ok()
    } else {
        None
    };
    let summary = ExperimentSummary {
        mean_difference: conditions[0].mean_accuracy - conditions[1].mean_accuracy,
        conditions,
        screening,
        paired_test,
    };

    let report = ExperimentReport {
        config_hash: hash.clone(),
        config: cfg.clone(),
        subjects,
        summary,
        provenance: Provenance {
            base_seed: cfg.base_seed,
            formats: FORMAT_VERSIONS.iter().map(|s| s.to_string()).collect(),
            report_format: REPORT_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    let report_path = out.join("report.json");
    write_json_with_hash(&report_path, &report, &hash)?;
    files.push(report_path);

    let summary_text = render_summary(&report);
    let summary_path = out.join("summary.txt");
    write_with(&summary_path, |w| w.write_all(summary_text.as_bytes()))?;
    files.push(summary_path);

    Ok(ExperimentBundle {
        report,
        summary_text,
        files,
    })
}

pub fn render_summary(report: &ExperimentReport) -> String {
    let cfg = &report.config;
    let (a, b) = (&cfg.conditions[0].name, &cfg.conditions[1].name);
    let mut s = String::new();
    let _ = writeln!(s, "# config={}", report.config_hash);
    let _ = writeln!(
        s,
        "{}: {} subjects, {}x{}-fold CV",
        cfg.name, cfg.subjects, cfg.evaluation.repeats, cfg.evaluation.folds
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<8} {:>10} {:>10}  status", "subject", a, b);
    for subj in &report.subjects {
        let status = if report.summary.screening.excluded.contains(&subj.subject) {
            "excluded"
        } else {
            "included"
        };
        let _ = writeln!(
            s,
            "{:<8} {:>9.1}% {:>9.1}%  {status}",
            subj.subject,
            100.0 * subj.sessions[0].cv.mean_accuracy,
            100.0 * subj.sessions[1].cv.mean_accuracy
        );
    }
    let _ = writeln!(s);
    for c in &report.summary.conditions {
        let _ = writeln!(
            s,
            "{:<10} mean {:.1}% (sd {:.1}), all subjects {:.1}%",
            c.name,
            100.0 * c.mean_accuracy,
            100.0 * c.sd_accuracy,
            100.0 * c.mean_accuracy_all
        );
    }
    let _ = writeln!(
        s,
        "difference {:+.1} points ({a} - {b})",
        100.0 * report.summary.mean_difference
    );
    match &report.summary.paired_test {
        Some(t) => {
            let _ = writeln!(
                s,
                "paired t-test: t = {:.3}, df = {}, p = {:.4}",
                t.t_statistic, t.df, t.p_two_tailed
            );
        }
        None => {
            let _ = writeln!(s, "paired t-test: not enough included subjects");
        }
    }
    s
}
