use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mibci_core::classify::{train_svm, train_svm_standardized, DEFAULT_TOL};
use mibci_core::dsp::{
    design_butterworth_bandpass, filter_epochs, filter_recording, welch_psd, FilterMode, PsdParams,
};
use mibci_core::eval::{cross_validate, likert_summary, paired_t_test, CSelection, PipelineConfig};
use mibci_core::experiment::{run_experiment, RunConfig};
use mibci_core::model::io::{
    encode_epochs, load_recording, read_epochs, read_markers, write_markers_tsv, write_recording_csv,
    RecordingFormat, FORMAT_VERSIONS,
};
use mibci_core::model::{extract_epochs, ClassLabel, Montage};
use mibci_core::paradigm::{plans_to_markers, CharacterCatalog, ParadigmKind, ParadigmSpec, SessionPlan};
use mibci_core::spatial::{csp_features, fit_csp, CspModel, CspModelFile, FeatureMatrix};
use mibci_core::synth::{synthesize, SynthConfig};
use serde_json::json;

use crate::output::Sink;
use crate::{BandArgs, ClassArg, Command, ModeArg, ParadigmArg, OUTPUT_DIR_ENV};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn window(values: &[f64]) -> (f64, f64) {
    (values[0], values[1])
}

fn mode(m: ModeArg) -> FilterMode {
    match m {
        ModeArg::Causal => FilterMode::Causal,
        ModeArg::ZeroPhase => FilterMode::ZeroPhase,
    }
}

/// Montage for data that carries no channel names.
fn montage_for(channels: usize, path: Option<&Path>) -> Result<Montage> {
    let montage = match path {
        Some(p) => Montage::from_csv(&read_text(p)?, "unspecified")
            .with_context(|| format!("montage {}", p.display()))?,
        None if channels == Montage::default_30().len() => Montage::default_30(),
        None => Montage::generic((1..=channels).map(|i| format!("CH{i}")).collect())?,
    };
    if montage.len() != channels {
        bail!(
            "montage has {} channels but the data has {channels}",
            montage.len()
        );
    }
    Ok(montage)
}

fn load_csp(path: &Path) -> Result<(CspModel, CspModelFile)> {
    let file: CspModelFile =
        serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok((CspModel::from_file(&file)?, file))
}

/// One value per non-comment line (last comma-separated field); a
/// non-numeric first line is treated as a header.
fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if values.is_empty() => continue,
            Err(_) => bail!("{}:{}: {field:?} is not a number", path.display(), i + 1),
        }
    }
    Ok(values)
}

pub fn execute(command: Command, dry_run: bool) -> Result<()> {
    let sink = Sink::new(dry_run, &format!("{command:?}"));
    match command {
        Command::Plan {
            paradigm,
            seed,
            runs,
            trials_per_run,
            catalog,
            out,
        } => {
            let kind = match paradigm {
                ParadigmArg::Arrow => ParadigmKind::Arrow,
                ParadigmArg::Writing => ParadigmKind::WritingTask,
            };
            let mut spec = ParadigmSpec::with_kind(kind);
            spec.runs = runs.unwrap_or(spec.runs);
            spec.trials_per_run = trials_per_run.unwrap_or(spec.trials_per_run);
            let catalog = match catalog {
                Some(p) => CharacterCatalog::from_csv(&read_text(&p)?)?,
                None => CharacterCatalog::bundled(),
            };
            let plan = SessionPlan::generate(&spec, &catalog, seed)?;
            sink.write_json(&out, &plan)
        }
        Command::Simulate {
            plan,
            cfg,
            seed,
            out,
            markers,
        } => {
            let plan = SessionPlan::from_json(&read_text(&plan)?)?;
            let mut synth = match cfg {
                Some(p) => serde_json::from_str::<SynthConfig>(&read_text(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                synth.seed = s;
            }
            let rec = synthesize(&plan.spec, &plan.trials, &synth, &Montage::default_30())?;
            let marks = plans_to_markers(&plan.trials, synth.sample_rate);
            sink.write_with(&out, |w| write_recording_csv(w, &rec, Some(&sink.hash)))?;
            sink.write_with(&markers, |w| write_markers_tsv(w, &marks, Some(&sink.hash)))
        }
        Command::Epoch {
            input,
            markers,
            window: win,
            out,
        } => {
            let rec = load_recording(&input, RecordingFormat::CsvV1)?;
            let marks = read_markers(&markers)?;
            let epochs = extract_epochs(&rec, &marks, window(&win))?;
            sink.write(&out, &encode_epochs(&epochs)?)
        }
        Command::Filter { input, band, out } => {
            let epochs = read_epochs(&input)?;
            let filter = design_butterworth_bandpass(band.order, band.low, band.high, epochs.sample_rate())?;
            let filtered = filter_epochs(&filter, &epochs, mode(band.mode))?;
            sink.write(&out, &encode_epochs(&filtered)?)
        }
        Command::Psd {
            input,
            class,
            seg_len,
            overlap,
            montage,
            out,
        } => {
            let epochs = read_epochs(&input)?;
            let montage = montage_for(epochs.n_channels(), montage.as_deref())?;
            let class = match class {
                ClassArg::L => Some(ClassLabel::LeftHand),
                ClassArg::R => Some(ClassLabel::RightHand),
                ClassArg::All => None,
            };
            let params = PsdParams {
                seg_len,
                overlap,
                ..PsdParams::default()
            };
            let psd = welch_psd(&epochs, class, params)?;
            sink.write_with(&out, |w| psd.write_csv(w, montage.channels(), Some(&sink.hash)))
        }
        Command::CspFit {
            input,
            pairs,
            ridge,
            montage,
            out,
        } => {
            let epochs = read_epochs(&input)?;
            let montage = montage_for(epochs.n_channels(), montage.as_deref())?;
            let model = fit_csp(&epochs, pairs, ridge)?;
            sink.write_json(&out, &model.to_file(montage.channels()))
        }
        Command::PatternsExport { model, montage, out } => {
            let (model, file) = load_csp(&model)?;
            let base = match montage {
                Some(p) => Montage::from_csv(&read_text(&p)?, "unspecified")?,
                None => Montage::default_30(),
            };
            let montage = base.resolve(&file.channels)?;
            sink.write_with(&out, |w| model.write_patterns_csv(w, &montage, Some(&sink.hash)))
        }
        Command::Features { input, model, out } => {
            let epochs = read_epochs(&input)?;
            let (model, _) = load_csp(&model)?;
            let features = csp_features(&model, &epochs)?;
            sink.write_with(&out, |w| {
                use std::io::Write;
                writeln!(w, "# config={}", sink.hash)?;
                features.write_csv(w)
            })
        }
        Command::Train { input, c, raw, out } => {
            let features = FeatureMatrix::from_csv(&read_text(&input)?)?;
            let model = if raw {
                train_svm(&features, c, DEFAULT_TOL)?
            } else {
                train_svm_standardized(&features, c, DEFAULT_TOL)?
            };
            println!(
                "objective {:.6} duality gap {:.3e} ({} pair updates)",
                model.objective, model.duality_gap, model.iterations
            );
            sink.write_json(&out, &model)
        }
        Command::Crossval {
            input,
            markers,
            window: win,
            band,
            pairs,
            ridge,
            c,
            inner_cv,
            repeats,
            folds,
            seed,
            out,
        } => crossval(
            &sink,
            &input,
            &markers,
            window(&win),
            &band,
            pairs,
            ridge,
            c,
            inner_cv,
            repeats,
            folds,
            seed,
            &out,
        ),
        Command::Ttest { x, y } => {
            let (a, b) = (read_values(&x)?, read_values(&y)?);
            let t = paired_t_test(&a, &b)?;
            println!(
                "paired t-test (n = {}): mean difference {:.4}, t = {:.3}, df = {}, p = {:.4}",
                t.n, t.mean_diff, t.t_statistic, t.df, t.p_two_tailed
            );
            Ok(())
        }
        Command::Likert { input } => likert(&input),
        Command::Run { config, out_dir } => run(&config, out_dir, dry_run),
    }
}

#[allow(clippy::too_many_arguments)]
fn crossval(
    sink: &Sink,
    input: &Path,
    markers: &Path,
    win: (f64, f64),
    band: &BandArgs,
    pairs: usize,
    ridge: f64,
    c: f64,
    inner_cv: bool,
    repeats: usize,
    folds: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let rec = load_recording(input, RecordingFormat::CsvV1)?;
    let marks = read_markers(markers)?;
    let filter = design_butterworth_bandpass(band.order, band.low, band.high, rec.sample_rate())?;
    let filtered = filter_recording(&filter, &rec, mode(band.mode))?;
    let epochs = extract_epochs(&filtered, &marks, win)?;
    let cfg = PipelineConfig {
        band: None,
        order: band.order,
        mode: mode(band.mode),
        pairs,
        ridge,
        c: if inner_cv {
            CSelection::InnerCv
        } else {
            CSelection::Fixed(c)
        },
        ..PipelineConfig::default()
    };
    let report = cross_validate(&epochs, &cfg, repeats, folds, seed)?;
    println!(
        "accuracy {:.1}% (sd over repeats {:.1})",
        100.0 * report.mean_accuracy,
        100.0 * report.std_accuracy
    );
    let doc = json!({
        "config": {
            "recording": input,
            "markers": markers,
            "window": win,
            "band": [band.low, band.high],
            "pipeline": cfg,
            "repeats": repeats,
            "folds": folds,
        },
        "accuracy": report.per_repeat_fold_accuracy,
        "summary": {
            "mean_accuracy": report.mean_accuracy,
            "std_accuracy": report.std_accuracy,
            "trials": epochs.len(),
        },
        "provenance": {
            "seed": seed,
            "formats": FORMAT_VERSIONS,
            "version": env!("CARGO_PKG_VERSION"),
        },
    });
    sink.write_json(out, &doc)
}

fn likert(input: &Path) -> Result<()> {
    let text = read_text(input)?;
    let mut by_condition: Vec<(String, BTreeMap<String, i64>)> = Vec::new();
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let Some((_, header)) = lines.next() else {
        bail!("{} is empty", input.display());
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns != ["subject", "condition", "response"] {
        bail!(
            "{}: expected header subject,condition,response, found {header:?}",
            input.display()
        );
    }
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [subject, condition, response] = fields[..] else {
            bail!(
                "{}:{}: expected 3 fields, found {}",
                input.display(),
                i + 1,
                fields.len()
            );
        };
        let response: i64 = response
            .parse()
            .with_context(|| format!("{}:{}: response {response:?}", input.display(), i + 1))?;
        let pos = match by_condition.iter().position(|(c, _)| c == condition) {
            Some(p) => p,
            None => {
                by_condition.push((condition.to_string(), BTreeMap::new()));
                by_condition.len() - 1
            }
        };
        if by_condition[pos]
            .1
            .insert(subject.to_string(), response)
            .is_some()
        {
            bail!(
                "{}:{}: duplicate response for {subject} in {condition}",
                input.display(),
                i + 1
            );
        }
    }
    for (condition, responses) in &by_condition {
        let values: Vec<i64> = responses.values().copied().collect();
        let s = likert_summary(&values)?;
        println!("{condition}: {s} (n = {})", values.len());
    }
    if let [(a, ra), (b, rb)] = &by_condition[..] {
        let subjects: Vec<&String> = ra.keys().filter(|s| rb.contains_key(*s)).collect();
        let x: Vec<f64> = subjects.iter().map(|s| ra[*s] as f64).collect();
        let y: Vec<f64> = subjects.iter().map(|s| rb[*s] as f64).collect();
        if subjects.len() >= 2 {
            let t = paired_t_test(&x, &y)?;
            println!(
                "{a} vs {b}: paired t = {:.3}, df = {}, p = {:.4}",
                t.t_statistic, t.df, t.p_two_tailed
            );
        }
    }
    Ok(())
}

fn run(config: &Path, out_dir: Option<PathBuf>, dry_run: bool) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(dir) = out_dir.or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from)) {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    if dry_run {
        for line in cfg.stage_plan() {
            println!("{line}");
        }
        return Ok(());
    }
    let bundle = run_experiment(&cfg)?;
    print!("{}", bundle.summary_text);
    println!(
        "wrote {} files to {}",
        bundle.files.len(),
        cfg.output_dir.display()
    );
    Ok(())
}
