use mibci_core::model::ClassLabel;
use mibci_core::paradigm::{
    generate_sequence, plans_to_markers, CharacterCatalog, CharacterEntry, CueDescriptor, ParadigmKind,
    ParadigmSpec, SessionPlan,
};

#[test]
fn every_run_is_balanced_for_a_thousand_seeds() {
    let catalog = CharacterCatalog::bundled();
    for kind in [ParadigmKind::Arrow, ParadigmKind::WritingTask] {
        let spec = ParadigmSpec::with_kind(kind);
        for seed in 0..1000 {
            let plans = generate_sequence(&spec, &catalog, seed).unwrap();
            assert_eq!(plans.len(), 100);
            for run in plans.chunks(spec.trials_per_run) {
                let right = run.iter().filter(|p| p.label == ClassLabel::RightHand).count();
                assert_eq!(right, spec.trials_per_run / 2, "seed {seed} {kind:?}");
            }
        }
    }
}

#[test]
fn first_trial_class_is_uniform_over_seeds() {
    let spec = ParadigmSpec::with_kind(ParadigmKind::Arrow);
    let catalog = CharacterCatalog::empty();
    let n = 10_000;
    let right = (0..n)
        .filter(|&seed| generate_sequence(&spec, &catalog, seed).unwrap()[0].label == ClassLabel::RightHand)
        .count();
    let freq = right as f64 / n as f64;
    assert!(
        (freq - 0.5).abs() <= 0.05,
        "first-trial RightHand frequency {freq}"
    );
}

#[test]
fn writing_cues_name_catalog_characters_without_immediate_repeats() {
    let spec = ParadigmSpec::with_kind(ParadigmKind::WritingTask);
    let catalog = CharacterCatalog::bundled();
    let ids: Vec<&str> = catalog.entries().iter().map(|e| e.id.as_str()).collect();
    for seed in 0..200 {
        let plans = generate_sequence(&spec, &catalog, seed).unwrap();
        let chars: Vec<&str> = plans
            .iter()
            .map(|p| match &p.cue {
                CueDescriptor::Character { id, side } => {
                    assert_eq!(*side, p.label);
                    id.as_str()
                }
                other => panic!("unexpected cue {other:?}"),
            })
            .collect();
        assert!(chars.iter().all(|c| ids.contains(c)));
        assert!(chars.windows(2).all(|w| w[0] != w[1]), "seed {seed}");
    }
}

#[test]
fn arrow_cues_point_to_the_cued_hand() {
    let spec = ParadigmSpec::with_kind(ParadigmKind::Arrow);
    let plans = generate_sequence(&spec, &CharacterCatalog::empty(), 3).unwrap();
    for p in &plans {
        assert_eq!(p.cue, CueDescriptor::Arrow { direction: p.label });
    }
}

#[test]
fn onsets_follow_the_trial_timeline() {
    let spec = ParadigmSpec::default();
    let plans = generate_sequence(&spec, &CharacterCatalog::bundled(), 9).unwrap();
    let period = spec.fixation_s + spec.imagery_s + spec.break_s;
    assert_eq!(period, 10.0);
    for (i, p) in plans.iter().enumerate() {
        assert_eq!(p.trial_index, i);
        assert!((p.onset_s - i as f64 * period).abs() < 1e-9);
    }
    let markers = plans_to_markers(&plans, 250.0);
    assert_eq!(markers[1].sample_index, 2500);
}

#[test]
fn same_seed_same_plan_and_json_round_trips() {
    let spec = ParadigmSpec::default();
    let catalog = CharacterCatalog::bundled();
    let a = SessionPlan::generate(&spec, &catalog, 11).unwrap();
    let b = SessionPlan::generate(&spec, &catalog, 11).unwrap();
    assert_eq!(a, b);
    assert_ne!(
        a.trials,
        SessionPlan::generate(&spec, &catalog, 12).unwrap().trials
    );
    assert_eq!(SessionPlan::from_json(&a.to_json()).unwrap(), a);
}

#[test]
fn invalid_specs_and_catalogs_are_rejected() {
    let odd = ParadigmSpec {
        trials_per_run: 49,
        ..ParadigmSpec::default()
    };
    assert!(generate_sequence(&odd, &CharacterCatalog::bundled(), 0).is_err());
    let writing = ParadigmSpec::with_kind(ParadigmKind::WritingTask);
    assert!(generate_sequence(&writing, &CharacterCatalog::empty(), 0).is_err());
    let four_strokes = CharacterCatalog::new(vec![CharacterEntry {
        id: "口".into(),
        stroke_count: 3,
    }]);
    assert!(four_strokes.is_err());
}
