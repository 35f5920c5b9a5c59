use super::*;
use proptest::prelude::*;

fn pushing() -> ScenarioConfig {
    ScenarioConfig::default_for("pushing").unwrap()
}

fn small_gen(n: usize) -> GenerationConfig {
    GenerationConfig {
        n_traj: n,
        k_frames: 10,
        k_hat: 3,
        seed: 11,
    }
}

#[test]
fn frame_indices_span_the_run() {
    let k = frame_indices(500, 10);
    assert_eq!(k.len(), 10);
    assert_eq!(k[0], 0);
    assert_eq!(k[9], 500);
    assert!(k.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(frame_indices(9, 10), (0..10).collect::<Vec<_>>());
}

#[test]
fn window_labels() {
    let (t, f) = (true, false);
    assert_eq!(label_window(&[t, t, f, t], 1), vec![t, f, f, t]);
    assert_eq!(label_window(&[t, f, t], 0), vec![t, f, t]);
    assert_eq!(label_window(&[t; 5], 3), vec![t; 5]);
    assert_eq!(label_window(&[t, t, t, t, f], 3), vec![t, f, f, f, f]);
}

#[test]
fn auc_hand_cases() {
    let s = [0.9, 0.8, 0.2, 0.1];
    assert_eq!(auc(&s, &[true, true, false, false]).unwrap(), 1.0);
    assert_eq!(auc(&s, &[false, false, true, true]).unwrap(), 0.0);
    let s = [0.9, 0.6, 0.4, 0.1];
    assert_eq!(auc(&s, &[true, false, true, false]).unwrap(), 0.75);
    assert_eq!(auc(&[0.5; 4], &[true, false, true, false]).unwrap(), 0.5);
}

#[test]
fn ap_hand_cases() {
    let s = [0.9, 0.6, 0.4, 0.1];
    let ap = average_precision(&s, &[true, false, true, false]).unwrap();
    assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
    assert!((ap - 0.8333).abs() < 1e-4);
    assert_eq!(
        average_precision(&s, &[true, true, false, false]).unwrap(),
        1.0
    );
    assert_eq!(average_precision(&s, &[true; 4]).unwrap(), 1.0);
    // equal scores keep input order
    assert_eq!(average_precision(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
    assert_eq!(average_precision(&[0.5, 0.5], &[true, false]).unwrap(), 1.0);
}

#[test]
fn degenerate_labels_are_errors() {
    assert!(matches!(
        auc(&[0.1, 0.2], &[true, true]),
        Err(EvalError::DegenerateLabels { .. })
    ));
    assert!(matches!(
        average_precision(&[0.1, 0.2], &[false, false]),
        Err(EvalError::DegenerateLabels { .. })
    ));
    assert!(auc(&[0.1], &[true, false]).is_err());
    assert!(auc(&[f64::NAN, 0.0], &[true, false]).is_err());
}

#[test]
fn median_of_odd_and_even() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    assert!(median(&[]).is_nan());
}

fn pair_count_auc(s: &[f64], l: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            if l[i] && !l[j] {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec((0i32..30).prop_map(f64::from), n),
            proptest::collection::vec(any::<bool>(), n),
        )
    })
}

proptest! {
    #[test]
    fn auc_matches_pair_counting((s, l) in scored()) {
        prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
        let a = auc(&s, &l).unwrap();
        prop_assert!((a - pair_count_auc(&s, &l)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn auc_complement_without_ties(n in 2usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let s: Vec<f64> = (0..n).map(|i| i as f64 + rng.gen::<f64>() * 0.5).collect();
        let l: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
        let not: Vec<bool> = l.iter().map(|x| !x).collect();
        prop_assert!((auc(&s, &l).unwrap() + auc(&s, &not).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rankings_ignore_increasing_transforms((s, l) in scored()) {
        prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
        let t: Vec<f64> = s.iter().map(|x| x * x * x + 3.0 * x - 7.0).collect();
        prop_assert_eq!(auc(&s, &l).unwrap(), auc(&t, &l).unwrap());
        prop_assert_eq!(average_precision(&s, &l).unwrap(), average_precision(&t, &l).unwrap());
    }

    #[test]
    fn ap_is_a_fraction((s, l) in scored()) {
        prop_assume!(l.iter().any(|&x| x));
        let ap = average_precision(&s, &l).unwrap();
        let base = l.iter().filter(|&&x| x).count() as f64 / l.len() as f64;
        prop_assert!(ap <= 1.0 + 1e-15);
        // at least the precision of the worst possible ranking
        prop_assert!(ap > 0.0 && ap >= base * base - 1e-12);
    }
}

fn dataset(n: usize) -> Dataset {
    generate_dataset(&pushing(), &small_gen(n)).unwrap()
}

#[test]
fn generation_is_deterministic_and_well_formed() {
    let a = dataset(3);
    let b = dataset(3);
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 3);
    for r in &a.records {
        assert_eq!(r.frames.len(), 10);
        assert_eq!(r.captured_labels.len(), 10);
        assert!(r.frames.windows(2).all(|w| w[0].k < w[1].k));
        assert!(r.frames.iter().all(|f| f.min_distance >= 0.0));
        // the scripted start is always captured
        assert!(r.captured_labels[0] || r.captured_labels[1..4].contains(&false));
    }
    let other = generate_dataset(
        &pushing(),
        &GenerationConfig {
            seed: 12,
            ..small_gen(3)
        },
    )
    .unwrap();
    assert_ne!(a.records, other.records);
}

#[test]
fn records_regenerate_from_their_source() {
    let d = dataset(2);
    for r in &d.records {
        let src = r.source.as_ref().unwrap();
        let again = simulate_record(&r.id, &src.config, src.controller_seed, 10, 3).unwrap();
        assert_eq!(&again, r);
        let spec = make_scenario(&src.config).unwrap();
        assert_eq!(label_captured(r, &spec, 3), r.captured_labels);
        assert_eq!(r.success_label, spec.success_contains(&r.frames[9].z));
    }
}

#[test]
fn jsonl_round_trip_is_exact() {
    let d = dataset(2);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/d.jsonl");
    write_dataset(&path, &d).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(read_dataset(&path).unwrap(), d.records);
}

#[test]
fn corrupted_line_is_reported() {
    let d = dataset(2);
    let good = serde_json::to_string(&d.records[0]).unwrap();
    let text = format!("{good}\n\n{{\"id\": 3,\n");
    match read_dataset_str(&text) {
        Err(EvalError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn perturbation_identity_and_determinism() {
    let d = dataset(2);
    for kind in PerturbationKind::ALL {
        let spec = |e: f64, seed| PerturbationSpec {
            kind,
            e_max: e,
            e_max_angular: e,
            seed,
        };
        assert_eq!(perturb_dataset(&d, &spec(0.0, 1)).unwrap(), d);
        let a = perturb_dataset(&d, &spec(0.2, 1)).unwrap();
        assert_eq!(a, perturb_dataset(&d, &spec(0.2, 1)).unwrap());
        let b = perturb_dataset(&d, &spec(0.2, 2)).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.frames.len(), rb.frames.len());
            assert_eq!(ra.captured_labels, rb.captured_labels);
        }
        if kind != PerturbationKind::Force
            || d.records
                .iter()
                .any(|r| r.frames.iter().any(|f| !f.contacts.is_empty()))
        {
            assert_ne!(a, b, "{kind}");
        }
    }
    assert!(perturb_dataset(
        &d,
        &PerturbationSpec {
            kind: PerturbationKind::Friction,
            e_max: -0.1,
            e_max_angular: 0.0,
            seed: 0
        }
    )
    .is_err());
}

#[test]
fn perturbations_stay_in_bounds() {
    let d = dataset(2);
    let f = perturb_dataset(
        &d,
        &PerturbationSpec {
            kind: PerturbationKind::Friction,
            e_max: 0.3,
            e_max_angular: 0.0,
            seed: 5,
        },
    )
    .unwrap();
    let p = perturb_dataset(
        &d,
        &PerturbationSpec {
            kind: PerturbationKind::Position,
            e_max: 0.01,
            e_max_angular: 0.0,
            seed: 5,
        },
    )
    .unwrap();
    for ((r0, rf), rp) in d.records.iter().zip(&f.records).zip(&p.records) {
        for ((a, b), c) in r0.frames.iter().zip(&rf.frames).zip(&rp.frames) {
            assert!(b.friction_offset >= 0.0 && b.friction_offset <= 0.3);
            assert!((b.mu - a.mu - b.friction_offset).abs() < 1e-12);
            assert!((c.z.object_pose.x - a.z.object_pose.x).abs() <= 0.01);
            assert!((c.z.ee_pose.y - a.z.ee_pose.y).abs() <= 0.01);
            assert_eq!(c.z.object_twist, a.z.object_twist);
        }
    }
}

fn request<'a>(metrics: &'a [Metric], settings: &'a ScoreSettings) -> ScoreRequest<'a> {
    ScoreRequest {
        metrics,
        settings,
        seed: 3,
        frame_limit: None,
        fallback: None,
        first_index: 0,
    }
}

#[test]
fn one_trajectory_yields_a_row_per_frame() {
    let d = dataset(1);
    let settings = ScoreSettings {
        m: 20,
        ..Default::default()
    };
    let rows = score_records(
        &d.records,
        &request(&[Metric::OmegaCap], &settings),
        &|_, _, _| false,
    )
    .unwrap();
    assert_eq!(rows.len(), 10);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.frame, i);
        assert_eq!(r.label, d.records[0].captured_labels[i]);
        assert!((0.0..=1.0).contains(&r.value));
    }
    let none = score_records(
        &d.records,
        &request(&[Metric::OmegaCap], &settings),
        &|_, _, _| true,
    )
    .unwrap();
    assert!(none.is_empty());
}

#[test]
fn rows_are_ordered_and_reproducible() {
    let d = dataset(2);
    let settings = ScoreSettings {
        m: 10,
        ..Default::default()
    };
    let metrics = [Metric::OmegaSuc, Metric::OmegaForce, Metric::OmegaCap];
    let req = request(&metrics, &settings);
    let a = score_records(&d.records, &req, &|_, _, _| false).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let b = pool.install(|| score_records(&d.records, &req, &|_, _, _| false).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.len(), 60);
    assert_eq!(a[0].metric, Metric::OmegaCap);
    assert_eq!(a[1].metric, Metric::OmegaForce);
    assert_eq!(a[2].metric, Metric::OmegaSuc);
    assert_eq!(a[2].label, d.records[0].success_label);
    let traj = trajectory_scores(&d.records, &a, 5).unwrap();
    assert_eq!(traj.len(), 2);
    assert!(trajectory_scores(&d.records, &a[..3], 5).is_err());
}

#[test]
fn score_csv_round_trip() {
    let rows = vec![
        ScoreRow {
            scenario: "pushing".into(),
            traj_id: "pushing-0000".into(),
            frame: 3,
            metric: Metric::OmegaEscRrt,
            value: f64::INFINITY,
            label: true,
        },
        ScoreRow {
            scenario: "pushing".into(),
            traj_id: "pushing-0000".into(),
            frame: 4,
            metric: Metric::OmegaCap,
            value: 0.1 + 0.2,
            label: false,
        },
    ];
    let mut text = format!("{SCORE_HEADER}\n");
    for r in &rows {
        text.push_str(&format_score_row(r).unwrap());
    }
    assert_eq!(parse_score_csv(&text).unwrap(), rows);
    // an interrupted final write is dropped
    let cut = format!("{text}pushing,pushing-0000,5,omega_c");
    assert_eq!(parse_score_csv(&cut).unwrap(), rows);
    let bad = format!("{text}pushing,x,1,omega_cap,0.5\n");
    match parse_score_csv(&bad) {
        Err(EvalError::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn empty_metric_list_gives_empty_report() {
    let cfg = StudyConfig {
        metrics: vec![],
        ..Default::default()
    };
    let r = run_study(&cfg).unwrap();
    assert_eq!(r, Report::default());
}

#[test]
fn study_config_validation() {
    let mut cfg = StudyConfig::default();
    cfg.m_sweep.scenarios = vec!["balance".into()];
    assert!(run_study(&cfg).is_err());
    let mut cfg = StudyConfig::default();
    cfg.perturbation.levels = 1;
    assert!(cfg.validate().is_err());
    let mut cfg = StudyConfig::default();
    cfg.scoring.k_bar = 11;
    assert!(cfg.validate().is_err());
    assert!(StudyConfig::default().validate().is_ok());
}
