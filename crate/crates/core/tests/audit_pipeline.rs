use leakcheck_core::audit::{finalize_report, run_audit, AuditInputs, Label, ReviewRecord};
use leakcheck_core::calibration::far_threshold;
use leakcheck_core::embedding::{DatasetKind, DatasetRegistryEntry, Registry};
use leakcheck_core::engine::naive;
use leakcheck_core::{AuditConfig, BenchmarkScores, DedupMode, Engine, Error};
use leakcheck_testkit::{planted_leak, random_impostor_scores, PlantedLeak};
use proptest::prelude::*;

fn registry() -> Registry {
    Registry::new(vec![
        DatasetRegistryEntry {
            dataset_id: "real".into(),
            kind: DatasetKind::Real,
            generator_name: None,
            training_dataset_id: None,
            image_root: None,
        },
        DatasetRegistryEntry {
            dataset_id: "synthetic".into(),
            kind: DatasetKind::Synthetic,
            generator_name: Some("toy".into()),
            training_dataset_id: Some("real".into()),
            image_root: None,
        },
    ])
    .unwrap()
}

fn fixture() -> (PlantedLeak, BenchmarkScores) {
    let leak = planted_leak(1500, 800, 12, 64, 0.05, 21);
    let bench = BenchmarkScores::from_impostor("impostors", random_impostor_scores(20_000, 64, 5));
    (leak, bench)
}

fn config(k: usize) -> AuditConfig {
    let mut c = AuditConfig::new("synthetic", "real");
    c.k = k;
    c
}

#[test]
fn planted_pairs_rank_first() {
    let (leak, bench) = fixture();
    let reg = registry();
    let inputs = AuditInputs {
        registry: &reg,
        synthetic: &leak.synthetic,
        real: &leak.gallery,
        benchmark: Some(&bench),
        input_digests: Default::default(),
    };
    let out = run_audit(&config(30), &inputs, &Engine::default()).unwrap();
    assert_eq!(out.queue.len(), 30);
    let top: std::collections::HashSet<_> = out.queue[..leak.planted.len()]
        .iter()
        .map(|q| (q.synth_index, q.real_index))
        .collect();
    for p in &leak.planted {
        assert!(top.contains(p), "planted pair {p:?} not in top ranks");
    }
    for (n, q) in out.queue.iter().enumerate() {
        assert_eq!(q.rank, n + 1);
        assert_eq!(q.above_threshold, q.score > out.report.far_threshold.threshold);
        assert_eq!(q.synth_path, leak.synthetic.manifest()[q.synth_index].image_path);
    }
    // queue order equals the engine order
    let reference = naive::top_k_pairs(&leak.synthetic, &leak.gallery, 30);
    let got: Vec<_> = out.queue.iter().map(|q| (q.synth_index, q.real_index, q.score)).collect();
    let want: Vec<_> = reference.iter().map(|p| (p.synth_index, p.real_index, p.score)).collect();
    assert_eq!(got, want);
    assert_eq!(out.report.pairs_examined, (800 + 12) as u64 * 1500);
    assert_eq!(out.sidecar.total, 812);
}

#[test]
fn k_one_gives_global_best() {
    let (leak, bench) = fixture();
    let reg = registry();
    let inputs = AuditInputs {
        registry: &reg,
        synthetic: &leak.synthetic,
        real: &leak.gallery,
        benchmark: Some(&bench),
        input_digests: Default::default(),
    };
    let out = run_audit(&config(1), &inputs, &Engine::default()).unwrap();
    let best = naive::top_k_pairs(&leak.synthetic, &leak.gallery, 1)[0];
    assert_eq!(out.queue.len(), 1);
    assert_eq!((out.queue[0].synth_index, out.queue[0].real_index), (best.synth_index, best.real_index));
}

#[test]
fn rerun_is_identical_apart_from_timestamp() {
    let (leak, bench) = fixture();
    let reg = registry();
    let mut digests = std::collections::BTreeMap::new();
    digests.insert("synthetic".to_string(), "abc".to_string());
    let inputs = AuditInputs {
        registry: &reg,
        synthetic: &leak.synthetic,
        real: &leak.gallery,
        benchmark: Some(&bench),
        input_digests: digests,
    };
    let mut cfg = config(20);
    cfg.dedup_mode = DedupMode::UniqueReal;
    let a = run_audit(&cfg, &inputs, &Engine::default()).unwrap();
    let b = run_audit(&cfg, &inputs, &Engine::default()).unwrap();
    assert_eq!(a.report.to_json_without_timestamp(), b.report.to_json_without_timestamp());
    assert_eq!(a.queue, b.queue);
    let mut other = cfg.clone();
    other.k = 21;
    let c = run_audit(&other, &inputs, &Engine::default()).unwrap();
    assert_ne!(a.report.report_id, c.report.report_id);
}

#[test]
fn defaults_mirror_published_experiment() {
    let c = AuditConfig::new("a", "b");
    assert_eq!(c.k, 1500);
    assert_eq!(c.target_far, 1e-4);
    assert_eq!(c.required_reviewers, 1);
    let parsed: AuditConfig = serde_json::from_str(r#"{"synthetic_id":"a","real_id":"b"}"#).unwrap();
    assert_eq!(parsed, c);
}

#[test]
fn missing_inputs() {
    let (leak, bench) = fixture();
    let reg = registry();
    let mut inputs = AuditInputs {
        registry: &reg,
        synthetic: &leak.synthetic,
        real: &leak.gallery,
        benchmark: None,
        input_digests: Default::default(),
    };
    assert!(matches!(
        run_audit(&config(5), &inputs, &Engine::default()),
        Err(Error::MissingBenchmark)
    ));
    inputs.benchmark = Some(&bench);
    let mut cfg = config(5);
    cfg.real_id = "ffhq".into();
    assert!(matches!(
        run_audit(&cfg, &inputs, &Engine::default()),
        Err(Error::MissingDataset(_))
    ));
    let mut cfg = config(5);
    cfg.target_far = 1.5;
    assert!(run_audit(&cfg, &inputs, &Engine::default()).is_err());
}

fn labels_strategy(pairs: usize) -> impl Strategy<Value = Vec<(usize, usize, usize)>> {
    prop::collection::vec((0..pairs, 0usize..4, 0usize..5), 0..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn consensus_monotone_and_replayable(raw in labels_strategy(10)) {
        let leak = planted_leak(200, 40, 3, 16, 0.05, 3);
        let bench = BenchmarkScores::from_impostor("b", random_impostor_scores(500, 16, 1));
        let reg = registry();
        let inputs = AuditInputs {
            registry: &reg,
            synthetic: &leak.synthetic,
            real: &leak.gallery,
            benchmark: Some(&bench),
            input_digests: Default::default(),
        };
        let out = run_audit(&config(10), &inputs, &Engine::default()).unwrap();
        let labels: Vec<ReviewRecord> = raw
            .iter()
            .enumerate()
            .map(|(n, &(p, who, l))| ReviewRecord {
                record_id: n as u64,
                pair_id: out.queue[p].pair_id.clone(),
                reviewer_id: format!("r{who}"),
                label: Label::ALL[l],
                timestamp: chrono::DateTime::from_timestamp(n as i64, 0).unwrap(),
                supersedes: None,
            })
            .collect();
        let mut last = usize::MAX;
        for required in 1..=5 {
            let mut report = out.report.clone();
            report.config.required_reviewers = required;
            let a = finalize_report(&report, &out.queue, &labels).unwrap();
            let b = finalize_report(&report, &out.queue, &labels).unwrap();
            prop_assert_eq!(&a, &b);
            let r = &a.review;
            prop_assert!(r.consensus_leaked_count <= r.reviewed_pairs);
            prop_assert!(r.reviewed_pairs <= out.queue.len());
            prop_assert!(r.consensus_leaked_count <= last);
            prop_assert_eq!(
                r.tallies.values().sum::<u64>() as usize + r.superseded_records.len(),
                labels.len()
            );
            last = r.consensus_leaked_count;
        }
    }

    #[test]
    fn far_guarantee_on_random_sets(
        scores in prop::collection::vec(-1.0f64..1.0, 1..400),
        dup in 0usize..5,
        far_idx in 0usize..3,
    ) {
        let far = [1e-4, 1e-2, 0.2][far_idx];
        let mut imp = scores.clone();
        for i in 0..dup.min(imp.len()) { let v = imp[0]; imp[i] = v; }
        let t = far_threshold(&BenchmarkScores::from_impostor("p", imp.clone()), far).unwrap();
        let recomputed = imp.iter().filter(|&&s| s > t.threshold).count() as f64 / imp.len() as f64;
        prop_assert_eq!(recomputed, t.achieved_far);
        prop_assert!(t.achieved_far <= far);
    }
}
