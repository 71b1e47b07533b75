use bouncer_core::acceleration::{accelerate_search, map_recheck};
use bouncer_core::coexistence::coexistence_report;
use bouncer_core::config::RunConfig;
use bouncer_core::forcing::ForcingFunction;
use bouncer_core::output::{emit_outputs, read_csv, read_manifest, Cell, RunOutput, Table};
use bouncer_core::validation::{generating_relation, periodicity_check, shear_exactness};
use proptest::prelude::*;
use serde_json::json;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trip(
        g in 0.1..10.0f64,
        offset in -1.0..1.0f64,
        amps in prop::collection::vec((-0.05..0.05f64, -0.05..0.05f64), 1..4),
        seed in 0..=i64::MAX as u64,
        multistarts in 1usize..64,
        p in 1u64..50,
        q in 1u64..10,
        w0 in 0.1..100.0f64,
    ) {
        let harmonics = amps.iter().enumerate().map(|(i, &(a, b))| (i + 1, a, b)).collect();
        let cfg = RunConfig {
            g,
            mean_offset: offset,
            harmonics,
            seed,
            multistarts,
            ratio: Some(format!("{p}/{q}")),
            w0,
            ..RunConfig::default()
        };
        let back = RunConfig::from_text(&cfg.to_text().unwrap()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.rotation().unwrap(), Some((p, q)));
    }
}

#[test]
fn config_rejects_bad_input() {
    assert!(RunConfig::from_text("g = -1.0").is_err());
    assert!(RunConfig::from_text("unknown_key = 3").is_err());
    assert!(RunConfig::from_text("ratio = \"5:1\"").is_err());
    assert!(RunConfig::from_text("multistarts = 0").is_err());
    let huge = RunConfig { seed: u64::MAX, ..RunConfig::default() };
    assert!(huge.validate().is_err());
    assert!(huge.to_text().is_err());
    let partial = RunConfig::from_text("seed = 9\n").unwrap();
    assert_eq!(partial, RunConfig { seed: 9, ..RunConfig::default() });
}

fn sample_output() -> RunOutput {
    let mut t = Table::new("sample", &["n", "x", "label"]);
    for n in 0..5usize {
        t.push(vec![n.into(), Cell::Real((n as f64).sqrt() / 3.0), format!("row {n}").into()]);
    }
    RunOutput {
        command: "sample".into(),
        config: RunConfig::default(),
        tables: vec![t],
        results: json!({ "value": 1.0 / 7.0 }),
        defects: json!({ "worst": 1e-13 }),
    }
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = emit_outputs(a.path(), &sample_output(), 0.5).unwrap();
    let mb = emit_outputs(b.path(), &sample_output(), 2.5).unwrap();
    assert_eq!(ma.content_sha256, mb.content_sha256);
    assert_eq!(
        std::fs::read(a.path().join("sample.csv")).unwrap(),
        std::fs::read(b.path().join("sample.csv")).unwrap()
    );
    let back = read_manifest(&a.path().join("manifest.json")).unwrap();
    assert_eq!(back, ma);
    assert_eq!(back.results["value"].as_f64(), Some(1.0 / 7.0));
    let (header, rows) = read_csv(&a.path().join("sample.csv")).unwrap();
    assert_eq!(header, ["n", "x", "label"]);
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.len() == 3));
    assert!(!a.path().join(".lock").exists());
}

#[test]
fn outputs_change_with_configuration() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = emit_outputs(a.path(), &sample_output(), 0.0).unwrap();
    let mut other = sample_output();
    other.config.seed = 2;
    let mb = emit_outputs(b.path(), &other, 0.0).unwrap();
    assert_ne!(ma.content_sha256, mb.content_sha256);
}

#[test]
fn locked_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(".lock"), "").unwrap();
    assert!(emit_outputs(dir.path(), &sample_output(), 0.0).is_err());
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn corrupted_period_is_detected() {
    let f = ForcingFunction::sine(0.05);
    assert!(periodicity_check(|k, t| f.eval_derivative(k, t).unwrap(), 1.0).pass);
    let bad = periodicity_check(|_, t| 0.05 * (2.0 * std::f64::consts::PI * t / 1.001).sin(), 1.0);
    assert!(!bad.pass);
}

#[test]
fn tightened_thresholds_fail() {
    assert!(generating_relation(1, 1.0).pass);
    assert!(!generating_relation(1, 1e6).pass);
    assert!(shear_exactness(1.0).pass);
}

#[test]
fn acceleration_orbit_is_sound() {
    let cfg = RunConfig::default();
    let r = accelerate_search(&cfg, 4, 120).unwrap();
    assert!(r.verdict, "{}", r.note);
    assert_eq!(r.label, "found");
    let w = r.velocities();
    assert!(w[r.monotone_run] / w[0] >= 10.0);
    assert!(w[..=r.monotone_run].windows(2).all(|p| p[1] > p[0]));
    let (checked, defect) = map_recheck(cfg.g, &cfg.forcing().unwrap(), &r.orbit);
    assert!(checked > 0);
    assert!(defect.unwrap() < 1e-7);
    assert_eq!(r.orbit.len(), r.bounce_count + 1);
}

#[test]
fn acceleration_absent_without_forcing() {
    let cfg = RunConfig::default().with_forcing(&ForcingFunction::zero());
    let r = accelerate_search(&cfg, 4, 50).unwrap();
    assert!(!r.verdict);
    assert_eq!(r.label, "not found");
}

#[test]
fn free_fall_has_bounded_orbits_only() {
    let cfg = RunConfig {
        multistarts: 4,
        bounces: 30,
        ..RunConfig::default().with_forcing(&ForcingFunction::zero())
    };
    let r = coexistence_report(&cfg).unwrap();
    assert!(r.bounded.certified);
    assert!(!r.coexist);
}

#[test]
fn default_forcing_has_both() {
    let cfg = RunConfig {
        bounces: 120,
        candidates: 4,
        ..RunConfig::default()
    };
    let r = coexistence_report(&cfg).unwrap();
    assert!(r.bounded.certified, "{:?}", r.bounded.error);
    assert!(r.coexist);
}
