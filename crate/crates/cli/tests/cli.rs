use std::path::Path;
use std::process::{Command, Output};

fn bouncer(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bouncer"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BOUNCER_OUT")
        .output()
        .expect("binary runs")
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn help_lists_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = bouncer(&["orbit", "--help"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("n,t,w,energy,map_step_defect"));
}

#[test]
fn orbit_matches_schema_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = bouncer(&["orbit", "--bounces", "30"], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let rows = lines(&a.path().join("orbit.csv"));
    assert_eq!(rows[0], "n,t,w,energy,map_step_defect");
    assert_eq!(rows.len(), 32);
    assert!(rows.iter().all(|r| r.split(',').count() == 5));
    assert_eq!(
        std::fs::read(a.path().join("orbit.csv")).unwrap(),
        std::fs::read(b.path().join("orbit.csv")).unwrap()
    );
    let (ma, mb) = (manifest(a.path()), manifest(b.path()));
    assert_eq!(ma["content_sha256"], mb["content_sha256"]);
    assert_eq!(ma["command"], "orbit");
    assert_eq!(ma["seed"], 1);
    assert!(ma["defects"]["max_map_step_defect"].as_f64().unwrap() < 1e-9);
}

#[test]
fn config_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "ratio = \"11/2\"\nmultistarts = 4\nharmonics = [[1, 0.0, 0.02]]\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = bouncer(&["mather", "--config", cfg.to_str().unwrap()], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&out_dir.join("mather.csv"));
    assert_eq!(rows[0], "i,t,gap,energy");
    assert_eq!(rows.len(), 3);
    assert_eq!(manifest(&out_dir)["config"]["ratio"], "11/2");
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "g = -2.0\n").unwrap();
    let out = bouncer(&["orbit", "--config", bad.to_str().unwrap()], &dir.path().join("a"));
    assert_eq!(out.status.code(), Some(1));
    let out = bouncer(&["mather"], &dir.path().join("b"));
    assert_eq!(out.status.code(), Some(1));
    let out = bouncer(&["no-such-command"], &dir.path().join("c"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_validation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    std::fs::write(&cfg, "tolerance_scale = 1e12\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = bouncer(&["validate", "--config", cfg.to_str().unwrap()], &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let rows = lines(&out_dir.join("validation.csv"));
    assert_eq!(rows[0], "criterion,name,check,measured,threshold,pass");
    assert!(rows.iter().any(|r| r.ends_with(",false")));
    assert_eq!(manifest(&out_dir)["results"]["passed"], false);
}
