use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn semap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"
seed = 4
max_iterations = 6
strategy = "semantic"

[environment]
builtin = "maze_b"

[sensor]
rays = 36
r_max = 4.0
phi_plus = 0.4
psi_plus = 2.0
phi_minus = -1.5
range_sigma = 0.03
misclass_prob = 0.2
"#;

#[test]
fn run_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = configs().join("maze_a.toml");
    let o = semap(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "entropy_vs_distance.csv",
        "plan_log.jsonl",
        "final_map.pgm",
        "final_map.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let header = std::fs::read_to_string(out.join("entropy_vs_distance.csv")).unwrap();
    assert!(header.starts_with(
        "iteration,distance,entropy,precision_1,precision_2,precision_3,precision_4\n"
    ));

    let manifest = out.join("manifest.json");
    let o = semap(&["verify", "--manifest", manifest.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    std::fs::write(out.join("plan_log.jsonl"), "tampered\n").unwrap();
    let o = semap(&["verify", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("plan_log.jsonl"));
}

#[test]
fn octree_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[octree]\nmax_depth = 6\n");
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("out");
    let o = semap(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bin = std::fs::read(out.join("octree.bin")).unwrap();
    assert_eq!(&bin[..4], b"SOCT");
    let stats: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("octree_stats.json")).unwrap()).unwrap();
    assert!(stats["leaf_count"].as_u64().unwrap() > 0);

    let shallow = write_config(dir.path(), &format!("{SMALL}\n[octree]\nmax_depth = 5\n"));
    let o = semap(&[
        "run",
        "--config",
        shallow.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("octree.max_depth"));
}

#[test]
fn config_errors_exit_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (SMALL.replace("rays = 36", "rays = -1"), "sensor.rays"),
        (
            SMALL.replace("misclass_prob = 0.2", "misclass_prob = 1.5"),
            "sensor.misclass_prob",
        ),
        (
            SMALL.replace("\"maze_b\"", "\"atlantis\""),
            "environment.builtin",
        ),
        (format!("{SMALL}\n[start]\nx = 0.1\ny = 0.1\n"), "start"),
    ];
    for (body, path) in cases {
        let cfg = write_config(dir.path(), &body);
        let o = semap(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2), "{path}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(path), "{path}: {err}");
    }
    let o = semap(&["run", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = semap(&["bench", "--env", "maze_a"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn csv_environment_and_strategy_override() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = vec!["1,1,1,1,1,1,1,1".to_string()];
    for _ in 0..5 {
        rows.push("1,0,0,0,0,0,2,1".to_string());
    }
    rows.push("1,1,1,1,1,1,1,1".to_string());
    std::fs::write(dir.path().join("room.csv"), rows.join("\n")).unwrap();
    let body = SMALL
        .replace(
            "builtin = \"maze_b\"",
            "file = \"room.csv\"\nresolution = 0.5",
        )
        .replace("psi_plus = 2.0", "psi_plus = [2.0, 2.0]");
    let cfg = write_config(dir.path(), &body);
    let out = dir.path().join("out");
    let o = semap(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--strategy",
        "frontier",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(out.join("plan_log.jsonl")).unwrap();
    assert!(log.lines().all(|l| l.contains("\"strategy\":\"frontier\"")));
}
