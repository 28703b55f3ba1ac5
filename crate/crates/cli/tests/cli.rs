use std::path::Path;
use std::process::{Command, Output};

fn interlace(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_interlace"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const ORIGIN: &str = r#"
seed = 11

[window]
kind = "points"
points = [[0, 0, 0]]

[solver]
radius = 8

[sampling]
runs = 300
"#;

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn potential_on_origin_and_empty_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "origin.toml", ORIGIN);
    let out = dir.path().join("origin");
    let o = interlace(&["potential"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cap = json(&out.join("capacity.json"));
    let ext = cap["cap_extrapolated"].as_f64().unwrap();
    assert!((ext - 0.659463).abs() < 0.01 * 0.659463, "{ext}");
    assert!(cap["header"]["config_hash"].is_string());
    let eq = std::fs::read_to_string(out.join("equilibrium.csv")).unwrap();
    assert!(eq.contains("\n0,0,0,"));

    let cfg = write_config(dir.path(), "empty.toml", &ORIGIN.replace("kind = \"points\"\npoints = [[0, 0, 0]]", "kind = \"empty\""));
    let out = dir.path().join("empty");
    let o = interlace(&["potential"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out.join("capacity.json"))["cap_extrapolated"].as_f64(), Some(0.0));
    let eq = std::fs::read_to_string(out.join("equilibrium.csv")).unwrap();
    let data: Vec<&str> = eq.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data, vec!["x1,x2,x3,value"]);
}

#[test]
fn malformed_config_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &ORIGIN.replace("radius = 8", "radius = \"eight\""));
    let out = dir.path().join("out");
    let o = interlace(&["potential"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("solver.radius"), "{err}");
    assert!(!out.exists());

    let cfg = write_config(dir.path(), "dim.toml", &format!("dimension = 2\n{ORIGIN}"));
    let o = interlace(&["classical"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension"));

    let o = interlace(&["potential"], &dir.path().join("missing.toml"), &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_too_small_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = ORIGIN.replace("kind = \"points\"\npoints = [[0, 0, 0]]", "kind = \"ball\"\nradius2 = 100");
    let cfg = write_config(dir.path(), "small.toml", &body);
    let o = interlace(&["potential"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn non_convergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let body = ORIGIN.replace("radius = 8", "radius = 8\nmax_sweeps = 2\ntol = 1e-14");
    let cfg = write_config(dir.path(), "slow.toml", &body);
    let o = interlace(&["potential"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sampling_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "origin.toml", &ORIGIN.replace("runs = 300", "runs = 300\ndump_paths = 2"));
    for cmd in ["classical", "twosided"] {
        let a = dir.path().join(format!("{cmd}_a"));
        let b = dir.path().join(format!("{cmd}_b"));
        let o = interlace(&[cmd], &cfg, &a);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = interlace(&[cmd, "--workers", "3"], &cfg, &b);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let name = format!("{cmd}_manifest.json");
        let ma = std::fs::read_to_string(a.join(&name)).unwrap();
        assert_eq!(ma, std::fs::read_to_string(b.join(&name)).unwrap());
        assert!(a.join("paths").join(format!("{cmd}_run0_0.txt")).exists() || {
            let m = json(&a.join(&name));
            m["samples"][0]["trajectories"].as_array().unwrap().is_empty()
        });

        let c = dir.path().join(format!("{cmd}_c"));
        let o = interlace(&[cmd, "--seed", "12"], &cfg, &c);
        assert!(o.status.success());
        assert_ne!(ma, std::fs::read_to_string(c.join(&name)).unwrap());
    }
}

#[test]
fn zero_level_gives_an_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.toml", &format!("level = 0.0\n{ORIGIN}"));
    for cmd in ["classical", "twosided"] {
        let out = dir.path().join(cmd);
        let o = interlace(&[cmd], &cfg, &out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let m = json(&out.join(format!("{cmd}_manifest.json")));
        assert_eq!(m["count_mean"].as_f64(), Some(0.0));
        for s in m["samples"].as_array().unwrap() {
            assert!(s["trajectories"].as_array().unwrap().is_empty());
        }
    }
}

#[test]
fn compare_passes_at_equal_levels_and_fails_when_mis_set() {
    let dir = tempfile::tempdir().unwrap();
    let body = ORIGIN.replace("runs = 300", "runs = 2000");
    let cfg = write_config(dir.path(), "cmp.toml", &body);
    let out = dir.path().join("ok");
    let o = interlace(&["compare"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report = json(&out.join("compare.json"));
    assert_eq!(report["pass"], true);
    assert!(out.join("compare.csv").exists());

    let cfg = write_config(dir.path(), "mis.toml", &format!("{body}\n[compare]\npalm_level = 2.0\n"));
    let out = dir.path().join("mis");
    let o = interlace(&["compare"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&out.join("compare.json"))["pass"], false);
}

#[test]
fn reversal_on_an_empty_sample_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.toml", &format!("level = 0.0\n{ORIGIN}"));
    let out = dir.path().join("rev");
    let o = interlace(&["reversal"], &cfg, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&out.join("reversal.json"))["pass"], true);
}
