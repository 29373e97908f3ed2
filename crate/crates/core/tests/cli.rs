//! The `simulate` binary, end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use openerg::descriptor::{self, Descriptor};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("descriptors")
        .join(name)
}

fn bundled_descriptors() -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> =
        fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("descriptors"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "erg" || e == "json"))
            .collect();
    out.sort();
    out
}

fn simulate(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn double_pendulum_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let desc = bundled("double_pendulum.erg");
    let mut runs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let o = simulate(dir.path(), &[desc.to_str().unwrap(), "--output", name]);
        assert!(o.status.success(), "{}", stderr(&o));
        runs.push(fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    let text = String::from_utf8(runs.remove(0)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,theta1,L1,theta2,L2,E"));
    assert_eq!(lines.count(), 10_001);
    assert!(!text.contains('\r'));
}

#[test]
fn output_defaults_to_the_descriptor_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &[bundled("gradient.erg").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("gradient.csv"));
    let text = fs::read_to_string(dir.path().join("gradient.csv")).unwrap();
    assert!(text.starts_with("t,x1,x2,q1,p1,E\n"));
}

#[test]
fn json_output_carries_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(
        dir.path(),
        &[
            bundled("open_pendulum.erg").to_str().unwrap(),
            "--steps",
            "10",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("open_pendulum.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["times"].as_array().unwrap().len(), 11);
    assert_eq!(doc["metadata"]["config"]["steps"], 10);
    assert_eq!(doc["metadata"]["config"]["method"], "rk4");
    assert_eq!(doc["metadata"]["columns"][1], "theta1");
}

#[test]
fn overrides_and_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("d.erg");
    fs::write(
        &src,
        "compose anchor ; pendulum ; discard\nsimulate { dt = 0.01, steps = 3, initial = (4.7, 0) }\n",
    )
    .unwrap();
    let o = simulate(
        dir.path(),
        &["d.erg", "--method", "euler", "--steps", "2", "--cartesian"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("t,theta1,L1,E,"));
    assert_eq!(lines[1].split(',').count(), lines[0].split(',').count());
}

#[test]
fn sweep_writes_indexed_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(
        dir.path(),
        &[
            bundled("double_pendulum.erg").to_str().unwrap(),
            "--steps",
            "50",
            "--output",
            "run.csv",
            "--sweep",
            bundled("sweep.txt").to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 0..3 {
        let path = dir.path().join(format!("run_{i:04}.csv"));
        assert_eq!(fs::read_to_string(path).unwrap().lines().count(), 52);
    }
    assert!(!dir.path().join("run_0003.csv").exists());
}

#[test]
fn malformed_descriptors_fail_with_a_location() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.erg"), "compose anchor ;; pendulum\n").unwrap();
    let o = simulate(dir.path(), &["bad.erg"]);
    assert!(!o.status.success());
    let msg = stderr(&o);
    assert!(msg.contains("line 1"), "{msg}");
    assert!(msg.starts_with("error:"));
}

#[test]
fn ill_typed_wiring_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.erg"),
        "compose pendulum ; anchor\nsimulate { dt = 0.01, steps = 1, initial = (0, 0) }\n",
    )
    .unwrap();
    let o = simulate(dir.path(), &["bad.erg"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot wire"), "{}", stderr(&o));
}

#[test]
fn missing_files_and_bad_flags_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!simulate(dir.path(), &["nope.erg"]).status.success());
    let desc = bundled("double_pendulum.erg");
    let o = simulate(dir.path(), &[desc.to_str().unwrap(), "--dt", "-1"]);
    assert!(!o.status.success());
    let o = simulate(
        dir.path(),
        &[desc.to_str().unwrap(), "--method", "leapfrog"],
    );
    assert!(!o.status.success());
}

#[test]
fn bundled_descriptors_round_trip() {
    for path in bundled_descriptors() {
        let d = descriptor::load(&path).unwrap();
        let text = d.serialize();
        let again = descriptor::parse(&text).unwrap();
        assert_eq!(d, again, "{}", path.display());
        assert_eq!(again.serialize(), text);
        let json: Descriptor = Descriptor::from_json(&d.to_json()).unwrap();
        assert_eq!(json, d);
    }
}

#[test]
fn text_and_json_forms_agree() {
    let text = descriptor::load(&bundled("double_pendulum.erg")).unwrap();
    let json = descriptor::load(&bundled("double_pendulum.json")).unwrap();
    assert_eq!(text.systems, json.systems);
    let (_, s1) = descriptor::assemble_closed(&text).unwrap();
    let (_, s2) = descriptor::assemble_closed(&json).unwrap();
    for x in [[4.0, 0.5, 5.0, -1.0], [0.1, 2.0, 3.0, 0.0]] {
        assert_eq!(s1.velocity(&x).unwrap(), s2.velocity(&x).unwrap());
    }
    let (a, b) = (text.simulate.unwrap(), json.simulate.unwrap());
    assert_eq!((a.method, a.dt, a.steps), (b.method, b.dt, b.steps));
    for (x, y) in a.initial.iter().zip(&b.initial) {
        assert!((x - y).abs() < 1e-12);
    }
}
