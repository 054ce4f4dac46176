use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fk-ground"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_then_report_on_the_linear_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = configs().join("zero.toml");
    let r = fk(&["verify", "-c", arg(&cfg), "-o", arg(out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["coverage"]["minimizations"], 315);
    let gs = std::fs::read_to_string(out.join("groundstate.csv")).unwrap();
    assert!(gs.starts_with("beta,window_size,window,gamma_star,stationarity,iterations,verdict"));
    assert_eq!(gs.lines().count(), 316);
    assert!(out.join("foliation.csv").exists() && out.join("graph_edges.txt").exists());

    let r = fk(&["report", "-c", arg(&cfg), "-o", arg(out)]);
    assert_eq!(r.status.code(), Some(0));
    let per_window = std::fs::read_to_string(out.join("plot_gamma_vs_window.csv")).unwrap();
    assert_eq!(per_window.lines().count(), 16);
    assert!(out.join("plot_ordering_margin.csv").exists());
    assert!(!out.join("plot_hull_section.csv").exists());
}

#[test]
fn report_without_inputs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = fk(&["report", "-c", arg(&configs().join("zero.toml")), "-o", arg(dir.path())]);
    assert_eq!(r.status.code(), Some(3));
    let err = json(&dir.path().join("error.json"));
    assert_eq!(err["kind"], "missing_input");
    assert_eq!(err["exit_code"], 3);
}

#[test]
fn resonant_medium_is_a_hypothesis_failure() {
    let dir = tempfile::tempdir().unwrap();
    let r = fk(&["solve-hull", "-c", arg(&configs().join("resonant.toml")), "-o", arg(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
    let err = json(&dir.path().join("error.json"));
    assert_eq!(err["kind"], "resonance");
    assert!(!dir.path().join("hull.toml").exists());
}

#[test]
fn antiferromagnetic_model_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("antiferro.toml");
    let r = fk(&["verify", "-c", arg(&cfg), "-o", arg(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(json(&dir.path().join("error.json"))["hypothesis"], "ferromagnetic");
    let r = fk(&["check-model", "-c", arg(&cfg), "-o", arg(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn subcritical_hull_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = configs().join("qp_subcritical.toml");
    let r = fk(&["solve-hull", "-c", arg(&cfg), "-o", arg(out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let s = json(&out.join("hull_summary.json"));
    assert!(s["residual"].as_f64().unwrap() < 1e-12);
    assert!(s["monotonicity_margin"].as_f64().unwrap() > 0.0);
    assert!(out.join("hull_convergence.csv").exists());

    let r = fk(&["verify", "-c", arg(&cfg), "-o", arg(out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
    let r = fk(&["report", "-c", arg(&cfg), "-o", arg(out)]);
    assert_eq!(r.status.code(), Some(0));
    let section = std::fs::read_to_string(out.join("plot_hull_section.csv")).unwrap();
    assert_eq!(section.lines().count(), 257);
    for line in section.lines().skip(1) {
        let margin: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(margin > 0.0);
    }
}

#[test]
fn contact_scenario_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    let r = fk(&[
        "contact",
        arg(&configs().join("contact_demo.scenario.toml")),
        "-c",
        arg(&configs().join("zero.toml")),
        "-o",
        arg(dir.path()),
    ]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let c = json(&dir.path().join("contact.json"));
    assert_eq!(c["report"]["certified"].as_array().unwrap().len(), 9);
}

#[test]
fn unknown_config_keys_and_flags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "model = \"m.toml\"\n[verify]\nwindows = 3\n").unwrap();
    assert_eq!(fk(&["verify", "-c", arg(&cfg)]).status.code(), Some(3));
    assert_eq!(fk(&["verify", "--bogus"]).status.code(), Some(3));
    assert_eq!(fk(&["verify", "-o", arg(dir.path())]).status.code(), Some(3));
    assert_eq!(fk(&["--help"]).status.code(), Some(0));
}
