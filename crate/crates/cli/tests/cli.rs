use std::path::PathBuf;
use std::process::Command;

fn problem(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("problems")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sheafrelax"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn validate_accepts_bundled_problems() {
    for name in ["lighting.toml", "brownout.toml", "zero-objective.toml"] {
        let (code, out, _) = run(&["validate", &problem(name)]);
        assert_eq!(code, 0, "{name}: {out}");
        assert!(out.contains("validation: ok"));
    }
}

#[test]
fn missing_self_edge_fails_validation() {
    let (code, out, _) = run(&["validate", &problem("missing-self-edge.toml")]);
    assert_eq!(code, 1);
    assert!(out.contains("no self-edge"), "{out}");
}

#[test]
fn malformed_file_is_a_parse_error() {
    let (code, _, err) = run(&["validate", &problem("malformed.toml")]);
    assert_eq!(code, 2);
    assert!(err.contains("error"), "{err}");
    let (code, _, _) = run(&["validate", "/nonexistent/problem.toml"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn tiny_budget_exits_three_with_partial_report() {
    let (code, out, err) = run(&[
        "solve",
        &problem("brownout.toml"),
        "--mode",
        "relaxed",
        "--budget",
        "3",
    ]);
    assert_eq!(code, 3, "{err}");
    assert!(out.contains("relaxed: objective"));
    assert!(err.contains("budget exhausted"));
}

#[test]
fn lighting_solves_to_zero_in_both_modes() {
    let (code, out, _) = run(&["solve", &problem("lighting.toml"), "--mode", "both", "--verify"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("constrained: objective 0\n"));
    assert!(out.contains("relaxed: objective 0\n"));
    assert!(out.contains("verify: all checks pass"));
}

#[test]
fn boolify_lighting_has_zero_error() {
    let (code, out, _) = run(&["boolify", &problem("lighting.toml"), "--verify"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("zero error: true"));
}

#[test]
fn boolify_brownout_has_positive_error() {
    let (code, out, _) = run(&["boolify", &problem("brownout.toml"), "--verify"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("zero error: false"));
}

#[test]
fn boolify_without_nominal_states_fails() {
    let (code, _, err) = run(&["boolify", &problem("missing-self-edge.toml")]);
    assert_eq!(code, 1);
    assert!(err.contains("nominal"), "{err}");
}

#[test]
fn toml_output_is_deterministic_and_parses() {
    let dir = std::env::temp_dir().join(format!("sheafrelax-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let a = dir.join("a.toml");
    let b = dir.join("b.toml");
    for path in [&a, &b] {
        let (code, _, _) = run(&[
            "report",
            &problem("brownout.toml"),
            "--threads",
            "2",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let parsed: toml::Value = toml::from_str(std::str::from_utf8(&ta).unwrap()).unwrap();
    assert_eq!(parsed["command"].as_str(), Some("report"));
    assert!(parsed["boolify"]["eps"].as_float().unwrap() > 0.0);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seed_flag_overrides_file() {
    let (_, out, _) = run(&["validate", &problem("lighting.toml"), "--seed", "17"]);
    assert!(out.starts_with("validate lighting.toml  (seed 17)"), "{out}");
}
