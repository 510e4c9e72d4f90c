//! End-to-end tests of the binary: argument handling, exit codes, file
//! round-trips, and the pipelines' command-line surface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use telos::io::{model_to_json, LoadedModel};
use telos::repro::{heating_model, smoking_model};

fn telos_cmd() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_telos"));
    cmd.env_remove("TELEO_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    telos_cmd().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("utf-8 stderr")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn models_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn model_path(name: &str) -> String {
    models_dir().join(name).display().to_string()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["sample", "--no-such-flag"])), 1);
    assert_eq!(code(&run(&["dsep", &model_path("heating.json"), "--x", "W"])), 1);
}

#[test]
fn shipped_models_are_canonical() {
    for (file, model) in [
        ("heating.json", heating_model()),
        ("smoking.json", smoking_model()),
    ] {
        let on_disk = std::fs::read_to_string(models_dir().join(file)).unwrap();
        assert_eq!(
            on_disk,
            model_to_json(&LoadedModel::Plain(model)),
            "{file} deviates from its canonical form"
        );
    }
}

#[test]
fn validate_accepts_shipped_models() {
    let output = run(&["validate", &model_path("heating.json")]);
    assert_eq!(code(&output), 0);
    assert_eq!(stdout(&output), "ok: heating\n");
}

#[test]
fn validate_rejects_schema_violations_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"name":"m","endogenous":[]}"#).unwrap();
    let output = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("schema error"), "{}", stderr(&output));
}

#[test]
fn validate_lists_structural_violations() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dangling.json");
    std::fs::write(
        &path,
        r#"{
            "name": "m",
            "endogenous": [{"name":"X","exogenous":"U_GONE","equation":"U_GONE"}],
            "exogenous": [{"name":"U_X","distribution":{"type":"bernoulli","p":0.5}}]
        }"#,
    )
    .unwrap();
    let output = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&output), 2);
    assert!(stdout(&output).contains("violation:"), "{}", stdout(&output));
}

#[test]
fn sample_is_seeded_and_deterministic() {
    let a = run(&["sample", &model_path("heating.json"), "-n", "5", "--seed", "7"]);
    let b = run(&["sample", &model_path("heating.json"), "-n", "5", "--seed", "7"]);
    let c = run(&["sample", &model_path("heating.json"), "-n", "5", "--seed", "8"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    assert_ne!(stdout(&a), stdout(&c));
    let text = stdout(&a);
    assert_eq!(text.lines().count(), 6);
    assert_eq!(text.lines().next().unwrap(), "W,T,H");
}

#[test]
fn teleo_seed_env_is_the_fallback() {
    let flagged = run(&[
        "sample",
        &model_path("heating.json"),
        "-n",
        "4",
        "--seed",
        "7",
    ]);
    let via_env = telos_cmd()
        .args(["sample", &model_path("heating.json"), "-n", "4"])
        .env("TELEO_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(stdout(&flagged), stdout(&via_env));

    let bad_env = telos_cmd()
        .args(["sample", &model_path("heating.json"), "-n", "4"])
        .env("TELEO_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(code(&bad_env), 1);
}

#[test]
fn graph_emits_dot() {
    let output = run(&["graph", &model_path("heating.json")]);
    assert_eq!(code(&output), 0);
    let dot = stdout(&output);
    assert!(dot.starts_with("digraph \"heating\""));
    assert!(dot.contains("\"W\" -> \"T\""));
    assert!(dot.contains("\"U_W\" [shape=ellipse, style=dashed];"));
}

#[test]
fn dsep_answers_queries() {
    let sep = run(&["dsep", &model_path("heating.json"), "--x", "W", "--y", "H"]);
    assert_eq!(code(&sep), 0);
    assert_eq!(stdout(&sep), "separated\n");
    let open = run(&[
        "dsep",
        &model_path("heating.json"),
        "--x",
        "W",
        "--y",
        "H",
        "--given",
        "T",
    ]);
    assert_eq!(stdout(&open), "connected\n");
    let unknown = run(&["dsep", &model_path("heating.json"), "--x", "W", "--y", "Q"]);
    assert_eq!(code(&unknown), 1);
}

#[test]
fn independencies_lists_the_heating_statement() {
    let output = run(&["independencies", &model_path("heating.json")]);
    assert_eq!(code(&output), 0);
    assert_eq!(stdout(&output), "H _||_ W\n");
}

#[test]
fn apply_do_produces_a_reloadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("doD.json");
    let output = run(&[
        "apply",
        &model_path("smoking.json"),
        &model_path("do_duration_zero.json"),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"equation\": \"0\""), "{text}");
    let sampled = run(&["sample", out.to_str().unwrap(), "-n", "3", "--seed", "1"]);
    for line in stdout(&sampled).lines().skip(1) {
        let d: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(d, 0.0);
    }
}

#[test]
fn apply_intentional_yields_a_twin_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let sfm = dir.path().join("sfm.json");
    let output = run(&[
        "apply",
        &model_path("heating.json"),
        &model_path("heater_policy.json"),
        "-o",
        sfm.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);

    let validated = run(&["validate", sfm.to_str().unwrap()]);
    assert_eq!(code(&validated), 0, "{}", stdout(&validated));

    let observed = run(&[
        "sample",
        sfm.to_str().unwrap(),
        "-n",
        "4",
        "--seed",
        "2",
        "--observed-only",
    ]);
    assert_eq!(
        stdout(&observed).lines().next().unwrap(),
        "W_star,T_star,H_star"
    );

    let full = run(&["sample", sfm.to_str().unwrap(), "-n", "4", "--seed", "2"]);
    assert_eq!(
        stdout(&full).lines().next().unwrap(),
        "W,T,H,W_star,T_star,H_star"
    );

    // The twin graph implies nothing among the starred columns, so the
    // hypothesis check is vacuously consistent.
    let csv = dir.path().join("full.csv");
    let sampled = run(&[
        "sample",
        sfm.to_str().unwrap(),
        "-n",
        "2000",
        "--seed",
        "3",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&sampled), 0);
    let check = run(&[
        "markov-check",
        sfm.to_str().unwrap(),
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&check), 0, "{}", stdout(&check));
    let report: serde_json::Value = serde_json::from_str(&stdout(&check)).unwrap();
    assert_eq!(report["verdict"], "consistent");
    assert_eq!(report["vacuous"], true);
}

#[test]
fn counterfactual_op_round_trips_through_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("twin.json");
    let output = run(&[
        "apply",
        &model_path("heating.json"),
        &model_path("heater_counterfactual.json"),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"observed\": \"unstarred\""), "{text}");
    assert!(text.contains("\"evidence\""), "{text}");
}

fn write_agent_csv(dir: &Path, n: usize, seed: u64, base_labels: bool) -> PathBuf {
    let sfm = dir.join("sfm.json");
    run(&[
        "apply",
        &model_path("heating.json"),
        &model_path("heater_policy.json"),
        "-o",
        sfm.to_str().unwrap(),
    ]);
    let csv = dir.join("agent.csv");
    let output = run(&[
        "sample",
        sfm.to_str().unwrap(),
        "-n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--observed-only",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    if base_labels {
        let text = std::fs::read_to_string(&csv).unwrap();
        let relabeled = text.replacen("W_star,T_star,H_star", "W,T,H", 1);
        std::fs::write(&csv, relabeled).unwrap();
    }
    csv
}

#[test]
fn markov_check_flags_agent_data_against_the_causal_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_agent_csv(dir.path(), 5000, 11, true);
    let output = run(&[
        "markov-check",
        &model_path("heating.json"),
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 3, "{}", stdout(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(report["verdict"], "violated");
}

#[test]
fn markov_check_passes_causal_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("causal.csv");
    run(&[
        "sample",
        &model_path("heating.json"),
        "-n",
        "5000",
        "--seed",
        "12",
        "-o",
        csv.to_str().unwrap(),
    ]);
    let output = run(&[
        "markov-check",
        &model_path("heating.json"),
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{}", stdout(&output));
}

#[test]
fn markov_check_rejects_unknown_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("odd.csv");
    std::fs::write(&csv, "W,T,Q\n0,0,0\n").unwrap();
    let output = run(&[
        "markov-check",
        &model_path("heating.json"),
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 2);
    assert!(stderr(&output).contains("not declared"), "{}", stderr(&output));
}

#[test]
fn detect_agent_exits_three_and_localizes() {
    let dir = tempfile::tempdir().unwrap();
    // Starred labels on purpose: the subcommand relabels them.
    let csv = write_agent_csv(dir.path(), 5000, 13, false);
    let output = run(&[
        "detect-agent",
        &model_path("heating.json"),
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 3, "{}", stdout(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(report["detected"], true);
    assert_eq!(report["candidates"], serde_json::json!(["H", "W"]));
    assert_eq!(report["loci"][0]["common_children"], serde_json::json!(["T"]));
}

#[test]
fn detect_agent_stays_quiet_on_causal_data() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("causal.csv");
    run(&[
        "sample",
        &model_path("heating.json"),
        "-n",
        "5000",
        "--seed",
        "14",
        "-o",
        csv.to_str().unwrap(),
    ]);
    let output = run(&[
        "detect-agent",
        &model_path("heating.json"),
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0, "{}", stdout(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(report["detected"], false);
}

#[test]
fn discover_intention_finds_the_pleasure_goal() {
    let output = run(&[
        "discover-intention",
        &model_path("smoking.json"),
        "--policy",
        &model_path("smoker_policy.json"),
        "--target",
        "S",
        "--candidates",
        "P,D",
        "-n",
        "4000",
        "--seed",
        "5",
    ]);
    assert_eq!(code(&output), 3, "{}", stderr(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(report["listened"], serde_json::json!(["P"]));
    assert_eq!(report["corrected_alpha"], serde_json::json!(0.025));
}

#[test]
fn discover_intention_validates_its_arguments() {
    let mismatch = run(&[
        "discover-intention",
        &model_path("smoking.json"),
        "--policy",
        &model_path("heater_policy.json"),
        "--target",
        "S",
        "--candidates",
        "P",
    ]);
    assert_eq!(code(&mismatch), 1);

    let non_descendant = run(&[
        "discover-intention",
        &model_path("smoking.json"),
        "--policy",
        &model_path("smoker_policy.json"),
        "--target",
        "S",
        "--candidates",
        "S",
        "-n",
        "100",
    ]);
    assert_eq!(code(&non_descendant), 2);
}

#[test]
fn repro_heating_reports_the_verdict_sequence() {
    let output = run(&["repro", "heating", "--seed", "3"]);
    assert_eq!(code(&output), 0, "{}", stdout(&output));
    let report: serde_json::Value = serde_json::from_str(&stdout(&output)).unwrap();
    assert_eq!(
        report["verdicts"],
        serde_json::json!(["consistent", "violated", "consistent"])
    );
    assert_eq!(report["ok"], true);

    let again = run(&["repro", "heating", "--seed", "3"]);
    assert_eq!(stdout(&output), stdout(&again));
}

#[test]
fn repro_smoking_writes_report_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let report_path = dir.path().join("report.json");
    let output = run(&[
        "repro",
        "smoking",
        "--seed",
        "1",
        "-o",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&output), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["ok"], true);
    assert_eq!(report["regimes"][2]["proportion"], serde_json::json!(0.0));

    let hist = std::fs::read_to_string(dir.path().join("report.hist.csv")).unwrap();
    assert_eq!(hist.lines().next().unwrap(), "value,baseline,do_D_0,do_P_0");
    assert_eq!(hist.lines().count(), 3);
}
