//! Harness and CLI surface: golden preset expansion, CSV schema, worker
//! invariance, and exit codes of the installed binary.

use std::path::Path;
use std::process::Command;

use revman::harness::{expand_preset, run_experiment_jobs, ExperimentConfig, PriorChoice};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_revman"))
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn preset_expansion_matches_goldens() {
    for (name, prior, full, file) in [
        ("A1", PriorChoice::Default, false, "preset_a1_gamma.json"),
        ("A1", PriorChoice::Gp, false, "preset_a1_gp_fast.json"),
        ("B2", PriorChoice::Default, false, "preset_b2_gamma.json"),
        ("NB-A1", PriorChoice::Default, false, "preset_nb_a1.json"),
    ] {
        let config = expand_preset(name, prior, full).unwrap();
        let mut text = serde_json::to_string_pretty(&config).unwrap();
        text.push('\n');
        assert_eq!(text, golden(file), "golden drift for {file}");
        // Round-trip through the JSON schema.
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), config);
    }
}

fn tiny_config() -> ExperimentConfig {
    let mut config = expand_preset("A1", PriorChoice::Default, false).unwrap();
    config.policies = vec![
        "ts-episodic".into(),
        "ts-episodic-star".into(),
        "ts-dynamic-star".into(),
    ];
    config.trials = 4;
    config.episodes = 12;
    config.n0 = 20;
    config.base_seed = 11;
    config
}

#[test]
fn worker_count_does_not_change_output() {
    let config = tiny_config();
    let one = run_experiment_jobs(&config, Some(1)).unwrap();
    let four = run_experiment_jobs(&config, Some(4)).unwrap();
    let sixteen = run_experiment_jobs(&config, Some(16)).unwrap();
    assert_eq!(one.csv, four.csv);
    assert_eq!(one.csv, sixteen.csv);
    assert_eq!(
        serde_json::to_string(&one.summary).unwrap(),
        serde_json::to_string(&sixteen.summary).unwrap()
    );
}

#[test]
fn csv_schema_and_formatting() {
    let config = tiny_config();
    let out = run_experiment_jobs(&config, Some(2)).unwrap();
    let mut lines = out.csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,episode,policy,revenue,cum_revenue,relative_regret"
    );
    let mut rows = 0;
    for line in lines {
        rows += 1;
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6, "bad row {line}");
        let trial: usize = fields[0].parse().unwrap();
        let episode: usize = fields[1].parse().unwrap();
        assert!(trial < config.trials);
        assert!(episode >= 1 && episode <= config.episodes);
        assert!(fields[2].starts_with("ts-"));
        for v in &fields[3..] {
            let x: f64 = v.parse().unwrap();
            assert!(x.is_finite());
            // 10 significant digits max.
            let digits = v
                .chars()
                .filter(|c| c.is_ascii_digit())
                .count();
            let leading_zeros = v
                .trim_start_matches('-')
                .trim_start_matches("0.")
                .chars()
                .take_while(|c| *c == '0')
                .count();
            assert!(
                digits - usize::from(v.contains("0.")) - leading_zeros <= 10 + 2,
                "too many digits in {v}"
            );
        }
    }
    assert_eq!(rows, config.trials * config.episodes * config.policies.len());
}

#[test]
fn replicate_binary_is_byte_identical_across_runs() {
    let dir1 = std::env::temp_dir().join("revman_repl_1");
    let dir2 = std::env::temp_dir().join("revman_repl_2");
    for dir in [&dir1, &dir2] {
        let _ = std::fs::remove_dir_all(dir);
        let status = bin()
            .args([
                "replicate",
                "--preset",
                "A1",
                "--trials",
                "2",
                "--episodes",
                "8",
                "--seed",
                "7",
                "--policies",
                "ts-episodic,ts-dynamic-star",
                "--out",
                dir.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let csv1 = std::fs::read(dir1.join("regret_curves.csv")).unwrap();
    let csv2 = std::fs::read(dir2.join("regret_curves.csv")).unwrap();
    assert_eq!(csv1, csv2);
    let sum1 = std::fs::read(dir1.join("summary.json")).unwrap();
    let sum2 = std::fs::read(dir2.join("summary.json")).unwrap();
    assert_eq!(sum1, sum2);
}

#[test]
fn lp_subcommand_solves_instance() {
    let path = std::env::temp_dir().join("revman_lp_instance.json");
    std::fs::write(
        &path,
        r#"{"lambda":[[3,1],[2,1]],"prices":[1,2],"start":0,"inventory":2}"#,
    )
    .unwrap();
    let output = bin()
        .args(["lp", "--instance", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(output.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!((parsed["objective"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert!(parsed["x"].as_array().unwrap().len() == 2);
}

#[test]
fn dp_oracle_subcommand_reports_table_value() {
    let dump = std::env::temp_dir().join("revman_vtable.csv");
    let _ = std::fs::remove_file(&dump);
    let output = bin()
        .args([
            "dp-oracle",
            "--preset",
            "A1-n50",
            "--dump-v",
            dump.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert!((parsed["rev_star"].as_f64().unwrap() - 330.08).abs() < 0.02);
    assert_eq!(parsed["n0"].as_u64().unwrap(), 50);
    assert!(parsed["runtime_ms"].is_u64());
    // Dump: (T+1) rows of n0+1 values; last value is Rev*.
    let table = std::fs::read_to_string(&dump).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 11);
    let last: Vec<f64> = rows[10].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last.len(), 51);
    assert!((last[50] - parsed["rev_star"].as_f64().unwrap()).abs() < 1e-6);
    // Boundary row: zero periods remaining.
    assert!(rows[0].split(',').all(|v| v == "0"));
}

#[test]
fn exit_codes() {
    // Usage errors -> 1.
    let status = bin().args(["frobnicate"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
    let status = bin().args(["dp-oracle", "--preset", "Z9"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
    // Runtime (IO) errors -> 2.
    let status = bin()
        .args(["simulate", "--config", "/nonexistent/config.json"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // Help -> 0.
    let status = bin().args(["--help"]).status().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn simulate_subcommand_runs_config_file() {
    let dir = std::env::temp_dir().join("revman_simulate_out");
    let _ = std::fs::remove_dir_all(&dir);
    let mut config = tiny_config();
    config.out_dir = dir.clone();
    let path = std::env::temp_dir().join("revman_sim_config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let status = bin()
        .args(["simulate", "--config", path.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("regret_curves.csv").exists());
    assert!(dir.join("summary.json").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["policies"].as_array().unwrap().len(), 3);
}
