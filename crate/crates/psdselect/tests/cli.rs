//! End-to-end runs of the installed binary: exit codes, output files,
//! determinism across worker counts, and journal resume.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psdselect"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary spawns")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_json(path: &Path, value: serde_json::Value) {
    std::fs::write(path, serde_json::to_vec_pretty(&value).unwrap()).unwrap();
}

fn catalog_2x2(side: usize) -> serde_json::Value {
    json!({
        "width": side,
        "height": side,
        "image_kinds": ["lorentz", "white"],
        "noise_kinds": ["lorentz", "white"],
        "blur_width": 2.0
    })
}

/// Generates a small dataset, returning the observation path.
fn generate(dir: &Path, side: usize, true_model: usize, seed: u64) -> PathBuf {
    let config = dir.join("generate.json");
    write_json(
        &config,
        json!({
            "catalog": catalog_2x2(side),
            "true_model": true_model,
            "gamma_x_true": 6.0,
            "gamma_e_true": 4.0,
            "seed": seed
        }),
    );
    let data = dir.join("data");
    let out = run(bin().args([
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        data.to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 0, "generate failed: {}", stderr(&out));
    data.join("y.f64")
}

#[test]
fn shipped_experiment_plans_deserialize_and_validate() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["confusion-desk.json", "confusion-full.json"] {
        let text = std::fs::read_to_string(configs.join(name)).unwrap();
        let plan: psdselect::bench::ExperimentPlan = serde_json::from_str(&text).unwrap();
        plan.validate().unwrap();
        plan.catalog.build().unwrap();
    }
}

#[test]
fn help_and_version_succeed_while_usage_errors_exit_one() {
    assert_eq!(code(&run(bin().arg("--help"))), 0);
    assert_eq!(code(&run(bin().arg("--version"))), 0);
    assert_eq!(code(&run(&mut bin())), 1);
    assert_eq!(code(&run(bin().arg("frobnicate"))), 1);
    assert_eq!(code(&run(bin().args(["select", "--config", "x.json"]))), 1);
}

#[test]
fn missing_inputs_exit_one_and_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(bin().args([
        "generate",
        "--config",
        dir.path().join("absent.json").to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("absent.json"), "{}", stderr(&out));

    let config = dir.path().join("select.json");
    write_json(
        &config,
        json!({ "catalog": catalog_2x2(16), "chain": { "iterations": 500 } }),
    );
    let out = run(bin().args([
        "select",
        dir.path().join("no_such.f64").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no_such.f64"), "{}", stderr(&out));
}

#[test]
fn odd_image_sides_are_rejected_as_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("generate.json");
    write_json(
        &config,
        json!({
            "catalog": {
                "width": 15,
                "height": 16,
                "image_kinds": ["lorentz"],
                "noise_kinds": ["white"]
            }
        }),
    );
    let out = run(bin().args([
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("even"), "{}", stderr(&out));
}

#[test]
fn generate_then_select_recovers_the_generating_model() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 32, 2, 515);
    for name in ["y.f64", "y.json", "x.f64", "x.json", "manifest.json"] {
        assert!(
            dir.path().join("data").join(name).exists(),
            "{name} missing"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("data/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "generate");

    let config = dir.path().join("select.json");
    write_json(
        &config,
        json!({
            "catalog": catalog_2x2(32),
            "chain": { "iterations": 2000 },
            "seed": 7
        }),
    );
    let sel = dir.path().join("sel");
    let out = run(bin().args([
        "select",
        y.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        sel.to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(
        stdout(&out).contains("selected model 2"),
        "{}",
        stdout(&out)
    );

    let posterior = std::fs::read_to_string(sel.join("posterior.csv")).unwrap();
    let mut lines = posterior.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.last(), Some(&"selected"));
    assert_eq!(row.last(), Some(&"2"));
    let sum: f64 = row[..row.len() - 1]
        .iter()
        .map(|v| v.parse::<f64>().unwrap())
        .sum();
    assert!((sum - 1.0).abs() < 1e-12, "probabilities sum to {sum}");
    assert!(sel.join("evidences.csv").exists());
}

#[test]
fn single_candidate_catalogs_select_it_with_probability_one() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 16, 2, 99);
    let config = dir.path().join("select.json");
    write_json(
        &config,
        json!({
            "catalog": {
                "width": 16,
                "height": 16,
                "image_kinds": ["lorentz"],
                "noise_kinds": ["white"],
                "blur_width": 2.0
            },
            "chain": { "iterations": 500 }
        }),
    );
    let sel = dir.path().join("sel");
    let out = run(bin().args([
        "select",
        y.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        sel.to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let posterior = std::fs::read_to_string(sel.join("posterior.csv")).unwrap();
    let row = posterior.lines().nth(1).unwrap();
    let prob: f64 = row.split(',').next().unwrap().parse().unwrap();
    assert_eq!(prob, 1.0);
}

#[test]
fn selection_outputs_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 16, 1, 2024);
    let config = dir.path().join("select.json");
    write_json(
        &config,
        json!({
            "catalog": catalog_2x2(16),
            "chain": { "iterations": 1200 },
            "seed": 3
        }),
    );
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let out_dir = dir.path().join(format!("sel{jobs}"));
        let out = run(bin().args([
            "select",
            y.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--jobs",
            jobs,
        ]));
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        outputs.push((
            std::fs::read(out_dir.join("evidences.csv")).unwrap(),
            std::fs::read(out_dir.join("posterior.csv")).unwrap(),
        ));
    }
    assert_eq!(
        outputs[0].0, outputs[1].0,
        "evidences.csv differs with --jobs"
    );
    assert_eq!(
        outputs[0].1, outputs[1].1,
        "posterior.csv differs with --jobs"
    );
}

#[test]
fn confusion_reruns_resume_from_the_journal_and_reproduce_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("plan.json");
    write_json(
        &config,
        json!({
            "catalog": {
                "width": 16,
                "height": 16,
                "image_kinds": ["lorentz"],
                "noise_kinds": ["lorentz", "white"],
                "blur_width": 2.0
            },
            "gamma_x_true": 6.0,
            "gamma_e_true": 4.0,
            "replicates": 2,
            "chain": { "iterations": 800 },
            "base_seed": 99
        }),
    );
    let out_dir = dir.path().join("confusion");
    let first = run(bin().args([
        "confusion",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--jobs",
        "1",
    ]));
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    assert!(stdout(&first).contains("8 evidences"), "{}", stdout(&first));
    assert!(!stdout(&first).contains("resumed"), "{}", stdout(&first));
    let table = std::fs::read(out_dir.join("evidences.csv")).unwrap();

    let second = run(bin().args([
        "confusion",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--jobs",
        "1",
    ]));
    assert_eq!(code(&second), 0, "{}", stderr(&second));
    assert!(
        stdout(&second).contains("resumed past 8 journaled evidences"),
        "{}",
        stdout(&second)
    );
    assert_eq!(
        std::fs::read(out_dir.join("evidences.csv")).unwrap(),
        table,
        "resumed run rewrote a different table"
    );
    assert!(out_dir.join("confusion.csv").exists());
    assert!(out_dir.join("evidence_log.csv").exists());
}

#[test]
fn oracle_flags_posterior_mass_outside_tight_integration_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 16, 2, 7);
    let config = dir.path().join("oracle.json");
    // Truth sits near (6, 4); a [1, 2]^2 window clips the posterior, so
    // the quadrature must refuse with the numerical-failure status.
    write_json(
        &config,
        json!({
            "catalog": catalog_2x2(16),
            "model": 2,
            "integration": {
                "x": { "min": 1.0, "max": 2.0, "nodes": 32 },
                "e": { "min": 1.0, "max": 2.0, "nodes": 32 }
            }
        }),
    );
    let out = run(bin().args([
        "oracle",
        y.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("boundary"), "{}", stderr(&out));

    write_json(&config, json!({ "catalog": catalog_2x2(16), "model": 2 }));
    let ok = run(bin().args([
        "oracle",
        y.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]));
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert!(stdout(&ok).contains("log evidence"), "{}", stdout(&ok));
}

#[test]
fn catalogs_accept_a_psf_file_in_place_of_the_sinc_width() {
    let dir = tempfile::tempdir().unwrap();
    // 2x2 box blur laid out on the periodic 16x16 grid.
    let mut psf = vec![0.0f64; 256];
    for p in [0usize, 1, 16, 17] {
        psf[p] = 0.25;
    }
    let bytes: Vec<u8> = psf.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(dir.path().join("psf.f64"), bytes).unwrap();
    std::fs::write(dir.path().join("psf.json"), r#"{"width":16,"height":16}"#).unwrap();

    let config = dir.path().join("generate.json");
    write_json(
        &config,
        json!({
            "catalog": {
                "width": 16,
                "height": 16,
                "image_kinds": ["lorentz"],
                "noise_kinds": ["white"],
                "blur_psf": dir.path().join("psf.f64").to_str().unwrap()
            },
            "seed": 3
        }),
    );
    let out = run(bin().args([
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("data").to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // A PSF on the wrong grid is a configuration error.
    let small: Vec<u8> = std::iter::once(1.0f64)
        .chain(std::iter::repeat_n(0.0, 63))
        .flat_map(|v| v.to_le_bytes())
        .collect();
    std::fs::write(dir.path().join("small.f64"), small).unwrap();
    std::fs::write(dir.path().join("small.json"), r#"{"width":8,"height":8}"#).unwrap();
    write_json(
        &config,
        json!({
            "catalog": {
                "width": 16,
                "height": 16,
                "image_kinds": ["lorentz"],
                "noise_kinds": ["white"],
                "blur_psf": dir.path().join("small.f64").to_str().unwrap()
            }
        }),
    );
    let out = run(bin().args([
        "generate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("data2").to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("PSF"), "{}", stderr(&out));
}

#[test]
fn trace_writes_chain_and_checkpoint_tables() {
    let dir = tempfile::tempdir().unwrap();
    let y = generate(dir.path(), 16, 2, 31);
    let config = dir.path().join("trace.json");
    write_json(
        &config,
        json!({
            "catalog": catalog_2x2(16),
            "model": 2,
            "chain": { "iterations": 1000 },
            "seed": 4,
            "checkpoints": [200, 500, 1000]
        }),
    );
    let out_dir = dir.path().join("trace");
    let out = run(bin().args([
        "trace",
        y.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let chain = std::fs::read_to_string(out_dir.join("chain.csv")).unwrap();
    assert_eq!(chain.lines().count(), 1001, "header plus one row per sweep");
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(
        trace.lines().count(),
        4,
        "header plus one row per checkpoint"
    );
    assert!(trace
        .lines()
        .next()
        .unwrap()
        .contains("oracle_log_evidence"));
}
