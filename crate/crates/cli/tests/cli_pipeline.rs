//! End-to-end command contracts: deterministic bytes, stable file schemas,
//! golden regression, and the error path of the binary.

use std::fs;
use std::path::Path;
use std::process::Command;

use drumhead_cli::commands::{cmd_crystal, cmd_modes, cmd_precess, cmd_sweep, RunContext};
use drumhead_cli::config::ScenarioConfig;
use tempfile::tempdir;

const N19_TOML: &str = r#"
[trap]
b0_T = 4.46
omega_z_kHz = 795.0
omega_r_kHz = 45.6
wall_strength = 0.001

[crystal]
n_ions = 19
grad_tol_N = 1e-23

[drive]
intensity_W_per_cm2 = 1.0
detuning_kHz = 4.0

[sweep]
detunings_kHz = [1.0, 5.0, 20.0]

[sequence]
tau_arm_us = 250.0
theta_points = 21
"#;

fn n19_config() -> ScenarioConfig {
    ScenarioConfig::from_toml_str(N19_TOML).unwrap()
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn identical_config_gives_byte_identical_outputs() {
    let dir_a = tempdir().unwrap();
    let dir_b = tempdir().unwrap();
    let ctx_a = RunContext::new(n19_config(), dir_a.path().to_path_buf());
    let ctx_b = RunContext::new(n19_config(), dir_b.path().to_path_buf());

    cmd_crystal(&ctx_a).unwrap();
    cmd_modes(&ctx_a, 14).unwrap();
    cmd_sweep(&ctx_a, false).unwrap();
    cmd_crystal(&ctx_b).unwrap();
    cmd_modes(&ctx_b, 14).unwrap();
    cmd_sweep(&ctx_b, false).unwrap();

    for name in [
        "crystal.json",
        "crystal.csv",
        "modes.csv",
        "modes_vectors.json",
        "sweep.csv",
    ] {
        let a = read(&dir_a.path().join(name));
        let b = read(&dir_b.path().join(name));
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir_a = tempdir().unwrap();
    let dir_b = tempdir().unwrap();

    let pool1 = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let pool3 = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();

    pool1.install(|| {
        let ctx = RunContext::new(n19_config(), dir_a.path().to_path_buf());
        cmd_crystal(&ctx).unwrap();
        cmd_sweep(&ctx, false).unwrap();
    });
    pool3.install(|| {
        let ctx = RunContext::new(n19_config(), dir_b.path().to_path_buf());
        cmd_crystal(&ctx).unwrap();
        cmd_sweep(&ctx, false).unwrap();
    });

    for name in ["crystal.csv", "sweep.csv"] {
        let a = read(&dir_a.path().join(name));
        let b = read(&dir_b.path().join(name));
        assert_eq!(a, b, "{name} depends on the thread count");
    }
}

#[test]
fn crystal_json_schema_and_round_trip() {
    let dir = tempdir().unwrap();
    let ctx = RunContext::new(n19_config(), dir.path().to_path_buf());
    cmd_crystal(&ctx).unwrap();

    let text = read(&dir.path().join("crystal.json"));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "trap",
        "positions_m",
        "energy_J",
        "gradient_norm_N",
        "provenance",
    ] {
        assert!(v.get(key).is_some(), "missing key {key}");
    }
    assert_eq!(v["positions_m"].as_array().unwrap().len(), 19);
    for key in [
        "b0_tesla",
        "omega_z_rad_s",
        "omega_r_rad_s",
        "wall_strength",
        "ion_mass_kg",
        "ion_charge_coulomb",
    ] {
        assert!(v["trap"].get(key).is_some(), "missing trap key {key}");
    }

    let crystal = drumhead::io::crystal_from_json_str(&text).unwrap();
    assert_eq!(crystal.len(), 19);
    assert!(crystal.gradient_norm <= crystal.tol);
    // restored crystal feeds straight back into the mode solver
    let spectrum = drumhead::modes::ModeSpectrum::of_crystal(&crystal).unwrap();
    assert_eq!(spectrum.len(), 19);
}

#[test]
fn csv_headers_are_stable() {
    let dir = tempdir().unwrap();
    let ctx = RunContext::new(n19_config(), dir.path().to_path_buf());
    cmd_crystal(&ctx).unwrap();
    cmd_modes(&ctx, 14).unwrap();
    cmd_sweep(&ctx, false).unwrap();
    cmd_precess(&ctx).unwrap();

    let header_of = |name: &str| {
        let text = read(&dir.path().join(name));
        text.lines()
            .find(|l| !l.starts_with('#'))
            .map(str::to_owned)
            .unwrap()
    };
    assert_eq!(header_of("crystal.csv"), "ion,x_m,y_m");
    assert_eq!(header_of("modes.csv"), "m,omega_over_2pi_Hz");
    assert_eq!(
        header_of("sweep.csv"),
        "detuning_Hz,Jbar_per_IR2,exponent_a"
    );
    assert_eq!(
        header_of("precession.csv"),
        "theta1_rad,P_up_MF,Jz_exact_normalized"
    );
    // every data file opens with the provenance comment
    for name in ["crystal.csv", "modes.csv", "sweep.csv", "precession.csv"] {
        let text = read(&dir.path().join(name));
        assert!(text.starts_with("# {"), "{name} lacks a provenance line");
    }
}

#[test]
fn golden_modes_regression() {
    let dir = tempdir().unwrap();
    let ctx = RunContext::new(n19_config(), dir.path().to_path_buf());
    cmd_modes(&ctx, 14).unwrap();

    let fresh = read(&dir.path().join("modes.csv"));
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/modes_n19.csv");
    let golden = read(&golden_path);

    let parse = |text: &str| -> Vec<(u32, f64)> {
        text.lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with('m'))
            .map(|l| {
                let (m, f) = l.split_once(',').unwrap();
                (m.parse().unwrap(), f.parse().unwrap())
            })
            .collect()
    };
    let fresh_rows = parse(&fresh);
    let golden_rows = parse(&golden);
    assert_eq!(fresh_rows.len(), golden_rows.len());
    for ((ma, fa), (mg, fg)) in fresh_rows.iter().zip(&golden_rows) {
        assert_eq!(ma, mg);
        assert!(
            (fa - fg).abs() / fg <= 1e-12,
            "mode {ma}: {fa} vs golden {fg}"
        );
    }
}

#[test]
fn precess_without_drive_is_flat() {
    let mut config = n19_config();
    config.drive.intensity_w_per_cm2 = 0.0;
    let dir = tempdir().unwrap();
    let ctx = RunContext::new(config, dir.path().to_path_buf());
    cmd_precess(&ctx).unwrap();

    let text = read(&dir.path().join("precession.csv"));
    for line in text.lines().skip(2) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols[1], 0.5, "MF column not flat: {line}");
        assert!(cols[2].abs() < 1e-10, "exact column not flat: {line}");
    }
}

#[test]
fn synthetic_strong_coupling_departs_from_mean_field() {
    let mut config = n19_config();
    config.sequence.chi_2tau = Some(1.6);
    config.sequence.n_spins = Some(5);
    config.sequence.theta_points = 181;
    let dir = tempdir().unwrap();
    let ctx = RunContext::new(config, dir.path().to_path_buf());
    let summary = cmd_precess(&ctx).unwrap();
    assert_eq!(summary["n_spins"], 5);
    assert_eq!(summary["oracle_column"], true);

    let text = read(&dir.path().join("precession.csv"));
    let mut max_gap = 0.0f64;
    for line in text.lines().skip(2) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let mf_norm = 2.0 * cols[1] - 1.0;
        max_gap = max_gap.max((cols[2] - mf_norm).abs());
        // oracle and collective-spin engine agree for uniform couplings
        assert!((cols[3] - cols[2]).abs() < 1e-10, "oracle mismatch: {line}");
    }
    assert!(max_gap > 0.05, "max gap {max_gap} too small");
}

#[test]
fn single_ion_crystal_command() {
    let mut config = n19_config();
    config.crystal.n_ions = 1;
    let dir = tempdir().unwrap();
    let ctx = RunContext::new(config, dir.path().to_path_buf());
    let summary = cmd_crystal(&ctx).unwrap();
    assert_eq!(summary["n_ions"], 1);
    assert!(summary["d0_m"].is_null());
    let text = read(&dir.path().join("crystal.csv"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2); // header + one ion
}

#[test]
fn single_ion_modes_command() {
    let mut config = n19_config();
    config.crystal.n_ions = 1;
    let dir = tempdir().unwrap();
    let ctx = RunContext::new(config, dir.path().to_path_buf());
    cmd_modes(&ctx, 14).unwrap();
    let text = read(&dir.path().join("modes.csv"));
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('m'))
        .collect();
    assert_eq!(rows.len(), 1);
    let (m, freq) = rows[0].split_once(',').unwrap();
    assert_eq!(m, "1");
    let freq: f64 = freq.parse().unwrap();
    assert!((freq - 795e3).abs() / 795e3 < 1e-9, "freq = {freq}");
}

#[test]
fn binary_reports_machine_readable_errors() {
    let dir = tempdir().unwrap();
    let bad_config = dir.path().join("bad.toml");
    fs::write(&bad_config, "[trap]\nb0_T = 4.46\nnot_a_key = 1\n").unwrap();

    let output = Command::new(env!("CARGO_BIN_EXE_drumhead"))
        .args(["--config", bad_config.to_str().unwrap(), "crystal"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert!(v.get("error").is_some(), "no error object in: {stdout}");
}

#[test]
fn binary_runs_small_scenario() {
    let dir = tempdir().unwrap();
    let config = dir.path().join("n7.toml");
    fs::write(&config, "[crystal]\nn_ions = 7\ngrad_tol_N = 1e-23\n").unwrap();
    let out = dir.path().join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_drumhead"))
        .args([
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "crystal",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    let summary: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(summary["n_ions"], 7);
    assert!(out.join("crystal.json").exists());
}
