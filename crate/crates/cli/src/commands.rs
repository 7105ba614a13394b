//! File-emitting commands. Each command resolves the scenario, runs the
//! library pipeline, writes its outputs under the chosen directory with a
//! provenance header, and returns a JSON summary for stdout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use drumhead::calib::{
    delta_k, f0_from_intensity, gamma_from_intensity, lamb_dicke_parameter, lattice_wavelength,
    tilt_modulation_index, z_rms_profile,
};
use drumhead::io as dio;
use drumhead::ising::{
    coupling_matrix, detuning_sweep, mean_coupling, power_law_fit, uniform_limit_chi,
    CouplingMatrix, ODFDrive, PowerLawFit,
};
use drumhead::modes::ModeSpectrum;
use drumhead::spin::{
    brute_force_sequence, exact_sequence_jz_damped, mf_precession_probability, mf_validity_bound,
    spin_motion_criterion, BruteCoupling, SequenceParams, MAX_BRUTE_FORCE_SPINS,
};
use drumhead::trap::{
    minimize_equilibrium_traced, nearest_neighbor_spacing, seed_for_count, suggest_seed_spacing,
    IonCrystal, MinimizeOptions,
};

use crate::config::ScenarioConfig;
use crate::provenance::{provenance_line, provenance_value};

pub struct RunContext {
    pub config: ScenarioConfig,
    pub out_dir: PathBuf,
}

impl RunContext {
    pub fn new(config: ScenarioConfig, out_dir: PathBuf) -> Self {
        Self { config, out_dir }
    }

    fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating output directory {}", self.out_dir.display()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub fn build_crystal(config: &ScenarioConfig) -> Result<IonCrystal> {
    let trap = config.trap_config()?;
    let n = config.crystal.n_ions;
    if n == 0 {
        bail!("crystal.n_ions must be at least 1");
    }
    let spacing = config
        .crystal
        .seed_spacing_um
        .map(|um| um * 1e-6)
        .unwrap_or_else(|| suggest_seed_spacing(n, &trap));
    let seed = seed_for_count(n, spacing);
    let opts = MinimizeOptions {
        tol: config.crystal.grad_tol_n,
        ..MinimizeOptions::default()
    };
    Ok(minimize_equilibrium_traced(&seed, &trap, &opts, None)?)
}

pub fn build_drive(config: &ScenarioConfig) -> Result<ODFDrive> {
    let trap = config.trap_config()?;
    let geometry = config.beam_geometry()?;
    let beat = trap.omega_z + config.drive_detuning()?;
    Ok(ODFDrive::from_intensity(
        config.drive.intensity_w_per_cm2,
        geometry.theta_r,
        beat,
    )?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes)?;
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn cmd_crystal(ctx: &RunContext) -> Result<Value> {
    ctx.ensure_out_dir()?;
    let crystal = build_crystal(&ctx.config)?;

    let json_path = ctx.path("crystal.json");
    write_json(
        &json_path,
        &dio::crystal_json(&crystal, Some(provenance_value(&ctx.config))),
    )?;

    let mut csv = Vec::new();
    dio::write_crystal_csv(&mut csv, &crystal, Some(&provenance_line(&ctx.config)))?;
    let csv_path = ctx.path("crystal.csv");
    write_file(&csv_path, &csv)?;

    let d0 = if crystal.len() >= 2 {
        Some(nearest_neighbor_spacing(&crystal)?)
    } else {
        None
    };
    Ok(json!({
        "n_ions": crystal.len(),
        "d0_m": d0,
        "radius_m": crystal.radius(),
        "energy_J": crystal.potential_energy,
        "gradient_norm_N": crystal.gradient_norm,
        "iterations": crystal.iterations,
        "files": [json_path.display().to_string(), csv_path.display().to_string()],
    }))
}

pub fn cmd_modes(ctx: &RunContext, top_k: usize) -> Result<Value> {
    ctx.ensure_out_dir()?;
    let crystal = build_crystal(&ctx.config)?;
    let spectrum = ModeSpectrum::of_crystal(&crystal)?;

    let mut csv = Vec::new();
    dio::write_modes_csv(&mut csv, &spectrum, Some(&provenance_line(&ctx.config)))?;
    let csv_path = ctx.path("modes.csv");
    write_file(&csv_path, &csv)?;

    let vec_path = ctx.path("modes_vectors.json");
    write_json(
        &vec_path,
        &dio::modes_json(&spectrum, top_k, Some(provenance_value(&ctx.config))),
    )?;

    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(json!({
        "n_modes": spectrum.len(),
        "omega_1_Hz": spectrum.frequencies[0] / two_pi,
        "omega_lowest_Hz": spectrum.frequencies[spectrum.len() - 1] / two_pi,
        "eigenvectors_dumped": top_k.min(spectrum.len()),
        "files": [csv_path.display().to_string(), vec_path.display().to_string()],
    }))
}

fn fit_report_value(fit: &Result<PowerLawFit, drumhead::Error>) -> Value {
    match fit {
        Ok(f) => json!({
            "exponent_a": f.exponent,
            "prefactor_rad_s": f.prefactor,
            "rms_log_residual": f.rms_log_residual,
            "d0_m": f.d0_m,
            "bins": f.bins,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn cmd_couplings(ctx: &RunContext) -> Result<Value> {
    ctx.ensure_out_dir()?;
    let crystal = build_crystal(&ctx.config)?;
    let spectrum = ModeSpectrum::of_crystal(&crystal)?;
    let drive = build_drive(&ctx.config)?;
    let coupling = coupling_matrix(&spectrum, &drive)?;

    let mut csv = Vec::new();
    dio::write_pairs_csv(
        &mut csv,
        &coupling,
        &crystal.positions,
        Some(&provenance_line(&ctx.config)),
    )?;
    let pairs_path = ctx.path("pairs.csv");
    write_file(&pairs_path, &csv)?;

    let jbar = mean_coupling(&coupling);
    let chi = uniform_limit_chi(&drive, crystal.trap.omega_z, crystal.trap.ion_mass)?;
    let fit = power_law_fit(&coupling, &crystal);
    let intensity = drive.intensity;

    let report = json!({
        "provenance": provenance_value(&ctx.config),
        "jbar_rad_s": jbar,
        "jbar_per_IR2_rad_s": jbar / (intensity * intensity),
        "chi_uniform_rad_s": chi,
        "force_amplitude_N": drive.force_amplitude,
        "beat_note_rad_s": drive.beat_note,
        "fit": fit_report_value(&fit),
    });
    let report_path = ctx.path("fit_report.json");
    write_json(&report_path, &report)?;

    let mut summary = report;
    summary["files"] = json!([
        pairs_path.display().to_string(),
        report_path.display().to_string()
    ]);
    Ok(summary)
}

pub fn cmd_sweep(ctx: &RunContext, emit_pairs: bool) -> Result<Value> {
    ctx.ensure_out_dir()?;
    let crystal = build_crystal(&ctx.config)?;
    let spectrum = ModeSpectrum::of_crystal(&crystal)?;
    let template = build_drive(&ctx.config)?;
    let detunings = ctx.config.sweep_detunings_rad_s();
    let rows = detuning_sweep(&spectrum, &crystal, &template, &detunings)?;

    let mut csv = Vec::new();
    dio::write_sweep_csv(&mut csv, &rows, Some(&provenance_line(&ctx.config)))?;
    let sweep_path = ctx.path("sweep.csv");
    write_file(&sweep_path, &csv)?;
    let mut files = vec![sweep_path.display().to_string()];

    if emit_pairs {
        for (row, &delta) in rows.iter().zip(&detunings) {
            let drive = template.with_beat_note(crystal.trap.omega_z + delta);
            let coupling: CouplingMatrix = coupling_matrix(&spectrum, &drive)?;
            let mut pairs_csv = Vec::new();
            dio::write_pairs_csv(
                &mut pairs_csv,
                &coupling,
                &crystal.positions,
                Some(&provenance_line(&ctx.config)),
            )?;
            let hz = row.detuning / (2.0 * std::f64::consts::PI);
            let path = ctx.path(&format!("pairs_detuning_{hz}Hz.csv"));
            write_file(&path, &pairs_csv)?;
            files.push(path.display().to_string());
        }
    }

    Ok(json!({
        "rows": rows.len(),
        "files": files,
    }))
}

pub fn cmd_precess(ctx: &RunContext) -> Result<Value> {
    ctx.ensure_out_dir()?;
    let cfg = &ctx.config;
    let tau = cfg.tau_arm_s();
    if !(tau > 0.0) {
        bail!("sequence.tau_arm_us must be positive");
    }
    let points = cfg.sequence.theta_points.max(2);

    // synthetic mode fixes (N, chi·2tau) directly; pipeline mode derives the
    // couplings from the configured crystal and drive
    let (n, chi, jbar, gamma, oracle_coupling): (usize, f64, f64, f64, Option<CouplingMatrix>) =
        if let Some(chi_2tau) = cfg.sequence.chi_2tau {
            let n = cfg
                .sequence
                .n_spins
                .context("sequence.n_spins is required with sequence.chi_2tau")?;
            if n == 0 {
                bail!("sequence.n_spins must be at least 1");
            }
            let chi = chi_2tau / (2.0 * tau);
            (n, chi, chi, cfg.sequence.gamma_per_s.unwrap_or(0.0), None)
        } else {
            let crystal = build_crystal(cfg)?;
            let spectrum = ModeSpectrum::of_crystal(&crystal)?;
            let drive = build_drive(cfg)?;
            let coupling = coupling_matrix(&spectrum, &drive)?;
            let jbar = mean_coupling(&coupling);
            let chi = uniform_limit_chi(&drive, crystal.trap.omega_z, crystal.trap.ion_mass)?;
            let gamma = cfg
                .sequence
                .gamma_per_s
                .unwrap_or_else(|| gamma_from_intensity(drive.intensity));
            (crystal.len(), chi, jbar, gamma, Some(coupling))
        };

    let margin = mf_validity_bound(n, chi, 2.0 * tau);
    if margin > 0.5 {
        eprintln!(
            "warning: collective-spin validity margin chi*t/(sqrt(N)/4) = {margin:.3} \
             exceeds 0.5; the mean-field column is unreliable here"
        );
    }

    let theta: Vec<f64> = (0..points)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / (points - 1) as f64)
        .collect();
    let j = n as f64 / 2.0;
    let mut p_mf = Vec::with_capacity(points);
    let mut jz_exact = Vec::with_capacity(points);
    for &t in &theta {
        let params = SequenceParams {
            theta_1: t,
            tau_arm: tau,
            j_bar: jbar,
            gamma,
            chi,
            n,
        };
        p_mf.push(mf_precession_probability(&params));
        jz_exact.push(exact_sequence_jz_damped(n, chi, tau, t, gamma) / j);
    }

    // brute-force oracle column for small spin counts; carries the same
    // coherence envelope as the exact column
    let jz_oracle: Option<Vec<f64>> = if n <= MAX_BRUTE_FORCE_SPINS {
        let envelope = (-gamma * 2.0 * tau).exp();
        let mut col = Vec::with_capacity(points);
        for &t in &theta {
            let (jz, _) = match &oracle_coupling {
                Some(c) => brute_force_sequence(n, BruteCoupling::Matrix(&c.j), tau, t)?,
                None => brute_force_sequence(n, BruteCoupling::Uniform(chi), tau, t)?,
            };
            col.push(envelope * jz / j);
        }
        Some(col)
    } else {
        None
    };

    let mut csv = Vec::new();
    dio::write_precession_csv(
        &mut csv,
        &theta,
        &p_mf,
        &jz_exact,
        jz_oracle.as_deref(),
        Some(&provenance_line(cfg)),
    )?;
    let path = ctx.path("precession.csv");
    write_file(&path, &csv)?;

    Ok(json!({
        "n_spins": n,
        "theta_points": points,
        "chi_rad_s": chi,
        "jbar_rad_s": jbar,
        "gamma_per_s": gamma,
        "validity_margin": margin,
        "oracle_column": jz_oracle.is_some(),
        "files": [path.display().to_string()],
    }))
}

pub fn cmd_calibrate(ctx: &RunContext) -> Result<Value> {
    ctx.ensure_out_dir()?;
    let cfg = &ctx.config;
    let geometry = cfg.beam_geometry()?;
    let crystal = build_crystal(cfg)?;
    let spectrum = ModeSpectrum::of_crystal(&crystal)?;
    let drive = build_drive(cfg)?;
    let temperature = cfg.temperature_k();

    let z = z_rms_profile(&spectrum, temperature)?;
    let center = index_closest_to_origin(&crystal);
    let edge = index_farthest_from_origin(&crystal);

    let printed = spin_motion_criterion(&spectrum, &drive, temperature, false)?;
    let composite = spin_motion_criterion(&spectrum, &drive, temperature, true)?;

    let report = json!({
        "provenance": provenance_value(cfg),
        "delta_k_per_m": delta_k(&geometry),
        "lambda_R_m": lattice_wavelength(&geometry),
        "F0_N": f0_from_intensity(drive.intensity, &geometry),
        "Gamma_per_s": gamma_from_intensity(drive.intensity),
        "eta_center": lamb_dicke_parameter(z[center], &geometry),
        "eta_edge": lamb_dicke_parameter(z[edge], &geometry),
        "z_rms_center_m": z[center],
        "z_rms_edge_m": z[edge],
        "tilt_index": tilt_modulation_index(&geometry, crystal.radius()),
        "array_radius_m": crystal.radius(),
        "spin_motion": {
            "drive_off": printed.drive_off,
            "min_margin": printed.min_margin,
            "worst_mode": printed.worst_mode,
            "min_margin_composite_sqrt_n": composite.min_margin,
            "margins": printed.margins,
        },
    });
    let path = ctx.path("calibrate.json");
    write_json(&path, &report)?;

    let mut summary = report;
    summary["files"] = json!([path.display().to_string()]);
    Ok(summary)
}

fn index_closest_to_origin(crystal: &IonCrystal) -> usize {
    crystal
        .positions
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let ra = a.1[0] * a.1[0] + a.1[1] * a.1[1];
            let rb = b.1[0] * b.1[0] + b.1[1] * b.1[1];
            ra.partial_cmp(&rb).expect("finite positions")
        })
        .expect("non-empty crystal")
        .0
}

fn index_farthest_from_origin(crystal: &IonCrystal) -> usize {
    crystal
        .positions
        .iter()
        .enumerate()
        .max_by(|a, b| {
            let ra = a.1[0] * a.1[0] + a.1[1] * a.1[1];
            let rb = b.1[0] * b.1[0] + b.1[1] * b.1[1];
            ra.partial_cmp(&rb).expect("finite positions")
        })
        .expect("non-empty crystal")
        .0
}
