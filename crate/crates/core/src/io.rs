//! File formats: crystal JSON, CSV tables for modes, pairs, sweeps, and
//! precession scans.
//!
//! All floats are written in scientific notation with the shortest
//! representation that round-trips, so identical inputs produce
//! byte-identical files. Writers accept an optional `#`-prefixed comment
//! line for provenance.

use std::io::Write;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::ising::{CouplingMatrix, SweepRow};
use crate::modes::ModeSpectrum;
use crate::trap::{IonCrystal, TrapConfig};

/// Shortest round-trip float formatting used in every CSV column.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "nan".to_string()
    }
}

fn write_comment<W: Write>(w: &mut W, comment: Option<&str>) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(w, "# {c}")?;
    }
    Ok(())
}

/// Crystal as a JSON value:
/// `{"trap": {...}, "positions_m": [[x, y], ...], "energy_J": e,
///   "gradient_norm_N": g}` plus an optional "provenance" object.
pub fn crystal_json(crystal: &IonCrystal, provenance: Option<Value>) -> Value {
    let mut obj = json!({
        "trap": crystal.trap,
        "positions_m": crystal.positions,
        "energy_J": crystal.potential_energy,
        "gradient_norm_N": crystal.gradient_norm,
    });
    if let Some(p) = provenance {
        obj["provenance"] = p;
    }
    obj
}

/// Parses a crystal written by `crystal_json`. The recorded residual is
/// taken as the convergence tolerance of the restored crystal.
pub fn crystal_from_json_str(s: &str) -> Result<IonCrystal> {
    let v: Value =
        serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("bad JSON: {e}")))?;
    let trap: TrapConfig = serde_json::from_value(
        v.get("trap")
            .cloned()
            .ok_or_else(|| Error::InvalidConfig("missing \"trap\"".into()))?,
    )
    .map_err(|e| Error::InvalidConfig(format!("bad trap object: {e}")))?;
    let positions: Vec<[f64; 2]> = serde_json::from_value(
        v.get("positions_m")
            .cloned()
            .ok_or_else(|| Error::InvalidConfig("missing \"positions_m\"".into()))?,
    )
    .map_err(|e| Error::InvalidConfig(format!("bad positions: {e}")))?;
    let energy = v
        .get("energy_J")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::InvalidConfig("missing \"energy_J\"".into()))?;
    let grad = v
        .get("gradient_norm_N")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::InvalidConfig("missing \"gradient_norm_N\"".into()))?;
    Ok(IonCrystal {
        positions,
        trap,
        potential_energy: energy,
        gradient_norm: grad,
        tol: grad,
        iterations: 0,
    })
}

/// CSV export of ion positions, header `ion,x_m,y_m`.
pub fn write_crystal_csv<W: Write>(
    w: &mut W,
    crystal: &IonCrystal,
    comment: Option<&str>,
) -> std::io::Result<()> {
    write_comment(w, comment)?;
    writeln!(w, "ion,x_m,y_m")?;
    for (i, p) in crystal.positions.iter().enumerate() {
        writeln!(w, "{i},{},{}", fmt_float(p[0]), fmt_float(p[1]))?;
    }
    Ok(())
}

/// CSV export of the mode frequencies, header `m,omega_over_2pi_Hz`,
/// m starting at 1 for the center-of-mass mode.
pub fn write_modes_csv<W: Write>(
    w: &mut W,
    spectrum: &ModeSpectrum,
    comment: Option<&str>,
) -> std::io::Result<()> {
    write_comment(w, comment)?;
    writeln!(w, "m,omega_over_2pi_Hz")?;
    for (m, &omega) in spectrum.frequencies.iter().enumerate() {
        writeln!(
            w,
            "{},{}",
            m + 1,
            fmt_float(omega / (2.0 * std::f64::consts::PI))
        )?;
    }
    Ok(())
}

/// JSON dump of mode frequencies and the first `top_k` eigenvector columns:
/// `{"omega_rad_s": [...], "b": [[b_i1, ..., b_ik], ...]}` with one row per
/// ion.
pub fn modes_json(spectrum: &ModeSpectrum, top_k: usize, provenance: Option<Value>) -> Value {
    let n = spectrum.len();
    let k = top_k.min(n);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..k).map(|m| spectrum.amplitude(i, m)).collect())
        .collect();
    let mut obj = json!({
        "omega_rad_s": spectrum.frequencies,
        "b": rows,
    });
    if let Some(p) = provenance {
        obj["provenance"] = p;
    }
    obj
}

/// CSV of pairwise couplings, header `i,j,d_m,J_rad_s`, pairs i < j in index
/// order.
pub fn write_pairs_csv<W: Write>(
    w: &mut W,
    coupling: &CouplingMatrix,
    positions: &[[f64; 2]],
    comment: Option<&str>,
) -> std::io::Result<()> {
    write_comment(w, comment)?;
    writeln!(w, "i,j,d_m,J_rad_s")?;
    let n = positions.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            let d = (dx * dx + dy * dy).sqrt();
            writeln!(
                w,
                "{i},{j},{},{}",
                fmt_float(d),
                fmt_float(coupling.j[(i, j)])
            )?;
        }
    }
    Ok(())
}

/// CSV of a detuning sweep, header `detuning_Hz,Jbar_per_IR2,exponent_a`.
/// The exponent column reads `nan` where no single-sign power law exists.
pub fn write_sweep_csv<W: Write>(
    w: &mut W,
    rows: &[SweepRow],
    comment: Option<&str>,
) -> std::io::Result<()> {
    write_comment(w, comment)?;
    writeln!(w, "detuning_Hz,Jbar_per_IR2,exponent_a")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{}",
            fmt_float(r.detuning / (2.0 * std::f64::consts::PI)),
            fmt_float(r.jbar_per_intensity_sq),
            r.exponent.map_or_else(|| "nan".to_string(), fmt_float)
        )?;
    }
    Ok(())
}

/// CSV of an echo-sequence tipping-angle scan. Columns: `theta1_rad`, the
/// mean-field up-state probability, the exact collective-spin ⟨J_z⟩/J, and
/// (when available) the brute-force oracle ⟨J_z⟩/J.
pub fn write_precession_csv<W: Write>(
    w: &mut W,
    theta: &[f64],
    p_up_mf: &[f64],
    jz_exact_norm: &[f64],
    jz_oracle_norm: Option<&[f64]>,
    comment: Option<&str>,
) -> std::io::Result<()> {
    write_comment(w, comment)?;
    match jz_oracle_norm {
        Some(_) => writeln!(
            w,
            "theta1_rad,P_up_MF,Jz_exact_normalized,Jz_oracle_normalized"
        )?,
        None => writeln!(w, "theta1_rad,P_up_MF,Jz_exact_normalized")?,
    }
    for (k, &t) in theta.iter().enumerate() {
        match jz_oracle_norm {
            Some(oracle) => writeln!(
                w,
                "{},{},{},{}",
                fmt_float(t),
                fmt_float(p_up_mf[k]),
                fmt_float(jz_exact_norm[k]),
                fmt_float(oracle[k])
            )?,
            None => writeln!(
                w,
                "{},{},{}",
                fmt_float(t),
                fmt_float(p_up_mf[k]),
                fmt_float(jz_exact_norm[k])
            )?,
        }
    }
    Ok(())
}
