//! Engineered spin-spin couplings mediated by the transverse modes.
//!
//! A spin-dependent force F₀ cos(μ t) along ẑ, detuned from the transverse
//! mode spectrum, produces the pairwise coupling
//!
//! ```text
//! J_ij = (F₀² N / 2 ħ M) Σ_m  b_im b_jm / (μ² − ω_m²)        (i ≠ j)
//! ```
//!
//! in the convention H = (1/N) Σ_{i<j} J_ij σᶻ_i σᶻ_j. Detuning just above
//! the center-of-mass mode gives a spatially uniform antiferromagnetic
//! coupling; larger detunings admit higher spatial-frequency modes and steepen
//! the distance dependence toward the d⁻³ limit.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::calib::force_amplitude_at;
use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::modes::ModeSpectrum;
use crate::trap::{nearest_neighbor_spacing, IonCrystal};

/// Default guard band around each mode resonance (rad/s).
pub const DEFAULT_RESONANCE_GUARD: f64 = 2.0 * std::f64::consts::PI * 10.0;

/// Ratio between consecutive distance-bin edges in the power-law fit.
pub const FIT_BIN_FACTOR: f64 = 1.25;

/// Minimum populated bins for a power-law fit.
pub const MIN_FIT_BINS: usize = 5;

/// Spin-dependent optical drive parameters.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ODFDrive {
    /// Beat-note angular frequency μ (rad/s).
    pub beat_note: f64,
    /// Force amplitude F₀ (newton).
    pub force_amplitude: f64,
    /// Single-beam intensity (W/cm²).
    pub intensity: f64,
    /// Beam separation angle θ_R (radian).
    pub beam_angle: f64,
}

impl ODFDrive {
    /// Drive with the force amplitude set from the intensity calibration at
    /// beam angle `beam_angle`.
    pub fn from_intensity(intensity: f64, beam_angle: f64, beat_note: f64) -> Result<Self> {
        if !(intensity >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "intensity must be >= 0, got {intensity}"
            )));
        }
        if !(beat_note > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "beat note must be > 0, got {beat_note}"
            )));
        }
        if !(beam_angle > 0.0 && beam_angle < std::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!(
                "beam angle must satisfy 0 < theta_R < pi, got {beam_angle}"
            )));
        }
        Ok(Self {
            beat_note,
            force_amplitude: force_amplitude_at(intensity, beam_angle),
            intensity,
            beam_angle,
        })
    }

    /// Same drive at a different beat note.
    pub fn with_beat_note(&self, beat_note: f64) -> Self {
        Self { beat_note, ..*self }
    }
}

/// Symmetric N×N coupling matrix J_ij (rad/s, zero diagonal) together with
/// the drive that produced it.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    pub j: DMatrix<f64>,
    pub drive: ODFDrive,
}

impl CouplingMatrix {
    pub fn len(&self) -> usize {
        self.j.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.j.nrows() == 0
    }
}

/// Evaluates J_ij for `drive` against the mode spectrum, at the default
/// resonance guard.
pub fn coupling_matrix(spectrum: &ModeSpectrum, drive: &ODFDrive) -> Result<CouplingMatrix> {
    coupling_matrix_guarded(spectrum, drive, DEFAULT_RESONANCE_GUARD)
}

/// As `coupling_matrix` with an explicit resonance guard (rad/s): the beat
/// note must stay at least `guard` away from every mode frequency.
pub fn coupling_matrix_guarded(
    spectrum: &ModeSpectrum,
    drive: &ODFDrive,
    guard: f64,
) -> Result<CouplingMatrix> {
    let mu = drive.beat_note;
    check_resonance(spectrum, mu, guard)?;

    let n = spectrum.len();
    let prefactor =
        drive.force_amplitude * drive.force_amplitude * n as f64 / (2.0 * HBAR * spectrum.ion_mass);
    let weights: Vec<f64> = spectrum
        .frequencies
        .iter()
        .map(|&w| prefactor / (mu * mu - w * w))
        .collect();

    // J = B diag(w) Bᵀ with the diagonal removed
    let b = &spectrum.mode_matrix;
    let mut scaled = b.clone();
    for (m, mut col) in scaled.column_iter_mut().enumerate() {
        col *= weights[m];
    }
    let mut j = scaled * b.transpose();
    for i in 0..n {
        j[(i, i)] = 0.0;
    }
    // enforce exact symmetry against rounding in the matrix product
    for i in 0..n {
        for k in (i + 1)..n {
            let s = 0.5 * (j[(i, k)] + j[(k, i)]);
            j[(i, k)] = s;
            j[(k, i)] = s;
        }
    }
    Ok(CouplingMatrix { j, drive: *drive })
}

fn check_resonance(spectrum: &ModeSpectrum, mu: f64, guard: f64) -> Result<()> {
    for (m, &w) in spectrum.frequencies.iter().enumerate() {
        if (mu - w).abs() < guard {
            return Err(Error::Resonance {
                mode: m + 1,
                mode_freq_hz: w / (2.0 * std::f64::consts::PI),
                beat_note_hz: mu / (2.0 * std::f64::consts::PI),
            });
        }
    }
    Ok(())
}

/// Crystal-averaged coupling J̄ = (1/N²) Σ_j Σ_{i≠j} J_ij (rad/s).
pub fn mean_coupling(coupling: &CouplingMatrix) -> f64 {
    let n = coupling.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                acc += coupling.j[(i, j)];
            }
        }
    }
    acc / (n as f64 * n as f64)
}

/// Uniform-coupling strength χ = F₀² / (2ħM (μ² − ω₁²)) (rad/s), the value
/// every J_ij approaches when the beat note sits just outside the
/// center-of-mass mode.
pub fn uniform_limit_chi(drive: &ODFDrive, omega_1: f64, ion_mass: f64) -> Result<f64> {
    uniform_limit_chi_guarded(drive, omega_1, ion_mass, DEFAULT_RESONANCE_GUARD)
}

pub fn uniform_limit_chi_guarded(
    drive: &ODFDrive,
    omega_1: f64,
    ion_mass: f64,
    guard: f64,
) -> Result<f64> {
    let mu = drive.beat_note;
    if (mu - omega_1).abs() < guard {
        return Err(Error::Resonance {
            mode: 1,
            mode_freq_hz: omega_1 / (2.0 * std::f64::consts::PI),
            beat_note_hz: mu / (2.0 * std::f64::consts::PI),
        });
    }
    let f0 = drive.force_amplitude;
    Ok(f0 * f0 / (2.0 * HBAR * ion_mass * (mu * mu - omega_1 * omega_1)))
}

/// One populated distance bin of a power-law fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitBin {
    /// Geometric-mean pair separation in the bin (meters).
    pub d_m: f64,
    /// Arithmetic-mean coupling in the bin (rad/s).
    pub mean_j: f64,
    /// Number of pairs in the bin.
    pub pairs: usize,
}

/// Result of fitting |J| against pair separation to a power law
/// J(d) = prefactor · (d₀/d)^exponent.
#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    /// Fitted exponent a (dimensionless).
    pub exponent: f64,
    /// Coupling magnitude at d = d₀ (rad/s), carrying the common sign of the
    /// binned couplings.
    pub prefactor: f64,
    /// Root-mean-square residual of the fit in log space.
    pub rms_log_residual: f64,
    /// Reference distance d₀ used for the prefactor (meters).
    pub d0_m: f64,
    /// Populated bins that entered the fit.
    pub bins: Vec<FitBin>,
}

/// Bins pairs by separation over d ∈ [d₀, half the crystal radius] in
/// logarithmic bins (edge ratio 1.25) and fits a line to the per-bin
/// geometric means in log-log space.
///
/// Geometric-mean binning keeps exact power-law inputs exactly on the fit
/// line regardless of how pairs fall into bins. The per-bin arithmetic means
/// must share one sign; mixed signs mean no single exponent describes the
/// data and the fit reports an error instead.
pub fn power_law_fit(coupling: &CouplingMatrix, crystal: &IonCrystal) -> Result<PowerLawFit> {
    let n = crystal.len();
    if n < 7 {
        return Err(Error::Arity {
            required: 7,
            actual: n,
        });
    }
    if coupling.len() != n {
        return Err(Error::InvalidConfig(format!(
            "coupling matrix is {}x{} but the crystal has {} ions",
            coupling.len(),
            coupling.len(),
            n
        )));
    }
    let d0 = nearest_neighbor_spacing(crystal)?;
    let upper = 0.5 * crystal.radius();
    fit_pairs(&coupling.j, &crystal.positions, d0, upper)
}

fn fit_pairs(j: &DMatrix<f64>, positions: &[[f64; 2]], d0: f64, upper: f64) -> Result<PowerLawFit> {
    if !(upper > d0) {
        return Err(Error::InsufficientBins {
            required: MIN_FIT_BINS,
            actual: 0,
        });
    }
    let n = positions.len();
    let n_bins = ((upper / d0).ln() / FIT_BIN_FACTOR.ln()).ceil() as usize;

    #[derive(Default, Clone)]
    struct Bin {
        pairs: usize,
        sum_j: f64,
        sum_log_d: f64,
        sum_log_abs_j: f64,
    }
    let mut bins = vec![Bin::default(); n_bins];

    for i in 0..n {
        for k in (i + 1)..n {
            let dx = positions[i][0] - positions[k][0];
            let dy = positions[i][1] - positions[k][1];
            let d = (dx * dx + dy * dy).sqrt();
            if d < d0 || d > upper {
                continue;
            }
            let idx = ((d / d0).ln() / FIT_BIN_FACTOR.ln()).floor() as usize;
            let idx = idx.min(n_bins - 1);
            let jik = j[(i, k)];
            if jik == 0.0 {
                return Err(Error::SignMixed);
            }
            bins[idx].pairs += 1;
            bins[idx].sum_j += jik;
            bins[idx].sum_log_d += d.ln();
            bins[idx].sum_log_abs_j += jik.abs().ln();
        }
    }

    let populated: Vec<&Bin> = bins.iter().filter(|b| b.pairs > 0).collect();
    if populated.len() < MIN_FIT_BINS {
        return Err(Error::InsufficientBins {
            required: MIN_FIT_BINS,
            actual: populated.len(),
        });
    }
    let sign = (populated[0].sum_j / populated[0].pairs as f64).signum();
    for b in &populated {
        let mean = b.sum_j / b.pairs as f64;
        if mean.signum() != sign || mean == 0.0 {
            return Err(Error::SignMixed);
        }
    }

    // least squares on (mean log d - log d0, mean log |J|)
    let pts: Vec<(f64, f64)> = populated
        .iter()
        .map(|b| {
            let x = b.sum_log_d / b.pairs as f64 - d0.ln();
            let y = b.sum_log_abs_j / b.pairs as f64;
            (x, y)
        })
        .collect();
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let intercept = (sy - slope * sx) / m;

    let rms = (pts
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum::<f64>()
        / m)
        .sqrt();

    let fit_bins = populated
        .iter()
        .map(|b| FitBin {
            d_m: (b.sum_log_d / b.pairs as f64).exp(),
            mean_j: b.sum_j / b.pairs as f64,
            pairs: b.pairs,
        })
        .collect();

    Ok(PowerLawFit {
        exponent: -slope,
        prefactor: sign * intercept.exp(),
        rms_log_residual: rms,
        d0_m: d0,
        bins: fit_bins,
    })
}

/// One row of a detuning sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// Beat-note detuning μ − ω₁ (rad/s).
    pub detuning: f64,
    /// Crystal-averaged coupling J̄ (rad/s).
    pub jbar: f64,
    /// J̄ normalized by the squared single-beam intensity
    /// (rad/s per (W/cm²)²).
    pub jbar_per_intensity_sq: f64,
    /// Fitted range exponent, when the couplings in the fit window share one
    /// sign and populate enough bins.
    pub exponent: Option<f64>,
}

/// Evaluates (J̄, J̄/I², a) for each detuning μ − ω₁ in `detunings` (rad/s,
/// relative to the trap's axial frequency). Rows come back in input order;
/// resonance collisions abort the sweep, while power-law sign mixing or a
/// too-narrow crystal only blank the exponent column.
pub fn detuning_sweep(
    spectrum: &ModeSpectrum,
    crystal: &IonCrystal,
    drive_template: &ODFDrive,
    detunings: &[f64],
) -> Result<Vec<SweepRow>> {
    let omega_1 = crystal.trap.omega_z;
    let rows: Vec<Result<SweepRow>> = detunings
        .par_iter()
        .map(|&delta| {
            let drive = drive_template.with_beat_note(omega_1 + delta);
            let coupling = coupling_matrix(spectrum, &drive)?;
            let jbar = mean_coupling(&coupling);
            let exponent = match power_law_fit(&coupling, crystal) {
                Ok(fit) => Some(fit.exponent),
                Err(Error::SignMixed) | Err(Error::InsufficientBins { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                detuning: delta,
                jbar,
                jbar_per_intensity_sq: jbar / (drive.intensity * drive.intensity),
                exponent,
            })
        })
        .collect();
    rows.into_iter().collect()
}
