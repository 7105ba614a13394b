//! Translation of laboratory drive settings (beam geometry, intensity,
//! polarization) into model parameters: lattice wave vector, force amplitude,
//! decoherence rate, Stark-shift null, thermal confinement, and wavefront
//! tilt bounds.
//!
//! The absolute force and scattering-rate scales are calibrated operating
//! constants for ⁹Be⁺ driven at 313 nm, 63.8 GHz red of the cycling
//! transition, with beam polarizations at the differential-Stark-shift null
//! (±65.3° from vertical). All other dependences are geometric.

use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, HBAR};
use crate::error::{Error, Result};
use crate::modes::ModeSpectrum;

/// Force amplitude (newton) on one ion at the reference operating point:
/// single-beam intensity 1 W/cm², beam separation angle 4.8°.
pub const REFERENCE_FORCE: f64 = 1.4e-23;

/// Beam separation angle of the reference operating point (radian).
pub const REFERENCE_BEAM_ANGLE: f64 = 4.8 * std::f64::consts::PI / 180.0;

/// Coherence decay rate per unit single-beam intensity (s⁻¹ per W/cm²) from
/// off-resonant light scattering at the reference detuning and polarization.
pub const GAMMA_PER_INTENSITY: f64 = 82.0;

/// Default drive wavelength (meters).
pub const DEFAULT_WAVELENGTH: f64 = 313e-9;

/// Geometry of the two drive beams.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// Optical wavelength (meters).
    pub wavelength: f64,
    /// Angular separation θ_R between the beams (radian).
    pub theta_r: f64,
    /// Wavefront misalignment angle against the crystal plane (radian).
    pub theta_err: f64,
    /// Polarization angles of the upper and lower beams, measured from
    /// vertical (radian).
    pub phi_p_upper: f64,
    pub phi_p_lower: f64,
}

impl BeamGeometry {
    pub fn new(wavelength: f64, theta_r: f64) -> Result<Self> {
        let g = Self {
            wavelength,
            theta_r,
            theta_err: 0.0,
            phi_p_upper: 65.3f64.to_radians(),
            phi_p_lower: -65.3f64.to_radians(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "wavelength must be > 0, got {}",
                self.wavelength
            )));
        }
        if !(self.theta_r > 0.0 && self.theta_r < std::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!(
                "beam separation angle must satisfy 0 < theta_R < pi, got {}",
                self.theta_r
            )));
        }
        Ok(())
    }
}

impl Default for BeamGeometry {
    fn default() -> Self {
        Self {
            wavelength: DEFAULT_WAVELENGTH,
            theta_r: REFERENCE_BEAM_ANGLE,
            theta_err: 0.05f64.to_radians(),
            phi_p_upper: 65.3f64.to_radians(),
            phi_p_lower: -65.3f64.to_radians(),
        }
    }
}

/// Wave-vector difference δk = 2 k sin(θ_R/2) of the two beams (1/m).
pub fn delta_k(geometry: &BeamGeometry) -> f64 {
    2.0 * (2.0 * std::f64::consts::PI / geometry.wavelength) * (geometry.theta_r / 2.0).sin()
}

/// Wavelength λ_R = 2π/δk of the traveling interference lattice (meters).
pub fn lattice_wavelength(geometry: &BeamGeometry) -> f64 {
    2.0 * std::f64::consts::PI / delta_k(geometry)
}

/// Force amplitude (newton) at single-beam intensity `intensity` (W/cm²).
/// Linear in intensity; the angle dependence follows the lattice wave vector,
/// F₀ ∝ δk ∝ sin(θ_R/2).
pub fn f0_from_intensity(intensity: f64, geometry: &BeamGeometry) -> f64 {
    force_amplitude_at(intensity, geometry.theta_r)
}

/// As `f0_from_intensity` with a bare beam angle (radian).
pub fn force_amplitude_at(intensity: f64, theta_r: f64) -> f64 {
    REFERENCE_FORCE * intensity * (theta_r / 2.0).sin() / (REFERENCE_BEAM_ANGLE / 2.0).sin()
}

/// Coherence decay rate Γ (1/s) at single-beam intensity `intensity`
/// (W/cm²). Proportional to intensity; independent of the beam angle.
pub fn gamma_from_intensity(intensity: f64) -> f64 {
    GAMMA_PER_INTENSITY * intensity
}

/// Single-beam AC Stark shifts (rad/s) of the two qubit levels for pure
/// vertical (`a_*`) and pure horizontal (`b_*`) polarization, at a reference
/// intensity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StarkCoefficients {
    pub a_up: f64,
    pub a_down: f64,
    pub b_up: f64,
    pub b_down: f64,
}

/// Differential Stark shift of the qubit transition (rad/s) at polarization
/// angle `phi_p`: (A↑−A↓) cos²φ + (B↑−B↓) sin²φ.
pub fn stark_shift(phi_p: f64, coeffs: &StarkCoefficients) -> f64 {
    let da = coeffs.a_up - coeffs.a_down;
    let db = coeffs.b_up - coeffs.b_down;
    let c = phi_p.cos();
    let s = phi_p.sin();
    da * c * c + db * s * s
}

/// Polarization angle (radian) that nulls the differential Stark shift, if
/// one exists: tan²φ = −(A↑−A↓)/(B↑−B↓) requires the two differences to have
/// opposite signs.
pub fn stark_null_angle(coeffs: &StarkCoefficients) -> Option<f64> {
    let da = coeffs.a_up - coeffs.a_down;
    let db = coeffs.b_up - coeffs.b_down;
    if da * db < 0.0 {
        Some((-da / db).sqrt().atan())
    } else {
        None
    }
}

/// Mean thermal occupation n̄ = k_B T / (ħ ω) of a mode at temperature T.
pub fn thermal_occupation(omega: f64, temperature: f64) -> f64 {
    BOLTZMANN * temperature / (HBAR * omega)
}

/// Per-ion rms axial extent (meters) at temperature `temperature` (kelvin),
/// summing zero-point plus thermal contributions over all transverse modes:
/// z_rms,i = sqrt( Σ_m b_im² (ħ/2Mω_m) (2 n̄_m + 1) ).
pub fn z_rms_profile(spectrum: &ModeSpectrum, temperature: f64) -> Result<Vec<f64>> {
    if temperature < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    let n = spectrum.len();
    let m = spectrum.ion_mass;
    let weights: Vec<f64> = spectrum
        .frequencies
        .iter()
        .map(|&w| {
            let nbar = thermal_occupation(w, temperature);
            (HBAR / (2.0 * m * w)) * (2.0 * nbar + 1.0)
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = 0.0;
        for (mode, &w) in weights.iter().enumerate() {
            let b = spectrum.amplitude(i, mode);
            acc += b * b * w;
        }
        out.push(acc.sqrt());
    }
    Ok(out)
}

/// Lamb-Dicke confinement parameter η = δk · z_rms for one ion.
pub fn lamb_dicke_parameter(z_rms: f64, geometry: &BeamGeometry) -> f64 {
    delta_k(geometry) * z_rms
}

/// Wavefront-tilt modulation index δk · 2 R_P · sin(θ_err) for an array of
/// radius `r_p` (meters). Values below 1 keep the drive phase coherent
/// across the rotating array.
pub fn tilt_modulation_index(geometry: &BeamGeometry, r_p: f64) -> f64 {
    delta_k(geometry) * 2.0 * r_p * geometry.theta_err.sin()
}
