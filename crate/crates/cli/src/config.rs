//! Scenario configuration: one human-editable TOML file bundling trap,
//! beam, drive, sweep, and sequence settings. Every dimensioned key carries
//! its unit in the name; unknown keys are rejected.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use drumhead::calib::BeamGeometry;
use drumhead::constants::{BERYLLIUM_9_ION_MASS, ELEMENTARY_CHARGE};
use drumhead::trap::{TrapConfig, DEFAULT_GRAD_TOL, DEFAULT_WALL_STRENGTH};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub trap: TrapSection,
    #[serde(default)]
    pub crystal: CrystalSection,
    #[serde(default)]
    pub beams: BeamSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub sequence: SequenceSection,
    #[serde(default)]
    pub environment: EnvironmentSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    #[serde(rename = "b0_T")]
    pub b0_t: f64,
    /// Axial frequency; give exactly one of the two suffixes.
    #[serde(rename = "omega_z_kHz")]
    pub omega_z_khz: Option<f64>,
    #[serde(rename = "omega_z_MHz")]
    pub omega_z_mhz: Option<f64>,
    /// Rotation frequency; give exactly one of the two suffixes.
    #[serde(rename = "omega_r_kHz")]
    pub omega_r_khz: Option<f64>,
    #[serde(rename = "omega_r_MHz")]
    pub omega_r_mhz: Option<f64>,
    pub wall_strength: f64,
    /// Ion species; defaults are a ⁹Be⁺ ion.
    pub ion_mass_kg: Option<f64>,
    pub ion_charge_e: Option<f64>,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            b0_t: 4.46,
            omega_z_khz: Some(795.0),
            omega_z_mhz: None,
            omega_r_khz: Some(45.6),
            omega_r_mhz: None,
            wall_strength: DEFAULT_WALL_STRENGTH,
            ion_mass_kg: None,
            ion_charge_e: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    pub n_ions: usize,
    /// Seed-lattice spacing; omitted means the continuum estimate.
    pub seed_spacing_um: Option<f64>,
    #[serde(rename = "grad_tol_N")]
    pub grad_tol_n: f64,
}

impl Default for CrystalSection {
    fn default() -> Self {
        Self {
            n_ions: 217,
            seed_spacing_um: None,
            grad_tol_n: DEFAULT_GRAD_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub wavelength_nm: f64,
    #[serde(rename = "theta_R_deg")]
    pub theta_r_deg: f64,
    pub theta_err_deg: f64,
    pub phi_p_deg: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            wavelength_nm: 313.0,
            theta_r_deg: 4.8,
            theta_err_deg: 0.05,
            phi_p_deg: 65.3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    #[serde(rename = "intensity_W_per_cm2")]
    pub intensity_w_per_cm2: f64,
    /// Beat-note detuning from the axial frequency; exactly one suffix.
    #[serde(rename = "detuning_kHz")]
    pub detuning_khz: Option<f64>,
    #[serde(rename = "detuning_MHz")]
    pub detuning_mhz: Option<f64>,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            intensity_w_per_cm2: 1.0,
            detuning_khz: Some(4.0),
            detuning_mhz: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(rename = "detunings_kHz")]
    pub detunings_khz: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            detunings_khz: vec![
                0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0,
            ],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    pub tau_arm_us: f64,
    pub theta_points: usize,
    /// Synthetic mode: run the sequence for `n_spins` at this fixed
    /// dimensionless interaction strength instead of deriving the couplings
    /// from the crystal pipeline.
    pub chi_2tau: Option<f64>,
    pub n_spins: Option<usize>,
    /// Overrides the intensity-derived decoherence rate.
    pub gamma_per_s: Option<f64>,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            tau_arm_us: 250.0,
            theta_points: 181,
            chi_2tau: None,
            n_spins: None,
            gamma_per_s: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSection {
    #[serde(rename = "temperature_mK")]
    pub temperature_mk: f64,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        Self {
            temperature_mk: 1.0,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            trap: TrapSection::default(),
            crystal: CrystalSection::default(),
            beams: BeamSection::default(),
            drive: DriveSection::default(),
            sweep: SweepSection::default(),
            sequence: SequenceSection::default(),
            environment: EnvironmentSection::default(),
        }
    }
}

fn frequency_rad_s(name: &str, khz: Option<f64>, mhz: Option<f64>) -> Result<f64> {
    match (khz, mhz) {
        (Some(k), None) => Ok(TWO_PI * k * 1e3),
        (None, Some(m)) => Ok(TWO_PI * m * 1e6),
        (None, None) => bail!("{name}: give either the _kHz or the _MHz key"),
        (Some(_), Some(_)) => bail!("{name}: give only one of the _kHz and _MHz keys"),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).context("parsing scenario config")?;
        cfg.trap_config()?; // validate eagerly
        cfg.beam_geometry()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text)
    }

    pub fn trap_config(&self) -> Result<TrapConfig> {
        let omega_z =
            frequency_rad_s("trap.omega_z", self.trap.omega_z_khz, self.trap.omega_z_mhz)?;
        let omega_r =
            frequency_rad_s("trap.omega_r", self.trap.omega_r_khz, self.trap.omega_r_mhz)?;
        let mass = self.trap.ion_mass_kg.unwrap_or(BERYLLIUM_9_ION_MASS);
        let charge = self.trap.ion_charge_e.unwrap_or(1.0) * ELEMENTARY_CHARGE;
        Ok(TrapConfig::new(
            self.trap.b0_t,
            omega_z,
            omega_r,
            self.trap.wall_strength,
            mass,
            charge,
        )?)
    }

    pub fn beam_geometry(&self) -> Result<BeamGeometry> {
        let mut g = BeamGeometry::new(
            self.beams.wavelength_nm * 1e-9,
            self.beams.theta_r_deg.to_radians(),
        )?;
        g.theta_err = self.beams.theta_err_deg.to_radians();
        g.phi_p_upper = self.beams.phi_p_deg.to_radians();
        g.phi_p_lower = -self.beams.phi_p_deg.to_radians();
        Ok(g)
    }

    /// Drive beat-note detuning from the axial frequency (rad/s).
    pub fn drive_detuning(&self) -> Result<f64> {
        match (self.drive.detuning_khz, self.drive.detuning_mhz) {
            (Some(k), None) => Ok(TWO_PI * k * 1e3),
            (None, Some(m)) => Ok(TWO_PI * m * 1e6),
            (None, None) => bail!("drive.detuning: give either the _kHz or the _MHz key"),
            (Some(_), Some(_)) => {
                bail!("drive.detuning: give only one of the _kHz and _MHz keys")
            }
        }
    }

    pub fn sweep_detunings_rad_s(&self) -> Vec<f64> {
        self.sweep
            .detunings_khz
            .iter()
            .map(|k| TWO_PI * k * 1e3)
            .collect()
    }

    pub fn tau_arm_s(&self) -> f64 {
        self.sequence.tau_arm_us * 1e-6
    }

    pub fn temperature_k(&self) -> f64 {
        self.environment.temperature_mk * 1e-3
    }
}
