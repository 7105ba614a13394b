// Physical constants in SI units, CODATA 2018 recommended values.

/// Reduced Planck constant (joule seconds).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant (joules per kelvin).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Vacuum permittivity (farads per meter).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;

/// Coulomb constant k = 1/(4πε₀) (newton square meters per square coulomb).
pub const COULOMB_CONSTANT: f64 = 8.987_551_792_3e9;

/// Elementary charge (coulombs).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Unified atomic mass unit (kilograms).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Electron mass (kilograms).
pub const ELECTRON_MASS: f64 = 9.109_383_7015e-31;

/// Mass of a ⁹Be⁺ ion (kilograms): 9.012182 u minus one electron mass.
pub const BERYLLIUM_9_ION_MASS: f64 = 9.012182 * ATOMIC_MASS_UNIT - ELECTRON_MASS;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coulomb_constant_matches_permittivity() {
        let derived = 1.0 / (4.0 * std::f64::consts::PI * VACUUM_PERMITTIVITY);
        let rel = (derived - COULOMB_CONSTANT).abs() / COULOMB_CONSTANT;
        assert!(rel < 1e-9, "relative error {rel}");
    }

    #[test]
    fn beryllium_ion_mass_in_expected_range() {
        assert!(BERYLLIUM_9_ION_MASS > 1.4963e-26);
        assert!(BERYLLIUM_9_ION_MASS < 1.4965e-26);
    }
}
