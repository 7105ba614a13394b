//! Transverse (out-of-plane) normal modes of a planar crystal.
//!
//! Small axial displacements about a planar equilibrium obey
//! M z̈_i + Σ_j K_ij z_j = 0 with the stiffness matrix
//!
//! ```text
//! K_ii = M ω₁²  −  Σ_{n≠i} k q² / r_ni³
//! K_ij =  k q² / r_ij³            (i ≠ j)
//! ```
//!
//! Eigenvalues of K / M are the squared mode frequencies ω_m². Every row of
//! K sums to M ω₁², so the uniform vector is always an eigenvector: the
//! center-of-mass mode, which is also the highest-frequency mode.

use nalgebra::{DMatrix, DVector};

use crate::constants::COULOMB_CONSTANT;
use crate::error::{Error, Result};
use crate::trap::{
    minimize_equilibrium_traced, seed_for_count, suggest_seed_spacing, IonCrystal, MinimizeOptions,
    TrapConfig,
};

/// Bisection tolerance on the rotation frequency for the plane-transition
/// scan (rad/s).
pub const TRANSITION_TOL: f64 = 2.0 * std::f64::consts::PI * 50.0;

/// The N transverse eigenfrequencies and orthonormal eigenvectors of a
/// planar crystal, sorted by descending frequency (index 0 is the
/// center-of-mass mode).
#[derive(Debug, Clone)]
pub struct ModeSpectrum {
    /// Mode angular frequencies ω_m (rad/s), descending.
    pub frequencies: Vec<f64>,
    /// Column m holds the eigenvector b_{i,m}; columns are orthonormal and
    /// sign-fixed so the largest-magnitude entry is positive.
    pub mode_matrix: DMatrix<f64>,
    /// Single-ion mass (kilograms), carried from the source crystal.
    pub ion_mass: f64,
}

impl ModeSpectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Mode amplitude b_{i,m} of ion `i` in mode `m`.
    pub fn amplitude(&self, ion: usize, mode: usize) -> f64 {
        self.mode_matrix[(ion, mode)]
    }

    /// Convenience pipeline: stiffness matrix of `crystal`, then the
    /// eigenproblem.
    pub fn of_crystal(crystal: &IonCrystal) -> Result<Self> {
        let k = stiffness_matrix(crystal)?;
        transverse_modes(&k, crystal.trap.ion_mass)
    }
}

/// Transverse stiffness matrix (newton per meter) of a converged crystal.
pub fn stiffness_matrix(crystal: &IonCrystal) -> Result<DMatrix<f64>> {
    if crystal.gradient_norm > crystal.tol {
        return Err(Error::InvalidConfig(format!(
            "crystal not converged: residual {:.3e} N exceeds tolerance {:.3e} N",
            crystal.gradient_norm, crystal.tol
        )));
    }
    stiffness_of_positions(&crystal.positions, &crystal.trap)
}

/// Stiffness matrix for explicit positions. Exactly symmetric by
/// construction: each pair term is computed once and written to both
/// triangles.
pub fn stiffness_of_positions(positions: &[[f64; 2]], trap: &TrapConfig) -> Result<DMatrix<f64>> {
    let n = positions.len();
    let kq2 = COULOMB_CONSTANT * trap.ion_charge * trap.ion_charge;
    let m_w2 = trap.ion_mass * trap.omega_z * trap.omega_z;

    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            let r2 = dx * dx + dy * dy;
            if r2 == 0.0 {
                return Err(Error::SingularConfiguration { i, j });
            }
            let t = kq2 / (r2 * r2.sqrt());
            k[(i, j)] = t;
            k[(j, i)] = t;
        }
    }
    for i in 0..n {
        let mut coul = 0.0;
        for j in 0..n {
            if j != i {
                coul += k[(i, j)];
            }
        }
        k[(i, i)] = m_w2 - coul;
    }
    Ok(k)
}

/// Solves the symmetric eigenproblem of K / M and returns the mode spectrum.
///
/// Frequencies are the square roots of the eigenvalues, sorted descending.
/// Any negative eigenvalue means the planar configuration is unstable against
/// out-of-plane buckling; the error reports how many modes are unstable.
pub fn transverse_modes(k: &DMatrix<f64>, ion_mass: f64) -> Result<ModeSpectrum> {
    let (eigenvalues, vectors) = eigen_descending(k, ion_mass);
    let unstable = eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if unstable > 0 {
        return Err(Error::Instability {
            unstable_modes: unstable,
        });
    }
    Ok(ModeSpectrum {
        frequencies: eigenvalues.iter().map(|l| l.sqrt()).collect(),
        mode_matrix: vectors,
        ion_mass,
    })
}

/// Eigenvalues of K / M sorted descending, with sign-fixed eigenvectors.
/// Exposed for stability scans that must inspect negative eigenvalues.
pub fn eigen_descending(k: &DMatrix<f64>, ion_mass: f64) -> (Vec<f64>, DMatrix<f64>) {
    let n = k.nrows();
    let a = k.map(|v| v / ion_mass);
    let decomp = a.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        decomp.eigenvalues[j]
            .partial_cmp(&decomp.eigenvalues[i])
            .expect("finite eigenvalues")
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (m, &idx) in order.iter().enumerate() {
        values.push(decomp.eigenvalues[idx]);
        let col = decomp.eigenvectors.column(idx);
        // deterministic sign: largest-magnitude entry positive
        let mut pivot = 0;
        let mut best = 0.0f64;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                pivot = i;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, m)] = flip * col[i];
        }
    }
    (values, vectors)
}

/// Smallest eigenvalue of K / M for the equilibrium crystal of `n` ions at
/// rotation frequency `omega_r` (template's other parameters unchanged).
fn min_eigenvalue_at(n: usize, template: &TrapConfig, omega_r: f64) -> Result<f64> {
    let trap = template.with_omega_r(omega_r)?;
    let spacing = suggest_seed_spacing(n, &trap);
    let seed = seed_for_count(n, spacing);
    let crystal = minimize_equilibrium_traced(&seed, &trap, &MinimizeOptions::default(), None)?;
    let k = stiffness_matrix(&crystal)?;
    let m = trap.ion_mass;
    let min = k
        .map(|v| v / m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(min)
}

/// Critical rotation frequency (rad/s) at which the softest transverse mode
/// of the `n`-ion crystal crosses zero: the single- to two-plane transition.
///
/// Bisects `omega_r_range` on the sign of the minimum eigenvalue of K / M,
/// re-solving the equilibrium at every step, until the bracket is narrower
/// than `TRANSITION_TOL`.
pub fn plane_transition_scan(
    n: usize,
    template: &TrapConfig,
    omega_r_range: (f64, f64),
) -> Result<f64> {
    let (mut lo, mut hi) = omega_r_range;
    if !(lo < hi) {
        return Err(Error::InvalidConfig(format!(
            "empty scan range ({lo}, {hi})"
        )));
    }
    let f_lo = min_eigenvalue_at(n, template, lo)?;
    let f_hi = min_eigenvalue_at(n, template, hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket);
    }
    // orient so the stable side is `lo`
    if f_lo < 0.0 {
        std::mem::swap(&mut lo, &mut hi);
    }
    while (hi - lo).abs() > TRANSITION_TOL {
        let mid = 0.5 * (lo + hi);
        let f_mid = min_eigenvalue_at(n, template, mid)?;
        if f_mid >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Reconstruction residual ‖K/M − B Λ Bᵀ‖ / ‖K/M‖ (Frobenius), a solver
/// self-check used by tests and the validation suite.
pub fn reconstruction_residual(k: &DMatrix<f64>, spectrum: &ModeSpectrum) -> f64 {
    let a = k.map(|v| v / spectrum.ion_mass);
    let lambda = DVector::from_iterator(spectrum.len(), spectrum.frequencies.iter().map(|w| w * w));
    let b = &spectrum.mode_matrix;
    let rebuilt = b * DMatrix::from_diagonal(&lambda) * b.transpose();
    (&a - rebuilt).norm() / a.norm()
}
