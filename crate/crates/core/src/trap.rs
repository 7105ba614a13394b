//! Planar equilibrium configurations of ions in a rotating-frame trap.
//!
//! In a frame co-rotating with the crystal at `omega_r`, the time-averaged
//! potential seen by ion i confined to the z = 0 plane is
//!
//! ```text
//! U_i = ½ M ω₁² β r_i²  +  δ_wall ½ M ω₁² (x_i² − y_i²)
//! β   = ω_r (Ω_c − ω_r) / ω₁²  −  ½,      Ω_c = B₀ q / M
//! ```
//!
//! plus the pairwise Coulomb repulsion k q² / r_ij. Radial confinement
//! requires β > 0; the weak rotating-wall term (δ_wall) pins the crystal
//! orientation and makes minima reproducible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::COULOMB_CONSTANT;
use crate::error::{Error, Result};

/// Default dimensionless rotating-wall amplitude. Small enough not to distort
/// the lattice constant, large enough to pin the crystal orientation.
pub const DEFAULT_WALL_STRENGTH: f64 = 1e-3;

/// Default gradient tolerance (newton per Cartesian component), about 1e-5
/// of the inter-ion forces in a beryllium-scale crystal. Positions are then
/// equilibrated to roughly a nanometer on a 20 µm lattice. Residuals much
/// below 1e-24 N are not reachable in double precision because the energy
/// decrease per step falls under the representable resolution.
pub const DEFAULT_GRAD_TOL: f64 = 1e-23;

/// Default iteration cap for the equilibrium search.
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;

/// Static trap, field, and rotation parameters defining the rotating-frame
/// potential. All fields are SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Axial magnetic field B₀ (tesla).
    #[serde(rename = "b0_tesla")]
    pub b0: f64,
    /// Axial center-of-mass angular frequency ω₁ (rad/s).
    #[serde(rename = "omega_z_rad_s")]
    pub omega_z: f64,
    /// Crystal rotation angular frequency ω_r (rad/s).
    #[serde(rename = "omega_r_rad_s")]
    pub omega_r: f64,
    /// Dimensionless rotating-wall amplitude δ_wall ≥ 0, as a fraction of
    /// ½ M ω₁² in the quadrupole term.
    pub wall_strength: f64,
    /// Single-ion mass (kilograms).
    #[serde(rename = "ion_mass_kg")]
    pub ion_mass: f64,
    /// Ion charge (coulombs).
    #[serde(rename = "ion_charge_coulomb")]
    pub ion_charge: f64,
}

impl TrapConfig {
    /// Validates the parameter set: positivity, magnetron stability
    /// (Ω_c > 2 ω_r), and the existence of radial confinement (β > 0).
    pub fn new(
        b0: f64,
        omega_z: f64,
        omega_r: f64,
        wall_strength: f64,
        ion_mass: f64,
        ion_charge: f64,
    ) -> Result<Self> {
        let cfg = Self {
            b0,
            omega_z,
            omega_r,
            wall_strength,
            ion_mass,
            ion_charge,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b0", self.b0),
            ("omega_z", self.omega_z),
            ("omega_r", self.omega_r),
            ("ion_mass", self.ion_mass),
            ("ion_charge", self.ion_charge),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        if !(self.wall_strength >= 0.0) || !self.wall_strength.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "wall_strength must be >= 0, got {}",
                self.wall_strength
            )));
        }
        let omega_c = self.cyclotron_frequency();
        if omega_c <= 2.0 * self.omega_r {
            return Err(Error::InvalidConfig(format!(
                "magnetron stability requires Omega_c > 2 omega_r \
                 (Omega_c = {omega_c:.6e} rad/s, omega_r = {:.6e} rad/s)",
                self.omega_r
            )));
        }
        let beta = self.beta();
        if beta <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "no radial confinement: beta = {beta:.6e} <= 0"
            )));
        }
        Ok(())
    }

    /// Cyclotron frequency Ω_c = B₀ q / M (rad/s).
    pub fn cyclotron_frequency(&self) -> f64 {
        self.b0 * self.ion_charge / self.ion_mass
    }

    /// Dimensionless radial stiffness β = ω_r (Ω_c − ω_r) / ω₁² − ½.
    pub fn beta(&self) -> f64 {
        let wc = self.cyclotron_frequency();
        self.omega_r * (wc - self.omega_r) / (self.omega_z * self.omega_z) - 0.5
    }

    /// Radial trap stiffness M ω₁² β (newton per meter).
    pub fn radial_stiffness(&self) -> f64 {
        self.ion_mass * self.omega_z * self.omega_z * self.beta()
    }

    /// Copy of this configuration with a different rotation frequency.
    pub fn with_omega_r(&self, omega_r: f64) -> Result<Self> {
        Self::new(
            self.b0,
            self.omega_z,
            omega_r,
            self.wall_strength,
            self.ion_mass,
            self.ion_charge,
        )
    }
}

/// Converged planar equilibrium: N in-plane positions in the rotating frame
/// plus convergence metadata.
#[derive(Debug, Clone)]
pub struct IonCrystal {
    /// Ion positions (x, y) in meters, rotating frame, z = 0 plane.
    pub positions: Vec<[f64; 2]>,
    pub trap: TrapConfig,
    /// Rotating-frame potential energy at the returned configuration (joule).
    pub potential_energy: f64,
    /// Largest absolute Cartesian gradient component at convergence (newton).
    pub gradient_norm: f64,
    /// Gradient tolerance the search was run with (newton).
    pub tol: f64,
    /// Accepted minimizer iterations performed.
    pub iterations: usize,
}

impl IonCrystal {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Largest ion radius from the trap axis (meters).
    pub fn radius(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1]).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Number of ions in a hexagonal arrangement with `shells` closed shells:
/// 1 + 3 s (s + 1).
pub fn closed_shell_count(shells: usize) -> usize {
    1 + 3 * shells * (shells + 1)
}

/// Regular triangular lattice with `shells` closed hexagonal shells centered
/// at the origin, one lattice axis along x̂. Nearest-neighbor distance is
/// `spacing` (meters).
pub fn seed_lattice(shells: usize, spacing: f64) -> Vec<[f64; 2]> {
    let s = shells as i64;
    let mut points = Vec::with_capacity(closed_shell_count(shells));
    for q in -s..=s {
        let lo = (-s).max(-q - s);
        let hi = s.min(-q + s);
        for r in lo..=hi {
            let x = spacing * (q as f64 + 0.5 * r as f64);
            let y = spacing * (3.0f64.sqrt() / 2.0) * r as f64;
            points.push([x, y]);
        }
    }
    points
}

/// Seed positions for an arbitrary ion count: the smallest closed-shell
/// lattice with at least `n` sites, with the outermost sites removed.
/// Removal order is deterministic (descending radius, then descending
/// azimuth).
pub fn seed_for_count(n: usize, spacing: f64) -> Vec<[f64; 2]> {
    let mut shells = 0;
    while closed_shell_count(shells) < n {
        shells += 1;
    }
    let mut points = seed_lattice(shells, spacing);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = points[a][0] * points[a][0] + points[a][1] * points[a][1];
        let rb = points[b][0] * points[b][0] + points[b][1] * points[b][1];
        let ta = points[a][1].atan2(points[a][0]);
        let tb = points[b][1].atan2(points[b][0]);
        (rb, tb)
            .partial_cmp(&(ra, ta))
            .expect("finite lattice coordinates")
    });
    order.truncate(points.len() - n);
    order.sort_unstable_by(|a, b| b.cmp(a));
    for idx in order {
        points.remove(idx);
    }
    points
}

/// Heuristic nearest-neighbor spacing for an N-ion crystal in this trap,
/// from the continuum density profile of a harmonically confined 2D charge
/// cloud. Used to pick seed-lattice spacings.
pub fn suggest_seed_spacing(n: usize, trap: &TrapConfig) -> f64 {
    let kq2 = COULOMB_CONSTANT * trap.ion_charge * trap.ion_charge;
    let stiffness = trap.radial_stiffness();
    if n < 2 {
        // any positive length works for a single ion
        return (kq2 / stiffness).cbrt();
    }
    let r = (3.0 * n as f64 * kq2 / (2.0 * stiffness)).cbrt();
    let sigma0 = 3.0 * n as f64 / (2.0 * std::f64::consts::PI * r * r);
    (2.0 / (3.0f64.sqrt() * sigma0)).sqrt()
}

fn check_distinct(positions: &[[f64; 2]]) -> Result<()> {
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            if dx == 0.0 && dy == 0.0 {
                return Err(Error::SingularConfiguration { i, j });
            }
        }
    }
    Ok(())
}

/// Rotating-frame potential energy (joule) of a planar configuration:
/// trap + wall terms per ion plus the pairwise Coulomb sum.
///
/// Summation order is fixed (per-ion partial sums over higher indices,
/// reduced in ion order), so results are bitwise reproducible regardless of
/// the thread count used internally.
pub fn rotating_frame_energy(positions: &[[f64; 2]], trap: &TrapConfig) -> Result<f64> {
    check_distinct(positions)?;
    Ok(energy_unchecked(positions, trap))
}

fn energy_unchecked(positions: &[[f64; 2]], trap: &TrapConfig) -> f64 {
    let kq2 = COULOMB_CONSTANT * trap.ion_charge * trap.ion_charge;
    let half_m_w2 = 0.5 * trap.ion_mass * trap.omega_z * trap.omega_z;
    let beta = trap.beta();
    let delta = trap.wall_strength;

    let partials: Vec<f64> = positions
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let [x, y] = *p;
            let mut e = half_m_w2 * (beta * (x * x + y * y) + delta * (x * x - y * y));
            for q in &positions[i + 1..] {
                let dx = x - q[0];
                let dy = y - q[1];
                e += kq2 / (dx * dx + dy * dy).sqrt();
            }
            e
        })
        .collect();
    partials.iter().sum()
}

/// Analytic gradient of `rotating_frame_energy` (newton), flattened as
/// [dE/dx₀, dE/dy₀, dE/dx₁, ...]. Deterministic for fixed ion order.
pub fn energy_gradient(positions: &[[f64; 2]], trap: &TrapConfig) -> Result<Vec<f64>> {
    check_distinct(positions)?;
    Ok(gradient_unchecked(positions, trap))
}

fn gradient_unchecked(positions: &[[f64; 2]], trap: &TrapConfig) -> Vec<f64> {
    let kq2 = COULOMB_CONSTANT * trap.ion_charge * trap.ion_charge;
    let m_w2 = trap.ion_mass * trap.omega_z * trap.omega_z;
    let beta = trap.beta();
    let delta = trap.wall_strength;

    let per_ion: Vec<[f64; 2]> = (0..positions.len())
        .into_par_iter()
        .map(|i| {
            let [x, y] = positions[i];
            let mut gx = m_w2 * (beta + delta) * x;
            let mut gy = m_w2 * (beta - delta) * y;
            for (j, q) in positions.iter().enumerate() {
                if j == i {
                    continue;
                }
                let dx = x - q[0];
                let dy = y - q[1];
                let r2 = dx * dx + dy * dy;
                let inv_r3 = 1.0 / (r2 * r2.sqrt());
                gx -= kq2 * dx * inv_r3;
                gy -= kq2 * dy * inv_r3;
            }
            [gx, gy]
        })
        .collect();

    let mut flat = Vec::with_capacity(2 * positions.len());
    for g in per_ion {
        flat.push(g[0]);
        flat.push(g[1]);
    }
    flat
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Options for the equilibrium search.
#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    /// Gradient tolerance per Cartesian component (newton).
    pub tol: f64,
    /// Iteration cap.
    pub max_iterations: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_GRAD_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Energies of the accepted iterates, for descent diagnostics.
#[derive(Debug, Clone, Default)]
pub struct MinimizeTrace {
    pub energies: Vec<f64>,
}

/// Finds a local minimum of the rotating-frame energy from `seed` positions,
/// to gradient tolerance `tol` (newton per component).
pub fn minimize_equilibrium(seed: &[[f64; 2]], trap: &TrapConfig, tol: f64) -> Result<IonCrystal> {
    let opts = MinimizeOptions {
        tol,
        ..MinimizeOptions::default()
    };
    minimize_equilibrium_traced(seed, trap, &opts, None)
}

/// As `minimize_equilibrium`, with explicit options and an optional trace of
/// accepted energies.
///
/// L-BFGS (two-loop recursion, memory 12) with Armijo backtracking. The first
/// step of each line search is capped so no ion moves more than a fifth of
/// the seed's minimum pair distance, which prevents early ion collisions.
pub fn minimize_equilibrium_traced(
    seed: &[[f64; 2]],
    trap: &TrapConfig,
    opts: &MinimizeOptions,
    mut trace: Option<&mut MinimizeTrace>,
) -> Result<IonCrystal> {
    trap.validate()?;
    check_distinct(seed)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "gradient tolerance must be > 0, got {}",
            opts.tol
        )));
    }

    let n = seed.len();
    let dim = 2 * n;
    let mut x: Vec<f64> = seed.iter().flat_map(|p| [p[0], p[1]]).collect();

    let mut min_seed_dist = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = seed[i][0] - seed[j][0];
            let dy = seed[i][1] - seed[j][1];
            min_seed_dist = min_seed_dist.min((dx * dx + dy * dy).sqrt());
        }
    }
    let max_step_len = if n > 1 { 0.2 * min_seed_dist } else { 1.0 };

    let as_positions =
        |v: &[f64]| -> Vec<[f64; 2]> { v.chunks_exact(2).map(|c| [c[0], c[1]]).collect() };

    let mut pos = as_positions(&x);
    let mut energy = energy_unchecked(&pos, trap);
    let mut grad = gradient_unchecked(&pos, trap);
    if let Some(t) = trace.as_deref_mut() {
        t.energies.push(energy);
    }

    const MEMORY: usize = 12;
    const ARMIJO_C1: f64 = 1e-4;
    const MAX_BACKTRACKS: usize = 40;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    // most recent curvature scale sᵀy / yᵀy; survives memory resets so that
    // plain gradient steps stay dimensionally sensible (meters per newton)
    let mut last_gamma: Option<f64> = None;

    let mut iterations = 0usize;
    let mut converged = max_abs(&grad) <= opts.tol;

    // Once the per-step energy decrease falls under the float resolution of
    // the total energy, the Armijo test stops discriminating. The search
    // then switches to accepting steps on gradient-norm decrease (with the
    // energy still not allowed to increase), which drives the residual to
    // the rounding floor.
    let mut refining = false;
    let mut stall_count = 0usize;

    while !converged && iterations < opts.max_iterations {
        // two-loop recursion for d = -H g
        let mut d = grad.clone();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &d);
            for j in 0..dim {
                d[j] -= alpha[i] * y_hist[i][j];
            }
        }
        if k > 0 {
            let sy = dot(&s_hist[k - 1], &y_hist[k - 1]);
            let yy = dot(&y_hist[k - 1], &y_hist[k - 1]);
            if yy > 0.0 {
                let gamma = sy / yy;
                last_gamma = Some(gamma);
                for dj in d.iter_mut() {
                    *dj *= gamma;
                }
            }
        } else if let Some(gamma) = last_gamma {
            for dj in d.iter_mut() {
                *dj *= gamma;
            }
        }
        for i in 0..k {
            let b = rho_hist[i] * dot(&y_hist[i], &d);
            for j in 0..dim {
                d[j] += (alpha[i] - b) * s_hist[i][j];
            }
        }
        for dj in d.iter_mut() {
            *dj = -*dj;
        }

        let mut dg = dot(&d, &grad);
        if !(dg < 0.0) {
            // not a descent direction; reset to steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for j in 0..dim {
                d[j] = -grad[j];
            }
            dg = dot(&d, &grad);
            if !(dg < 0.0) {
                break; // gradient numerically zero
            }
        }

        // cap the trial step so no ion moves more than max_step_len
        let max_ion_move = d
            .chunks_exact(2)
            .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
            .fold(0.0, f64::max);
        let mut step = if max_ion_move > max_step_len {
            max_step_len / max_ion_move
        } else {
            1.0
        };

        let grad_inf = max_abs(&grad);
        let mut x_new = vec![0.0; dim];
        let mut accepted = None; // (positions, energy, gradient)
        for _ in 0..MAX_BACKTRACKS {
            for j in 0..dim {
                x_new[j] = x[j] + step * d[j];
            }
            let p_new = as_positions(&x_new);
            let e = energy_unchecked(&p_new, trap);
            if refining {
                if e <= energy {
                    let g = gradient_unchecked(&p_new, trap);
                    if max_abs(&g) < grad_inf {
                        accepted = Some((p_new, e, g));
                        break;
                    }
                }
            } else if e <= energy + ARMIJO_C1 * step * dg {
                let g = gradient_unchecked(&p_new, trap);
                accepted = Some((p_new, e, g));
                break;
            }
            step *= 0.5;
        }

        let Some((p_new, e_new, g_new)) = accepted else {
            if !refining {
                refining = true;
                continue;
            }
            if !s_hist.is_empty() {
                // stale curvature can point the quasi-Newton step uphill in
                // the gradient norm; retry from a plain scaled-gradient step
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            break; // no further progress possible
        };

        if !refining {
            // track whether the Armijo decreases still resolve in f64
            let decrease = energy - e_new;
            if decrease <= 4.0 * energy.abs() * f64::EPSILON {
                stall_count += 1;
                if stall_count >= 2 {
                    refining = true;
                }
            } else {
                stall_count = 0;
            }
        }

        let s: Vec<f64> = (0..dim).map(|j| x_new[j] - x[j]).collect();
        let y: Vec<f64> = (0..dim).map(|j| g_new[j] - grad[j]).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 && sy.is_finite() {
            if s_hist.len() == MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }

        x = x_new;
        pos = p_new;
        energy = e_new;
        grad = g_new;
        iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.energies.push(energy);
        }
        converged = max_abs(&grad) <= opts.tol;
    }

    let gradient_norm = max_abs(&grad);
    let crystal = IonCrystal {
        positions: pos,
        trap: *trap,
        potential_energy: energy,
        gradient_norm,
        tol: opts.tol,
        iterations,
    };
    if gradient_norm <= opts.tol {
        Ok(crystal)
    } else {
        Err(Error::NonConvergence {
            iterations,
            gradient_norm,
            tol: opts.tol,
            best: Box::new(crystal),
        })
    }
}

/// Convenience path: seed an `n`-ion crystal with the suggested spacing and
/// minimize at the default tolerance.
pub fn equilibrium_for_count(n: usize, trap: &TrapConfig) -> Result<IonCrystal> {
    let spacing = suggest_seed_spacing(n, trap);
    let seed = seed_for_count(n, spacing);
    minimize_equilibrium(&seed, trap, DEFAULT_GRAD_TOL)
}

/// Typical nearest-neighbor distance d₀: the median of per-ion
/// nearest-neighbor distances over ions in the inner half of the crystal
/// (radius ≤ half the maximum radius). Falls back to all ions when the inner
/// region is empty.
pub fn nearest_neighbor_spacing(crystal: &IonCrystal) -> Result<f64> {
    let pos = &crystal.positions;
    let n = pos.len();
    if n < 2 {
        return Err(Error::Arity {
            required: 2,
            actual: n,
        });
    }

    let mut nn = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = pos[i][0] - pos[j][0];
            let dy = pos[i][1] - pos[j][1];
            let d = (dx * dx + dy * dy).sqrt();
            if d < nn[i] {
                nn[i] = d;
            }
            if d < nn[j] {
                nn[j] = d;
            }
        }
    }

    let r_max = crystal.radius();
    let half = 0.5 * r_max;
    let mut inner: Vec<f64> = pos
        .iter()
        .zip(&nn)
        .filter(|(p, _)| (p[0] * p[0] + p[1] * p[1]).sqrt() <= half)
        .map(|(_, &d)| d)
        .collect();
    if inner.is_empty() {
        inner = nn;
    }
    inner.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let m = inner.len();
    let d0 = if m % 2 == 1 {
        inner[m / 2]
    } else {
        0.5 * (inner[m / 2 - 1] + inner[m / 2])
    };
    Ok(d0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
