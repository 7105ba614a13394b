//! Spin-echo benchmarking dynamics: the closed-form mean-field precession
//! signal, exact collective-spin evolution under a uniform Jz² interaction,
//! and a full state-vector oracle for small spin counts.
//!
//! The echo sequence starts from all spins up, tips by θ₁ about x̂, evolves
//! under the Ising interaction for τ in each of two arms separated by a π
//! pulse about ŷ, and ends with a π/2 pulse about ŷ:
//!
//! ```text
//! U_seq = R(ŷ, π/2) · U(τ) · R(ŷ, π) · U(τ) · R(x̂, θ₁)
//! ```
//!
//! Mean-field theory predicts P(↑) = ½(1 + e^{−2Γτ} sinθ₁ sin(2 J̄ cosθ₁ · 2τ)).
//! The exact engine works in the symmetric |J, M⟩ basis (J = N/2, dimension
//! N + 1), where the uniform interaction is the diagonal phase
//! e^{−i (2χ/N) M² t} and rotations are spin-J matrix exponentials.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::calib::thermal_occupation;
use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::ising::ODFDrive;
use crate::modes::ModeSpectrum;

/// State-vector size cap for the brute-force engine.
pub const MAX_BRUTE_FORCE_SPINS: usize = 12;

/// Parameters of one echo-sequence evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SequenceParams {
    /// Initial tipping angle θ₁ (radian).
    pub theta_1: f64,
    /// Duration of each interaction arm (seconds).
    pub tau_arm: f64,
    /// Crystal-averaged coupling J̄ (rad/s) for the mean-field formula.
    pub j_bar: f64,
    /// Coherence decay rate Γ (1/s).
    pub gamma: f64,
    /// Uniform coupling χ (rad/s) for the exact Jz² engine.
    pub chi: f64,
    /// Spin count.
    pub n: usize,
}

/// Mean-field probability of detecting a spin in |↑⟩ after the echo
/// sequence: ½ (1 + e^{−Γ·2τ} sin θ₁ sin(2 J̄ cos θ₁ · 2τ)).
pub fn mf_precession_probability(p: &SequenceParams) -> f64 {
    let envelope = (-p.gamma * 2.0 * p.tau_arm).exp();
    let phase = 2.0 * p.j_bar * p.theta_1.cos() * 2.0 * p.tau_arm;
    0.5 * (1.0 + envelope * p.theta_1.sin() * phase.sin())
}

/// Rotation axes available to the collective-spin engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// State of N spin-1/2 particles restricted to the symmetric subspace,
/// stored as amplitudes over M = −N/2 .. N/2 (index k holds M = k − N/2).
#[derive(Debug, Clone)]
pub struct DickeState {
    amps: Vec<Complex64>,
    n: usize,
}

impl DickeState {
    /// The all-up product state |J = N/2, M = N/2⟩.
    pub fn all_up(n: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); n + 1];
        amps[n] = Complex64::new(1.0, 0.0);
        Self { amps, n }
    }

    /// Builds a state from explicit amplitudes (length N + 1); they must be
    /// normalized to 1 within 1e-12.
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != n + 1 {
            return Err(Error::InvalidConfig(format!(
                "need {} amplitudes for {} spins, got {}",
                n + 1,
                n,
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "state norm² = {norm}, expected 1 within 1e-12"
            )));
        }
        Ok(Self { amps, n })
    }

    pub fn spin_count(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// M value stored at amplitude index k.
    pub fn m_at(&self, k: usize) -> f64 {
        k as f64 - self.n as f64 / 2.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// ⟨J_z⟩ of the state.
    pub fn jz_expectation(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(k, a)| self.m_at(k) * a.norm_sqr())
            .sum()
    }

    /// Collective rotation exp(−i · angle · J_axis).
    pub fn rotated(&self, axis: Axis, angle: f64) -> Self {
        let basis = jx_basis(self.n);
        let dim = self.n + 1;

        // phases mapping J_y onto the cached J_x eigenbasis: J_y = U J_x U†
        // with U = diag((−i)^k)
        let mut work: Vec<Complex64> = self.amps.clone();
        if axis == Axis::Y {
            for (k, a) in work.iter_mut().enumerate() {
                *a *= basis.u[k].conj();
            }
        }

        let re = DVector::from_iterator(dim, work.iter().map(|a| a.re));
        let im = DVector::from_iterator(dim, work.iter().map(|a| a.im));
        let cre = basis.vectors.tr_mul(&re);
        let cim = basis.vectors.tr_mul(&im);

        let mut rotated = vec![Complex64::new(0.0, 0.0); dim];
        let mut re2 = DVector::zeros(dim);
        let mut im2 = DVector::zeros(dim);
        for k in 0..dim {
            let phase = -angle * basis.eigenvalues[k];
            let (s, c) = phase.sin_cos();
            let val = Complex64::new(cre[k], cim[k]) * Complex64::new(c, s);
            re2[k] = val.re;
            im2[k] = val.im;
        }
        let re3 = &basis.vectors * re2;
        let im3 = &basis.vectors * im2;
        for k in 0..dim {
            rotated[k] = Complex64::new(re3[k], im3[k]);
        }

        if axis == Axis::Y {
            for (k, a) in rotated.iter_mut().enumerate() {
                *a *= basis.u[k];
            }
        }
        Self {
            amps: rotated,
            n: self.n,
        }
    }

    /// Uniform-interaction phase evolution: multiplies the amplitude at M by
    /// exp(−i (2χ/N) M² t).
    pub fn evolved_jz2(&self, chi: f64, t: f64) -> Self {
        let rate = 2.0 * chi / self.n as f64;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let m = self.m_at(k);
                let phase = -rate * m * m * t;
                let (s, c) = phase.sin_cos();
                a * Complex64::new(c, s)
            })
            .collect();
        Self { amps, n: self.n }
    }
}

struct JxBasis {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    /// u_k = (−i)^k, the similarity phases between J_x and J_y.
    u: Vec<Complex64>,
}

fn jx_basis(n: usize) -> Arc<JxBasis> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<JxBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("basis cache lock").get(&n) {
        return hit.clone();
    }

    let dim = n + 1;
    let j = n as f64 / 2.0;
    let mut jx = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim - 1 {
        let m = k as f64 - j;
        // ⟨M+1| J_x |M⟩ = ½ √(J(J+1) − M(M+1))
        let c = 0.5 * (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        jx[(k + 1, k)] = c;
        jx[(k, k + 1)] = c;
    }
    let decomp = jx.symmetric_eigen();
    let eigenvalues: Vec<f64> = decomp.eigenvalues.iter().cloned().collect();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut u = Vec::with_capacity(dim);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..dim {
        u.push(acc);
        acc *= minus_i;
    }
    let entry = Arc::new(JxBasis {
        eigenvalues,
        vectors: decomp.eigenvectors,
        u,
    });
    cache
        .lock()
        .expect("basis cache lock")
        .insert(n, entry.clone());
    entry
}

/// ⟨J_z⟩ after the full echo sequence for N spins with uniform coupling χ,
/// starting from all spins up. Pure-state evolution (Γ = 0).
pub fn exact_sequence_jz(n: usize, chi: f64, tau_arm: f64, theta_1: f64) -> f64 {
    let state = DickeState::all_up(n)
        .rotated(Axis::X, theta_1)
        .evolved_jz2(chi, tau_arm)
        .rotated(Axis::Y, std::f64::consts::PI)
        .evolved_jz2(chi, tau_arm)
        .rotated(Axis::Y, std::f64::consts::FRAC_PI_2);
    state.jz_expectation()
}

/// As `exact_sequence_jz` with the coherence decay envelope e^{−Γ·2τ}
/// applied to the precession signal, matching how the mean-field formula
/// treats decoherence.
pub fn exact_sequence_jz_damped(n: usize, chi: f64, tau_arm: f64, theta_1: f64, gamma: f64) -> f64 {
    (-gamma * 2.0 * tau_arm).exp() * exact_sequence_jz(n, chi, tau_arm, theta_1)
}

/// Coupling model for the brute-force engine.
#[derive(Debug, Clone, Copy)]
pub enum BruteCoupling<'a> {
    /// J_ij = χ for every pair.
    Uniform(f64),
    /// Full symmetric coupling matrix (rad/s, zero diagonal).
    Matrix(&'a DMatrix<f64>),
}

/// Exact 2^N state-vector evolution of the echo sequence under
/// H = (1/N) Σ_{i<j} J_ij σᶻ_i σᶻ_j with global rotations. Returns
/// (⟨J_z⟩, P(↑)) where P(↑) is the ion-averaged up-state probability.
pub fn brute_force_sequence(
    n: usize,
    coupling: BruteCoupling,
    tau_arm: f64,
    theta_1: f64,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::Arity {
            required: 1,
            actual: 0,
        });
    }
    if n > MAX_BRUTE_FORCE_SPINS {
        return Err(Error::Capacity {
            max: MAX_BRUTE_FORCE_SPINS,
            actual: n,
        });
    }
    if let BruteCoupling::Matrix(j) = coupling {
        if j.nrows() != n || j.ncols() != n {
            return Err(Error::InvalidConfig(format!(
                "coupling matrix is {}x{}, expected {n}x{n}",
                j.nrows(),
                j.ncols()
            )));
        }
    }

    let dim = 1usize << n;
    // diagonal interaction energies E(s) = (1/N) Σ_{i<j} J_ij z_i z_j
    let mut energies = vec![0.0f64; dim];
    for (s, e) in energies.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            let zi = if s >> i & 1 == 1 { 1.0 } else { -1.0 };
            for j in (i + 1)..n {
                let zj = if s >> j & 1 == 1 { 1.0 } else { -1.0 };
                let jij = match coupling {
                    BruteCoupling::Uniform(chi) => chi,
                    BruteCoupling::Matrix(m) => m[(i, j)],
                };
                acc += jij * zi * zj;
            }
        }
        *e = acc / n as f64;
    }

    // all spins up (bit = 1 means ↑)
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    amps[dim - 1] = Complex64::new(1.0, 0.0);

    let rotate_all = |amps: &mut Vec<Complex64>, r: [[Complex64; 2]; 2]| {
        for qubit in 0..n {
            let bit = 1usize << qubit;
            for s in 0..dim {
                if s & bit == 0 {
                    let down = amps[s];
                    let up = amps[s | bit];
                    // r is in the (↑, ↓) basis
                    amps[s | bit] = r[0][0] * up + r[0][1] * down;
                    amps[s] = r[1][0] * up + r[1][1] * down;
                }
            }
        }
    };
    let rx = |theta: f64| {
        let (s, c) = (theta / 2.0).sin_cos();
        [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ]
    };
    let ry = |theta: f64| {
        let (s, c) = (theta / 2.0).sin_cos();
        [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ]
    };
    let phase_arm = |amps: &mut Vec<Complex64>| {
        for (s, a) in amps.iter_mut().enumerate() {
            let phi = -energies[s] * tau_arm;
            let (si, co) = phi.sin_cos();
            *a *= Complex64::new(co, si);
        }
    };

    rotate_all(&mut amps, rx(theta_1));
    phase_arm(&mut amps);
    rotate_all(&mut amps, ry(std::f64::consts::PI));
    phase_arm(&mut amps);
    rotate_all(&mut amps, ry(std::f64::consts::FRAC_PI_2));

    let mut jz = 0.0;
    let mut p_up = 0.0;
    for (s, a) in amps.iter().enumerate() {
        let w = a.norm_sqr();
        let ups = s.count_ones() as f64;
        jz += w * (ups - n as f64 / 2.0);
        p_up += w * ups / n as f64;
    }
    Ok((jz, p_up))
}

/// Dimensionless mean-field validity margin |χ t| / (√N / 4). Mean-field
/// precession describes the exact Jz² dynamics only while this stays well
/// below one.
pub fn mf_validity_bound(n: usize, chi: f64, t: f64) -> f64 {
    4.0 * (chi * t).abs() / (n as f64).sqrt()
}

/// Per-mode spin-motion safety margins for a drive against a mode spectrum.
#[derive(Debug, Clone)]
pub struct SpinMotionReport {
    /// margin_m = ħ|μ − ω_m| / (F₀ √(ħ(2n̄_m+1)/(2Mω_m))), one per mode in
    /// spectrum order; multiplied by √N when `composite_sqrt_n` was set.
    pub margins: Vec<f64>,
    /// Smallest margin.
    pub min_margin: f64,
    /// 1-based index of the mode with the smallest margin.
    pub worst_mode: usize,
    /// True when F₀ = 0, in which case every margin is infinite.
    pub drive_off: bool,
    /// Whether the √N collective-state factor was applied.
    pub composite_sqrt_n: bool,
}

/// Evaluates the coherent-displacement criterion mode by mode: margins above
/// one keep residual spin-motion entanglement negligible. With
/// `composite_sqrt_n` the margins carry an extra √N, the per-mode form in
/// which the drive couples to the collective spin.
pub fn spin_motion_criterion(
    spectrum: &ModeSpectrum,
    drive: &ODFDrive,
    temperature: f64,
    composite_sqrt_n: bool,
) -> Result<SpinMotionReport> {
    if temperature < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    let n = spectrum.len();
    let m = spectrum.ion_mass;
    let f0 = drive.force_amplitude;
    let mu = drive.beat_note;
    let scale = if composite_sqrt_n {
        (n as f64).sqrt()
    } else {
        1.0
    };

    let drive_off = f0 == 0.0;
    let margins: Vec<f64> = spectrum
        .frequencies
        .iter()
        .map(|&w| {
            if drive_off {
                f64::INFINITY
            } else {
                let nbar = thermal_occupation(w, temperature);
                let spread = (HBAR * (2.0 * nbar + 1.0) / (2.0 * m * w)).sqrt();
                scale * HBAR * (mu - w).abs() / (f0 * spread)
            }
        })
        .collect();

    let (worst_idx, &min_margin) = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite margins"))
        .expect("at least one mode");
    Ok(SpinMotionReport {
        margins,
        min_margin,
        worst_mode: worst_idx + 1,
        drive_off,
        composite_sqrt_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn mf_probability_trivial_angles() {
        let base = SequenceParams {
            theta_1: 0.0,
            tau_arm: 250e-6,
            j_bar: 2.0 * PI * 100.0,
            gamma: 50.0,
            chi: 0.0,
            n: 1,
        };
        assert_eq!(mf_precession_probability(&base), 0.5);
        let p90 = SequenceParams {
            theta_1: PI / 2.0,
            ..base
        };
        let v = mf_precession_probability(&p90);
        assert!((v - 0.5).abs() < 1e-15, "P = {v}");
    }

    #[test]
    fn mf_probability_quarter_tip() {
        // ½(1 + (√2/2)·sin(√2/2)) with J̄·2τ = ½ and Γ = 0
        let p = SequenceParams {
            theta_1: PI / 4.0,
            tau_arm: 0.5,
            j_bar: 0.5,
            gamma: 0.0,
            chi: 0.0,
            n: 1,
        };
        let v = mf_precession_probability(&p);
        assert!((v - 0.729681342).abs() < 1e-9, "P = {v}");
    }

    #[test]
    fn rotation_identity_and_pauli_flip() {
        let s = DickeState::all_up(1);
        let same = s.rotated(Axis::X, 0.0);
        assert!((same.amplitudes()[1] - Complex64::new(1.0, 0.0)).norm() < 1e-14);

        let flipped = s.rotated(Axis::X, PI);
        assert!(flipped.amplitudes()[1].norm() < 1e-14);
        assert!((flipped.amplitudes()[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jz2_identity_cases() {
        let s = DickeState::all_up(3).rotated(Axis::X, 0.7);
        let same = s.evolved_jz2(123.0, 0.0);
        for (a, b) in s.amplitudes().iter().zip(same.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }

        // single spin: M² identical on both levels, only a global phase
        let one = DickeState::all_up(1).rotated(Axis::X, 0.9);
        let evolved = one.evolved_jz2(2.0, 0.3);
        let ratio = evolved.amplitudes()[0] / one.amplitudes()[0];
        let ratio2 = evolved.amplitudes()[1] / one.amplitudes()[1];
        assert!((ratio - ratio2).norm() < 1e-14);
        assert!((ratio.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn echo_closes_without_interaction() {
        for n in [1, 2, 5, 40] {
            for k in 0..12 {
                let theta = 2.0 * PI * k as f64 / 12.0;
                let jz = exact_sequence_jz(n, 0.0, 1e-4, theta);
                assert!(jz.abs() < 1e-10, "N={n} theta={theta}: jz={jz}");
            }
        }
    }

    #[test]
    fn brute_force_capacity() {
        assert!(matches!(
            brute_force_sequence(13, BruteCoupling::Uniform(1.0), 1.0, 1.0),
            Err(Error::Capacity {
                max: 12,
                actual: 13
            })
        ));
    }

    #[test]
    fn single_spin_matches_mf_with_zero_jbar() {
        // one spin has no pair interaction: P(↑) = ½ for any θ₁
        for theta in [0.3, 1.0, 2.2] {
            let (_, p_up) =
                brute_force_sequence(1, BruteCoupling::Uniform(500.0), 1e-3, theta).unwrap();
            assert!((p_up - 0.5).abs() < 1e-12, "theta={theta} p={p_up}");
        }
    }

    #[test]
    fn validity_margin_examples() {
        assert_eq!(mf_validity_bound(7, 0.0, 1.0), 0.0);
        let m100 = mf_validity_bound(100, 0.2, 1.0);
        assert!((m100 - 0.08).abs() < 1e-12);
        let m5 = mf_validity_bound(5, 1.6, 1.0);
        assert!((m5 - 2.8621670111).abs() < 1e-9, "margin {m5}");
    }
}
