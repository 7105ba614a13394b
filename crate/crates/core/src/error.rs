use crate::trap::IonCrystal;

pub type Result<T> = std::result::Result<T, Error>;

/// Library error type. Variants carry enough context to act on the failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A trap or drive parameter violates its validity constraints.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Two or more ions coincide, making the Coulomb energy singular.
    #[error("singular configuration: ions {i} and {j} coincide")]
    SingularConfiguration { i: usize, j: usize },

    /// The minimizer hit its iteration cap before reaching the gradient
    /// tolerance. Carries the best configuration found so far.
    #[error(
        "equilibrium search did not converge after {iterations} iterations \
         (residual {gradient_norm:.3e} N, tolerance {tol:.3e} N)"
    )]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        tol: f64,
        best: Box<IonCrystal>,
    },

    /// An operation that needs at least `required` ions was called with fewer.
    #[error("need at least {required} ions, got {actual}")]
    Arity { required: usize, actual: usize },

    /// The crystal is not stable as a single plane: the stiffness matrix has
    /// negative eigenvalues.
    #[error("crystal is not single-plane stable: {unstable_modes} unstable transverse modes")]
    Instability { unstable_modes: usize },

    /// The drive beat note sits within the resonance guard of a mode.
    #[error(
        "beat note {beat_note_hz:.3} Hz is within the resonance guard of mode {mode} \
         at {mode_freq_hz:.3} Hz"
    )]
    Resonance {
        mode: usize,
        mode_freq_hz: f64,
        beat_note_hz: f64,
    },

    /// Bisection range does not bracket a sign change.
    #[error("no sign change of the minimum transverse eigenvalue in the scanned range")]
    Bracket,

    /// Coupling signs are mixed within the power-law fit range, so a single
    /// exponent would be meaningless.
    #[error("bin-mean couplings change sign inside the fit range; no power-law exponent")]
    SignMixed,

    /// Too few populated distance bins for a power-law fit.
    #[error("power-law fit needs at least {required} populated bins, got {actual}")]
    InsufficientBins { required: usize, actual: usize },

    /// State-vector size limit for the brute-force engine.
    #[error("brute-force engine supports at most {max} spins, got {actual}")]
    Capacity { max: usize, actual: usize },
}
