//! Crate-wide error type.

use crate::eikonal::SolveReport;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A tangent vector with a nonzero lateral component was handed to the
    /// strictly sub-Riemannian metric (eps = 0).
    #[error("vector outside distribution Δ: a3 = {a3} with eps = 0")]
    OutsideDistribution { a3: f64 },

    /// Grid or field construction violated an invariant.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Field data violated the invariants of its kind.
    #[error("invalid field: {0}")]
    InvalidField(String),

    /// A spatial point fell outside the grid's bounding box.
    #[error("out of domain: ({x}, {y}) outside [{x_min}, {x_max}] x [{y_min}, {y_max}]")]
    OutOfDomain {
        x: f64,
        y: f64,
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
    },

    /// Two fields that must share a grid do not.
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    /// A cost or score field failed the antipodal-symmetry check required to
    /// restrict it to the projective grid.
    #[error("not projective-compatible: antipodal slabs differ by {max_dev:e} (> {tol:e})")]
    NotProjective { max_dev: f64, tol: f64 },

    /// Binary field input was malformed or truncated.
    #[error("bad SRF1 data at byte {offset}: {what}")]
    BadSrf1 { offset: usize, what: String },

    /// PGM input was malformed or truncated.
    #[error("bad PGM data at byte {offset}: {what}")]
    BadPgm { offset: usize, what: String },

    /// The image is smaller than the orientation filter support.
    #[error("image too small: {width}x{height} < filter support {support}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        support: usize,
    },

    /// A solver or tracker precondition on its inputs failed.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The sweeping solver hit its cycle budget before the requested
    /// tolerance; the partial distance map and its report are attached.
    #[error("not converged: change {final_residual:e} > tol after {iterations} cycles")]
    NotConverged {
        iterations: usize,
        final_residual: f64,
        partial: Box<(crate::fields::ScalarField3, SolveReport)>,
    },

    /// Gradient descent lost the gradient before reaching the stop radius;
    /// the partial curve is attached.
    #[error("stalled — likely Maxwell/seed plateau (after {steps} steps, W = {w_here:e})")]
    Stalled {
        steps: usize,
        w_here: f64,
        partial: Box<crate::tracker::GeodesicCurve>,
    },

    /// PT and SE(2) answers that must agree (quotient identity) do not.
    #[error("quotient mismatch: PT length {pt} vs min SE(2) length {min_se2} (tol {tol})")]
    QuotientMismatch { pt: f64, min_se2: f64, tol: f64 },

    /// Scalar argument outside the mathematical domain of a special function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bracketed root search failed to find a sign change.
    #[error("root not bracketed: {0}")]
    RootNotBracketed(String),

    /// The two-equation critical-radius solve failed to bracket a root; the
    /// scanned residual table is attached for diagnosis.
    #[error("system bracketing failed over {} scanned points", table.len())]
    BracketingFailed { table: Vec<(f64, f64)> },

    /// Every perturbed backtrack of a multiplicity probe stalled.
    #[error("probe inconclusive: all {attempts} perturbed backtracks stalled")]
    ProbeInconclusive { attempts: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Command-line usage error (maps to exit code 2).
    #[error("usage: {0}")]
    Usage(String),
}
