use crate::flow::Trajectory;
use crate::model::State;

/// Errors raised by the toolkit.
///
/// Variants are grouped by the module that raises them; all of them are
/// recoverable values, none of the library code panics on bad numerics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // model
    #[error("origin is not a real saddle (eigenvalues {0:?})")]
    NotASaddle([f64; 3]),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("Newton iteration converged to the origin while seeking a secondary equilibrium")]
    ConvergedToOrigin,
    #[error("no sign change of the detector on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    // flow
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("trajectory diverged at t = {t} (state {state:?})")]
    Divergence {
        t: f64,
        state: State,
        partial: Box<Trajectory>,
    },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    // winding
    #[error("secondary equilibrium q not found: {0}")]
    QNotFound(String),
    #[error("odd number of section crossings ({0}) at boundary entry")]
    OddCrossingCount(usize),

    // orbits
    #[error("flow did not return to the section")]
    NoReturn,
    #[error("Newton on the return map diverged: {0}")]
    NewtonDiverged(String),
    #[error("section not transverse to the flow (|n.f| = {0:e})")]
    SectionNotTransverse(f64),
    #[error("continuation step floor reached between mu = {last_good} and mu = {failed}")]
    StepFloorReached { last_good: f64, failed: f64 },
    #[error("multiplier trace does not bracket the requested event")]
    NoBracket,
    #[error("trajectory produced only {got} of {wanted} section returns")]
    InsufficientReturns { got: usize, wanted: usize },
    #[error("return sequence is constant; rescaling degenerates")]
    ConstantSequence,

    // manifolds
    #[error("required eigenstructure missing: {0}")]
    EigenstructureMissing(String),
    #[error("orbit has complex Floquet multipliers")]
    ComplexMultipliers,

    // projection
    #[error("point is not on the sphere (radial residual {0:e})")]
    NotOnSphere(f64),
    #[error("point is at the projection pole")]
    AtPole,

    // connections
    #[error("unstable manifold never approached the origin")]
    NoCloseApproach,
    #[error("target periodic orbit missing: {0}")]
    OrbitMissing(String),
    #[error("unstable manifold stays {0} away from the target orbit")]
    NeverNearOrbit(f64),
    #[error("parameters are not on the homoclinic locus (split {0:e})")]
    NotOnHomoclinicLocus(f64),
    #[error("homoclinic truncation too short (endpoint distance {0:e})")]
    TruncationTooShort(f64),
    #[error("manifold section trace is empty")]
    EmptyTrace,
    #[error("detector failed at mu = {mu}: {source}")]
    DetectorFailure {
        mu: f64,
        #[source]
        source: Box<Error>,
    },

    // cli / io
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
