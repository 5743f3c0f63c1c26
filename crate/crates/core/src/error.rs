use thiserror::Error;

/// Errors produced by parsing, sampling, the solvers and the diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("evaluation error at node ({i}, {j}) = ({x}, {y}): {msg}")]
    SampleEval {
        i: usize,
        j: usize,
        x: f64,
        y: f64,
        msg: String,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("no unmasked node within distance {radius} of ({cx}, {cy})")]
    EmptyBall { cx: f64, cy: f64, radius: f64 },

    #[error("ball of radius {radius} around ({cx}, {cy}) leaves the unmasked interior")]
    BallOutOfDomain { cx: f64, cy: f64, radius: f64 },

    #[error("need at least {needed} unmasked nodes in the ball, found {found}")]
    InsufficientNodes { needed: usize, found: usize },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e}, threshold {threshold:e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        threshold: f64,
    },

    #[error("infeasible obstacles: lower {lower} > upper {upper} at node ({i}, {j})")]
    InfeasibleObstacles {
        i: usize,
        j: usize,
        lower: f64,
        upper: f64,
    },

    #[error("singular Newton Jacobian at eps = {eps} (try a continuation schedule)")]
    SingularJacobian { eps: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("at eps = {eps}: {source}")]
    AtEpsilon {
        eps: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
