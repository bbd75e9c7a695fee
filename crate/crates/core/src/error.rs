use thiserror::Error;

/// A `(step, node)` pair used by certificates and diagnostics.
pub type StepNode = (usize, usize);

/// Why a barycentric velocity field cannot be realized as a flow on the graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NonRepresentable {
    /// `(k, i)` where `x_i + Δt·V(t_k, x_i)` is not an allowed neighbour of `x_i`.
    pub off_grid: Vec<StepNode>,
    /// `(k, j)` where the pushed-forward mass disagrees with `μ_{t_k}(x_j)`.
    pub unbalanced: Vec<StepNode>,
}

impl NonRepresentable {
    pub fn is_empty(&self) -> bool {
        self.off_grid.is_empty() && self.unbalanced.is_empty()
    }
}

impl std::fmt::Display for NonRepresentable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} off-grid velocities {:?}, {} unbalanced nodes {:?}",
            self.off_grid.len(),
            self.off_grid,
            self.unbalanced.len(),
            self.unbalanced
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A file or expression could not be read.
    #[error("parse error: {0}")]
    Parse(String),

    /// Inputs that cannot be combined, e.g. measures on different spaces.
    #[error("configuration error: {0}")]
    Config(String),

    /// A value violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// An integrand returned NaN, −∞, or +∞ where that is not admissible.
    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// The caller asked for a guarantee the inputs do not support.
    #[error("contract error: {0}")]
    Contract(String),

    /// No feasible curve or flow exists.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("velocity field is not representable on the graph: {0}")]
    NonRepresentable(NonRepresentable),

    /// A solver invariant failed; indicates a bug rather than bad input.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
