use std::fmt;

use thiserror::Error;

/// Which of the two grids of a coarse/fine comparison produced an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridRole {
    Fine,
    Coarse,
}

impl fmt::Display for GridRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridRole::Fine => f.write_str("fine"),
            GridRole::Coarse => f.write_str("coarse"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A hypothesis of an error bound does not hold for the inputs.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A time step would exceed the CFL limit.
    #[error("CFL number {cfl} exceeds limit {limit}{}", step_suffix(*.step))]
    Cfl {
        cfl: f64,
        limit: f64,
        step: Option<usize>,
    },

    /// The numerical solution stopped being finite.
    #[error("numerical blow-up: non-finite value produced at step {step}")]
    BlowUp { step: usize },

    /// A velocity sample used for particle tracing was not finite.
    #[error("non-finite velocity on trajectory {trajectory}, segment {segment}")]
    Trace { trajectory: usize, segment: usize },

    /// A computed result disagreed with its reference.
    #[error("verification failed: {0}")]
    Verification(String),

    /// A benchmark buffer could not be allocated.
    #[error("cannot allocate {bytes} bytes for {what}")]
    Resource { what: String, bytes: usize },

    #[error("{grid} grid: {source}")]
    OnGrid {
        grid: GridRole,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(s) => format!(" at step {s}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }

    pub(crate) fn on_grid(self, grid: GridRole) -> Self {
        Error::OnGrid {
            grid,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::Cfl { cfl, limit, .. } => Error::Cfl {
                cfl,
                limit,
                step: Some(step),
            },
            Error::BlowUp { .. } => Error::BlowUp { step },
            other => other,
        }
    }

    /// The innermost error, looking through grid annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::OnGrid { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by invalid inputs or violated hypotheses.
    pub fn is_domain_like(&self) -> bool {
        matches!(
            self.root(),
            Error::Domain(_) | Error::Hypothesis(_) | Error::Cfl { .. }
        )
    }

    /// True for failures of the numerics themselves (non-finite values).
    pub fn is_blow_up(&self) -> bool {
        matches!(self.root(), Error::BlowUp { .. } | Error::Trace { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
