use crate::grid::{BusId, LineId};

/// Errors raised anywhere in the library.
///
/// Variants are grouped by what the caller can do about them: topology and
/// domain errors mean the input is wrong, observability and infeasibility
/// errors mean the monitoring layout cannot support the requested analysis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("topology error: {0}")]
    Topology(String),

    #[error("line {0} has zero series impedance")]
    SingularLine(LineId),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown bus {0}")]
    UnknownBus(BusId),

    #[error("unknown line {0}")]
    UnknownLine(LineId),

    #[error("not observable ({tag}): {detail}")]
    Observability { tag: String, detail: String },

    #[error("placement infeasible: {0}")]
    Infeasible(String),

    #[error("conflicting placement constraints: {0}")]
    ConstraintConflict(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("localization window incomplete: have {have} of {need} samples")]
    Staleness { have: usize, need: usize },

    #[error("characterization inconclusive: no faulted phase stands out")]
    Inconclusive,

    #[error("steady-state solve failed: {0}")]
    Solve(String),

    #[error("invalid input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Domain errors (bad topology, unobservable layout, infeasible placement)
    /// as opposed to I/O or parse failures.
    pub fn is_domain(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Parse(_)
        )
    }
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Topology(_) => "topology",
            Error::SingularLine(_) => "singular_line",
            Error::Domain(_) => "domain",
            Error::UnknownBus(_) => "unknown_bus",
            Error::UnknownLine(_) => "unknown_line",
            Error::Observability { .. } => "observability",
            Error::Infeasible(_) => "infeasible",
            Error::ConstraintConflict(_) => "constraint_conflict",
            Error::Calibration(_) => "calibration",
            Error::Staleness { .. } => "staleness",
            Error::Inconclusive => "inconclusive",
            Error::Solve(_) => "solve",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
