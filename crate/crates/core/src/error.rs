use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lane id {0} is outside 1..=8")]
    InvalidLane(u8),
    #[error("lanes {in_lane} -> {out_lane} do not form a right, straight or left maneuver")]
    InvalidManeuver { in_lane: u8, out_lane: u8 },
    #[error("path geometry: {0}")]
    Geometry(String),
    #[error("arc length {s} outside [0, {total_length}]")]
    OutOfRange { s: f64, total_length: f64 },
    #[error("opinion is already frozen")]
    AlreadyFrozen,
    #[error("opinion is not frozen")]
    NotFrozen,
    #[error("a GO commitment cannot be released")]
    CannotUnfreezeGo,
    #[error("vehicle {0} has no decision-zone timestamp")]
    MissingTimestamp(usize),
    #[error("invalid {block} parameters: {rule}")]
    InvalidParams { block: &'static str, rule: String },
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(block: &'static str, rule: impl Into<String>) -> Self {
        Error::InvalidParams {
            block,
            rule: rule.into(),
        }
    }
}
