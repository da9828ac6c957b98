//! Policy shocks, comparison indices, and parsing of all external files.

mod files;
mod indices;
mod shock;

pub use files::*;
pub use indices::{
    correlation_table, monthly_means, nearest_match, unit_normalize, CorrelationCell,
    CorrelationTable, MonthlyValue,
};
pub use shock::{policy_shock, ShockInputs};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("day of meeting {day} must satisfy 1 <= day < days in month ({days})")]
    MeetingDay { day: u32, days: u32 },
    #[error("days in month must lie in 28..=31 (got {0})")]
    DaysInMonth(u32),
    #[error("series has zero range; cannot normalize")]
    ZeroRange,
    #[error("series '{0}' has zero variance")]
    ZeroVariance(String),
    #[error("correlation needs equal-length series with n >= 3: {0}")]
    Length(String),
    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },
    #[error("{0}")]
    Csv(String),
}
