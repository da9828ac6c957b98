use serde::{Deserialize, Serialize};

use super::IngestError;

/// Futures-implied rates around one announcement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockInputs {
    /// Implied rate shortly before the announcement (percent).
    pub ff_pre: f64,
    /// Implied rate shortly after the announcement (percent).
    pub ff_post: f64,
    pub days_in_month: u32,
    /// Day of the month on which the meeting takes place.
    pub day_of_meeting: u32,
}

/// Surprise in percentage points: `D / (D - day) * (ff_post - ff_pre)`.
///
/// Futures settle on the monthly average rate, so a change late in the month is scaled
/// up by the share of the month remaining.
pub fn policy_shock(s: &ShockInputs) -> Result<f64, IngestError> {
    if !(28..=31).contains(&s.days_in_month) {
        return Err(IngestError::DaysInMonth(s.days_in_month));
    }
    if s.day_of_meeting < 1 || s.day_of_meeting >= s.days_in_month {
        return Err(IngestError::MeetingDay {
            day: s.day_of_meeting,
            days: s.days_in_month,
        });
    }
    let d = f64::from(s.days_in_month);
    let scale = d / (d - f64::from(s.day_of_meeting));
    Ok(scale * (s.ff_post - s.ff_pre))
}
