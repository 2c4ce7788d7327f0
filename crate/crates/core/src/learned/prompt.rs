//! Step-prompt estimation for time-budgeted runs.
//!
//! A short pilot measures time per step; the prompt is the whole-step count
//! that fits in the allowed wall-clock time. After trial 1 the observed step
//! count replaces the estimate for the remaining trials. Warmup/compilation
//! time must be excluded from the pilot by the caller.

use crate::error::{Error, Result};

/// Timed pilot run, warmup excluded.
#[derive(Debug, Clone, Copy)]
pub struct PilotRun {
    pub steps_run: u64,
    pub observed_runtime_sec: f64,
}

/// `floor(max_allowed_time / (runtime / steps))`.
pub fn estimate_step_prompt(pilot: PilotRun, max_allowed_time_sec: f64) -> Result<u64> {
    if pilot.steps_run == 0 {
        return Err(Error::Precondition("pilot must run at least one step".to_string()));
    }
    if !(pilot.observed_runtime_sec > 0.0) {
        return Err(Error::Precondition(format!(
            "pilot runtime must be > 0, got {}",
            pilot.observed_runtime_sec
        )));
    }
    if !(max_allowed_time_sec > 0.0) || !max_allowed_time_sec.is_finite() {
        return Err(Error::Precondition(format!(
            "max allowed time must be positive and finite, got {max_allowed_time_sec}"
        )));
    }
    let time_per_step = pilot.observed_runtime_sec / pilot.steps_run as f64;
    Ok((max_allowed_time_sec / time_per_step).floor() as u64)
}

/// Trials after the first reuse what trial 1 actually achieved.
pub fn refine_step_prompt(previous_prompt: u64, actual_steps_trial1: u64) -> Result<u64> {
    if previous_prompt == 0 || actual_steps_trial1 == 0 {
        return Err(Error::Precondition(
            "prompts and step counts must be >= 1".to_string(),
        ));
    }
    Ok(actual_steps_trial1)
}
