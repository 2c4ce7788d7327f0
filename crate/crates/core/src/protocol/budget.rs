//! Trial budgets: a limit (wall-clock seconds or steps) plus a clock source.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "time", alias = "time_control")]
    TimeControl,
    #[serde(rename = "step", alias = "step_control")]
    StepControl,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::TimeControl => "time",
            Condition::StepControl => "step",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "time" | "time_control" => Ok(Condition::TimeControl),
            "step" | "step_control" => Ok(Condition::StepControl),
            other => Err(Error::Config(format!(
                "unknown condition '{other}' (expected 'time' or 'step')"
            ))),
        }
    }
}

/// Wall-clock source. The simulated clock charges a fixed cost per step, so
/// time-controlled runs become machine-independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    Real,
    Simulated { sec_per_step: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub condition: Condition,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_wall_clock_sec: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_steps: Option<u64>,
    pub clock: Clock,
}

impl Budget {
    pub fn time_control(max_wall_clock_sec: f64, clock: Clock) -> Self {
        Self {
            condition: Condition::TimeControl,
            max_wall_clock_sec: Some(max_wall_clock_sec),
            max_steps: None,
            clock,
        }
    }

    pub fn step_control(max_steps: u64, clock: Clock) -> Self {
        Self {
            condition: Condition::StepControl,
            max_wall_clock_sec: None,
            max_steps: Some(max_steps),
            clock,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.condition {
            Condition::TimeControl => {
                let t = self.max_wall_clock_sec.ok_or_else(|| {
                    Error::config("time_control budget needs max_wall_clock_sec")
                })?;
                if self.max_steps.is_some() {
                    return Err(Error::config(
                        "time_control budget must not also set max_steps",
                    ));
                }
                if !(t > 0.0) || !t.is_finite() {
                    return Err(Error::Config(format!("max_wall_clock_sec must be positive, got {t}")));
                }
            }
            Condition::StepControl => {
                let s = self
                    .max_steps
                    .ok_or_else(|| Error::config("step_control budget needs max_steps"))?;
                if self.max_wall_clock_sec.is_some() {
                    return Err(Error::config(
                        "step_control budget must not also set max_wall_clock_sec",
                    ));
                }
                if s == 0 {
                    return Err(Error::config("max_steps must be >= 1"));
                }
            }
        }
        if let Clock::Simulated { sec_per_step } = self.clock {
            if !(sec_per_step > 0.0) || !sec_per_step.is_finite() {
                return Err(Error::Config(format!(
                    "simulated sec_per_step must be positive, got {sec_per_step}"
                )));
            }
        }
        Ok(())
    }

    /// Step capacity when it can be determined without running: step-control
    /// budgets, or time-control on the simulated clock.
    pub fn known_step_limit(&self) -> Option<u64> {
        match (self.condition, self.clock) {
            (Condition::StepControl, _) => self.max_steps,
            (Condition::TimeControl, Clock::Simulated { sec_per_step }) => {
                let max_t = self.max_wall_clock_sec?;
                // small epsilon so 50.0 / 0.5 style ratios land on the integer
                Some((max_t / sec_per_step + 1e-9).floor() as u64)
            }
            (Condition::TimeControl, Clock::Real) => None,
        }
    }
}
