//! Wall-clock budget transfer between machines.
//!
//! A benchmark defined on reference hardware is ported by scaling its time
//! budget with the ratio of local to reference time-per-step, measured by a
//! short pilot on each side.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareCalibration {
    pub reference_time_per_step: f64,
    pub local_time_per_step: f64,
    pub pilot_steps: u64,
}

impl HardwareCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.reference_time_per_step > 0.0) || !self.reference_time_per_step.is_finite() {
            return Err(Error::Precondition(format!(
                "reference time per step must be > 0, got {}",
                self.reference_time_per_step
            )));
        }
        if !(self.local_time_per_step > 0.0) || !self.local_time_per_step.is_finite() {
            return Err(Error::Precondition(format!(
                "local time per step must be > 0, got {}",
                self.local_time_per_step
            )));
        }
        Ok(())
    }
}

/// `floor(reference_budget × local_tps / reference_tps)` whole seconds.
pub fn transfer_budget(reference_budget_sec: f64, calib: &HardwareCalibration) -> Result<f64> {
    calib.validate()?;
    if !(reference_budget_sec > 0.0) || !reference_budget_sec.is_finite() {
        return Err(Error::Precondition(format!(
            "reference budget must be > 0, got {reference_budget_sec}"
        )));
    }
    Ok((reference_budget_sec * (calib.local_time_per_step / calib.reference_time_per_step)).floor())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn calib(reference: f64, local: f64) -> HardwareCalibration {
        HardwareCalibration {
            reference_time_per_step: reference,
            local_time_per_step: local,
            pilot_steps: 500,
        }
    }

    #[test]
    fn published_budget_transfers() {
        let cases = [
            (7703.0, 0.7221336833, 1.067542214, 11387.0),
            (8859.0, 0.2319777947, 0.2699386503, 10308.0),
            (63008.0, 0.3375422544, 0.4381237525, 81783.0),
            (18477.0, 0.2309625, 0.185745, 14859.0),
        ];
        for (budget, reference, local, expected) in cases {
            let got = transfer_budget(budget, &calib(reference, local)).unwrap();
            assert_eq!(got, expected, "budget {budget} × {local}/{reference}");
        }
    }

    #[test]
    fn equal_speed_keeps_budget() {
        assert_eq!(transfer_budget(5000.0, &calib(0.25, 0.25)).unwrap(), 5000.0);
    }

    #[test]
    fn bad_calibration_rejected() {
        assert!(transfer_budget(100.0, &calib(0.0, 1.0)).is_err());
        assert!(transfer_budget(100.0, &calib(1.0, -2.0)).is_err());
        assert!(transfer_budget(0.0, &calib(1.0, 1.0)).is_err());
    }
}
