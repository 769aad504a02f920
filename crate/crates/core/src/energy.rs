//! Duty-cycle power model: the glove alternates between a sleep state (board
//! idle, no tag in view) and an active state (reader, button, audio).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("invalid energy parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyProfile {
    pub sleep_ma: f64,
    pub active_ma: f64,
    pub supply_v: f64,
    /// Fraction of time spent active, in [0, 1].
    pub duty_active: f64,
}

impl Default for EnergyProfile {
    fn default() -> Self {
        Self {
            sleep_ma: 400.0,
            active_ma: 1400.0,
            supply_v: 5.0,
            duty_active: 0.40,
        }
    }
}

impl EnergyProfile {
    pub fn with_duty(self, duty_active: f64) -> Self {
        Self {
            duty_active,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), EnergyError> {
        for (name, value) in [
            ("sleep_ma", self.sleep_ma),
            ("active_ma", self.active_ma),
            ("supply_v", self.supply_v),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EnergyError::InvalidParam { name, value });
            }
        }
        if !(0.0..=1.0).contains(&self.duty_active) {
            return Err(EnergyError::InvalidParam {
                name: "duty_active",
                value: self.duty_active,
            });
        }
        Ok(())
    }

    /// Power in watts drawn at `current_ma` from the supply.
    pub fn power_w(&self, current_ma: f64) -> f64 {
        current_ma * self.supply_v / 1000.0
    }
}

pub fn average_current_ma(p: &EnergyProfile) -> f64 {
    p.duty_active * p.active_ma + (1.0 - p.duty_active) * p.sleep_ma
}

pub fn battery_life_h(p: &EnergyProfile, capacity_mah: f64) -> f64 {
    capacity_mah / average_current_ma(p)
}

/// Energy figures as they appear in experiment reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub profile: EnergyProfile,
    pub sleep_w: f64,
    pub active_w: f64,
    pub average_ma: f64,
    pub average_w: f64,
    pub capacity_mah: f64,
    pub battery_life_h: f64,
}

impl EnergySummary {
    pub fn new(profile: EnergyProfile, capacity_mah: f64) -> Result<Self, EnergyError> {
        profile.validate()?;
        if !(capacity_mah > 0.0) {
            return Err(EnergyError::InvalidParam {
                name: "capacity_mah",
                value: capacity_mah,
            });
        }
        let average_ma = average_current_ma(&profile);
        Ok(Self {
            profile,
            sleep_w: profile.power_w(profile.sleep_ma),
            active_w: profile.power_w(profile.active_ma),
            average_ma,
            average_w: profile.power_w(average_ma),
            capacity_mah,
            battery_life_h: battery_life_h(&profile, capacity_mah),
        })
    }
}
