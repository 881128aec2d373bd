//! One-parameter sweeps of a batch.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::batch::{run_batch, BatchResult, Policy};
use crate::error::{Error, Result};
use crate::problem::Regime;
use crate::scenario::ScenarioConfig;

/// Configuration field varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Spreading factor N (number of PRBs).
    NumPrbs,
    NumAps,
    AntennasPerAp,
    NumUsers,
    NumDevices,
    ServingAps,
    Blocklength,
}

impl SweepParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::NumPrbs => "num_prbs",
            SweepParam::NumAps => "num_aps",
            SweepParam::AntennasPerAp => "antennas_per_ap",
            SweepParam::NumUsers => "num_users",
            SweepParam::NumDevices => "num_devices",
            SweepParam::ServingAps => "serving_aps",
            SweepParam::Blocklength => "blocklength",
        }
    }

    /// Copy of `config` with this field set to `value`; terminal counts also
    /// refresh the pilot / uplink split.
    pub fn apply(&self, config: &ScenarioConfig, value: usize) -> ScenarioConfig {
        let mut c = config.clone();
        match self {
            SweepParam::NumPrbs => c.num_prbs = value,
            SweepParam::NumAps => c.num_aps = value,
            SweepParam::AntennasPerAp => c.antennas_per_ap = value,
            SweepParam::NumUsers => c.num_users = value,
            SweepParam::NumDevices => c.num_devices = value,
            SweepParam::ServingAps => c.serving_aps = value,
            SweepParam::Blocklength => c.blocklength = value,
        }
        if matches!(self, SweepParam::NumUsers | SweepParam::NumDevices) {
            c.refresh_frame();
        }
        c
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            SweepParam::NumPrbs,
            SweepParam::NumAps,
            SweepParam::AntennasPerAp,
            SweepParam::NumUsers,
            SweepParam::NumDevices,
            SweepParam::ServingAps,
            SweepParam::Blocklength,
        ];
        all.into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sweep parameter {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    pub batch: BatchResult,
}

pub fn sweep(
    config: &ScenarioConfig,
    param: SweepParam,
    values: &[usize],
    policy: Policy,
    n_instances: usize,
    regime: Regime,
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let mut batch = run_batch(&param.apply(config, value), policy, n_instances, regime)?;
            batch.label = format!("{} {}={}", batch.label, param, value);
            Ok(SweepPoint { value, batch })
        })
        .collect()
}
