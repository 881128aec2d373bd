use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watt_to_dbm(watt: f64) -> f64 {
    10.0 * watt.log10() + 30.0
}

/// All constants of a run. Powers are stored in watts; the dBm values of the
/// configuration file are converted once, in [`ConfigFile::into_config`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Number of access points (M).
    pub num_aps: usize,
    /// Antennas per access point (L).
    pub antennas_per_ap: usize,
    /// Broadband users (K_u).
    pub num_users: usize,
    /// Machine-type devices (K_d).
    pub num_devices: usize,
    /// Serving APs per terminal (M_s).
    pub serving_aps: usize,
    /// Resource blocks, equal to the spreading factor (N).
    pub num_prbs: usize,
    pub area_side_m: f64,
    pub ap_height_m: f64,
    pub terminal_height_m: f64,
    pub carrier_ghz: f64,
    /// Log-normal shadowing standard deviation; `None` disables shadowing.
    pub shadowing_std_db: Option<f64>,
    pub user_power_max_w: f64,
    pub device_power_max_w: f64,
    pub user_training_power_w: f64,
    pub device_training_power_w: f64,
    pub noise_density_w_hz: f64,
    pub bandwidth_hz: f64,
    pub coherence_samples: usize,
    pub pilot_samples: usize,
    pub uplink_samples: usize,
    pub embb_rate_min_bps: f64,
    pub mmtc_rate_min_bps: f64,
    /// Device SINR floor, linear.
    pub sinr_min: f64,
    /// Information-carrying symbols per short packet (n_d).
    pub blocklength: usize,
    /// Target packet error rate.
    pub target_per: f64,
    /// Power-amplifier inefficiency (mu_d).
    pub amplifier_inefficiency: f64,
    /// Static circuit power per device, watts (Theta_d).
    pub static_power_w: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::baseline()
    }
}

impl ScenarioConfig {
    /// Reference setup: K_u = 2, K_d = 10, M = 10, M_s = 5, L = 4, N = 255.
    pub fn baseline() -> Self {
        let mut cfg = Self {
            num_aps: 10,
            antennas_per_ap: 4,
            num_users: 2,
            num_devices: 10,
            serving_aps: 5,
            num_prbs: 255,
            area_side_m: 250.0,
            ap_height_m: 10.0,
            terminal_height_m: 1.65,
            carrier_ghz: 2.0,
            shadowing_std_db: None,
            user_power_max_w: dbm_to_watt(20.0),
            device_power_max_w: dbm_to_watt(10.0),
            user_training_power_w: dbm_to_watt(20.0),
            device_training_power_w: dbm_to_watt(10.0),
            noise_density_w_hz: dbm_to_watt(-174.0),
            bandwidth_hz: 20e6,
            coherence_samples: 200,
            pilot_samples: 0,
            uplink_samples: 0,
            embb_rate_min_bps: 1e6,
            mmtc_rate_min_bps: 1e4,
            sinr_min: 1.0,
            blocklength: 100,
            target_per: 1e-3,
            amplifier_inefficiency: 2.5,
            static_power_w: 0.01,
            seed: 1,
        };
        cfg.refresh_frame();
        cfg
    }

    /// Pilot length (K_u + K_d)/2, rounded up so that an odd terminal count
    /// never forces three terminals onto one pilot.
    pub fn default_pilot_samples(num_users: usize, num_devices: usize) -> usize {
        (num_users + num_devices).div_ceil(2).max(1)
    }

    /// Recomputes tau_p and tau_u = (tau_c - tau_p)/2 from the terminal counts.
    pub fn refresh_frame(&mut self) {
        self.pilot_samples = Self::default_pilot_samples(self.num_users, self.num_devices);
        self.uplink_samples = self.coherence_samples.saturating_sub(self.pilot_samples) / 2;
    }

    /// Changes the network dimensions and refreshes the frame split.
    pub fn with_network(
        mut self,
        num_aps: usize,
        antennas_per_ap: usize,
        num_users: usize,
        num_devices: usize,
        serving_aps: usize,
    ) -> Self {
        self.num_aps = num_aps;
        self.antennas_per_ap = antennas_per_ap;
        self.num_users = num_users;
        self.num_devices = num_devices;
        self.serving_aps = serving_aps;
        self.refresh_frame();
        self
    }

    pub fn with_prbs(mut self, num_prbs: usize) -> Self {
        self.num_prbs = num_prbs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn num_terminals(&self) -> usize {
        self.num_users + self.num_devices
    }

    /// Receiver noise power per antenna, sigma^2 = N_o B.
    pub fn noise_power_w(&self) -> f64 {
        self.noise_density_w_hz * self.bandwidth_hz
    }

    /// psi = B tau_u / tau_c, the usable uplink symbol rate.
    pub fn psi(&self) -> f64 {
        self.bandwidth_hz * self.uplink_samples as f64 / self.coherence_samples as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_aps == 0 || self.antennas_per_ap == 0 {
            return bad("need at least one AP with one antenna".into());
        }
        if self.num_terminals() == 0 {
            return bad("need at least one terminal".into());
        }
        if self.serving_aps == 0 || self.serving_aps > self.num_aps {
            return bad(format!(
                "serving APs {} must lie in 1..={}",
                self.serving_aps, self.num_aps
            ));
        }
        if self.num_prbs == 0 {
            return bad("N must be at least 1".into());
        }
        if self.pilot_samples == 0 {
            return bad("tau_p must be at least 1".into());
        }
        if self.pilot_samples + self.uplink_samples > self.coherence_samples {
            return bad(format!(
                "tau_p + tau_u = {} exceeds tau_c = {}",
                self.pilot_samples + self.uplink_samples,
                self.coherence_samples
            ));
        }
        if self.uplink_samples == 0 {
            return bad("tau_u must be at least 1".into());
        }
        let positive = [
            ("area side", self.area_side_m),
            ("carrier", self.carrier_ghz),
            ("user power budget", self.user_power_max_w),
            ("device power budget", self.device_power_max_w),
            ("user training power", self.user_training_power_w),
            ("device training power", self.device_training_power_w),
            ("noise density", self.noise_density_w_hz),
            ("bandwidth", self.bandwidth_hz),
            ("amplifier inefficiency", self.amplifier_inefficiency),
            ("static power", self.static_power_w),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.target_per > 0.0 && self.target_per < 0.5) {
            return bad(format!("target PER {} outside (0, 0.5)", self.target_per));
        }
        if self.blocklength == 0 {
            return bad("blocklength must be positive".into());
        }
        if self.sinr_min < 0.0 || self.embb_rate_min_bps < 0.0 || self.mmtc_rate_min_bps < 0.0 {
            return bad("QoS thresholds must be non-negative".into());
        }
        if let Some(s) = self.shadowing_std_db {
            if !(s >= 0.0 && s.is_finite()) {
                return bad(format!("shadowing std {s} dB is invalid"));
            }
        }
        Ok(())
    }

    /// Stable short digest of the configuration, used to tag exported data.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hex::encode(&hash[..8])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        file.into_config()
    }
}

/// On-disk configuration. Powers and noise density are given in dBm (dBm/Hz);
/// every field is optional and falls back to the baseline scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_users: usize,
    pub num_devices: usize,
    pub serving_aps: usize,
    pub num_prbs: usize,
    pub area_side_m: f64,
    pub ap_height_m: f64,
    pub terminal_height_m: f64,
    pub carrier_ghz: f64,
    pub shadowing_std_db: Option<f64>,
    pub user_power_max_dbm: f64,
    pub device_power_max_dbm: f64,
    /// Defaults to the user budget.
    pub user_training_power_dbm: Option<f64>,
    /// Defaults to the device budget.
    pub device_training_power_dbm: Option<f64>,
    pub noise_density_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub coherence_samples: usize,
    /// Defaults to ceil((K_u + K_d)/2).
    pub pilot_samples: Option<usize>,
    /// Defaults to floor((tau_c - tau_p)/2).
    pub uplink_samples: Option<usize>,
    pub embb_rate_min_bps: f64,
    pub mmtc_rate_min_bps: f64,
    pub sinr_min: f64,
    pub blocklength: usize,
    pub target_per: f64,
    pub amplifier_inefficiency: f64,
    pub static_power_w: f64,
    pub seed: u64,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let b = ScenarioConfig::baseline();
        Self {
            num_aps: b.num_aps,
            antennas_per_ap: b.antennas_per_ap,
            num_users: b.num_users,
            num_devices: b.num_devices,
            serving_aps: b.serving_aps,
            num_prbs: b.num_prbs,
            area_side_m: b.area_side_m,
            ap_height_m: b.ap_height_m,
            terminal_height_m: b.terminal_height_m,
            carrier_ghz: b.carrier_ghz,
            shadowing_std_db: None,
            user_power_max_dbm: 20.0,
            device_power_max_dbm: 10.0,
            user_training_power_dbm: None,
            device_training_power_dbm: None,
            noise_density_dbm_hz: -174.0,
            bandwidth_hz: b.bandwidth_hz,
            coherence_samples: b.coherence_samples,
            pilot_samples: None,
            uplink_samples: None,
            embb_rate_min_bps: b.embb_rate_min_bps,
            mmtc_rate_min_bps: b.mmtc_rate_min_bps,
            sinr_min: b.sinr_min,
            blocklength: b.blocklength,
            target_per: b.target_per,
            amplifier_inefficiency: b.amplifier_inefficiency,
            static_power_w: b.static_power_w,
            seed: b.seed,
        }
    }
}

impl ConfigFile {
    pub fn into_config(self) -> Result<ScenarioConfig> {
        let pilot_samples = self
            .pilot_samples
            .unwrap_or_else(|| ScenarioConfig::default_pilot_samples(self.num_users, self.num_devices));
        let uplink_samples = self
            .uplink_samples
            .unwrap_or_else(|| self.coherence_samples.saturating_sub(pilot_samples) / 2);
        let cfg = ScenarioConfig {
            num_aps: self.num_aps,
            antennas_per_ap: self.antennas_per_ap,
            num_users: self.num_users,
            num_devices: self.num_devices,
            serving_aps: self.serving_aps,
            num_prbs: self.num_prbs,
            area_side_m: self.area_side_m,
            ap_height_m: self.ap_height_m,
            terminal_height_m: self.terminal_height_m,
            carrier_ghz: self.carrier_ghz,
            shadowing_std_db: self.shadowing_std_db,
            user_power_max_w: dbm_to_watt(self.user_power_max_dbm),
            device_power_max_w: dbm_to_watt(self.device_power_max_dbm),
            user_training_power_w: dbm_to_watt(
                self.user_training_power_dbm.unwrap_or(self.user_power_max_dbm),
            ),
            device_training_power_w: dbm_to_watt(
                self.device_training_power_dbm.unwrap_or(self.device_power_max_dbm),
            ),
            noise_density_w_hz: dbm_to_watt(self.noise_density_dbm_hz),
            bandwidth_hz: self.bandwidth_hz,
            coherence_samples: self.coherence_samples,
            pilot_samples,
            uplink_samples,
            embb_rate_min_bps: self.embb_rate_min_bps,
            mmtc_rate_min_bps: self.mmtc_rate_min_bps,
            sinr_min: self.sinr_min,
            blocklength: self.blocklength,
            target_per: self.target_per,
            amplifier_inefficiency: self.amplifier_inefficiency,
            static_power_w: self.static_power_w,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn baseline_constants() {
        let c = ScenarioConfig::baseline();
        assert_relative_eq!(c.user_power_max_w, 0.1, max_relative = 1e-12);
        assert_relative_eq!(c.device_power_max_w, 0.01, max_relative = 1e-12);
        assert_eq!(c.pilot_samples, 6);
        assert_eq!(c.uplink_samples, 97);
        assert_relative_eq!(c.noise_power_w(), 7.962143411069971e-14, max_relative = 1e-12);
        c.validate().unwrap();
    }

    #[test]
    fn dbm_round_trip() {
        for dbm in [-174.0, 0.0, 10.0, 20.0] {
            assert_relative_eq!(watt_to_dbm(dbm_to_watt(dbm)), dbm, epsilon = 1e-9);
        }
    }

    #[test]
    fn empty_file_is_baseline() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::baseline());
    }

    #[test]
    fn file_overrides_and_derived_frame() {
        let cfg = ScenarioConfig::from_toml_str(
            "num_users = 2\nnum_devices = 3\nnum_aps = 3\nserving_aps = 2\nuser_power_max_dbm = 23.0\nseed = 9\n",
        )
        .unwrap();
        assert_eq!(cfg.pilot_samples, 3);
        assert_eq!(cfg.uplink_samples, 98);
        assert_relative_eq!(cfg.user_power_max_w, dbm_to_watt(23.0));
        assert_relative_eq!(cfg.user_training_power_w, dbm_to_watt(23.0));
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ScenarioConfig::from_toml_str("serving_aps = 11").is_err());
        assert!(ScenarioConfig::from_toml_str("target_per = 0.7").is_err());
        assert!(ScenarioConfig::from_toml_str("pilot_samples = 150\nuplink_samples = 100").is_err());
        assert!(ScenarioConfig::from_toml_str("num_prbs = 0").is_err());
        assert!(ScenarioConfig::from_toml_str("unknown_key = 1").is_err());
    }
}
