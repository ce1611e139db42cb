//! Scenario configuration: TOML file with one table per section.
//!
//! Every key is optional; missing keys take the reference-scenario defaults.
//! Keys are addressed as `section.key`, e.g. `carrier.frequency_hz`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{CarrierConfig, GeometryConfig};
use crate::power::{AdmmSettings, PowerModelParams};
use crate::precoding::Architecture;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusteringScheme {
    Enhanced,
    Kmeans,
    Chs,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationScheme {
    Admm,
    Equal,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessScheme {
    Noma,
    Oma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub num_rf_chains: usize,
    pub phase_bits: u32,
    pub architecture: Architecture,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            num_rf_chains: 4,
            phase_bits: 4,
            architecture: Architecture::SubConnected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub num_clusters: usize,
    pub max_iter: usize,
    pub scheme: ClusteringScheme,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            num_clusters: 4,
            max_iter: 100,
            scheme: ClusteringScheme::Enhanced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    /// Cache efficiency `F` of every user.
    pub efficiency: f64,
    /// Fronthaul capacity of every base station, bits/s.
    pub fronthaul_capacity_bps: f64,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            efficiency: 0.3,
            fronthaul_capacity_bps: 1e11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SicSection {
    pub cancellation_error: f64,
}

impl Default for SicSection {
    fn default() -> Self {
        Self {
            cancellation_error: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemesConfig {
    pub allocation: AllocationScheme,
    pub access: AccessScheme,
}

impl Default for SchemesConfig {
    fn default() -> Self {
        Self {
            allocation: AllocationScheme::Admm,
            access: AccessScheme::Noma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedsConfig {
    pub master: u64,
    pub replicates: usize,
}

impl Default for SeedsConfig {
    fn default() -> Self {
        Self {
            master: 1,
            replicates: 20,
        }
    }
}

/// All parameters of one simulation scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub carrier: CarrierConfig,
    pub geometry: GeometryConfig,
    pub array: ArrayConfig,
    pub clustering: ClusteringConfig,
    pub power: PowerModelParams,
    pub cache: CacheConfig,
    pub sic: SicSection,
    pub solver: AdmmSettings,
    pub schemes: SchemesConfig,
    pub seeds: SeedsConfig,
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && !v.is_nan() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be non-negative, got {v}")))
    }
}

fn unit_interval(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(key, format!("must lie in [0, 1], got {v}")))
    }
}

fn at_least(key: &'static str, v: usize, min: usize) -> Result<(), ConfigError> {
    if v >= min {
        Ok(())
    } else {
        Err(invalid(key, format!("must be at least {min}, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.carrier;
        positive("carrier.frequency_hz", c.frequency_hz)?;
        positive("carrier.bandwidth_hz", c.bandwidth_hz)?;
        if !c.noise_psd_dbm_per_hz.is_finite() {
            return Err(invalid("carrier.noise_psd_dbm_per_hz", "must be finite"));
        }
        nonnegative("carrier.absorption_coeff_per_m", c.absorption_coeff_per_m)?;
        positive("carrier.antenna_gain", c.antenna_gain)?;
        at_least("carrier.num_tx_antennas", c.num_tx_antennas, 1)?;

        let g = &self.geometry;
        at_least("geometry.num_bs", g.num_bs, 1)?;
        at_least("geometry.users_per_bs", g.users_per_bs, 1)?;
        positive("geometry.sbs_radius_m", g.sbs_radius_m)?;
        nonnegative("geometry.min_user_spacing_m", g.min_user_spacing_m)?;
        nonnegative("geometry.min_bs_user_distance_m", g.min_bs_user_distance_m)?;
        nonnegative("geometry.bs_spacing_m", g.bs_spacing_m)?;
        if g.min_bs_user_distance_m >= g.sbs_radius_m {
            return Err(invalid(
                "geometry.min_bs_user_distance_m",
                "must be smaller than geometry.sbs_radius_m",
            ));
        }

        let a = &self.array;
        let n = self.clustering.num_clusters;
        at_least("clustering.num_clusters", n, 1)?;
        at_least("clustering.max_iter", self.clustering.max_iter, 1)?;
        if n > g.users_per_bs {
            return Err(invalid(
                "clustering.num_clusters",
                format!("{n} clusters exceed geometry.users_per_bs = {}", g.users_per_bs),
            ));
        }
        if n > c.num_tx_antennas {
            return Err(invalid(
                "clustering.num_clusters",
                format!("{n} clusters exceed carrier.num_tx_antennas = {}", c.num_tx_antennas),
            ));
        }
        if a.architecture == Architecture::SubConnected {
            at_least("array.num_rf_chains", a.num_rf_chains, 1)?;
            at_least("array.phase_bits", a.phase_bits as usize, 1)?;
            if a.phase_bits > 30 {
                return Err(invalid(
                    "array.phase_bits",
                    format!("at most 30 bits, got {}", a.phase_bits),
                ));
            }
            if !c.num_tx_antennas.is_multiple_of(a.num_rf_chains) {
                return Err(invalid(
                    "array.num_rf_chains",
                    format!(
                        "N_T not divisible by N_R: {} antennas, {} RF chains",
                        c.num_tx_antennas, a.num_rf_chains
                    ),
                ));
            }
            if a.num_rf_chains != n {
                return Err(invalid(
                    "array.num_rf_chains",
                    format!("must equal clustering.num_clusters = {n}, got {}", a.num_rf_chains),
                ));
            }
        }

        let p = &self.power;
        positive("power.p_max_w", p.p_max_w)?;
        nonnegative("power.baseband_w", p.baseband_w)?;
        nonnegative("power.rf_chain_w", p.rf_chain_w)?;
        nonnegative("power.phase_shifter_per_bit_w", p.phase_shifter_per_bit_w)?;
        nonnegative("power.amplifier_w", p.amplifier_w)?;
        if !(p.pa_inefficiency >= 1.0 && p.pa_inefficiency.is_finite()) {
            return Err(invalid(
                "power.pa_inefficiency",
                format!("must be finite and at least 1, got {}", p.pa_inefficiency),
            ));
        }

        unit_interval("cache.efficiency", self.cache.efficiency)?;
        nonnegative("cache.fronthaul_capacity_bps", self.cache.fronthaul_capacity_bps)?;
        unit_interval("sic.cancellation_error", self.sic.cancellation_error)?;

        let s = &self.solver;
        positive("solver.mu", s.mu)?;
        positive("solver.dinkelbach_tol", s.dinkelbach_tol)?;
        positive("solver.admm_tol", s.admm_tol)?;
        positive("solver.pgd_tol", s.pgd_tol)?;
        at_least("solver.max_outer", s.max_outer, 1)?;
        at_least("solver.max_inner", s.max_inner, 1)?;
        at_least("solver.pgd_max_steps", s.pgd_max_steps, 1)?;

        at_least("seeds.replicates", self.seeds.replicates, 1)?;
        Ok(())
    }
}

/// Loads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml_str(&text)
}
