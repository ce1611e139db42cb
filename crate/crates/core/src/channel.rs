//! Line-of-sight THz channel model.
//!
//! A user's channel is `h = sqrt(N_T) * sqrt(1/PL(f, d)) * gain * a(phi)`, where the
//! pathloss combines free-space spreading `(4 pi f d / c)^2` with molecular
//! absorption `exp(k d)`, and `a(phi)` is the unit-norm steering vector of a
//! half-wavelength uniform linear array.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::CVector;

/// Speed of light in free space, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Placement attempts allowed per user before the geometry is declared too dense.
pub const PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("could not place user {user} of base station {bs} after {attempts} attempts")]
    OverDense { bs: usize, user: usize, attempts: usize },
}

fn positive(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ChannelError::NonPositive { name, value })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), ChannelError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ChannelError::Negative { name, value })
    }
}

/// Carrier and array parameters shared by every link of a base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarrierConfig {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    /// Molecular absorption coefficient k(f), 1/m.
    pub absorption_coeff_per_m: f64,
    /// Linear amplitude gain applied to every channel vector.
    pub antenna_gain: f64,
    pub num_tx_antennas: usize,
}

impl Default for CarrierConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 0.34e12,
            bandwidth_hz: 10e9,
            noise_psd_dbm_per_hz: -174.0,
            absorption_coeff_per_m: 0.002,
            antenna_gain: 1.0,
            num_tx_antennas: 64,
        }
    }
}

/// Free-space spreading loss `20 log10(4 pi f d / c)` in dB.
pub fn spreading_loss_db(frequency_hz: f64, distance_m: f64) -> Result<f64, ChannelError> {
    positive("frequency", frequency_hz)?;
    positive("distance", distance_m)?;
    Ok(20.0 * (4.0 * PI * frequency_hz * distance_m / SPEED_OF_LIGHT).log10())
}

/// Molecular absorption loss `10 k d log10(e)` in dB.
pub fn absorption_loss_db(absorption_coeff: f64, distance_m: f64) -> Result<f64, ChannelError> {
    non_negative("absorption coefficient", absorption_coeff)?;
    non_negative("distance", distance_m)?;
    Ok(10.0 * absorption_coeff * distance_m * std::f64::consts::LOG10_E)
}

/// Total pathloss as a linear power ratio (>= 1 away from the near field).
pub fn pathloss_linear(frequency_hz: f64, distance_m: f64, absorption_coeff: f64) -> Result<f64, ChannelError> {
    positive("frequency", frequency_hz)?;
    positive("distance", distance_m)?;
    non_negative("absorption coefficient", absorption_coeff)?;
    let spread = 4.0 * PI * frequency_hz * distance_m / SPEED_OF_LIGHT;
    Ok(spread * spread * (absorption_coeff * distance_m).exp())
}

/// ULA steering vector; element `s` is `exp(j pi s sin(phi)) / sqrt(n_t)`.
pub fn steering_vector(phi: f64, n_t: usize) -> CVector {
    assert!(n_t >= 1, "steering vector needs at least one antenna");
    let amplitude = 1.0 / (n_t as f64).sqrt();
    let phase_step = PI * phi.sin();
    CVector::from_iterator(
        n_t,
        (0..n_t).map(|s| Complex64::from_polar(amplitude, phase_step * s as f64)),
    )
}

/// LOS channel vector of a user at distance `distance_m` and departure angle `phi`.
pub fn channel_vector(cfg: &CarrierConfig, distance_m: f64, phi: f64) -> Result<CVector, ChannelError> {
    let pl = pathloss_linear(cfg.frequency_hz, distance_m, cfg.absorption_coeff_per_m)?;
    let scale = (cfg.num_tx_antennas as f64).sqrt() * (1.0 / pl).sqrt() * cfg.antenna_gain;
    Ok(steering_vector(phi, cfg.num_tx_antennas) * Complex64::new(scale, 0.0))
}

/// Noise power in watts over one cluster's share `bandwidth / num_clusters`.
pub fn noise_power(noise_psd_dbm_per_hz: f64, bandwidth_hz: f64, num_clusters: usize) -> f64 {
    assert!(bandwidth_hz > 0.0, "bandwidth must be positive");
    assert!(num_clusters >= 1, "need at least one cluster");
    10f64.powf((noise_psd_dbm_per_hz - 30.0) / 10.0) * (bandwidth_hz / num_clusters as f64)
}

/// Cell layout and placement constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub num_bs: usize,
    pub users_per_bs: usize,
    pub sbs_radius_m: f64,
    pub min_user_spacing_m: f64,
    pub min_bs_user_distance_m: f64,
    /// Distance between neighbouring SBS sites placed on a line.
    pub bs_spacing_m: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            num_bs: 2,
            users_per_bs: 15,
            sbs_radius_m: 5.0,
            min_user_spacing_m: 0.1,
            min_bs_user_distance_m: 0.5,
            bs_spacing_m: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Sampled network geometry. Indexing is `[bs][user]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub bs_positions: Vec<Point>,
    pub user_positions: Vec<Vec<Point>>,
    pub distances: Vec<Vec<f64>>,
    pub departure_angles: Vec<Vec<f64>>,
}

impl Topology {
    /// Builds a topology from explicit positions, deriving distances and bearings.
    pub fn from_positions(bs_positions: Vec<Point>, user_positions: Vec<Vec<Point>>) -> Self {
        let distances = bs_positions
            .iter()
            .zip(&user_positions)
            .map(|(bs, users)| users.iter().map(|u| bs.distance(u)).collect())
            .collect();
        let departure_angles = bs_positions
            .iter()
            .zip(&user_positions)
            .map(|(bs, users)| users.iter().map(|u| (u.y - bs.y).atan2(u.x - bs.x)).collect())
            .collect();
        Self {
            bs_positions,
            user_positions,
            distances,
            departure_angles,
        }
    }

    pub fn num_bs(&self) -> usize {
        self.bs_positions.len()
    }
}

/// Places users uniformly in each SBS disc, rejecting draws that violate the
/// minimum BS-user distance or the minimum spacing to any previously placed user.
pub fn sample_topology(geometry: &GeometryConfig, seed: u64) -> Result<Topology, ChannelError> {
    positive("sbs radius", geometry.sbs_radius_m)?;
    non_negative("min user spacing", geometry.min_user_spacing_m)?;
    non_negative("min bs-user distance", geometry.min_bs_user_distance_m)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bs_positions: Vec<Point> = (0..geometry.num_bs)
        .map(|b| Point {
            x: b as f64 * geometry.bs_spacing_m,
            y: 0.0,
        })
        .collect();

    let mut placed: Vec<Point> = Vec::with_capacity(geometry.num_bs * geometry.users_per_bs);
    let mut user_positions = Vec::with_capacity(geometry.num_bs);
    for (b, bs) in bs_positions.iter().enumerate() {
        let mut users = Vec::with_capacity(geometry.users_per_bs);
        for u in 0..geometry.users_per_bs {
            let mut attempt = 0;
            let point = loop {
                if attempt == PLACEMENT_ATTEMPTS {
                    return Err(ChannelError::OverDense {
                        bs: b,
                        user: u,
                        attempts: PLACEMENT_ATTEMPTS,
                    });
                }
                attempt += 1;
                let r = geometry.sbs_radius_m * rng.gen::<f64>().sqrt();
                let theta = 2.0 * PI * rng.gen::<f64>();
                let candidate = Point {
                    x: bs.x + r * theta.cos(),
                    y: bs.y + r * theta.sin(),
                };
                if r < geometry.min_bs_user_distance_m {
                    continue;
                }
                if placed
                    .iter()
                    .any(|p| p.distance(&candidate) < geometry.min_user_spacing_m)
                {
                    continue;
                }
                break candidate;
            };
            placed.push(point);
            users.push(point);
        }
        user_positions.push(users);
    }
    Ok(Topology::from_positions(bs_positions, user_positions))
}

/// Per-BS channel vectors together with the geometry they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// `channels[bs][user]`, each of length `N_T`.
    pub channels: Vec<Vec<CVector>>,
    pub topology: Topology,
}

impl ChannelSet {
    pub fn generate(cfg: &CarrierConfig, topology: Topology) -> Result<Self, ChannelError> {
        positive("frequency", cfg.frequency_hz)?;
        positive("antenna gain", cfg.antenna_gain)?;
        let channels = topology
            .distances
            .iter()
            .zip(&topology.departure_angles)
            .map(|(ds, phis)| {
                ds.iter()
                    .zip(phis)
                    .map(|(&d, &phi)| channel_vector(cfg, d, phi))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { channels, topology })
    }

    pub fn bs(&self, b: usize) -> &[CVector] {
        &self.channels[b]
    }
}
