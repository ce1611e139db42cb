//! Rates, energy efficiency and power allocation under imperfect SIC.
//!
//! Within a cluster users are indexed strongest first. The `i`-th user decodes
//! and removes the signals of the weaker users `j > i` up to a residual fraction
//! `phi`, and treats the stronger users `j < i` as interference:
//!
//! ```text
//! sinr_i = p_i g_i / ((sum_{j<i} p_j + phi sum_{j>i} p_j) g_i + sum_{m != n} P_m g_i^(m) + sigma^2)
//! ```
//!
//! where `g_i^(m)` is the user's gain through cluster `m`'s beam and `P_m` that
//! cluster's total power. Energy efficiency is the cache-weighted sum rate over
//! total consumed power, summed over base stations.

mod admm;
mod baselines;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use admm::{
    admm_lambda_update, admm_x_update, admm_z_update, allocate_power_admm, AdmmSettings, AdmmTrace, XUpdate,
};
pub use baselines::{equal_power, oma_audit, oma_energy_efficiency, oma_equal_power, oma_rates, random_power};

use crate::precoding::{Architecture, EffectiveGains};

/// Absolute slack allowed when auditing constraints.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerError {
    #[error("cache state list is empty")]
    EmptyCacheState,
    #[error("total power must be positive, got {0}")]
    NonPositivePower(f64),
    #[error("objective is not finite; gains or powers are invalid")]
    NonFinite,
    #[error("{name} is invalid: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("base station {bs} violates {constraint}: {value:e} > {limit:e}")]
    Infeasible {
        bs: usize,
        constraint: &'static str,
        value: f64,
        limit: f64,
    },
}

/// Hardware power model of one base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerModelParams {
    pub p_max_w: f64,
    pub baseband_w: f64,
    pub rf_chain_w: f64,
    pub phase_shifter_per_bit_w: f64,
    pub amplifier_w: f64,
    /// PA inefficiency factor, >= 1.
    pub pa_inefficiency: f64,
}

impl Default for PowerModelParams {
    fn default() -> Self {
        Self {
            p_max_w: 5.0,
            baseband_w: 0.2,
            rf_chain_w: 0.16,
            phase_shifter_per_bit_w: 0.01,
            amplifier_w: 0.02,
            pa_inefficiency: 1.0 / 0.38,
        }
    }
}

/// Cache efficiency of every user and the fronthaul capacity of one base station.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheModel {
    pub cache_efficiency: Vec<f64>,
    pub fronthaul_capacity_bps: f64,
}

/// Imperfect SIC model: fraction of a cancelled signal that remains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SicConfig {
    pub cancellation_error: f64,
}

/// Fraction of a user's requested files held in the local cache.
pub fn cache_efficiency_from_state(cached: &[bool]) -> Result<f64, PowerError> {
    if cached.is_empty() {
        return Err(PowerError::EmptyCacheState);
    }
    Ok(cached.iter().filter(|&&c| c).count() as f64 / cached.len() as f64)
}

/// SINR of one user given the power sums that interfere with it.
pub fn sinr_imperfect(
    own_power: f64,
    own_gain: f64,
    stronger_power: f64,
    weaker_power: f64,
    inter_cluster: f64,
    phi: f64,
    sigma2: f64,
) -> f64 {
    own_power * own_gain / ((stronger_power + phi * weaker_power) * own_gain + inter_cluster + sigma2)
}

/// Shannon rate on one cluster's share of the band.
pub fn user_rate(sinr: f64, bandwidth_hz: f64, n_clusters: usize) -> f64 {
    bandwidth_hz / n_clusters as f64 * (1.0 + sinr).log2()
}

/// Fronthaul load: the part of every user's rate not served from cache.
pub fn fronthaul_rate(rates: &[f64], cache_efficiency: &[f64]) -> f64 {
    rates.iter().zip(cache_efficiency).map(|(r, f)| r * (1.0 - f)).sum()
}

/// Circuit power: baseband, RF chains, phase shifters and PAs.
pub fn circuit_power(
    params: &PowerModelParams,
    n_t: usize,
    n_r: usize,
    q_bits: u32,
    architecture: Architecture,
) -> f64 {
    match architecture {
        Architecture::SubConnected => {
            params.baseband_w
                + n_r as f64 * params.rf_chain_w
                + n_t as f64 * (q_bits as f64 * params.phase_shifter_per_bit_w)
                + n_t as f64 * params.amplifier_w
        }
        Architecture::FullDigital => {
            params.baseband_w + n_t as f64 * params.rf_chain_w + n_t as f64 * params.amplifier_w
        }
    }
}

pub fn total_power(circuit_w: f64, cluster_powers: &[f64], pa_inefficiency: f64) -> f64 {
    circuit_w + pa_inefficiency * cluster_powers.iter().sum::<f64>()
}

fn weighted_sum(rates: &[f64], cache_efficiency: &[f64]) -> f64 {
    rates.iter().zip(cache_efficiency).map(|(r, f)| (1.0 + f) * r).sum()
}

/// System energy efficiency in bits/J: `sum_b sum_u (1 + F_u) R_u / P_b`.
pub fn energy_efficiency(
    rates: &[Vec<f64>],
    cache_efficiency: &[Vec<f64>],
    total_powers: &[f64],
) -> Result<f64, PowerError> {
    let mut ee = 0.0;
    for ((r, f), &p) in rates.iter().zip(cache_efficiency).zip(total_powers) {
        if p.is_nan() || p <= 0.0 {
            return Err(PowerError::NonPositivePower(p));
        }
        ee += weighted_sum(r, f) / p;
    }
    Ok(ee)
}

/// Subtractive Dinkelbach form for one base station: `sum (1+F) R - eta * P_total`.
pub fn dinkelbach_value(eta: f64, rates: &[f64], cache_efficiency: &[f64], total_power_w: f64) -> f64 {
    weighted_sum(rates, cache_efficiency) - eta * total_power_w
}

/// Scalar link and hardware parameters of one base station's power problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BsParams {
    pub bandwidth_hz: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd_w_per_hz: f64,
    pub cancellation_error: f64,
    pub p_max_w: f64,
    pub fronthaul_capacity_bps: f64,
    pub circuit_power_w: f64,
    pub pa_inefficiency: f64,
}

/// Power allocation problem of one base station, with users laid out in SIC
/// order: cluster by cluster, strongest first. Power vectors are indexed by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BsProblem {
    pub params: BsParams,
    /// Original user index of every slot.
    pub slot_user: Vec<usize>,
    pub slot_cluster: Vec<usize>,
    pub cluster_slots: Vec<Range<usize>>,
    /// `gain[slot][m]`: gain of the slot's user through beam `m`.
    pub gain: Vec<Vec<f64>>,
    pub cache_efficiency: Vec<f64>,
}

impl BsProblem {
    /// `cache_efficiency` is indexed by user.
    pub fn new(gains: &EffectiveGains, cache_efficiency: &[f64], params: BsParams) -> Self {
        let mut slot_user = Vec::new();
        let mut slot_cluster = Vec::new();
        let mut cluster_slots = Vec::new();
        for (n, order) in gains.order.iter().enumerate() {
            let start = slot_user.len();
            for &u in order {
                slot_user.push(u);
                slot_cluster.push(n);
            }
            cluster_slots.push(start..slot_user.len());
        }
        let gain = slot_user.iter().map(|&u| gains.through_beam[u].clone()).collect();
        let cache_efficiency = slot_user.iter().map(|&u| cache_efficiency[u]).collect();
        Self {
            params,
            slot_user,
            slot_cluster,
            cluster_slots,
            gain,
            cache_efficiency,
        }
    }

    pub fn num_users(&self) -> usize {
        self.slot_user.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.cluster_slots.len()
    }

    /// Noise power over one cluster's band.
    pub fn sigma2(&self) -> f64 {
        self.params.noise_psd_w_per_hz * self.params.bandwidth_hz / self.num_clusters() as f64
    }

    pub fn cluster_powers(&self, x: &[f64]) -> Vec<f64> {
        self.cluster_slots.iter().map(|r| x[r.clone()].iter().sum()).collect()
    }

    fn own_gain(&self, k: usize) -> f64 {
        self.gain[k][self.slot_cluster[k]]
    }

    fn interference(&self, x: &[f64], cluster_powers: &[f64], k: usize) -> f64 {
        let n = self.slot_cluster[k];
        let range = &self.cluster_slots[n];
        let stronger: f64 = x[range.start..k].iter().sum();
        let weaker: f64 = x[k + 1..range.end].iter().sum();
        let mci: f64 = (0..self.num_clusters())
            .filter(|&m| m != n)
            .map(|m| cluster_powers[m] * self.gain[k][m])
            .sum();
        (stronger + self.params.cancellation_error * weaker) * self.own_gain(k) + mci + self.sigma2()
    }

    pub fn sinrs(&self, x: &[f64]) -> Vec<f64> {
        let cp = self.cluster_powers(x);
        (0..self.num_users())
            .map(|k| x[k] * self.own_gain(k) / self.interference(x, &cp, k))
            .collect()
    }

    /// Per-slot rates in bits/s.
    pub fn rates(&self, x: &[f64]) -> Vec<f64> {
        self.sinrs(x)
            .into_iter()
            .map(|s| user_rate(s, self.params.bandwidth_hz, self.num_clusters()))
            .collect()
    }

    pub fn weighted_rate(&self, x: &[f64]) -> f64 {
        weighted_sum(&self.rates(x), &self.cache_efficiency)
    }

    /// Gradient of the cache-weighted sum rate with respect to slot powers, bits/s/W.
    pub fn weighted_rate_gradient(&self, x: &[f64]) -> Vec<f64> {
        let k_users = self.num_users();
        let cp = self.cluster_powers(x);
        let scale = self.params.bandwidth_hz / self.num_clusters() as f64 / std::f64::consts::LN_2;
        let mut grad = vec![0.0; k_users];
        for k in 0..k_users {
            let w = (1.0 + self.cache_efficiency[k]) * scale;
            let g = self.own_gain(k);
            let interference = self.interference(x, &cp, k);
            let signal = x[k] * g;
            let a = w / (signal + interference);
            let b = w / interference;
            grad[k] += a * g;
            let n = self.slot_cluster[k];
            let range = &self.cluster_slots[n];
            let diff = a - b;
            for l in 0..k_users {
                let d_interference = if l == k {
                    0.0
                } else if self.slot_cluster[l] == n {
                    if l < k {
                        g
                    } else {
                        debug_assert!(range.contains(&l));
                        self.params.cancellation_error * g
                    }
                } else {
                    self.gain[k][self.slot_cluster[l]]
                };
                grad[l] += diff * d_interference;
            }
        }
        grad
    }

    pub fn fronthaul_rate(&self, x: &[f64]) -> f64 {
        fronthaul_rate(&self.rates(x), &self.cache_efficiency)
    }

    pub fn total_power(&self, x: &[f64]) -> f64 {
        total_power(
            self.params.circuit_power_w,
            &self.cluster_powers(x),
            self.params.pa_inefficiency,
        )
    }

    /// Energy efficiency of this base station alone.
    pub fn energy_efficiency(&self, x: &[f64]) -> f64 {
        self.weighted_rate(x) / self.total_power(x)
    }

    /// Uniformly scales `x` down, by bisection on the scale, until the
    /// fronthaul load fits the capacity.
    pub fn scale_to_fronthaul(&self, x: &[f64]) -> Vec<f64> {
        self.scale_to_fit(x, |p| self.fronthaul_rate(p))
    }

    pub(crate) fn scale_to_fit(&self, x: &[f64], load: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let cap = self.params.fronthaul_capacity_bps;
        if load(x) <= cap {
            return x.to_vec();
        }
        let scaled = |s: f64| x.iter().map(|v| v * s).collect::<Vec<_>>();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if load(&scaled(mid)) <= cap {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 {
                break;
            }
        }
        scaled(lo)
    }

    /// Maps slot-indexed values back to user order.
    pub fn to_user_order(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for (k, &u) in self.slot_user.iter().enumerate() {
            out[u] = values[k];
        }
        out
    }

    /// Checks nonnegativity, the power budget and the fronthaul capacity.
    pub fn audit(&self, bs: usize, x: &[f64]) -> Result<(), PowerError> {
        if let Some(&p) = x.iter().find(|&&p| !(p >= -FEASIBILITY_SLACK)) {
            return Err(PowerError::Infeasible {
                bs,
                constraint: "nonnegativity",
                value: -p,
                limit: 0.0,
            });
        }
        let sum: f64 = x.iter().sum();
        if sum > self.params.p_max_w + FEASIBILITY_SLACK {
            return Err(PowerError::Infeasible {
                bs,
                constraint: "power budget",
                value: sum,
                limit: self.params.p_max_w,
            });
        }
        let fh = self.fronthaul_rate(x);
        if fh > self.params.fronthaul_capacity_bps + FEASIBILITY_SLACK {
            return Err(PowerError::Infeasible {
                bs,
                constraint: "fronthaul capacity",
                value: fh,
                limit: self.params.fronthaul_capacity_bps,
            });
        }
        Ok(())
    }
}

/// Power allocation over all base stations.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSolution {
    /// `powers[bs][user]`, W.
    pub powers: Vec<Vec<f64>>,
    /// `cluster_powers[bs][cluster]`, W.
    pub cluster_powers: Vec<Vec<f64>>,
    /// `rates[bs][user]`, bits/s.
    pub rates: Vec<Vec<f64>>,
    /// System energy efficiency, bits/J.
    pub ee: f64,
    /// System energy efficiency after every outer iteration.
    pub dinkelbach_trace: Vec<f64>,
    /// Dinkelbach parameter of every base station, starting from 0.
    pub bs_eta_traces: Vec<Vec<f64>>,
    pub admm_traces: Vec<AdmmTrace>,
    pub outer_iterations: usize,
    /// Every inner ADMM loop met its residual tolerance and the outer loop its stop rule.
    pub converged: bool,
    /// Slot-ordered powers, as used by [`BsProblem`].
    pub slot_powers: Vec<Vec<f64>>,
}

impl PowerSolution {
    pub(crate) fn from_slot_powers(problems: &[BsProblem], slot_powers: Vec<Vec<f64>>) -> Result<Self, PowerError> {
        let mut powers = Vec::with_capacity(problems.len());
        let mut cluster_powers = Vec::with_capacity(problems.len());
        let mut rates = Vec::with_capacity(problems.len());
        let mut ee = 0.0;
        for (problem, x) in problems.iter().zip(&slot_powers) {
            let r = problem.rates(x);
            let bs_ee = weighted_sum(&r, &problem.cache_efficiency) / problem.total_power(x);
            if !bs_ee.is_finite() {
                return Err(PowerError::NonFinite);
            }
            ee += bs_ee;
            powers.push(problem.to_user_order(x));
            cluster_powers.push(problem.cluster_powers(x));
            rates.push(problem.to_user_order(&r));
        }
        Ok(Self {
            powers,
            cluster_powers,
            rates,
            ee,
            dinkelbach_trace: vec![ee],
            bs_eta_traces: Vec::new(),
            admm_traces: Vec::new(),
            outer_iterations: 0,
            converged: true,
            slot_powers,
        })
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().flatten().sum()
    }

    pub fn inner_iterations(&self) -> usize {
        self.admm_traces.iter().map(|t| t.steps.len()).sum()
    }

    /// Audits every base station's constraints.
    pub fn audit(&self, problems: &[BsProblem]) -> Result<(), PowerError> {
        problems
            .iter()
            .zip(&self.slot_powers)
            .enumerate()
            .try_for_each(|(b, (p, x))| p.audit(b, x))
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Builds a problem directly from slot-ordered gains.
    pub fn problem(gain: Vec<Vec<f64>>, cluster_sizes: &[usize], params: BsParams, cache: f64) -> BsProblem {
        let mut slot_cluster = Vec::new();
        let mut cluster_slots = Vec::new();
        for (n, &s) in cluster_sizes.iter().enumerate() {
            let start = slot_cluster.len();
            slot_cluster.extend(std::iter::repeat(n).take(s));
            cluster_slots.push(start..slot_cluster.len());
        }
        let k = slot_cluster.len();
        BsProblem {
            params,
            slot_user: (0..k).collect(),
            slot_cluster,
            cluster_slots,
            gain,
            cache_efficiency: vec![cache; k],
        }
    }

    pub fn params(n_clusters: usize, sigma2: f64) -> BsParams {
        let bandwidth_hz = 1e9;
        BsParams {
            bandwidth_hz,
            noise_psd_w_per_hz: sigma2 * n_clusters as f64 / bandwidth_hz,
            cancellation_error: 0.0,
            p_max_w: 5.0,
            fronthaul_capacity_bps: f64::INFINITY,
            circuit_power_w: 1.0,
            pa_inefficiency: 1.0 / 0.38,
        }
    }
}
