//! Seeded end-to-end run: topology, channels, clustering, precoding, power.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::{AccessScheme, AllocationScheme, ClusteringScheme, ScenarioConfig};
use crate::channel::{noise_power, sample_topology, ChannelError, ChannelSet};
use crate::clustering::{
    chs_baseline, enhanced_kmeans, kmeans_baseline, random_clustering, ClusterAssignment, ClusteringError,
};
use crate::power::{
    allocate_power_admm, circuit_power, equal_power, oma_audit, oma_energy_efficiency, oma_equal_power, oma_rates,
    random_power, BsParams, BsProblem, PowerError, PowerSolution,
};
use crate::precoding::{effective_gains_and_order, Architecture, EffectiveGains, HybridPrecoder, PrecodingError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("topology stage: {0}")]
    Topology(#[source] ChannelError),
    #[error("channel stage: {0}")]
    Channel(#[source] ChannelError),
    #[error("clustering stage, base station {bs}: {source}")]
    Clustering {
        bs: usize,
        #[source]
        source: ClusteringError,
    },
    #[error("precoding stage, base station {bs}: {source}")]
    Precoding {
        bs: usize,
        #[source]
        source: PrecodingError,
    },
    #[error("power stage: {0}")]
    Power(#[source] PowerError),
}

const TOPOLOGY_STREAM: u64 = 1;
const CLUSTERING_STREAM: u64 = 2;
const POWER_STREAM: u64 = 3;

/// Independent seed for one stage and index, derived from the run seed.
pub fn stage_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 16);
    rng.next_u64()
}

/// Everything up to and including the power problems.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub channels: ChannelSet,
    pub assignments: Vec<ClusterAssignment>,
    pub precoders: Vec<HybridPrecoder>,
    pub gains: Vec<EffectiveGains>,
    pub problems: Vec<BsProblem>,
}

/// Scalar results of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub ee_bits_per_joule: f64,
    pub sum_rate_bps: f64,
    /// Final clustering MSE, averaged over base stations.
    pub mse: f64,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub feasible: bool,
    /// Clustering iterations, averaged over base stations.
    pub cluster_iters: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub scenario: Scenario,
    /// Powers and achieved rates under the configured access scheme.
    pub solution: PowerSolution,
    pub metrics: Metrics,
}

/// Topology and channels of one run.
pub fn build_channels(cfg: &ScenarioConfig, seed: u64) -> Result<ChannelSet, PipelineError> {
    let topology =
        sample_topology(&cfg.geometry, stage_seed(seed, TOPOLOGY_STREAM, 0)).map_err(PipelineError::Topology)?;
    ChannelSet::generate(&cfg.carrier, topology).map_err(PipelineError::Channel)
}

/// Clusters base station `bs` of a run with the configured scheme.
pub fn cluster_bs(
    cfg: &ScenarioConfig,
    channels: &ChannelSet,
    seed: u64,
    bs: usize,
) -> Result<ClusterAssignment, PipelineError> {
    let h = channels.bs(bs);
    let c = &cfg.clustering;
    let seed = stage_seed(seed, CLUSTERING_STREAM, bs as u64);
    match c.scheme {
        ClusteringScheme::Enhanced => enhanced_kmeans(h, c.num_clusters, seed, c.max_iter),
        ClusteringScheme::Kmeans => kmeans_baseline(h, c.num_clusters, seed, c.max_iter),
        ClusteringScheme::Chs => chs_baseline(h, c.num_clusters),
        ClusteringScheme::Random => random_clustering(h, c.num_clusters, seed),
    }
    .map_err(|source| PipelineError::Clustering { bs, source })
}

/// Power problem parameters of every base station under `cfg`.
pub fn bs_params(cfg: &ScenarioConfig) -> BsParams {
    let a = &cfg.array;
    let n_rf = match a.architecture {
        Architecture::SubConnected => a.num_rf_chains,
        Architecture::FullDigital => cfg.carrier.num_tx_antennas,
    };
    BsParams {
        bandwidth_hz: cfg.carrier.bandwidth_hz,
        noise_psd_w_per_hz: noise_power(cfg.carrier.noise_psd_dbm_per_hz, 1.0, 1),
        cancellation_error: cfg.sic.cancellation_error,
        p_max_w: cfg.power.p_max_w,
        fronthaul_capacity_bps: cfg.cache.fronthaul_capacity_bps,
        circuit_power_w: circuit_power(
            &cfg.power,
            cfg.carrier.num_tx_antennas,
            n_rf,
            a.phase_bits,
            a.architecture,
        ),
        pa_inefficiency: cfg.power.pa_inefficiency,
    }
}

impl Scenario {
    /// Builds topology, channels, clusters, precoders and power problems.
    pub fn build(cfg: &ScenarioConfig, seed: u64) -> Result<Self, PipelineError> {
        let channels = build_channels(cfg, seed)?;
        let mut assignments = Vec::new();
        let mut precoders = Vec::new();
        let mut gains = Vec::new();
        for b in 0..channels.topology.num_bs() {
            let h = channels.bs(b);
            let assignment = cluster_bs(cfg, &channels, seed, b)?;
            let precoder = HybridPrecoder::design(
                &assignment.heads,
                cfg.array.architecture,
                cfg.array.num_rf_chains,
                cfg.array.phase_bits,
            )
            .map_err(|source| PipelineError::Precoding { bs: b, source })?;
            gains.push(effective_gains_and_order(h, &assignment, &precoder));
            assignments.push(assignment);
            precoders.push(precoder);
        }
        let mut scenario = Self {
            seed,
            channels,
            assignments,
            precoders,
            gains,
            problems: Vec::new(),
        };
        scenario.set_problem_params(cfg);
        Ok(scenario)
    }

    /// Rebuilds the power problems from the stored gains with the cache, SIC,
    /// budget and hardware parameters of `cfg`.
    pub fn set_problem_params(&mut self, cfg: &ScenarioConfig) {
        let params = bs_params(cfg);
        self.problems = self
            .gains
            .iter()
            .map(|g| {
                let cache = vec![cfg.cache.efficiency; g.membership.len()];
                BsProblem::new(g, &cache, params.clone())
            })
            .collect();
    }

    /// Final clustering MSE averaged over base stations.
    pub fn mse(&self) -> f64 {
        let sum: f64 = self
            .assignments
            .iter()
            .map(|a| *a.mse_trace.last().unwrap_or(&f64::NAN))
            .sum();
        sum / self.assignments.len() as f64
    }

    pub fn cluster_iters(&self) -> f64 {
        let sum: usize = self.assignments.iter().map(|a| a.iterations_used).sum();
        sum as f64 / self.assignments.len() as f64
    }

    /// Allocates power under the configured allocation and access schemes.
    pub fn allocate(&self, cfg: &ScenarioConfig) -> Result<(PowerSolution, Metrics), PipelineError> {
        let problems = &self.problems;
        let (solution, feasible) = match cfg.schemes.access {
            AccessScheme::Noma => {
                let solution = match cfg.schemes.allocation {
                    AllocationScheme::Admm => allocate_power_admm(problems, &cfg.solver),
                    AllocationScheme::Equal => equal_power(problems),
                    AllocationScheme::Random => random_power(problems, stage_seed(self.seed, POWER_STREAM, 0)),
                }
                .map_err(PipelineError::Power)?;
                let feasible = solution.audit(problems).map_err(PipelineError::Power);
                (solution, feasible)
            }
            AccessScheme::Oma => {
                let x = oma_equal_power(problems);
                let ee = oma_energy_efficiency(problems, &x).map_err(PipelineError::Power)?;
                let feasible = oma_audit(problems, &x).map_err(PipelineError::Power);
                let mut solution = PowerSolution::from_slot_powers(problems, x).map_err(PipelineError::Power)?;
                solution.rates = problems
                    .iter()
                    .zip(&solution.slot_powers)
                    .map(|(p, x)| p.to_user_order(&oma_rates(p, x)))
                    .collect();
                solution.ee = ee;
                solution.dinkelbach_trace = vec![ee];
                (solution, feasible)
            }
        };
        feasible?;
        let metrics = Metrics {
            ee_bits_per_joule: solution.ee,
            sum_rate_bps: solution.sum_rate(),
            mse: self.mse(),
            outer_iters: solution.outer_iterations,
            inner_iters_total: solution.inner_iterations(),
            feasible: true,
            cluster_iters: self.cluster_iters(),
        };
        Ok((solution, metrics))
    }
}

/// Runs the full pipeline for one seed. Fails on any constraint violation of
/// the returned powers.
pub fn run_pipeline(cfg: &ScenarioConfig, seed: u64) -> Result<PipelineOutput, PipelineError> {
    let scenario = Scenario::build(cfg, seed)?;
    let (solution, metrics) = scenario.allocate(cfg)?;
    Ok(PipelineOutput {
        scenario,
        solution,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.geometry.users_per_bs = 6;
        cfg.carrier.num_tx_antennas = 16;
        cfg
    }

    #[test]
    fn stage_seeds_differ() {
        assert_eq!(stage_seed(5, 1, 0), stage_seed(5, 1, 0));
        assert_ne!(stage_seed(5, 1, 0), stage_seed(5, 2, 0));
        assert_ne!(stage_seed(5, 2, 0), stage_seed(5, 2, 1));
        assert_ne!(stage_seed(5, 1, 0), stage_seed(6, 1, 0));
    }

    #[test]
    fn pipeline_is_deterministic() {
        let cfg = small();
        let a = run_pipeline(&cfg, 3).unwrap();
        let b = run_pipeline(&cfg, 3).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.solution.powers, b.solution.powers);
    }

    #[test]
    fn every_scheme_runs_feasibly() {
        let mut cfg = small();
        for allocation in [
            AllocationScheme::Admm,
            AllocationScheme::Equal,
            AllocationScheme::Random,
        ] {
            cfg.schemes.allocation = allocation;
            let out = run_pipeline(&cfg, 1).unwrap();
            assert!(out.metrics.feasible && out.metrics.ee_bits_per_joule > 0.0);
        }
        cfg.schemes.access = AccessScheme::Oma;
        assert!(run_pipeline(&cfg, 1).unwrap().metrics.ee_bits_per_joule > 0.0);
    }

    #[test]
    fn over_dense_geometry_is_a_topology_error() {
        let mut cfg = small();
        cfg.geometry.min_user_spacing_m = 4.0;
        assert!(matches!(run_pipeline(&cfg, 1), Err(PipelineError::Topology(_))));
    }
}
