//! Experiment families: parameter sweeps over seeded replicates, with raw and
//! summary CSV output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use super::config::{AccessScheme, AllocationScheme, ClusteringScheme, ConfigError, ScenarioConfig};
use super::pipeline::{build_channels, cluster_bs, PipelineError, Scenario};
use crate::power::PowerSolution;
use crate::precoding::Architecture;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment id `{0}`; expected one of: {list}", list = ExperimentId::names())]
    UnknownId(String),
    #[error("invalid sweep value {value} for {parameter}: {source}")]
    InvalidSweep {
        parameter: &'static str,
        value: f64,
        #[source]
        source: ConfigError,
    },
    #[error("sweep for {0} is empty")]
    EmptySweep(&'static str),
    #[error("replicate count must be at least 1")]
    NoReplicates,
    #[error("seed {seed}, {parameter} = {value}, scheme {scheme}: {source}")]
    Run {
        seed: u64,
        parameter: &'static str,
        value: f64,
        scheme: &'static str,
        #[source]
        source: PipelineError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    MseConvergence,
    EeVsPhi,
    AdmmConvergence,
    EeVsUsers,
    EeVsAntennasPrecoding,
    EeVsAntennasPower,
    EeVsCache,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        Self::MseConvergence,
        Self::EeVsPhi,
        Self::AdmmConvergence,
        Self::EeVsUsers,
        Self::EeVsAntennasPrecoding,
        Self::EeVsAntennasPower,
        Self::EeVsCache,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MseConvergence => "mse-convergence",
            Self::EeVsPhi => "ee-vs-phi",
            Self::AdmmConvergence => "admm-convergence",
            Self::EeVsUsers => "ee-vs-users",
            Self::EeVsAntennasPrecoding => "ee-vs-antennas-precoding",
            Self::EeVsAntennasPower => "ee-vs-antennas-power",
            Self::EeVsCache => "ee-vs-cache",
        }
    }

    fn names() -> String {
        Self::ALL.iter().map(|id| id.as_str()).collect::<Vec<_>>().join(", ")
    }

    /// Name of the swept quantity, as written to the `sweep_parameter` column.
    pub fn sweep_parameter(self) -> &'static str {
        match self {
            Self::MseConvergence => "iteration",
            Self::EeVsPhi => "sic.cancellation_error",
            Self::AdmmConvergence => "solver.mu",
            Self::EeVsUsers => "geometry.users_per_bs",
            Self::EeVsAntennasPrecoding | Self::EeVsAntennasPower => "carrier.num_tx_antennas",
            Self::EeVsCache => "cache.efficiency",
        }
    }

    pub fn default_sweep(self) -> Vec<f64> {
        match self {
            Self::MseConvergence => vec![],
            Self::EeVsPhi => vec![0.0, 0.0025, 0.005, 0.0075, 0.01],
            Self::AdmmConvergence => vec![0.01, 0.05, 0.1],
            Self::EeVsUsers => vec![4.0, 8.0, 12.0, 16.0, 20.0],
            Self::EeVsAntennasPrecoding | Self::EeVsAntennasPower => vec![32.0, 64.0, 128.0],
            Self::EeVsCache => vec![0.0, 0.3, 0.6, 0.9],
        }
    }

    pub fn schemes(self) -> &'static [&'static str] {
        match self {
            Self::MseConvergence => &["enhanced", "kmeans", "chs"],
            Self::EeVsPhi => &["enhanced", "kmeans", "random"],
            Self::AdmmConvergence => &["admm"],
            Self::EeVsUsers => &["noma", "oma"],
            Self::EeVsAntennasPrecoding => &["subconnected-q2", "subconnected-q4", "subconnected-q6", "full-digital"],
            Self::EeVsAntennasPower => &["admm", "equal", "random"],
            Self::EeVsCache => &["fixed-power", "optimized"],
        }
    }

    /// Whether rows carry an `iteration` column.
    pub fn has_iterations(self) -> bool {
        matches!(self, Self::MseConvergence | Self::AdmmConvergence)
    }

    /// Metric columns written for this experiment.
    pub fn metrics(self) -> &'static [Metric] {
        use Metric::*;
        match self {
            Self::MseConvergence => &[Mse, ClusterIters],
            Self::AdmmConvergence => &[Ee, SumRate, OuterIters, InnerIters, Feasible],
            _ => &[Ee, SumRate, Mse, OuterIters, InnerIters, Feasible, ClusterIters],
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ExperimentError::UnknownId(s.to_string()))
    }
}

/// A metric column. Header names carry the unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ee,
    SumRate,
    Mse,
    OuterIters,
    InnerIters,
    Feasible,
    ClusterIters,
}

impl Metric {
    pub fn column(self) -> &'static str {
        match self {
            Self::Ee => "ee_bits_per_joule",
            Self::SumRate => "sum_rate_bps",
            Self::Mse => "mse",
            Self::OuterIters => "outer_iters",
            Self::InnerIters => "inner_iters_total",
            Self::Feasible => "feasible",
            Self::ClusterIters => "cluster_iters",
        }
    }
}

/// One replicate at one sweep point (and iteration, where applicable).
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub seed: u64,
    pub scheme: &'static str,
    pub sweep_value: f64,
    pub iteration: Option<usize>,
    /// Aligned with [`ExperimentId::metrics`].
    pub values: Vec<f64>,
}

/// Mean and sample standard deviation over replicates at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: &'static str,
    pub sweep_value: f64,
    pub iteration: Option<usize>,
    pub replicates: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub id: ExperimentId,
    pub sweep_values: Vec<f64>,
    pub rows: Vec<Row>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResult {
    pub fn metric_index(&self, metric: Metric) -> Option<usize> {
        self.id.metrics().iter().position(|&m| m == metric)
    }

    /// Summary mean of `metric` for `scheme` at every sweep value, in sweep
    /// order. Iteration experiments report the last iteration.
    pub fn mean_curve(&self, scheme: &str, metric: Metric) -> Vec<f64> {
        let k = self
            .metric_index(metric)
            .expect("metric not recorded by this experiment");
        self.sweep_values
            .iter()
            .map(|&v| {
                self.summary
                    .iter()
                    .rfind(|s| s.scheme == scheme && s.sweep_value == v)
                    .map_or(f64::NAN, |s| s.mean[k])
            })
            .collect()
    }
}

fn invalid_sweep(id: ExperimentId, value: f64, source: ConfigError) -> ExperimentError {
    ExperimentError::InvalidSweep {
        parameter: id.sweep_parameter(),
        value,
        source,
    }
}

fn integer(id: ExperimentId, value: f64) -> Result<usize, ExperimentError> {
    if value >= 1.0 && value.fract() == 0.0 && value <= 1e6 {
        Ok(value as usize)
    } else {
        Err(invalid_sweep(
            id,
            value,
            ConfigError::Invalid {
                key: id.sweep_parameter(),
                reason: "must be a positive integer".into(),
            },
        ))
    }
}

/// Configuration at one sweep point for one scheme.
fn point_config(
    base: &ScenarioConfig,
    id: ExperimentId,
    value: f64,
    scheme: &'static str,
) -> Result<ScenarioConfig, ExperimentError> {
    let mut cfg = base.clone();
    match id {
        ExperimentId::MseConvergence => {}
        ExperimentId::EeVsPhi => cfg.sic.cancellation_error = value,
        ExperimentId::AdmmConvergence => cfg.solver.mu = value,
        ExperimentId::EeVsUsers => cfg.geometry.users_per_bs = integer(id, value)?,
        ExperimentId::EeVsAntennasPrecoding | ExperimentId::EeVsAntennasPower => {
            cfg.carrier.num_tx_antennas = integer(id, value)?
        }
        ExperimentId::EeVsCache => cfg.cache.efficiency = value,
    }
    match scheme {
        "enhanced" => cfg.clustering.scheme = ClusteringScheme::Enhanced,
        "kmeans" => cfg.clustering.scheme = ClusteringScheme::Kmeans,
        "chs" => cfg.clustering.scheme = ClusteringScheme::Chs,
        "random" if id == ExperimentId::EeVsPhi => cfg.clustering.scheme = ClusteringScheme::Random,
        "admm" => cfg.schemes.allocation = AllocationScheme::Admm,
        "equal" => cfg.schemes.allocation = AllocationScheme::Equal,
        "random" => cfg.schemes.allocation = AllocationScheme::Random,
        "noma" => cfg.schemes.access = AccessScheme::Noma,
        "oma" => cfg.schemes.access = AccessScheme::Oma,
        "full-digital" => cfg.array.architecture = Architecture::FullDigital,
        "subconnected-q2" | "subconnected-q4" | "subconnected-q6" => {
            cfg.array.architecture = Architecture::SubConnected;
            cfg.array.phase_bits = scheme[scheme.len() - 1..].parse().expect("scheme suffix is a digit");
        }
        _ => {}
    }
    cfg.validate().map_err(|e| invalid_sweep(id, value, e))?;
    Ok(cfg)
}

fn solution_values(id: ExperimentId, scenario: &Scenario, solution: &PowerSolution) -> Vec<f64> {
    id.metrics()
        .iter()
        .map(|m| match m {
            Metric::Ee => solution.ee,
            Metric::SumRate => solution.sum_rate(),
            Metric::Mse => scenario.mse(),
            Metric::OuterIters => solution.outer_iterations as f64,
            Metric::InnerIters => solution.inner_iterations() as f64,
            Metric::Feasible => 1.0,
            Metric::ClusterIters => scenario.cluster_iters(),
        })
        .collect()
}

/// Pads every trace to the same length with its last value.
fn pad(traces: &mut [Vec<f64>]) {
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    for t in traces {
        let last = *t.last().expect("traces are never empty");
        t.resize(len, last);
    }
}

/// Rows of one seed, in scheme-major, sweep-minor order.
fn run_seed(base: &ScenarioConfig, id: ExperimentId, sweep: &[f64], seed: u64) -> Result<Vec<Row>, ExperimentError> {
    let wrap = |value: f64, scheme: &'static str| {
        move |source: PipelineError| ExperimentError::Run {
            seed,
            parameter: id.sweep_parameter(),
            value,
            scheme,
            source,
        }
    };
    let mut rows = Vec::new();
    match id {
        ExperimentId::MseConvergence => {
            let channels = build_channels(base, seed).map_err(wrap(f64::NAN, "all"))?;
            let mut traces: Vec<Vec<f64>> = Vec::new();
            let mut iters = Vec::new();
            for &scheme in id.schemes() {
                let cfg = point_config(base, id, 0.0, scheme)?;
                let mut per_bs = Vec::new();
                let mut used = 0.0;
                for b in 0..channels.topology.num_bs() {
                    let a = cluster_bs(&cfg, &channels, seed, b).map_err(wrap(f64::NAN, scheme))?;
                    used += a.iterations_used as f64;
                    per_bs.push(a.mse_trace);
                }
                pad(&mut per_bs);
                let bs = per_bs.len() as f64;
                traces.push(
                    (0..per_bs[0].len())
                        .map(|i| per_bs.iter().map(|t| t[i]).sum::<f64>() / bs)
                        .collect(),
                );
                iters.push(used / bs);
            }
            // A fixed length keeps every seed's rows aligned.
            let len = base.clustering.max_iter;
            for t in &mut traces {
                let last = *t.last().expect("clustering ran at least once");
                t.resize(len, last);
            }
            for ((&scheme, trace), cluster_iters) in id.schemes().iter().zip(&traces).zip(&iters) {
                for (i, &mse) in trace.iter().enumerate() {
                    rows.push(Row {
                        seed,
                        scheme,
                        sweep_value: (i + 1) as f64,
                        iteration: Some(i + 1),
                        values: vec![mse, *cluster_iters],
                    });
                }
            }
        }
        ExperimentId::AdmmConvergence => {
            let scenario = Scenario::build(base, seed).map_err(wrap(f64::NAN, "admm"))?;
            for &value in sweep {
                let cfg = point_config(base, id, value, "admm")?;
                let (solution, _) = scenario.allocate(&cfg).map_err(wrap(value, "admm"))?;
                let rounds = solution.admm_traces.iter().map(|t| t.outer).max().unwrap_or(0);
                let mut inner = vec![0.0; rounds];
                for t in &solution.admm_traces {
                    inner[t.outer - 1] += t.steps.len() as f64;
                }
                let len = cfg.solver.max_outer;
                let last = *solution.dinkelbach_trace.last().expect("at least one outer iteration");
                let mut cumulative = 0.0;
                for i in 0..len {
                    cumulative += inner.get(i).copied().unwrap_or(0.0);
                    rows.push(Row {
                        seed,
                        scheme: "admm",
                        sweep_value: value,
                        iteration: Some(i + 1),
                        values: vec![
                            solution.dinkelbach_trace.get(i).copied().unwrap_or(last),
                            solution.sum_rate(),
                            (i + 1).min(solution.outer_iterations) as f64,
                            cumulative,
                            1.0,
                        ],
                    });
                }
            }
        }
        ExperimentId::EeVsCache => {
            let at_zero = point_config(base, id, 0.0, "fixed-power")?;
            let mut scenario = Scenario::build(&at_zero, seed).map_err(wrap(0.0, "fixed-power"))?;
            let (fixed, _) = scenario.allocate(&at_zero).map_err(wrap(0.0, "fixed-power"))?;
            let mut optimized = Vec::new();
            for &value in sweep {
                let cfg = point_config(base, id, value, "fixed-power")?;
                scenario.set_problem_params(&cfg);
                let mut solution = PowerSolution::from_slot_powers(&scenario.problems, fixed.slot_powers.clone())
                    .map_err(|e| wrap(value, "fixed-power")(PipelineError::Power(e)))?;
                solution
                    .audit(&scenario.problems)
                    .map_err(|e| wrap(value, "fixed-power")(PipelineError::Power(e)))?;
                solution.outer_iterations = fixed.outer_iterations;
                solution.admm_traces.clone_from(&fixed.admm_traces);
                rows.push(Row {
                    seed,
                    scheme: "fixed-power",
                    sweep_value: value,
                    iteration: None,
                    values: solution_values(id, &scenario, &solution),
                });
                let cfg = point_config(base, id, value, "optimized")?;
                let (solution, _) = scenario.allocate(&cfg).map_err(wrap(value, "optimized"))?;
                optimized.push(Row {
                    seed,
                    scheme: "optimized",
                    sweep_value: value,
                    iteration: None,
                    values: solution_values(id, &scenario, &solution),
                });
            }
            rows.extend(optimized);
        }
        _ => {
            for &scheme in id.schemes() {
                for &value in sweep {
                    let cfg = point_config(base, id, value, scheme)?;
                    let scenario = Scenario::build(&cfg, seed).map_err(wrap(value, scheme))?;
                    let (solution, _) = scenario.allocate(&cfg).map_err(wrap(value, scheme))?;
                    rows.push(Row {
                        seed,
                        scheme,
                        sweep_value: value,
                        iteration: None,
                        values: solution_values(id, &scenario, &solution),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Mean and sample standard deviation, both computed in row order.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by (scheme, sweep value, iteration) in first-appearance order.
pub fn summarize(rows: &[Row]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&'static str, f64, Option<usize>)> = Vec::new();
    for r in rows {
        let key = (r.scheme, r.sweep_value, r.iteration);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(scheme, sweep_value, iteration)| {
            let group: Vec<&Row> = rows
                .iter()
                .filter(|r| r.scheme == scheme && r.sweep_value == sweep_value && r.iteration == iteration)
                .collect();
            let width = group[0].values.len();
            let (mean, std) = (0..width)
                .map(|k| mean_std(&group.iter().map(|r| r.values[k]).collect::<Vec<_>>()))
                .unzip();
            SummaryRow {
                scheme,
                sweep_value,
                iteration,
                replicates: group.len(),
                mean,
                std,
            }
        })
        .collect()
}

/// Runs `replicates` seeds starting at the configured master seed. Seeds run
/// in parallel; rows are ordered by seed.
pub fn run_experiment(
    id: ExperimentId,
    cfg: &ScenarioConfig,
    replicates: usize,
    sweep: Option<&[f64]>,
) -> Result<ExperimentResult, ExperimentError> {
    if replicates == 0 {
        return Err(ExperimentError::NoReplicates);
    }
    let sweep_values = match sweep {
        Some(v) => v.to_vec(),
        None => id.default_sweep(),
    };
    if id != ExperimentId::MseConvergence && sweep_values.is_empty() {
        return Err(ExperimentError::EmptySweep(id.sweep_parameter()));
    }
    for &value in &sweep_values {
        for &scheme in id.schemes() {
            point_config(cfg, id, value, scheme)?;
        }
    }
    let seeds: Vec<u64> = (0..replicates as u64)
        .map(|r| cfg.seeds.master.wrapping_add(r))
        .collect();
    let per_seed = seeds
        .par_iter()
        .map(|&seed| {
            let rows = run_seed(cfg, id, &sweep_values, seed);
            log::debug!("{id}: seed {seed} finished");
            rows
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for seed_rows in per_seed {
        rows.extend(seed_rows);
    }
    // Keep scheme-major order across seeds so summaries follow the sweep.
    rows.sort_by_key(|r| {
        (
            id.schemes().iter().position(|&s| s == r.scheme),
            r.seed.wrapping_sub(cfg.seeds.master),
        )
    });
    let summary = summarize(&rows);
    let sweep_values = if id == ExperimentId::MseConvergence {
        (1..=cfg.clustering.max_iter).map(|i| i as f64).collect()
    } else {
        sweep_values
    };
    Ok(ExperimentResult {
        id,
        sweep_values,
        rows,
        summary,
    })
}

/// `<dir>/<stem>.summary.csv` next to the raw output file.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "experiment".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn io_error(path: &Path) -> impl Fn(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Header of the raw CSV.
pub fn raw_header(id: ExperimentId) -> Vec<String> {
    let mut h: Vec<String> = ["seed", "scheme", "sweep_parameter", "sweep_value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if id.has_iterations() {
        h.push("iteration".into());
    }
    h.extend(id.metrics().iter().map(|m| m.column().to_string()));
    h
}

/// Writes raw rows to `out` and the summary to [`summary_path`].
pub fn write_csv(result: &ExperimentResult, out: &Path) -> Result<PathBuf, ExperimentError> {
    let id = result.id;
    let mut w = csv::Writer::from_path(out).map_err(io_error(out))?;
    w.write_record(raw_header(id)).map_err(io_error(out))?;
    for r in &result.rows {
        let mut rec = vec![
            r.seed.to_string(),
            r.scheme.to_string(),
            id.sweep_parameter().to_string(),
            r.sweep_value.to_string(),
        ];
        if let Some(i) = r.iteration {
            rec.push(i.to_string());
        }
        rec.extend(r.values.iter().map(f64::to_string));
        w.write_record(&rec).map_err(io_error(out))?;
    }
    w.flush().map_err(|e| io_error(out)(e.into()))?;

    let path = summary_path(out);
    let mut w = csv::Writer::from_path(&path).map_err(io_error(&path))?;
    let mut header: Vec<String> = ["scheme", "sweep_parameter", "sweep_value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if id.has_iterations() {
        header.push("iteration".into());
    }
    header.push("replicates".into());
    for m in id.metrics() {
        header.push(format!("{}_mean", m.column()));
        header.push(format!("{}_std", m.column()));
    }
    w.write_record(&header).map_err(io_error(&path))?;
    for s in &result.summary {
        let mut rec = vec![
            s.scheme.to_string(),
            id.sweep_parameter().to_string(),
            s.sweep_value.to_string(),
        ];
        if let Some(i) = s.iteration {
            rec.push(i.to_string());
        }
        rec.push(s.replicates.to_string());
        for (m, sd) in s.mean.iter().zip(&s.std) {
            rec.push(m.to_string());
            rec.push(sd.to_string());
        }
        w.write_record(&rec).map_err(io_error(&path))?;
    }
    w.flush().map_err(|e| io_error(&path)(e.into()))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.geometry.users_per_bs = 6;
        cfg.carrier.num_tx_antennas = 16;
        cfg.clustering.max_iter = 10;
        cfg.solver.max_outer = 10;
        cfg
    }

    #[test]
    fn ids_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        assert!(matches!(
            "fig-3".parse::<ExperimentId>(),
            Err(ExperimentError::UnknownId(_))
        ));
    }

    #[test]
    fn sample_std_uses_n_minus_one() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn invalid_sweeps_are_rejected() {
        let cfg = small();
        let err = run_experiment(ExperimentId::EeVsUsers, &cfg, 1, Some(&[2.0])).unwrap_err();
        assert!(matches!(err, ExperimentError::InvalidSweep { .. }), "{err}");
        let err = run_experiment(ExperimentId::EeVsPhi, &cfg, 1, Some(&[1.5])).unwrap_err();
        assert!(matches!(err, ExperimentError::InvalidSweep { .. }));
        let err = run_experiment(ExperimentId::EeVsAntennasPower, &cfg, 1, Some(&[30.0])).unwrap_err();
        assert!(matches!(err, ExperimentError::InvalidSweep { .. }));
        assert!(matches!(
            run_experiment(ExperimentId::EeVsPhi, &cfg, 0, None),
            Err(ExperimentError::NoReplicates)
        ));
    }

    #[test]
    fn rows_are_seed_ordered_and_summaries_match() {
        let cfg = small();
        let res = run_experiment(ExperimentId::EeVsPhi, &cfg, 3, Some(&[0.0, 0.01])).unwrap();
        assert_eq!(res.rows.len(), 3 * 2 * 3);
        assert_eq!(res.summary.len(), 3 * 2);
        for s in &res.summary {
            let ee: Vec<f64> = res
                .rows
                .iter()
                .filter(|r| r.scheme == s.scheme && r.sweep_value == s.sweep_value)
                .map(|r| r.values[0])
                .collect();
            assert_eq!(mean_std(&ee), (s.mean[0], s.std[0]));
        }
        let seeds: Vec<u64> = res
            .rows
            .iter()
            .filter(|r| r.scheme == "enhanced" && r.sweep_value == 0.0)
            .map(|r| r.seed)
            .collect();
        assert_eq!(seeds, vec![1, 2, 3]);
    }

    #[test]
    fn iteration_experiments_pad_traces() {
        let cfg = small();
        let res = run_experiment(ExperimentId::MseConvergence, &cfg, 2, None).unwrap();
        assert_eq!(res.rows.len(), 2 * 3 * cfg.clustering.max_iter);
        let res = run_experiment(ExperimentId::AdmmConvergence, &cfg, 2, Some(&[0.05])).unwrap();
        assert_eq!(res.rows.len(), 2 * cfg.solver.max_outer);
        let ee = res.mean_curve("admm", Metric::Ee);
        assert_eq!(ee.len(), 1);
    }
}
