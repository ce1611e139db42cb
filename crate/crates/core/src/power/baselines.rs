//! Reference power allocations and the FDMA comparison system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{user_rate, weighted_sum, BsProblem, PowerError, PowerSolution};

/// `P_max / U_b` to every user, scaled down if the fronthaul overflows.
pub fn equal_power(problems: &[BsProblem]) -> Result<PowerSolution, PowerError> {
    let x = problems
        .iter()
        .map(|p| {
            let k = p.num_users();
            p.scale_to_fronthaul(&vec![p.params.p_max_w / k as f64; k])
        })
        .collect();
    PowerSolution::from_slot_powers(problems, x)
}

/// Uniform draws normalized to `P_max`, scaled down if the fronthaul overflows.
pub fn random_power(problems: &[BsProblem], seed: u64) -> Result<PowerSolution, PowerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = problems
        .iter()
        .map(|p| {
            let draws: Vec<f64> = (0..p.num_users()).map(|_| rng.gen_range(f64::EPSILON..1.0)).collect();
            let sum: f64 = draws.iter().sum();
            let x: Vec<f64> = draws.iter().map(|d| d / sum * p.params.p_max_w).collect();
            p.scale_to_fronthaul(&x)
        })
        .collect();
    PowerSolution::from_slot_powers(problems, x)
}

/// FDMA rates, slot order: every user holds a `W / U_b` sub-band alone, so
/// only the other clusters' beams interfere.
pub fn oma_rates(problem: &BsProblem, x: &[f64]) -> Vec<f64> {
    let k_users = problem.num_users();
    let band = problem.params.bandwidth_hz / k_users as f64;
    let sigma2 = problem.params.noise_psd_w_per_hz * band;
    let cp = problem.cluster_powers(x);
    (0..k_users)
        .map(|k| {
            let n = problem.slot_cluster[k];
            let mci: f64 = (0..problem.num_clusters())
                .filter(|&m| m != n)
                .map(|m| cp[m] * problem.gain[k][m])
                .sum();
            let sinr = x[k] * problem.gain[k][n] / (mci + sigma2);
            user_rate(sinr, band, 1)
        })
        .collect()
}

fn oma_fronthaul(problem: &BsProblem, x: &[f64]) -> f64 {
    super::fronthaul_rate(&oma_rates(problem, x), &problem.cache_efficiency)
}

/// Equal FDMA powers, scaled down if the FDMA fronthaul load overflows.
pub fn oma_equal_power(problems: &[BsProblem]) -> Vec<Vec<f64>> {
    problems
        .iter()
        .map(|p| {
            let k = p.num_users();
            p.scale_to_fit(&vec![p.params.p_max_w / k as f64; k], |x| oma_fronthaul(p, x))
        })
        .collect()
}

/// System energy efficiency of the FDMA system at the given slot powers.
pub fn oma_energy_efficiency(problems: &[BsProblem], slot_powers: &[Vec<f64>]) -> Result<f64, PowerError> {
    let mut ee = 0.0;
    for (p, x) in problems.iter().zip(slot_powers) {
        let total = p.total_power(x);
        if total.is_nan() || total <= 0.0 {
            return Err(PowerError::NonPositivePower(total));
        }
        ee += weighted_sum(&oma_rates(p, x), &p.cache_efficiency) / total;
    }
    if !ee.is_finite() {
        return Err(PowerError::NonFinite);
    }
    Ok(ee)
}

/// Audits FDMA powers against the budget and the FDMA fronthaul load.
pub fn oma_audit(problems: &[BsProblem], slot_powers: &[Vec<f64>]) -> Result<(), PowerError> {
    for (b, (p, x)) in problems.iter().zip(slot_powers).enumerate() {
        let mut budget_only = p.clone();
        budget_only.params.fronthaul_capacity_bps = f64::INFINITY;
        budget_only.audit(b, x)?;
        let fh = oma_fronthaul(p, x);
        if fh > p.params.fronthaul_capacity_bps + super::FEASIBILITY_SLACK {
            return Err(PowerError::Infeasible {
                bs: b,
                constraint: "fronthaul capacity",
                value: fh,
                limit: p.params.fronthaul_capacity_bps,
            });
        }
    }
    Ok(())
}
