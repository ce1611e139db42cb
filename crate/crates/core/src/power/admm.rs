//! Dinkelbach outer loop with an ADMM inner solver.
//!
//! For a fixed parameter `eta` each base station solves
//! `max_x sum (1+F) R(x) - eta * xi * sum x` subject to `x >= 0`, the power
//! budget and the fronthaul capacity. ADMM splits the smooth part (`X`) from the
//! constraint set (`Z`):
//!
//! ```text
//! X <- argmin_X  eta xi sum X - sum (1+F) R(X) + lambda^T (X - Z) + mu/2 |X - Z|^2   (X >= 0)
//! Z <- proj_Gamma(X + lambda / mu)
//! lambda <- lambda + mu (X - Z)
//! ```
//!
//! Rates and `eta` are expressed per Hz of bandwidth inside the solver so that
//! the penalty `mu` is on the scale of the objective.

use serde::{Deserialize, Serialize};

use super::{BsProblem, PowerError, PowerSolution};

/// Solver tolerances and iteration caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmSettings {
    /// Augmented Lagrangian penalty.
    pub mu: f64,
    /// Relative Dinkelbach stop threshold on the change of `eta`.
    pub dinkelbach_tol: f64,
    /// Primal residual tolerance `|X - Z|_inf`, W.
    pub admm_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Projected-gradient stationarity tolerance of the X-update.
    pub pgd_tol: f64,
    pub pgd_max_steps: usize,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            mu: 0.05,
            dinkelbach_tol: 1e-4,
            admm_tol: 1e-6,
            max_outer: 50,
            max_inner: 200,
            pgd_tol: 1e-6,
            pgd_max_steps: 500,
        }
    }
}

/// One inner ADMM run of one base station.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmTrace {
    pub outer: usize,
    pub bs: usize,
    /// `(subtractive objective at Z in bits/s, primal residual)` per iteration.
    pub steps: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Result of a projected-gradient X-update.
#[derive(Debug, Clone, PartialEq)]
pub struct XUpdate {
    pub x: Vec<f64>,
    /// Smooth objective before the first and after every accepted step.
    pub objective_trace: Vec<f64>,
    pub stationary: bool,
}

struct Augmented<'a> {
    problem: &'a BsProblem,
    /// `eta * xi / W`, per Hz.
    power_price: f64,
    z: &'a [f64],
    lambda: &'a [f64],
    mu: f64,
}

impl Augmented<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let w = self.problem.params.bandwidth_hz;
        let mut v = self.power_price * x.iter().sum::<f64>() - self.problem.weighted_rate(x) / w;
        for k in 0..x.len() {
            let d = x[k] - self.z[k];
            v += self.lambda[k] * d + 0.5 * self.mu * d * d;
        }
        v
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let w = self.problem.params.bandwidth_hz;
        let rate_grad = self.problem.weighted_rate_gradient(x);
        (0..x.len())
            .map(|k| self.power_price - rate_grad[k] / w + self.lambda[k] + self.mu * (x[k] - self.z[k]))
            .collect()
    }
}

fn project_nonnegative(x: &[f64], g: &[f64], step: f64) -> Vec<f64> {
    x.iter().zip(g).map(|(xi, gi)| (xi - step * gi).max(0.0)).collect()
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// X-update: projected gradient descent with backtracking on the smooth
/// augmented Lagrangian over `X >= 0`, started from `start`.
///
/// `eta` is in bits/J. Stops when the projected-gradient map moves less than
/// the stationarity tolerance or after the step cap.
pub fn admm_x_update(
    problem: &BsProblem,
    start: &[f64],
    z: &[f64],
    lambda: &[f64],
    eta: f64,
    mu: f64,
    settings: &AdmmSettings,
) -> Result<XUpdate, PowerError> {
    if mu.is_nan() || mu <= 0.0 {
        return Err(PowerError::InvalidParameter { name: "mu", value: mu });
    }
    let aug = Augmented {
        problem,
        power_price: eta * problem.params.pa_inefficiency / problem.params.bandwidth_hz,
        z,
        lambda,
        mu,
    };
    let mut x: Vec<f64> = start.iter().map(|v| v.max(0.0)).collect();
    let mut fx = aug.value(&x);
    if !fx.is_finite() {
        return Err(PowerError::NonFinite);
    }
    let mut trace = vec![fx];
    let mut step = 1.0;
    let mut stationary = false;
    for _ in 0..settings.pgd_max_steps {
        let g = aug.gradient(&x);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(PowerError::NonFinite);
        }
        if inf_norm_diff(&x, &project_nonnegative(&x, &g, 1.0)) < settings.pgd_tol {
            stationary = true;
            break;
        }
        let mut accepted = None;
        while step > 1e-18 {
            let candidate = project_nonnegative(&x, &g, step);
            let fc = aug.value(&candidate);
            let mut model = fx;
            let mut dist2 = 0.0;
            for k in 0..x.len() {
                let d = candidate[k] - x[k];
                model += g[k] * d;
                dist2 += d * d;
            }
            model += dist2 / (2.0 * step);
            if fc.is_finite() && fc <= model {
                accepted = Some((candidate, fc));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, fc)) = accepted else {
            stationary = true;
            break;
        };
        x = candidate;
        fx = fc;
        trace.push(fx);
        step *= 2.0;
    }
    Ok(XUpdate {
        x,
        objective_trace: trace,
        stationary,
    })
}

/// Euclidean projection onto `{z >= 0, sum z <= budget}`.
fn project_budget(v: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    // Projection onto the simplex of radius `budget`.
    let mut sorted = clipped.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - budget) / (i + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    let mut z: Vec<f64> = clipped.iter().map(|x| (x - theta).max(0.0)).collect();
    // Absorb rounding so the budget holds exactly.
    let sum: f64 = z.iter().sum();
    if sum > budget {
        let s = budget / sum;
        z.iter_mut().for_each(|x| *x *= s);
    }
    z
}

/// Z-update: projects `X + lambda/mu` onto the feasible set. The budget is
/// handled by an exact simplex projection, the fronthaul capacity by uniform
/// down-scaling.
pub fn admm_z_update(problem: &BsProblem, x: &[f64], lambda: &[f64], mu: f64) -> Result<Vec<f64>, PowerError> {
    if mu.is_nan() || mu <= 0.0 {
        return Err(PowerError::InvalidParameter { name: "mu", value: mu });
    }
    let v: Vec<f64> = x.iter().zip(lambda).map(|(x, l)| x + l / mu).collect();
    if v.iter().any(|c| !c.is_finite()) {
        return Err(PowerError::NonFinite);
    }
    let z = project_budget(&v, problem.params.p_max_w);
    Ok(problem.scale_to_fronthaul(&z))
}

/// Dual ascent `lambda + mu (X - Z)`.
pub fn admm_lambda_update(lambda: &[f64], x: &[f64], z: &[f64], mu: f64) -> Vec<f64> {
    assert!(mu > 0.0, "mu must be positive");
    lambda
        .iter()
        .zip(x.iter().zip(z))
        .map(|(l, (x, z))| l + mu * (x - z))
        .collect()
}

/// `sum (1+F) R - eta * xi * sum p`, bits/s.
fn subtractive(problem: &BsProblem, x: &[f64], eta: f64) -> f64 {
    problem.weighted_rate(x) - eta * problem.params.pa_inefficiency * x.iter().sum::<f64>()
}

/// Runs ADMM for one Dinkelbach parameter from a feasible warm start and
/// returns the best feasible iterate, never worse than the warm start.
fn solve_subproblem(
    problem: &BsProblem,
    eta: f64,
    warm: &[f64],
    settings: &AdmmSettings,
    outer: usize,
    bs: usize,
) -> Result<(Vec<f64>, AdmmTrace), PowerError> {
    let mu = settings.mu;
    let k = warm.len();
    let mut x = warm.to_vec();
    let mut z = warm.to_vec();
    let mut lambda = vec![0.0; k];
    let mut best = warm.to_vec();
    let mut best_value = subtractive(problem, warm, eta);
    let mut steps = Vec::new();
    let mut converged = false;
    for _ in 0..settings.max_inner {
        x = admm_x_update(problem, &x, &z, &lambda, eta, mu, settings)?.x;
        z = admm_z_update(problem, &x, &lambda, mu)?;
        lambda = admm_lambda_update(&lambda, &x, &z, mu);
        let residual = inf_norm_diff(&x, &z);
        let value = subtractive(problem, &z, eta);
        if !value.is_finite() {
            return Err(PowerError::NonFinite);
        }
        if value > best_value {
            best_value = value;
            best.clone_from(&z);
        }
        steps.push((value, residual));
        if residual < settings.admm_tol {
            converged = true;
            break;
        }
    }
    Ok((
        best,
        AdmmTrace {
            outer,
            bs,
            steps,
            converged,
        },
    ))
}

/// Energy-efficient power allocation.
///
/// Starts from equal powers and `eta = 0`. Each outer iteration solves every
/// base station's subtractive problem by ADMM and sets that station's `eta` to
/// its achieved energy efficiency; the system value is the sum over stations.
/// Stops once every station's relative change of `eta` is at most the
/// Dinkelbach tolerance.
pub fn allocate_power_admm(problems: &[BsProblem], settings: &AdmmSettings) -> Result<PowerSolution, PowerError> {
    if settings.mu.is_nan() || settings.mu <= 0.0 {
        return Err(PowerError::InvalidParameter {
            name: "mu",
            value: settings.mu,
        });
    }
    let mut x: Vec<Vec<f64>> = problems
        .iter()
        .map(|p| {
            let k = p.num_users();
            p.scale_to_fronthaul(&vec![p.params.p_max_w / k as f64; k])
        })
        .collect();
    let mut eta = vec![0.0; problems.len()];
    let mut eta_traces: Vec<Vec<f64>> = vec![vec![0.0]; problems.len()];
    let mut done = vec![false; problems.len()];
    let mut traces = Vec::new();
    let mut system_trace = Vec::new();
    let mut outer = 0;
    let mut inner_converged = true;
    while outer < settings.max_outer && !done.iter().all(|&d| d) {
        outer += 1;
        for (b, problem) in problems.iter().enumerate() {
            if done[b] {
                continue;
            }
            let (candidate, trace) = solve_subproblem(problem, eta[b], &x[b], settings, outer, b)?;
            inner_converged &= trace.converged;
            traces.push(trace);
            let next = problem.energy_efficiency(&candidate);
            if !next.is_finite() {
                return Err(PowerError::NonFinite);
            }
            done[b] = next - eta[b] <= settings.dinkelbach_tol * next.abs();
            x[b] = candidate;
            eta[b] = next;
            eta_traces[b].push(next);
        }
        system_trace.push(eta.iter().sum());
    }
    let mut solution = PowerSolution::from_slot_powers(problems, x)?;
    solution.dinkelbach_trace = system_trace;
    solution.bs_eta_traces = eta_traces;
    solution.admm_traces = traces;
    solution.outer_iterations = outer;
    solution.converged = inner_converged && done.iter().all(|&d| d);
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;

    fn single_user() -> BsProblem {
        problem(vec![vec![1.0]], &[1], params(1, 0.1), 0.3)
    }

    #[test]
    fn proximal_pull_dominates_for_large_mu() {
        let p = single_user();
        let z = [1.7];
        let u = admm_x_update(&p, &[0.2], &z, &[0.0], 0.0, 1e6, &AdmmSettings::default()).unwrap();
        assert!((u.x[0] - 1.7).abs() < 1e-3, "{:?}", u.x);
    }

    #[test]
    fn x_update_matches_grid_search() {
        let p = single_user();
        let settings = AdmmSettings::default();
        let (z, lambda, eta, mu) = ([0.8], [0.05], 0.3e9, 0.05);
        let u = admm_x_update(&p, &[0.1], &z, &lambda, eta, mu, &settings).unwrap();
        let aug = Augmented {
            problem: &p,
            power_price: eta * p.params.pa_inefficiency / p.params.bandwidth_hz,
            z: &z,
            lambda: &lambda,
            mu,
        };
        let best = (0..=20_000)
            .map(|i| i as f64 * 1e-3)
            .min_by(|a, b| aug.value(&[*a]).total_cmp(&aug.value(&[*b])))
            .unwrap();
        assert!((u.x[0] - best).abs() < 2e-3, "{} vs {best}", u.x[0]);
    }

    #[test]
    fn x_update_objective_never_increases() {
        let p = problem(
            vec![vec![1.0, 0.1], vec![0.5, 0.05], vec![0.02, 0.8]],
            &[2, 1],
            params(2, 0.05),
            0.3,
        );
        let u = admm_x_update(
            &p,
            &[3.0, 0.0, 1.0],
            &[1.0; 3],
            &[0.1, -0.2, 0.0],
            1e8,
            0.05,
            &AdmmSettings::default(),
        )
        .unwrap();
        for w in u.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(admm_x_update(&p, &[1.0; 3], &[1.0; 3], &[0.0; 3], 0.0, 0.0, &AdmmSettings::default()).is_err());
    }

    #[test]
    fn z_update_projection_cases() {
        let mut p = problem(vec![vec![1.0]; 3], &[3], params(1, 0.1), 0.3);
        let feasible = admm_z_update(&p, &[1.0, 2.0, 0.5], &[0.0; 3], 0.05).unwrap();
        assert_eq!(feasible, vec![1.0, 2.0, 0.5]);
        let zero = admm_z_update(&p, &[-1.0, -2.0, -0.5], &[0.0; 3], 0.05).unwrap();
        assert_eq!(zero, vec![0.0; 3]);
        let v = [2.0, 5.0, 3.0];
        let z = admm_z_update(&p, &v, &[0.0; 3], 0.05).unwrap();
        assert!((z.iter().sum::<f64>() - 5.0).abs() < 1e-9);
        // Brute-force oracle: minimize |z - v|^2 on the simplex by a fine grid.
        let mut best = (f64::INFINITY, [0.0; 2]);
        let n = 1000;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let a = 5.0 * i as f64 / n as f64;
                let b = 5.0 * j as f64 / n as f64;
                let c = 5.0 - a - b;
                let d = (a - v[0]).powi(2) + (b - v[1]).powi(2) + (c - v[2]).powi(2);
                if d < best.0 {
                    best = (d, [a, b]);
                }
            }
        }
        assert!(
            (z[0] - best.1[0]).abs() < 1e-2 && (z[1] - best.1[1]).abs() < 1e-2,
            "{z:?} vs {:?}",
            best.1
        );
        p.params.fronthaul_capacity_bps = 1e8;
        let z = admm_z_update(&p, &[1.0, 1.0, 1.0], &[0.0; 3], 0.05).unwrap();
        assert!(p.fronthaul_rate(&z) <= 1e8);
    }

    #[test]
    fn lambda_update_cases() {
        assert_eq!(
            admm_lambda_update(&[0.3, -0.1], &[1.0, 2.0], &[1.0, 2.0], 0.05),
            vec![0.3, -0.1]
        );
        let a = admm_lambda_update(&[0.0], &[2.0], &[1.0], 0.5);
        let b = admm_lambda_update(&[0.0], &[3.0], &[1.0], 0.5);
        assert!((b[0] - 2.0 * a[0]).abs() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn lambda_update_rejects_zero_mu() {
        admm_lambda_update(&[0.0], &[1.0], &[0.0], 0.0);
    }

    #[test]
    fn dinkelbach_trace_is_monotone_and_feasible() {
        let p = problem(
            vec![vec![2.0, 0.05], vec![0.6, 0.02], vec![0.03, 1.5], vec![0.01, 0.4]],
            &[2, 2],
            params(2, 0.05),
            0.3,
        );
        let sol = allocate_power_admm(&[p.clone()], &AdmmSettings::default()).unwrap();
        for w in sol.dinkelbach_trace.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(sol.audit(&[p]).is_ok());
    }
}
