//! Positive-temperature regularization: entropies relative to the Poisson
//! state, Gibbs states, partition functions in log domain and the
//! fixed-point solver for the potential.
//!
//! On an atomic support the Lebesgue-referenced entropy is meaningless, so
//! every entropic quantity here is taken relative to the Poisson state of
//! the density itself. The truncated, unnormalized Poisson factor
//! `π(o) = e^{−ρ(Ω)} ∏ ρ_i^{o_i}/o_i!` is the reference inside the solver;
//! with it the identity `ℙ(c) + T·H(ℙ_ψ, π) = ψ·ρ_ψ − T log Z` is exact at
//! every truncation.

use crate::cost::CostFamily;
use crate::density::DiscreteDensity;
use crate::lp::{self, SolveOptions};
use crate::par;
use crate::plan::{ln_factorial, plan_mass_distribution, poisson_plan, GCPlan, Occupation};
use crate::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;

/// Relative entropy `Σ_o w(o) log(w(o)/g(o))` of two plans in occupation
/// form; `+∞` when absolute continuity fails. Nonnegative whenever the
/// reference is (sub)normalized, zero iff the plans coincide.
pub fn relative_entropy(plan: &GCPlan, reference: &GCPlan) -> f64 {
    let mut h = 0.0;
    for (o, &w) in plan.weights() {
        let g = reference.weight(o);
        if g <= 0.0 {
            return f64::INFINITY;
        }
        h += w * (w / g).ln();
    }
    h
}

/// Total-variation-style distance `Σ_o |w(o) − g(o)|` over the union
/// support.
pub fn l1_distance(plan: &GCPlan, reference: &GCPlan) -> f64 {
    let mut d = 0.0;
    let mut seen = std::collections::BTreeSet::new();
    for (o, &w) in plan.weights() {
        d += (w - reference.weight(o)).abs();
        seen.insert(o.clone());
    }
    for (o, &g) in reference.weights() {
        if !seen.contains(o) {
            d += g;
        }
    }
    d
}

/// `log π(o)` for the unnormalized truncated Poisson factor of `rho`.
fn log_poisson_factor(o: &Occupation, rho: &DiscreteDensity) -> f64 {
    let mut s = -rho.total_mass();
    for (i, &k) in o.0.iter().enumerate() {
        if k > 0 {
            let m = rho.mass(i);
            if m == 0.0 {
                return f64::NEG_INFINITY;
            }
            s += k as f64 * m.ln() - ln_factorial(k);
        }
    }
    s
}

/// Entropy bookkeeping of one plan against its density's Poisson state.
#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    /// Plan entropy with counting reference, `−Σ w log(w ∏ o_i!)`.
    pub plan_entropy: f64,
    /// Relative entropy against the (untruncated) Poisson state of `rho`.
    pub relative_entropy: f64,
    /// `Σ log(n!) λ_n`, the factorial growth functional.
    pub growth_lhs: f64,
}

pub fn entropy_report(plan: &GCPlan, rho: &DiscreteDensity) -> EntropyReport {
    let mut s = 0.0;
    let mut h = 0.0;
    for (o, &w) in plan.weights() {
        s -= w * (w.ln() + o.multiplicity_factorial().ln());
        h += w * (w.ln() - log_poisson_factor(o, rho));
    }
    let growth_lhs = plan_mass_distribution(plan)
        .iter()
        .enumerate()
        .map(|(n, &l)| ln_factorial(n as u32) * l)
        .sum();
    EntropyReport {
        plan_entropy: s,
        relative_entropy: h,
        growth_lhs,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Factorial-growth estimate: `Σ log(n!) λ_n <= H(ℙ, 𝔾_ρ) + log 2 +
/// ρ(Ω) log ρ(Ω)`.
pub fn entropy_growth_check(plan: &GCPlan, rho: &DiscreteDensity) -> GrowthCheck {
    let rep = entropy_report(plan, rho);
    let mass = rho.total_mass();
    let mass_term = if mass > 0.0 { mass * mass.ln() } else { 0.0 };
    let rhs = rep.relative_entropy + 2f64.ln() + mass_term;
    GrowthCheck {
        lhs: rep.growth_lhs,
        rhs,
        holds: rep.growth_lhs <= rhs + 1e-12,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxEntropyCheck {
    pub plan_entropy: f64,
    /// `ρ(Ω) − Σ ρ_i log ρ_i`, the Poisson entropy and the ceiling.
    pub bound: f64,
    pub relative_entropy: f64,
    /// `|S − (bound − H)|`; the three quantities satisfy this identity
    /// exactly when the plan's density matches `rho`.
    pub decomposition_residual: f64,
    pub holds: bool,
}

/// Maximal-entropy check: `S(ℙ) = ρ(Ω) − Σ ρ log ρ − H(ℙ, 𝔾_ρ)`, hence
/// `S <= ρ(Ω) − Σ ρ log ρ` with equality only for the Poisson state.
pub fn max_entropy_check(plan: &GCPlan, rho: &DiscreteDensity) -> MaxEntropyCheck {
    let rep = entropy_report(plan, rho);
    let mass = rho.total_mass();
    let log_term: f64 = rho
        .masses()
        .iter()
        .map(|&m| if m > 0.0 { m * m.ln() } else { 0.0 })
        .sum();
    let bound = mass - log_term;
    let residual = (rep.plan_entropy - (bound - rep.relative_entropy)).abs();
    MaxEntropyCheck {
        plan_entropy: rep.plan_entropy,
        bound,
        relative_entropy: rep.relative_entropy,
        decomposition_residual: residual,
        holds: residual <= 1e-10 && rep.plan_entropy <= bound + 1e-10,
    }
}

/// Occupations, costs and Poisson factors of one truncated instance.
struct GibbsInstance {
    occupations: Vec<Occupation>,
    costs: Vec<f64>,
    log_pi: Vec<f64>,
}

impl GibbsInstance {
    fn build(rho: &DiscreteDensity, nmax: u32, cost: &CostFamily, opts: &SolveOptions) -> Result<Self> {
        let occupations = lp::enumerate_configurations(rho, nmax, cost, opts.var_cap)?;
        let prepared = cost.prepare(rho.points());
        let costs = par::map_range(occupations.len(), |j| prepared.cost(&occupations[j]));
        let log_pi = par::map_range(occupations.len(), |j| log_poisson_factor(&occupations[j], rho));
        Ok(Self { occupations, costs, log_pi })
    }

    /// Raw log-weights at `(psi, t)`, their log-sum and the induced density.
    fn density_at(&self, psi: &[f64], t: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let logw: Vec<f64> = par::map_range(self.occupations.len(), |j| {
            let o = &self.occupations[j];
            let field: f64 = o
                .0
                .iter()
                .enumerate()
                .map(|(i, &k)| k as f64 * psi[i])
                .sum();
            self.log_pi[j] + (field - self.costs[j]) / t
        });
        let log_z = log_sum_exp(&logw);
        let m = psi.len();
        let weights: Vec<f64> = logw.iter().map(|&l| (l - log_z).exp()).collect();
        let rho_psi = par::map_range(m, |i| {
            let mut acc = 0.0;
            for (o, &w) in self.occupations.iter().zip(&weights) {
                let k = o.0[i];
                if k > 0 {
                    acc += k as f64 * w;
                }
            }
            acc
        });
        (log_z, weights, rho_psi)
    }
}

/// Numerically stable `log Σ exp` over a slice; `−∞` for an empty or
/// all-`−∞` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Log-domain partition sum over a prepared occupation list; the term map
/// runs in parallel, the log-sum-exp reduction is sequential so the result
/// does not depend on splitting.
pub fn log_partition_terms(
    rho: &DiscreteDensity,
    occupations: &[Occupation],
    costs: &[f64],
    psi: &[f64],
    t: f64,
) -> f64 {
    let terms = par::map_range(occupations.len(), |j| {
        let o = &occupations[j];
        let field: f64 = o.0.iter().enumerate().map(|(i, &k)| k as f64 * psi[i]).sum();
        log_poisson_factor(o, rho) + (field - costs[j]) / t
    });
    log_sum_exp(&terms)
}

/// Sequential twin of [`log_partition_terms`] for the comparison benches;
/// identical result.
pub fn log_partition_terms_seq(
    rho: &DiscreteDensity,
    occupations: &[Occupation],
    costs: &[f64],
    psi: &[f64],
    t: f64,
) -> f64 {
    let terms: Vec<f64> = occupations
        .iter()
        .zip(costs)
        .map(|(o, &c)| {
            let field: f64 = o.0.iter().enumerate().map(|(i, &k)| k as f64 * psi[i]).sum();
            log_poisson_factor(o, rho) + (field - c) / t
        })
        .collect();
    log_sum_exp(&terms)
}

/// `log Z_{T,ρ}(ψ)`: log-domain sum of
/// `π(o) exp((−c(o) + Σ o_i ψ_i)/T)` over finite-cost occupations with at
/// most `nmax` particles.
pub fn log_partition_function(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    psi: &[f64],
    t: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    check_temperature(t)?;
    check_psi(rho, psi)?;
    let inst = GibbsInstance::build(rho, nmax, cost, opts)?;
    Ok(inst.density_at(psi, t).0)
}

/// `Z_{T,ρ}(ψ)` itself; prefer the log version for anything numeric.
pub fn partition_function(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    psi: &[f64],
    t: f64,
    opts: &SolveOptions,
) -> Result<f64> {
    Ok(log_partition_function(rho, nmax, cost, psi, t, opts)?.exp())
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidCost(format!("temperature {t} must be positive")));
    }
    Ok(())
}

fn check_psi(rho: &DiscreteDensity, psi: &[f64]) -> Result<()> {
    if psi.len() != rho.len() {
        return Err(Error::InvalidDensity(format!(
            "potential length {} does not match support size {}",
            psi.len(),
            rho.len()
        )));
    }
    Ok(())
}

/// A Gibbs state with its bookkeeping.
#[derive(Debug, Clone)]
pub struct GibbsSolution {
    pub psi: Vec<f64>,
    pub temperature: f64,
    pub log_z: f64,
    pub plan: GCPlan,
    /// Sup-norm of the Gibbs density minus the target.
    pub density_residual: f64,
    /// Dual value `Σ ψ_i ρ_i − T log Z` at the target density.
    pub free_energy: f64,
    /// Primal value `ℙ(c) + T·H(ℙ, π)` of the Gibbs plan.
    pub primal_value: f64,
    pub iterations: usize,
}

/// The Gibbs state of a fixed potential: weights
/// `w(o) ∝ π(o) e^{(−c(o) + Σ o_i ψ_i)/T}`.
pub fn gibbs_plan(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    psi: &[f64],
    t: f64,
    opts: &SolveOptions,
) -> Result<GibbsSolution> {
    check_temperature(t)?;
    check_psi(rho, psi)?;
    let inst = GibbsInstance::build(rho, nmax, cost, opts)?;
    build_solution(&inst, rho, nmax, psi, t, 0)
}

fn build_solution(
    inst: &GibbsInstance,
    rho: &DiscreteDensity,
    nmax: u32,
    psi: &[f64],
    t: f64,
    iterations: usize,
) -> Result<GibbsSolution> {
    let (log_z, weights, rho_psi) = inst.density_at(psi, t);
    if !log_z.is_finite() {
        return Err(Error::Numerical("empty Gibbs sum: every configuration is excluded".into()));
    }
    let mut map = BTreeMap::new();
    for (o, &w) in inst.occupations.iter().zip(&weights) {
        if w > 0.0 {
            map.insert(o.clone(), w);
        }
    }
    let plan = GCPlan::new(rho.len(), nmax, map)?;
    let density_residual = rho_psi
        .iter()
        .zip(rho.masses())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let free_energy = psi
        .iter()
        .zip(rho.masses())
        .map(|(p, m)| p * m)
        .sum::<f64>()
        - t * log_z;
    // ℙ(c) + T Σ w log(w/π) over the realized weights
    let mut cost_term = 0.0;
    let mut ent = 0.0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            cost_term += w * inst.costs[j];
            ent += w * (w.ln() - inst.log_pi[j]);
        }
    }
    Ok(GibbsSolution {
        psi: psi.to_vec(),
        temperature: t,
        log_z,
        plan,
        density_residual,
        free_energy,
        primal_value: cost_term + t * ent,
        iterations,
    })
}

/// Solve the dual fixed point `ρ_{ℙ_ψ} = ρ` at temperature `t`.
///
/// The update is the damped multiplicative rule
/// `ψ_i += γ T log(ρ_i / ρ_{ψ,i})` with `γ` starting at 1/2, doubling (up
/// to 1) while the residual decreases monotonically and halving when it
/// rises; persistent oscillation switches to plain dual ascent with a
/// backtracking line search. Cold temperatures are reached by annealing
/// from `max(T, 1)` with warm-started `ψ`.
pub fn solve_entropic(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    t: f64,
    tol: f64,
    max_iter: usize,
    opts: &SolveOptions,
) -> Result<GibbsSolution> {
    check_temperature(t)?;
    if rho.masses().iter().any(|&m| m <= 0.0) {
        return Err(Error::InvalidDensity(
            "entropic solver needs strictly positive masses on the support".into(),
        ));
    }
    let mass = rho.total_mass();
    if mass >= nmax as f64 {
        return Err(Error::Infeasible(format!(
            "total mass {mass} is not strictly below the truncation nmax = {nmax}"
        )));
    }
    let prepared = cost.prepare(rho.points());
    for i in 0..rho.len() {
        let cap = prepared.site_cap(i, nmax);
        if rho.mass(i) >= cap as f64 {
            return Err(Error::Infeasible(format!(
                "density row {i}: mass {} is not strictly below its occupancy cap {cap}",
                rho.mass(i)
            )));
        }
    }

    let inst = GibbsInstance::build(rho, nmax, cost, opts)?;
    let mut psi = vec![0.0; rho.len()];
    let mut total_iters = 0usize;
    let mut best_residual = f64::INFINITY;

    // annealing ladder: halve from max(1, T) down to T
    let mut ladder = Vec::new();
    let mut s = f64::max(1.0, t);
    while s > t * 1.5 {
        ladder.push(s);
        s *= 0.5;
    }
    ladder.push(t);

    for (stage, &t_k) in ladder.iter().enumerate() {
        let stage_tol = if stage + 1 == ladder.len() { tol } else { (tol * 100.0).min(1e-4) };
        let budget = max_iter.saturating_sub(total_iters);
        match fixed_point(&inst, rho, &mut psi, t_k, stage_tol, budget) {
            Ok(iters) => total_iters += iters,
            Err(residual) => {
                total_iters = max_iter;
                best_residual = best_residual.min(residual);
                if stage + 1 == ladder.len() {
                    return Err(Error::NonConvergence {
                        iterations: max_iter,
                        residual: best_residual,
                    });
                }
            }
        }
    }
    let sol = build_solution(&inst, rho, nmax, &psi, t, total_iters)?;
    if sol.density_residual > tol {
        return Err(Error::NonConvergence {
            iterations: total_iters,
            residual: sol.density_residual,
        });
    }
    Ok(sol)
}

#[derive(PartialEq, Clone, Copy)]
enum SolverMode {
    Multiplicative,
    Ascent,
    Newton,
}

/// Returns iterations used, or Err(best residual) when the budget runs out.
///
/// Escalation ladder: the damped multiplicative update handles the bulk of
/// the work; persistent oscillation switches to gradient ascent with
/// backtracking; and when first-order progress stalls (the dual Hessian
/// `Cov(o)/T` turns nearly singular at cold temperatures) a
/// Levenberg-damped Newton stage finishes to tolerance.
fn fixed_point(
    inst: &GibbsInstance,
    rho: &DiscreteDensity,
    psi: &mut Vec<f64>,
    t: f64,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<usize, f64> {
    let m = rho.len();
    let mut gamma = 0.5;
    let mut prev_residual = f64::INFINITY;
    let mut best_residual = f64::INFINITY;
    let mut oscillations = 0usize;
    let mut mode = SolverMode::Multiplicative;
    let mut window_best = f64::INFINITY;
    let mut lambda = 1e-8;

    let dual = |psi_try: &[f64], log_z_try: f64| -> f64 {
        psi_try
            .iter()
            .zip(rho.masses())
            .map(|(p, ms)| p * ms)
            .sum::<f64>()
            - t * log_z_try
    };

    for iter in 0..max_iter {
        let (log_z, weights, rho_psi) = inst.density_at(psi, t);
        let residual = rho_psi
            .iter()
            .zip(rho.masses())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        best_residual = best_residual.min(residual);
        if residual <= tol {
            return Ok(iter);
        }

        // stall detector: escalate when 50 iterations shave off less
        // than 30 percent of the residual
        window_best = window_best.min(residual);
        if iter % 50 == 49 {
            if window_best > 0.7 * best_residual && mode != SolverMode::Newton {
                mode = if mode == SolverMode::Multiplicative {
                    SolverMode::Ascent
                } else {
                    SolverMode::Newton
                };
            }
            if window_best > 0.995 * best_residual && mode == SolverMode::Ascent {
                mode = SolverMode::Newton;
            }
            window_best = f64::INFINITY;
        }

        match mode {
            SolverMode::Multiplicative => {
                for i in 0..m {
                    psi[i] += gamma * t * (rho.mass(i) / rho_psi[i].max(1e-300)).ln();
                }
                if residual < prev_residual {
                    gamma = (2.0 * gamma).min(1.0);
                } else {
                    gamma = (0.5 * gamma).max(0.05);
                    oscillations += 1;
                    if oscillations >= 8 {
                        mode = SolverMode::Ascent;
                    }
                }
                prev_residual = residual;
            }
            SolverMode::Ascent => {
                let d0 = dual(psi, log_z);
                let grad: Vec<f64> = rho
                    .masses()
                    .iter()
                    .zip(&rho_psi)
                    .map(|(a, b)| a - b)
                    .collect();
                let g2: f64 = grad.iter().map(|g| g * g).sum();
                let mut alpha = f64::max(t, 1e-3);
                let mut accepted = false;
                for _ in 0..60 {
                    let trial: Vec<f64> =
                        psi.iter().zip(&grad).map(|(p, g)| p + alpha * g).collect();
                    let (lz, _, _) = inst.density_at(&trial, t);
                    if dual(&trial, lz) >= d0 + 1e-4 * alpha * g2 {
                        *psi = trial;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    mode = SolverMode::Newton;
                }
            }
            SolverMode::Newton => {
                // maximize D: solve (Cov/T + λ I) δ = ρ − ρ_ψ
                let mut cov = vec![0.0; m * m];
                for (o, &w) in inst.occupations.iter().zip(&weights) {
                    if w == 0.0 {
                        continue;
                    }
                    for (i, &ki) in o.0.iter().enumerate() {
                        if ki == 0 {
                            continue;
                        }
                        for (j, &kj) in o.0.iter().enumerate().skip(i) {
                            if kj > 0 {
                                cov[i * m + j] += w * (ki as f64) * (kj as f64);
                            }
                        }
                    }
                }
                for i in 0..m {
                    for j in i..m {
                        let c = cov[i * m + j] - rho_psi[i] * rho_psi[j];
                        cov[i * m + j] = c;
                        cov[j * m + i] = c;
                    }
                }
                let grad: Vec<f64> = rho
                    .masses()
                    .iter()
                    .zip(&rho_psi)
                    .map(|(a, b)| a - b)
                    .collect();
                let d0 = dual(psi, log_z);
                let scale = (0..m).map(|i| cov[i * m + i]).fold(0.0, f64::max) / t + 1e-300;
                let mut stepped = false;
                for _ in 0..40 {
                    let mut sys = vec![0.0; m * m];
                    for i in 0..m {
                        for j in 0..m {
                            sys[i * m + j] = cov[i * m + j] / t;
                        }
                        sys[i * m + i] += lambda * scale;
                    }
                    if let Some(delta) = solve_spd(&sys, &grad, m) {
                        let trial: Vec<f64> =
                            psi.iter().zip(&delta).map(|(p, d)| p + d).collect();
                        let (lz, _, _) = inst.density_at(&trial, t);
                        if dual(&trial, lz) > d0 {
                            *psi = trial;
                            lambda = (lambda * 0.25).max(1e-14);
                            stepped = true;
                            break;
                        }
                    }
                    lambda *= 10.0;
                    if lambda > 1e8 {
                        break;
                    }
                }
                if !stepped {
                    return Err(best_residual);
                }
            }
        }
    }
    Err(best_residual)
}

/// Gaussian elimination with partial pivoting for the small symmetric
/// positive semidefinite Newton systems.
fn solve_spd(a: &[f64], b: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut mat = a.to_vec();
    let mut rhs = b.to_vec();
    for c in 0..m {
        let piv = (c..m).max_by(|&x, &y| mat[x * m + c].abs().partial_cmp(&mat[y * m + c].abs()).unwrap())?;
        if mat[piv * m + c].abs() < 1e-300 {
            return None;
        }
        if piv != c {
            for k in 0..m {
                mat.swap(piv * m + k, c * m + k);
            }
            rhs.swap(piv, c);
        }
        for r in (c + 1)..m {
            let f = mat[r * m + c] / mat[c * m + c];
            if f == 0.0 {
                continue;
            }
            for k in c..m {
                mat[r * m + k] -= f * mat[c * m + k];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let mut x = vec![0.0; m];
    for c in (0..m).rev() {
        let mut s = rhs[c];
        for k in (c + 1)..m {
            s -= mat[c * m + k] * x[k];
        }
        x[c] = s / mat[c * m + c];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// One row of a temperature sweep.
#[derive(Debug, Clone, Serialize)]
pub struct TemperatureRow {
    pub temperature: f64,
    pub free_energy: f64,
    /// Relative entropy of the Gibbs plan against the renormalized
    /// truncated Poisson plan.
    pub rel_entropy_vs_poisson: f64,
    pub l1_to_poisson: f64,
    pub density_residual: f64,
}

/// Solve across an increasing list of temperatures and report the Gibbs
/// functionals driving the small- and large-T limits.
pub fn temperature_sweep(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    temps: &[f64],
    tol: f64,
    max_iter: usize,
    opts: &SolveOptions,
) -> Result<Vec<TemperatureRow>> {
    if temps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidCost("temperatures must increase strictly".into()));
    }
    let reference = poisson_plan(rho, nmax)?.plan;
    let mut rows = Vec::with_capacity(temps.len());
    for &t in temps {
        let sol = solve_entropic(rho, nmax, cost, t, tol, max_iter, opts)?;
        rows.push(TemperatureRow {
            temperature: t,
            free_energy: sol.free_energy,
            rel_entropy_vs_poisson: relative_entropy(&sol.plan, &reference),
            l1_to_poisson: l1_distance(&sol.plan, &reference),
            density_residual: sol.density_residual,
        });
    }
    Ok(rows)
}

/// Solvability probe at the inflated density `(1+ε)ρ`: a Gibbs density must
/// sit strictly inside the reachable set, so failure here flags `ρ` as
/// extremal for the truncation.
#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityProbe {
    pub epsilon: f64,
    pub solved: bool,
    pub residual: f64,
}

pub fn feasibility_probe(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    t: f64,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
    opts: &SolveOptions,
) -> Result<FeasibilityProbe> {
    let inflated = DiscreteDensity::new(
        rho.dim(),
        rho.points().to_vec(),
        rho.masses().iter().map(|m| m * (1.0 + epsilon)).collect(),
    )?;
    match solve_entropic(&inflated, nmax, cost, t, tol, max_iter, opts) {
        Ok(sol) => Ok(FeasibilityProbe {
            epsilon,
            solved: true,
            residual: sol.density_residual,
        }),
        Err(Error::Infeasible(_)) | Err(Error::NonConvergence { .. }) => Ok(FeasibilityProbe {
            epsilon,
            solved: false,
            residual: f64::NAN,
        }),
        Err(e) => Err(e),
    }
}

/// Bisect the largest multiplier `η` for which `ηρ` still admits a Gibbs
/// state at the truncation; brackets start at `(0, nmax/ρ(Ω)]`.
pub fn critical_eta_probe(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    t: f64,
    steps: usize,
    opts: &SolveOptions,
) -> Result<f64> {
    let mass = rho.total_mass();
    let mut lo = 0.0;
    let mut hi = nmax as f64 / mass;
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        let probe = feasibility_probe(rho, nmax, cost, t, mid - 1.0, 1e-6, 20_000, opts)?;
        if probe.solved {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Two-agent distribution over the support: off-diagonal entries
/// `Σ_o w(o) o_i o_j`, diagonal `Σ_o w(o) o_i (o_i − 1)/2`; the pairwise
/// cost identity reads `ℙ(c) = Σ_{i<=j} c2(x_i, x_j) ρ²_{ij}`.
pub fn two_agent_distribution(plan: &GCPlan) -> Vec<Vec<f64>> {
    let m = plan.support_size();
    let mut mat = vec![vec![0.0; m]; m];
    for (o, &w) in plan.weights() {
        for i in 0..m {
            let oi = o.0[i] as f64;
            if oi == 0.0 {
                continue;
            }
            mat[i][i] += w * oi * (oi - 1.0) / 2.0;
            for j in (i + 1)..m {
                let oj = o.0[j] as f64;
                if oj > 0.0 {
                    mat[i][j] += w * oi * oj;
                    mat[j][i] += w * oi * oj;
                }
            }
        }
    }
    mat
}

/// Block approximation: support atoms are binned into cells of side `h`;
/// within every cell the plan's conditional distribution is replaced by
/// the product distribution of the plan's own density. The induced
/// density is preserved exactly and the relative entropy becomes finite.
pub fn block_approximation(plan: &GCPlan, points: &[Vec<f64>], h: f64) -> Result<GCPlan> {
    if !(h > 0.0) {
        return Err(Error::InvalidPlan("cell size must be positive".into()));
    }
    let m = plan.support_size();
    if points.len() != m {
        return Err(Error::InvalidPlan("points/support size mismatch".into()));
    }
    let rho = plan.density();
    let cell_of = |p: &[f64]| -> Vec<i64> { p.iter().map(|&x| (x / h).floor() as i64).collect() };
    let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(cell_of(p)).or_default().push(i);
    }
    let cell_sites: Vec<Vec<usize>> = cells.values().cloned().collect();
    let site_cell: Vec<usize> = {
        let mut sc = vec![0usize; m];
        for (ci, sites) in cell_sites.iter().enumerate() {
            for &s in sites {
                sc[s] = ci;
            }
        }
        sc
    };
    // group plan weight by cell signature (particles per cell)
    let mut signatures: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (o, &w) in plan.weights() {
        let mut sig = vec![0u32; cell_sites.len()];
        for (i, &k) in o.0.iter().enumerate() {
            sig[site_cell[i]] += k;
        }
        *signatures.entry(sig).or_insert(0.0) += w;
    }

    let mut out: BTreeMap<Occupation, f64> = BTreeMap::new();
    for (sig, total_w) in signatures {
        // per cell: multinomial spread of its particle count over its sites
        let mut partials: Vec<(Occupation, f64)> = vec![(Occupation::empty(m), 1.0)];
        for (ci, &count) in sig.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let sites = &cell_sites[ci];
            let cell_mass: f64 = sites.iter().map(|&s| rho[s]).sum();
            if cell_mass <= 0.0 {
                return Err(Error::InvalidPlan(
                    "occupied cell with zero density mass".into(),
                ));
            }
            let spreads = multinomial_spread(sites, count, &rho, cell_mass);
            let mut next = Vec::with_capacity(partials.len() * spreads.len());
            for (occ, w) in &partials {
                for (docc, dw) in &spreads {
                    next.push((occ.merge(docc), w * dw));
                }
            }
            partials = next;
            if partials.len() > 2_000_000 {
                return Err(Error::SizeCap(partials.len(), 2_000_000));
            }
        }
        for (occ, w) in partials {
            *out.entry(occ).or_insert(0.0) += total_w * w;
        }
    }
    let nmax = out.keys().map(Occupation::total).max().unwrap_or(0).max(plan.nmax());
    GCPlan::new(m, nmax, out)
}

/// All placements of `count` particles over `sites`, weighted by the
/// multinomial law with probabilities `masses[s] / cell_mass`.
fn multinomial_spread(
    sites: &[usize],
    count: u32,
    masses: &[f64],
    cell_mass: f64,
) -> Vec<(Occupation, f64)> {
    let m = masses.len();
    let mut out = Vec::new();
    let mut occ = vec![0u32; m];
    fn rec(
        sites: &[usize],
        idx: usize,
        left: u32,
        weight: f64,
        masses: &[f64],
        cell_mass: f64,
        occ: &mut Vec<u32>,
        out: &mut Vec<(Occupation, f64)>,
    ) {
        if idx + 1 == sites.len() {
            let s = sites[idx];
            let p = masses[s] / cell_mass;
            let w = weight * p.powi(left as i32);
            occ[s] = left;
            out.push((Occupation(occ.clone()), w));
            occ[s] = 0;
            return;
        }
        let s = sites[idx];
        let p = masses[s] / cell_mass;
        for k in 0..=left {
            occ[s] = k;
            rec(sites, idx + 1, left - k, weight * p.powi(k as i32), masses, cell_mass, occ, out);
        }
        occ[s] = 0;
    }
    rec(sites, 0, count, 1.0, masses, cell_mass, &mut occ, &mut out);
    // multiply by the multinomial coefficients count!/(∏ k_s!)
    let cf = crate::plan::factorial(count);
    for (occ, w) in &mut out {
        let denom: f64 = sites.iter().map(|&s| crate::plan::factorial(occ.0[s])).product();
        *w *= cf / denom;
    }
    out
}
