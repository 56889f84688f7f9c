//! The truncated grand-canonical transport problem as an explicit LP.
//!
//! Variables are occupation configurations with at most `nmax` particles and
//! finite cost; constraints are one density row per support atom plus one
//! normalization row. The column count explodes combinatorially while the
//! row count stays `m + 1`, which is exactly the regime the revised simplex
//! in [`simplex`] is built for. Row multipliers at the optimum are the
//! Kantorovich potential `(φ, β)` and are returned as a verified
//! [`DualCertificate`].

mod scalar;
mod simplex;

pub use scalar::BigRational;

use crate::cost::{CostFamily, PreparedCost};
use crate::density::DiscreteDensity;
use crate::par;
use crate::plan::{GCPlan, Occupation};
use crate::{Error, Result};
use scalar::LpScalar;
use serde::Serialize;
use std::collections::BTreeMap;

/// Tolerances fixed by the problem statement rather than tunable knobs.
pub mod tol {
    /// Feasibility slack of a dual certificate on every enumerated column.
    pub const DUAL_FEASIBILITY: f64 = 1e-9;
    /// Largest acceptable duality gap.
    pub const DUALITY_GAP: f64 = 1e-8;
    /// Complementary slackness residual on the primal support.
    pub const COMPLEMENTARY_SLACKNESS: f64 = 1e-8;
    /// Per-block tolerance of the convex-hull recheck.
    pub const CONVEX_HULL: f64 = 1e-7;
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Solve in exact rational arithmetic (the f64 input data is converted
    /// exactly). Only allowed up to `exact_var_cap` columns.
    pub exact: bool,
    /// Refuse instances whose configuration count exceeds this cap.
    pub var_cap: usize,
    /// Column cap for the exact backend.
    pub exact_var_cap: usize,
    /// Weight threshold above which a particle number counts as occupied.
    pub support_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            exact: false,
            var_cap: 5_000_000,
            exact_var_cap: 20_000,
            support_tol: 1e-9,
            max_iterations: 200_000,
        }
    }
}

/// The explicit column pool of one truncated instance.
pub struct LpInstance<'a> {
    pub rho: &'a DiscreteDensity,
    pub nmax: u32,
    pub occupations: Vec<Occupation>,
    pub costs: Vec<f64>,
    prepared: PreparedCost<'a>,
}

/// Kantorovich potential with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct DualCertificate {
    pub beta: f64,
    pub phi: Vec<f64>,
    /// `primal − (β + Σ φ_i ρ_i)`.
    pub gap: f64,
    /// Worst violation of `β + Σ o_i φ_i ≤ c(o)` over all enumerated
    /// configurations (positive = violated).
    pub max_violation: f64,
    /// Worst `|β + Σ o_i φ_i − c(o)|` over the primal support.
    pub slackness_residual: f64,
}

/// Primal optimum with its certificate.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub plan: GCPlan,
    pub certificate: DualCertificate,
    pub iterations: usize,
    pub num_variables: usize,
    pub exact: bool,
}

impl LpSolution {
    /// Particle numbers carrying weight above the support tolerance.
    pub fn particle_support(&self, tol: f64) -> Vec<u32> {
        self.plan.particle_support(tol)
    }
}

/// All occupations with at most `nmax` particles and finite cost over the
/// density's support. Multiplicity at an atom is capped at 1 when the
/// kernel diverges on the diagonal, which prunes the enumeration rather
/// than filtering afterwards. Errors out when the configuration count
/// would exceed `cap`.
pub fn enumerate_configurations(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    cap: usize,
) -> Result<Vec<Occupation>> {
    let prepared = cost.prepare(rho.points());
    enumerate_prepared(rho.len(), nmax, &prepared, cap)
}

fn enumerate_prepared(
    m: usize,
    nmax: u32,
    prepared: &PreparedCost<'_>,
    cap: usize,
) -> Result<Vec<Occupation>> {
    let caps: Vec<u32> = (0..m).map(|i| prepared.site_cap(i, nmax)).collect();
    let count = count_occupations(&caps, nmax, cap);
    if count > cap {
        return Err(Error::SizeCap(count, cap));
    }
    let mut out = Vec::with_capacity(count);
    let mut occ = vec![0u32; m];
    fill(&caps, nmax, 0, &mut occ, &mut out);
    // site caps handle diverging diagonals; anything else infinite
    // (e.g. custom kernels) is dropped here
    let finite: Vec<bool> = par::map_range(out.len(), |j| prepared.cost(&out[j]).is_finite());
    Ok(out
        .into_iter()
        .zip(finite)
        .filter_map(|(o, keep)| keep.then_some(o))
        .collect())
}

/// Number of occupations with `Σ o_i ≤ budget` and `o_i ≤ caps[i]`,
/// saturating at `cap + 1`.
fn count_occupations(caps: &[u32], budget: u32, cap: usize) -> usize {
    let b = budget as usize;
    let mut counts = vec![0usize; b + 1];
    counts[0] = 1;
    for &c in caps {
        let mut next = vec![0usize; b + 1];
        for r in 0..=b {
            if counts[r] == 0 {
                continue;
            }
            for k in 0..=(c as usize).min(b - r) {
                next[r + k] = next[r + k].saturating_add(counts[r]);
            }
        }
        counts = next;
        let total: usize = counts.iter().fold(0usize, |a, &x| a.saturating_add(x));
        if total > cap {
            return cap + 1;
        }
    }
    counts.iter().sum()
}

fn fill(caps: &[u32], budget: u32, site: usize, occ: &mut Vec<u32>, out: &mut Vec<Occupation>) {
    if site == caps.len() {
        out.push(Occupation(occ.clone()));
        return;
    }
    for k in 0..=caps[site].min(budget) {
        occ[site] = k;
        fill(caps, budget - k, site + 1, occ, out);
    }
    occ[site] = 0;
}

impl<'a> LpInstance<'a> {
    /// Enumerate the variable set and evaluate all column costs.
    pub fn build(
        rho: &'a DiscreteDensity,
        nmax: u32,
        cost: &'a CostFamily,
        opts: &SolveOptions,
    ) -> Result<Self> {
        let cap = if opts.exact {
            opts.var_cap.min(opts.exact_var_cap)
        } else {
            opts.var_cap
        };
        let prepared = cost.prepare(rho.points());
        let occupations = enumerate_prepared(rho.len(), nmax, &prepared, cap)?;
        let costs = par::map_range(occupations.len(), |j| prepared.cost(&occupations[j]));
        Ok(Self {
            rho,
            nmax,
            occupations,
            costs,
            prepared,
        })
    }

    /// Keep only configurations with exactly `n` particles.
    fn restrict_to_layer(&mut self, n: u32) {
        let keep: Vec<bool> = self.occupations.iter().map(|o| o.total() == n).collect();
        let occ = std::mem::take(&mut self.occupations);
        let costs = std::mem::take(&mut self.costs);
        for ((o, c), k) in occ.into_iter().zip(costs).zip(keep) {
            if k {
                self.occupations.push(o);
                self.costs.push(c);
            }
        }
    }

    fn rows(&self) -> usize {
        self.rho.len() + 1
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = self.rho.masses().to_vec();
        b.push(1.0);
        b
    }

    fn solve_typed<T: LpScalar>(&self, opts: &SolveOptions) -> Result<LpSolution> {
        let rows = self.rows();
        let source = simplex::OccColumns::<T> {
            occs: &self.occupations,
            costs: self.costs.iter().map(|&c| T::from_f64(c)).collect(),
            rows,
        };
        let b: Vec<T> = self.rhs().iter().map(|&v| T::from_f64(v)).collect();
        match simplex::solve(&source, &b, opts.max_iterations)? {
            simplex::SimplexOutcome::Unbounded => Err(Error::Unbounded),
            simplex::SimplexOutcome::Infeasible { residuals, worst_row } => {
                let what = if worst_row + 1 == rows {
                    "normalization row".to_string()
                } else {
                    format!("density row {worst_row}")
                };
                Err(Error::Infeasible(format!(
                    "truncated problem has no plan matching the density ({} violated by {:.3e})",
                    what, residuals[worst_row]
                )))
            }
            simplex::SimplexOutcome::Optimal(res) => self.read_off(res, opts),
        }
    }

    fn read_off<T: LpScalar>(
        &self,
        res: simplex::SimplexResult<T>,
        opts: &SolveOptions,
    ) -> Result<LpSolution> {
        let m = self.rho.len();
        let mut weights: BTreeMap<Occupation, f64> = BTreeMap::new();
        for (j, v) in &res.values {
            let w = v.to_f64();
            if w < -1e-9 {
                return Err(Error::Numerical(format!("negative basic weight {w:.3e}")));
            }
            if w > 0.0 {
                *weights.entry(self.occupations[*j].clone()).or_insert(0.0) += w;
            }
        }
        let plan = GCPlan::new(m, self.nmax, weights)?;
        let value = res.objective.to_f64();
        let duals: Vec<f64> = res.duals.iter().map(LpScalar::to_f64).collect();
        let (phi, beta) = (duals[..m].to_vec(), duals[m]);

        // certificate diagnostics over the full column pool
        let price = |o: &Occupation| -> f64 {
            beta + o.0.iter().enumerate().map(|(i, &k)| k as f64 * phi[i]).sum::<f64>()
        };
        let violations = par::map_range(self.occupations.len(), |j| {
            price(&self.occupations[j]) - self.costs[j]
        });
        let max_violation = violations.into_iter().fold(f64::NEG_INFINITY, f64::max);
        let slackness_residual = plan
            .weights()
            .keys()
            .map(|o| (price(o) - self.prepared.cost(o)).abs())
            .fold(0.0, f64::max);
        let dual_value = beta
            + phi
                .iter()
                .zip(self.rho.masses())
                .map(|(p, m)| p * m)
                .sum::<f64>();
        let certificate = DualCertificate {
            beta,
            phi,
            gap: value - dual_value,
            max_violation,
            slackness_residual,
        };
        Ok(LpSolution {
            value,
            plan,
            certificate,
            iterations: res.iterations,
            num_variables: self.occupations.len(),
            exact: opts.exact,
        })
    }

    pub fn solve(&self, opts: &SolveOptions) -> Result<LpSolution> {
        if opts.exact {
            if self.occupations.len() > opts.exact_var_cap {
                return Err(Error::SizeCap(self.occupations.len(), opts.exact_var_cap));
            }
            self.solve_typed::<BigRational>(opts)
        } else {
            self.solve_typed::<f64>(opts)
        }
    }
}

fn quick_feasibility(rho: &DiscreteDensity, nmax: u32, cost: &CostFamily) -> Result<()> {
    let mass = rho.total_mass();
    if mass > nmax as f64 + 1e-9 {
        return Err(Error::Infeasible(format!(
            "total mass {mass} exceeds truncation nmax = {nmax}"
        )));
    }
    let prepared = cost.prepare(rho.points());
    for i in 0..rho.len() {
        let cap = prepared.site_cap(i, nmax);
        if rho.mass(i) > cap as f64 + 1e-9 {
            return Err(Error::Infeasible(format!(
                "density row {i}: mass {} exceeds the occupancy cap {cap} forced by the diverging diagonal",
                rho.mass(i)
            )));
        }
    }
    Ok(())
}

/// Minimize the truncated problem. Returns the optimum, one optimal basic
/// plan and a verified dual certificate.
pub fn solve_primal(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    opts: &SolveOptions,
) -> Result<LpSolution> {
    quick_feasibility(rho, nmax, cost)?;
    let inst = LpInstance::build(rho, nmax, cost, opts)?;
    inst.solve(opts)
}

/// Solve the dual: the certificate of [`solve_primal`], checked for
/// feasibility on every enumerated configuration and for complementary
/// slackness on the primal support.
pub fn solve_dual(
    rho: &DiscreteDensity,
    nmax: u32,
    cost: &CostFamily,
    opts: &SolveOptions,
) -> Result<DualCertificate> {
    let sol = solve_primal(rho, nmax, cost, opts)?;
    let cert = sol.certificate;
    if cert.max_violation > tol::DUAL_FEASIBILITY {
        return Err(Error::Numerical(format!(
            "dual certificate violates a column by {:.3e}",
            cert.max_violation
        )));
    }
    if cert.gap.abs() > tol::DUALITY_GAP {
        return Err(Error::Numerical(format!("duality gap {:.3e}", cert.gap)));
    }
    if cert.slackness_residual > tol::COMPLEMENTARY_SLACKNESS {
        return Err(Error::Numerical(format!(
            "complementary slackness residual {:.3e}",
            cert.slackness_residual
        )));
    }
    Ok(cert)
}

/// The canonical (fixed particle number) problem: plans supported on the
/// single layer `n`. Requires `ρ(Ω) = n` up to 1e-9.
pub fn solve_canonical(
    rho: &DiscreteDensity,
    n: u32,
    cost: &CostFamily,
    opts: &SolveOptions,
) -> Result<LpSolution> {
    let mass = rho.total_mass();
    if (mass - n as f64).abs() > 1e-9 {
        return Err(Error::Infeasible(format!(
            "canonical problem needs ρ(Ω) = {n}, got {mass}"
        )));
    }
    quick_feasibility(rho, n, cost)?;
    let mut inst = LpInstance::build(rho, n, cost, opts)?;
    inst.restrict_to_layer(n);
    if inst.occupations.is_empty() {
        return Err(Error::Infeasible(format!(
            "no finite-cost configuration with exactly {n} particles"
        )));
    }
    inst.solve(opts)
}

/// One row of a truncation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub nmax: u32,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationSweep {
    pub rows: Vec<SweepRow>,
    /// First truncation at which consecutive values differ by less than the
    /// stabilization tolerance, if any.
    pub stabilized_at: Option<u32>,
}

/// Solve the truncated problem for every `nmax` in `n_from..=n_to`. Values
/// are nonincreasing by feasible-set nesting; the sweep flags where they
/// stabilize within `stab_tol`.
pub fn truncation_sweep(
    rho: &DiscreteDensity,
    cost: &CostFamily,
    n_from: u32,
    n_to: u32,
    stab_tol: f64,
    opts: &SolveOptions,
) -> Result<TruncationSweep> {
    if (n_from as f64) < rho.total_mass() - 1e-9 {
        return Err(Error::Infeasible(format!(
            "sweep must start at nmax >= ρ(Ω) = {}",
            rho.total_mass()
        )));
    }
    let mut rows = Vec::new();
    let mut stabilized_at = None;
    for n in n_from..=n_to {
        let value = solve_primal(rho, n, cost, opts)?.value;
        if let Some(prev) = rows.last().map(|r: &SweepRow| r.value) {
            if stabilized_at.is_none() && (prev - value).abs() < stab_tol {
                stabilized_at = Some(n);
            }
        }
        rows.push(SweepRow { nmax: n, value });
    }
    Ok(TruncationSweep { rows, stabilized_at })
}

/// Per-layer outcome of the convex-hull decomposition check.
#[derive(Debug, Clone, Serialize)]
pub struct HullBlock {
    pub n: u32,
    pub lambda: f64,
    /// Average cost of the layer, conditioned on the layer.
    pub block_cost: f64,
    /// Canonical optimum for the layer's own normalized density.
    pub canonical_value: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexHullReport {
    pub blocks: Vec<HullBlock>,
    pub max_gap: f64,
    pub ok: bool,
}

/// Verify that every layer of an optimal plan is itself canonically optimal
/// for its conditional density: re-solves the n-marginal problem per layer
/// and compares within `tol::CONVEX_HULL`.
pub fn convex_hull_check(
    plan: &GCPlan,
    rho: &DiscreteDensity,
    cost: &CostFamily,
    opts: &SolveOptions,
) -> Result<ConvexHullReport> {
    let prepared = cost.prepare(rho.points());
    let lambda = crate::plan::plan_mass_distribution(plan);
    let mut blocks = Vec::new();
    for (n, &l) in lambda.iter().enumerate() {
        if l <= opts.support_tol {
            continue;
        }
        let mut block_density = vec![0.0; rho.len()];
        let mut block_cost = 0.0;
        for (o, &w) in plan.weights() {
            if o.total() as usize == n {
                for (d, &k) in block_density.iter_mut().zip(&o.0) {
                    *d += w * k as f64;
                }
                block_cost += w * prepared.cost(o);
            }
        }
        for d in &mut block_density {
            *d /= l;
        }
        block_cost /= l;
        let canonical_value = if n == 0 {
            cost.c0
        } else {
            let rho_n = DiscreteDensity::new(rho.dim(), rho.points().to_vec(), block_density)?;
            solve_canonical(&rho_n, n as u32, cost, opts)?.value
        };
        blocks.push(HullBlock {
            n: n as u32,
            lambda: l,
            block_cost,
            canonical_value,
            gap: (block_cost - canonical_value).abs(),
        });
    }
    let max_gap = blocks.iter().map(|b| b.gap).fold(0.0, f64::max);
    Ok(ConvexHullReport {
        blocks,
        max_gap,
        ok: max_gap <= tol::CONVEX_HULL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{constant, pairwise_family, riesz};

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn enumerate_small() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[0.3, 0.3]).unwrap();
        let fam = pairwise_family(constant(1.0));
        let occs = enumerate_configurations(&rho, 1, &fam, 1000).unwrap();
        assert_eq!(occs.len(), 3); // ∅, e1, e2
        let occs = enumerate_configurations(&rho, 0, &fam, 1000).unwrap();
        assert_eq!(occs.len(), 1);
    }

    #[test]
    fn enumerate_excludes_multiplicity_under_coulomb() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let rho = DiscreteDensity::new(2, pts, vec![0.5; 6]).unwrap();
        let fam = pairwise_family(riesz(1.0).unwrap());
        let occs = enumerate_configurations(&rho, 6, &fam, 10_000).unwrap();
        assert_eq!(occs.len(), 64); // all 0/1 vectors
    }

    #[test]
    fn enumerate_respects_cap() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4]).unwrap();
        let fam = pairwise_family(constant(1.0));
        let err = enumerate_configurations(&rho, 8, &fam, 10);
        assert!(matches!(err, Err(Error::SizeCap(_, 10))));
    }

    #[test]
    fn constant_cost_closed_form() {
        // ρ(Ω) = 2.5 on 3 sites: value = 2.5·1.5/2 − 0.5·(−0.5)/2 = 2
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0, 2.0], &[1.0, 1.0, 0.5]).unwrap();
        let fam = pairwise_family(constant(1.0));
        let sol = solve_primal(&rho, 4, &fam, &opts()).unwrap();
        assert!((sol.value - 2.0).abs() < 1e-9, "value {}", sol.value);
        assert!(sol.certificate.gap.abs() < 1e-8);
    }

    #[test]
    fn zero_or_one_agent_plan() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[0.25, 0.15]).unwrap();
        let fam = pairwise_family(riesz(1.0).unwrap());
        let sol = solve_primal(&rho, 3, &fam, &opts()).unwrap();
        assert!(sol.value.abs() < 1e-12);
        assert!((sol.plan.weight(&Occupation(vec![0, 0])) - 0.6).abs() < 1e-12);
        assert!((sol.plan.weight(&Occupation(vec![1, 0])) - 0.25).abs() < 1e-12);
        assert!((sol.plan.weight(&Occupation(vec![0, 1])) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn coulomb_mass_two_forces_the_pair() {
        let rho = DiscreteDensity::new(3, vec![vec![0.0; 3], vec![1.0, 0.0, 0.0]], vec![1.0, 1.0])
            .unwrap();
        let fam = pairwise_family(coulomb_3d());
        let sol = solve_primal(&rho, 4, &fam, &opts()).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-10);
        assert_eq!(sol.particle_support(1e-9), vec![2]);
    }

    fn coulomb_3d() -> crate::cost::PairwiseCost {
        crate::cost::coulomb(3).unwrap()
    }

    #[test]
    fn zero_cost_has_zero_dual() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[0.5, 0.5]).unwrap();
        let fam = crate::cost::zero_family();
        let cert = solve_dual(&rho, 2, &fam, &opts()).unwrap();
        assert!(cert.beta.abs() < 1e-12);
        assert!(cert.phi.iter().all(|p| p.abs() < 1e-12));
        assert!(cert.gap.abs() < 1e-12);
    }

    #[test]
    fn infeasible_when_nmax_below_mass() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[1.0, 1.5]).unwrap();
        let fam = pairwise_family(constant(1.0));
        assert!(matches!(
            solve_primal(&rho, 2, &fam, &opts()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn infeasible_when_atom_mass_exceeds_occupancy_cap() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[1.4, 0.6]).unwrap();
        let fam = pairwise_family(riesz(1.0).unwrap());
        let err = solve_primal(&rho, 4, &fam, &opts());
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn canonical_requires_integer_mass() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[1.0, 0.5]).unwrap();
        let fam = pairwise_family(constant(1.0));
        assert!(matches!(
            solve_canonical(&rho, 2, &fam, &opts()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn canonical_constant_cost() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        let fam = pairwise_family(constant(1.0));
        let sol = solve_canonical(&rho, 3, &fam, &opts()).unwrap();
        assert!((sol.value - 3.0).abs() < 1e-9);
        assert_eq!(sol.particle_support(1e-9), vec![3]);
    }

    #[test]
    fn canonical_single_particle_is_free() {
        let rho = DiscreteDensity::new_1d(&[0.0, 2.0], &[0.7, 0.3]).unwrap();
        let fam = pairwise_family(riesz(1.0).unwrap());
        let sol = solve_canonical(&rho, 1, &fam, &opts()).unwrap();
        assert!(sol.value.abs() < 1e-12);
    }

    #[test]
    fn sweep_is_monotone_and_stabilizes() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0, 2.0], &[1.0, 1.0, 0.5]).unwrap();
        let fam = pairwise_family(constant(1.0));
        let sweep = truncation_sweep(&rho, &fam, 3, 6, 1e-12, &opts()).unwrap();
        for w in sweep.rows.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
        // constant cost stabilizes at ⌈ρ(Ω)⌉ = 3
        assert_eq!(sweep.stabilized_at, Some(4));
    }

    #[test]
    fn sweep_constant_for_coulomb_mass_two() {
        let rho = DiscreteDensity::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]], vec![1.0, 1.0])
            .unwrap();
        let fam = pairwise_family(riesz(1.0).unwrap());
        let sweep = truncation_sweep(&rho, &fam, 2, 5, 1e-12, &opts()).unwrap();
        for row in &sweep.rows {
            assert!((row.value - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_backend_matches_float() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0, 2.3], &[1.0, 0.8, 0.7]).unwrap();
        let fam = pairwise_family(riesz(1.0).unwrap());
        let float = solve_primal(&rho, 4, &fam, &opts()).unwrap();
        let exact = solve_primal(
            &rho,
            4,
            &fam,
            &SolveOptions {
                exact: true,
                ..opts()
            },
        )
        .unwrap();
        assert!((float.value - exact.value).abs() < 1e-9);
    }

    #[test]
    fn convex_hull_blocks_are_canonically_optimal() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0, 2.0], &[1.0, 1.0, 0.5]).unwrap();
        let fam = pairwise_family(constant(1.0));
        let sol = solve_primal(&rho, 4, &fam, &opts()).unwrap();
        let report = convex_hull_check(&sol.plan, &rho, &fam, &opts()).unwrap();
        assert!(report.ok, "max gap {}", report.max_gap);
        assert_eq!(report.blocks.len(), 2); // layers 2 and 3
    }

    #[test]
    fn stability_lower_bound_holds() {
        // c2 >= 0 gives A = B = 0, so every optimum must be >= 0
        let rho = DiscreteDensity::new_1d(&[0.0, 0.7, 1.9], &[0.9, 0.7, 0.6]).unwrap();
        let fam = pairwise_family(riesz(2.0).unwrap());
        let stab = fam.stability.unwrap();
        let sol = solve_primal(&rho, 4, &fam, &opts()).unwrap();
        assert!(sol.value >= -stab.a - stab.b * rho.total_mass() - 1e-12);
    }
}
