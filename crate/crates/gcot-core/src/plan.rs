//! Occupation-indexed grand-canonical plans.
//!
//! A symmetric n-particle measure on an atomic support is determined by its
//! values on multisets of atoms. We store one weight per occupation vector
//! (how many particles sit on each atom); the dictionary to ordered-tuple
//! measures is that a multiset `o` with `n = Σ o_i` particles spreads its
//! weight uniformly over the `n!/∏ o_i!` orderings. All formulas downstream
//! (costs, marginals, entropies) are stated in this reduced form, which
//! keeps the Boltzmann `n!` bookkeeping out of every computation.

use crate::density::DiscreteDensity;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Tolerance on the total weight of a normalized plan.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Default tolerance on the induced-density residual in validation.
pub const DENSITY_TOL: f64 = 1e-9;

/// Integer occupation vector over a density's support atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Occupation(pub Vec<u32>);

impl Occupation {
    pub fn empty(m: usize) -> Self {
        Occupation(vec![0; m])
    }

    /// Single particle at atom `i`.
    pub fn singleton(m: usize, i: usize) -> Self {
        let mut o = vec![0; m];
        o[i] = 1;
        Occupation(o)
    }

    /// Indicator occupation of an index set.
    pub fn from_set(m: usize, set: &[usize]) -> Self {
        let mut o = vec![0; m];
        for &i in set {
            o[i] += 1;
        }
        Occupation(o)
    }

    /// Total particle number.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Componentwise sum (disjoint union of the two multisets).
    pub fn merge(&self, other: &Occupation) -> Occupation {
        Occupation(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference; caller guarantees `other <= self`.
    pub fn minus(&self, other: &Occupation) -> Occupation {
        Occupation(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Projection onto a sorted subset of atom indices.
    pub fn project(&self, kept: &[usize]) -> Occupation {
        Occupation(kept.iter().map(|&i| self.0[i]).collect())
    }

    /// `∏ o_i!` as a float; the multiset symmetry factor.
    pub fn multiplicity_factorial(&self) -> f64 {
        self.0.iter().map(|&k| factorial(k)).product()
    }
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k as u64).map(|i| i as f64).product()
}

pub(crate) fn ln_factorial(k: u32) -> f64 {
    (1..=k as u64).map(|i| (i as f64).ln()).sum()
}

/// A grand-canonical plan: sparse nonnegative weights on occupations,
/// normalized to total weight one, vanishing above the truncation `nmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct GCPlan {
    weights: BTreeMap<Occupation, f64>,
    nmax: u32,
    support_size: usize,
}

/// Serialized form: `{nmax, entries: [{occ, w}]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct PlanJson {
    pub schema: String,
    pub nmax: u32,
    pub entries: Vec<PlanEntryJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlanEntryJson {
    pub occ: Vec<u32>,
    pub w: f64,
}

impl GCPlan {
    /// Normalize raw weights into a plan. Weights below `1e-15` of the total
    /// are dropped; the rest are divided by their sum, which must be positive.
    pub fn new(support_size: usize, nmax: u32, weights: BTreeMap<Occupation, f64>) -> Result<Self> {
        let mut clean = BTreeMap::new();
        let mut total = 0.0;
        for (o, w) in weights {
            if o.len() != support_size {
                return Err(Error::InvalidPlan(format!(
                    "occupation length {} does not match support size {support_size}",
                    o.len()
                )));
            }
            if !w.is_finite() || w < -1e-9 {
                return Err(Error::InvalidPlan(format!("weight {w} is invalid")));
            }
            if o.total() > nmax {
                return Err(Error::InvalidPlan(format!(
                    "occupation with {} particles exceeds nmax = {nmax}",
                    o.total()
                )));
            }
            if w > 0.0 {
                total += w;
                clean.insert(o, w);
            }
        }
        if !(total > 0.0) {
            return Err(Error::InvalidPlan("not a probability: total weight is zero".into()));
        }
        clean.retain(|_, w| *w / total > 1e-15);
        let total: f64 = clean.values().sum();
        for w in clean.values_mut() {
            *w /= total;
        }
        Ok(Self {
            weights: clean,
            nmax,
            support_size,
        })
    }

    /// The vacuum plan: all weight on the empty occupation.
    pub fn vacuum(support_size: usize) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(Occupation::empty(support_size), 1.0);
        Self {
            weights,
            nmax: 0,
            support_size,
        }
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    pub fn nmax(&self) -> u32 {
        self.nmax
    }

    pub fn weights(&self) -> &BTreeMap<Occupation, f64> {
        &self.weights
    }

    pub fn weight(&self, o: &Occupation) -> f64 {
        self.weights.get(o).copied().unwrap_or(0.0)
    }

    /// Induced one-body density `ρ_i = Σ_o o_i w(o)`.
    pub fn density(&self) -> Vec<f64> {
        plan_density(self, self.support_size)
    }

    /// Particle numbers carrying weight above `tol`.
    pub fn particle_support(&self, tol: f64) -> Vec<u32> {
        let dist = plan_mass_distribution(self);
        dist.iter()
            .enumerate()
            .filter(|(_, &l)| l > tol)
            .map(|(n, _)| n as u32)
            .collect()
    }

    /// Expected cost `Σ_o w(o) c(o)` for per-occupation values.
    pub fn expected<F: Fn(&Occupation) -> f64>(&self, f: F) -> f64 {
        self.weights.iter().map(|(o, w)| w * f(o)).sum()
    }

    pub fn to_json(&self) -> PlanJson {
        PlanJson {
            schema: crate::SCHEMA.into(),
            nmax: self.nmax,
            entries: self
                .weights
                .iter()
                .map(|(o, &w)| PlanEntryJson { occ: o.0.clone(), w })
                .collect(),
        }
    }

    pub fn from_json(json: &PlanJson, support_size: usize) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for e in &json.entries {
            weights.insert(Occupation(e.occ.clone()), e.w);
        }
        GCPlan::new(support_size, json.nmax, weights)
    }
}

/// Induced density of a plan: component `i` is `Σ_o o_i w(o)`, the sum of
/// `n` times the first marginal of each n-particle layer.
pub fn plan_density(plan: &GCPlan, m: usize) -> Vec<f64> {
    let mut rho = vec![0.0; m];
    for (o, &w) in plan.weights() {
        for (r, &k) in rho.iter_mut().zip(&o.0) {
            *r += w * k as f64;
        }
    }
    rho
}

/// Distribution of the particle number: `λ_n = Σ_{|o|=n} w(o)`, indexed by n
/// from 0 to the largest occupied layer.
pub fn plan_mass_distribution(plan: &GCPlan) -> Vec<f64> {
    let top = plan
        .weights()
        .keys()
        .map(Occupation::total)
        .max()
        .unwrap_or(0) as usize;
    let mut lambda = vec![0.0; top + 1];
    for (o, &w) in plan.weights() {
        lambda[o.total() as usize] += w;
    }
    lambda
}

/// Truncated Poisson state of a density, with the discarded tail mass.
#[derive(Debug, Clone)]
pub struct PoissonPlan {
    pub plan: GCPlan,
    /// `1 − e^{−ρ(Ω)} Σ_{n≤nmax} ρ(Ω)^n/n!`, the probability mass beyond
    /// the truncation before renormalization.
    pub tail_mass: f64,
}

/// Poisson grand-canonical state of `rho`, truncated at `nmax` layers and
/// renormalized. Occupation weights are `e^{−ρ(Ω)} ∏ ρ_i^{o_i}/o_i!`.
/// Exact membership in the transport polytope requires the full state, so
/// the discarded tail is reported alongside.
pub fn poisson_plan(rho: &DiscreteDensity, nmax: u32) -> Result<PoissonPlan> {
    let m = rho.len();
    let total = rho.total_mass();
    if total == 0.0 {
        return Ok(PoissonPlan {
            plan: GCPlan::vacuum(m),
            tail_mass: 0.0,
        });
    }
    let mut weights = BTreeMap::new();
    let mut occ = vec![0u32; m];
    fill_poisson(rho, nmax, 0, 0, 1.0, &mut occ, &mut weights);
    let plan = GCPlan::new(m, nmax, weights)?;
    // closed-form tail of the Poisson counting distribution
    let mut kept = 0.0;
    let mut term = (-total).exp();
    for n in 0..=nmax {
        if n > 0 {
            term *= total / n as f64;
        }
        kept += term;
    }
    Ok(PoissonPlan {
        plan,
        tail_mass: (1.0 - kept).max(0.0),
    })
}

fn fill_poisson(
    rho: &DiscreteDensity,
    nmax: u32,
    site: usize,
    used: u32,
    partial: f64,
    occ: &mut [u32],
    out: &mut BTreeMap<Occupation, f64>,
) {
    if site == rho.len() {
        out.insert(Occupation(occ.to_vec()), partial);
        return;
    }
    let mut factor = 1.0;
    for k in 0..=(nmax - used) {
        if k > 0 {
            factor *= rho.mass(site) / k as f64;
            if factor == 0.0 {
                break;
            }
        }
        occ[site] = k;
        fill_poisson(rho, nmax, site + 1, used + k, partial * factor, occ, out);
    }
    occ[site] = 0;
}

/// A plan restricted to a subset of atoms, together with the indices kept.
#[derive(Debug, Clone)]
pub struct LocalizationResult {
    pub plan: GCPlan,
    pub kept_indices: Vec<usize>,
}

/// Localization of a plan to the atoms in `kept`: everything outside is
/// marginalized out, `w_loc(o_A) = Σ_{o_B} w(o_A ⊕ o_B)`. The induced
/// density of the result is the restriction of the original density.
pub fn localize(plan: &GCPlan, kept: &[usize]) -> Result<LocalizationResult> {
    if kept.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidPlan("kept indices must be sorted and unique".into()));
    }
    if kept.iter().any(|&i| i >= plan.support_size()) {
        return Err(Error::InvalidPlan("kept index out of range".into()));
    }
    let mut weights: BTreeMap<Occupation, f64> = BTreeMap::new();
    for (o, &w) in plan.weights() {
        *weights.entry(o.project(kept)).or_insert(0.0) += w;
    }
    Ok(LocalizationResult {
        plan: GCPlan::new(kept.len(), plan.nmax(), weights)?,
        kept_indices: kept.to_vec(),
    })
}

/// Validation report of a plan against a target density.
#[derive(Debug, Clone, Serialize)]
pub struct PlanReport {
    /// `|Σ w − 1|` before any renormalization was applied.
    pub normalization_residual: f64,
    /// Sup-norm of the induced density minus the target.
    pub density_residual: f64,
    /// Smallest and largest particle number carrying weight.
    pub support: (u32, u32),
    /// Whether both residuals pass their tolerances.
    pub ok: bool,
}

/// Check a plan against `rho`: normalization, density residual in sup norm
/// and the particle-number support interval.
pub fn validate_plan(plan: &GCPlan, rho: &DiscreteDensity, tol: f64) -> Result<PlanReport> {
    if plan.support_size() != rho.len() {
        return Err(Error::InvalidPlan(format!(
            "plan over {} atoms, density has {}",
            plan.support_size(),
            rho.len()
        )));
    }
    let total: f64 = plan.weights().values().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidPlan("not a probability: total weight is zero".into()));
    }
    let normalization_residual = (total - 1.0).abs();
    let induced = plan.density();
    let density_residual = induced
        .iter()
        .zip(rho.masses())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let ns: Vec<u32> = plan.weights().keys().map(Occupation::total).collect();
    let support = (
        ns.iter().copied().min().unwrap_or(0),
        ns.iter().copied().max().unwrap_or(0),
    );
    Ok(PlanReport {
        normalization_residual,
        density_residual,
        support,
        ok: normalization_residual <= NORMALIZATION_TOL && density_residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan_from(entries: &[(&[u32], f64)]) -> GCPlan {
        let m = entries[0].0.len();
        let nmax = entries
            .iter()
            .map(|(o, _)| o.iter().sum::<u32>())
            .max()
            .unwrap();
        let mut w = BTreeMap::new();
        for (o, v) in entries {
            w.insert(Occupation(o.to_vec()), *v);
        }
        GCPlan::new(m, nmax, w).unwrap()
    }

    #[test]
    fn density_of_deterministic_pair() {
        let p = plan_from(&[(&[1, 1], 1.0)]);
        assert_eq!(p.density(), vec![1.0, 1.0]);
    }

    #[test]
    fn density_of_vacuum() {
        let p = GCPlan::vacuum(2);
        assert_eq!(p.density(), vec![0.0, 0.0]);
        assert_eq!(plan_mass_distribution(&p), vec![1.0]);
    }

    #[test]
    fn density_is_linear_in_weights() {
        let p = plan_from(&[(&[2, 0], 0.5), (&[0, 0], 0.5)]);
        assert_eq!(p.density(), vec![1.0, 0.0]);
    }

    #[test]
    fn mass_distribution_zero_or_one_agent() {
        // the unique plan with mass 0.4 supported on {0,1}
        let p = plan_from(&[(&[0, 0], 0.6), (&[1, 0], 0.25), (&[0, 1], 0.15)]);
        let lambda = plan_mass_distribution(&p);
        assert!((lambda[0] - 0.6).abs() < 1e-15);
        assert!((lambda[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn poisson_single_site() {
        // mass 1, nmax 2: weights ∝ (1, 1, 1/2)
        let rho = DiscreteDensity::new_1d(&[0.0], &[1.0]).unwrap();
        let pp = poisson_plan(&rho, 2).unwrap();
        let lambda = plan_mass_distribution(&pp.plan);
        let norm = 1.0 + 1.0 + 0.5;
        assert!((lambda[0] - 1.0 / norm).abs() < 1e-14);
        assert!((lambda[1] - 1.0 / norm).abs() < 1e-14);
        assert!((lambda[2] - 0.5 / norm).abs() < 1e-14);
        let expected_tail = 1.0 - (-1.0f64).exp() * 2.5;
        assert!((pp.tail_mass - expected_tail).abs() < 1e-14);
    }

    #[test]
    fn poisson_of_zero_density_is_vacuum() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
        let pp = poisson_plan(&rho, 3).unwrap();
        assert_eq!(pp.plan, GCPlan::vacuum(2));
        assert_eq!(pp.tail_mass, 0.0);
    }

    #[test]
    fn poisson_two_sites_nmax_one() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        let pp = poisson_plan(&rho, 1).unwrap();
        // raw weights (e^-2, e^-2, e^-2) on {∅, {1}, {2}} renormalize to thirds
        for w in pp.plan.weights().values() {
            assert!((w - 1.0 / 3.0).abs() < 1e-14);
        }
        assert_eq!(pp.plan.weights().len(), 3);
    }

    #[test]
    fn poisson_tail_decreases_with_nmax() {
        let rho = DiscreteDensity::new_1d(&[0.0, 2.0], &[0.7, 0.8]).unwrap();
        let mut prev = f64::INFINITY;
        for nmax in 0..8 {
            let tail = poisson_plan(&rho, nmax).unwrap().tail_mass;
            assert!(tail <= prev + 1e-15);
            prev = tail;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn localize_canonical_pair() {
        let p = plan_from(&[(&[1, 1], 1.0)]);
        let loc = localize(&p, &[0]).unwrap();
        assert_eq!(loc.plan.weight(&Occupation(vec![1])), 1.0);
        assert_eq!(plan_mass_distribution(&loc.plan), vec![0.0, 1.0]);
    }

    #[test]
    fn localize_keep_all_is_identity() {
        let p = plan_from(&[(&[1, 0], 0.3), (&[0, 2], 0.7)]);
        let loc = localize(&p, &[0, 1]).unwrap();
        assert_eq!(loc.plan, p);
    }

    #[test]
    fn localized_poisson_is_poisson_of_restriction() {
        // independence of Poisson marks, verified by enumeration at m=3
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0, 2.0], &[0.3, 0.5, 0.2]).unwrap();
        let pp = poisson_plan(&rho, 6).unwrap();
        let loc = localize(&pp.plan, &[0, 2]).unwrap();
        let restricted = rho.restrict(&[0, 2]).unwrap();
        let direct = poisson_plan(&restricted, 6).unwrap();
        for (o, &w) in direct.plan.weights() {
            // truncation tails differ between the two routes
            assert!((loc.plan.weight(o) - w).abs() < 1e-3, "occ {o:?}");
        }
    }

    #[test]
    fn validate_flags_perturbation() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[0.25, 0.15]).unwrap();
        let good = plan_from(&[(&[0, 0], 0.6), (&[1, 0], 0.25), (&[0, 1], 0.15)]);
        let rep = validate_plan(&good, &rho, DENSITY_TOL).unwrap();
        assert!(rep.ok);
        assert_eq!(rep.support, (0, 1));

        let bad = plan_from(&[(&[0, 0], 0.6), (&[1, 0], 0.27), (&[0, 1], 0.13)]);
        let rep = validate_plan(&bad, &rho, DENSITY_TOL).unwrap();
        assert!(!rep.ok);
        assert!(rep.density_residual > 0.01);
    }

    #[test]
    fn empty_plan_is_rejected() {
        let err = GCPlan::new(2, 1, BTreeMap::new());
        assert!(matches!(err, Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn plan_json_roundtrip() {
        let p = plan_from(&[(&[1, 0], 0.4), (&[0, 1], 0.6)]);
        let js = serde_json::to_string(&p.to_json()).unwrap();
        let back: PlanJson = serde_json::from_str(&js).unwrap();
        assert_eq!(GCPlan::from_json(&back, 2).unwrap(), p);
    }
}
