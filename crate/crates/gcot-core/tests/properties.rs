//! Property suites for the spec invariants: plan bookkeeping, localization
//! algebra, cost splitting, LP structure (sub-additivity, convexity, exact
//! backend parity), the 1D interlacing inequality and the Monge/LP
//! agreement, and the entropic inequalities.

use gcot_core::cost::{pairwise_family, riesz, PairwiseCost};
use gcot_core::density::DiscreteDensity;
use gcot_core::entropic;
use gcot_core::lp::{self, SolveOptions};
use gcot_core::monge1d::{self, GridDensity1D, Kernel1D};
use gcot_core::plan::{localize, plan_density, plan_mass_distribution, poisson_plan, GCPlan, Occupation};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn opts() -> SolveOptions {
    SolveOptions::default()
}

/// Random sparse plan on `m` sites with occupation numbers up to 2.
fn arb_plan(m: usize) -> impl Strategy<Value = GCPlan> {
    let entry = (proptest::collection::vec(0u32..=2, m), 0.01f64..1.0);
    proptest::collection::vec(entry, 1..6).prop_map(move |entries| {
        let mut weights = BTreeMap::new();
        for (occ, w) in entries {
            weights.insert(Occupation(occ), w);
        }
        // keep the vacuum so the map is never empty after dedup
        weights.entry(Occupation::empty(m)).or_insert(0.1);
        GCPlan::new(m, 2 * m as u32, weights).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_bookkeeping(plan in arb_plan(3)) {
        let total: f64 = plan.weights().values().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        let lambda = plan_mass_distribution(&plan);
        let avg_n: f64 = lambda.iter().enumerate().map(|(n, &l)| n as f64 * l).sum();
        let density_mass: f64 = plan.density().iter().sum();
        prop_assert!((avg_n - density_mass).abs() <= 1e-12);
    }

    #[test]
    fn localization_composes_and_restricts(plan in arb_plan(4)) {
        // nested localizations equal localization by the intersection
        let ab = localize(&plan, &[0, 1, 3]).unwrap();
        // indices of {0,3} inside the kept set {0,1,3}
        let nested = localize(&ab.plan, &[0, 2]).unwrap();
        let direct = localize(&plan, &[0, 3]).unwrap();
        // equal as measures; summation order differs by an ulp
        prop_assert_eq!(nested.plan.weights().len(), direct.plan.weights().len());
        for (o, &w) in direct.plan.weights() {
            prop_assert!((nested.plan.weight(o) - w).abs() <= 1e-12);
        }

        // density of a localization is the restriction of the density
        let full = plan_density(&plan, 4);
        let loc_density = direct.plan.density();
        prop_assert!((loc_density[0] - full[0]).abs() <= 1e-12);
        prop_assert!((loc_density[1] - full[3]).abs() <= 1e-12);
    }

    #[test]
    fn pairwise_cost_splits_disjoint_unions(
        xs in proptest::collection::vec(-3.0f64..3.0, 4),
        a in proptest::collection::vec(0u32..=2, 4),
        b in proptest::collection::vec(0u32..=2, 4),
    ) {
        // distinct-enough points; kernel finite on the diagonal
        let mut points: Vec<Vec<f64>> = Vec::new();
        for (i, x) in xs.iter().enumerate() {
            points.push(vec![x + i as f64 * 7.0]);
        }
        let fam = pairwise_family(PairwiseCost::ExpDecay);
        let prep = fam.prepare(&points);
        let a = Occupation(a);
        let b = Occupation(b);
        let mut cross = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                cross += a.0[i] as f64
                    * b.0[j] as f64
                    * PairwiseCost::ExpDecay.eval(&points[i], &points[j]);
            }
        }
        let lhs = prep.cost(&a.merge(&b));
        let rhs = prep.cost(&a) + prep.cost(&b) + cross;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn poisson_tail_vanishes_monotonically(masses in proptest::collection::vec(0.05f64..0.8, 2..4)) {
        let positions: Vec<f64> = (0..masses.len()).map(|i| i as f64).collect();
        let rho = DiscreteDensity::new_1d(&positions, &masses).unwrap();
        let mut prev = f64::INFINITY;
        for nmax in 0..10 {
            let tail = poisson_plan(&rho, nmax).unwrap().tail_mass;
            prop_assert!(tail <= prev + 1e-15);
            prev = tail;
        }
    }

    #[test]
    fn interlacing_inequality(
        y in proptest::collection::vec(-4.0f64..4.0, 1..4),
        z in proptest::collection::vec(-4.0f64..4.0, 1..4),
    ) {
        for kernel in [Kernel1D::ExpDecay, Kernel1D::InvDist] {
            // keep 1/r finite: nudge collisions apart
            let mut y = y.clone();
            let mut z = z.clone();
            for (i, v) in y.iter_mut().enumerate() {
                *v += 1e-3 * (i as f64 + 1.0);
            }
            for (i, v) in z.iter_mut().enumerate() {
                *v -= 1e-3 * (i as f64 + 1.0);
            }
            let rep = monge1d::interlacing_check(&y, &z, kernel);
            prop_assert!(rep.holds, "kernel {kernel:?}: {} < {}", rep.lhs, rep.rhs);
        }
    }

    #[test]
    fn pinsker_inequality(plan in arb_plan(3), masses in proptest::collection::vec(0.1f64..0.9, 3)) {
        let positions = [0.0, 1.0, 2.0];
        let rho = DiscreteDensity::new_1d(&positions, &masses).unwrap();
        let reference = poisson_plan(&rho, 6).unwrap().plan;
        let h = entropic::relative_entropy(&plan, &reference);
        if h.is_finite() {
            let l1 = entropic::l1_distance(&plan, &reference);
            prop_assert!(l1 <= (2.0 * h).sqrt() + 1e-12);
        }
    }

    #[test]
    fn entropy_decomposition_on_random_plans(plan in arb_plan(3)) {
        let density = plan.density();
        prop_assume!(density.iter().all(|&d| d > 0.0));
        let positions = [0.0, 1.0, 2.0];
        let rho = DiscreteDensity::new_1d(&positions, &density).unwrap();
        let check = entropic::max_entropy_check(&plan, &rho);
        prop_assert!(check.decomposition_residual <= 1e-10);
        prop_assert!(check.plan_entropy <= check.bound + 1e-10);
        let growth = entropic::entropy_growth_check(&plan, &rho);
        prop_assert!(growth.holds);
    }
}

proptest! {
    // LP-backed properties are slower; fewer cases
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn subadditivity_for_pairwise_costs(
        m1 in proptest::collection::vec(0.2f64..0.8, 2),
        m2 in proptest::collection::vec(0.2f64..0.8, 2),
        gap in 0.5f64..3.0,
    ) {
        // disjoint supports; C(ρ1+ρ2) <= C(ρ1) + C(ρ2) + ∬ c2 dρ1 dρ2
        let fam = pairwise_family(riesz(1.0).unwrap());
        let p1 = [0.0, 1.0];
        let p2 = [1.0 + gap, 2.0 + gap];
        let rho1 = DiscreteDensity::new_1d(&p1, &m1).unwrap();
        let rho2 = DiscreteDensity::new_1d(&p2, &m2).unwrap();
        let all: Vec<f64> = p1.iter().chain(&p2).copied().collect();
        let masses: Vec<f64> = m1.iter().chain(&m2).copied().collect();
        let rho = DiscreteDensity::new_1d(&all, &masses).unwrap();

        let nmax = 4;
        let v1 = lp::solve_primal(&rho1, nmax, &fam, &opts()).unwrap().value;
        let v2 = lp::solve_primal(&rho2, nmax, &fam, &opts()).unwrap().value;
        let v = lp::solve_primal(&rho, 2 * nmax, &fam, &opts()).unwrap().value;
        let mut cross = 0.0;
        let kernel = riesz(1.0).unwrap();
        for (x, mx) in p1.iter().zip(&m1) {
            for (y, my) in p2.iter().zip(&m2) {
                cross += mx * my * kernel.eval(&[*x], &[*y]);
            }
        }
        prop_assert!(v <= v1 + v2 + cross + 1e-9, "{v} > {v1} + {v2} + {cross}");
    }

    #[test]
    fn convexity_in_the_density(
        m1 in proptest::collection::vec(0.2f64..0.9, 3),
        m2 in proptest::collection::vec(0.2f64..0.9, 3),
        t in 0.1f64..0.9,
    ) {
        let fam = pairwise_family(riesz(1.0).unwrap());
        let positions = [0.0, 0.8, 2.1];
        let rho1 = DiscreteDensity::new_1d(&positions, &m1).unwrap();
        let rho2 = DiscreteDensity::new_1d(&positions, &m2).unwrap();
        let mix: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let rho_mix = DiscreteDensity::new_1d(&positions, &mix).unwrap();
        let nmax = 3;
        let v1 = lp::solve_primal(&rho1, nmax, &fam, &opts()).unwrap().value;
        let v2 = lp::solve_primal(&rho2, nmax, &fam, &opts()).unwrap().value;
        let vm = lp::solve_primal(&rho_mix, nmax, &fam, &opts()).unwrap().value;
        prop_assert!(vm <= t * v1 + (1.0 - t) * v2 + 1e-9);
    }

    #[test]
    fn exact_backend_reproduces_float_optima(
        masses in proptest::collection::vec(0.2f64..0.9, 3),
        spread in 0.5f64..2.0,
    ) {
        let positions: Vec<f64> = (0..3).map(|i| i as f64 * spread).collect();
        let rho = DiscreteDensity::new_1d(&positions, &masses).unwrap();
        let fam = pairwise_family(riesz(1.0).unwrap());
        let float = lp::solve_primal(&rho, 3, &fam, &opts()).unwrap();
        let exact = lp::solve_primal(
            &rho,
            3,
            &fam,
            &SolveOptions { exact: true, ..opts() },
        )
        .unwrap();
        prop_assert!((float.value - exact.value).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn monge_cost_agrees_with_lp(
        levels in proptest::collection::vec(0.4f64..1.4, 2..4),
        width in 0.6f64..1.2,
        inv in proptest::bool::ANY,
    ) {
        let n_cells = levels.len();
        let breakpoints: Vec<f64> = (0..=n_cells).map(|i| i as f64 * width).collect();
        let rho = GridDensity1D::new(breakpoints, levels).unwrap();
        prop_assume!(rho.total_mass() <= 2.6 && rho.total_mass() > 0.3);
        let kernel = if inv { Kernel1D::InvDist } else { Kernel1D::ExpDecay };
        let plan = monge1d::build_monge_plan(&rho).unwrap();
        let nmax = plan.n + 2;
        let check = monge1d::crosscheck_vs_lp(&rho, kernel, 36, nmax, &opts()).unwrap();
        // the Monge value is the continuum optimum; the discretized LP sits
        // within the discretization error
        prop_assert!(check.gap <= 0.06, "gap {} for kernel {kernel:?}", check.gap);
        prop_assert!(check.support_ok, "support {:?}", check.lp_support);
        let allowed: Vec<u32> = if plan.eta > 0.0 { vec![plan.n, plan.n + 1] } else { vec![plan.n] };
        prop_assert!(check.lp_support.iter().all(|n| allowed.contains(n)));
    }
}
