use gcot_core::cost::{pairwise_family, PairwiseCost};
use gcot_core::density::DiscreteDensity;
use gcot_core::entropic;
use gcot_core::lp::SolveOptions;
use gcot_core::monge1d::{self, GridDensity1D, Kernel1D};
use gcot_core::plan::poisson_plan;
use std::sync::Arc;

fn main() {
    let o = SolveOptions::default();
    // crosscheck gap vs cells
    let rho = GridDensity1D::uniform(0.0, 2.0, 1.0).unwrap();
    for cells in [8, 16, 32, 64] {
        let c = monge1d::crosscheck_vs_lp(&rho, Kernel1D::InvDist, cells, 4, &o).unwrap();
        println!("cells {cells}: lp {:.9} gap {:.3e} support {:?}", c.lp_value, c.gap, c.lp_support);
    }

    // F(T large) vs Poisson cost for exp kernel
    let rho2 = DiscreteDensity::new_1d(&[0.0, 1.0, 2.0], &[0.4, 0.5, 0.3]).unwrap();
    let fam = pairwise_family(PairwiseCost::ExpDecay);
    let pp = poisson_plan(&rho2, 10).unwrap().plan;
    let prepared = fam.prepare(rho2.points());
    let gibbs_cost = pp.expected(|occ| prepared.cost(occ));
    for t in [16.0, 256.0] {
        let sol = entropic::solve_entropic(&rho2, 10, &fam, t, 1e-9, 100_000, &o).unwrap();
        println!("T {t}: F {:.9} vs G(c) {:.9} diff {:.3e}", sol.free_energy, gibbs_cost, sol.free_energy - gibbs_cost);
    }

    // coulomb mass-2 at small T: concentration on the pair
    let rho3 = DiscreteDensity::new(3, vec![vec![0.0;3], vec![1.0,0.0,0.0]], vec![0.9, 0.9]).unwrap();
    let famc = pairwise_family(gcot_core::cost::riesz(1.0).unwrap());
    let sol = entropic::solve_entropic(&rho3, 4, &famc, 0.02, 1e-8, 100_000, &o).unwrap();
    println!("mass-1.8 coulomb at T=0.02: weights {:?}", sol.plan.weights());

    // block approximation harmonic-variant bound
    let pts = [0.0, 0.06, 5.0, 5.06];
    let rhob = DiscreteDensity::new_1d(&pts, &[0.3, 0.4, 0.35, 0.25]).unwrap();
    use gcot_core::plan::{GCPlan, Occupation};
    use std::collections::BTreeMap;
    let mut w = BTreeMap::new();
    w.insert(Occupation(vec![1, 0, 1, 0]), 0.3);
    w.insert(Occupation(vec![0, 1, 0, 1]), 0.2);
    w.insert(Occupation(vec![1, 1, 1, 1]), 0.05);
    w.insert(Occupation(vec![0, 1, 1, 0]), 0.25);
    w.insert(Occupation(vec![0, 0, 1, 1]), 0.2);
    let plan = GCPlan::new(4, 4, w).unwrap();
    let harm = pairwise_family(PairwiseCost::Radial(Arc::new(|r| r * r)));
    let prep = harm.prepare(rhob.points());
    let pc = plan.expected(|occ| prep.cost(occ));
    let r2 = entropic::two_agent_distribution(&plan);
    let r2mass: f64 = (0..4).map(|i| (i..4).map(|j| r2[i][j]).sum::<f64>()).sum();
    for h in [1.0, 0.25] {
        let bl = entropic::block_approximation(&plan, rhob.points(), h).unwrap();
        let bc = bl.expected(|occ| prep.cost(occ));
        let bound = h * h * r2mass + h.sqrt() * pc;
        println!("h {h}: gap {:.4e} vs h^2 r2 + sqrt(h) P(c) = {:.4e} ratio {:.3}", (bc - pc).abs(), bound, (bc-pc).abs()/bound);
    }

    // diamond optimizer two-agent matrix
    let inst = gcot_core::halffill::diamond_instance(0.7).unwrap();
    let sol = gcot_core::lp::solve_primal(&inst.density(), 6, &famc, &o).unwrap();
    let mat = entropic::two_agent_distribution(&sol.plan);
    println!("diamond rho2[0][1] = {}, rho2[2][3] = {}, rho2[0][2] = {}", mat[0][1], mat[2][3], mat[0][2]);

    // critical eta probe
    let rho4 = DiscreteDensity::new_1d(&[0.0, 1.0], &[0.4, 0.4]).unwrap();
    let eta = entropic::critical_eta_probe(&rho4, 2, &famc, 0.5, 8, &o).unwrap();
    println!("critical eta = {eta:.4} (cap {:.4})", 2.0 / 0.8);
}
