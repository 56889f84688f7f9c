//! Half-filling experiments: every atom carries mass 1/2, the particle-hole
//! symmetry reduces the transport LP to a minimum over finitely many
//! extreme points `p^I = (δ-configuration on I + δ-configuration on I^c)/2`,
//! and the whole problem becomes an enumeration with an associative
//! min-reduction.

use crate::cost::PairwiseCost;
use crate::density::{dist, DiscreteDensity};
use crate::par;
use crate::{Error, Result};
use serde::Serialize;

/// Points at half filling with a pairwise kernel.
#[derive(Debug, Clone)]
pub struct HalfFillInstance {
    points: Vec<Vec<f64>>,
    fills: Vec<f64>,
    kernel: PairwiseCost,
    pair: Vec<f64>,
}

/// The unordered pair `{I, I^c}` backing one symmetric extreme point,
/// stored as the explicit index set `I`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtremePoint {
    pub indices: Vec<usize>,
}

impl ExtremePoint {
    pub fn complement(&self, m: usize) -> Vec<usize> {
        (0..m).filter(|i| !self.indices.contains(i)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HalfFillSolution {
    pub value: f64,
    /// All extreme points within 1e-12 of the minimum.
    pub minimizers: Vec<ExtremePoint>,
    /// Single minimizer isolated by more than 1e-9 from the runner-up.
    pub unique: bool,
    /// Distance from the minimum to the next distinct value.
    pub margin: f64,
    pub candidates: usize,
}

impl HalfFillInstance {
    /// Exact half filling: every site at mass 1/2.
    pub fn new(points: Vec<Vec<f64>>, kernel: PairwiseCost) -> Result<Self> {
        let fills = vec![0.5; points.len()];
        Self::with_fills(points, fills, kernel)
    }

    /// General Bernoulli fills in (0,1).
    pub fn with_fills(points: Vec<Vec<f64>>, fills: Vec<f64>, kernel: PairwiseCost) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidDensity("need at least two sites".into()));
        }
        if fills.len() != points.len() || fills.iter().any(|&f| !(0.0 < f && f < 1.0)) {
            return Err(Error::InvalidDensity("fills must lie in (0,1)".into()));
        }
        let m = points.len();
        let mut pair = vec![0.0; m * m];
        for i in 0..m {
            for j in (i + 1)..m {
                let v = kernel.eval(&points[i], &points[j]);
                pair[i * m + j] = v;
                pair[j * m + i] = v;
            }
        }
        Ok(Self { points, fills, kernel, pair })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn kernel(&self) -> &PairwiseCost {
        &self.kernel
    }

    pub fn density(&self) -> DiscreteDensity {
        DiscreteDensity::new(self.points[0].len(), self.points.clone(), self.fills.clone())
            .expect("validated at construction")
    }

    /// Interaction energy of the configuration occupying exactly `set`.
    pub fn configuration_energy(&self, set: &[usize]) -> f64 {
        let m = self.len();
        let mut s = 0.0;
        for (a, &i) in set.iter().enumerate() {
            for &j in &set[a + 1..] {
                s += self.pair[i * m + j];
            }
        }
        s
    }

    /// Cost of the symmetric extreme point `p^I`: half the energy of the
    /// configuration on `I` plus half the energy on the complement. The
    /// value depends only on the unordered pair `{I, I^c}`.
    pub fn extreme_point_cost(&self, i_set: &[usize]) -> f64 {
        let comp: Vec<usize> = (0..self.len()).filter(|i| !i_set.contains(i)).collect();
        0.5 * self.configuration_energy(i_set) + 0.5 * self.configuration_energy(&comp)
    }
}

/// Candidate extreme points at exact half filling: index sets with
/// `2 <= |I| <= m/2` (down to `|I| = 1` when `m < 4`, where pairs do not
/// exist), deduplicated against complements when `|I| = m/2`. Sizes 0 and
/// 1 are excluded for strictly positive kernels: the zero-or-one-agent
/// rule forbids the empty side and the complement bound kills singletons.
pub fn enumerate_extreme_points(m: usize) -> Vec<ExtremePoint> {
    let half = m / 2;
    let lo = if half >= 2 { 2 } else { 1.min(half).max(1) };
    let mut out = Vec::new();
    for size in lo..=half {
        let mut set = Vec::with_capacity(size);
        collect_subsets(m, size, 0, &mut set, &mut out);
    }
    if m % 2 == 0 {
        // at |I| = m/2 the complement has the same size; keep the set
        // containing index 0 as the representative
        out.retain(|e| e.indices.len() != half || e.indices.contains(&0));
    }
    out
}

fn collect_subsets(m: usize, size: usize, start: usize, set: &mut Vec<usize>, out: &mut Vec<ExtremePoint>) {
    if set.len() == size {
        out.push(ExtremePoint { indices: set.clone() });
        return;
    }
    for i in start..m {
        if m - i < size - set.len() {
            break;
        }
        set.push(i);
        collect_subsets(m, size, i + 1, set, out);
        set.pop();
    }
}

/// Minimize over the extreme points of the half-filling polytope. The scan
/// is a parallel pure map with a deterministic index-ordered min-reduction.
pub fn solve_half_filling(inst: &HalfFillInstance) -> Result<HalfFillSolution> {
    let cands = enumerate_extreme_points(inst.len());
    if cands.is_empty() {
        return Err(Error::InvalidDensity("no extreme points to enumerate".into()));
    }
    let values = par::map_range(cands.len(), |i| inst.extreme_point_cost(&cands[i].indices));
    solution_from(&cands, &values)
}

fn solution_from(cands: &[ExtremePoint], values: &[f64]) -> Result<HalfFillSolution> {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return Err(Error::Numerical("all extreme points have infinite cost".into()));
    }
    let minimizers: Vec<ExtremePoint> = cands
        .iter()
        .zip(values)
        .filter(|(_, &v)| v <= best + 1e-12)
        .map(|(c, _)| c.clone())
        .collect();
    let margin = values
        .iter()
        .copied()
        .filter(|&v| v > best + 1e-12)
        .fold(f64::INFINITY, f64::min)
        - best;
    Ok(HalfFillSolution {
        value: best,
        unique: minimizers.len() == 1 && margin > 1e-9,
        minimizers,
        margin,
        candidates: cands.len(),
    })
}

/// Sequential twin of [`solve_half_filling`] for benchmarking the parallel
/// dispatch; results are identical.
pub fn solve_half_filling_seq(inst: &HalfFillInstance) -> Result<HalfFillSolution> {
    let cands = enumerate_extreme_points(inst.len());
    if cands.is_empty() {
        return Err(Error::InvalidDensity("no extreme points to enumerate".into()));
    }
    let values = par::map_range_seq(cands.len(), |i| inst.extreme_point_cost(&cands[i].indices));
    solution_from(&cands, &values)
}

/// The six-point diamond family: four vertices `(±t, 0)`, `(0, ±√(1−t²))`
/// forming a rhombus of side 1 with horizontal diagonal `2t`, plus two
/// outer points `(±(t+1), 0)` on the long axis at distance 1 from the
/// nearest vertex. Point order: `(t,0), (−t,0), (0,h), (0,−h), (t+1,0),
/// (−(t+1),0)`.
pub fn diamond_geometry(t: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0 < t && t < 1.0) {
        return Err(Error::InvalidDensity(format!("diamond parameter t = {t} outside (0,1)")));
    }
    let h = (1.0 - t * t).sqrt();
    Ok(vec![
        vec![t, 0.0],
        vec![-t, 0.0],
        vec![0.0, h],
        vec![0.0, -h],
        vec![t + 1.0, 0.0],
        vec![-(t + 1.0), 0.0],
    ])
}

/// The diamond instance with the `1/r` kernel.
pub fn diamond_instance(t: f64) -> Result<HalfFillInstance> {
    HalfFillInstance::new(diamond_geometry(t)?, crate::cost::riesz(1.0)?)
}

/// One column of the t-curve: extreme point, whether it is canonical
/// (`|I| = 3` splits the six points evenly) and its cost along the grid.
#[derive(Debug, Clone, Serialize)]
pub struct TCurveColumn {
    pub indices: Vec<usize>,
    pub canonical: bool,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TCurve {
    pub ts: Vec<f64>,
    pub columns: Vec<TCurveColumn>,
}

/// Cost of every diamond extreme point as a function of the half-diagonal
/// `t`: 25 columns (15 grand-canonical, 10 canonical).
pub fn tcurve(t_grid: &[f64]) -> Result<TCurve> {
    if t_grid.iter().any(|&t| !(0.0 < t && t < 1.0)) {
        return Err(Error::InvalidDensity("t grid must lie in (0,1)".into()));
    }
    let cands = enumerate_extreme_points(6);
    let mut columns: Vec<TCurveColumn> = cands
        .iter()
        .map(|c| TCurveColumn {
            indices: c.indices.clone(),
            canonical: c.indices.len() == 3,
            values: Vec::with_capacity(t_grid.len()),
        })
        .collect();
    for &t in t_grid {
        let inst = diamond_instance(t)?;
        let values = par::map_range(cands.len(), |i| inst.extreme_point_cost(&cands[i].indices));
        for (col, v) in columns.iter_mut().zip(values) {
            col.values.push(v);
        }
    }
    Ok(TCurve { ts: t_grid.to_vec(), columns })
}

/// Grid scan for the region where the configuration stays grand-canonical
/// when one point moves: true where the best `|I| = 2` extreme point beats
/// every canonical one.
#[derive(Debug, Clone, Serialize)]
pub struct RegionScan {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major `ys.len() × xs.len()` mask.
    pub mask: Vec<bool>,
    pub moved_index: usize,
}

pub fn region_scan(
    t: f64,
    moved_index: usize,
    xs: &[f64],
    ys: &[f64],
) -> Result<RegionScan> {
    let base = diamond_geometry(t)?;
    if moved_index >= base.len() {
        return Err(Error::InvalidDensity("moved index out of range".into()));
    }
    let cands = enumerate_extreme_points(6);
    let cells: Vec<(usize, usize)> = ys
        .iter()
        .enumerate()
        .flat_map(|(iy, _)| xs.iter().enumerate().map(move |(ix, _)| (iy, ix)))
        .collect();
    let mask = par::map_range(cells.len(), |c| {
        let (iy, ix) = cells[c];
        let mut pts = base.clone();
        pts[moved_index] = vec![xs[ix], ys[iy]];
        if pts.iter().enumerate().any(|(i, p)| i != moved_index && dist(p, &pts[moved_index]) < 1e-9) {
            return false;
        }
        let inst = match HalfFillInstance::new(pts, crate::cost::riesz(1.0).unwrap()) {
            Ok(i) => i,
            Err(_) => return false,
        };
        let mut best_gc = f64::INFINITY;
        let mut best_can = f64::INFINITY;
        for cand in &cands {
            let v = inst.extreme_point_cost(&cand.indices);
            if cand.indices.len() == 3 {
                best_can = best_can.min(v);
            } else {
                best_gc = best_gc.min(v);
            }
        }
        best_gc < best_can
    });
    Ok(RegionScan { xs: xs.to_vec(), ys: ys.to_vec(), mask, moved_index })
}

/// Recursive placement of diamond copies: level j places six copies of the
/// level j−1 cloud at `ℓ_j x_i + (previous points)`, cluster centers being
/// the six base points themselves. `scales` lists `ℓ_2 .. ℓ_k`.
pub fn multiscale_points(k: u32, scales: &[f64], t: f64) -> Result<Vec<Vec<f64>>> {
    if k == 0 {
        return Err(Error::InvalidDensity("multiscale level must be >= 1".into()));
    }
    if scales.len() != (k - 1) as usize {
        return Err(Error::InvalidDensity(format!(
            "level {k} needs {} scales, got {}",
            k - 1,
            scales.len()
        )));
    }
    if scales.windows(2).any(|w| w[0] >= w[1]) || scales.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidDensity("scales must be positive and strictly increasing".into()));
    }
    let base = diamond_geometry(t)?;
    let mut pts = base.clone();
    for &scale in scales {
        let mut next = Vec::with_capacity(pts.len() * 6);
        for center in &base {
            for p in &pts {
                next.push(vec![scale * center[0] + p[0], scale * center[1] + p[1]]);
            }
        }
        pts = next;
    }
    Ok(pts)
}

/// Validity of one multiscale level: the cluster-splitting term must
/// dominate the error of replacing inter-cluster interactions by their
/// center values.
#[derive(Debug, Clone, Serialize)]
pub struct LevelValidity {
    pub scale: f64,
    pub first_order_gap: f64,
    pub correction_bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiscaleSupport {
    pub n_minus: u64,
    pub n_plus: u64,
    /// Which of the six clusters take the heavier role at each level
    /// (identical across levels, the cluster problem is scale-free).
    pub cluster_assignment: Vec<usize>,
    pub levels: Vec<LevelValidity>,
    /// True when every level's first-order gap dominates its correction.
    pub scales_valid: bool,
}

/// Particle-number support of the multiscale construction, solved through
/// the restricted per-cluster recursion (2^6 patterns per level, never the
/// full 2^(6^k) enumeration). Each level decides, per cluster, whether it
/// holds the lighter or heavier sub-count; the leading-order cluster
/// problem is the six-point half-filling problem again, so the recursion
/// is `n_∓ ← {q n_+ + (6−q) n_−, q n_− + (6−q) n_+}` with `q` the size of
/// the base minimizer.
pub fn multiscale_support(k: u32, scales: &[f64], t: f64) -> Result<MultiscaleSupport> {
    let base = diamond_instance(t)?;
    let sol = solve_half_filling(&base)?;
    if !sol.unique {
        return Err(Error::Numerical(
            "base diamond minimizer is not unique; the recursion needs a single pattern".into(),
        ));
    }
    let pattern = &sol.minimizers[0].indices;
    // cluster-level problem over all 2^6 patterns (complement-deduped);
    // the optimum and its margin drive both the recursion and the
    // validity bound
    let (cluster_best, cluster_margin) = cluster_problem(&base)?;
    if cluster_best != *pattern {
        // same physics, but be explicit if the enumerations ever disagree
        return Err(Error::Numerical(format!(
            "cluster pattern {cluster_best:?} differs from base minimizer {pattern:?}"
        )));
    }
    let q = pattern.len() as u64;
    let mut n_minus = q;
    let mut n_plus = 6 - q;
    if n_minus > n_plus {
        std::mem::swap(&mut n_minus, &mut n_plus);
    }

    let pts = diamond_geometry(t)?;
    let base_diam = max_pairwise_distance(&pts);
    let mut levels = Vec::new();
    let mut prev_diam = base_diam;
    if k > 1 {
        multiscale_points(k, scales, t)?; // validates the scale list
        for &scale in scales {
            let delta = n_plus - n_minus;
            let first_order_gap = (delta * delta) as f64 * cluster_margin / scale;
            let correction_bound = center_replacement_error(&pts, scale, prev_diam, n_plus);
            levels.push(LevelValidity {
                scale,
                first_order_gap,
                correction_bound,
                ok: first_order_gap > correction_bound,
            });
            let a = q * n_plus + (6 - q) * n_minus;
            let b = q * n_minus + (6 - q) * n_plus;
            n_minus = a.min(b);
            n_plus = a.max(b);
            prev_diam = scale * base_diam + prev_diam;
        }
    }
    let scales_valid = levels.iter().all(|l| l.ok);
    Ok(MultiscaleSupport {
        n_minus,
        n_plus,
        cluster_assignment: pattern.clone(),
        levels,
        scales_valid,
    })
}

/// Minimize the particle-hole symmetrized energy over all 2^6 cluster
/// patterns `τ`, returning the minimizer and its margin to the next
/// distinct value.
fn cluster_problem(base: &HalfFillInstance) -> Result<(Vec<usize>, f64)> {
    let m = base.len();
    let mut best = f64::INFINITY;
    let mut best_set = Vec::new();
    let mut second = f64::INFINITY;
    for bits in 0u32..(1 << m) {
        let set: Vec<usize> = (0..m).filter(|i| bits >> i & 1 == 1).collect();
        if set.len() > m / 2 || (set.len() == m / 2 && m % 2 == 0 && !set.contains(&0) && !set.is_empty()) {
            continue; // complement representative
        }
        let v = base.extreme_point_cost(&set);
        if v < best - 1e-12 {
            second = best;
            best = v;
            best_set = set;
        } else if v > best + 1e-12 && v < second {
            second = v;
        }
    }
    if !best.is_finite() {
        return Err(Error::Numerical("cluster problem has no finite pattern".into()));
    }
    Ok((best_set, second - best))
}

fn max_pairwise_distance(pts: &[Vec<f64>]) -> f64 {
    let mut d = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            d = f64::max(d, dist(&pts[i], &pts[j]));
        }
    }
    d
}

/// Upper bound on the total error of replacing every inter-cluster pair
/// interaction `1/|y − y'|` by its center value `1/(ℓ d)`, over any
/// configuration with at most `per_cluster` particles per cluster.
fn center_replacement_error(centers: &[Vec<f64>], scale: f64, cluster_diam: f64, per_cluster: u64) -> f64 {
    let mut total = 0.0;
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let d = scale * dist(&centers[i], &centers[j]);
            if d <= cluster_diam {
                return f64::INFINITY; // clusters overlap; expansion invalid
            }
            total += (per_cluster * per_cluster) as f64 * (1.0 / (d - cluster_diam) - 1.0 / (d + cluster_diam));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{constant, riesz};

    #[test]
    fn diamond_side_lengths_are_one() {
        let pts = diamond_geometry(0.7).unwrap();
        assert_eq!(pts.len(), 6);
        // all four rhombus sides
        for (a, b) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            assert!((dist(&pts[a], &pts[b]) - 1.0).abs() < 1e-12);
        }
        // outer points sit at distance 1 from the nearest vertex
        assert!((dist(&pts[4], &pts[0]) - 1.0).abs() < 1e-12);
        assert!((dist(&pts[5], &pts[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extreme_point_count_for_six_sites() {
        // C(6,2) + C(6,3)/2 = 15 + 10
        assert_eq!(enumerate_extreme_points(6).len(), 25);
        // square: only the three balanced splits
        assert_eq!(enumerate_extreme_points(4).len(), 3);
        assert_eq!(enumerate_extreme_points(2).len(), 1);
    }

    #[test]
    fn empty_set_cost_is_quarter_of_full_ordered_sum() {
        let inst = diamond_instance(0.7).unwrap();
        let full = inst.configuration_energy(&[0, 1, 2, 3, 4, 5]);
        // p^∅ = ½ (E(∅) + E(everything))
        assert!((inst.extreme_point_cost(&[]) - 0.5 * full).abs() < 1e-12);
    }

    #[test]
    fn antipodal_pair_has_zero_cost() {
        let inst =
            HalfFillInstance::new(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], riesz(1.0).unwrap())
                .unwrap();
        assert_eq!(inst.extreme_point_cost(&[0]), 0.0);
        let sol = solve_half_filling(&inst).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.minimizers[0].indices, vec![0]);
    }

    #[test]
    fn diamond_optimum_is_a_unique_pair() {
        let inst = diamond_instance(0.7).unwrap();
        let sol = solve_half_filling(&inst).unwrap();
        assert!(sol.unique, "margin {}", sol.margin);
        assert_eq!(sol.minimizers[0].indices.len(), 2);
        // strictly below every canonical extreme point
        let best_canonical = enumerate_extreme_points(6)
            .iter()
            .filter(|c| c.indices.len() == 3)
            .map(|c| inst.extreme_point_cost(&c.indices))
            .fold(f64::INFINITY, f64::min);
        assert!(sol.value < best_canonical - 1e-6);
    }

    #[test]
    fn parallel_and_sequential_solutions_agree() {
        let inst = diamond_instance(0.37).unwrap();
        let a = solve_half_filling(&inst).unwrap();
        let b = solve_half_filling_seq(&inst).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.minimizers, b.minimizers);
    }

    #[test]
    fn constant_kernel_square_ties_all_balanced_splits() {
        let pts = vec![
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        let inst = HalfFillInstance::new(pts, constant(1.0)).unwrap();
        let sol = solve_half_filling(&inst).unwrap();
        let balanced: Vec<_> = sol.minimizers.iter().filter(|e| e.indices.len() == 2).collect();
        assert_eq!(balanced.len(), 3);
        assert!(!sol.unique);
    }

    #[test]
    fn tcurve_has_25_continuous_columns() {
        let grid: Vec<f64> = (4..20).map(|i| i as f64 / 20.0).collect();
        let curve = tcurve(&grid).unwrap();
        assert_eq!(curve.columns.len(), 25);
        assert_eq!(curve.columns.iter().filter(|c| c.canonical).count(), 10);
        for col in &curve.columns {
            for w in col.values.windows(2) {
                assert!((w[1] - w[0]).abs() < 1.5, "jump in column {:?}", col.indices);
            }
        }
    }

    #[test]
    fn tcurve_minimum_at_07_is_grand_canonical() {
        let curve = tcurve(&[0.7]).unwrap();
        let best = curve
            .columns
            .iter()
            .min_by(|a, b| a.values[0].partial_cmp(&b.values[0]).unwrap())
            .unwrap();
        assert!(!best.canonical);
        assert_eq!(best.indices.len(), 2);
    }

    #[test]
    fn multiscale_point_counts_and_cluster_gaps() {
        assert_eq!(multiscale_points(1, &[], 0.7).unwrap().len(), 6);
        let pts = multiscale_points(2, &[5.0], 0.7).unwrap();
        assert_eq!(pts.len(), 36);
        // min distance between different clusters stays above
        // ℓ·(min center distance) − base diameter
        let base = diamond_geometry(0.7).unwrap();
        let min_center = {
            let mut d = f64::INFINITY;
            for i in 0..6 {
                for j in (i + 1)..6 {
                    d = d.min(dist(&base[i], &base[j]));
                }
            }
            d
        };
        let diam = max_pairwise_distance(&base);
        let mut min_cross = f64::INFINITY;
        for i in 0..36 {
            for j in (i + 1)..36 {
                if i / 6 != j / 6 {
                    min_cross = min_cross.min(dist(&pts[i], &pts[j]));
                }
            }
        }
        assert!(min_cross >= 5.0 * min_center - diam - 1e-9);
    }

    #[test]
    fn multiscale_support_sequence() {
        let s1 = multiscale_support(1, &[], 0.7).unwrap();
        assert_eq!((s1.n_minus, s1.n_plus), (2, 4));
        let s2 = multiscale_support(2, &[5.0], 0.7).unwrap();
        assert_eq!((s2.n_minus, s2.n_plus), (16, 20));
        let s3 = multiscale_support(3, &[5.0, 25.0], 0.7).unwrap();
        assert_eq!((s3.n_minus, s3.n_plus), (104, 112));
    }

    #[test]
    fn region_scan_marks_the_baseline_position() {
        let xs = [1.7];
        let ys = [0.0];
        let scan = region_scan(0.7, 4, &xs, &ys).unwrap();
        assert_eq!(scan.mask, vec![true]);
    }
}
