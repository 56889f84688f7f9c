//! Closed-form bounds on the particle-number support of optimizers and the
//! c-monotonicity checker. These are verifiers: the LP says what the
//! optimizer is, this module says what it is allowed to be.

use crate::cost::{CostFamily, PairwiseCost};
use crate::density::DiscreteDensity;
use crate::plan::{GCPlan, Occupation};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Which theorem produced a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    Bounded,
    Triangle,
    Doubling,
    Coulomb,
}

/// Interval `[lo, hi]` that must contain every occupied particle number.
#[derive(Debug, Clone, Serialize)]
pub struct SupportBound {
    pub lo: f64,
    pub hi: f64,
    pub kind: BoundKind,
}

impl SupportBound {
    /// Integers inside the interval (never below zero).
    pub fn integer_support(&self) -> Vec<u32> {
        let lo = self.lo.max(0.0).ceil() as u32;
        let hi = if self.hi < 0.0 { 0 } else { self.hi.floor() as u32 };
        (lo..=hi).collect()
    }

    pub fn contains(&self, n: u32) -> bool {
        let x = n as f64;
        x >= self.lo - 1e-9 && x <= self.hi + 1e-9
    }

    pub fn contains_support(&self, support: &[u32]) -> bool {
        support.iter().all(|&n| self.contains(n))
    }

    /// Whether `self` is contained in `other` (as intervals).
    pub fn subset_of(&self, other: &SupportBound) -> bool {
        self.lo >= other.lo - 1e-12 && self.hi <= other.hi + 1e-12
    }
}

/// Support bound for a pairwise cost pinched between `0 < m_lo <= c2 <= M_hi`:
/// `[(m/M)⌊ρ(Ω)⌋, 1 + (M/m)(⌈ρ(Ω)⌉ − 1)]`. Mass at most one collapses to
/// the zero-or-one-agent region `{0, 1}`.
pub fn bound_bounded(mass: f64, m_lo: f64, big_m: f64) -> Result<SupportBound> {
    if !(0.0 < m_lo && m_lo <= big_m && big_m.is_finite()) {
        return Err(Error::InvalidCost("need 0 < m <= M < ∞".into()));
    }
    if mass <= 1.0 {
        return Ok(SupportBound { lo: 0.0, hi: 1.0, kind: BoundKind::Bounded });
    }
    Ok(SupportBound {
        lo: m_lo / big_m * mass.floor(),
        hi: 1.0 + big_m / m_lo * (mass.ceil() - 1.0),
        kind: BoundKind::Bounded,
    })
}

/// Support bound when `1/c2` obeys a triangle inequality with constant `Z`:
/// `[(⌊ρ(Ω)⌋+1)/(2Z+1), (2Z+1)(⌈ρ(Ω)⌉−1)]`. For Riesz kernels
/// `Z = max(1, 2^{s−1})`.
pub fn bound_triangle(mass: f64, z: f64) -> Result<SupportBound> {
    if !(z > 0.0) {
        return Err(Error::InvalidCost("triangle constant must be positive".into()));
    }
    if mass <= 1.0 {
        return Ok(SupportBound { lo: 0.0, hi: 1.0, kind: BoundKind::Triangle });
    }
    Ok(SupportBound {
        lo: (mass.floor() + 1.0) / (2.0 * z + 1.0),
        hi: (2.0 * z + 1.0) * (mass.ceil() - 1.0),
        kind: BoundKind::Triangle,
    })
}

/// The square-root bound specific to the kernel `1/r`, together with the
/// admissible integer support.
#[derive(Debug, Clone, Serialize)]
pub struct CoulombBound {
    pub bound: SupportBound,
    pub integer_support: Vec<u32>,
}

/// Support bound for the Coulomb kernel `1/|x−y|`:
/// `[⌊ρ⌋ − √(8⌊ρ⌋+9)/2 + 3/2, ⌈ρ⌉ + √(8⌈ρ⌉−7)/2 − 1/2]`.
/// At mass exactly 2 the interval `[1,3]` sharpens to `{2}`: a mean of 2
/// with support in {1,2,3} would need both 1 and 3 occupied, and the pair
/// (N,K) = (3,1) fails the strict form of the pair inequality.
pub fn bound_coulomb(mass: f64) -> Result<CoulombBound> {
    if !(mass > 1.0) {
        return Err(Error::InvalidCost("coulomb bound needs mass > 1".into()));
    }
    let fl = mass.floor();
    let ce = mass.ceil();
    let bound = SupportBound {
        lo: fl - 0.5 * (8.0 * fl + 9.0).sqrt() + 1.5,
        hi: ce + 0.5 * (8.0 * ce - 7.0).sqrt() - 0.5,
        kind: BoundKind::Coulomb,
    };
    let integer_support = if (mass - 2.0).abs() <= 1e-12 {
        vec![2]
    } else {
        bound.integer_support().into_iter().filter(|&n| n >= 1).collect()
    };
    Ok(CoulombBound { bound, integer_support })
}

/// Pair admissibility `(N − K)² <= N + K` satisfied by any two occupied
/// layers of a Coulomb optimizer.
pub fn coulomb_pair_admissible(n: u32, k: u32) -> bool {
    let d = n as f64 - k as f64;
    d * d <= (n + k) as f64
}

/// Bound and side estimates for asymptotically doubling kernels.
#[derive(Debug, Clone, Serialize)]
pub struct DoublingBound {
    pub bound: SupportBound,
    /// `ρ(Ω) M(r)/(1−κ)`, the ceiling on any realized pair interaction.
    pub diagonal_estimate: f64,
    /// Minimal inter-particle separation implied by the diagonal estimate
    /// for kernels diverging at the origin, when invertible analytically.
    pub min_separation: Option<f64>,
}

/// Support bound `[0, 1 + ρ(Ω) max(2/C², M(r)/((1−κ) m(2R₀)))]` for an
/// asymptotically doubling kernel. `m(·)`, `M(·)` are the radial envelope
/// values, supplied analytically (for a radial decreasing kernel both equal
/// `w(·)`). `kernel` is only used to invert the diagonal estimate into a
/// separation radius.
#[allow(clippy::too_many_arguments)]
pub fn bound_doubling(
    rho: &DiscreteDensity,
    r: f64,
    kappa: f64,
    c_doubling: f64,
    _r0: f64,
    m_of_2r0: f64,
    m_upper_of_r: f64,
    kernel: Option<&PairwiseCost>,
) -> Result<DoublingBound> {
    if !((0.0..1.0).contains(&kappa)) {
        return Err(Error::InvalidCost("need 0 <= κ < 1".into()));
    }
    if !(r > 0.0 && c_doubling > 0.0 && m_of_2r0 > 0.0 && m_upper_of_r > 0.0) {
        return Err(Error::InvalidCost("doubling-bound inputs must be positive".into()));
    }
    let mass = rho.total_mass();
    let hi = 1.0
        + mass
            * f64::max(
                2.0 / (c_doubling * c_doubling),
                m_upper_of_r / ((1.0 - kappa) * m_of_2r0),
            );
    let diagonal_estimate = mass * m_upper_of_r / (1.0 - kappa);
    let min_separation = kernel.and_then(|k| invert_radial(k, diagonal_estimate));
    Ok(DoublingBound {
        bound: SupportBound { lo: 0.0, hi, kind: BoundKind::Doubling },
        diagonal_estimate,
        min_separation,
    })
}

/// Radius below which the kernel exceeds `level`, for kernels with an
/// elementary inverse.
fn invert_radial(kernel: &PairwiseCost, level: f64) -> Option<f64> {
    if !(level > 0.0) {
        return None;
    }
    match kernel {
        PairwiseCost::Coulomb { d } if *d >= 3 => Some(level.powf(-1.0 / (*d as f64 - 2.0))),
        PairwiseCost::Riesz { s } if *s > 0.0 => Some(level.powf(-1.0 / s)),
        _ => None,
    }
}

/// Smallest radius around the density's barycenter leaving outside mass at
/// most 1/2. Balls are centered at the barycenter since the construction
/// leaves the center unspecified.
pub fn r0_radius(rho: &DiscreteDensity) -> f64 {
    let center = rho.barycenter();
    let mut by_dist: Vec<(f64, f64)> = rho
        .points()
        .iter()
        .zip(rho.masses())
        .map(|(p, &m)| (crate::density::dist(p, &center), m))
        .collect();
    by_dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total = rho.total_mass();
    let mut inside = 0.0;
    for (d, m) in by_dist {
        inside += m;
        if total - inside <= 0.5 {
            return d;
        }
    }
    0.0
}

/// Largest ball mass `sup_i ρ(B_r(x_i))`, the κ of the doubling theorem,
/// approximated by centering on support atoms.
pub fn kappa(rho: &DiscreteDensity, r: f64) -> f64 {
    (0..rho.len())
        .map(|i| {
            (0..rho.len())
                .filter(|&j| rho.distance(i, j) <= r)
                .map(|j| rho.mass(j))
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// One failed exchange inequality.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityViolation {
    pub first: Vec<u32>,
    pub second: Vec<u32>,
    pub moved_from_first: Vec<u32>,
    pub moved_from_second: Vec<u32>,
    /// `c(a'+b') + c(rest) − c(a) − c(b)`, negative by more than the
    /// tolerance.
    pub deficit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub pairs_checked: usize,
    pub splits_checked: usize,
    pub violations: Vec<MonotonicityViolation>,
    pub ok: bool,
}

/// Tolerance under which an exchange deficit counts as a violation.
pub const MONOTONICITY_TOL: f64 = 1e-9;

/// Check grand-canonical c-monotonicity of a plan: for pairs of support
/// configurations, swapping any sub-multisets between them must not lower
/// the combined cost. Pairs beyond `samples` and splits of combined size
/// beyond `split_cap` are subsampled with the seeded generator.
pub fn check_c_monotonicity(
    plan: &GCPlan,
    cost: &CostFamily,
    rho: &DiscreteDensity,
    samples: usize,
    seed: u64,
    split_cap: u32,
) -> Result<MonotonicityReport> {
    if plan.support_size() != rho.len() {
        return Err(Error::InvalidPlan("plan/density support mismatch".into()));
    }
    let prepared = cost.prepare(rho.points());
    let support: Vec<&Occupation> = plan.weights().keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..support.len() {
        for j in i..support.len() {
            pairs.push((i, j));
        }
    }
    if pairs.len() > samples {
        let mut picked = Vec::with_capacity(samples);
        for _ in 0..samples {
            picked.push(pairs[rng.gen_range(0..pairs.len())]);
        }
        pairs = picked;
    }

    let mut splits_checked = 0usize;
    let mut violations = Vec::new();
    for &(ia, ib) in &pairs {
        let a = support[ia];
        let b = support[ib];
        let base = prepared.cost(a) + prepared.cost(b);
        let exhaustive = a.total() + b.total() <= split_cap;
        let check = |pa: &Occupation, pb: &Occupation, splits: &mut usize, out: &mut Vec<MonotonicityViolation>| {
            let merged = pa.merge(pb);
            let rest = a.minus(pa).merge(&b.minus(pb));
            let lhs = prepared.cost(&merged) + prepared.cost(&rest);
            *splits += 1;
            if lhs < base - MONOTONICITY_TOL {
                out.push(MonotonicityViolation {
                    first: a.0.clone(),
                    second: b.0.clone(),
                    moved_from_first: pa.0.clone(),
                    moved_from_second: pb.0.clone(),
                    deficit: lhs - base,
                });
            }
        };
        if exhaustive {
            for pa in &sub_occupations(a) {
                for pb in &sub_occupations(b) {
                    check(pa, pb, &mut splits_checked, &mut violations);
                }
            }
        } else {
            for _ in 0..1024 {
                let pa = random_sub(a, &mut rng);
                let pb = random_sub(b, &mut rng);
                check(&pa, &pb, &mut splits_checked, &mut violations);
            }
        }
        if violations.len() > 32 {
            break;
        }
    }
    let ok = violations.is_empty();
    Ok(MonotonicityReport {
        pairs_checked: pairs.len(),
        splits_checked,
        violations,
        ok,
    })
}

/// All componentwise sub-occupations of `o`.
fn sub_occupations(o: &Occupation) -> Vec<Occupation> {
    let mut out = vec![Occupation::empty(o.len())];
    for (i, &cap) in o.0.iter().enumerate() {
        if cap == 0 {
            continue;
        }
        let mut next = Vec::with_capacity(out.len() * (cap as usize + 1));
        for base in &out {
            for k in 0..=cap {
                let mut v = base.0.clone();
                v[i] = k;
                next.push(Occupation(v));
            }
        }
        out = next;
    }
    out
}

fn random_sub(o: &Occupation, rng: &mut ChaCha8Rng) -> Occupation {
    Occupation(o.0.iter().map(|&c| rng.gen_range(0..=c)).collect())
}

/// Two-species energy with flipped mutual sign:
/// `W(X;Y) = Σ c2 pairs in X + Σ c2 pairs in Y − Σ cross`. The exchange
/// inequality of c-monotonicity is exactly sub-additivity of `W` under
/// splitting.
pub fn charged_cost(x: &[Vec<f64>], y: &[Vec<f64>], c2: &PairwiseCost) -> f64 {
    let pair_sum = |pts: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                s += c2.eval(&pts[i], &pts[j]);
            }
        }
        s
    };
    let mut cross = 0.0;
    for xi in x {
        for yk in y {
            cross += c2.eval(xi, yk);
        }
    }
    pair_sum(x) + pair_sum(y) - cross
}
