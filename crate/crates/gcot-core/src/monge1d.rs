//! The one-dimensional Monge construction for convex decreasing kernels.
//!
//! For an atomless density of mass `n + η` the line splits into intervals of
//! alternating mass `η, 1−η, η, ...`; the increasing map `T` moving one unit
//! of mass (`ρ((x, T(x))) = 1`) generates a deterministic plan supported on
//! the particle numbers `{n, n+1}` (just `{n}` for integer mass), which is
//! optimal for every pairwise kernel `w(|x−y|)` with `w` convex and
//! decreasing.

use crate::cost::PairwiseCost;
use crate::density::DiscreteDensity;
use crate::lp::{self, SolveOptions};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Piecewise-constant density on the line; atomless by construction.
#[derive(Debug, Clone)]
pub struct GridDensity1D {
    breakpoints: Vec<f64>,
    densities: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridDensity1D {
    pub fn new(breakpoints: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || densities.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidDensity(
                "need n+1 breakpoints for n cells".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidDensity("breakpoints must increase strictly".into()));
        }
        if densities.iter().any(|&d| !d.is_finite() || d < 0.0) {
            return Err(Error::InvalidDensity("cell densities must be finite and >= 0".into()));
        }
        let mut g = Self { breakpoints, densities, cdf: Vec::new() };
        g.rebuild_cdf();
        if !(g.total_mass() > 0.0) {
            return Err(Error::InvalidDensity("zero-mass density".into()));
        }
        Ok(g)
    }

    /// Uniform density `level` on `[a, b]`.
    pub fn uniform(a: f64, b: f64, level: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![level])
    }

    pub(crate) fn rebuild_cdf(&mut self) {
        let mut cdf = vec![0.0];
        for (w, d) in self.breakpoints.windows(2).zip(&self.densities) {
            let last = *cdf.last().unwrap();
            cdf.push(last + d * (w[1] - w[0]));
        }
        self.cdf = cdf;
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn total_mass(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    /// Cumulative mass up to `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.breakpoints[0] {
            return 0.0;
        }
        if x >= *self.breakpoints.last().unwrap() {
            return self.total_mass();
        }
        let i = match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).unwrap())
        {
            Ok(i) => return self.cdf[i],
            Err(i) => i - 1,
        };
        self.cdf[i] + self.densities[i] * (x - self.breakpoints[i])
    }

    /// Leftmost preimage of the cumulative mass `q`: ties across
    /// zero-density plateaus resolve to the left endpoint, which makes the
    /// transport map a deterministic representative of its a.e. class.
    pub fn quantile(&self, q: f64) -> f64 {
        let total = self.total_mass();
        let q = q.clamp(0.0, total);
        let i = match self
            .cdf
            .binary_search_by(|c| c.partial_cmp(&q).unwrap())
        {
            Ok(i) => {
                // exact hit: walk back across flat (zero-mass) cells
                let mut i = i;
                while i > 0 && self.cdf[i - 1] == q {
                    i -= 1;
                }
                return self.breakpoints[i];
            }
            // cdf[i−1] < q < cdf[i]: the cell i−1 has positive density
            Err(i) => i - 1,
        };
        self.breakpoints[i] + (q - self.cdf[i]) / self.densities[i]
    }

    /// Mass of the open interval `(a, b)`; the measure is atomless so open
    /// and closed agree.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            0.0
        } else {
            self.cdf(b) - self.cdf(a)
        }
    }

    /// `∫ x dρ` over `[a, b]`, exact on the piecewise-constant cells.
    pub fn interval_moment(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for (w, &d) in self.breakpoints.windows(2).zip(&self.densities) {
            let lo = w[0].max(a);
            let hi = w[1].min(b);
            if hi > lo && d > 0.0 {
                total += d * 0.5 * (hi * hi - lo * lo);
            }
        }
        total
    }

    /// Support endpoints (first and last point with mass around them).
    pub fn support(&self) -> (f64, f64) {
        let lo = self.quantile(0.0);
        let mut hi = *self.breakpoints.last().unwrap();
        for (w, &d) in self.breakpoints.windows(2).zip(&self.densities).rev() {
            if d > 0.0 {
                hi = w[1];
                break;
            }
        }
        (lo, hi)
    }
}

/// Serialized form: `{schema, breakpoints, densities}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct GridDensityJson {
    pub schema: String,
    pub breakpoints: Vec<f64>,
    pub densities: Vec<f64>,
}

impl GridDensity1D {
    pub fn to_json(&self) -> GridDensityJson {
        GridDensityJson {
            schema: crate::SCHEMA.into(),
            breakpoints: self.breakpoints.clone(),
            densities: self.densities.clone(),
        }
    }

    pub fn from_json(json: GridDensityJson) -> Result<Self> {
        Self::new(json.breakpoints, json.densities)
    }
}

/// One deterministic block of the Monge plan: `particles` points coupled
/// through iterates of the unit-mass map over the base interval.
#[derive(Debug, Clone, Serialize)]
pub struct MongeBlock {
    pub particles: u32,
    /// Base interval carrying the block's mass.
    pub base: (f64, f64),
    pub mass: f64,
}

/// The 1D Monge plan: integer part `n`, fractional part `eta`, the
/// alternating cuts, a piecewise-linear representation of the unit-mass
/// map and the two pushforward blocks.
#[derive(Debug, Clone, Serialize)]
pub struct MongePlan1D {
    pub n: u32,
    pub eta: f64,
    pub cuts: Vec<f64>,
    /// Knots `(x, T(x))`; `T` is linear between consecutive knots.
    pub map_knots: Vec<(f64, f64)>,
    pub blocks: Vec<MongeBlock>,
}

const CUT_TOL: f64 = 1e-10;

/// Build the Monge plan of an atomless density. Non-integer mass produces
/// two blocks on `{n, n+1}`; integer mass a single canonical block.
pub fn build_monge_plan(rho: &GridDensity1D) -> Result<MongePlan1D> {
    let total = rho.total_mass();
    if !(total > 0.0) {
        return Err(Error::InvalidDensity("zero-mass density".into()));
    }
    let mut n = total.floor() as u32;
    let mut eta = total - n as f64;
    if eta < CUT_TOL {
        eta = 0.0;
    } else if eta > 1.0 - CUT_TOL {
        n += 1;
        eta = 0.0;
    }

    // cumulative targets η, 1, 1+η, 2, ... pin the alternating cuts
    let mut cuts = Vec::with_capacity(2 * n as usize);
    for j in 1..=(2 * n as usize) {
        let q = if j % 2 == 1 {
            ((j - 1) / 2) as f64 + eta
        } else {
            (j / 2) as f64
        };
        cuts.push(rho.quantile(q));
    }
    for w in cuts.windows(2) {
        if w[0] > w[1] + CUT_TOL {
            return Err(Error::Numerical("cuts are not monotone".into()));
        }
    }

    let (support_lo, support_hi) = rho.support();
    let mut blocks = Vec::new();
    if n >= 1 {
        blocks.push(MongeBlock {
            particles: n,
            base: (cuts[0], cuts[1]),
            mass: 1.0 - eta,
        });
    }
    if eta > 0.0 {
        let hi = if cuts.is_empty() { support_hi } else { cuts[0] };
        blocks.push(MongeBlock {
            particles: n + 1,
            base: (support_lo, hi),
            mass: eta,
        });
    }

    // the map lives where one more unit of mass fits to the right, i.e.
    // up to the cut at cumulative mass n−1+η
    let needs_map = n >= 2 || (n == 1 && eta > 0.0);
    let map_knots = if needs_map {
        transport_map_knots(rho, support_lo, cuts[cuts.len() - 2])
    } else {
        Vec::new()
    };

    Ok(MongePlan1D { n, eta, cuts, map_knots, blocks })
}

/// Knots of `T(x) = quantile(cdf(x) + 1)` on `[lo, hi]`: kinks happen at
/// density breakpoints and at their unit-mass preimages.
fn transport_map_knots(rho: &GridDensity1D, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut xs = vec![lo, hi];
    for &b in rho.breakpoints() {
        if b > lo && b < hi {
            xs.push(b);
        }
        let pre = rho.quantile(rho.cdf(b) - 1.0);
        if pre > lo && pre < hi {
            xs.push(pre);
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    xs.into_iter()
        .map(|x| (x, rho.quantile(rho.cdf(x) + 1.0)))
        .collect()
}

impl MongePlan1D {
    /// Evaluate the unit-mass map from its knots.
    pub fn map(&self, x: f64) -> f64 {
        let k = &self.map_knots;
        assert!(!k.is_empty(), "map undefined for plans without a block of 2+ particles");
        if x <= k[0].0 {
            return k[0].1;
        }
        if x >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|(kx, _)| *kx <= x) - 1;
        let (x0, y0) = k[i];
        let (x1, y1) = k[i + 1];
        if x1 == x0 {
            y0
        } else {
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    }
}

/// Convex decreasing kernels for the 1D theory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel1D {
    /// `1/r`.
    InvDist,
    /// `r^{−s}`, `s > 0`.
    Riesz(f64),
    /// `e^{−r}`.
    ExpDecay,
}

impl Kernel1D {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Kernel1D::InvDist => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / r
                }
            }
            Kernel1D::Riesz(s) => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    r.powf(-s)
                }
            }
            Kernel1D::ExpDecay => (-r).exp(),
        }
    }

    pub fn to_pairwise(self) -> Result<PairwiseCost> {
        match self {
            Kernel1D::InvDist => crate::cost::riesz(1.0),
            Kernel1D::Riesz(s) => crate::cost::riesz(s),
            Kernel1D::ExpDecay => Ok(PairwiseCost::ExpDecay),
        }
    }

    /// Parse `inv:r`, `riesz:s=2`, `exp`.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec {
            "inv:r" | "inv" => Ok(Kernel1D::InvDist),
            "exp" => Ok(Kernel1D::ExpDecay),
            other => {
                if let Some(rest) = other.strip_prefix("riesz:s=") {
                    let s: f64 = rest
                        .parse()
                        .map_err(|_| Error::InvalidCost(format!("bad riesz exponent `{rest}`")))?;
                    if s <= 0.0 {
                        return Err(Error::InvalidCost("1D kernel needs s > 0".into()));
                    }
                    Ok(Kernel1D::Riesz(s))
                } else {
                    Err(Error::InvalidCost(format!("unknown 1D kernel `{other}`")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MongeCost {
    pub value: f64,
    /// Difference between the refined and unrefined composite quadrature.
    pub quadrature_error: f64,
}

/// Average cost of the Monge plan by composite Gauss-Legendre quadrature
/// (order 16) over the smoothness cells of the composed map, with one
/// refinement to estimate the error.
pub fn monge_cost(rho: &GridDensity1D, plan: &MongePlan1D, kernel: Kernel1D, quad_tol: f64) -> Result<MongeCost> {
    let mut value = 0.0;
    let mut err = 0.0;
    for block in &plan.blocks {
        if block.particles < 2 || block.mass <= 0.0 {
            continue;
        }
        let (coarse, fine) = block_cost(rho, block, kernel)?;
        value += fine;
        err += (fine - coarse).abs();
    }
    if err > quad_tol {
        return Err(Error::Numerical(format!(
            "quadrature error estimate {err:.3e} above requested {quad_tol:.3e}"
        )));
    }
    Ok(MongeCost { value, quadrature_error: err })
}

fn block_cost(rho: &GridDensity1D, block: &MongeBlock, kernel: Kernel1D) -> Result<(f64, f64)> {
    let p = block.particles as usize;
    let (a, b) = block.base;
    // subdivision: density breakpoints and the preimages of each iterate
    let mut xs = vec![a, b];
    for &bp in rho.breakpoints() {
        for i in 0..p {
            let pre = rho.quantile(rho.cdf(bp) - i as f64);
            if pre > a && pre < b {
                xs.push(pre);
            }
        }
    }
    xs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    xs.dedup_by(|x, y| (*x - *y).abs() < 1e-13);

    let integrand = |x: f64| -> Result<f64> {
        let mut ts = Vec::with_capacity(p);
        let mut t = x;
        ts.push(t);
        for _ in 1..p {
            t = rho.quantile(rho.cdf(t) + 1.0);
            ts.push(t);
        }
        let mut s = 0.0;
        for i in 0..p {
            for j in (i + 1)..p {
                let w = kernel.value(ts[j] - ts[i]);
                if !w.is_finite() {
                    return Err(Error::Numerical(
                        "kernel diverged inside a block; cuts are inconsistent".into(),
                    ));
                }
                s += w;
            }
        }
        Ok(s)
    };

    let (nodes, weights) = gauss_legendre_16();
    let mut coarse = 0.0;
    let mut fine = 0.0;
    for cell in xs.windows(2) {
        let (lo, hi) = (cell[0], cell[1]);
        if hi - lo < 1e-15 {
            continue;
        }
        // constant density on the cell: zero-density cells carry no mass
        let dens = rho.interval_mass(lo, hi) / (hi - lo);
        if dens == 0.0 {
            continue;
        }
        coarse += dens * gl_integral(lo, hi, &nodes, &weights, &integrand)?;
        let mid = 0.5 * (lo + hi);
        fine += dens
            * (gl_integral(lo, mid, &nodes, &weights, &integrand)?
                + gl_integral(mid, hi, &nodes, &weights, &integrand)?);
    }
    Ok((coarse, fine))
}

fn gl_integral<F: Fn(f64) -> Result<f64>>(
    lo: f64,
    hi: f64,
    nodes: &[f64],
    weights: &[f64],
    f: &F,
) -> Result<f64> {
    let c = 0.5 * (hi - lo);
    let m = 0.5 * (hi + lo);
    let mut s = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        s += w * f(m + c * x)?;
    }
    Ok(c * s)
}

/// Nodes and weights of 16-point Gauss-Legendre on [-1, 1], generated by
/// Newton iteration on the Legendre recurrence.
fn gauss_legendre_16() -> (Vec<f64>, Vec<f64>) {
    let n = 16usize;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre P_n and its derivative at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Outcome of checking the Monge value against the discretized LP.
#[derive(Debug, Clone, Serialize)]
pub struct CrosscheckReport {
    pub monge_value: f64,
    pub lp_value: f64,
    pub gap: f64,
    pub lp_support: Vec<u32>,
    /// LP support contained in `{n, n+1}`.
    pub support_ok: bool,
    pub cells: usize,
}

/// Discretize the density into `cells` atoms at cell barycenters, solve the
/// transport LP and compare with the quadrature value of the Monge plan.
pub fn crosscheck_vs_lp(
    rho: &GridDensity1D,
    kernel: Kernel1D,
    cells: usize,
    nmax: u32,
    opts: &SolveOptions,
) -> Result<CrosscheckReport> {
    if cells < 2 {
        return Err(Error::InvalidDensity("need at least two cells".into()));
    }
    let plan = build_monge_plan(rho)?;
    let monge = monge_cost(rho, &plan, kernel, 1e-6)?;

    let (lo, hi) = rho.support();
    let step = (hi - lo) / cells as f64;
    let mut points = Vec::new();
    let mut masses = Vec::new();
    for i in 0..cells {
        let a = lo + i as f64 * step;
        let b = a + step;
        let mass = rho.interval_mass(a, b);
        if mass > 1e-14 {
            points.push(rho.interval_moment(a, b) / mass);
            masses.push(mass);
        }
    }
    let atoms = DiscreteDensity::new_1d(&points, &masses)?;
    let fam = crate::cost::pairwise_family(kernel.to_pairwise()?);
    let sol = lp::solve_primal(&atoms, nmax, &fam, opts)?;
    let lp_support = sol.particle_support(opts.support_tol);
    let allowed: Vec<u32> = if plan.eta > 0.0 {
        vec![plan.n, plan.n + 1]
    } else {
        vec![plan.n]
    };
    let support_ok = lp_support.iter().all(|n| allowed.contains(n));
    Ok(CrosscheckReport {
        monge_value: monge.value,
        lp_value: sol.value,
        gap: (monge.value - sol.value).abs(),
        lp_support,
        support_ok,
        cells,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InterlacingReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// The interlacing inequality: merging two point collections and
/// re-splitting them into odd/even positions can only lower the summed
/// pair energy, `c(Y) + c(Z) >= c(X_odd) + c(X_even)`.
pub fn interlacing_check(y: &[f64], z: &[f64], kernel: Kernel1D) -> InterlacingReport {
    let pair_energy = |pts: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                s += kernel.value((pts[j] - pts[i]).abs());
            }
        }
        s
    };
    let mut merged: Vec<f64> = y.iter().chain(z).copied().collect();
    merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let odd: Vec<f64> = merged.iter().copied().step_by(2).collect();
    let even: Vec<f64> = merged.iter().copied().skip(1).step_by(2).collect();
    let lhs = pair_energy(y) + pair_energy(z);
    let rhs = pair_energy(&odd) + pair_energy(&even);
    InterlacingReport {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-9,
    }
}
