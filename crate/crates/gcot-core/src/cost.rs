//! Cost families over occupations: pairwise kernels, center-of-mass costs,
//! stability bookkeeping and the CLI cost-spec grammar.

use crate::density::{dist, DiscreteDensity};
use crate::plan::Occupation;
use crate::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Two-body kernel `c2(x, y)`, symmetric in its arguments. `f64::INFINITY`
/// encodes a hard-core value; occupations that hit it are excluded from LP
/// variable sets and carry zero Gibbs weight.
#[derive(Clone)]
pub enum PairwiseCost {
    /// The Coulomb kernel of dimension `d`: `r^{2−d}` for d ≥ 3, `−log r`
    /// for d = 2, `−r` for d = 1.
    Coulomb { d: usize },
    /// Riesz kernel: `r^{−s}` for s > 0, `−log r` at s = 0, `−r^{|s|}`
    /// for s < 0.
    Riesz { s: f64 },
    /// `A/r^a − B/r^b` with `A, B > 0` and `a > b > 0`.
    LennardJones { a_coef: f64, b_coef: f64, a_exp: f64, b_exp: f64 },
    /// `−log r`.
    Log,
    /// The constant kernel, on the diagonal as well.
    Constant(f64),
    /// `e^{−r}`; finite on the diagonal.
    ExpDecay,
    /// Arbitrary radial kernel for tests and 1D cross-checks.
    Radial(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PairwiseCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Coulomb { d } => write!(f, "coulomb:d={d}"),
            Self::Riesz { s } => write!(f, "riesz:s={s}"),
            Self::LennardJones { a_coef, b_coef, a_exp, b_exp } => {
                write!(f, "lj:A={a_coef},B={b_coef},a={a_exp},b={b_exp}")
            }
            Self::Log => write!(f, "log"),
            Self::Constant(c) => write!(f, "const:c={c}"),
            Self::ExpDecay => write!(f, "exp"),
            Self::Radial(_) => write!(f, "radial(<fn>)"),
        }
    }
}

/// Coulomb kernel for ambient dimension `d`.
pub fn coulomb(d: usize) -> Result<PairwiseCost> {
    if d == 0 {
        return Err(Error::InvalidCost("coulomb dimension must be >= 1".into()));
    }
    Ok(PairwiseCost::Coulomb { d })
}

/// Riesz kernel with exponent `s`.
pub fn riesz(s: f64) -> Result<PairwiseCost> {
    if !s.is_finite() {
        return Err(Error::InvalidCost("riesz exponent must be finite".into()));
    }
    Ok(PairwiseCost::Riesz { s })
}

/// Lennard-Jones kernel `A/r^a − B/r^b`.
pub fn lennard_jones(a_coef: f64, b_coef: f64, a_exp: f64, b_exp: f64) -> Result<PairwiseCost> {
    if !(a_coef > 0.0 && b_coef > 0.0) {
        return Err(Error::InvalidCost("Lennard-Jones coefficients must be positive".into()));
    }
    if !(a_exp > b_exp && b_exp > 0.0) {
        return Err(Error::InvalidCost(
            "Lennard-Jones exponents must satisfy a > b > 0 (and b > d for integrable tails)".into(),
        ));
    }
    Ok(PairwiseCost::LennardJones { a_coef, b_coef, a_exp, b_exp })
}

/// Logarithmic kernel `−log r`.
pub fn log_cost() -> PairwiseCost {
    PairwiseCost::Log
}

/// Constant kernel.
pub fn constant(c: f64) -> PairwiseCost {
    PairwiseCost::Constant(c)
}

impl PairwiseCost {
    /// Kernel value at separation `r >= 0`.
    pub fn radial_value(&self, r: f64) -> f64 {
        match self {
            Self::Coulomb { d } => match d {
                1 => -r,
                2 => neg_log(r),
                _ => inv_pow(r, (*d as f64) - 2.0),
            },
            Self::Riesz { s } => {
                if *s > 0.0 {
                    inv_pow(r, *s)
                } else if *s == 0.0 {
                    neg_log(r)
                } else {
                    -r.powf(s.abs())
                }
            }
            Self::LennardJones { a_coef, b_coef, a_exp, b_exp } => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    a_coef / r.powf(*a_exp) - b_coef / r.powf(*b_exp)
                }
            }
            Self::Log => neg_log(r),
            Self::Constant(c) => *c,
            Self::ExpDecay => (-r).exp(),
            Self::Radial(f) => f(r),
        }
    }

    /// `c2(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.radial_value(dist(x, y))
    }

    /// Whether the kernel is `+∞` at zero separation, which forbids
    /// multiply-occupied atoms.
    pub fn diverges_on_diagonal(&self) -> bool {
        self.radial_value(0.0) == f64::INFINITY
    }

    /// Whether the kernel is nonnegative everywhere (grants stability
    /// constants A = B = 0 and the monotone-in-n property).
    pub fn is_nonnegative(&self) -> bool {
        match self {
            Self::Coulomb { d } => *d >= 3,
            Self::Riesz { s } => *s > 0.0,
            Self::Constant(c) => *c >= 0.0,
            Self::ExpDecay => true,
            _ => false,
        }
    }

    /// Whether the kernel is strictly positive everywhere.
    pub fn is_strictly_positive(&self) -> bool {
        match self {
            Self::Coulomb { d } => *d >= 3,
            Self::Riesz { s } => *s > 0.0,
            Self::Constant(c) => *c > 0.0,
            Self::ExpDecay => true,
            _ => false,
        }
    }

    /// The triangle constant Z with `1/c2(x,y) <= Z (1/c2(x,z) + 1/c2(z,y))`,
    /// when one is known: `max(1, 2^{s−1})` for Riesz-type kernels.
    pub fn triangle_constant(&self) -> Option<f64> {
        match self {
            Self::Coulomb { d } if *d >= 3 => Some(f64::max(1.0, 2f64.powf(*d as f64 - 3.0))),
            Self::Riesz { s } if *s > 0.0 => Some(f64::max(1.0, 2f64.powf(s - 1.0))),
            _ => None,
        }
    }
}

fn neg_log(r: f64) -> f64 {
    if r == 0.0 {
        f64::INFINITY
    } else {
        -r.ln()
    }
}

fn inv_pow(r: f64, p: f64) -> f64 {
    if r == 0.0 {
        f64::INFINITY
    } else {
        r.powf(-p)
    }
}

/// Stability constants `(A, B)` with `c_n >= −A − B n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    pub a: f64,
    pub b: f64,
}

/// A family of symmetric n-body costs evaluated on occupations.
#[derive(Debug, Clone)]
pub struct CostFamily {
    kind: CostKind,
    /// Value on the empty occupation.
    pub c0: f64,
    /// Known stability constants, if any; `None` skips lower-bound checks.
    pub stability: Option<Stability>,
    /// Whether `c_{n+1} >= c_n − A` holds with A = 0 (costs increase with
    /// the number of agents).
    pub monotone: bool,
}

#[derive(Clone)]
enum CostKind {
    /// `c_n = Σ_{j<k} c2(x_j, x_k)`, `c_0 = c_1 = 0`.
    Pairwise(PairwiseCost),
    /// `c_n = h(Σ x_j)` with the zero-agent value chosen so that plans with
    /// a fixed center of mass are exactly the minimizers.
    CenterOfMass {
        h: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        dim: usize,
    },
    /// `c_n = 0` for all n.
    Zero,
}

impl fmt::Debug for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pairwise(k) => write!(f, "pairwise({k:?})"),
            Self::CenterOfMass { dim, .. } => write!(f, "center_of_mass(dim={dim})"),
            Self::Zero => write!(f, "zero"),
        }
    }
}

/// Pairwise family generated by a two-body kernel: on an occupation `o`,
/// `cost = Σ_{i<j} o_i o_j c2(x_i, x_j) + Σ_i C(o_i, 2) c2(x_i, x_i)`.
pub fn pairwise_family(c2: PairwiseCost) -> CostFamily {
    let stability = if c2.is_nonnegative() {
        Some(Stability { a: 0.0, b: 0.0 })
    } else {
        None
    };
    let monotone = c2.is_nonnegative();
    CostFamily {
        kind: CostKind::Pairwise(c2),
        c0: 0.0,
        stability,
        monotone,
    }
}

/// The identically-zero family.
pub fn zero_family() -> CostFamily {
    CostFamily {
        kind: CostKind::Zero,
        c0: 0.0,
        stability: Some(Stability { a: 0.0, b: 0.0 }),
        monotone: true,
    }
}

/// Cost family `c_n(x_1..x_n) = h(Σ x_j)` for a convex `h` with gradient
/// `grad_h`, with `c_0 = h(X) − X·∇h(X)` at the first moment `X` of `rho`.
pub fn center_of_mass_family<H, G>(h: H, grad_h: G, rho: &DiscreteDensity) -> CostFamily
where
    H: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
{
    let x = rho.first_moment();
    let gx = grad_h(&x);
    let c0 = h(&x) - x.iter().zip(&gx).map(|(a, b)| a * b).sum::<f64>();
    CostFamily {
        kind: CostKind::CenterOfMass {
            h: Arc::new(h),
            dim: rho.dim(),
        },
        c0,
        stability: None,
        monotone: false,
    }
}

impl CostFamily {
    /// Evaluate the family on one occupation over the given support points.
    /// Prefer [`CostFamily::prepare`] when evaluating many occupations on a
    /// fixed support.
    pub fn eval(&self, occ: &Occupation, points: &[Vec<f64>]) -> f64 {
        self.prepare(points).cost(occ)
    }

    /// Precompute per-support tables (the pairwise kernel matrix) for fast
    /// repeated evaluation.
    pub fn prepare<'a>(&'a self, points: &'a [Vec<f64>]) -> PreparedCost<'a> {
        let pair_matrix = match &self.kind {
            CostKind::Pairwise(c2) => {
                let m = points.len();
                let mut mat = vec![0.0; m * m];
                for i in 0..m {
                    for j in i..m {
                        let v = c2.eval(&points[i], &points[j]);
                        mat[i * m + j] = v;
                        mat[j * m + i] = v;
                    }
                }
                Some(mat)
            }
            _ => None,
        };
        PreparedCost {
            family: self,
            points,
            pair_matrix,
        }
    }

    /// The generating two-body kernel, when the family is pairwise.
    pub fn pairwise_kernel(&self) -> Option<&PairwiseCost> {
        match &self.kind {
            CostKind::Pairwise(c2) => Some(c2),
            _ => None,
        }
    }
}

/// A cost family bound to a fixed support.
pub struct PreparedCost<'a> {
    family: &'a CostFamily,
    points: &'a [Vec<f64>],
    pair_matrix: Option<Vec<f64>>,
}

impl<'a> PreparedCost<'a> {
    pub fn family(&self) -> &'a CostFamily {
        self.family
    }

    pub fn support_size(&self) -> usize {
        self.points.len()
    }

    /// Cost of one occupation; `+∞` marks excluded configurations.
    pub fn cost(&self, occ: &Occupation) -> f64 {
        debug_assert_eq!(occ.len(), self.points.len());
        match &self.family.kind {
            CostKind::Zero => {
                if occ.total() == 0 {
                    self.family.c0
                } else {
                    0.0
                }
            }
            CostKind::Pairwise(_) => {
                if occ.total() == 0 {
                    return self.family.c0;
                }
                let m = self.points.len();
                let mat = self.pair_matrix.as_ref().expect("pairwise matrix");
                let mut total = 0.0;
                for i in 0..m {
                    let oi = occ.0[i];
                    if oi == 0 {
                        continue;
                    }
                    let diag = mat[i * m + i];
                    if oi >= 2 {
                        if diag == f64::INFINITY {
                            return f64::INFINITY;
                        }
                        total += (oi as f64) * (oi as f64 - 1.0) / 2.0 * diag;
                    }
                    for j in (i + 1)..m {
                        let oj = occ.0[j];
                        if oj == 0 {
                            continue;
                        }
                        let v = mat[i * m + j];
                        if v == f64::INFINITY {
                            return f64::INFINITY;
                        }
                        total += (oi as f64) * (oj as f64) * v;
                    }
                }
                total
            }
            CostKind::CenterOfMass { h, dim } => {
                if occ.total() == 0 {
                    return self.family.c0;
                }
                let mut s = vec![0.0; *dim];
                for (i, &k) in occ.0.iter().enumerate() {
                    if k > 0 {
                        for (acc, &x) in s.iter_mut().zip(&self.points[i]) {
                            *acc += k as f64 * x;
                        }
                    }
                }
                h(&s)
            }
        }
    }

    /// Largest admissible multiplicity of atom `i` under truncation `nmax`;
    /// 1 when the kernel diverges on the diagonal.
    pub fn site_cap(&self, _i: usize, nmax: u32) -> u32 {
        match &self.family.kind {
            CostKind::Pairwise(c2) if c2.diverges_on_diagonal() => 1.min(nmax),
            _ => nmax,
        }
    }
}

/// Quadratic stability probe `∬ c2 dρ dρ` over an atomic measure, the
/// two-body integral whose sign certifies (in)stability of the pairwise
/// family: a negative value exhibits instability. Infinite diagonal values
/// propagate as `+∞` when they carry mass.
pub fn stability_probe(c2: &PairwiseCost, rho: &DiscreteDensity) -> f64 {
    let m = rho.len();
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..m {
            let mi = rho.mass(i);
            let mj = rho.mass(j);
            if mi == 0.0 || mj == 0.0 {
                continue;
            }
            let v = c2.eval(rho.point(i), rho.point(j));
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            total += mi * mj * v;
        }
    }
    total
}

/// Parse the CLI cost grammar `name[:key=val,...]`:
/// `riesz:s=1`, `coulomb:d=3`, `lj:A=1,B=1,a=12,b=6`, `log`, `const:c=1`,
/// `exp`.
pub fn parse_cost_spec(spec: &str) -> Result<PairwiseCost> {
    let (name, args) = match spec.split_once(':') {
        Some((n, a)) => (n, a),
        None => (spec, ""),
    };
    let mut kv = std::collections::BTreeMap::new();
    if !args.is_empty() {
        for part in args.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidCost(format!("expected key=val in `{part}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::InvalidCost(format!("bad number in `{part}`")))?;
            kv.insert(k.to_string(), v);
        }
    }
    let get = |k: &str| -> Result<f64> {
        kv.get(k)
            .copied()
            .ok_or_else(|| Error::InvalidCost(format!("cost `{name}` needs parameter `{k}`")))
    };
    match name {
        "coulomb" => coulomb(get("d").unwrap_or(3.0) as usize),
        "riesz" => riesz(get("s")?),
        "lj" => lennard_jones(get("A")?, get("B")?, get("a")?, get("b")?),
        "log" => Ok(log_cost()),
        "const" => Ok(constant(get("c")?)),
        "exp" => Ok(PairwiseCost::ExpDecay),
        other => Err(Error::InvalidCost(format!("unknown cost `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riesz_values() {
        let k = riesz(1.0).unwrap();
        assert_eq!(k.eval(&[0.0], &[2.0]), 0.5);
        let k0 = riesz(0.0).unwrap();
        assert_eq!(k0.eval(&[0.0], &[1.0]), 0.0); // -log 1
        assert_eq!(constant(1.0).eval(&[0.0], &[5.0]), 1.0);
    }

    #[test]
    fn pairwise_single_particle_costs_nothing() {
        let fam = pairwise_family(riesz(1.0).unwrap());
        let pts = vec![vec![0.0], vec![1.0]];
        assert_eq!(fam.eval(&Occupation(vec![1, 0]), &pts), 0.0);
        assert_eq!(fam.eval(&Occupation(vec![0, 0]), &pts), 0.0);
    }

    #[test]
    fn pairwise_coulomb_pair_and_diagonal() {
        let fam = pairwise_family(riesz(1.0).unwrap());
        let pts = vec![vec![0.0], vec![1.0]];
        assert_eq!(fam.eval(&Occupation(vec![1, 1]), &pts), 1.0);
        assert_eq!(fam.eval(&Occupation(vec![2, 0]), &pts), f64::INFINITY);
    }

    #[test]
    fn pairwise_constant_counts_all_pairs() {
        let fam = pairwise_family(constant(2.0));
        let pts = vec![vec![0.0], vec![1.0]];
        // o = (2, 1): C(3,2) = 3 pairs
        assert_eq!(fam.eval(&Occupation(vec![2, 1]), &pts), 6.0);
    }

    #[test]
    fn disjoint_union_splits_into_parts_plus_cross() {
        // a kernel finite on the diagonal so overlapping occupations count
        let fam = pairwise_family(PairwiseCost::ExpDecay);
        let pts = vec![vec![0.0], vec![1.0], vec![2.5]];
        let prep = fam.prepare(&pts);
        let a = Occupation(vec![1, 1, 0]);
        let b = Occupation(vec![0, 1, 1]);
        let c2 = |i: usize, j: usize| PairwiseCost::ExpDecay.eval(&pts[i], &pts[j]);
        let cross: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| a.0[i] as f64 * b.0[j] as f64 * c2(i, j))
            .sum();
        let lhs = prep.cost(&a.merge(&b));
        let rhs = prep.cost(&a) + prep.cost(&b) + cross;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn center_of_mass_square_pairing() {
        // opposite corners of the square sum to zero
        let pts = vec![
            vec![1.0, -1.0],
            vec![1.0, 1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        let rho = DiscreteDensity::new(2, pts.clone(), vec![0.5; 4]).unwrap();
        let fam = center_of_mass_family(
            |x: &[f64]| x.iter().map(|v| v * v).sum(),
            |x: &[f64]| x.iter().map(|v| 2.0 * v).collect(),
            &rho,
        );
        assert_eq!(fam.c0, 0.0); // X = 0 for the symmetric square
        let diag = Occupation(vec![1, 0, 1, 0]);
        assert_eq!(fam.eval(&diag, &pts), 0.0);
        let all = Occupation(vec![1, 1, 1, 1]);
        assert_eq!(fam.eval(&all, &pts), 0.0);
        let side = Occupation(vec![1, 1, 0, 0]);
        assert_eq!(fam.eval(&side, &pts), 4.0);
    }

    #[test]
    fn stability_probe_repulsive_harmonic_is_negative() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        let probe = stability_probe(&riesz(-2.0).unwrap(), &rho);
        assert!((probe - (-2.0)).abs() < 1e-12);
    }

    #[test]
    fn stability_probe_nonnegative_kernel() {
        let rho = DiscreteDensity::new_1d(&[0.0, 1.0, 3.0], &[0.5, 1.0, 0.25]).unwrap();
        assert!(stability_probe(&PairwiseCost::ExpDecay, &rho) >= 0.0);
    }

    #[test]
    fn stability_probe_hits_infinite_self_pair() {
        let rho = DiscreteDensity::new_1d(&[0.0], &[2.0]).unwrap();
        let lj = lennard_jones(1.0, 1.0, 12.0, 6.0).unwrap();
        assert_eq!(stability_probe(&lj, &rho), f64::INFINITY);
        // while a single pair at the well bottom is negative
        assert!(lj.eval(&[0.0], &[1.2]) < 0.0);
    }

    #[test]
    fn lj_parameter_validation() {
        assert!(lennard_jones(1.0, 1.0, 6.0, 12.0).is_err());
        assert!(lennard_jones(-1.0, 1.0, 12.0, 6.0).is_err());
    }

    #[test]
    fn cost_spec_grammar() {
        assert!(matches!(parse_cost_spec("riesz:s=1").unwrap(), PairwiseCost::Riesz { s } if s == 1.0));
        assert!(matches!(parse_cost_spec("const:c=1").unwrap(), PairwiseCost::Constant(c) if c == 1.0));
        assert!(parse_cost_spec("lj:A=1,B=1,a=12,b=6").is_ok());
        assert!(parse_cost_spec("riesz").is_err());
        assert!(parse_cost_spec("nope:x=1").is_err());
    }
}
