//! Two-phase revised simplex on problems with few rows and very many
//! columns.
//!
//! The basis inverse is kept dense ((m+1)² entries, m = support size), the
//! column pool is only ever touched through pricing, which is a pure map
//! and runs in parallel. Entering columns follow Dantzig's rule with
//! index-ordered tie-breaking; after a stretch of degenerate pivots the
//! rule switches to Bland's, which cannot cycle. Variable ids for Bland
//! order artificials before structurals so the ratio test drives
//! artificials out of the basis first.

use super::scalar::LpScalar;
use crate::par;

/// Access to the structural columns of the LP.
pub(crate) trait ColumnSource<T: LpScalar>: Sync {
    fn ncols(&self) -> usize;
    fn cost(&self, j: usize) -> T;
    /// Sparse entries of column `j`.
    fn column(&self, j: usize) -> Vec<(usize, T)>;
    /// `y · A_j` without materializing the column.
    fn price(&self, j: usize, y: &[T]) -> T;
}

/// Occupation columns: `(o_1 .. o_m, 1)` per configuration.
pub(crate) struct OccColumns<'a, T> {
    pub occs: &'a [crate::plan::Occupation],
    pub costs: Vec<T>,
    pub rows: usize,
}

impl<T: LpScalar> ColumnSource<T> for OccColumns<'_, T> {
    fn ncols(&self) -> usize {
        self.occs.len()
    }

    fn cost(&self, j: usize) -> T {
        self.costs[j].clone()
    }

    fn column(&self, j: usize) -> Vec<(usize, T)> {
        let mut out = Vec::new();
        for (i, &k) in self.occs[j].0.iter().enumerate() {
            if k > 0 {
                out.push((i, T::from_f64(k as f64)));
            }
        }
        out.push((self.rows - 1, T::one()));
        out
    }

    fn price(&self, j: usize, y: &[T]) -> T {
        let mut acc = y[self.rows - 1].clone();
        for (i, &k) in self.occs[j].0.iter().enumerate() {
            if k > 0 {
                acc = acc.add(&y[i].mul(&T::from_f64(k as f64)));
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasisVar {
    Artificial(usize),
    Structural(usize),
}

impl BasisVar {
    /// Total order for Bland's rule; artificials first.
    fn ordinal(&self, rows: usize) -> usize {
        match self {
            BasisVar::Artificial(r) => *r,
            BasisVar::Structural(j) => rows + *j,
        }
    }
}

pub(crate) struct SimplexResult<T> {
    /// Basic structural variables and their values.
    pub values: Vec<(usize, T)>,
    pub objective: T,
    /// Row multipliers `y = c_B B^{-1}` at the optimum.
    pub duals: Vec<T>,
    pub iterations: usize,
}

pub(crate) enum SimplexOutcome<T> {
    Optimal(SimplexResult<T>),
    /// Phase 1 could not zero the artificials; per-row residuals attached.
    Infeasible { residuals: Vec<f64>, worst_row: usize },
    Unbounded,
}

struct Tableau<'a, T: LpScalar, S: ColumnSource<T>> {
    source: &'a S,
    rows: usize,
    b: Vec<T>,
    basis: Vec<BasisVar>,
    binv: Vec<T>,
    xb: Vec<T>,
    in_basis: Vec<bool>,
    iterations: usize,
    pivots_since_refactor: usize,
    max_iterations: usize,
}

const STALL_WINDOW_PER_ROW: usize = 8;

pub(crate) fn solve<T: LpScalar, S: ColumnSource<T>>(
    source: &S,
    b: &[T],
    max_iterations: usize,
) -> crate::Result<SimplexOutcome<T>> {
    let rows = b.len();
    debug_assert!(b.iter().all(|v| *v >= T::zero()));
    let mut t = Tableau {
        source,
        rows,
        b: b.to_vec(),
        basis: (0..rows).map(BasisVar::Artificial).collect(),
        binv: identity(rows),
        xb: b.to_vec(),
        in_basis: vec![false; source.ncols()],
        iterations: 0,
        pivots_since_refactor: 0,
        max_iterations,
    };

    t.run_phase(true)?;
    let phase1_obj = t.objective(true);
    if phase1_obj > T::feas_eps() {
        let mut residuals = vec![0.0; rows];
        for (i, bv) in t.basis.iter().enumerate() {
            if let BasisVar::Artificial(row) = bv {
                residuals[*row] = t.xb[i].to_f64();
            }
        }
        let worst_row = residuals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        return Ok(SimplexOutcome::Infeasible { residuals, worst_row });
    }

    if !t.run_phase(false)? {
        return Ok(SimplexOutcome::Unbounded);
    }
    t.refactor()?;

    let mut values = Vec::new();
    for (i, bv) in t.basis.iter().enumerate() {
        if let BasisVar::Structural(j) = bv {
            values.push((*j, t.xb[i].clone()));
        }
    }
    let objective = t.objective(false);
    let duals = t.duals(false);
    Ok(SimplexOutcome::Optimal(SimplexResult {
        values,
        objective,
        duals,
        iterations: t.iterations,
    }))
}

fn identity<T: LpScalar>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
    }
    m
}

impl<T: LpScalar, S: ColumnSource<T>> Tableau<'_, T, S> {
    fn basis_cost(&self, bv: &BasisVar, phase1: bool) -> T {
        match (bv, phase1) {
            (BasisVar::Artificial(_), true) => T::one(),
            (BasisVar::Artificial(_), false) => T::zero(),
            (BasisVar::Structural(_), true) => T::zero(),
            (BasisVar::Structural(j), false) => self.source.cost(*j),
        }
    }

    fn objective(&self, phase1: bool) -> T {
        let mut acc = T::zero();
        for (i, bv) in self.basis.iter().enumerate() {
            acc = acc.add(&self.basis_cost(bv, phase1).mul(&self.xb[i]));
        }
        acc
    }

    fn duals(&self, phase1: bool) -> Vec<T> {
        let r = self.rows;
        let cb: Vec<T> = self.basis.iter().map(|bv| self.basis_cost(bv, phase1)).collect();
        (0..r)
            .map(|k| {
                let mut acc = T::zero();
                for i in 0..r {
                    if !cb[i].is_zero() {
                        acc = acc.add(&cb[i].mul(&self.binv[i * r + k]));
                    }
                }
                acc
            })
            .collect()
    }

    /// Returns false on an unbounded ray (phase 2 only).
    fn run_phase(&mut self, phase1: bool) -> crate::Result<bool> {
        let stall_window = STALL_WINDOW_PER_ROW * self.rows + 16;
        let mut bland = false;
        let mut best_seen = f64::INFINITY;
        let mut stalled_for = 0usize;

        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(crate::Error::Numerical(format!(
                    "simplex exceeded {} iterations",
                    self.max_iterations
                )));
            }

            let y = self.duals(phase1);
            let Some(enter) = self.find_entering(&y, phase1, bland) else {
                return Ok(true);
            };

            let col = self.source.column(enter);
            let d = self.apply_binv(&col);
            let Some(leave) = self.ratio_test(&d) else {
                return Ok(false);
            };

            self.pivot(leave, enter, &d)?;

            let obj = self.objective(phase1).to_f64();
            if obj < best_seen - 1e-13 * (1.0 + best_seen.abs()) {
                best_seen = obj;
                stalled_for = 0;
            } else {
                stalled_for += 1;
                if stalled_for >= stall_window {
                    bland = true;
                }
            }
        }
    }

    /// Dantzig (most negative reduced cost, index tie-break) or, in Bland
    /// mode, the lowest-index eligible column. Negativity of the reduced
    /// cost is always tested in exact `T` arithmetic; the f64 projection is
    /// only used to rank candidates.
    fn find_entering(&self, y: &[T], phase1: bool, bland: bool) -> Option<usize> {
        let n = self.source.ncols();
        let eps = T::entering_eps().neg();
        let reduced = |j: usize| -> Option<T> {
            if self.in_basis[j] {
                return None;
            }
            let cost = if phase1 { T::zero() } else { self.source.cost(j) };
            let r = cost.sub(&self.source.price(j, y));
            (r < eps).then_some(r)
        };
        let key = |j: usize| -> f64 {
            match reduced(j) {
                Some(r) => {
                    if bland {
                        j as f64
                    } else {
                        r.to_f64()
                    }
                }
                None => f64::INFINITY,
            }
        };
        let j = par::argmin_by_key(n, key)?;
        reduced(j).map(|_| j)
    }

    fn apply_binv(&self, col: &[(usize, T)]) -> Vec<T> {
        let r = self.rows;
        let mut d = vec![T::zero(); r];
        for (k, v) in col {
            for i in 0..r {
                let cell = &self.binv[i * r + k];
                if !cell.is_zero() {
                    d[i] = d[i].add(&cell.mul(v));
                }
            }
        }
        d
    }

    /// Leaving row by minimum ratio; ties resolve to the smallest variable
    /// ordinal so artificials leave first and cycling cannot occur in Bland
    /// mode. A zero-level basic artificial whose direction entry is nonzero
    /// must block at ratio zero even when the entry is negative — letting it
    /// grow would break `Ax = b` for the structural part.
    fn ratio_test(&self, d: &[T]) -> Option<usize> {
        let eps = T::pivot_eps();
        let zero_level = T::feas_eps();
        let mut best: Option<(T, usize, usize)> = None; // (ratio, ordinal, row)
        for i in 0..self.rows {
            let forced_artificial = matches!(self.basis[i], BasisVar::Artificial(_))
                && self.xb[i].abs() <= zero_level
                && d[i].abs() > eps;
            let ratio = if forced_artificial {
                T::zero()
            } else if d[i] > eps {
                self.xb[i].div(&d[i])
            } else {
                continue;
            };
            let ordinal = self.basis[i].ordinal(self.rows);
            let better = match &best {
                None => true,
                Some((r, o, _)) => ratio < *r || (ratio == *r && ordinal < *o),
            };
            if better {
                best = Some((ratio, ordinal, i));
            }
        }
        best.map(|(_, _, row)| row)
    }

    fn pivot(&mut self, leave: usize, enter: usize, d: &[T]) -> crate::Result<()> {
        let r = self.rows;
        let piv = d[leave].clone();
        if piv.abs() <= T::pivot_eps() {
            return Err(crate::Error::Numerical("pivot below tolerance".into()));
        }

        for k in 0..r {
            self.binv[leave * r + k] = self.binv[leave * r + k].div(&piv);
        }
        self.xb[leave] = self.xb[leave].div(&piv);
        for i in 0..r {
            if i == leave || d[i].is_zero() {
                continue;
            }
            let f = d[i].clone();
            for k in 0..r {
                let delta = f.mul(&self.binv[leave * r + k]);
                self.binv[i * r + k] = self.binv[i * r + k].sub(&delta);
            }
            let delta = f.mul(&self.xb[leave]);
            self.xb[i] = self.xb[i].sub(&delta);
        }

        if let BasisVar::Structural(j) = self.basis[leave] {
            self.in_basis[j] = false;
        }
        self.basis[leave] = BasisVar::Structural(enter);
        self.in_basis[enter] = true;

        self.pivots_since_refactor += 1;
        if let Some(interval) = T::refactor_interval() {
            if self.pivots_since_refactor >= interval {
                self.refactor()?;
            }
        }
        Ok(())
    }

    /// Rebuild the inverse from the basis columns by Gauss-Jordan with
    /// partial pivoting and recompute the basic solution.
    fn refactor(&mut self) -> crate::Result<()> {
        let r = self.rows;
        let mut mat = vec![T::zero(); r * r]; // basis matrix, column per basis var
        for (col, bv) in self.basis.iter().enumerate() {
            match bv {
                BasisVar::Artificial(row) => mat[row * r + col] = T::one(),
                BasisVar::Structural(j) => {
                    for (row, v) in self.source.column(*j) {
                        mat[row * r + col] = v;
                    }
                }
            }
        }
        let mut inv = identity::<T>(r);
        for c in 0..r {
            let piv_row = (c..r)
                .max_by(|&a, &b| {
                    mat[a * r + c]
                        .abs()
                        .partial_cmp(&mat[b * r + c].abs())
                        .unwrap()
                })
                .unwrap();
            if mat[piv_row * r + c].abs() <= T::pivot_eps() {
                return Err(crate::Error::Numerical("singular basis during refactorization".into()));
            }
            if piv_row != c {
                for k in 0..r {
                    mat.swap(piv_row * r + k, c * r + k);
                    inv.swap(piv_row * r + k, c * r + k);
                }
            }
            let piv = mat[c * r + c].clone();
            for k in 0..r {
                mat[c * r + k] = mat[c * r + k].div(&piv);
                inv[c * r + k] = inv[c * r + k].div(&piv);
            }
            for i in 0..r {
                if i == c || mat[i * r + c].is_zero() {
                    continue;
                }
                let f = mat[i * r + c].clone();
                for k in 0..r {
                    let dm = f.mul(&mat[c * r + k]);
                    mat[i * r + k] = mat[i * r + k].sub(&dm);
                    let di = f.mul(&inv[c * r + k]);
                    inv[i * r + k] = inv[i * r + k].sub(&di);
                }
            }
        }
        // row swaps act on the augmented system [mat | inv], so inv is the
        // true inverse in standard row order once mat reaches the identity
        self.binv = inv;
        // xb = binv * b
        let mut xb = vec![T::zero(); r];
        for i in 0..r {
            let mut acc = T::zero();
            for k in 0..r {
                if !self.binv[i * r + k].is_zero() {
                    acc = acc.add(&self.binv[i * r + k].mul(&self.b[k]));
                }
            }
            xb[i] = acc;
        }
        self.xb = xb;
        self.pivots_since_refactor = 0;
        Ok(())
    }
}
