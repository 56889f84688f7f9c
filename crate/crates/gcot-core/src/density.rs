//! Finite atomic densities: the marginal constraint of every problem here.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// A finite atomic measure on `R^d`: distinct support points with
/// nonnegative masses. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDensity {
    dim: usize,
    points: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl DiscreteDensity {
    /// Build a density, rejecting dimension mismatches, negative or
    /// non-finite masses and duplicate support points. Duplicates are
    /// rejected rather than merged so that occupation indices stay
    /// unambiguous.
    pub fn new(dim: usize, points: Vec<Vec<f64>>, masses: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDensity("dimension must be positive".into()));
        }
        if points.len() != masses.len() {
            return Err(Error::InvalidDensity(format!(
                "{} points but {} masses",
                points.len(),
                masses.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidDensity(format!(
                    "point {i} has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidDensity(format!("point {i} is not finite")));
            }
        }
        for (i, &m) in masses.iter().enumerate() {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidDensity(format!("mass {i} = {m} is invalid")));
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(Error::InvalidDensity(format!(
                        "duplicate support points at indices {i} and {j}"
                    )));
                }
            }
        }
        Ok(Self { dim, points, masses })
    }

    /// One-dimensional helper: atoms at `positions` with `masses`.
    pub fn new_1d(positions: &[f64], masses: &[f64]) -> Result<Self> {
        Self::new(
            1,
            positions.iter().map(|&x| vec![x]).collect(),
            masses.to_vec(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of support atoms.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    /// Total mass of the measure.
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// First moment `∫ x dρ` (not normalized).
    pub fn first_moment(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (p, &m) in self.points.iter().zip(&self.masses) {
            for (o, &x) in out.iter_mut().zip(p) {
                *o += m * x;
            }
        }
        out
    }

    /// Mass-weighted barycenter; the origin for a zero-mass density.
    pub fn barycenter(&self) -> Vec<f64> {
        let total = self.total_mass();
        let mut out = self.first_moment();
        if total > 0.0 {
            for o in &mut out {
                *o /= total;
            }
        }
        out
    }

    /// Restriction to a subset of atom indices. Indices must be sorted,
    /// unique and in range.
    pub fn restrict(&self, kept: &[usize]) -> Result<Self> {
        if kept.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDensity("kept indices must be sorted and unique".into()));
        }
        if kept.iter().any(|&i| i >= self.len()) {
            return Err(Error::InvalidDensity("kept index out of range".into()));
        }
        Ok(Self {
            dim: self.dim,
            points: kept.iter().map(|&i| self.points[i].clone()).collect(),
            masses: kept.iter().map(|&i| self.masses[i]).collect(),
        })
    }

    /// Euclidean distance between atoms `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(&self.points[i], &self.points[j])
    }

    /// Smallest pairwise distance between atoms, `inf` for fewer than two.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.min(self.distance(i, j));
            }
        }
        best
    }
}

/// Serialized form: `{schema, dim, points, masses}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct DensityJson {
    pub schema: String,
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
}

impl DiscreteDensity {
    pub fn to_json(&self) -> DensityJson {
        DensityJson {
            schema: crate::SCHEMA.into(),
            dim: self.dim,
            points: self.points.clone(),
            masses: self.masses.clone(),
        }
    }

    pub fn from_json(json: DensityJson) -> Result<Self> {
        Self::new(json.dim, json.points, json.masses)
    }
}

/// Tagged disjoint union of two densities over the same ambient space.
///
/// The two populations are kept distinguishable by appending a species
/// coordinate (1 for `rho1`, 2 for `rho2`), so coincident points of the
/// two inputs stay distinct atoms. Masses are preserved.
pub fn two_species_density(rho1: &DiscreteDensity, rho2: &DiscreteDensity) -> Result<DiscreteDensity> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::InvalidDensity(format!(
            "dimension mismatch: {} vs {}",
            rho1.dim(),
            rho2.dim()
        )));
    }
    let tag = |p: &[f64], t: f64| {
        let mut q = p.to_vec();
        q.push(t);
        q
    };
    let points: Vec<Vec<f64>> = rho1
        .points()
        .iter()
        .map(|p| tag(p, 1.0))
        .chain(rho2.points().iter().map(|p| tag(p, 2.0)))
        .collect();
    let masses: Vec<f64> = rho1.masses().iter().chain(rho2.masses()).copied().collect();
    DiscreteDensity::new(rho1.dim() + 1, points, masses)
}

/// Euclidean distance between two coordinate slices.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates() {
        let err = DiscreteDensity::new(2, vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, 1.0]);
        assert!(matches!(err, Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn rejects_negative_mass() {
        let err = DiscreteDensity::new_1d(&[0.0], &[-0.5]);
        assert!(matches!(err, Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn two_species_mass_and_distinctness() {
        let a = DiscreteDensity::new_1d(&[0.0], &[1.0]).unwrap();
        let b = DiscreteDensity::new_1d(&[0.0, 1.0], &[1.5, 0.5]).unwrap();
        let c = two_species_density(&a, &b).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.dim(), 2);
        assert!((c.total_mass() - 3.0).abs() < 1e-15);
        // the shared coordinate 0.0 stays two distinct atoms after tagging
        assert!(c.distance(0, 1) > 0.0);
    }

    #[test]
    fn two_species_with_empty_side() {
        let a = DiscreteDensity::new_1d(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        let b = DiscreteDensity::new(1, vec![], vec![]).unwrap();
        let c = two_species_density(&a, &b).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.point(0), &[0.0, 1.0]);
    }

    #[test]
    fn barycenter_of_symmetric_pair_is_origin() {
        let d = DiscreteDensity::new_1d(&[-1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(d.barycenter(), vec![0.0]);
        assert_eq!(d.total_mass(), 4.0);
    }
}
