//! Closed convex sets with closed-form Euclidean projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist2;

/// A feasible set with an exact projection: the nonnegative orthant, an
/// axis-aligned box, or the whole space (identity projection, mostly for
/// tests). Only sets with closed-form projections are supported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeasibleSet {
    NonnegativeOrthant { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    WholeSpace { dim: usize },
}

impl FeasibleSet {
    pub fn orthant(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        Ok(FeasibleSet::NonnegativeOrthant { dim })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDimension);
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidRange("box requires lower <= upper componentwise".into()));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    /// The box [0, hi]^dim.
    pub fn cube(dim: usize, hi: f64) -> Result<Self> {
        Self::boxed(vec![0.0; dim], vec![hi; dim])
    }

    pub fn whole_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension);
        }
        Ok(FeasibleSet::WholeSpace { dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::NonnegativeOrthant { dim } | FeasibleSet::WholeSpace { dim } => *dim,
            FeasibleSet::Box { lower, .. } => lower.len(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            FeasibleSet::NonnegativeOrthant { .. } => x.iter().map(|v| v.max(0.0)).collect(),
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.max(*l).min(*u))
                .collect(),
            FeasibleSet::WholeSpace { .. } => x.to_vec(),
        })
    }

    /// Membership within `tol` of projection distance.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        if tol < 0.0 {
            return Err(Error::InvalidRange(format!("tolerance {tol} must be nonnegative")));
        }
        let p = self.project(x)?;
        Ok(dist2(&p, x) <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn box_projection_clamps() {
        let set = FeasibleSet::cube(3, 4.0).unwrap();
        let p = set.project(&[5.0, -1.0, 2.0]).unwrap();
        assert_eq!(p, vec![4.0, 0.0, 2.0]);
    }

    #[test]
    fn orthant_keeps_members() {
        let set = FeasibleSet::orthant(3).unwrap();
        let x = [0.5, 0.0, 2.0];
        assert_eq!(set.project(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn whole_space_is_identity() {
        let set = FeasibleSet::whole_space(2).unwrap();
        let x = [-3.0, 7.5];
        assert_eq!(set.project(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let set = FeasibleSet::orthant(3).unwrap();
        assert!(matches!(
            set.project(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(set.contains(&[1.0], 0.0).is_err());
    }

    #[test]
    fn invalid_boxes_are_rejected() {
        assert!(FeasibleSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(FeasibleSet::boxed(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(FeasibleSet::orthant(0).is_err());
    }

    #[test]
    fn contains_via_projection_distance() {
        let orthant = FeasibleSet::orthant(2).unwrap();
        assert!(orthant.contains(&[0.0, 0.0], 0.0).unwrap());
        let b = FeasibleSet::cube(1, 4.0).unwrap();
        assert!(!b.contains(&[4.000001], 1e-9).unwrap());
        assert!(b.contains(&[4.000001], 1e-5).unwrap());
    }

    fn random_sets_and_points() -> Vec<(FeasibleSet, RngStream)> {
        let root = RngStream::new_root(2024);
        vec![
            (FeasibleSet::orthant(6).unwrap(), root.split("orthant").unwrap()),
            (
                FeasibleSet::boxed(vec![-1.0, 0.0, 2.0, -3.0, 0.5, 0.0], vec![1.0, 4.0, 2.5, 3.0, 0.5, 10.0])
                    .unwrap(),
                root.split("box").unwrap(),
            ),
            (FeasibleSet::whole_space(6).unwrap(), root.split("whole").unwrap()),
        ]
    }

    #[test]
    fn projection_is_nonexpansive() {
        for (set, mut s) in random_sets_and_points() {
            for _ in 0..1000 {
                let x = s.uniform_vec(6, -10.0, 10.0).unwrap();
                let y = s.uniform_vec(6, -10.0, 10.0).unwrap();
                let px = set.project(&x).unwrap();
                let py = set.project(&y).unwrap();
                assert!(dist2(&px, &py) <= dist2(&x, &y) + 1e-12);
            }
        }
    }

    #[test]
    fn projection_is_firmly_nonexpansive() {
        for (set, mut s) in random_sets_and_points() {
            for _ in 0..1000 {
                let x = s.uniform_vec(6, -10.0, 10.0).unwrap();
                let y = s.uniform_vec(6, -10.0, 10.0).unwrap();
                let px = set.project(&x).unwrap();
                let py = set.project(&y).unwrap();
                let d = crate::linalg::sub(&px, &py);
                let lhs = crate::linalg::dot(&d, &d);
                let rhs = crate::linalg::dot(&d, &crate::linalg::sub(&x, &y));
                assert!(lhs <= rhs + 1e-12);
            }
        }
    }

    #[test]
    fn projection_variational_inequality() {
        // <x - P(x), y - P(x)> <= 0 for all y in the set.
        for (set, mut s) in random_sets_and_points() {
            for _ in 0..1000 {
                let x = s.uniform_vec(6, -10.0, 10.0).unwrap();
                let y = set.project(&s.uniform_vec(6, -10.0, 10.0).unwrap()).unwrap();
                let px = set.project(&x).unwrap();
                let gap = crate::linalg::dot(&crate::linalg::sub(&x, &px), &crate::linalg::sub(&y, &px));
                assert!(gap <= 1e-12);
            }
        }
    }

    #[test]
    fn projection_is_idempotent_exactly() {
        for (set, mut s) in random_sets_and_points() {
            for _ in 0..200 {
                let x = s.uniform_vec(6, -10.0, 10.0).unwrap();
                let p = set.project(&x).unwrap();
                assert_eq!(set.project(&p).unwrap(), p);
            }
        }
    }
}
