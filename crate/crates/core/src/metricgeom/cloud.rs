use crate::error::{Error, Result};
use crate::matrixcore::MatrixTuple;

/// Points in flat real coordinates with the Euclidean distance. Matrix tuples are
/// embedded so that this distance equals `|.|_2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::ShapeMismatch("points differ in dimension".into()));
        }
        Ok(PointCloud { dim, coords: points.concat() })
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch("flat buffer is not a whole number of points".into()));
        }
        Ok(PointCloud { dim, coords })
    }

    pub fn from_tuples(tuples: &[MatrixTuple]) -> Result<Self> {
        let pts: Vec<Vec<f64>> = tuples.iter().map(|t| t.embed()).collect();
        Self::from_points(&pts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn dist_sq(&self, i: usize, j: usize) -> f64 {
        sq(self.point(i), self.point(j))
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist_sq(i, j).sqrt()
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyCloud)
        } else {
            Ok(())
        }
    }

    /// Cartesian product with the sum-of-squares metric.
    pub fn product(&self, other: &PointCloud) -> PointCloud {
        let mut coords = Vec::with_capacity(self.len() * other.len() * (self.dim + other.dim));
        for i in 0..self.len() {
            for j in 0..other.len() {
                coords.extend_from_slice(self.point(i));
                coords.extend_from_slice(other.point(j));
            }
        }
        PointCloud { dim: self.dim + other.dim, coords }
    }

    /// Coordinate-block projection onto `range`.
    pub fn project(&self, range: std::ops::Range<usize>) -> PointCloud {
        let dim = range.len();
        let mut coords = Vec::with_capacity(self.len() * dim);
        for i in 0..self.len() {
            coords.extend_from_slice(&self.point(i)[range.clone()]);
        }
        PointCloud { dim, coords }
    }
}

pub(crate) fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::{sample_gue, MatrixTuple};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn metric_axioms_on_tuple_clouds(seed in any::<u64>()) {
            let tuples: Vec<MatrixTuple> = (0..6).map(|i| MatrixTuple::single(sample_gue(5, seed.wrapping_add(i)))).collect();
            let c = PointCloud::from_tuples(&tuples).unwrap();
            for i in 0..c.len() {
                prop_assert_eq!(c.dist(i, i), 0.0);
                for j in 0..c.len() {
                    prop_assert_eq!(c.dist(i, j), c.dist(j, i));
                    for l in 0..c.len() {
                        prop_assert!(c.dist(i, l) <= c.dist(i, j) + c.dist(j, l) + 1e-12);
                    }
                }
            }
        }
    }
}
