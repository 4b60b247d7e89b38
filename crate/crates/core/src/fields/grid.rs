use serde::Serialize;

use crate::error::{Error, Result};

/// Largest node count accepted by [`GridSpec::new`]. At 8 bytes per value a
/// solver run keeps roughly twenty fields alive, so this caps a run near 5 GB.
pub const DEFAULT_NODE_BUDGET: usize = 1 << 25;

/// Uniform Cartesian grid on `[-L, L]^n` with `m` nodes per axis.
///
/// Nodes are flattened row-major with `x_1` varying fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    dim: usize,
    extent: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(dim: usize, extent: f64, points: usize) -> Result<Self> {
        Self::with_budget(dim, extent, points, DEFAULT_NODE_BUDGET)
    }

    pub fn with_budget(dim: usize, extent: f64, points: usize, max_nodes: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!("extent {extent} must be positive")));
        }
        if points < 5 || points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be odd and >= 5, got {points}"
            )));
        }
        let total = (points as u128).pow(dim as u32);
        if total > max_nodes as u128 {
            return Err(Error::InvalidGrid(format!(
                "{total} nodes exceed the budget of {max_nodes}"
            )));
        }
        Ok(Self { dim, extent, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / (self.points - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of the `i`-th node along any axis. Measured from the
    /// centre node so the grid is exactly symmetric about the origin.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - ((self.points - 1) / 2) as f64) * self.spacing()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow(axis as u32)
    }

    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.stride(axis)) % self.points
    }

    pub fn node_coords(&self, node: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut rest = node;
        for xa in x.iter_mut().take(self.dim) {
            *xa = self.coordinate(rest % self.points);
            rest /= self.points;
        }
        x
    }

    pub fn radius(&self, node: usize) -> f64 {
        self.node_coords(node).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Node index of a multi-index (`x_1` first).
    pub fn node(&self, index: &[usize]) -> usize {
        index
            .iter()
            .enumerate()
            .map(|(axis, &i)| i * self.stride(axis))
            .sum()
    }

    /// Index of the node nearest to `x` along one axis, if inside the grid.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let c = ((self.points - 1) / 2) as f64;
        let i = (x / self.spacing() + c).round();
        (i >= 0.0 && i < self.points as f64).then_some(i as usize)
    }

    pub(crate) fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange {
                axis,
                dim: self.dim,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_a_node() {
        let g = GridSpec::new(2, 3.0, 7).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.coordinate(3), 0.0);
        assert_eq!(g.node_coords(g.node(&[3, 3])), [0.0, 0.0, 0.0]);
        assert_eq!(g.node_coords(g.node(&[0, 6])), [-3.0, 3.0, 0.0]);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridSpec::new(0, 1.0, 5).is_err());
        assert!(GridSpec::new(4, 1.0, 5).is_err());
        assert!(GridSpec::new(1, 1.0, 6).is_err());
        assert!(GridSpec::new(1, 1.0, 3).is_err());
        assert!(GridSpec::new(1, -1.0, 5).is_err());
        assert!(GridSpec::with_budget(3, 1.0, 101, 1000).is_err());
    }

    #[test]
    fn flattening_is_x1_fastest() {
        let g = GridSpec::new(3, 1.0, 5).unwrap();
        let node = g.node(&[1, 2, 3]);
        assert_eq!(node, 1 + 5 * 2 + 25 * 3);
        assert_eq!(g.axis_index(node, 0), 1);
        assert_eq!(g.axis_index(node, 1), 2);
        assert_eq!(g.axis_index(node, 2), 3);
    }
}
