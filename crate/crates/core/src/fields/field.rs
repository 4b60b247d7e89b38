use std::io::Write;

use super::grid::GridSpec;
use super::reduce::{fill_by, max_by, sum_by};
use crate::error::{Error, Result};

/// Values of a scalar function at every node of a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    label: String,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                label,
                got: values.len(),
                expected: grid.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::CorruptField { label, index });
        }
        Ok(Self {
            grid,
            values,
            label,
        })
    }

    /// Skips the finiteness scan; callers guarantee the invariant.
    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>, label: impl Into<String>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid,
            values,
            label: label.into(),
        }
    }

    pub fn zeros(grid: GridSpec, label: impl Into<String>) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()], label)
    }

    pub fn constant(grid: GridSpec, value: f64, label: impl Into<String>) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], label)
    }

    /// Samples `f` at the node coordinates (a slice of length `n`).
    pub fn from_fn<F>(grid: GridSpec, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let mut values = vec![0.0; grid.len()];
        let n = grid.dim();
        fill_by(&mut values, |node| f(&grid.node_coords(node)[..n]));
        Self::new(grid, values, label)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| c * v).collect();
        Self::new(self.grid, values, self.label.clone())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::new(self.grid, values, self.label.clone())
    }

    pub fn norm_l2(&self) -> f64 {
        norm_l2(self)
    }

    pub fn norm_sup(&self) -> f64 {
        norm_sup(self)
    }

    /// Writes the snapshot CSV: `index,coord_1..coord_n,value`.
    pub fn write_csv<W: Write>(&self, out: &mut W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(out, "# {c}")?;
        }
        let n = self.grid.dim();
        let mut header = String::from("index");
        for k in 1..=n {
            header.push_str(&format!(",coord_{k}"));
        }
        header.push_str(",value");
        writeln!(out, "{header}")?;
        for (node, v) in self.values.iter().enumerate() {
            let x = self.grid.node_coords(node);
            write!(out, "{node}")?;
            for xa in &x[..n] {
                write!(out, ",{xa}")?;
            }
            writeln!(out, ",{v}")?;
        }
        Ok(())
    }
}

/// Rectangle-rule L² norm: every node carries the weight `h^n`, boundary
/// nodes included.
pub fn norm_l2(field: &ScalarField) -> f64 {
    let g = field.grid();
    let cell = g.spacing().powi(g.dim() as i32);
    let v = field.values();
    (cell * sum_by(v.len(), |i| v[i] * v[i])).sqrt()
}

pub fn norm_sup(field: &ScalarField) -> f64 {
    let v = field.values();
    max_by(v.len(), |i| v[i].abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_values() {
        let g = GridSpec::new(1, 1.0, 5).unwrap();
        let err = ScalarField::new(g, vec![0.0, 1.0, f64::NAN, 0.0, 0.0], "phi").unwrap_err();
        assert!(matches!(err, Error::CorruptField { index: 2, .. }));
        assert!(ScalarField::new(g, vec![0.0; 4], "phi").is_err());
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = GridSpec::new(1, 10.0, 2001).unwrap();
        assert_eq!(ScalarField::zeros(g, "z").norm_l2(), 0.0);
        assert_eq!(ScalarField::zeros(g, "z").norm_sup(), 0.0);

        let ones = ScalarField::constant(g, 1.0, "one").unwrap();
        let expected = (2.0f64 * 10.0).sqrt();
        // the rectangle rule counts one extra cell
        assert!((ones.norm_l2() - expected * (1.0 + g.spacing() / 20.0).sqrt()).abs() < 1e-12);

        let mut v = vec![0.0; g.len()];
        v[17] = -3.0;
        assert_eq!(ScalarField::new(g, v, "spike").unwrap().norm_sup(), 3.0);
    }

    #[test]
    fn gaussian_l2_norm() {
        let g = GridSpec::new(1, 10.0, 2001).unwrap();
        let f = ScalarField::from_fn(g, "gauss", |x| (-x[0] * x[0]).exp()).unwrap();
        let exact = (std::f64::consts::PI / 2.0).sqrt().sqrt();
        assert!((f.norm_l2() - exact).abs() < 1e-6);
    }

    #[test]
    fn gaussian_peak_is_epsilon() {
        let g = GridSpec::new(2, 5.0, 51).unwrap();
        let eps = 0.01;
        let f = ScalarField::from_fn(g, "gauss", |x| eps * (-(x[0] * x[0] + x[1] * x[1])).exp())
            .unwrap();
        assert_eq!(f.norm_sup(), eps);
    }

    #[test]
    fn snapshot_csv_layout() {
        let g = GridSpec::new(2, 1.0, 5).unwrap();
        let f = ScalarField::from_fn(g, "phi", |x| x[0] + 10.0 * x[1]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf, Some("hash=abc")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# hash=abc"));
        assert_eq!(lines.next(), Some("index,coord_1,coord_2,value"));
        assert_eq!(lines.next(), Some("0,-1,-1,-11"));
        assert_eq!(text.lines().count(), 2 + 25);
    }
}
