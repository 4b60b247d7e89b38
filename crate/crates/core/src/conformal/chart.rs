use serde::Serialize;

use crate::error::{Error, Result};

/// Which coordinates a point is written in: `(s, y)` or `(t, x)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Frame {
    YFrame,
    XFrame,
}

impl Frame {
    fn other(self) -> Self {
        match self {
            Frame::YFrame => Frame::XFrame,
            Frame::XFrame => Frame::YFrame,
        }
    }
}

/// `s² - |y|²` (or `t² - |x|²`).
pub fn lorentz_square(coords: &[f64]) -> f64 {
    coords[0] * coords[0] - coords[1..].iter().map(|v| v * v).sum::<f64>()
}

/// A point strictly inside the forward light cone.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConePoint {
    frame: Frame,
    coords: Vec<f64>,
    rho: f64,
}

impl ConePoint {
    pub fn new(frame: Frame, coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidIndex(format!("bad cone point {coords:?}")));
        }
        let rho = lorentz_square(&coords);
        if !(rho > 0.0 && coords[0] > 0.0) {
            return Err(Error::OnOrOutsideCone { rho });
        }
        Ok(Self { frame, coords, rho })
    }

    pub fn y(coords: Vec<f64>) -> Result<Self> {
        Self::new(Frame::YFrame, coords)
    }

    pub fn x(coords: Vec<f64>) -> Result<Self> {
        Self::new(Frame::XFrame, coords)
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// Rejects points with `ρ` below `min`.
    pub fn require_rho(&self, min: f64) -> Result<()> {
        if self.rho < min {
            return Err(Error::TooCloseToCone { rho: self.rho, min });
        }
        Ok(())
    }
}

/// Chart data for spatial dimension `n`: the weight exponent `α = (n-1)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConformalChart {
    pub n: usize,
    pub alpha: f64,
}

impl ConformalChart {
    pub fn new(n: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::InvalidIndex(format!("dimension {n} outside 1..=3")));
        }
        Ok(Self {
            n,
            alpha: (n as f64 - 1.0) / 2.0,
        })
    }
}

/// The inversion `p ↦ p / ρ(p)`. It is its own inverse and works from
/// either frame, returning the point in the other one.
pub fn kappa(p: &ConePoint) -> ConePoint {
    let coords: Vec<f64> = p.coords.iter().map(|c| c / p.rho).collect();
    ConePoint {
        frame: p.frame.other(),
        rho: lorentz_square(&coords),
        coords,
    }
}

/// Raw inversion of a coordinate vector; `None` when `ρ ≤ 0`.
pub fn kappa_coords(p: &[f64]) -> Option<Vec<f64>> {
    let rho = lorentz_square(p);
    (rho > 0.0).then(|| p.iter().map(|c| c / rho).collect())
}

fn metric(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `J[i][k] = ∂_i κ^k = δ_ik / ρ - 2 m_ii p_i p_k / ρ²`.
pub fn jacobian(p: &ConePoint) -> Vec<Vec<f64>> {
    let d = p.coords.len();
    let rho = p.rho;
    (0..d)
        .map(|i| {
            (0..d)
                .map(|k| {
                    let delta = if i == k { 1.0 / rho } else { 0.0 };
                    delta - 2.0 * metric(i) * p.coords[i] * p.coords[k] / (rho * rho)
                })
                .collect()
        })
        .collect()
}

/// Pullback `g_ij = m_kl ∂_iκ^k ∂_jκ^l`, checked against the closed form
/// `m_ij / ρ²`.
pub fn pullback_metric(p: &ConePoint) -> Result<Vec<Vec<f64>>> {
    let d = p.coords.len();
    let j = jacobian(p);
    let g: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| (0..d).map(|k| metric(k) * j[a][k] * j[b][k]).sum())
                .collect()
        })
        .collect();
    let scale = 1.0 / (p.rho * p.rho);
    for (a, row) in g.iter().enumerate() {
        for (b, v) in row.iter().enumerate() {
            let want = if a == b { metric(a) * scale } else { 0.0 };
            if (v - want).abs() > 1e-10 * scale {
                return Err(Error::InternalConsistency(format!(
                    "pullback metric entry ({a},{b}) = {v}, expected {want}"
                )));
            }
        }
    }
    Ok(g)
}

/// `a > 1` and `b = (a - 1/a)/2`: the plane `s = 1/(2b)` maps onto the
/// hyperboloid `(t-b)² - |x|² = b²`, which meets `t = a` at `|x| = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HyperboloidParam {
    pub a: f64,
    pub b: f64,
}

impl HyperboloidParam {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 1.0) {
            return Err(Error::config("pipeline.a", format!("{a} must be > 1")));
        }
        let b = (a - 1.0 / a) / 2.0;
        let p = Self { a, b };
        let defect = (a - b).powi(2) - 1.0 - b * b;
        if defect.abs() > 1e-12 * a * a {
            return Err(Error::InternalConsistency(format!("hyperboloid identity off by {defect}")));
        }
        Ok(p)
    }

    /// Time of the compactified initial plane.
    pub fn plane_s(&self) -> f64 {
        1.0 / (2.0 * self.b)
    }

    /// `(t - b)² - |x|² - b²`.
    pub fn defect(&self, tx: &[f64]) -> f64 {
        let x2: f64 = tx[1..].iter().map(|v| v * v).sum();
        (tx[0] - self.b).powi(2) - x2 - self.b * self.b
    }

    /// `t` on the hyperboloid above `x`.
    pub fn time_at(&self, x2: f64) -> f64 {
        self.b + (self.b * self.b + x2).sqrt()
    }
}

/// Largest `|(t-b)² - |x|² - b²|` over images of plane points `(1/(2b), y)`,
/// scaled by `b²`.
pub fn hyperboloid_map_check(param: &HyperboloidParam, ys: &[Vec<f64>]) -> Result<f64> {
    let s = param.plane_s();
    let mut worst: f64 = 0.0;
    for y in ys {
        let mut p = vec![s];
        p.extend_from_slice(y);
        let q = ConePoint::y(p)?;
        let tx = kappa(&q);
        worst = worst.max(param.defect(tx.coords()).abs() / (param.b * param.b));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_and_forced_example() {
        let p = ConePoint::y(vec![1.0, 0.0]).unwrap();
        assert_eq!(kappa(&p).coords(), &[1.0, 0.0]);
        let q = ConePoint::y(vec![2.0, 1.0]).unwrap();
        assert_eq!(q.rho(), 3.0);
        let k = kappa(&q);
        assert_eq!(k.frame(), Frame::XFrame);
        assert!((k.coords()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((k.coords()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((k.rho() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn outside_points_are_rejected() {
        assert!(matches!(ConePoint::y(vec![1.0, 1.0]), Err(Error::OnOrOutsideCone { .. })));
        assert!(matches!(ConePoint::y(vec![1.0, 2.0]), Err(Error::OnOrOutsideCone { .. })));
        assert!(matches!(ConePoint::y(vec![-2.0, 0.0]), Err(Error::OnOrOutsideCone { .. })));
    }

    #[test]
    fn metric_examples() {
        let g = pullback_metric(&ConePoint::y(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(g[0][0], 1.0);
        assert_eq!(g[1][1], -1.0);
        let g = pullback_metric(&ConePoint::y(vec![2.0, 1.0]).unwrap()).unwrap();
        assert!((g[0][0] - 1.0 / 9.0).abs() < 1e-15);
        assert!((g[1][1] + 1.0 / 9.0).abs() < 1e-15);
        assert!(g[0][1].abs() < 1e-15);
    }

    #[test]
    fn hyperboloid_examples() {
        let h = HyperboloidParam::new(2.0).unwrap();
        assert_eq!(h.b, 0.75);
        assert_eq!(h.defect(&[2.0, 1.0]), 0.0);
        let apex = kappa(&ConePoint::y(vec![h.plane_s(), 0.0]).unwrap());
        assert!((apex.coords()[0] - 2.0 * h.b).abs() < 1e-15);
        assert!(HyperboloidParam::new(1.0).is_err());
    }
}
