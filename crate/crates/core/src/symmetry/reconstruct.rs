use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::gamma::{GammaIndex, TimeJet};
use crate::error::{Error, Result};
use crate::fields::derivative;
use crate::solver::State;

/// Reconstruction needs `|t - |x|| ≥ CONE_CLEARANCE (1 + t)`.
pub const CONE_CLEARANCE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientReconstruction {
    /// `(∂_t φ, ∂_1 φ, ..)` recovered from the Lorentz and scaling fields.
    pub gradient: Vec<f64>,
    /// The same gradient by direct differentiation.
    pub direct: Vec<f64>,
    /// `|∂φ| |t - |x|| / Σ |Γφ|`, zero when the sum vanishes.
    pub ratio: f64,
}

/// Coefficients `c` with `Γ = Σ_a c_a ∂_a` at `(t, x)`.
fn coefficients(g: GammaIndex, t: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let coord = |a: usize| if a == 0 { t } else { x[a - 1] };
    let lambda = |a: usize| if a == 0 { 1.0 } else { -1.0 };
    let mut c = vec![0.0; n + 1];
    match g {
        GammaIndex::Translation(j) => c[j] = 1.0,
        GammaIndex::Lorentz(j, k) => {
            c[k] += lambda(j) * coord(j);
            c[j] -= lambda(k) * coord(k);
        }
        GammaIndex::Scaling => {
            for (a, ca) in c.iter_mut().enumerate() {
                *ca = coord(a);
            }
        }
    }
    c
}

pub fn reconstruct_gradient(state: &State, node: usize, q_max: f64) -> Result<GradientReconstruction> {
    let jet = TimeJet::from_state(state, 1, q_max)?;
    reconstruct_gradient_from_jet(&jet, node)
}

pub fn reconstruct_gradient_from_jet(jet: &TimeJet, node: usize) -> Result<GradientReconstruction> {
    Ok(reconstruct_gradients(jet, &[node])?.remove(0))
}

/// Solves the least-squares system `Γφ = Σ_a c_a(Γ) ∂_aφ` over the Lorentz
/// fields and the scaling field at each node.
pub fn reconstruct_gradients(jet: &TimeJet, nodes: &[usize]) -> Result<Vec<GradientReconstruction>> {
    let grid = *jet.grid();
    let n = grid.dim();
    let t = jet.t();
    let mut fields = GammaIndex::lorentz(n);
    fields.push(GammaIndex::Scaling);
    let gamma_values = fields
        .iter()
        .map(|g| Ok(jet.gamma(*g)?.value().clone()))
        .collect::<Result<Vec<_>>>()?;
    let mut direct_fields = vec![jet.level(1).clone()];
    for axis in 0..n {
        direct_fields.push(derivative(jet.value(), axis, 1)?);
    }
    nodes
        .iter()
        .map(|&node| {
            if node >= grid.len() {
                return Err(Error::InvalidIndex(format!("node {node} outside grid of {}", grid.len())));
            }
            let gap = (t - grid.radius(node)).abs();
            if gap < CONE_CLEARANCE * (1.0 + t) {
                return Err(Error::SingularSystem(format!(
                    "|t - |x|| = {gap} is below {CONE_CLEARANCE} (1 + t)"
                )));
            }
            let x = &grid.node_coords(node)[..n];
            let rows: Vec<f64> = fields.iter().flat_map(|g| coefficients(*g, t, x)).collect();
            let rhs: Vec<f64> = gamma_values.iter().map(|f| f.value(node)).collect();
            let a = DMatrix::from_row_slice(fields.len(), n + 1, &rows);
            let svd = a.svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smin > 1e-10 * smax) {
                return Err(Error::SingularSystem(format!("singular values {smin} / {smax}")));
            }
            let sol = svd
                .solve(&DVector::from_column_slice(&rhs), 1e-12 * smax)
                .map_err(|e| Error::SingularSystem(e.to_string()))?;
            let gradient: Vec<f64> = sol.iter().copied().collect();
            let direct = direct_fields.iter().map(|f| f.value(node)).collect();
            let sum: f64 = rhs.iter().map(|v| v.abs()).sum();
            let norm = gradient.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ratio = if sum > 0.0 { norm * gap / sum } else { 0.0 };
            Ok(GradientReconstruction {
                gradient,
                direct,
                ratio,
            })
        })
        .collect()
}
