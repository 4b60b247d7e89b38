use super::gamma::{GammaIndex, TimeJet};
use crate::error::Result;
use crate::fields::reduce::max_by;
use crate::fields::derivative;
use crate::solver::State;

/// Denominators at or below `EXCLUSION * ε²` are left out of the sup.
pub const EXCLUSION: f64 = 1e-14;

/// `sup |Q00(φ,φ)| (1+t+|x|) / (2 |∂φ| |Γφ|)` on the current slice, where
/// `|Γφ|²` sums every first-order vector field, translations included.
pub fn nullform_decay_ratio(state: &State, q_max: f64) -> Result<f64> {
    let jet = TimeJet::from_state(state, 1, q_max)?;
    nullform_ratio_of_jet(&jet, state.amplitude())
}

pub fn nullform_ratio_of_jet(jet: &TimeJet, amplitude: f64) -> Result<f64> {
    let grid = *jet.grid();
    let n = grid.dim();
    let mut grad = vec![jet.level(1).clone()];
    for axis in 0..n {
        grad.push(derivative(jet.value(), axis, 1)?);
    }
    let gammas = GammaIndex::all(n)
        .into_iter()
        .map(|g| Ok(jet.gamma(g)?.value().clone()))
        .collect::<Result<Vec<_>>>()?;
    let floor = EXCLUSION * amplitude * amplitude;
    let t = jet.t();
    Ok(max_by(grid.len(), |i| {
        let dt = grad[0].values()[i];
        let spatial: f64 = grad[1..].iter().map(|g| g.values()[i].powi(2)).sum();
        let dphi = (dt * dt + spatial).sqrt();
        let gphi = gammas.iter().map(|g| g.values()[i].powi(2)).sum::<f64>().sqrt();
        let denom = 2.0 * dphi * gphi;
        if denom <= floor || denom == 0.0 {
            return 0.0;
        }
        (dt * dt - spatial).abs() * (1.0 + t + grid.radius(i)) / denom
    }))
}
