use super::chart::{lorentz_square, HyperboloidParam};
use super::compact::CompactData;
use crate::error::{Error, Result};
use crate::fields::{GridSpec, ScalarField};
use crate::solver::Trajectory;

/// Compactified data on the plane `s0 = 1/(2b)` from a direct solution
/// (`n = 1`) covering the hyperboloid patch `{(t, x) ∈ H_b : |x| ≤ 1}`.
/// `traj` holds `(φ, ψ)`; `dx` holds `(∂_xφ, ∂_xψ)` on the same slices.
/// Points mapping beyond `|x| = 1` get zero data.
pub fn transform_to_compactified(
    traj: &Trajectory,
    dx: &Trajectory,
    param: &HyperboloidParam,
    strip: GridSpec,
    alpha: f64,
) -> Result<CompactData> {
    if traj.grid().dim() != 1 || strip.dim() != 1 {
        return Err(Error::InvalidIndex("the plane transform is one-dimensional".into()));
    }
    let s = param.plane_s();
    let mut f = vec![0.0; strip.len()];
    let mut fs = vec![0.0; strip.len()];
    for i in 0..strip.len() {
        let y = strip.coordinate(i);
        let rho = lorentz_square(&[s, y]);
        if rho <= 0.0 {
            continue;
        }
        let (t, x) = (s / rho, y / rho);
        if x.abs() > 1.0 {
            continue;
        }
        let gap = |e: Error| Error::CoverageGap(format!("(t, x) = ({t}, {x}): {e}"));
        let (phi, psi) = traj.sample(t, &[x]).map_err(gap)?;
        let (phi_x, _) = dx.sample(t, &[x]).map_err(gap)?;
        let dt_ds = 1.0 / rho - 2.0 * s * s / (rho * rho);
        let dx_ds = -2.0 * s * y / (rho * rho);
        let weight = rho.powf(-alpha);
        f[i] = weight * phi;
        fs[i] = weight * (psi * dt_ds + phi_x * dx_ds) - alpha * 2.0 * s * rho.powf(-alpha - 1.0) * phi;
    }
    Ok(CompactData {
        s0: s,
        f: ScalarField::new(strip, f, "phi_tilde")?,
        fs: ScalarField::new(strip, fs, "dphi_tilde_ds")?,
    })
}
