use super::chart::{lorentz_square, ConePoint};
use super::fixture::CoefficientFixture;
use super::verify::{fd_jet_at, FdStep, IdentityDefect, MIN_RHO};
use crate::error::{Error, Result};
use crate::testfn::{AnalyticFn, PointJet};

/// The compactified equation is only integrated while its denominator
/// stays above this value.
pub const DENOMINATOR_THRESHOLD: f64 = 0.1;

fn metric(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

/// The right-hand side `□φ̃ = P (Σ K_ab ∂_a∂_bφ̃ + N0)`, split into its
/// second-derivative coefficients `K` and the remainder `N0`. `P` carries
/// the prefactor, `ρ^{2α}` and the denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactifiedSplit {
    pub factor: f64,
    pub denominator: f64,
    pub second: Vec<Vec<f64>>,
    pub lower: f64,
}

impl CompactifiedSplit {
    pub fn value(&self, hess: &[Vec<f64>]) -> f64 {
        let mut acc = self.lower;
        for (row, hrow) in self.second.iter().zip(hess) {
            for (k, h) in row.iter().zip(hrow) {
                acc += k * h;
            }
        }
        self.factor * acc
    }
}

/// Splits the right-hand side at `(s, y)` for the value `f` and gradient
/// `grad` of `φ̃`.
pub fn compactified_split(
    point: &[f64],
    f: f64,
    grad: &[f64],
    fixture: &CoefficientFixture,
) -> Result<CompactifiedSplit> {
    let d = point.len();
    if d != fixture.n + 1 || grad.len() != d {
        return Err(Error::InvalidIndex(format!(
            "point of {d} coordinates does not match the n = {} fixture",
            fixture.n
        )));
    }
    let rho = lorentz_square(point);
    let alpha = (fixture.n as f64 - 1.0) / 2.0;
    let rho_2a = rho.powi(fixture.n as i32 - 1);
    let q: f64 = (0..d).map(|a| metric(a) * grad[a] * grad[a]).sum();
    let gf: f64 = (0..d).map(|a| point[a] * grad[a]).sum();
    let w = |k: usize| fixture.weight(k, rho);
    let denominator = 1.0 - rho_2a * (rho * rho * q + 4.0 * alpha * rho * (alpha * f * f + f * gf));
    if !(denominator >= DENOMINATOR_THRESHOLD) {
        return Err(Error::DenominatorDegenerate {
            value: denominator,
            threshold: DENOMINATOR_THRESHOLD,
        });
    }
    let second = (0..d)
        .map(|b| {
            (0..d)
                .map(|c| {
                    -2.0 * rho * rho * metric(b) * metric(c) * grad[b] * grad[c]
                        - w(1) * f * 0.5 * (metric(b) * grad[b] * point[c] + metric(c) * grad[c] * point[b])
                        - w(2) * f * f * point[b] * point[c]
                })
                .collect()
        })
        .collect();
    let lower = -(w(1) * f * q + w(2) * f * f * gf)
        + w(3) * f * q
        + w(4) * gf * q
        + f * (w(5) * f * f + w(6) * f * gf + w(7) * gf * gf);
    Ok(CompactifiedSplit {
        factor: fixture.prefactor * rho_2a / denominator,
        denominator,
        second,
        lower,
    })
}

/// `□φ̃` demanded by the compactified equation, from a full second-order jet.
pub fn compactified_rhs(jet: &PointJet, point: &ConePoint, fixture: &CoefficientFixture) -> Result<f64> {
    let split = compactified_split(point.coords(), jet.value, &jet.grad, fixture)?;
    Ok(split.value(&jet.hess))
}

/// Two-route check of the compactified right-hand side for a closed-form
/// `φ̃`: the fixture-based value against `ρ^{-α-2}` times the null-form
/// right-hand side of the original equation, evaluated by finite
/// differences of `φ = ρ^{-α} φ̃∘κ` at `κ(p)`.
pub fn verify_compactified_rhs(
    ft: &AnalyticFn,
    p: &ConePoint,
    fixture: &CoefficientFixture,
    step: impl Into<FdStep>,
) -> Result<IdentityDefect> {
    p.require_rho(MIN_RHO)?;
    let alpha = (fixture.n as f64 - 1.0) / 2.0;
    let lhs = compactified_rhs(&ft.jet(p.coords()), p, fixture)?;
    let x = super::chart::kappa(p);
    let phi = |q: &[f64], r: f64| {
        if r > 0.0 {
            let y: Vec<f64> = q.iter().map(|c| c / r).collect();
            r.powf(-alpha) * ft.value(&y)
        } else {
            f64::NAN
        }
    };
    let (_, g, hess) = fd_jet_at(phi, &x, step.into());
    let d = g.len();
    let q: f64 = (0..d).map(|a| metric(a) * g[a] * g[a]).sum();
    let mut q00_phi_q = 0.0;
    let mut scale = 0.0;
    for a in 0..d {
        for b in 0..d {
            let t = 2.0 * metric(a) * metric(b) * g[a] * g[b] * hess[a][b];
            q00_phi_q += t;
            scale += t.abs();
        }
    }
    let weight = p.rho().powf(-alpha - 2.0) / (2.0 * (1.0 - q));
    let rhs = -q00_phi_q * weight;
    let scale = scale * weight.abs();
    Ok(IdentityDefect {
        identity: "compactified_rhs".into(),
        function: String::new(),
        point: p.coords().to_vec(),
        lhs,
        rhs,
        defect: (lhs - rhs).abs() / (lhs.abs() + rhs.abs()).max(scale).max(f64::EPSILON),
    })
}
