//! The membrane equation: null forms, `F(Q)`, residuals of the three
//! equivalent formulations and the quasilinear principal part.
//!
//! Derivative index `0` is time; indices `1..=n` are space. Indices are
//! raised with `m = diag(1, -1, .., -1)`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::reduce::try_fill_by;
use crate::fields::{GridSpec, ScalarField};
use crate::testfn::AnalyticFn;

pub const MAX_VARS: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Geometric,
    Divergence,
    #[default]
    NullForm,
}

/// `φ`, its first derivatives and optionally its second derivatives, all on
/// one grid.
#[derive(Clone, Debug)]
pub struct DerivativeBundle {
    phi: ScalarField,
    dt_phi: ScalarField,
    grad_phi: Vec<ScalarField>,
    /// Upper triangle `(α ≤ β)` in row order.
    second: Option<Vec<ScalarField>>,
}

fn packed(a: usize, b: usize, vars: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    a * vars - a * (a + 1) / 2 + b
}

impl DerivativeBundle {
    pub fn new(
        phi: ScalarField,
        dt_phi: ScalarField,
        grad_phi: Vec<ScalarField>,
        second: Option<Vec<Vec<ScalarField>>>,
    ) -> Result<Self> {
        let n = phi.grid().dim();
        if grad_phi.len() != n {
            return Err(Error::InvalidIndex(format!(
                "{} gradient components for dimension {n}",
                grad_phi.len()
            )));
        }
        phi.check_same_grid(&dt_phi)?;
        for g in &grad_phi {
            phi.check_same_grid(g)?;
        }
        let second = match second {
            None => None,
            Some(rows) => {
                let vars = n + 1;
                if rows.len() != vars || rows.iter().any(|r| r.len() != vars) {
                    return Err(Error::InvalidIndex(format!(
                        "second derivatives must form a {vars}x{vars} family"
                    )));
                }
                let mut out = Vec::new();
                for a in 0..vars {
                    for b in a..vars {
                        phi.check_same_grid(&rows[a][b])?;
                        if rows[a][b].values() != rows[b][a].values() {
                            return Err(Error::InvalidIndex(format!(
                                "second derivative family not symmetric at ({a},{b})"
                            )));
                        }
                        out.push(rows[a][b].clone());
                    }
                }
                Some(out)
            }
        };
        Ok(Self {
            phi,
            dt_phi,
            grad_phi,
            second,
        })
    }

    /// Exact derivatives of a closed-form function sampled on the grid at time `t`.
    pub fn from_function(f: &AnalyticFn, grid: GridSpec, t: f64, with_second: bool) -> Result<Self> {
        let n = grid.dim();
        let vars = n + 1;
        let sample = |orders: Vec<usize>, label: String| {
            ScalarField::from_fn(grid, label, |x| {
                let mut p = [0.0; MAX_VARS];
                p[0] = t;
                p[1..vars].copy_from_slice(x);
                f.partial(&orders, &p[..vars])
            })
        };
        let unit = |a: usize| {
            let mut o = vec![0; vars];
            o[a] += 1;
            o
        };
        let phi = sample(vec![0; vars], "phi".into())?;
        let dt_phi = sample(unit(0), "phi_t".into())?;
        let grad_phi = (1..vars)
            .map(|a| sample(unit(a), format!("phi_{a}")))
            .collect::<Result<Vec<_>>>()?;
        let second = if with_second {
            let mut out = Vec::new();
            for a in 0..vars {
                for b in a..vars {
                    let mut o = unit(a);
                    o[b] += 1;
                    out.push(sample(o, format!("phi_{a}{b}"))?);
                }
            }
            Some(out)
        } else {
            None
        };
        Ok(Self {
            phi,
            dt_phi,
            grad_phi,
            second,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.phi.grid()
    }

    pub fn dim(&self) -> usize {
        self.grid().dim()
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn dt_phi(&self) -> &ScalarField {
        &self.dt_phi
    }

    pub fn grad_phi(&self) -> &[ScalarField] {
        &self.grad_phi
    }

    pub fn has_second(&self) -> bool {
        self.second.is_some()
    }

    pub fn second(&self, a: usize, b: usize) -> Option<&ScalarField> {
        let vars = self.dim() + 1;
        self.second.as_ref().map(|s| &s[packed(a, b, vars)])
    }

    /// Space-time gradient `(φ_t, φ_1, .., φ_n)` at a node.
    pub fn gradient_at(&self, node: usize) -> [f64; MAX_VARS] {
        let mut d = [0.0; MAX_VARS];
        d[0] = self.dt_phi.value(node);
        for (i, g) in self.grad_phi.iter().enumerate() {
            d[i + 1] = g.value(node);
        }
        d
    }

    pub fn hessian_at(&self, node: usize) -> Result<[[f64; MAX_VARS]; MAX_VARS]> {
        let second = self.second.as_ref().ok_or(Error::MissingSecondDerivatives)?;
        let vars = self.dim() + 1;
        let mut h = [[0.0; MAX_VARS]; MAX_VARS];
        for a in 0..vars {
            for b in a..vars {
                let v = second[packed(a, b, vars)].value(node);
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        Ok(h)
    }

    fn check_same_grid(&self, other: &DerivativeBundle) -> Result<()> {
        self.phi.check_same_grid(&other.phi)
    }
}

fn metric(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `Q00(a, b) = a_t b_t - Σ a_i b_i` for space-time gradients.
pub fn q00_point(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(k, (x, y))| metric(k) * x * y)
        .sum()
}

/// `□φ = φ_tt - Σ φ_ii` from a Hessian.
pub fn box_point(hess: &[[f64; MAX_VARS]; MAX_VARS], vars: usize) -> f64 {
    (0..vars).map(|a| metric(a) * hess[a][a]).sum()
}

/// `Q00(φ, Q00(φ,φ)) = 2 ∂^αφ ∂^βφ ∂_α∂_βφ`.
pub fn q00_phi_q_point(d: &[f64], hess: &[[f64; MAX_VARS]; MAX_VARS], vars: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..vars {
        for b in 0..vars {
            s += metric(a) * d[a] * metric(b) * d[b] * hess[a][b];
        }
    }
    2.0 * s
}

fn hyperbolic_gap(q: f64, node: usize) -> Result<f64> {
    let gap = 1.0 - q;
    if gap > 0.0 {
        Ok(gap)
    } else {
        Err(Error::NonHyperbolic { node, q, t: None })
    }
}

/// `h^{αβ} = m^{αβ} + ∂^αφ ∂^βφ / (1 - Q)`.
pub fn principal_point(d: &[f64], vars: usize, node: usize) -> Result<[[f64; MAX_VARS]; MAX_VARS]> {
    let q = q00_point(&d[..vars], &d[..vars]);
    let w = 1.0 / hyperbolic_gap(q, node)?;
    let mut h = [[0.0; MAX_VARS]; MAX_VARS];
    for a in 0..vars {
        for b in 0..vars {
            let m = if a == b { metric(a) } else { 0.0 };
            h[a][b] = m + metric(a) * d[a] * metric(b) * d[b] * w;
        }
    }
    Ok(h)
}

pub fn residual_nullform_point(d: &[f64], hess: &[[f64; MAX_VARS]; MAX_VARS], vars: usize, node: usize) -> Result<f64> {
    let q = q00_point(&d[..vars], &d[..vars]);
    let gap = hyperbolic_gap(q, node)?;
    Ok(box_point(hess, vars) + q00_phi_q_point(d, hess, vars) / (2.0 * gap))
}

/// `∂_a Q = 2 ∂^βφ ∂_β∂_aφ`.
fn grad_q(d: &[f64], hess: &[[f64; MAX_VARS]; MAX_VARS], vars: usize) -> [f64; MAX_VARS] {
    let mut g = [0.0; MAX_VARS];
    for (a, ga) in g.iter_mut().enumerate().take(vars) {
        *ga = 2.0 * (0..vars).map(|b| metric(b) * d[b] * hess[b][a]).sum::<f64>();
    }
    g
}

/// Left side of the geometric form: `Σ_a m^{aa} ∂_a(φ_a W)`, `W = (1 - Q)^{-1/2}`.
pub fn residual_geometric_point(d: &[f64], hess: &[[f64; MAX_VARS]; MAX_VARS], vars: usize, node: usize) -> Result<f64> {
    let q = q00_point(&d[..vars], &d[..vars]);
    let gap = hyperbolic_gap(q, node)?;
    let w = gap.powf(-0.5);
    let dq = grad_q(d, hess, vars);
    let mut s = 0.0;
    for a in 0..vars {
        let dw = 0.5 * w * w * w * dq[a];
        s += metric(a) * (hess[a][a] * w + d[a] * dw);
    }
    Ok(s)
}

/// `□φ - σ [∂_t(φ_t F) - Σ ∂_i(φ_i F)]` with the sign `σ` from the fixture.
pub fn residual_divergence_point(d: &[f64], hess: &[[f64; MAX_VARS]; MAX_VARS], vars: usize, node: usize) -> Result<f64> {
    let q = q00_point(&d[..vars], &d[..vars]);
    let gap = hyperbolic_gap(q, node)?;
    let f = -1.0 + gap.powf(-0.5);
    let dq = grad_q(d, hess, vars);
    let mut flux = 0.0;
    for a in 0..vars {
        let df = 0.5 * gap.powf(-1.5) * dq[a];
        flux += metric(a) * (hess[a][a] * f + d[a] * df);
    }
    Ok(box_point(hess, vars) - divergence_sign() * flux)
}

const MEMBRANE_FIXTURE: &str = include_str!("../fixtures/membrane_identities.txt");

/// Overall sign `σ` in `□φ = σ [∂_t(φ_t F) - Σ ∂_i(φ_i F)]`, as settled by the
/// symbolic oracle.
pub fn divergence_sign() -> f64 {
    static SIGN: OnceLock<f64> = OnceLock::new();
    *SIGN.get_or_init(|| {
        fixture_value("divergence_form_sign_n1")
            .expect("membrane fixture lacks divergence_form_sign_n1")
    })
}

/// Reads a numeric entry from the committed membrane fixture. Rational values
/// such as `4/3` are accepted; entries with a `_decimal` twin return that.
pub fn fixture_value(key: &str) -> Option<f64> {
    let lookup = |k: &str| {
        MEMBRANE_FIXTURE.lines().find_map(|line| {
            let line = line.trim();
            if line.starts_with('#') {
                return None;
            }
            let (name, value) = line.split_once('=')?;
            (name.trim() == k).then(|| value.trim().to_string())
        })
    };
    if let Some(v) = lookup(&format!("{key}_decimal")) {
        return v.parse().ok();
    }
    let v = lookup(key)?;
    match v.split_once('/') {
        Some((num, den)) => Some(num.trim().parse::<f64>().ok()? / den.trim().parse::<f64>().ok()?),
        None => v.parse().ok(),
    }
}

fn pointwise<F>(bundle: &DerivativeBundle, label: &str, need_second: bool, f: F) -> Result<ScalarField>
where
    F: Fn(&[f64; MAX_VARS], &[[f64; MAX_VARS]; MAX_VARS], usize) -> Result<f64> + Sync,
{
    if need_second && !bundle.has_second() {
        return Err(Error::MissingSecondDerivatives);
    }
    let grid = *bundle.grid();
    let mut out = vec![0.0; grid.len()];
    try_fill_by(&mut out, |node| {
        let d = bundle.gradient_at(node);
        let h = if need_second {
            bundle.hessian_at(node)?
        } else {
            [[0.0; MAX_VARS]; MAX_VARS]
        };
        f(&d, &h, node)
    })?;
    ScalarField::new(grid, out, label)
}

pub fn q00(a: &DerivativeBundle, b: &DerivativeBundle) -> Result<ScalarField> {
    a.check_same_grid(b)?;
    let vars = a.dim() + 1;
    pointwise(a, "q00", false, |da, _, node| {
        Ok(q00_point(&da[..vars], &b.gradient_at(node)[..vars]))
    })
}

/// `Q_ij(a, b) = ∂_i a ∂_j b - ∂_j a ∂_i b`, indices in `0..=n` with 0 = time.
pub fn qij(a: &DerivativeBundle, b: &DerivativeBundle, i: usize, j: usize) -> Result<ScalarField> {
    a.check_same_grid(b)?;
    let n = a.dim();
    if i == j || i > n || j > n {
        return Err(Error::InvalidIndex(format!(
            "null form Q_{{{i}{j}}} needs distinct indices in 0..={n}"
        )));
    }
    pointwise(a, &format!("q{i}{j}"), false, |da, _, node| {
        let db = b.gradient_at(node);
        Ok(da[i] * db[j] - da[j] * db[i])
    })
}

/// `F(q) = -1 + (1 - q)^{-1/2}`.
pub fn capital_f(q: &ScalarField) -> Result<ScalarField> {
    let grid = *q.grid();
    let v = q.values();
    let mut out = vec![0.0; v.len()];
    try_fill_by(&mut out, |node| -> Result<f64> {
        Ok(-1.0 + hyperbolic_gap(v[node], node)?.powf(-0.5))
    })?;
    ScalarField::new(grid, out, "F")
}

pub fn residual_nullform(b: &DerivativeBundle) -> Result<ScalarField> {
    let vars = b.dim() + 1;
    pointwise(b, "residual_nullform", true, |d, h, node| {
        residual_nullform_point(d, h, vars, node)
    })
}

pub fn residual_geometric(b: &DerivativeBundle) -> Result<ScalarField> {
    let vars = b.dim() + 1;
    pointwise(b, "residual_geometric", true, |d, h, node| {
        residual_geometric_point(d, h, vars, node)
    })
}

pub fn residual_divergence(b: &DerivativeBundle) -> Result<ScalarField> {
    let vars = b.dim() + 1;
    pointwise(b, "residual_divergence", true, |d, h, node| {
        residual_divergence_point(d, h, vars, node)
    })
}

pub fn residual(b: &DerivativeBundle, formulation: Formulation) -> Result<ScalarField> {
    match formulation {
        Formulation::Geometric => residual_geometric(b),
        Formulation::Divergence => residual_divergence(b),
        Formulation::NullForm => residual_nullform(b),
    }
}

/// Coefficient family `h^{αβ}` as `(n+1)²` fields, row-major.
pub fn principal_coefficients(b: &DerivativeBundle) -> Result<Vec<Vec<ScalarField>>> {
    let grid = *b.grid();
    let vars = b.dim() + 1;
    let mut flat = vec![vec![0.0; grid.len()]; vars * vars];
    let mut failure = None;
    for node in 0..grid.len() {
        match principal_point(&b.gradient_at(node), vars, node) {
            Ok(h) => {
                for a in 0..vars {
                    for c in 0..vars {
                        flat[a * vars + c][node] = h[a][c];
                    }
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let mut rows = Vec::new();
    let mut it = flat.into_iter();
    for a in 0..vars {
        let mut row = Vec::new();
        for c in 0..vars {
            let values = it.next().expect("vars^2 coefficient arrays");
            row.push(ScalarField::new(grid, values, format!("h{a}{c}"))?);
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1() -> GridSpec {
        GridSpec::new(1, 2.0, 9).unwrap()
    }

    fn constant_bundle(grid: GridSpec, phi_t: f64, grads: &[f64]) -> DerivativeBundle {
        let mut coefs = vec![phi_t];
        coefs.extend_from_slice(grads);
        DerivativeBundle::from_function(&AnalyticFn::affine(&coefs, 0.0), grid, 0.0, true).unwrap()
    }

    #[test]
    fn q00_examples() {
        let g = grid1();
        let b = constant_bundle(g, 1.0, &[0.0]);
        assert!(q00(&b, &b).unwrap().values().iter().all(|&v| v == 1.0));
        let b = constant_bundle(g, 0.3, &[0.4]);
        let q = q00(&b, &b).unwrap();
        assert!(q.values().iter().all(|&v| (v + 0.07).abs() < 1e-15));
    }

    #[test]
    fn qij_examples() {
        let g = GridSpec::new(2, 1.0, 5).unwrap();
        let a = constant_bundle(g, 0.0, &[1.0, 0.0]);
        let b = constant_bundle(g, 0.0, &[0.0, 1.0]);
        assert!(qij(&a, &b, 1, 2).unwrap().values().iter().all(|&v| v == 1.0));
        assert!(qij(&a, &b, 2, 1).unwrap().values().iter().all(|&v| v == -1.0));
        assert!(qij(&a, &a, 1, 2).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(qij(&a, &b, 1, 1).is_err());
        assert!(qij(&a, &b, 0, 3).is_err());
    }

    #[test]
    fn capital_f_examples() {
        let g = grid1();
        let zero = ScalarField::zeros(g, "q");
        assert_eq!(capital_f(&zero).unwrap().norm_sup(), 0.0);
        let q = ScalarField::constant(g, 0.75, "q").unwrap();
        assert!(capital_f(&q).unwrap().values().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let one = ScalarField::constant(g, 1.0, "q").unwrap();
        assert!(matches!(capital_f(&one), Err(Error::NonHyperbolic { node: 0, .. })));
    }

    #[test]
    fn affine_fields_have_zero_residuals() {
        let g = GridSpec::new(2, 1.0, 5).unwrap();
        let b = constant_bundle(g, 0.4, &[0.2, -0.3]);
        for f in [Formulation::Geometric, Formulation::Divergence, Formulation::NullForm] {
            assert!(residual(&b, f).unwrap().norm_sup() < 1e-15);
        }
        let zero = constant_bundle(g, 0.0, &[0.0, 0.0]);
        assert_eq!(residual_nullform(&zero).unwrap().norm_sup(), 0.0);
    }

    #[test]
    fn principal_coefficients_examples() {
        let g = grid1();
        let flat = principal_coefficients(&constant_bundle(g, 0.0, &[0.0])).unwrap();
        assert_eq!(flat[0][0].value(3), 1.0);
        assert_eq!(flat[1][1].value(3), -1.0);
        assert_eq!(flat[0][1].value(3), 0.0);

        let h = principal_coefficients(&constant_bundle(g, 0.5, &[0.0])).unwrap();
        let expected = fixture_value("h00_phi_t_half").unwrap();
        assert!((h[0][0].value(0) - expected).abs() < 1e-15);
        assert_eq!(h[0][1].value(0), 0.0);
        assert_eq!(h[1][1].value(0), -1.0);
    }

    #[test]
    fn quadratic_in_time_matches_oracle() {
        // φ = t²/10 at t = 2, x = 0
        let g = grid1();
        let f = AnalyticFn::monomial(0.1, &[2, 0]);
        let b = DerivativeBundle::from_function(&f, g, 2.0, true).unwrap();
        let origin = g.nearest_index(0.0).unwrap();
        let nf = residual_nullform(&b).unwrap().value(origin);
        let geo = residual_geometric(&b).unwrap().value(origin);
        assert!((nf - fixture_value("nullform_residual_quadratic").unwrap()).abs() < 1e-15);
        assert!((geo - fixture_value("geometric_residual_quadratic").unwrap()).abs() < 1e-15);
    }

    #[test]
    fn missing_second_derivatives_rejected() {
        let g = grid1();
        let b = DerivativeBundle::from_function(&AnalyticFn::constant(2, 1.0), g, 0.0, false).unwrap();
        assert!(matches!(residual_nullform(&b), Err(Error::MissingSecondDerivatives)));
        assert!(q00(&b, &b).is_ok());
    }

    #[test]
    fn asymmetric_second_family_rejected() {
        let g = grid1();
        let z = ScalarField::zeros(g, "z");
        let one = ScalarField::constant(g, 1.0, "one").unwrap();
        let rows = vec![vec![z.clone(), one], vec![z.clone(), z.clone()]];
        let err = DerivativeBundle::new(z.clone(), z.clone(), vec![z], Some(rows));
        assert!(err.is_err());
    }
}
