use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

use super::chart::{kappa, lorentz_square, ConePoint, ConformalChart, Frame};
use crate::error::{Error, Result};
use crate::testfn::AnalyticFn;

/// Points closer to the cone than this are rejected by the verifiers.
pub const MIN_RHO: f64 = 0.05;

/// Default finite-difference step before the local scaling of [`local_step`].
pub const DEFAULT_STEP: f64 = 1e-2;

/// Rungs of the step ladder tried by [`FdStep::Auto`], centred on the
/// local step.
const LADDER_RUNGS: i32 = 7;

/// Finite-difference step rule of the verifiers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FdStep {
    /// `local_step(p, base)`.
    Fixed(f64),
    /// The rung of `local_step(p, base) * 2^k`, `k = -3..=3`, whose
    /// derivatives change least towards the next rung.
    Auto(f64),
}

/// The step rule of the identity suite at the default step.
pub const DEFAULT_FD: FdStep = FdStep::Auto(DEFAULT_STEP);

impl From<f64> for FdStep {
    fn from(base: f64) -> Self {
        FdStep::Fixed(base)
    }
}

type Jet = (f64, Vec<f64>, Vec<Vec<f64>>);

fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative change between two jets, gradient and Hessian weighted alike.
fn jet_change(a: &Jet, b: &Jet) -> f64 {
    let dg: Vec<f64> = a.1.iter().zip(&b.1).map(|(x, y)| x - y).collect();
    let dh: Vec<Vec<f64>> = a
        .2
        .iter()
        .zip(&b.2)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
        .collect();
    let rel = |d: f64, n: f64| if n > 0.0 { d / n } else { d };
    rel(norm(&dg), norm(&a.1).max(norm(&b.1))) + rel(frobenius(&dh), frobenius(&a.2).max(frobenius(&b.2)))
}

/// [`fd_jet`] at `p` with the step chosen by `step`.
pub fn fd_jet_at<F: Fn(&[f64], f64) -> f64>(f: F, p: &ConePoint, step: FdStep) -> Jet {
    match step {
        FdStep::Fixed(base) => fd_jet(&f, p.coords(), local_step(p, base)),
        FdStep::Auto(base) => {
            let h0 = local_step(p, base);
            let jets: Vec<Jet> = (0..LADDER_RUNGS)
                .map(|k| fd_jet(&f, p.coords(), h0 * 2f64.powi(k - LADDER_RUNGS / 2)))
                .collect();
            let best = (0..jets.len() - 1)
                .min_by(|&i, &j| jet_change(&jets[i], &jets[i + 1]).total_cmp(&jet_change(&jets[j], &jets[j + 1])))
                .unwrap_or(0);
            jets.into_iter().nth(best).expect("ladder is non-empty")
        }
    }
}

fn metric(a: usize) -> f64 {
    if a == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Named closed-form test functions in `n + 1` variables.
pub fn catalog(n: usize) -> Vec<(String, AnalyticFn)> {
    let vars = n + 1;
    let mut affine = vec![0.3; vars];
    affine[0] = 0.7;
    let mut t2 = vec![0; vars];
    t2[0] = 2;
    let mut mixed = vec![0; vars];
    mixed[0] = 1;
    mixed[1] = 1;
    let mut center = vec![0.0; vars];
    center[0] = 1.2;
    center[1] = 0.2;
    vec![
        ("constant".into(), AnalyticFn::constant(vars, 0.8)),
        ("affine".into(), AnalyticFn::affine(&affine, -0.2)),
        ("t_squared".into(), AnalyticFn::monomial(1.0, &t2)),
        ("t_x".into(), AnalyticFn::monomial(0.5, &mixed)),
        (
            "rho_power".into(),
            AnalyticFn::RhoPower {
                vars,
                amplitude: 1.0,
                power: -0.75,
            },
        ),
        (
            "gaussian".into(),
            AnalyticFn::Gaussian {
                amplitude: 1.0,
                center,
                rates: vec![0.6; vars],
            },
        ),
    ]
}

/// One evaluated identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityDefect {
    pub identity: String,
    pub function: String,
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs| / max(|lhs| + |rhs|, scale)`, `scale` being the size
    /// of the terms that cancel (or machine epsilon).
    pub defect: f64,
}

fn relative(lhs: f64, rhs: f64, scale: f64) -> f64 {
    (lhs - rhs).abs() / (lhs.abs() + rhs.abs()).max(scale).max(f64::EPSILON)
}

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Fourth-order central differences of `f` at `p`: gradient and Hessian.
///
/// `f` receives each stencil point together with its `ρ`, taken as
/// `ρ(p) + 2 m(p, δ) + m(δ, δ)`. Near the cone that keeps the cancellation
/// error of `ρ` common to all stencil points instead of independent noise.
pub fn fd_jet<F: Fn(&[f64], f64) -> f64>(f: &F, p: &[f64], h: f64) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let d = p.len();
    let rho = lorentz_square(p);
    let at = |shifts: &[(usize, f64)]| {
        let mut q = p.to_vec();
        let mut r = rho;
        for &(a, v) in shifts {
            q[a] += v;
            r += metric(a) * v * (2.0 * p[a] + v);
        }
        f(&q, r)
    };
    let value = f(p, rho);
    let mut grad = vec![0.0; d];
    let mut hess = vec![vec![0.0; d]; d];
    for a in 0..d {
        let mut g = 0.0;
        let mut s = 0.0;
        for (k, (w1, w2)) in D1.iter().zip(&D2).enumerate() {
            let off = (k as f64 - 2.0) * h;
            let v = if k == 2 { value } else { at(&[(a, off)]) };
            g += w1 * v;
            s += w2 * v;
        }
        grad[a] = g / h;
        hess[a][a] = s / (h * h);
        for b in 0..a {
            let mut m = 0.0;
            for (i, wi) in D1.iter().enumerate() {
                if *wi == 0.0 {
                    continue;
                }
                for (j, wj) in D1.iter().enumerate() {
                    if *wj == 0.0 {
                        continue;
                    }
                    let (oa, ob) = ((i as f64 - 2.0) * h, (j as f64 - 2.0) * h);
                    m += wi * wj * at(&[(a, oa), (b, ob)]);
                }
            }
            hess[a][b] = m / (h * h);
            hess[b][a] = hess[a][b];
        }
    }
    (value, grad, hess)
}

fn q00(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).enumerate().map(|(k, (x, y))| metric(k) * x * y).sum()
}

fn check_point(p: &ConePoint, chart: &ConformalChart) -> Result<()> {
    if p.frame() != Frame::YFrame || p.dim() != chart.n {
        return Err(Error::InvalidIndex("verifiers take n-dimensional points in the (s, y) frame".into()));
    }
    p.require_rho(MIN_RHO)
}

/// Finite-difference step used at `p`: `base` shrunk by the size of the
/// Jacobian of `κ`, `(ρ + 2|p|²)/ρ²`, so the image stencil keeps roughly
/// the same spacing.
pub fn local_step(p: &ConePoint, base: f64) -> f64 {
    let norm2: f64 = p.coords().iter().map(|v| v * v).sum();
    let stretch = (p.rho() + 2.0 * norm2) / (p.rho() * p.rho());
    base * (1.0 / stretch).min(1.0)
}

/// `f∘κ` at `q`, given `ρ(q)`.
fn compose(f: &AnalyticFn, q: &[f64], rho: f64) -> f64 {
    if rho > 0.0 {
        let x: Vec<f64> = q.iter().map(|c| c / rho).collect();
        f.value(&x)
    } else {
        f64::NAN
    }
}

/// `Q00(φ,ψ)∘κ` against `ρ² Q00(φ∘κ, ψ∘κ)`; the right side by finite
/// differences in `(s, y)`.
pub fn verify_q00_scaling(
    phi: &AnalyticFn,
    psi: &AnalyticFn,
    p: &ConePoint,
    chart: &ConformalChart,
    step: impl Into<FdStep>,
) -> Result<IdentityDefect> {
    check_point(p, chart)?;
    let step = step.into();
    let x = kappa(p);
    let (ja, jb) = (phi.jet(x.coords()), psi.jet(x.coords()));
    let lhs = q00(&ja.grad, &jb.grad);
    let (fa, ga, _) = fd_jet_at(|q, r| compose(phi, q, r), p, step);
    let (fb, gb, _) = fd_jet_at(|q, r| compose(psi, q, r), p, step);
    let rho2 = p.rho() * p.rho();
    let rhs = rho2 * q00(&ga, &gb);
    // size of the 1-jets, so constant factors do not leave a 0/0
    let jet = |v: f64, g: &[f64]| v.abs() + g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = rho2 * jet(fa, &ga) * jet(fb, &gb);
    Ok(IdentityDefect {
        identity: "q00_scaling".into(),
        function: String::new(),
        point: p.coords().to_vec(),
        lhs,
        rhs,
        defect: relative(lhs, rhs, scale),
    })
}

/// `φ̃ = ρ^{-α} φ∘κ` evaluated at `q = (s, y)`.
pub fn pulled_back(f: &AnalyticFn, q: &[f64], alpha: f64) -> f64 {
    let rho = lorentz_square(q);
    compose(f, q, rho) * rho.powf(-alpha)
}

/// `□φ̃` by finite differences against `ρ^{-α-2} (□φ)∘κ`.
pub fn verify_conformal_box(
    phi: &AnalyticFn,
    p: &ConePoint,
    chart: &ConformalChart,
    step: impl Into<FdStep>,
) -> Result<IdentityDefect> {
    check_point(p, chart)?;
    let (_, _, hess) = fd_jet_at(|q, r| compose(phi, q, r) * r.powf(-chart.alpha), p, step.into());
    let lhs: f64 = (0..hess.len()).map(|a| metric(a) * hess[a][a]).sum();
    let x = kappa(p);
    let rhs = p.rho().powf(-chart.alpha - 2.0) * phi.wave_operator(x.coords());
    let scale: f64 = (0..hess.len()).map(|a| hess[a][a].abs()).sum();
    Ok(IdentityDefect {
        identity: "conformal_box".into(),
        function: String::new(),
        point: p.coords().to_vec(),
        lhs,
        rhs,
        defect: relative(lhs, rhs, scale),
    })
}

/// `□ρ^{-α}` by finite differences, relative to `ρ^{-α-2}`.
pub fn verify_box_rho_power(
    p: &ConePoint,
    chart: &ConformalChart,
    step: impl Into<FdStep>,
) -> Result<IdentityDefect> {
    check_point(p, chart)?;
    let alpha = chart.alpha;
    let (_, _, hess) = fd_jet_at(|_, r| r.powf(-alpha), p, step.into());
    let lhs: f64 = (0..hess.len()).map(|a| metric(a) * hess[a][a]).sum();
    Ok(IdentityDefect {
        identity: "box_rho_power".into(),
        function: "rho^-alpha".into(),
        point: p.coords().to_vec(),
        lhs,
        rhs: 0.0,
        defect: lhs.abs() / p.rho().powf(-alpha - 2.0),
    })
}

/// `Q00(ρ^β φ̃, ρ^γ ψ̃)` against
/// `ρ^{β+γ-1}(ρ Q00(φ̃,ψ̃) + 2β φ̃ Γ00ψ̃ + 2γ ψ̃ Γ00φ̃ + 4βγ φ̃ψ̃)`, both
/// from exact derivatives.
pub fn verify_q00_power_rule(
    beta: f64,
    gamma: f64,
    phi: &AnalyticFn,
    psi: &AnalyticFn,
    p: &ConePoint,
    chart: &ConformalChart,
) -> Result<IdentityDefect> {
    check_point(p, chart)?;
    let y = p.coords();
    let rho = p.rho();
    let (ja, jb) = (phi.jet(y), psi.jet(y));
    let d_rho: Vec<f64> = y.iter().enumerate().map(|(a, v)| 2.0 * metric(a) * v).collect();
    let weighted = |pow: f64, value: f64, grad: &[f64]| -> Vec<f64> {
        grad.iter()
            .zip(&d_rho)
            .map(|(g, r)| pow * rho.powf(pow - 1.0) * r * value + rho.powf(pow) * g)
            .collect()
    };
    let lhs = q00(&weighted(beta, ja.value, &ja.grad), &weighted(gamma, jb.value, &jb.grad));
    let gamma00 = |g: &[f64]| -> f64 { g.iter().zip(y).map(|(a, b)| a * b).sum() };
    let terms = [
        rho * q00(&ja.grad, &jb.grad),
        2.0 * beta * ja.value * gamma00(&jb.grad),
        2.0 * gamma * jb.value * gamma00(&ja.grad),
        4.0 * beta * gamma * ja.value * jb.value,
    ];
    let factor = rho.powf(beta + gamma - 1.0);
    let rhs = factor * terms.iter().sum::<f64>();
    let scale = factor * terms.iter().map(|t| t.abs()).sum::<f64>();
    Ok(IdentityDefect {
        identity: "q00_power_rule".into(),
        function: String::new(),
        point: y.to_vec(),
        lhs,
        rhs,
        defect: relative(lhs, rhs, scale),
    })
}

/// `|κ(κ(p)) - p| / |p|`.
pub fn involution_defect(p: &ConePoint) -> f64 {
    let back = kappa(&kappa(p));
    let norm = p.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = back
        .coords()
        .iter()
        .zip(p.coords())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    diff / norm
}

/// `|ρ(κ(p)) ρ(p) - 1|`.
pub fn reciprocity_defect(p: &ConePoint) -> f64 {
    (kappa(p).rho() * p.rho() - 1.0).abs()
}

/// Random interior points with `ρ ≥ MIN_RHO`, `s ∈ [0.3, 2]`.
pub fn random_points<R: rand::Rng>(n: usize, count: usize, rng: &mut R) -> Vec<ConePoint> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s: f64 = rng.gen_range(0.3..2.0);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-s..s)).collect();
        let mut c = vec![s];
        c.extend(y);
        if let Ok(p) = ConePoint::y(c) {
            if p.rho() >= MIN_RHO {
                out.push(p);
            }
        }
    }
    out
}

/// Every identity over the catalog at the given points.
pub fn run_identity_suite(
    chart: &ConformalChart,
    points: &[ConePoint],
    step: impl Into<FdStep>,
) -> Result<Vec<IdentityDefect>> {
    let step = step.into();
    let cat = catalog(chart.n);
    let per_point: Vec<Result<Vec<IdentityDefect>>> = points
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let mut out = Vec::new();
            let tag = |mut d: IdentityDefect, name: &str| {
                d.function = name.to_string();
                d
            };
            for (name, f) in &cat {
                let (pname, partner) = &cat[(k + 1) % cat.len()];
                let pair = format!("{name}*{pname}");
                out.push(tag(verify_q00_scaling(f, partner, p, chart, step)?, &pair));
                out.push(tag(verify_conformal_box(f, p, chart, step)?, name));
                let beta = -1.0 + 0.5 * (k % 5) as f64;
                let gamma = 1.5 - 0.75 * (k % 4) as f64;
                out.push(tag(verify_q00_power_rule(beta, gamma, f, partner, p, chart)?, &pair));
            }
            out.push(verify_box_rho_power(p, chart, step)?);
            out.push(IdentityDefect {
                identity: "involution".into(),
                function: "kappa".into(),
                point: p.coords().to_vec(),
                lhs: 0.0,
                rhs: 0.0,
                defect: involution_defect(p),
            });
            out.push(IdentityDefect {
                identity: "rho_reciprocity".into(),
                function: "kappa".into(),
                point: p.coords().to_vec(),
                lhs: kappa(p).rho() * p.rho(),
                rhs: 1.0,
                defect: reciprocity_defect(p),
            });
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_point {
        all.extend(r?);
    }
    Ok(all)
}

/// Writes `identity,function,point,defect` rows and a summary line.
pub fn write_verification_csv<W: Write>(
    out: &mut W,
    rows: &[IdentityDefect],
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "identity,function,point,defect")?;
    for r in rows {
        let point: Vec<String> = r.point.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{},{},{},{:e}", r.identity, r.function, point.join(";"), r.defect)?;
    }
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.defect));
    writeln!(out, "# summary: {} checks, max defect {:e}", rows.len(), worst)?;
    Ok(())
}
