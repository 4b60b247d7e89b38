//! Fused stencil kernels for the evolution.
//!
//! Values outside the grid are taken as zero (Dirichlet walls one cell
//! beyond the last node), so every node uses the centred 5-point stencils.

use crate::error::{Error, Result};
use crate::fields::reduce::try_fill_by;
use crate::fields::{GridSpec, D1_CENTERED, D2_CENTERED};
use crate::membrane::MAX_VARS;

/// Below this squared gradient size the nonlinear corrections are far under
/// rounding; the kernels fall back to the flat wave operator, which also
/// keeps products of tiny numbers out of the subnormal range.
const LINEAR_CUTOFF: f64 = 1e-30;

#[derive(Clone, Copy)]
pub(crate) struct Geometry {
    n: usize,
    m: usize,
    strides: [usize; 3],
    inv_h: f64,
    inv_h2: f64,
}

impl Geometry {
    pub(crate) fn new(grid: &GridSpec) -> Self {
        let mut strides = [0; 3];
        for (a, s) in strides.iter_mut().enumerate().take(grid.dim()) {
            *s = grid.stride(a);
        }
        let h = grid.spacing();
        Self {
            n: grid.dim(),
            m: grid.points(),
            strides,
            inv_h: 1.0 / h,
            inv_h2: 1.0 / (h * h),
        }
    }

    fn indices(&self, node: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rest = node;
        for i in idx.iter_mut().take(self.n) {
            *i = rest % self.m;
            rest /= self.m;
        }
        idx
    }

    fn interior(&self, idx: &[usize; 3]) -> bool {
        idx[..self.n].iter().all(|&i| i >= 2 && i + 2 < self.m)
    }
}

/// Where a node sits: grid indices and whether the full stencil fits.
#[derive(Clone, Copy)]
struct Site {
    node: usize,
    idx: [usize; 3],
    interior: bool,
}

impl Site {
    #[inline]
    fn new(g: &Geometry, node: usize) -> Self {
        let idx = g.indices(node);
        Self {
            node,
            idx,
            interior: g.interior(&idx),
        }
    }
}

/// Stencil access around one node, zero outside the grid.
struct Probe<'a> {
    v: &'a [f64],
    g: &'a Geometry,
    site: Site,
}

impl<'a> Probe<'a> {
    #[inline]
    fn new(v: &'a [f64], g: &'a Geometry, site: Site) -> Self {
        Self { v, g, site }
    }

    #[inline]
    fn at(&self, a: usize, p: isize, b: usize, q: isize) -> f64 {
        let off = p * self.g.strides[a] as isize + q * self.g.strides[b] as isize;
        if self.site.interior {
            return self.v[(self.site.node as isize + off) as usize];
        }
        let ia = self.site.idx[a] as isize + p;
        let ib = self.site.idx[b] as isize + q;
        let m = self.g.m as isize;
        let inside = |i: isize| (0..m).contains(&i);
        if a == b {
            if !inside(self.site.idx[a] as isize + p + q) {
                return 0.0;
            }
        } else if !(inside(ia) && inside(ib)) {
            return 0.0;
        }
        self.v[(self.site.node as isize + off) as usize]
    }

    #[inline]
    fn d1(&self, a: usize) -> f64 {
        let w = &D1_CENTERED;
        let s = if self.site.interior {
            let st = self.g.strides[a];
            let c = self.site.node;
            let v = self.v;
            w[0] * v[c - 2 * st] + w[1] * v[c - st] + w[3] * v[c + st] + w[4] * v[c + 2 * st]
        } else {
            w[0] * self.at(a, -2, a, 0) + w[1] * self.at(a, -1, a, 0) + w[3] * self.at(a, 1, a, 0) + w[4] * self.at(a, 2, a, 0)
        };
        s * self.g.inv_h
    }

    #[inline]
    fn d2(&self, a: usize) -> f64 {
        let w = &D2_CENTERED;
        let s = if self.site.interior {
            let st = self.g.strides[a];
            let c = self.site.node;
            let v = self.v;
            w[0] * v[c - 2 * st] + w[1] * v[c - st] + w[2] * v[c] + w[3] * v[c + st] + w[4] * v[c + 2 * st]
        } else {
            let mut s = 0.0;
            for (k, wk) in w.iter().enumerate() {
                s += wk * self.at(a, k as isize - 2, a, 0);
            }
            s
        };
        s * self.g.inv_h2
    }

    #[inline]
    fn mixed(&self, a: usize, b: usize) -> f64 {
        const TAPS: [(usize, isize); 4] = [(0, -2), (1, -1), (3, 1), (4, 2)];
        let mut s = 0.0;
        for (p, dp) in TAPS {
            let mut inner = 0.0;
            for (q, dq) in TAPS {
                inner += D1_CENTERED[q] * self.at(a, dp, b, dq);
            }
            s += D1_CENTERED[p] * inner;
        }
        s * self.g.inv_h2
    }

    fn hessian(&self) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for a in 0..self.g.n {
            h[a][a] = self.d2(a);
            for b in a + 1..self.g.n {
                let v = self.mixed(a, b);
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        h
    }
}

/// Principal coefficients from `u = (ψ, -φ_1, .., -φ_n)` (the raised
/// gradient): `h^{αβ} = m^{αβ} + u^α u^β / (1 - Q)`.
fn coefficients(u: &[f64; MAX_VARS], vars: usize, w: f64) -> [[f64; MAX_VARS]; MAX_VARS] {
    let mut h = [[0.0; MAX_VARS]; MAX_VARS];
    for a in 0..vars {
        for b in 0..vars {
            let m = if a != b {
                0.0
            } else if a == 0 {
                1.0
            } else {
                -1.0
            };
            h[a][b] = m + u[a] * u[b] * w;
        }
    }
    h
}

fn raised_gradient(psi: f64, grad: &[f64; 3], n: usize) -> ([f64; MAX_VARS], f64) {
    let mut u = [0.0; MAX_VARS];
    u[0] = psi;
    let mut size = psi * psi;
    for i in 0..n {
        u[i + 1] = -grad[i];
        size += grad[i] * grad[i];
    }
    (u, size)
}

fn breakdown(q: f64, q_max: f64, node: usize) -> Result<f64> {
    if q >= q_max || q.is_nan() {
        return Err(Error::NonHyperbolic { node, q, t: None });
    }
    Ok(1.0 / (1.0 - q))
}

/// `φ_tt = -(2 h^{0i} ∂_iψ + h^{ij} ∂_i∂_jφ) / h^{00}` at every node.
pub(crate) fn acceleration_into(
    g: &Geometry,
    phi: &[f64],
    psi: &[f64],
    q_max: f64,
    out: &mut [f64],
) -> Result<()> {
    let n = g.n;
    let vars = n + 1;
    try_fill_by(out, |node| {
        let site = Site::new(g, node);
        let pp = Probe::new(phi, g, site);
        let pq = Probe::new(psi, g, site);
        let mut grad = [0.0; 3];
        let mut dpsi = [0.0; 3];
        for a in 0..n {
            grad[a] = pp.d1(a);
            dpsi[a] = pq.d1(a);
        }
        let (u, size) = raised_gradient(psi[node], &grad, n);
        if size < LINEAR_CUTOFF {
            return Ok((0..n).map(|a| pp.d2(a)).sum());
        }
        let q = u[0] * u[0] - (1..vars).map(|a| u[a] * u[a]).sum::<f64>();
        let w = breakdown(q, q_max, node)?;
        let h = coefficients(&u, vars, w);
        let hess = pp.hessian();
        let mut num = 0.0;
        for i in 0..n {
            num += 2.0 * h[0][i + 1] * dpsi[i];
            for j in 0..n {
                num += h[i + 1][j + 1] * hess[i][j];
            }
        }
        Ok(-num / h[0][0])
    })
}

/// Time derivative of the acceleration along the flow, from the linearised
/// update: `∂_t φ_tt` in terms of `φ, ψ, φ_tt` and their spatial derivatives.
pub(crate) fn acceleration_rate_into(
    g: &Geometry,
    phi: &[f64],
    psi: &[f64],
    acc: &[f64],
    q_max: f64,
    out: &mut [f64],
) -> Result<()> {
    let n = g.n;
    let vars = n + 1;
    try_fill_by(out, |node| {
        let site = Site::new(g, node);
        let pp = Probe::new(phi, g, site);
        let pq = Probe::new(psi, g, site);
        let pa = Probe::new(acc, g, site);
        let mut grad = [0.0; 3];
        let mut dpsi = [0.0; 3];
        let mut dacc = [0.0; 3];
        for a in 0..n {
            grad[a] = pp.d1(a);
            dpsi[a] = pq.d1(a);
            dacc[a] = pa.d1(a);
        }
        let (u, size) = raised_gradient(psi[node], &grad, n);
        if size < LINEAR_CUTOFF {
            return Ok((0..n).map(|a| pq.d2(a)).sum());
        }
        let a_here = acc[node];
        let q = u[0] * u[0] - (1..vars).map(|a| u[a] * u[a]).sum::<f64>();
        let w = breakdown(q, q_max, node)?;
        let h = coefficients(&u, vars, w);
        let hess_phi = pp.hessian();
        let hess_psi = pq.hessian();

        let mut du = [0.0; MAX_VARS];
        du[0] = a_here;
        for i in 0..n {
            du[i + 1] = -dpsi[i];
        }
        let dq = 2.0 * (u[0] * du[0] - (1..vars).map(|k| u[k] * du[k]).sum::<f64>());
        let dw = w * w * dq;
        let dh = |a: usize, b: usize| (du[a] * u[b] + u[a] * du[b]) * w + u[a] * u[b] * dw;

        let mut dnum = 0.0;
        for i in 0..n {
            dnum += 2.0 * (dh(0, i + 1) * dpsi[i] + h[0][i + 1] * dacc[i]);
            for j in 0..n {
                dnum += dh(i + 1, j + 1) * hess_phi[i][j] + h[i + 1][j + 1] * hess_psi[i][j];
            }
        }
        Ok(-(dnum + a_here * dh(0, 0)) / h[0][0])
    })
}
