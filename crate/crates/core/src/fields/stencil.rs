use std::sync::OnceLock;

use super::field::ScalarField;
use super::reduce::fill_by;
use crate::error::{Error, Result};

/// Finite-difference weights by Fornberg's recursion.
///
/// Returns `w[k][j]`: the weight of node `nodes[j]` in the approximation of
/// the `k`-th derivative at `z`, for `k = 0..=max_order`.
pub fn fd_weights(z: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let np = nodes.len();
    let mut c = vec![vec![0.0; np]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..np {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Lagrange interpolation weights of `nodes` at `z`.
pub fn lagrange_weights(z: f64, nodes: &[f64]) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, &xj)| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &xk)| (z - xk) / (xj - xk))
                .product()
        })
        .collect()
}

pub(crate) const D1_CENTERED: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
pub(crate) const D2_CENTERED: [f64; 5] = [
    -1.0 / 12.0,
    16.0 / 12.0,
    -30.0 / 12.0,
    16.0 / 12.0,
    -1.0 / 12.0,
];

/// A stencil in units of the grid spacing: node offsets and weights.
#[derive(Clone, Debug)]
struct Stencil {
    offsets: Vec<isize>,
    weights: Vec<f64>,
}

/// Stencils for the two nodes nearest each boundary, per derivative order.
/// Index `[order - 1][k]`, `k = 0, 1` for the left nodes `0, 1` and
/// `k = 2, 3` for the right nodes `m - 2, m - 1`.
struct BoundaryTable {
    width: usize,
    stencils: [[Stencil; 4]; 2],
}

fn one_sided(order: usize, width: usize, first_offset: isize) -> Stencil {
    let offsets: Vec<isize> = (0..width as isize).map(|k| first_offset + k).collect();
    let nodes: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
    let weights = fd_weights(0.0, &nodes, order).swap_remove(order);
    Stencil { offsets, weights }
}

fn build_table(width6: usize) -> BoundaryTable {
    let make = |order: usize| {
        // 4th order needs 5 nodes for the first derivative, 6 for the second.
        let w = if order == 1 { 5 } else { width6 };
        [
            one_sided(order, w, 0),
            one_sided(order, w, -1),
            one_sided(order, w, -(w as isize) + 2),
            one_sided(order, w, -(w as isize) + 1),
        ]
    };
    BoundaryTable {
        width: width6,
        stencils: [make(1), make(2)],
    }
}

fn boundary_table(points: usize) -> &'static BoundaryTable {
    static WIDE: OnceLock<BoundaryTable> = OnceLock::new();
    static NARROW: OnceLock<BoundaryTable> = OnceLock::new();
    if points >= 6 {
        WIDE.get_or_init(|| build_table(6))
    } else {
        // A 5-node axis cannot hold the 6-node second-derivative stencil.
        NARROW.get_or_init(|| build_table(5))
    }
}

/// Derivative of `order` (1 or 2) along `axis`: centred 5-point stencils in
/// the interior, shifted one-sided 4th-order stencils on the two outermost
/// nodes at each end.
pub fn derivative(field: &ScalarField, axis: usize, order: usize) -> Result<ScalarField> {
    let grid = *field.grid();
    grid.check_axis(axis)?;
    if !(order == 1 || order == 2) {
        return Err(Error::InvalidIndex(format!(
            "derivative order {order} not in {{1, 2}}"
        )));
    }
    let m = grid.points();
    let stride = grid.stride(axis);
    let inv = grid.spacing().powi(-(order as i32));
    let centered = if order == 1 { &D1_CENTERED } else { &D2_CENTERED };
    let table = boundary_table(m);
    debug_assert!(table.width <= m);
    let v = field.values();
    let mut out = vec![0.0; v.len()];
    fill_by(&mut out, |node| {
        let i = (node / stride) % m;
        let line_start = node - i * stride;
        let at = |k: isize| v[line_start + (i as isize + k) as usize * stride];
        let s = if i >= 2 && i + 2 < m {
            centered
                .iter()
                .enumerate()
                .map(|(k, w)| w * at(k as isize - 2))
                .sum::<f64>()
        } else {
            let slot = match i {
                0 => 0,
                1 => 1,
                _ if i == m - 2 => 2,
                _ => 3,
            };
            let st = &table.stencils[order - 1][slot];
            st.offsets
                .iter()
                .zip(&st.weights)
                .map(|(&o, w)| w * at(o))
                .sum::<f64>()
        };
        s * inv
    });
    ScalarField::new(grid, out, format!("d{order}_{}({})", axis + 1, field.label()))
}

/// Number of nodes per axis used by [`interpolate`]; cubic Lagrange,
/// 4th-order accurate.
pub const INTERP_POINTS: usize = 4;

/// Tensor-product cubic Lagrange interpolation at an arbitrary point.
pub fn interpolate(field: &ScalarField, point: &[f64]) -> Result<f64> {
    let grid = field.grid();
    let n = grid.dim();
    if point.len() != n {
        return Err(Error::InvalidIndex(format!(
            "point has {} coordinates, grid dimension is {n}",
            point.len()
        )));
    }
    let h = grid.spacing();
    let m = grid.points();
    let tol = 1e-9 * h;
    let mut starts = [0usize; 3];
    let mut weights = [[0.0; INTERP_POINTS]; 3];
    for axis in 0..n {
        let x = point[axis];
        if !(x.abs() <= grid.extent() + tol) {
            return Err(Error::OutOfBounds(format!("{point:?}")));
        }
        let cell = ((x - grid.coordinate(0)) / h).floor() as isize;
        let start = (cell - 1).clamp(0, (m - INTERP_POINTS) as isize) as usize;
        let nodes: Vec<f64> = (start..start + INTERP_POINTS)
            .map(|i| grid.coordinate(i))
            .collect();
        starts[axis] = start;
        weights[axis].copy_from_slice(&lagrange_weights(x, &nodes));
    }
    let v = field.values();
    let mut total = 0.0;
    let count = INTERP_POINTS.pow(n as u32);
    for flat in 0..count {
        let mut w = 1.0;
        let mut node = 0;
        let mut rest = flat;
        for axis in 0..n {
            let k = rest % INTERP_POINTS;
            rest /= INTERP_POINTS;
            w *= weights[axis][k];
            node += (starts[axis] + k) * grid.stride(axis);
        }
        total += w * v[node];
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;

    #[test]
    fn fornberg_reproduces_centered_weights() {
        let nodes = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fd_weights(0.0, &nodes, 2);
        for k in 0..5 {
            assert!((w[1][k] - D1_CENTERED[k]).abs() < 1e-14);
            assert!((w[2][k] - D2_CENTERED[k]).abs() < 1e-14);
        }
        assert!((w[0][2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = GridSpec::new(2, 2.0, 21).unwrap();
        let f = ScalarField::constant(g, 7.0, "c").unwrap();
        for axis in 0..2 {
            for order in 1..=2 {
                assert!(derivative(&f, axis, order).unwrap().norm_sup() < 1e-11);
            }
        }
    }

    #[test]
    fn quartic_polynomials_are_exact_everywhere() {
        let g = GridSpec::new(1, 1.5, 13).unwrap();
        let f = ScalarField::from_fn(g, "p", |x| {
            let x = x[0];
            1.0 - 2.0 * x + 0.5 * x * x + 0.3 * x.powi(3) - 0.7 * x.powi(4)
        })
        .unwrap();
        let d1 = derivative(&f, 0, 1).unwrap();
        let d2 = derivative(&f, 0, 2).unwrap();
        for i in 0..g.points() {
            let x = g.coordinate(i);
            let e1 = -2.0 + x + 0.9 * x * x - 2.8 * x.powi(3);
            let e2 = 1.0 + 1.8 * x - 8.4 * x * x;
            assert!((d1.value(i) - e1).abs() < 1e-10, "d1 at {i}");
            assert!((d2.value(i) - e2).abs() < 1e-9, "d2 at {i}");
        }
    }

    #[test]
    fn axis_checked() {
        let g = GridSpec::new(1, 1.0, 5).unwrap();
        let f = ScalarField::zeros(g, "z");
        assert!(matches!(
            derivative(&f, 1, 1),
            Err(Error::AxisOutOfRange { axis: 1, dim: 1 })
        ));
        assert!(derivative(&f, 0, 3).is_err());
    }

    #[test]
    fn sine_refinement_gives_fourth_order() {
        let err = |m: usize| {
            let g = GridSpec::new(1, std::f64::consts::PI, m).unwrap();
            let f = ScalarField::from_fn(g, "sin", |x| x[0].sin()).unwrap();
            let d = derivative(&f, 0, 1).unwrap();
            (2..m - 2)
                .map(|i| (d.value(i) - g.coordinate(i).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(41) / err(81);
        assert!((ratio - 16.0).abs() <= 4.0, "ratio {ratio}");
    }

    #[test]
    fn interpolation_is_exact_on_cubics() {
        let g = GridSpec::new(2, 1.0, 11).unwrap();
        let f = ScalarField::from_fn(g, "p", |x| x[0].powi(3) - 2.0 * x[0] * x[1] * x[1] + 1.0)
            .unwrap();
        for p in [[0.13f64, -0.77], [-1.0, 1.0], [0.999, 0.05]] {
            let exact = p[0].powi(3) - 2.0 * p[0] * p[1] * p[1] + 1.0;
            assert!((interpolate(&f, &p).unwrap() - exact).abs() < 1e-13);
        }
        assert!(interpolate(&f, &[1.2, 0.0]).is_err());
    }
}
