//! Closed-form space-time functions with exact partial derivatives.
//!
//! Points are `(t, x_1, .., x_n)` (or `(s, y_1, .., y_n)` in the compactified
//! chart); `orders[a]` counts derivatives in the `a`-th variable.

use rand::Rng;

/// Second-order jet of a function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointJet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

impl PointJet {
    pub fn zero(vars: usize) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; vars],
            hess: vec![vec![0.0; vars]; vars],
        }
    }
}

#[derive(Clone, Debug)]
pub enum AnalyticFn {
    /// `Σ coef · Π p_a^{e_a}`.
    Polynomial { vars: usize, terms: Vec<(f64, Vec<u32>)> },
    /// `amplitude · Π exp(-rate_a (p_a - center_a)²)`.
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        rates: Vec<f64>,
    },
    /// `amplitude · exp(-((p_0 - ω·p_space - shift)/width)²)`, a function of
    /// `t - ω·x`; null when `|ω| = 1`.
    PlaneWave {
        amplitude: f64,
        direction: Vec<f64>,
        shift: f64,
        width: f64,
    },
    /// `amplitude · (p_0² - Σ p_i²)^power`; derivatives up to total order 2.
    RhoPower { vars: usize, amplitude: f64, power: f64 },
    Sum(Vec<AnalyticFn>),
    Product(Box<AnalyticFn>, Box<AnalyticFn>),
}

/// `d^k/du^k exp(-r (u - c)²)`.
fn gaussian_derivative(k: usize, rate: f64, u: f64, center: f64) -> f64 {
    let sr = rate.sqrt();
    let z = sr * (u - center);
    let (mut h_prev, mut h) = (0.0, 1.0);
    for j in 0..k {
        let next = 2.0 * z * h - 2.0 * j as f64 * h_prev;
        h_prev = h;
        h = next;
    }
    (-sr).powi(k as i32) * h * (-z * z).exp()
}

fn falling(e: u32, k: usize) -> f64 {
    (0..k as u32).map(|j| e as f64 - j as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl AnalyticFn {
    pub fn constant(vars: usize, c: f64) -> Self {
        AnalyticFn::Polynomial {
            vars,
            terms: vec![(c, vec![0; vars])],
        }
    }

    /// `c_0 p_0 + Σ c_i p_i + offset`.
    pub fn affine(coefs: &[f64], offset: f64) -> Self {
        let vars = coefs.len();
        let mut terms = vec![(offset, vec![0; vars])];
        for (a, &c) in coefs.iter().enumerate() {
            let mut e = vec![0; vars];
            e[a] = 1;
            terms.push((c, e));
        }
        AnalyticFn::Polynomial { vars, terms }
    }

    pub fn monomial(coef: f64, exponents: &[u32]) -> Self {
        AnalyticFn::Polynomial {
            vars: exponents.len(),
            terms: vec![(coef, exponents.to_vec())],
        }
    }

    /// `p_0² - Σ p_i²`.
    pub fn rho(vars: usize) -> Self {
        let mut terms = Vec::new();
        for a in 0..vars {
            let mut e = vec![0; vars];
            e[a] = 2;
            terms.push((if a == 0 { 1.0 } else { -1.0 }, e));
        }
        AnalyticFn::Polynomial { vars, terms }
    }

    pub fn vars(&self) -> usize {
        match self {
            AnalyticFn::Polynomial { vars, .. } | AnalyticFn::RhoPower { vars, .. } => *vars,
            AnalyticFn::Gaussian { center, .. } => center.len(),
            AnalyticFn::PlaneWave { direction, .. } => direction.len() + 1,
            AnalyticFn::Sum(parts) => parts.first().map_or(0, |f| f.vars()),
            AnalyticFn::Product(f, _) => f.vars(),
        }
    }

    pub fn value(&self, point: &[f64]) -> f64 {
        self.partial(&vec![0; point.len()], point)
    }

    pub fn partial(&self, orders: &[usize], point: &[f64]) -> f64 {
        match self {
            AnalyticFn::Polynomial { terms, .. } => terms
                .iter()
                .map(|(c, e)| {
                    let mut v = *c;
                    for a in 0..point.len() {
                        if (e[a] as usize) < orders[a] {
                            return 0.0;
                        }
                        v *= falling(e[a], orders[a]) * point[a].powi((e[a] as usize - orders[a]) as i32);
                    }
                    v
                })
                .sum(),
            AnalyticFn::Gaussian {
                amplitude,
                center,
                rates,
            } => {
                let mut v = *amplitude;
                for a in 0..point.len() {
                    v *= gaussian_derivative(orders[a], rates[a], point[a], center[a]);
                }
                v
            }
            AnalyticFn::PlaneWave {
                amplitude,
                direction,
                shift,
                width,
            } => {
                let u = point[0]
                    - direction
                        .iter()
                        .zip(&point[1..])
                        .map(|(w, x)| w * x)
                        .sum::<f64>();
                let total: usize = orders.iter().sum();
                let mut chain = 1.0;
                for (a, &o) in orders.iter().enumerate() {
                    let k = if a == 0 { 1.0 } else { -direction[a - 1] };
                    chain *= k.powi(o as i32);
                }
                amplitude * chain * gaussian_derivative(total, 1.0 / (width * width), u, *shift)
            }
            AnalyticFn::RhoPower {
                amplitude, power, ..
            } => amplitude * rho_power_partial(*power, orders, point),
            AnalyticFn::Sum(parts) => parts.iter().map(|f| f.partial(orders, point)).sum(),
            AnalyticFn::Product(f, g) => {
                // Leibniz rule over all sub-multi-indices of `orders`.
                let vars = orders.len();
                let mut k = vec![0usize; vars];
                let mut total = 0.0;
                loop {
                    let rest: Vec<usize> = orders.iter().zip(&k).map(|(o, k)| o - k).collect();
                    let weight: f64 = (0..vars).map(|a| binomial(orders[a], k[a])).product();
                    total += weight * f.partial(&k, point) * g.partial(&rest, point);
                    let mut a = 0;
                    loop {
                        if a == vars {
                            return total;
                        }
                        if k[a] < orders[a] {
                            k[a] += 1;
                            break;
                        }
                        k[a] = 0;
                        a += 1;
                    }
                }
            }
        }
    }

    pub fn jet(&self, point: &[f64]) -> PointJet {
        let vars = point.len();
        let mut jet = PointJet::zero(vars);
        jet.value = self.value(point);
        for a in 0..vars {
            let mut o = vec![0; vars];
            o[a] = 1;
            jet.grad[a] = self.partial(&o, point);
            for b in a..vars {
                let mut o = vec![0; vars];
                o[a] += 1;
                o[b] += 1;
                let v = self.partial(&o, point);
                jet.hess[a][b] = v;
                jet.hess[b][a] = v;
            }
        }
        jet
    }

    /// `∂_0² f - Σ ∂_i² f`.
    pub fn wave_operator(&self, point: &[f64]) -> f64 {
        let vars = point.len();
        (0..vars)
            .map(|a| {
                let mut o = vec![0; vars];
                o[a] = 2;
                let v = self.partial(&o, point);
                if a == 0 {
                    v
                } else {
                    -v
                }
            })
            .sum()
    }

    /// Sum of `terms` Gaussian bumps with random centres, rates and
    /// amplitudes, plus a random quadratic polynomial. Smooth, bounded
    /// derivatives on the unit scale.
    pub fn random_smooth<R: Rng>(vars: usize, terms: usize, amplitude: f64, rng: &mut R) -> Self {
        let mut parts = Vec::new();
        for _ in 0..terms {
            parts.push(AnalyticFn::Gaussian {
                amplitude: amplitude * rng.gen_range(-1.0..1.0),
                center: (0..vars).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                rates: (0..vars).map(|_| rng.gen_range(0.2..1.0)).collect(),
            });
        }
        let mut poly = Vec::new();
        for a in 0..vars {
            for b in a..vars {
                let mut e = vec![0u32; vars];
                e[a] += 1;
                e[b] += 1;
                poly.push((amplitude * 0.1 * rng.gen_range(-1.0..1.0), e));
            }
            let mut e = vec![0u32; vars];
            e[a] = 1;
            poly.push((amplitude * 0.2 * rng.gen_range(-1.0..1.0), e));
        }
        parts.push(AnalyticFn::Polynomial { vars, terms: poly });
        AnalyticFn::Sum(parts)
    }
}

fn rho_power_partial(beta: f64, orders: &[usize], p: &[f64]) -> f64 {
    let metric = |a: usize| if a == 0 { 1.0 } else { -1.0 };
    let rho: f64 = p
        .iter()
        .enumerate()
        .map(|(a, x)| metric(a) * x * x)
        .sum();
    let d_rho = |a: usize| 2.0 * metric(a) * p[a];
    let total: usize = orders.iter().sum();
    let picked: Vec<usize> = orders
        .iter()
        .enumerate()
        .flat_map(|(a, &o)| std::iter::repeat_n(a, o))
        .collect();
    match total {
        0 => rho.powf(beta),
        1 => beta * rho.powf(beta - 1.0) * d_rho(picked[0]),
        2 => {
            let (a, b) = (picked[0], picked[1]);
            let second = if a == b { 2.0 * metric(a) } else { 0.0 };
            beta * (beta - 1.0) * rho.powf(beta - 2.0) * d_rho(a) * d_rho(b)
                + beta * rho.powf(beta - 1.0) * second
        }
        _ => panic!("rho power derivatives implemented up to total order 2"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn numeric_partial(f: &AnalyticFn, a: usize, p: &[f64]) -> f64 {
        let h = 1e-5;
        let mut plus = p.to_vec();
        let mut minus = p.to_vec();
        plus[a] += h;
        minus[a] -= h;
        (f.value(&plus) - f.value(&minus)) / (2.0 * h)
    }

    #[test]
    fn first_partials_match_central_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rp = AnalyticFn::RhoPower {
            vars: 3,
            amplitude: 1.3,
            power: -0.7,
        };
        let wave = AnalyticFn::PlaneWave {
            amplitude: 0.5,
            direction: vec![0.6, 0.8],
            shift: 0.2,
            width: 0.9,
        };
        let prod = AnalyticFn::Product(
            Box::new(AnalyticFn::random_smooth(3, 2, 1.0, &mut rng)),
            Box::new(wave.clone()),
        );
        let p = [2.0, 0.3, -0.4];
        for f in [rp, wave, prod] {
            for a in 0..3 {
                let mut o = [0; 3];
                o[a] = 1;
                let exact = f.partial(&o, &p);
                assert!((exact - numeric_partial(&f, a, &p)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rho_of_rho_power_one_matches_polynomial() {
        let rp = AnalyticFn::RhoPower {
            vars: 2,
            amplitude: 1.0,
            power: 1.0,
        };
        let poly = AnalyticFn::rho(2);
        let p = [1.7, -0.4];
        assert_eq!(rp.jet(&p), poly.jet(&p));
        assert_eq!(poly.wave_operator(&p), 4.0);
    }

    #[test]
    fn gaussian_higher_derivatives() {
        // d^3/du^3 exp(-u^2) = (-8u^3 + 12u) exp(-u^2)
        let u: f64 = 0.37;
        let exact = (-8.0 * u.powi(3) + 12.0 * u) * (-u * u).exp();
        assert!((gaussian_derivative(3, 1.0, u, 0.0) - exact).abs() < 1e-14);
    }

    #[test]
    fn plane_wave_is_null() {
        let wave = AnalyticFn::PlaneWave {
            amplitude: 1.0,
            direction: vec![0.6, 0.8],
            shift: 0.0,
            width: 1.0,
        };
        let j = wave.jet(&[0.3, 0.1, -0.2]);
        let q = j.grad[0] * j.grad[0] - j.grad[1] * j.grad[1] - j.grad[2] * j.grad[2];
        assert!(q.abs() < 1e-15);
        assert!(wave.wave_operator(&[0.3, 0.1, -0.2]).abs() < 1e-14);
    }
}
