use std::fmt;

use crate::error::{Error, Result};
use crate::fields::reduce::fill_by;
use crate::fields::{derivative, fd_weights, GridSpec, ScalarField};
use crate::solver::{acceleration, acceleration_rate, State, HISTORY_DEPTH};
use crate::testfn::AnalyticFn;

/// `(c, a, D^(m), D^(m-1))` of one `c x_a ∂_b V` term at time level `m`.
type Term<'a> = (f64, usize, &'a [f64], Option<&'a [f64]>);

/// Commuting vector fields of the wave operator. Index 0 is time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GammaIndex {
    /// `∂_j`
    Translation(usize),
    /// `λ_j x_j ∂_k - λ_k x_k ∂_j` with `λ = (1, -1, .., -1)`, `x_0 = t`:
    /// boosts for `j = 0`, rotations otherwise.
    Lorentz(usize, usize),
    /// `t ∂_t + Σ x_i ∂_i`
    Scaling,
}

impl GammaIndex {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            GammaIndex::Translation(j) if j > n => {
                Err(Error::InvalidIndex(format!("translation index {j} > {n}")))
            }
            GammaIndex::Lorentz(j, k) if j == k || j > n || k > n => Err(Error::InvalidIndex(
                format!("Lorentz field ({j},{k}) needs distinct indices in 0..={n}"),
            )),
            _ => Ok(()),
        }
    }

    /// Translations, then `Lorentz(j, k)` for `j < k`, then scaling.
    pub fn all(n: usize) -> Vec<GammaIndex> {
        let mut out: Vec<GammaIndex> = (0..=n).map(GammaIndex::Translation).collect();
        out.extend(Self::lorentz(n));
        out.push(GammaIndex::Scaling);
        out
    }

    pub fn lorentz(n: usize) -> Vec<GammaIndex> {
        let mut out = Vec::new();
        for j in 0..=n {
            for k in j + 1..=n {
                out.push(GammaIndex::Lorentz(j, k));
            }
        }
        out
    }

    /// Whether applying the field consumes one time level of a jet.
    pub fn uses_time_derivative(&self) -> bool {
        match *self {
            GammaIndex::Translation(j) => j == 0,
            GammaIndex::Lorentz(j, k) => j == 0 || k == 0,
            GammaIndex::Scaling => true,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::InvalidIndex(format!("unknown vector field '{name}'"));
        let digit = |c: char| c.to_digit(10).map(|d| d as usize).ok_or_else(bad);
        let chars: Vec<char> = name.chars().collect();
        match chars.as_slice() {
            ['S'] => Ok(GammaIndex::Scaling),
            ['T', j] => Ok(GammaIndex::Translation(digit(*j)?)),
            ['L', j, k] => Ok(GammaIndex::Lorentz(digit(*j)?, digit(*k)?)),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GammaIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaIndex::Translation(j) => write!(f, "T{j}"),
            GammaIndex::Lorentz(j, k) => write!(f, "L{j}{k}"),
            GammaIndex::Scaling => write!(f, "S"),
        }
    }
}

fn lambda(j: usize) -> f64 {
    if j == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Time jet of a field on the current slice: `levels[k] = ∂_t^k V`.
#[derive(Clone, Debug)]
pub struct TimeJet {
    t: f64,
    levels: Vec<ScalarField>,
}

impl TimeJet {
    pub fn new(t: f64, levels: Vec<ScalarField>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or_else(|| Error::InvalidIndex("a jet needs at least one level".into()))?;
        for l in &levels[1..] {
            first.check_same_grid(l)?;
        }
        Ok(Self { t, levels })
    }

    /// Exact time levels of a closed-form function at time `t`.
    pub fn from_function(f: &AnalyticFn, grid: GridSpec, t: f64, order: usize) -> Result<Self> {
        let vars = grid.dim() + 1;
        let levels = (0..=order)
            .map(|k| {
                let mut orders = vec![0; vars];
                orders[0] = k;
                ScalarField::from_fn(grid, format!("d_t^{k}"), |x| {
                    let mut p = vec![t];
                    p.extend_from_slice(x);
                    f.partial(&orders, &p)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(t, levels)
    }

    /// Jet of the solution on the current slice. Levels 0 and 1 are `φ, ψ`;
    /// levels 2 and 3 come from the equation; level 4 is a one-sided
    /// 5-slice time derivative of level 3 over the history.
    pub fn from_state(state: &State, order: usize, q_max: f64) -> Result<Self> {
        if order > 4 {
            return Err(Error::GammaDepth(order));
        }
        let mut levels = vec![state.phi().clone(), state.psi().clone()];
        if order >= 2 {
            let acc = acceleration(state, q_max)?;
            if order >= 3 {
                let rate = acceleration_rate(state, &acc, q_max)?;
                levels.push(acc);
                levels.push(rate);
            } else {
                levels.push(acc);
            }
        }
        if order >= 4 {
            levels.push(fourth_time_derivative(state, q_max)?);
        }
        levels.truncate(order + 1);
        Self::new(state.t(), levels)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn order(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn grid(&self) -> &GridSpec {
        self.levels[0].grid()
    }

    pub fn level(&self, k: usize) -> &ScalarField {
        &self.levels[k]
    }

    pub fn value(&self) -> &ScalarField {
        &self.levels[0]
    }

    pub fn truncated(&self, order: usize) -> Self {
        Self {
            t: self.t,
            levels: self.levels[..=order.min(self.order())].to_vec(),
        }
    }

    fn need(&self, order: usize) -> Result<()> {
        if self.order() < order {
            return Err(Error::InsufficientHistory {
                need: order,
                have: self.order(),
            });
        }
        Ok(())
    }

    /// `∂_a` of the jet; `a = 0` shifts the levels down by one.
    pub fn partial(&self, a: usize) -> Result<Self> {
        if a == 0 {
            self.need(1)?;
            return Ok(Self {
                t: self.t,
                levels: self.levels[1..].to_vec(),
            });
        }
        let levels = self
            .levels
            .iter()
            .map(|l| derivative(l, a - 1, 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { t: self.t, levels })
    }

    fn zip_with(&self, other: &TimeJet, f: impl Fn(f64, f64) -> f64 + Sync) -> Result<Self> {
        let order = self.order().min(other.order());
        let levels = (0..=order)
            .map(|k| {
                let (a, b) = (&self.levels[k], &other.levels[k]);
                a.check_same_grid(b)?;
                let values = a.values().iter().zip(b.values()).map(|(x, y)| f(*x, *y)).collect();
                ScalarField::new(*a.grid(), values, a.label())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { t: self.t, levels })
    }

    pub fn add(&self, other: &TimeJet) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TimeJet) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        let levels = self.levels.iter().map(|l| l.scaled(c)).collect::<Result<Vec<_>>>()?;
        Ok(Self { t: self.t, levels })
    }

    /// Leibniz rule: `(VW)^{(k)} = Σ_j C(k,j) V^{(j)} W^{(k-j)}`.
    pub fn mul(&self, other: &TimeJet) -> Result<Self> {
        let order = self.order().min(other.order());
        let grid = *self.grid();
        if grid != *other.grid() {
            return Err(Error::GridMismatch);
        }
        let mut levels = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let mut values = vec![0.0; grid.len()];
            let mut binom = 1.0;
            for j in 0..=k {
                let (a, b) = (self.levels[j].values(), other.levels[k - j].values());
                for (v, (x, y)) in values.iter_mut().zip(a.iter().zip(b)) {
                    *v += binom * x * y;
                }
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
            levels.push(ScalarField::new(grid, values, "product")?);
        }
        Ok(Self { t: self.t, levels })
    }

    /// Jet of `x_a ∂_b V` (with `x_0 = t`).
    /// `Σ c x_a ∂_b V` over `terms = [(c, a, b)]` in one pass per level.
    /// For `a = 0` the time factor contributes `t D^(m) + m D^(m-1)` at
    /// level `m`, where `D = ∂_b V`.
    fn coordinate_combination(&self, terms: &[(f64, usize, usize)]) -> Result<Self> {
        let grid = *self.grid();
        let order = terms
            .iter()
            .map(|&(_, _, b)| if b == 0 { self.order().checked_sub(1) } else { Some(self.order()) })
            .min()
            .flatten()
            .ok_or(Error::InsufficientHistory { need: 1, have: 0 })?;
        // spatial derivatives of every level that is read, per axis
        let mut spatial: Vec<Option<Vec<ScalarField>>> = vec![None; grid.dim() + 1];
        for &(_, _, b) in terms {
            if b > 0 && spatial[b].is_none() {
                spatial[b] = Some(
                    self.levels[..=order]
                        .iter()
                        .map(|l| derivative(l, b - 1, 1))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
        }
        let d = |b: usize, m: usize| -> &[f64] {
            match &spatial[b] {
                Some(levels) => levels[m].values(),
                None => self.levels[m + 1].values(),
            }
        };
        let t = self.t;
        let levels = (0..=order)
            .map(|m| {
                let parts: Vec<Term<'_>> = terms
                    .iter()
                    .map(|&(c, a, b)| (c, a, d(b, m), (a == 0 && m > 0).then(|| d(b, m - 1))))
                    .collect();
                let mut out = vec![0.0; grid.len()];
                fill_by(&mut out, |node| {
                    let x = grid.node_coords(node);
                    let mut acc = 0.0;
                    for (c, a, cur, prev) in &parts {
                        let v = if *a == 0 {
                            t * cur[node] + prev.map_or(0.0, |p| m as f64 * p[node])
                        } else {
                            x[a - 1] * cur[node]
                        };
                        acc += c * v;
                    }
                    acc
                });
                ScalarField::new(grid, out, "gamma")
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { t, levels })
    }

    /// The jet of `Γ V`.
    pub fn gamma(&self, g: GammaIndex) -> Result<Self> {
        let n = self.grid().dim();
        g.validate(n)?;
        match g {
            GammaIndex::Translation(j) => self.partial(j),
            GammaIndex::Lorentz(j, k) => self.coordinate_combination(&[(lambda(j), j, k), (-lambda(k), k, j)]),
            GammaIndex::Scaling => {
                let terms: Vec<_> = (0..=n).map(|a| (1.0, a, a)).collect();
                self.coordinate_combination(&terms)
            }
        }
    }

    /// Applies the fields in list order: `[g1, g2]` gives `g2(g1 V)`.
    pub fn gamma_multi(&self, multi: &[GammaIndex]) -> Result<Self> {
        if multi.len() > 3 {
            return Err(Error::GammaDepth(multi.len()));
        }
        let mut jet = self.clone();
        for g in multi {
            jet = jet.gamma(*g)?;
        }
        Ok(jet)
    }

    /// `□V = ∂_t²V - Σ ∂_i²V`.
    pub fn wave_operator(&self) -> Result<Self> {
        self.need(2)?;
        let n = self.grid().dim();
        let levels = (0..=self.order() - 2)
            .map(|m| {
                let mut acc = self.levels[m + 2].clone();
                for i in 0..n {
                    acc = acc.combine(1.0, &derivative(&self.levels[m], i, 2)?, -1.0)?;
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { t: self.t, levels })
    }

    /// Jet of `Q00(V, W)`.
    pub fn q00(&self, other: &TimeJet) -> Result<Self> {
        let mut acc = self.partial(0)?.mul(&other.partial(0)?)?;
        for a in 1..=self.grid().dim() {
            acc = acc.sub(&self.partial(a)?.mul(&other.partial(a)?)?)?;
        }
        Ok(acc)
    }

    /// Jet of `Q_ij(V, W) = ∂_iV ∂_jW - ∂_jV ∂_iW`.
    pub fn qij(&self, other: &TimeJet, i: usize, j: usize) -> Result<Self> {
        let n = self.grid().dim();
        if i == j || i > n || j > n {
            return Err(Error::InvalidIndex(format!("null form Q_{{{i}{j}}} invalid for n = {n}")));
        }
        self.partial(i)?
            .mul(&other.partial(j)?)?
            .sub(&self.partial(j)?.mul(&other.partial(i)?)?)
    }
}

/// `∂_t⁴ φ` at the newest slice by a one-sided 5-point difference of
/// `∂_t³ φ` over the history window.
fn fourth_time_derivative(state: &State, q_max: f64) -> Result<ScalarField> {
    let hist = state.history();
    if hist.len() < HISTORY_DEPTH || hist.back().map(|s| s.t) != Some(state.t()) {
        return Err(Error::InsufficientHistory {
            need: HISTORY_DEPTH,
            have: hist.len(),
        });
    }
    let times: Vec<f64> = hist.iter().map(|s| s.t).collect();
    let w = fd_weights(state.t(), &times, 1).swap_remove(1);
    let grid = *state.grid();
    let mut out = ScalarField::zeros(grid, "phi_tttt");
    for (slice, wk) in hist.iter().zip(&w) {
        let s = State::new(slice.t, slice.phi.clone(), slice.psi.clone(), state.amplitude())?;
        let acc = acceleration(&s, q_max)?;
        let rate = acceleration_rate(&s, &acc, q_max)?;
        out = out.combine(1.0, &rate, *wk)?;
    }
    Ok(out)
}

/// `Γ φ` on the current slice of a solution.
pub fn apply_gamma(state: &State, g: GammaIndex, q_max: f64) -> Result<ScalarField> {
    apply_gamma_multi(state, &[g], q_max)
}

/// Up to three fields applied to `φ` in list order.
pub fn apply_gamma_multi(state: &State, multi: &[GammaIndex], q_max: f64) -> Result<ScalarField> {
    if multi.len() > 3 {
        return Err(Error::GammaDepth(multi.len()));
    }
    let order = multi.iter().filter(|g| g.uses_time_derivative()).count();
    let jet = TimeJet::from_state(state, order, q_max)?;
    Ok(jet.gamma_multi(multi)?.value().clone())
}
