use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::gamma::{GammaIndex, TimeJet};
use crate::error::{Error, Result};
use crate::fields::reduce::max_by;
use crate::fields::{derivative, ScalarField};
use crate::solver::State;

pub const NORM_CSV_HEADER: &str = "t,sup_phi,sup_dphi,sup_q00,energy,M1,M2,N1,N2,weighted_sup";

/// One diagnostic sample of a solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct NormRecord {
    pub t: f64,
    pub sup_phi: f64,
    pub sup_dphi: f64,
    pub sup_q00: f64,
    pub energy: f64,
    pub M1: f64,
    pub M2: f64,
    pub N1: f64,
    pub N2: f64,
    pub weighted_sup: f64,
}

impl NormRecord {
    fn columns(&self) -> [f64; 10] {
        [
            self.t,
            self.sup_phi,
            self.sup_dphi,
            self.sup_q00,
            self.energy,
            self.M1,
            self.M2,
            self.N1,
            self.N2,
            self.weighted_sup,
        ]
    }

    pub fn csv_row(&self) -> String {
        let cols: Vec<String> = self.columns().iter().map(|v| format!("{v:e}")).collect();
        cols.join(",")
    }

    fn from_columns(c: &[f64]) -> Self {
        Self {
            t: c[0],
            sup_phi: c[1],
            sup_dphi: c[2],
            sup_q00: c[3],
            energy: c[4],
            M1: c[5],
            M2: c[6],
            N1: c[7],
            N2: c[8],
            weighted_sup: c[9],
        }
    }

    /// Named column lookup, matching the CSV header.
    pub fn column(&self, name: &str) -> Option<f64> {
        let k = NORM_CSV_HEADER.split(',').position(|h| h == name)?;
        Some(self.columns()[k])
    }
}

pub fn write_norm_csv<W: Write>(out: &mut W, records: &[NormRecord], comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{NORM_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Reads a norm CSV written by [`write_norm_csv`]; `#` lines are skipped.
pub fn read_norm_csv<R: BufRead>(input: R) -> Result<Vec<NormRecord>> {
    let mut records = Vec::new();
    let mut seen_header = false;
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != NORM_CSV_HEADER {
                return Err(Error::MalformedCsv {
                    line: k + 1,
                    msg: format!("expected header '{NORM_CSV_HEADER}'"),
                });
            }
            seen_header = true;
            continue;
        }
        let cols = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::MalformedCsv {
                line: k + 1,
                msg: e.to_string(),
            })?;
        if cols.len() != 10 {
            return Err(Error::MalformedCsv {
                line: k + 1,
                msg: format!("expected 10 columns, found {}", cols.len()),
            });
        }
        records.push(NormRecord::from_columns(&cols));
    }
    if !seen_header {
        return Err(Error::MalformedCsv {
            line: 0,
            msg: "missing header".into(),
        });
    }
    Ok(records)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    /// Cap on the number of vector fields in the M-norms.
    pub gamma_order: usize,
    pub sample_dt: f64,
    /// Start of the decay-fit window; `None` means a fifth of the run.
    pub fit_window_start: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            gamma_order: 2,
            sample_dt: 1.0,
            fit_window_start: None,
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_order > 3 {
            return Err(Error::config("diagnostics.gamma_order", "must be <= 3"));
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(Error::config("diagnostics.sample_dt", "must be > 0"));
        }
        if let Some(t) = self.fit_window_start {
            if !t.is_finite() {
                return Err(Error::config("diagnostics.fit_window_start", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn fit_start(&self, t_end: f64) -> f64 {
        self.fit_window_start.unwrap_or(t_end / 5.0)
    }

    /// Caps for `N1` and `N2`.
    pub fn sup_caps(&self) -> (usize, usize) {
        let half = self.gamma_order.div_ceil(2);
        (half, half + 1)
    }

    /// Time levels needed to evaluate all four sums.
    pub fn jet_order(&self) -> usize {
        (self.gamma_order + 1).max(self.sup_caps().1)
    }
}

/// `(D_0 w, .., D_n w)` at the current slice.
fn gradient(jet: &TimeJet) -> Result<Vec<ScalarField>> {
    let mut out = vec![jet.level(1).clone()];
    for axis in 0..jet.grid().dim() {
        out.push(derivative(jet.value(), axis, 1)?);
    }
    Ok(out)
}

fn pointwise_norm(parts: &[ScalarField]) -> f64 {
    max_by(parts[0].len(), |i| {
        parts.iter().map(|p| p.values()[i].powi(2)).sum::<f64>().sqrt()
    })
}

fn l2_of_gradient(parts: &[ScalarField]) -> f64 {
    parts.iter().map(|p| p.norm_l2().powi(2)).sum::<f64>().sqrt()
}

#[derive(Default)]
struct Sums {
    m1: f64,
    m2: f64,
    n1: f64,
    n2: f64,
}

fn visit(jet: &TimeJet, depth: usize, cfg: &DiagnosticsConfig, fields: &[GammaIndex], sums: &mut Sums) -> Result<()> {
    let n_cap = cfg.gamma_order;
    let (n1_cap, n2_cap) = cfg.sup_caps();
    let need_grad = depth <= n_cap || depth <= n1_cap;
    let grad = if need_grad { Some(gradient(jet)?) } else { None };
    if depth <= n_cap {
        sums.m1 += l2_of_gradient(grad.as_ref().unwrap());
        sums.m2 += jet.value().norm_l2();
    }
    if depth <= n1_cap {
        sums.n1 += pointwise_norm(grad.as_ref().unwrap());
    }
    if depth <= n2_cap {
        sums.n2 += jet.value().norm_sup();
    }
    if depth < n_cap.max(n2_cap) {
        for g in fields {
            visit(&jet.gamma(*g)?, depth + 1, cfg, fields, sums)?;
        }
    }
    Ok(())
}

/// The bootstrap norms of the current slice:
/// `M1 = Σ_{|I|≤N} ‖∂Γ^Iφ‖₂`, `M2 = Σ_{|I|≤N} ‖Γ^Iφ‖₂`,
/// `N1 = Σ_{|J|≤⌊(N+1)/2⌋} sup|∂Γ^Jφ|`, `N2 = Σ_{|J|≤⌊(N+1)/2⌋+1} sup|Γ^Jφ|`,
/// summed over every ordered product of translations, Lorentz fields and
/// the scaling field.
pub fn bootstrap_norms(state: &State, cfg: &DiagnosticsConfig, q_max: f64) -> Result<NormRecord> {
    cfg.validate()?;
    let jet = TimeJet::from_state(state, cfg.jet_order(), q_max)?;
    let fields = GammaIndex::all(state.grid().dim());
    let mut sums = Sums::default();
    visit(&jet, 0, cfg, &fields, &mut sums)?;

    let grad = gradient(&jet)?;
    let spatial_energy: f64 = grad[1..].iter().map(|g| g.norm_l2().powi(2)).sum();
    let q = max_by(state.grid().len(), |i| {
        let dt = grad[0].values()[i];
        let s: f64 = grad[1..].iter().map(|g| g.values()[i].powi(2)).sum();
        (dt * dt - s).abs()
    });
    Ok(NormRecord {
        t: state.t(),
        sup_phi: state.phi().norm_sup(),
        sup_dphi: pointwise_norm(&grad),
        sup_q00: q,
        energy: 0.5 * (state.psi().norm_l2().powi(2) + spatial_energy),
        M1: sums.m1,
        M2: sums.m2,
        N1: sums.n1,
        N2: sums.n2,
        weighted_sup: weighted_sup(state),
    })
}

/// `sup |φ| ((1+t+|x|)(1+|t-|x||))^{(n-1)/2}`.
pub fn weighted_sup(state: &State) -> f64 {
    let grid = *state.grid();
    let t = state.t();
    let power = (grid.dim() as f64 - 1.0) / 2.0;
    let v = state.phi().values();
    max_by(v.len(), |i| {
        let r = grid.radius(i);
        v[i].abs() * ((1.0 + t + r) * (1.0 + (t - r).abs())).powf(power)
    })
}
