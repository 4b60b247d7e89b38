use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::gamma::{GammaIndex, TimeJet};
use crate::error::{Error, Result};

/// A null form: `Q00` or `Q_ij` with `i < j` (index 0 is time).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum NullForm {
    Q00,
    Qij(usize, usize),
}

impl NullForm {
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::InvalidIndex(format!("unknown null form '{name}'"));
        let chars: Vec<char> = name.chars().collect();
        match chars.as_slice() {
            ['Q', '0', '0'] => Ok(NullForm::Q00),
            ['Q', i, j] => {
                let i = i.to_digit(10).ok_or_else(bad)? as usize;
                let j = j.to_digit(10).ok_or_else(bad)? as usize;
                if i >= j {
                    return Err(bad());
                }
                Ok(NullForm::Qij(i, j))
            }
            _ => Err(bad()),
        }
    }

    pub fn eval(&self, a: &TimeJet, b: &TimeJet) -> Result<TimeJet> {
        match *self {
            NullForm::Q00 => a.q00(b),
            NullForm::Qij(i, j) => a.qij(b, i, j),
        }
    }
}

impl std::fmt::Display for NullForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NullForm::Q00 => write!(f, "Q00"),
            NullForm::Qij(i, j) => write!(f, "Q{i}{j}"),
        }
    }
}

fn gamma_key(g: GammaIndex) -> String {
    g.to_string()
}

/// Coefficients of the first-order commutation rules between the vector
/// fields, the null forms and the wave operator, read from a fixture.
#[derive(Clone, Debug)]
pub struct CommutationTable {
    dim: usize,
    forms: BTreeMap<(String, NullForm), Vec<(f64, NullForm)>>,
    boxes: BTreeMap<String, f64>,
}

const BUILTIN: [&str; 3] = [
    include_str!("../../fixtures/gamma_q_commutation_n1.txt"),
    include_str!("../../fixtures/gamma_q_commutation_n2.txt"),
    include_str!("../../fixtures/gamma_q_commutation_n3.txt"),
];

fn parse_number(s: &str, line: usize) -> Result<f64> {
    let err = |msg: String| Error::FixtureParse { line, msg };
    match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.parse().map_err(|_| err(format!("bad number '{s}'")))?;
            let q: f64 = q.parse().map_err(|_| err(format!("bad number '{s}'")))?;
            Ok(p / q)
        }
        None => s.parse().map_err(|_| err(format!("bad number '{s}'"))),
    }
}

impl CommutationTable {
    /// The committed table for spatial dimension `n`.
    pub fn builtin(n: usize) -> Result<Self> {
        let text = n
            .checked_sub(1)
            .and_then(|k| BUILTIN.get(k))
            .ok_or_else(|| Error::MissingFixture(format!("gamma_q_commutation_n{n}.txt")))?;
        Self::parse(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| Error::MissingFixture(path.display().to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut forms = BTreeMap::new();
        let mut boxes = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let err = |msg: String| Error::FixtureParse { line, msg };
            let body = raw.trim();
            if let Some(comment) = body.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("n =") {
                    dim = Some(v.trim().parse::<usize>().map_err(|_| err("bad dimension".into()))?);
                }
                continue;
            }
            if body.is_empty() {
                continue;
            }
            let (lhs, rhs) = body
                .split_once(':')
                .ok_or_else(|| err("missing ':'".into()))?;
            let head: Vec<&str> = lhs.split_whitespace().collect();
            let terms: Vec<&str> = rhs.split_whitespace().collect();
            match head.as_slice() {
                ["box", g] => {
                    let g = GammaIndex::parse(g).map_err(|e| err(e.to_string()))?;
                    let [c] = terms.as_slice() else {
                        return Err(err("box rule needs one coefficient".into()));
                    };
                    boxes.insert(gamma_key(g), parse_number(c, line)?);
                }
                [g, q] => {
                    let g = GammaIndex::parse(g).map_err(|e| err(e.to_string()))?;
                    let q = NullForm::parse(q).map_err(|e| err(e.to_string()))?;
                    if !terms.len().is_multiple_of(2) {
                        return Err(err("terms come in '<coef> <form>' pairs".into()));
                    }
                    let list = terms
                        .chunks(2)
                        .map(|p| {
                            let form = NullForm::parse(p[1]).map_err(|e| err(e.to_string()))?;
                            Ok((parse_number(p[0], line)?, form))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    forms.insert((gamma_key(g), q), list);
                }
                _ => return Err(err(format!("cannot read '{body}'"))),
            }
        }
        let dim = dim.ok_or(Error::FixtureParse {
            line: 0,
            msg: "missing '# n = ..' header".into(),
        })?;
        Ok(Self { dim, forms, boxes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The null forms listed for `g`.
    pub fn forms_for(&self, g: GammaIndex) -> Vec<NullForm> {
        let key = gamma_key(g);
        self.forms.keys().filter(|(k, _)| *k == key).map(|(_, q)| *q).collect()
    }

    pub fn terms(&self, g: GammaIndex, q: NullForm) -> Result<&[(f64, NullForm)]> {
        self.forms
            .get(&(gamma_key(g), q))
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::MissingFixture(format!("no rule for {g} {q} (n = {})", self.dim)))
    }

    pub fn box_coefficient(&self, g: GammaIndex) -> Result<f64> {
        self.boxes
            .get(&gamma_key(g))
            .copied()
            .ok_or_else(|| Error::MissingFixture(format!("no box rule for {g} (n = {})", self.dim)))
    }
}

/// Largest pointwise defect of one identity with the magnitude it is
/// measured against.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Defect {
    pub gamma: String,
    pub form: String,
    pub defect: f64,
    pub scale: f64,
}

impl Defect {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.defect / self.scale
        } else {
            self.defect
        }
    }
}

fn sup_level0(jet: &TimeJet) -> f64 {
    jet.value().norm_sup()
}

/// `Γ Q(a,b) - Q(Γa,b) - Q(a,Γb) - Σ coef Q'(a,b)` for every null form the
/// table lists for `g`. Jets need at least two time levels.
pub fn gamma_q_commutation_check(
    a: &TimeJet,
    b: &TimeJet,
    g: GammaIndex,
    table: &CommutationTable,
) -> Result<Vec<Defect>> {
    if table.dim() != a.grid().dim() {
        return Err(Error::MissingFixture(format!(
            "commutation table is for n = {}, fields have n = {}",
            table.dim(),
            a.grid().dim()
        )));
    }
    let ga = a.gamma(g)?;
    let gb = b.gamma(g)?;
    let forms = table.forms_for(g);
    if forms.is_empty() {
        return Err(Error::MissingFixture(format!("no rules for {g}")));
    }
    forms
        .into_iter()
        .map(|q| {
            let lhs = q.eval(a, b)?.gamma(g)?;
            let mut rhs = q.eval(&ga, b)?.add(&q.eval(a, &gb)?)?;
            let mut scale = sup_level0(&lhs).max(sup_level0(&rhs));
            for (c, other) in table.terms(g, q)? {
                let term = other.eval(a, b)?.scale(*c)?;
                scale = scale.max(sup_level0(&term));
                rhs = rhs.add(&term)?;
            }
            let defect = sup_level0(&lhs.sub(&rhs)?);
            Ok(Defect {
                gamma: g.to_string(),
                form: q.to_string(),
                defect,
                scale,
            })
        })
        .collect()
}

/// `[Γ, □]f - c □f` for every vector field in the table, `c` from the
/// table. Jets need at least three time levels.
pub fn box_commutator_check(f: &TimeJet, table: &CommutationTable) -> Result<Vec<Defect>> {
    let box_f = f.wave_operator()?;
    GammaIndex::all(f.grid().dim())
        .into_iter()
        .map(|g| {
            let c = table.box_coefficient(g)?;
            let g_box = box_f.gamma(g)?;
            let box_g = f.gamma(g)?.wave_operator()?;
            let c_box = box_f.scale(c)?;
            let scale = sup_level0(&g_box).max(sup_level0(&box_g)).max(sup_level0(&c_box));
            let defect = sup_level0(&g_box.sub(&box_g)?.sub(&c_box)?);
            Ok(Defect {
                gamma: g.to_string(),
                form: "box".into(),
                defect,
                scale,
            })
        })
        .collect()
}

/// The largest defect in a list.
pub fn max_defect(defects: &[Defect]) -> f64 {
    defects.iter().fold(0.0, |m, d| m.max(d.defect))
}
