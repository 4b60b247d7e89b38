use std::path::Path;

use crate::error::{Error, Result};

/// Constants of the compactified right-hand side for one dimension:
/// a prefactor and seven `c_k ρ^{p_k}` terms.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientFixture {
    pub n: usize,
    pub prefactor: f64,
    /// `(c_k, p_k)` for `k = 1..=7`.
    pub terms: [(f64, i32); 7],
}

const BUILTIN: [&str; 3] = [
    include_str!("../../fixtures/conformal_constants_n1.txt"),
    include_str!("../../fixtures/conformal_constants_n2.txt"),
    include_str!("../../fixtures/conformal_constants_n3.txt"),
];

fn number(s: &str, line: usize) -> Result<f64> {
    let bad = || Error::FixtureParse {
        line,
        msg: format!("bad number '{s}'"),
    };
    match s.split_once('/') {
        Some((p, q)) => Ok(p.trim().parse::<f64>().map_err(|_| bad())? / q.trim().parse::<f64>().map_err(|_| bad())?),
        None => s.trim().parse().map_err(|_| bad()),
    }
}

impl CoefficientFixture {
    /// The committed `conformal_constants_n<k>.txt` for `n`.
    pub fn builtin(n: usize) -> Result<Self> {
        let text = n
            .checked_sub(1)
            .and_then(|k| BUILTIN.get(k))
            .ok_or_else(|| Error::MissingFixture(format!("conformal_constants_n{n}.txt")))?;
        Self::parse(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| Error::MissingFixture(path.display().to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut prefactor = None;
        let mut terms: [Option<(f64, i32)>; 7] = [None; 7];
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let err = |msg: &str| Error::FixtureParse {
                line,
                msg: msg.to_string(),
            };
            let (key, value) = body.split_once('=').ok_or_else(|| err("expected 'key = value'"))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|_| err("bad dimension"))?),
                "prefactor" => prefactor = Some(number(value, line)?),
                _ => {
                    let idx = key
                        .strip_prefix('c')
                        .and_then(|d| d.parse::<usize>().ok())
                        .filter(|d| (1..=7).contains(d))
                        .ok_or_else(|| err("unknown key"))?;
                    let (coef, power) = match value.split_once("rho^") {
                        Some((c, p)) => (
                            number(c, line)?,
                            p.trim().parse::<i32>().map_err(|_| err("bad rho power"))?,
                        ),
                        None => (number(value, line)?, 0),
                    };
                    terms[idx - 1] = Some((coef, power));
                }
            }
        }
        let n = n.ok_or(Error::FixtureParse {
            line: 0,
            msg: "missing n".into(),
        })?;
        let prefactor = prefactor.ok_or(Error::FixtureParse {
            line: 0,
            msg: "missing prefactor".into(),
        })?;
        let mut out = [(0.0, 0); 7];
        for (k, t) in terms.iter().enumerate() {
            out[k] = t.ok_or(Error::FixtureParse {
                line: 0,
                msg: format!("missing c{}", k + 1),
            })?;
        }
        Ok(Self {
            n,
            prefactor,
            terms: out,
        })
    }

    /// `c_k ρ^{p_k}` for `k = 1..=7`.
    pub fn weight(&self, k: usize, rho: f64) -> f64 {
        let (c, p) = self.terms[k - 1];
        c * rho.powi(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let f = CoefficientFixture::builtin(2).unwrap();
        assert_eq!(f.prefactor, 0.5);
        assert_eq!(f.terms[0], (4.0, 1));
        assert_eq!(f.terms[6], (-10.0, 0));
        let one = CoefficientFixture::builtin(1).unwrap();
        assert_eq!(one.terms[3], (-4.0, 1));
        assert!(matches!(CoefficientFixture::builtin(5), Err(Error::MissingFixture(_))));
    }
}
