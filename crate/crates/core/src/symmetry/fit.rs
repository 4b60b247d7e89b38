use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 8;

/// `v ≈ C (1+t)^p` with the RMS residual of the log-space fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub constant: f64,
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares fit of `ln v` against `ln(1+t)` over samples with `t ≥ t_start`.
pub fn fit_decay_exponent(series: &[(f64, f64)], t_start: f64) -> Result<DecayFit> {
    let window: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= t_start).collect();
    if window.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            need: MIN_FIT_SAMPLES,
            got: window.len(),
        });
    }
    if let Some(&(t, value)) = window.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveSample { t, value });
    }
    let pts: Vec<(f64, f64)> = window.iter().map(|(t, v)| ((1.0 + t).ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-14 * k {
        return Err(Error::SingularSystem("all fit samples share one time".into()));
    }
    let p = sxy / sxx;
    let b = my - p * mx;
    let residual = (pts.iter().map(|(x, y)| (y - b - p * x).powi(2)).sum::<f64>() / k).sqrt();
    Ok(DecayFit {
        exponent: p,
        constant: b.exp(),
        residual,
        samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let s: Vec<(f64, f64)> = (0..20).map(|k| (k as f64, (1.0 + k as f64).powf(-0.5))).collect();
        let f = fit_decay_exponent(&s, 0.0).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-12);
        assert!((f.constant - 1.0).abs() < 1e-12);
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn constant_series_has_zero_exponent() {
        let s: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 2.5)).collect();
        let f = fit_decay_exponent(&s, 0.0).unwrap();
        assert!(f.exponent.abs() < 1e-12);
        assert!((f.constant - 2.5).abs() < 1e-12);
    }

    #[test]
    fn window_and_sign_errors() {
        let s: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 1.0)).collect();
        assert!(matches!(
            fit_decay_exponent(&s, 5.0),
            Err(Error::TooFewSamples { need: 8, got: 5 })
        ));
        let mut bad = s.clone();
        bad[3].1 = 0.0;
        assert!(matches!(fit_decay_exponent(&bad, 0.0), Err(Error::NonPositiveSample { .. })));
    }
}
