use serde::{Deserialize, Serialize};

use super::State;
use crate::error::{Error, Result};
use crate::fields::{lagrange_weights, GridSpec, ScalarField};

/// Gaussian values below this fraction of the amplitude are stored as exact
/// zeros, keeping the far field out of the subnormal range.
pub const GAUSSIAN_FLUSH: f64 = 1e-200;

/// Radius (in widths) beyond which the Gaussian stays under `1e-14` of its
/// peak; used as its support for grid-fit checks.
pub const GAUSSIAN_SUPPORT_WIDTHS: f64 = 6.0;

/// Radial profile shapes; `r` is `|x| / width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `exp(-r²)`
    Gaussian,
    /// `exp(-1/(1 - r²))` for `r < 1`, exactly zero otherwise.
    Bump,
    /// Cubic interpolation of `(r, value)` samples; zero beyond the last radius.
    Table { radii: Vec<f64>, values: Vec<f64> },
    Zero,
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        if let Profile::Table { radii, values } = self {
            if radii.len() != values.len() || radii.len() < 4 {
                return Err(Error::config(
                    "initial_data.profile",
                    "table needs at least 4 (radius, value) pairs of equal length",
                ));
            }
            if radii[0] != 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config(
                    "initial_data.profile",
                    "table radii must start at 0 and increase strictly",
                ));
            }
            if values.iter().chain(radii).any(|v| !v.is_finite()) {
                return Err(Error::config("initial_data.profile", "table holds non-finite entries"));
            }
        }
        Ok(())
    }

    /// Profile value at scaled radius `r ≥ 0`.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Gaussian => {
                let v = (-r * r).exp();
                if v < GAUSSIAN_FLUSH {
                    0.0
                } else {
                    v
                }
            }
            Profile::Bump => {
                if r < 1.0 {
                    (-1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            }
            Profile::Table { radii, values } => {
                let last = radii.len() - 1;
                if r > radii[last] {
                    return 0.0;
                }
                let k = radii.partition_point(|&x| x <= r).saturating_sub(1);
                let start = k.saturating_sub(1).min(radii.len() - 4);
                let w = lagrange_weights(r, &radii[start..start + 4]);
                w.iter().zip(&values[start..start + 4]).map(|(w, v)| w * v).sum()
            }
            Profile::Zero => 0.0,
        }
    }

    /// Scaled radius outside which the profile is (numerically) zero.
    pub fn support(&self) -> f64 {
        match self {
            Profile::Gaussian => GAUSSIAN_SUPPORT_WIDTHS,
            Profile::Bump => 1.0,
            Profile::Table { radii, .. } => radii[radii.len() - 1],
            Profile::Zero => 0.0,
        }
    }
}

/// `φ = ε f(|x|/w)`, `φ_t = ε g(|x|/w)` at the initial time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub profile: Profile,
    pub epsilon: f64,
    pub width: f64,
    pub g_profile: Profile,
}

impl InitialData {
    pub fn new(profile: Profile, epsilon: f64, width: f64) -> Self {
        Self {
            profile,
            epsilon,
            width,
            g_profile: Profile::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::config("initial_data.epsilon", "must be finite and >= 0"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::config("initial_data.width", "must be > 0"));
        }
        self.profile.validate()?;
        self.g_profile.validate()
    }

    /// Radius of the region where the data can be non-zero.
    pub fn support_radius(&self) -> f64 {
        self.width * self.profile.support().max(self.g_profile.support())
    }
}

/// Samples the data on the grid at `t = 0`; the support plus `margin` must
/// fit inside `[-L, L]^n`.
pub fn initial_state(data: &InitialData, grid: GridSpec, margin: f64) -> Result<State> {
    data.validate()?;
    let reach = data.support_radius() + margin;
    if data.epsilon > 0.0 && reach > grid.extent() {
        return Err(Error::SupportExceedsGrid(format!(
            "support radius {} plus margin {margin} exceeds half-width {}",
            data.support_radius(),
            grid.extent()
        )));
    }
    let sample = |profile: &Profile, label: &str| {
        ScalarField::from_fn(grid, label, |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt() / data.width;
            data.epsilon * profile.eval(r)
        })
    };
    let phi = sample(&data.profile, "phi")?;
    let psi = sample(&data.g_profile, "psi")?;
    State::new(0.0, phi, psi, data.epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_gives_zero_state() {
        let g = GridSpec::new(1, 5.0, 51).unwrap();
        let s = initial_state(&InitialData::new(Profile::Gaussian, 0.0, 1.0), g, 0.25).unwrap();
        assert_eq!(s.phi().norm_sup(), 0.0);
        assert_eq!(s.psi().norm_sup(), 0.0);
        assert_eq!(s.t(), 0.0);
        assert!(s.history().is_empty());
    }

    #[test]
    fn gaussian_peak_at_origin() {
        let g = GridSpec::new(2, 10.0, 101).unwrap();
        let s = initial_state(&InitialData::new(Profile::Gaussian, 0.01, 1.0), g, 0.5).unwrap();
        let origin = g.node(&[50, 50]);
        assert_eq!(s.phi().value(origin), 0.01);
        assert_eq!(s.phi().norm_sup(), 0.01);
    }

    #[test]
    fn bump_vanishes_outside_width() {
        let g = GridSpec::new(1, 10.0, 201).unwrap();
        let s = initial_state(&InitialData::new(Profile::Bump, 1.0, 1.0), g, 0.5).unwrap();
        for node in 0..g.len() {
            if g.radius(node) >= 1.0 {
                assert_eq!(s.phi().value(node), 0.0);
            }
        }
        assert!(s.phi().value(100) > 0.0);
    }

    #[test]
    fn support_must_fit() {
        let g = GridSpec::new(1, 5.0, 51).unwrap();
        let err = initial_state(&InitialData::new(Profile::Gaussian, 1.0, 1.0), g, 0.25);
        assert!(matches!(err, Err(Error::SupportExceedsGrid(_))));
    }

    #[test]
    fn table_profile_interpolates_cubics() {
        let radii: Vec<f64> = (0..8).map(|k| k as f64 * 0.25).collect();
        let values: Vec<f64> = radii.iter().map(|r| 1.0 - r * r * r / 8.0).collect();
        let p = Profile::Table { radii, values };
        p.validate().unwrap();
        assert!((p.eval(0.6) - (1.0 - 0.216 / 8.0)).abs() < 1e-14);
        assert_eq!(p.eval(2.0), 0.0);
    }
}
