//! Two-level Rabi model: exact closed-form signals and time densities used
//! to validate the post-processing layer.

use crate::distributions::{DistributionKind, TimeDistribution};
use crate::error::{Error, Result};
use crate::wavepacket::{SeriesMeta, TimeSeries};

#[derive(Debug, Clone, Copy)]
pub struct RabiParams {
    pub omega0: f64,
}

impl RabiParams {
    pub fn new(omega0: f64) -> Result<Self> {
        if omega0 > 0.0 && omega0.is_finite() {
            Ok(Self { omega0 })
        } else {
            Err(Error::InvalidParams(format!(
                "Rabi frequency must be > 0, got {omega0}"
            )))
        }
    }

    /// Rabi period T_R = 2π/ω0.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega0
    }
}

impl Default for RabiParams {
    fn default() -> Self {
        Self { omega0: 1.0 }
    }
}

/// Excited-state population p1(t) = sin²(ω0 t / 2).
pub fn excited_population(t: f64, rp: &RabiParams) -> f64 {
    (0.5 * rp.omega0 * t).sin().powi(2)
}

/// Closed-form arrival density (ω0/2)·sin(ω0 t) on [0, T_R/2].
pub fn toa_density(t: f64, rp: &RabiParams) -> f64 {
    0.5 * rp.omega0 * (rp.omega0 * t).sin()
}

/// Closed-form stroboscopic density (ω0/π)·sin²(ω0 t / 2) on [0, T_R].
pub fn qs_density(t: f64, rp: &RabiParams) -> f64 {
    rp.omega0 / std::f64::consts::PI * (0.5 * rp.omega0 * t).sin().powi(2)
}

/// Exact arrival mean T_R/4.
pub fn toa_mean(rp: &RabiParams) -> f64 {
    0.25 * rp.period()
}

/// Exact stroboscopic mean T_R/2.
pub fn qs_mean(rp: &RabiParams) -> f64 {
    0.5 * rp.period()
}

/// Uniformly sampled population signal on [0, T_R].
pub fn sample_population(rp: &RabiParams, n: usize) -> Result<TimeSeries> {
    if n < 16 {
        return Err(Error::InvalidParams(format!(
            "signal needs at least 16 samples, got {n}"
        )));
    }
    let tr = rp.period();
    let t: Vec<f64> = (0..n).map(|i| tr * i as f64 / (n - 1) as f64).collect();
    let values: Vec<f64> = t.iter().map(|&ti| excited_population(ti, rp)).collect();
    let meta = SeriesMeta {
        kind: "rabi_population".into(),
        fields: vec![("omega0".into(), format!("{}", rp.omega0))],
    };
    Ok(TimeSeries { t, values, meta })
}

/// TOA density sampled on [0, T_R/2] as a grid distribution.
pub fn analytic_toa(rp: &RabiParams, n: usize) -> TimeDistribution {
    let half = 0.5 * rp.period();
    let t: Vec<f64> = (0..n).map(|i| half * i as f64 / (n - 1) as f64).collect();
    let density: Vec<f64> = t.iter().map(|&ti| toa_density(ti, rp)).collect();
    TimeDistribution::from_density(t, density, DistributionKind::TimeOfArrival)
        .expect("analytic arrival density is positive")
}

/// QS density sampled on [0, T_R] as a grid distribution.
pub fn analytic_qs(rp: &RabiParams, n: usize) -> TimeDistribution {
    let tr = rp.period();
    let t: Vec<f64> = (0..n).map(|i| tr * i as f64 / (n - 1) as f64).collect();
    let density: Vec<f64> = t.iter().map(|&ti| qs_density(ti, rp)).collect();
    TimeDistribution::from_density(t, density, DistributionKind::QuantumStroboscopic)
        .expect("analytic stroboscopic density is positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn population_examples() {
        let rp = RabiParams::default();
        assert_abs_diff_eq!(excited_population(0.0, &rp), 0.0);
        assert_relative_eq!(
            excited_population(0.5 * rp.period(), &rp),
            1.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            excited_population(0.25 * rp.period(), &rp),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn analytic_toa_examples() {
        let rp = RabiParams::new(1.3).unwrap();
        assert_relative_eq!(toa_mean(&rp), 0.25 * rp.period(), epsilon = 1e-15);
        assert_abs_diff_eq!(toa_density(0.0, &rp), 0.0);
        let d = analytic_toa(&rp, 4097);
        assert_relative_eq!(d.trapezoid_mass(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.mean(), toa_mean(&rp), max_relative = 1e-6);
    }

    #[test]
    fn analytic_qs_examples() {
        let rp = RabiParams::default();
        assert_relative_eq!(qs_mean(&rp), 0.5 * rp.period(), epsilon = 1e-15);
        // peak value ω0/π at t = T_R/2
        assert_relative_eq!(
            qs_density(0.5 * rp.period(), &rp),
            rp.omega0 / std::f64::consts::PI,
            epsilon = 1e-12
        );
        let d = analytic_qs(&rp, 4097);
        assert_relative_eq!(d.trapezoid_mass(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.mean(), qs_mean(&rp), max_relative = 1e-6);
    }

    #[test]
    fn invalid_frequency_rejected() {
        assert!(RabiParams::new(0.0).is_err());
        assert!(RabiParams::new(-2.0).is_err());
    }
}
