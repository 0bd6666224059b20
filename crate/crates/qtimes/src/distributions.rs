//! Post-processing layer: turns a sampled signal p(t) into normalized time
//! densities. The two constructions from the same signal are
//!
//!   time-of-flow        π_TF ∝ |dp/dt|     (activity),
//!   quantum-stroboscopic π_QS ∝ p(t)        (presence),
//!
//! with arrival/departure conditioning on the sign of dp/dt.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::quadrature::trapezoid;
use crate::wavepacket::TimeSeries;

/// Z_TF below this is treated as a stationary signal ([H, ρ] = 0 limit).
const STATIONARY_Z: f64 = 1e-14;
/// Negative p(t) beyond this is upstream quadrature failure, not noise.
const NEGATIVE_CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    TimeOfFlow,
    QuantumStroboscopic,
    TimeOfArrival,
    TimeOfDeparture,
}

impl DistributionKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::TimeOfFlow => "tf",
            Self::QuantumStroboscopic => "qs",
            Self::TimeOfArrival => "toa",
            Self::TimeOfDeparture => "tod",
        }
    }
}

/// Normalized density on a time window. The stored grid integrates to one
/// by the trapezoidal rule; `normalization` keeps the raw signal mass
/// (Z_TF = ∫|dp/dt| dt or Z_QS = ∫p dt) removed during normalization.
#[derive(Debug, Clone)]
pub struct TimeDistribution {
    pub t: Vec<f64>,
    pub density: Vec<f64>,
    pub normalization: f64,
    pub window: (f64, f64),
    pub kind: DistributionKind,
}

impl TimeDistribution {
    /// Build from a raw non-negative density; rescales so the trapezoidal
    /// mass is exactly one and stores the removed factor as `normalization`.
    pub fn from_density(
        t: Vec<f64>,
        mut density: Vec<f64>,
        kind: DistributionKind,
    ) -> Result<Self> {
        assert_eq!(t.len(), density.len());
        assert!(t.len() >= 2, "distribution needs at least two samples");
        if let Some(&bad) = density.iter().find(|d| **d < 0.0 || !d.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "density values must be finite and non-negative, got {bad}"
            )));
        }
        let z = trapezoid(&t, &density);
        if z <= 0.0 {
            return Err(Error::EmptySignal { z });
        }
        for d in &mut density {
            *d /= z;
        }
        let window = (t[0], t[t.len() - 1]);
        Ok(Self {
            t,
            density,
            normalization: z,
            window,
            kind,
        })
    }

    pub fn mean(&self) -> f64 {
        let weighted: Vec<f64> = self
            .t
            .iter()
            .zip(&self.density)
            .map(|(t, d)| t * d)
            .collect();
        trapezoid(&self.t, &weighted)
    }

    pub fn spread(&self) -> f64 {
        let mean = self.mean();
        let weighted: Vec<f64> = self
            .t
            .iter()
            .zip(&self.density)
            .map(|(t, d)| t * t * d)
            .collect();
        (trapezoid(&self.t, &weighted) - mean * mean)
            .max(0.0)
            .sqrt()
    }

    pub fn trapezoid_mass(&self) -> f64 {
        trapezoid(&self.t, &self.density)
    }

    /// Truncation diagnostic: largest endpoint density relative to the peak.
    /// Near zero means the window captured the support; O(1) means mass was
    /// cut at the boundary.
    pub fn edge_density_ratio(&self) -> f64 {
        let peak = self.density.iter().cloned().fold(0.0f64, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        self.density[0].max(self.density[self.density.len() - 1]) / peak
    }

    /// CSV with the shared header convention plus the Z field.
    pub fn to_csv(&self, fields: &[(String, String)]) -> String {
        let mut out = String::new();
        let mut header = format!("# kind={}", self.kind.label());
        for (k, v) in fields {
            let _ = write!(header, ", {k}={v}");
        }
        let _ = write!(header, ", Z={:.16e}", self.normalization);
        out.push_str(&header);
        out.push('\n');
        out.push_str("t,density\n");
        for (t, d) in self.t.iter().zip(&self.density) {
            let _ = writeln!(out, "{t:.16e},{d:.16e}");
        }
        out
    }
}

/// Mean and spread of a distribution; mirrors the moment accessors.
pub fn moments(d: &TimeDistribution) -> (f64, f64) {
    (d.mean(), d.spread())
}

/// dp/dt by 4th-order central differences, one-sided at the edges.
/// Requires a uniform grid.
pub fn derivative_4th(t: &[f64], p: &[f64]) -> Vec<f64> {
    let n = t.len();
    assert!(n >= 5, "4th-order differencing needs at least 5 samples");
    let h = (t[n - 1] - t[0]) / (n - 1) as f64;
    let uniform = t
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
    assert!(uniform, "derivative requires a uniform time grid");
    let mut d = vec![0.0; n];
    for i in 2..n - 2 {
        d[i] = (p[i - 2] - 8.0 * p[i - 1] + 8.0 * p[i + 1] - p[i + 2]) / (12.0 * h);
    }
    d[0] = (-25.0 * p[0] + 48.0 * p[1] - 36.0 * p[2] + 16.0 * p[3] - 3.0 * p[4]) / (12.0 * h);
    d[1] = (-3.0 * p[0] - 10.0 * p[1] + 18.0 * p[2] - 6.0 * p[3] + p[4]) / (12.0 * h);
    d[n - 2] = (3.0 * p[n - 1] + 10.0 * p[n - 2] - 18.0 * p[n - 3] + 6.0 * p[n - 4] - p[n - 5])
        / (12.0 * h);
    d[n - 1] = (25.0 * p[n - 1] - 48.0 * p[n - 2] + 36.0 * p[n - 3] - 16.0 * p[n - 4]
        + 3.0 * p[n - 5])
        / (12.0 * h);
    d
}

fn check_min_samples(s: &TimeSeries) -> Result<()> {
    if s.t.len() < 16 {
        return Err(Error::InvalidParams(format!(
            "signal needs at least 16 samples, got {}",
            s.t.len()
        )));
    }
    Ok(())
}

/// Time-of-flow density |dp/dt| / Z_TF from a sampled occupation signal.
pub fn tf_from_signal(s: &TimeSeries) -> Result<TimeDistribution> {
    check_min_samples(s)?;
    let deriv = derivative_4th(&s.t, &s.values);
    let speed: Vec<f64> = deriv.iter().map(|d| d.abs()).collect();
    let z = trapezoid(&s.t, &speed);
    if z < STATIONARY_Z {
        return Err(Error::StationarySignal { z });
    }
    TimeDistribution::from_density(s.t.clone(), speed, DistributionKind::TimeOfFlow)
}

/// Time-of-flow density |j| / Z_TF directly from a sampled current; bypasses
/// finite differencing when the analytic current is available.
///
/// The absolute stationarity threshold of [`tf_from_signal`] guards against
/// differencing noise on O(1) occupation signals; a supplied current carries
/// no such noise and may be legitimately tiny (deep-tunneling exit currents
/// reach 1e-18 at reference parameters), so only a vanishing mass is rejected.
pub fn tf_from_current(s: &TimeSeries) -> Result<TimeDistribution> {
    check_min_samples(s)?;
    let speed: Vec<f64> = s.values.iter().map(|j| j.abs()).collect();
    let z = trapezoid(&s.t, &speed);
    if z <= 0.0 {
        return Err(Error::StationarySignal { z });
    }
    TimeDistribution::from_density(s.t.clone(), speed, DistributionKind::TimeOfFlow)
}

/// Stroboscopic density p(t) / Z_QS. Tiny negative quadrature noise (down to
/// −1e−12) is clipped to zero; anything worse is an upstream failure.
pub fn qs_from_signal(s: &TimeSeries) -> Result<TimeDistribution> {
    check_min_samples(s)?;
    let min = s.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -NEGATIVE_CLIP {
        return Err(Error::ExcessNegativity {
            min,
            threshold: NEGATIVE_CLIP,
        });
    }
    let clipped: Vec<f64> = s.values.iter().map(|v| v.max(0.0)).collect();
    let z = trapezoid(&s.t, &clipped);
    if z <= 0.0 {
        return Err(Error::EmptySignal { z });
    }
    TimeDistribution::from_density(s.t.clone(), clipped, DistributionKind::QuantumStroboscopic)
}

/// Arrival/departure split of the flow density: TOA ∝ max(dp/dt, 0),
/// TOD ∝ max(−dp/dt, 0), each self-normalized on the full window.
/// A branch with no support comes back as `None`.
pub fn split_toa_tod(
    s: &TimeSeries,
) -> Result<(Option<TimeDistribution>, Option<TimeDistribution>)> {
    check_min_samples(s)?;
    let deriv = derivative_4th(&s.t, &s.values);
    let up: Vec<f64> = deriv.iter().map(|d| d.max(0.0)).collect();
    let down: Vec<f64> = deriv.iter().map(|d| (-d).max(0.0)).collect();
    let make = |density: Vec<f64>, kind| -> Result<Option<TimeDistribution>> {
        if trapezoid(&s.t, &density) < STATIONARY_Z {
            Ok(None)
        } else {
            TimeDistribution::from_density(s.t.clone(), density, kind).map(Some)
        }
    };
    Ok((
        make(up, DistributionKind::TimeOfArrival)?,
        make(down, DistributionKind::TimeOfDeparture)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rabi::{self, RabiParams};
    use crate::wavepacket::{SeriesMeta, TimeSeries};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::PI;

    fn series(t: Vec<f64>, values: Vec<f64>) -> TimeSeries {
        TimeSeries {
            t,
            values,
            meta: SeriesMeta {
                kind: "test".into(),
                fields: vec![],
            },
        }
    }

    fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn tf_of_rabi_signal_matches_closed_form() {
        // p = sin²(t/2) on [0, 2π]: |dp/dt| = |sin t|/2, normalized mean π
        let t = uniform_grid(0.0, 2.0 * PI, 8192);
        let p: Vec<f64> = t.iter().map(|x| (0.5 * x).sin().powi(2)).collect();
        let d = tf_from_signal(&series(t.clone(), p)).unwrap();
        assert_relative_eq!(d.mean(), PI, max_relative = 1e-6);
        assert_relative_eq!(d.trapezoid_mass(), 1.0, epsilon = 1e-12);
        // pointwise against |sin(t)|/4 (density over the full period)
        for (i, &ti) in t.iter().enumerate().step_by(511) {
            assert_abs_diff_eq!(d.density[i], ti.sin().abs() / 4.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn tf_of_constant_signal_is_stationary_error() {
        let t = uniform_grid(0.0, 5.0, 64);
        let p = vec![0.5; 64];
        assert!(matches!(
            tf_from_signal(&series(t, p)),
            Err(Error::StationarySignal { .. })
        ));
    }

    #[test]
    fn tf_of_linear_ramp_is_uniform() {
        let tf = 8.0;
        let t = uniform_grid(0.0, tf, 512);
        let p: Vec<f64> = t.iter().map(|x| x / tf).collect();
        let d = tf_from_signal(&series(t, p)).unwrap();
        for v in &d.density {
            assert_relative_eq!(*v, 1.0 / tf, max_relative = 1e-10);
        }
        assert_relative_eq!(d.mean(), tf / 2.0, max_relative = 1e-10);
        // second moment carries the trapezoid-rule O(h²) error
        assert_relative_eq!(d.spread(), tf / 12.0f64.sqrt(), max_relative = 1e-5);
    }

    #[test]
    fn qs_examples() {
        let t = uniform_grid(0.0, 2.0 * PI, 4096);
        let p: Vec<f64> = t.iter().map(|x| (0.5 * x).sin().powi(2)).collect();
        let d = qs_from_signal(&series(t.clone(), p)).unwrap();
        assert_relative_eq!(d.mean(), PI, max_relative = 1e-8);

        // constant signal: uniform distribution over the window
        let c = qs_from_signal(&series(t.clone(), vec![0.3; 4096])).unwrap();
        assert_relative_eq!(c.mean(), PI, max_relative = 1e-12);
        for v in &c.density {
            assert_relative_eq!(*v, 1.0 / (2.0 * PI), max_relative = 1e-12);
        }

        // narrow bump concentrates the mean at its center
        let tc = 2.0;
        let bump: Vec<f64> = t
            .iter()
            .map(|x| (-((x - tc) / 0.01).powi(2)).exp())
            .collect();
        let b = qs_from_signal(&series(t, bump)).unwrap();
        assert_abs_diff_eq!(b.mean(), tc, epsilon = 1e-4);
    }

    #[test]
    fn qs_negativity_handling() {
        let t = uniform_grid(0.0, 1.0, 32);
        let mut p = vec![1.0; 32];
        p[3] = -5e-13; // clipped quadrature noise
        assert!(qs_from_signal(&series(t.clone(), p.clone())).is_ok());
        p[3] = -1e-9; // upstream failure
        assert!(matches!(
            qs_from_signal(&series(t, p)),
            Err(Error::ExcessNegativity { .. })
        ));
    }

    #[test]
    fn tf_from_current_examples() {
        let t = uniform_grid(0.0, 10.0, 512);
        // non-negative current: same as direct normalization
        let j: Vec<f64> = t.iter().map(|x| (-(x - 5.0).powi(2)).exp()).collect();
        let d = tf_from_current(&series(t.clone(), j.clone())).unwrap();
        let z = trapezoid(&t, &j);
        for i in [0usize, 100, 400] {
            assert_relative_eq!(d.density[i], j[i] / z, max_relative = 1e-12);
        }
        // sign flip leaves a node at the crossing
        let j2: Vec<f64> = t.iter().map(|x| x - 5.0).collect();
        let d2 = tf_from_current(&series(t.clone(), j2)).unwrap();
        let at_node =
            d2.t.iter()
                .position(|&x| (x - 5.0).abs() < 1e-2 + 10.0 / 511.0)
                .unwrap();
        assert!(d2.density[at_node] < 0.02 * d2.density[511]);
    }

    #[test]
    fn toa_tod_split_on_rabi() {
        let rp = RabiParams::default();
        let s = rabi::sample_population(&rp, 8192).unwrap();
        let (toa, tod) = split_toa_tod(&s).unwrap();
        let toa = toa.unwrap();
        let tod = tod.unwrap();
        assert_relative_eq!(toa.mean(), rabi::toa_mean(&rp), max_relative = 1e-3 * 0.1);
        // departure mirror: mean 3 T_R / 4 by symmetry of sin²
        assert_relative_eq!(tod.mean(), 0.75 * rp.period(), max_relative = 1e-4);

        // monotone signal: departure branch empty
        let t = uniform_grid(0.0, 1.0, 64);
        let ramp = t.clone();
        let (toa2, tod2) = split_toa_tod(&series(t, ramp)).unwrap();
        assert!(toa2.is_some());
        assert!(tod2.is_none());
    }

    #[test]
    fn tf_qs_inequivalence_witness() {
        // |mean_TF(TOA) − mean_QS| = T_R/4 for the Rabi signal
        let rp = RabiParams::default();
        let s = rabi::sample_population(&rp, 4096).unwrap();
        let (toa, _) = split_toa_tod(&s).unwrap();
        let qs = qs_from_signal(&s).unwrap();
        let gap = (qs.mean() - toa.unwrap().mean()).abs();
        assert_relative_eq!(gap, 0.25 * rp.period(), max_relative = 1e-3);
    }

    #[test]
    fn refinement_convergence_rate() {
        // arrival-mean error vs n on log-log: slope ≥ 1.8
        let rp = RabiParams::default();
        let exact = rabi::toa_mean(&rp);
        let mut points = Vec::new();
        for n in [256usize, 512, 1024, 2048] {
            let s = rabi::sample_population(&rp, n).unwrap();
            let (toa, _) = split_toa_tod(&s).unwrap();
            let err = (toa.unwrap().mean() - exact).abs().max(1e-15);
            points.push(((n as f64).ln(), err.ln()));
        }
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert!(
            -slope >= 1.8,
            "measured convergence order {:.2} below 1.8",
            -slope
        );
    }

    #[test]
    fn gaussian_density_spread() {
        // density ∝ exp(−2σ²v²(t−t_c)²) has spread 1/(2σv)
        let (sigma, v, tc) = (0.05, 2.0, 30.0);
        let t = uniform_grid(0.0, 60.0, 2048);
        let p: Vec<f64> = t
            .iter()
            .map(|&ti| (-2.0 * sigma * sigma * v * v * (ti - tc).powi(2)).exp())
            .collect();
        let d = qs_from_signal(&series(t, p)).unwrap();
        assert_relative_eq!(d.spread(), 1.0 / (2.0 * sigma * v), max_relative = 1e-6);
        assert_relative_eq!(d.mean(), tc, max_relative = 1e-10);
    }

    #[test]
    fn min_sample_contract() {
        let t = uniform_grid(0.0, 1.0, 15);
        let p: Vec<f64> = t.iter().map(|x| x * x).collect();
        assert!(tf_from_signal(&series(t, p)).is_err());
        let t16 = uniform_grid(0.0, 1.0, 16);
        let p16: Vec<f64> = t16.iter().map(|x| x * x).collect();
        assert!(tf_from_signal(&series(t16, p16)).is_ok());
    }

    #[test]
    fn csv_round_trip_shape() {
        let t = uniform_grid(0.0, 1.0, 16);
        let p: Vec<f64> = t.iter().map(|x| 1.0 + x).collect();
        let d = qs_from_signal(&series(t, p)).unwrap();
        let csv = d.to_csv(&[("L".into(), "5".into())]);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# kind=qs, L=5, Z="));
        assert_eq!(lines.next().unwrap(), "t,density");
        assert_eq!(lines.count(), 16);
    }
}
