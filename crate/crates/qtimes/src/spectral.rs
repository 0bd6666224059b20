//! Spectral averages and asymptotic-regime machinery.
//!
//! The flow and occupation means are momentum integrals of
//! (−x0/v(k) + τ_W(k,L)) against the weights |φ|²T, |φ|²τ_D and |φ|²T/v,
//! all continued above the barrier through complex ε. Regime bookkeeping
//! (filtered momentum k*, effective width σ_eff, crossover lengths L* and
//! L_c, above-barrier flux fraction) lives here too.

use crate::error::{Error, Result};
use crate::quadrature::{integrate_real_with_breaks, AdaptiveSpec};
use crate::scattering::{
    barrier_epsilon, dwell_time, transmission_probability, wigner_exit_time, wigner_time_opaque,
    Momentum, PhysicalParams,
};
use crate::wavepacket::{GaussianSpectrum, QuadratureSpec};

/// Exclusion half-width around k_b for the principal-value remainder
/// integrand (1/ε² has a simple pole there).
const POLE_EXCLUSION: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeLabel {
    PreOpaque,
    Hartman,
    AboveBarrier,
}

impl RegimeLabel {
    pub fn label(&self) -> &'static str {
        match self {
            Self::PreOpaque => "pre_opaque",
            Self::Hartman => "hartman",
            Self::AboveBarrier => "above_barrier",
        }
    }
}

/// Which spectral weight multiplies |φ(k)|².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralWeight {
    /// |φ|² T — transmitted flow
    Transmission,
    /// |φ|² τ_D — regional occupation
    Dwell,
    /// |φ|² T / v — local occupation at the exit
    TransmissionOverVelocity,
}

impl SpectralWeight {
    fn eval(&self, k: f64, spectrum: &GaussianSpectrum, params: &PhysicalParams) -> f64 {
        let mom = Momentum::new(k).expect("positive quadrature node");
        let g = spectrum.weight(k);
        match self {
            Self::Transmission => g * transmission_probability(mom, params),
            Self::Dwell => g * dwell_time(mom, params),
            Self::TransmissionOverVelocity => {
                g * transmission_probability(mom, params) / params.velocity(k)
            }
        }
    }
}

/// A spectral mean together with its normalization and validity context.
#[derive(Debug, Clone, Copy)]
pub struct SpectralMean {
    pub value: f64,
    /// ∫ |φ|²·weight dk (2π factors cancel in the mean and are omitted)
    pub normalization: f64,
    pub regime: RegimeLabel,
    /// false when the narrow-band/far-field preconditions are not met;
    /// the value is still computed
    pub assumptions_hold: bool,
}

fn weight_spec(qspec: &QuadratureSpec) -> AdaptiveSpec {
    AdaptiveSpec {
        rel_tol: qspec.rel_tol.min(1e-10),
        abs_tol: 1e-300,
        max_panels: qspec.max_panels,
        order: 15,
    }
}

fn mean_against_weight(
    weight: SpectralWeight,
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
    observable: impl Fn(f64) -> f64,
) -> Result<(f64, f64)> {
    qspec.validate(spectrum)?;
    let breaks = qspec.breaks(params);
    let spec = weight_spec(qspec);
    let num = integrate_real_with_breaks(
        |k| weight.eval(k, spectrum, params) * observable(k),
        &breaks,
        &spec,
        "spectral mean numerator",
    )?;
    let den = integrate_real_with_breaks(
        |k| weight.eval(k, spectrum, params),
        &breaks,
        &spec,
        "spectral mean normalization",
    )?;
    if den.value.re <= 0.0 {
        return Err(Error::EmptySignal { z: den.value.re });
    }
    Ok((num.value.re / den.value.re, den.value.re))
}

/// Regime of a barrier width against 1/ε(k0) and L*.
pub fn regime_label(spectrum: &GaussianSpectrum, params: &PhysicalParams) -> RegimeLabel {
    let ch = barrier_epsilon(Momentum::new(spectrum.k0).expect("k0 > 0"), params);
    if ch.eps2 <= 0.0 {
        return RegimeLabel::AboveBarrier;
    }
    let eps0 = ch.eps2.sqrt();
    let l = params.barrier_width;
    let l_star = (params.k_b() - spectrum.k0).powi(2) / (4.0 * spectrum.sigma_k.powi(2) * eps0);
    if l <= 1.0 / eps0 {
        RegimeLabel::PreOpaque
    } else if l < l_star {
        RegimeLabel::Hartman
    } else {
        RegimeLabel::AboveBarrier
    }
}

/// Mean flow time at the exit: E_TF[−x0/v + τ_W] with weight |φ|²T.
pub fn tf_mean_spectral(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<SpectralMean> {
    let x0 = spectrum.x0;
    let (value, normalization) =
        mean_against_weight(SpectralWeight::Transmission, spectrum, params, qspec, |k| {
            -x0 / params.velocity(k) + wigner_exit_time(Momentum::new(k).unwrap(), params)
        })?;
    Ok(SpectralMean {
        value,
        normalization,
        regime: regime_label(spectrum, params),
        assumptions_hold: spectrum.is_narrow_band() && spectrum.is_far_field(),
    })
}

/// Regional occupation mean with weight |φ|²τ_D, optionally carrying the
/// in-barrier phase-integral remainder (reported separately).
#[derive(Debug, Clone, Copy)]
pub struct QsRegionalMean {
    pub spectral_average: f64,
    pub remainder: Option<f64>,
    pub normalization: f64,
    pub regime: RegimeLabel,
    pub assumptions_hold: bool,
}

impl QsRegionalMean {
    pub fn value(&self) -> f64 {
        self.spectral_average + self.remainder.unwrap_or(0.0)
    }
}

pub fn qs_regional_mean_spectral(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
    include_remainder: bool,
) -> Result<QsRegionalMean> {
    let x0 = spectrum.x0;
    let (value, normalization) =
        mean_against_weight(SpectralWeight::Dwell, spectrum, params, qspec, |k| {
            -x0 / params.velocity(k) + wigner_exit_time(Momentum::new(k).unwrap(), params)
        })?;
    let remainder = if include_remainder {
        Some(qs_remainder(spectrum, params, qspec, normalization)?)
    } else {
        None
    };
    Ok(QsRegionalMean {
        spectral_average: value,
        remainder,
        normalization,
        regime: regime_label(spectrum, params),
        assumptions_hold: spectrum.is_narrow_band() && spectrum.is_far_field(),
    })
}

/// R(L) = (π/Z_QS)∫|φ|²T·m²L²/(2ħ²ε²) dk with Z_QS = 2π∫|φ|²τ_D dk,
/// taken in the principal-value sense around the ε² pole at k_b.
fn qs_remainder(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
    dwell_norm: f64,
) -> Result<f64> {
    let spec = weight_spec(qspec);
    let l = params.barrier_width;
    let pref = params.mass * params.mass * l * l / (2.0 * params.hbar * params.hbar);
    let integrand = |k: f64| {
        let mom = Momentum::new(k).unwrap();
        let ch = barrier_epsilon(mom, params);
        spectrum.weight(k) * transmission_probability(mom, params) * pref / ch.eps2
    };
    let k_b = params.k_b();
    let total = if k_b > qspec.k_min && k_b < qspec.k_max {
        let below = integrate_real_with_breaks(
            integrand,
            &[qspec.k_min, k_b - POLE_EXCLUSION],
            &spec,
            "occupation remainder below k_b",
        )?;
        let above = integrate_real_with_breaks(
            integrand,
            &[k_b + POLE_EXCLUSION, qspec.k_max],
            &spec,
            "occupation remainder above k_b",
        )?;
        below.value.re + above.value.re
    } else {
        integrate_real_with_breaks(
            integrand,
            &[qspec.k_min, qspec.k_max],
            &spec,
            "occupation remainder",
        )?
        .value
        .re
    };
    Ok(total / (2.0 * dwell_norm))
}

/// Local occupation mean at the exit: weight |φ|²T/v, same bracket as the
/// flow mean (the bare phase time of t(k,L) recombines (L−x0)/v into
/// −x0/v + τ_W at the exit).
pub fn qs_local_mean_spectral(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<SpectralMean> {
    let x0 = spectrum.x0;
    let (value, normalization) = mean_against_weight(
        SpectralWeight::TransmissionOverVelocity,
        spectrum,
        params,
        qspec,
        |k| -x0 / params.velocity(k) + wigner_exit_time(Momentum::new(k).unwrap(), params),
    )?;
    Ok(SpectralMean {
        value,
        normalization,
        regime: regime_label(spectrum, params),
        assumptions_hold: spectrum.is_narrow_band() && spectrum.is_far_field(),
    })
}

/// Filtered momentum: maximizer of |φ(k)|²T(k,L).
#[derive(Debug, Clone, Copy)]
pub struct KStar {
    pub k: f64,
    /// set when L ≥ L* (above-barrier dominated; the maximizer may sit on
    /// a transmission resonance rather than the sub-barrier saddle)
    pub regime_warning: bool,
}

pub fn k_star(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<KStar> {
    qspec.validate(spectrum)?;
    let f =
        |k: f64| spectrum.weight(k) * transmission_probability(Momentum::new(k).unwrap(), params);
    let regime_warning = regime_label(spectrum, params) == RegimeLabel::AboveBarrier;

    // coarse scan: 64 points over the window, plus a resonance-resolving
    // sweep above k_b (sin²(μL) structure needs ~24 points per period in μ)
    let mut best_k = qspec.k_min;
    let mut best_v = f64::NEG_INFINITY;
    let scan = |k: f64, best_k: &mut f64, best_v: &mut f64| {
        let v = f(k);
        if v > *best_v {
            *best_v = v;
            *best_k = k;
        }
    };
    let n0 = 64;
    for i in 0..=n0 {
        let k = qspec.k_min + (qspec.k_max - qspec.k_min) * i as f64 / n0 as f64;
        scan(k, &mut best_k, &mut best_v);
    }
    let k_b = params.k_b();
    if k_b < qspec.k_max && params.barrier_width > 0.0 {
        let mu_max = (qspec.k_max * qspec.k_max - params.k_b_sq()).sqrt();
        let periods = (mu_max * params.barrier_width / std::f64::consts::PI).ceil();
        let n1 = ((periods * 24.0) as usize).clamp(64, 60_000);
        for i in 1..=n1 {
            let mu = mu_max * i as f64 / n1 as f64;
            let k = (params.k_b_sq() + mu * mu).sqrt();
            scan(k, &mut best_k, &mut best_v);
        }
    }
    if best_v.is_nan() || best_v <= 0.0 {
        return Err(Error::DegenerateMaximum(
            "filtered spectrum vanishes over the whole window".into(),
        ));
    }

    // golden-section refinement on a bracket around the best scan point
    let width = (qspec.k_max - qspec.k_min) / n0 as f64;
    let lo = (best_k - width).max(qspec.k_min);
    let hi = (best_k + width).min(qspec.k_max);
    let k = golden_max(&f, lo, hi, 1e-10);
    let edge_tol = 1e-6 * (qspec.k_max - qspec.k_min);
    if k - qspec.k_min < edge_tol || qspec.k_max - k < edge_tol {
        return Err(Error::DegenerateMaximum(format!(
            "maximizer {k} sits on the window boundary"
        )));
    }
    Ok(KStar { k, regime_warning })
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > xtol {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Closed-form and measured effective width of the filtered spectrum at a
/// given momentum: 1/σ_eff² = 1/σ_k² − 2k_b²L/ε(at)³, plus the exact
/// curvature −∂²_k ln(|φ|²T) by central differences.
#[derive(Debug, Clone, Copy)]
pub struct SigmaEff {
    pub closed_form: f64,
    pub measured: f64,
}

pub fn sigma_eff(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    at: Momentum,
) -> Result<SigmaEff> {
    let ch = barrier_epsilon(at, params);
    if ch.eps2 <= 0.0 {
        return Err(Error::NoTunnelingRegime {
            k0: at.value(),
            k_b: params.k_b(),
        });
    }
    let l = params.barrier_width;
    let k_b2 = params.k_b_sq();
    let inv2 = spectrum.sigma_k.powi(-2) - 2.0 * k_b2 * l / ch.eps2.powf(1.5);
    if inv2 <= 0.0 {
        let (_, l_c) = crossover_lengths(spectrum, params)?;
        return Err(Error::NonPositiveCurvature { l, l_c });
    }
    let ln_f = |k: f64| {
        (spectrum.weight(k) * transmission_probability(Momentum::new(k).unwrap(), params)).ln()
    };
    let h = 1e-5 * at.value();
    let k = at.value();
    let curvature = -(ln_f(k + h) - 2.0 * ln_f(k) + ln_f(k - h)) / (h * h);
    if curvature <= 0.0 {
        let (_, l_c) = crossover_lengths(spectrum, params)?;
        return Err(Error::NonPositiveCurvature { l, l_c });
    }
    Ok(SigmaEff {
        closed_form: inv2.powf(-0.5),
        measured: curvature.powf(-0.5),
    })
}

/// (L*, L_c): above-barrier crossover scale and saddle-breakdown scale.
pub fn crossover_lengths(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
) -> Result<(f64, f64)> {
    let k_b = params.k_b();
    if spectrum.k0 >= k_b {
        return Err(Error::NoTunnelingRegime {
            k0: spectrum.k0,
            k_b,
        });
    }
    let eps0 = (params.k_b_sq() - spectrum.k0 * spectrum.k0).sqrt();
    let s2 = spectrum.sigma_k * spectrum.sigma_k;
    let l_star = (k_b - spectrum.k0).powi(2) / (4.0 * s2 * eps0);
    let l_c = eps0.powi(3) / (2.0 * params.k_b_sq() * s2);
    Ok((l_star, l_c))
}

/// Fraction of the transmitted flux carried by above-barrier momenta:
/// ∫_{k_b}^∞ |φ|²T dk / ∫_0^∞ |φ|²T dk.
pub fn above_barrier_fraction(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<f64> {
    qspec.validate(spectrum)?;
    let spec = weight_spec(qspec);
    let f =
        |k: f64| spectrum.weight(k) * transmission_probability(Momentum::new(k).unwrap(), params);
    let k_b = params.k_b();
    if k_b >= qspec.k_max {
        return Ok(0.0);
    }
    if k_b <= qspec.k_min {
        return Ok(1.0);
    }
    let below = integrate_real_with_breaks(f, &[qspec.k_min, k_b], &spec, "sub-barrier flux")?;
    let above = integrate_real_with_breaks(f, &[k_b, qspec.k_max], &spec, "above-barrier flux")?;
    Ok(above.value.re / (below.value.re + above.value.re))
}

/// Width at which the above-barrier fraction reaches one half, by bisection.
pub fn above_barrier_crossing(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
    l_lo: f64,
    l_hi: f64,
    tol: f64,
) -> Result<f64> {
    let frac = |l: f64| -> Result<f64> {
        let p = params.with_width(l)?;
        above_barrier_fraction(spectrum, &p, qspec)
    };
    let mut lo = l_lo;
    let mut hi = l_hi;
    let f_lo = frac(lo)?;
    let f_hi = frac(hi)?;
    if (f_lo - 0.5) * (f_hi - 0.5) > 0.0 {
        return Err(Error::ValidationFailed(format!(
            "no 0.5 crossing bracketed in [{l_lo}, {l_hi}]: fractions {f_lo:.3} .. {f_hi:.3}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (frac(mid)? - 0.5) * (f_lo - 0.5) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Opaque-filtering estimate −x0/v(k*) + τ_W^∞(k*) with the directly
/// maximized k*. Valid only for ε(k0)L ≫ 1 and L < L*; `in_validity_window`
/// records that check.
#[derive(Debug, Clone, Copy)]
pub struct OpaqueMean {
    pub value: f64,
    pub k_star: f64,
    pub in_validity_window: bool,
}

pub fn tf_mean_opaque(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<OpaqueMean> {
    let ks = k_star(spectrum, params, qspec)?;
    let mom = Momentum::new(ks.k)?;
    let value = -spectrum.x0 / params.velocity(ks.k) + wigner_time_opaque(mom, params)?;
    let ch = barrier_epsilon(Momentum::new(spectrum.k0)?, params);
    let in_validity_window = if ch.eps2 > 0.0 {
        let eps0 = ch.eps2.sqrt();
        let (l_star, _) = crossover_lengths(spectrum, params)?;
        eps0 * params.barrier_width >= 3.0 && params.barrier_width < l_star && !ks.regime_warning
    } else {
        false
    };
    Ok(OpaqueMean {
        value,
        k_star: ks.k,
        in_validity_window,
    })
}

/// Flow-spread estimate (1/(2σ_k v(k*)))·(1 − L/L_c)^{1/2} and its
/// linearization (1 − L/(2L_c)), with the shift-formula momentum
/// k* = k0 + 2σ_k²k0L/ε(k0).
#[derive(Debug, Clone, Copy)]
pub struct SpreadEstimate {
    pub sqrt_form: f64,
    pub linearized: f64,
    pub k_star_shift: f64,
    pub in_validity_window: bool,
}

pub fn tf_spread_estimate(
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
) -> Result<SpreadEstimate> {
    let (l_star, l_c) = crossover_lengths(spectrum, params)?;
    let l = params.barrier_width;
    if l >= l_c {
        return Err(Error::NonPositiveCurvature { l, l_c });
    }
    let eps0 = (params.k_b_sq() - spectrum.k0 * spectrum.k0).sqrt();
    let k_star_shift = spectrum.k0 + 2.0 * spectrum.sigma_k.powi(2) * spectrum.k0 * l / eps0;
    let base = 1.0 / (2.0 * spectrum.sigma_k * params.velocity(k_star_shift));
    Ok(SpreadEstimate {
        sqrt_form: base * (1.0 - l / l_c).sqrt(),
        linearized: base * (1.0 - l / (2.0 * l_c)),
        k_star_shift,
        in_validity_window: l < l_star && l < 0.5 * l_c,
    })
}

/// Occupation-spread estimate 1/(2σ_k v(k0)), independent of L.
pub fn qs_spread_estimate(spectrum: &GaussianSpectrum, params: &PhysicalParams) -> f64 {
    1.0 / (2.0 * spectrum.sigma_k * params.velocity(spectrum.k0))
}

/// Bundled regime diagnostics for one barrier width.
#[derive(Debug, Clone)]
pub struct RegimeReport {
    pub l: f64,
    pub k_star: f64,
    pub sigma_eff: Option<f64>,
    pub l_star: f64,
    pub l_c: f64,
    pub above_barrier_fraction: f64,
    pub regime: RegimeLabel,
}

impl RegimeReport {
    pub fn analyze(
        spectrum: &GaussianSpectrum,
        params: &PhysicalParams,
        qspec: &QuadratureSpec,
    ) -> Result<Self> {
        let (l_star, l_c) = crossover_lengths(spectrum, params)?;
        let ks = k_star(spectrum, params, qspec)?;
        let se = match Momentum::new(ks.k) {
            Ok(mom) => sigma_eff(spectrum, params, mom).ok().map(|s| s.closed_form),
            Err(_) => None,
        };
        Ok(Self {
            l: params.barrier_width,
            k_star: ks.k,
            sigma_eff: se,
            l_star,
            l_c,
            above_barrier_fraction: above_barrier_fraction(spectrum, params, qspec)?,
            regime: regime_label(spectrum, params),
        })
    }

    pub fn csv_header() -> &'static str {
        "L,k_star,sigma_eff,L_star,L_c,above_barrier_fraction,regime"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{}",
            self.l,
            self.k_star,
            self.sigma_eff
                .map_or_else(|| "nan".to_string(), |s| format!("{s:.16e}")),
            self.l_star,
            self.l_c,
            self.above_barrier_fraction,
            self.regime.label()
        )
    }
}
