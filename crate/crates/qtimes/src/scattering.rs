//! Stationary scattering on the rectangular barrier.
//!
//! Everything below is evaluated through a single complex continuation of the
//! evanescence parameter ε(k) = sqrt(k_b² − k²): real below the barrier top,
//! purely imaginary above it (principal branch, so hyperbolic functions turn
//! trigonometric automatically). Ratios that are 0/0 at the branch point are
//! written in terms of sinhc(z) = sinh(z)/z, which keeps every quantity
//! continuous across k = k_b without separate code paths.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Barrier-top tag threshold on |ε| relative to k_b.
const BARRIER_TOP_EPS: f64 = 1e-6;
/// Switch to the series branch of the regularized brackets when |εL| is
/// below this; the dropped terms are O((εL)^6) while the direct forms lose
/// ~|εL|^-2 digits to cancellation, so the crossover sits near 1e-3.
const SERIES_SWITCH: f64 = 1e-3;

/// Mass, ħ, barrier height and width in natural units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub mass: f64,
    pub hbar: f64,
    pub barrier_height: f64,
    pub barrier_width: f64,
}

impl PhysicalParams {
    pub fn new(mass: f64, hbar: f64, barrier_height: f64, barrier_width: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "mass must be > 0, got {mass}"
            )));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "hbar must be > 0, got {hbar}"
            )));
        }
        if !(barrier_height > 0.0 && barrier_height.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "barrier height must be > 0, got {barrier_height}"
            )));
        }
        if !(barrier_width >= 0.0 && barrier_width.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "barrier width must be >= 0, got {barrier_width}"
            )));
        }
        let p = Self {
            mass,
            hbar,
            barrier_height,
            barrier_width,
        };
        if !(p.k_b().is_finite() && p.k_b() > 0.0) {
            return Err(Error::InvalidParams("derived k_b is not finite".into()));
        }
        Ok(p)
    }

    pub fn with_width(&self, barrier_width: f64) -> Result<Self> {
        Self::new(self.mass, self.hbar, self.barrier_height, barrier_width)
    }

    /// Barrier wavenumber k_b = sqrt(2 m V0)/ħ.
    pub fn k_b(&self) -> f64 {
        self.k_b_sq().sqrt()
    }

    /// k_b² = 2 m V0 / ħ², kept in product form so regime boundaries that
    /// are exact in these parameters stay exact in floating point.
    pub fn k_b_sq(&self) -> f64 {
        2.0 * self.mass * self.barrier_height / (self.hbar * self.hbar)
    }

    /// Group velocity v(k) = ħk/m.
    pub fn velocity(&self, k: f64) -> f64 {
        self.hbar * k / self.mass
    }

    /// Kinetic energy E_k = ħ²k²/(2m).
    pub fn energy(&self, k: f64) -> f64 {
        self.hbar * self.hbar * k * k / (2.0 * self.mass)
    }
}

/// Strictly positive wavenumber of a scattering state.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Momentum(f64);

impl Momentum {
    pub fn new(k: f64) -> Result<Self> {
        if k > 0.0 && k.is_finite() {
            Ok(Self(k))
        } else {
            Err(Error::InvalidParams(format!(
                "wavenumber must be finite and > 0, got {k}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    SubBarrier,
    BarrierTop,
    AboveBarrier,
}

/// ε(k) with its regime tag. `eps2` is kept as the exact real k_b² − k² so
/// the complex square root sits exactly on the real or imaginary axis.
#[derive(Debug, Clone, Copy)]
pub struct BarrierChannel {
    pub eps2: f64,
    pub epsilon: Complex64,
    pub regime: Regime,
}

/// ε(k) = sqrt(k_b² − k²), continued as +i·sqrt(k² − k_b²) above the barrier.
pub fn barrier_epsilon(k: Momentum, p: &PhysicalParams) -> BarrierChannel {
    let k = k.value();
    let k_b = p.k_b();
    let eps2 = p.k_b_sq() - k * k;
    let epsilon = Complex64::new(eps2, 0.0).sqrt();
    let regime = if epsilon.norm() <= BARRIER_TOP_EPS * k_b {
        Regime::BarrierTop
    } else if eps2 > 0.0 {
        Regime::SubBarrier
    } else {
        Regime::AboveBarrier
    };
    BarrierChannel {
        eps2,
        epsilon,
        regime,
    }
}

/// sinh(z)/z, series near the origin.
pub(crate) fn sinhc(z: Complex64) -> Complex64 {
    if z.norm() < SERIES_SWITCH {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) + z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sinh() / z
    }
}

/// Shared denominator pieces for the closed forms at one (k, L).
struct BarrierTerms {
    k: f64,
    l: f64,
    eps2: f64,
    eps: Complex64,
    /// i(ε² − k²)L·sinhc(εL); t·e^{ikL} = 2k/(2k·cosh(εL) + this)
    w: Complex64,
    cosh_el: Complex64,
    sinhc_el: Complex64,
    /// D/ε² = (ε²−k²)² L² sinhc²(εL) + 4k² cosh²(εL)
    d_reduced: Complex64,
}

impl BarrierTerms {
    fn new(k: Momentum, p: &PhysicalParams) -> Self {
        let ch = barrier_epsilon(k, p);
        let k = k.value();
        let l = p.barrier_width;
        let z = ch.epsilon * l;
        let cosh_el = z.cosh();
        let sinhc_el = sinhc(z);
        let a = ch.eps2 - k * k;
        let w = Complex64::new(0.0, 1.0) * a * l * sinhc_el;
        let d_reduced = Complex64::new(a * a * l * l, 0.0) * sinhc_el * sinhc_el
            + 4.0 * k * k * cosh_el * cosh_el;
        Self {
            k,
            l,
            eps2: ch.eps2,
            eps: ch.epsilon,
            w,
            cosh_el,
            sinhc_el,
            d_reduced,
        }
    }

    /// t(k, L)·e^{ikL}: the transmitted-wave value at the exit.
    fn t_exit(&self) -> Complex64 {
        2.0 * self.k / (2.0 * self.k * self.cosh_el + self.w)
    }
}

fn real_part_checked(z: Complex64, what: &str) -> f64 {
    debug_assert!(
        z.im.abs() <= 1e-10 * z.re.abs().max(1.0),
        "imaginary residue {:.3e} in {what}",
        z.im
    );
    z.re
}

/// Transmission amplitude t(k, L); the e^{-ikL} factor restores the plane-wave
/// convention t·e^{ikx} for x > L.
pub fn transmission_amplitude(k: Momentum, p: &PhysicalParams) -> Complex64 {
    let terms = BarrierTerms::new(k, p);
    terms.t_exit() * Complex64::new(0.0, -terms.k * terms.l).exp()
}

/// Transmitted-wave value at the barrier exit, t(k, L)·e^{ikL}.
pub fn transmission_exit_value(k: Momentum, p: &PhysicalParams) -> Complex64 {
    BarrierTerms::new(k, p).t_exit()
}

/// T(k, L) = |t|² = 4k² / [(ε²−k²)² L² sinhc²(εL) + 4k² cosh²(εL)].
pub fn transmission_probability(k: Momentum, p: &PhysicalParams) -> f64 {
    let terms = BarrierTerms::new(k, p);
    real_part_checked(4.0 * terms.k * terms.k / terms.d_reduced, "T(k,L)")
}

/// Reflection amplitude from continuity of ψ and ψ′ at x = 0.
pub fn reflection_amplitude(k: Momentum, p: &PhysicalParams) -> Complex64 {
    let terms = BarrierTerms::new(k, p);
    let k_b2 = terms.eps2 + terms.k * terms.k;
    -Complex64::new(0.0, 1.0) * k_b2 * terms.l * terms.sinhc_el
        / (2.0 * terms.k * terms.cosh_el + terms.w)
}

/// In-barrier scattering solution ψ_k(x) for 0 ≤ x ≤ L.
pub fn psi_inside(k: Momentum, x: f64, p: &PhysicalParams) -> Complex64 {
    assert!(
        (0.0..=p.barrier_width).contains(&x),
        "psi_inside position {x} outside [0, {}]",
        p.barrier_width
    );
    let terms = BarrierTerms::new(k, p);
    let u = x - terms.l;
    let zu = terms.eps * u;
    terms.t_exit() * (zu.cosh() + Complex64::new(0.0, terms.k * u) * sinhc(zu))
}

/// Spatial derivative of `psi_inside`.
pub fn psi_inside_deriv(k: Momentum, x: f64, p: &PhysicalParams) -> Complex64 {
    assert!((0.0..=p.barrier_width).contains(&x));
    let terms = BarrierTerms::new(k, p);
    let u = x - terms.l;
    let zu = terms.eps * u;
    // d/dx [cosh(εu) + iku sinhc(εu)] = ε² u sinhc(εu) + ik cosh(εu)
    terms.t_exit()
        * (Complex64::new(terms.eps2 * u, 0.0) * sinhc(zu)
            + Complex64::new(0.0, terms.k) * zu.cosh())
}

/// Smith dwell time τ_D(k, L) = (1/v)∫₀ᴸ|ψ_k|² dx in closed form.
pub fn dwell_time(k: Momentum, p: &PhysicalParams) -> f64 {
    let terms = BarrierTerms::new(k, p);
    let (k, l, eps2) = (terms.k, terms.l, terms.eps2);
    let k_b2 = eps2 + k * k;
    let z = terms.eps * l;
    // [2ε(ε²−k²)L + k_b² sinh(2εL)] / ε² = L·[2(ε²−k²) + 2 k_b² sinhc(2εL)],
    // with the ε² division folded in through the series when εL is small.
    let bracket = if z.norm() < SERIES_SWITCH {
        // (ε²−k²) + k_b² sinhc(2z) = ε²[2 + k_b²L²(2/3 + 2(εL)²/15)]
        let zl2 = eps2 * l * l;
        Complex64::new(2.0 + k_b2 * l * l * (2.0 / 3.0 + 2.0 * zl2 / 15.0), 0.0)
    } else {
        let s2 = sinhc(2.0 * z);
        (Complex64::new(eps2 - k * k, 0.0) + k_b2 * s2) / (terms.eps * terms.eps)
    };
    let tau = (p.mass * k / p.hbar) * 2.0 * l * bracket / terms.d_reduced;
    real_part_checked(tau, "tau_D")
}

/// Opaque-limit dwell time τ_D^∞(k) = 2mk / (ħ ε (k² + ε²)).
pub fn dwell_time_opaque(k: Momentum, p: &PhysicalParams) -> Result<f64> {
    let ch = barrier_epsilon(k, p);
    if ch.eps2 <= 0.0 {
        return Err(Error::NoTunnelingRegime {
            k0: k.value(),
            k_b: p.k_b(),
        });
    }
    let k = k.value();
    Ok(2.0 * p.mass * k / (p.hbar * ch.eps2.sqrt() * (k * k + ch.eps2)))
}

/// Exit phase φ̃_k of the transmitted wave, principal value in (−π, π].
///
/// Below the barrier top the arctan argument is bounded (tanh ≤ 1), so the
/// value already lies in (−π/2, π/2) and finite differences in k are safe.
/// Above the barrier the phase can leave that interval; use
/// [`exit_phase_sweep`] for jump-free batches.
pub fn exit_phase(k: Momentum, p: &PhysicalParams) -> f64 {
    let terms = BarrierTerms::new(k, p);
    // t·e^{ikL} = 2k / (c + i s) with c, s real in both regimes
    let c = real_part_checked(2.0 * terms.k * terms.cosh_el, "exit phase cos part");
    let s = real_part_checked(
        Complex64::new(terms.eps2 - terms.k * terms.k, 0.0) * terms.l * terms.sinhc_el,
        "exit phase sin part",
    );
    (-s).atan2(c)
}

/// Exit phase along an ascending k sweep, unwrapped so consecutive values
/// never jump by 2π.
pub fn exit_phase_sweep(ks: &[f64], p: &PhysicalParams) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ks.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &k in ks {
        let raw = exit_phase(Momentum::new(k)?, p);
        if let Some(pr) = prev {
            let mut val = raw + offset;
            while val - pr > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
                val = raw + offset;
            }
            while val - pr < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
                val = raw + offset;
            }
            out.push(val);
            prev = Some(val);
        } else {
            out.push(raw);
            prev = Some(raw);
        }
    }
    Ok(out)
}

/// Wigner phase time at the barrier exit, τ_W(k, L) = (1/v)·∂φ̃/∂k.
pub fn wigner_exit_time(k: Momentum, p: &PhysicalParams) -> f64 {
    let terms = BarrierTerms::new(k, p);
    let (k, l, eps2) = (terms.k, terms.l, terms.eps2);
    let k_b2 = eps2 + k * k;
    let z = terms.eps * l;
    // [k_b⁴ sinh(2εL) + 2εk²(ε²−k²)L] / ε² = 2L·[k_b⁴ sinhc(2εL) + k²(ε²−k²)] / ε²
    let bracket = if z.norm() < SERIES_SWITCH {
        // ε²[k_b⁴L²(2/3 + 2(εL)²/15) + 3k_b² − 2ε²]
        let zl2 = eps2 * l * l;
        Complex64::new(
            k_b2 * k_b2 * l * l * (2.0 / 3.0 + 2.0 * zl2 / 15.0) + 3.0 * k_b2 - 2.0 * eps2,
            0.0,
        )
    } else {
        (k_b2 * k_b2 * sinhc(2.0 * z) + Complex64::new(k * k * (eps2 - k * k), 0.0))
            / (terms.eps * terms.eps)
    };
    // denominator k_b⁴ sinh²(εL) + 4k²ε² = ε²·[k_b⁴ L² sinhc²(εL) + 4k²]
    let den = Complex64::new(k_b2 * k_b2 * l * l, 0.0) * terms.sinhc_el * terms.sinhc_el
        + Complex64::new(4.0 * k * k, 0.0);
    let tau = (p.mass / (p.hbar * k)) * 2.0 * l * bracket / den;
    real_part_checked(tau, "tau_W")
}

/// Hartman limit τ_W^∞(k) = 2m / (ħ k ε).
pub fn wigner_time_opaque(k: Momentum, p: &PhysicalParams) -> Result<f64> {
    let ch = barrier_epsilon(k, p);
    if ch.eps2 <= 0.0 {
        return Err(Error::NoTunnelingRegime {
            k0: k.value(),
            k_b: p.k_b(),
        });
    }
    Ok(2.0 * p.mass / (p.hbar * k.value() * ch.eps2.sqrt()))
}
