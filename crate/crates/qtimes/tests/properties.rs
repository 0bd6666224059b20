//! Property tests for the conservation laws and normalization invariants.

use proptest::prelude::*;

use qtimes::distributions::{qs_from_signal, split_toa_tod, tf_from_signal};
use qtimes::scattering::{
    barrier_epsilon, dwell_time, exit_phase, reflection_amplitude, transmission_amplitude,
    transmission_probability, wigner_exit_time, Momentum, PhysicalParams,
};
use qtimes::wavepacket::{SeriesMeta, TimeSeries};

fn params(mass: f64, v0: f64, l: f64) -> PhysicalParams {
    PhysicalParams::new(mass, 1.0, v0, l).unwrap()
}

proptest! {
    #[test]
    fn unitarity_holds_everywhere(
        k in 0.05f64..3.0,
        l in 0.0f64..25.0,
        mass in 0.2f64..2.0,
        v0 in 0.5f64..4.0,
    ) {
        let p = params(mass, v0, l);
        let mom = Momentum::new(k).unwrap();
        let r2 = reflection_amplitude(mom, &p).norm_sqr();
        let t2 = transmission_amplitude(mom, &p).norm_sqr();
        prop_assert!((r2 + t2 - 1.0).abs() < 1e-12, "r²+t²−1 = {:e}", r2 + t2 - 1.0);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&t2));
    }

    #[test]
    fn epsilon_identity_is_exact(k in 0.05f64..3.0, v0 in 0.5f64..4.0) {
        let p = params(0.5, v0, 1.0);
        let ch = barrier_epsilon(Momentum::new(k).unwrap(), &p);
        let back = ch.epsilon * ch.epsilon + k * k;
        prop_assert!((back.re - p.k_b_sq()).abs() < 1e-12 * p.k_b_sq());
        prop_assert!(back.im.abs() < 1e-12);
    }

    #[test]
    fn dwell_time_is_nonnegative_and_bounded(
        k in 0.1f64..2.8,
        l in 0.0f64..20.0,
    ) {
        let p = params(0.5, 2.0, l);
        let tau = dwell_time(Momentum::new(k).unwrap(), &p);
        prop_assert!(tau >= 0.0);
        prop_assert!(tau.is_finite());
    }

    #[test]
    fn phase_time_matches_energy_derivative(
        k in 0.2f64..2.5,
        l in 0.1f64..12.0,
    ) {
        // skip the branch-point neighborhood: differencing straddles it, and
        // the resonances just above it are narrower than the stencil
        let p = params(0.5, 2.0, l);
        prop_assume!((k - p.k_b()).abs() > 5e-2);
        let h = 1e-6 * k;
        let dphi = exit_phase(Momentum::new(k + h).unwrap(), &p)
            - exit_phase(Momentum::new(k - h).unwrap(), &p);
        // principal-value jumps across resonances invalidate the stencil
        prop_assume!(dphi.abs() < 1.0);
        let de = p.energy(k + h) - p.energy(k - h);
        let oracle = p.hbar * dphi / de;
        let exact = wigner_exit_time(Momentum::new(k).unwrap(), &p);
        prop_assert!(
            (exact - oracle).abs() <= 1e-5 * oracle.abs().max(1.0),
            "τ_W = {exact}, finite difference {oracle}"
        );
    }

    #[test]
    fn transmission_continuous_at_branch_point(l in 0.0f64..20.0) {
        let p = params(0.5, 2.0, l);
        let k_b = p.k_b();
        let below = transmission_probability(Momentum::new(k_b * (1.0 - 1e-7)).unwrap(), &p);
        let above = transmission_probability(Momentum::new(k_b * (1.0 + 1e-7)).unwrap(), &p);
        prop_assert!((below - above).abs() < 1e-5);
    }

    #[test]
    fn densities_normalize_and_split_conserves_mass(
        seed_phase in 0.0f64..std::f64::consts::TAU,
        amp in 0.1f64..0.5,
        n in 64usize..512,
    ) {
        // smooth positive signal with both rising and falling stretches
        let t: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
        let values: Vec<f64> = t
            .iter()
            .map(|&ti| 0.5 + amp * (0.9 * ti + seed_phase).sin())
            .collect();
        let series = TimeSeries {
            t,
            values,
            meta: SeriesMeta { kind: "test".into(), fields: vec![] },
        };
        let tf = tf_from_signal(&series).unwrap();
        let qs = qs_from_signal(&series).unwrap();
        prop_assert!((tf.trapezoid_mass() - 1.0).abs() < 1e-9);
        prop_assert!((qs.trapezoid_mass() - 1.0).abs() < 1e-9);
        prop_assert!(tf.density.iter().all(|d| *d >= 0.0));

        // the arrival/departure masses recombine into the flow normalization
        let (toa, tod) = split_toa_tod(&series).unwrap();
        let z_up = toa.map_or(0.0, |d| d.normalization);
        let z_down = tod.map_or(0.0, |d| d.normalization);
        prop_assert!(
            ((z_up + z_down) - tf.normalization).abs() < 1e-12 * tf.normalization,
            "Z_toa + Z_tod = {} vs Z_tf = {}",
            z_up + z_down,
            tf.normalization
        );
    }

    #[test]
    fn uniform_signal_moments(t_f in 1.0f64..50.0) {
        let n = 512;
        let t: Vec<f64> = (0..n).map(|i| t_f * i as f64 / (n - 1) as f64).collect();
        let series = TimeSeries {
            t,
            values: vec![0.25; n],
            meta: SeriesMeta { kind: "test".into(), fields: vec![] },
        };
        let qs = qs_from_signal(&series).unwrap();
        prop_assert!((qs.mean() - 0.5 * t_f).abs() < 1e-9 * t_f);
        prop_assert!((qs.spread() - t_f / 12.0f64.sqrt()).abs() < 1e-4 * t_f);
    }
}
