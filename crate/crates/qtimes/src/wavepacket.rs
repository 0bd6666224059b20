//! Gaussian wave packets over rectangular-barrier scattering states.
//!
//! A packet Ψ(x,t) = (2π)^{-1/2} ∫ dk φ(k) ψ_k(x) e^{-iE_k t/ħ} is evaluated
//! by composite Gauss–Legendre quadrature on a fixed momentum grid. The grid
//! is assembled from the panel decompositions the adaptive engine settles on
//! for a set of probe integrals: one oscillatory probe at the worst-case
//! phase gradient of the requested (x, t) context, plus the transmission,
//! dwell and norm weights (these pick up the above-barrier resonances when
//! they carry relative mass). A bisected-grid comparison at probe points then
//! certifies the grid before any signal is sampled.

use num_complex::Complex64;
use rayon::prelude::*;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::quadrature::{
    integrate_complex_with_breaks, integrate_real, integrate_real_with_breaks, AdaptiveSpec,
    CompositeGrid,
};
use crate::scattering::{
    barrier_epsilon, dwell_time, reflection_amplitude, sinhc, transmission_exit_value,
    transmission_probability, Momentum, PhysicalParams,
};

/// Gaussian momentum amplitude: center k0, width σ_k, initial position x0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpectrum {
    pub k0: f64,
    pub sigma_k: f64,
    pub x0: f64,
}

impl GaussianSpectrum {
    pub fn new(k0: f64, sigma_k: f64, x0: f64) -> Result<Self> {
        if !(k0 > 0.0 && k0.is_finite()) {
            return Err(Error::InvalidParams(format!("k0 must be > 0, got {k0}")));
        }
        if !(sigma_k > 0.0 && sigma_k.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sigma_k must be > 0, got {sigma_k}"
            )));
        }
        if !x0.is_finite() {
            return Err(Error::InvalidParams(format!("x0 must be finite, got {x0}")));
        }
        Ok(Self { k0, sigma_k, x0 })
    }

    /// φ(k) = (2πσ_k²)^{-1/4} e^{-(k-k0)²/(4σ_k²)} e^{-ik x0}.
    pub fn amplitude(&self, k: f64) -> Complex64 {
        let mag = self.magnitude(k);
        Complex64::from_polar(mag, -k * self.x0)
    }

    /// |φ(k)|.
    pub fn magnitude(&self, k: f64) -> f64 {
        let norm = (2.0 * std::f64::consts::PI * self.sigma_k * self.sigma_k).powf(-0.25);
        let d = (k - self.k0) / (2.0 * self.sigma_k);
        norm * (-d * d).exp()
    }

    /// |φ(k)|².
    pub fn weight(&self, k: f64) -> f64 {
        let m = self.magnitude(k);
        m * m
    }

    /// Position-space width σ_x = 1/(2σ_k).
    pub fn sigma_x(&self) -> f64 {
        1.0 / (2.0 * self.sigma_k)
    }

    pub fn is_narrow_band(&self) -> bool {
        self.sigma_k / self.k0 < 0.2
    }

    /// Far field: packet launched many widths away from the barrier.
    pub fn is_far_field(&self) -> bool {
        self.x0 < 0.0 && self.x0.abs() > 3.0 * self.sigma_x()
    }
}

/// Momentum-integration window and adaptive controls.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub k_min: f64,
    pub k_max: f64,
    pub rel_tol: f64,
    pub order: usize,
    pub max_panels: usize,
}

impl QuadratureSpec {
    /// Window [max(1e-6, k0 - 12σ_k), k0 + 12σ_k]; extends past k_b
    /// automatically whenever the packet carries above-barrier components.
    pub fn for_packet(spectrum: &GaussianSpectrum) -> Self {
        Self {
            k_min: (spectrum.k0 - 12.0 * spectrum.sigma_k).max(1e-6),
            k_max: spectrum.k0 + 12.0 * spectrum.sigma_k,
            rel_tol: 1e-9,
            order: 16,
            max_panels: 40_000,
        }
    }

    pub fn validate(&self, spectrum: &GaussianSpectrum) -> Result<()> {
        let lo = (spectrum.k0 - 12.0 * spectrum.sigma_k).max(1e-6);
        let hi = spectrum.k0 + 12.0 * spectrum.sigma_k;
        if self.k_min > lo || self.k_max < hi {
            return Err(Error::InvalidParams(format!(
                "quadrature window [{}, {}] does not cover k0 ± 12σ_k ∩ k>0 = [{lo}, {hi}]",
                self.k_min, self.k_max
            )));
        }
        if self.k_min <= 0.0 {
            return Err(Error::InvalidParams("window must satisfy k > 0".into()));
        }
        Ok(())
    }

    pub(crate) fn breaks(&self, params: &PhysicalParams) -> Vec<f64> {
        let k_b = params.k_b();
        if k_b > self.k_min && k_b < self.k_max {
            vec![self.k_min, k_b, self.k_max]
        } else {
            vec![self.k_min, self.k_max]
        }
    }
}

/// What a sampled signal measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalKind {
    CurrentAtExit,
    CurrentAtEntrance,
    Regional { a: f64, b: f64 },
    Cumulative { x: f64 },
    DensityAt { x: f64 },
}

impl SignalKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::CurrentAtExit => "current_at_exit",
            Self::CurrentAtEntrance => "current_at_entrance",
            Self::Regional { .. } => "regional",
            Self::Cumulative { .. } => "cumulative",
            Self::DensityAt { .. } => "density_at",
        }
    }

    /// Spatial argument recorded in the metadata.
    fn spatial_field(&self) -> String {
        match self {
            Self::CurrentAtExit => "x=L".into(),
            Self::CurrentAtEntrance => "x=0".into(),
            Self::Regional { a, b } => format!("region=[{a},{b}]"),
            Self::Cumulative { x } => format!("x={x}"),
            Self::DensityAt { x } => format!("x={x}"),
        }
    }
}

/// Header metadata attached to every sampled series.
#[derive(Debug, Clone)]
pub struct SeriesMeta {
    pub kind: String,
    pub fields: Vec<(String, String)>,
}

impl SeriesMeta {
    pub fn for_packet(
        kind: &SignalKind,
        params: &PhysicalParams,
        spectrum: &GaussianSpectrum,
    ) -> Self {
        let mut fields = vec![
            ("L".into(), fmt_f64(params.barrier_width)),
            ("k0".into(), fmt_f64(spectrum.k0)),
            ("sigma_k".into(), fmt_f64(spectrum.sigma_k)),
            ("x0".into(), fmt_f64(spectrum.x0)),
            ("m".into(), fmt_f64(params.mass)),
            ("hbar".into(), fmt_f64(params.hbar)),
            ("V0".into(), fmt_f64(params.barrier_height)),
        ];
        fields.push(("spatial".into(), kind.spatial_field()));
        let mut meta = Self {
            kind: kind.label().into(),
            fields,
        };
        let hash = meta.fnv_hash();
        meta.fields
            .push(("params_hash".into(), format!("{hash:016x}")));
        meta
    }

    fn fnv_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |s: &str| {
            for b in s.bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(&self.kind);
        for (k, v) in &self.fields {
            eat(k);
            eat(v);
        }
        h
    }

    pub fn header_line(&self) -> String {
        let mut line = format!("# kind={}", self.kind);
        for (k, v) in &self.fields {
            let _ = write!(line, ", {k}={v}");
        }
        line
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Uniformly sampled real signal with grid metadata.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    pub fn to_csv(&self) -> String {
        let mut out = self.meta.header_line();
        out.push('\n');
        out.push_str("t,value\n");
        for (t, v) in self.t.iter().zip(&self.values) {
            let _ = writeln!(out, "{t:.16e},{v:.16e}");
        }
        out
    }

    /// Index and time of the global maximum.
    pub fn peak(&self) -> (usize, f64) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best, self.t[best])
    }
}

/// Spatial/temporal extent a grid must serve; sets the worst-case phase
/// gradient of the oscillatory probe.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext {
    pub x_min: f64,
    pub x_max: f64,
    pub t_max: f64,
}

impl EvalContext {
    pub fn point(x: f64, t: f64) -> Self {
        Self {
            x_min: x,
            x_max: x,
            t_max: t.abs(),
        }
    }
}

struct KNode {
    k: f64,
    /// quadrature weight × φ(k) / sqrt(2π)
    coeff: Complex64,
    energy: f64,
    r: Complex64,
    t_exit: Complex64,
    eps: Complex64,
    eps2: f64,
}

/// Precomputed scattering superposition on a certified momentum grid.
pub struct PacketEvaluator {
    pub params: PhysicalParams,
    pub spectrum: GaussianSpectrum,
    nodes: Vec<KNode>,
}

impl PacketEvaluator {
    pub fn new(
        spectrum: &GaussianSpectrum,
        params: &PhysicalParams,
        qspec: &QuadratureSpec,
        ctx: &EvalContext,
    ) -> Result<Self> {
        qspec.validate(spectrum)?;
        let edges = Self::certified_edges(spectrum, params, qspec, ctx)?;
        Ok(Self::from_grid(
            spectrum,
            params,
            &CompositeGrid::from_edges(&edges, qspec.order),
        ))
    }

    fn from_grid(
        spectrum: &GaussianSpectrum,
        params: &PhysicalParams,
        grid: &CompositeGrid,
    ) -> Self {
        let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
        let nodes = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .map(|(&k, &w)| {
                let mom = Momentum::new(k).expect("grid nodes are positive");
                let ch = barrier_epsilon(mom, params);
                KNode {
                    k,
                    coeff: spectrum.amplitude(k) * (w * norm),
                    energy: params.energy(k),
                    r: reflection_amplitude(mom, params),
                    t_exit: transmission_exit_value(mom, params),
                    eps: ch.epsilon,
                    eps2: ch.eps2,
                }
            })
            .collect();
        Self {
            params: *params,
            spectrum: *spectrum,
            nodes,
        }
    }

    /// Worst-case |dθ/dk| over the context, with margin for the scattering
    /// phase derivatives.
    fn phase_gradient_bound(
        spectrum: &GaussianSpectrum,
        params: &PhysicalParams,
        qspec: &QuadratureSpec,
        ctx: &EvalContext,
    ) -> f64 {
        let x0 = spectrum.x0.abs();
        let x_span = ctx.x_min.abs().max(ctx.x_max.abs());
        let v_max = params.velocity(qspec.k_max);
        x_span + x0 + v_max * ctx.t_max + 2.0 * params.barrier_width + 150.0
    }

    fn certified_edges(
        spectrum: &GaussianSpectrum,
        params: &PhysicalParams,
        qspec: &QuadratureSpec,
        ctx: &EvalContext,
    ) -> Result<Vec<f64>> {
        let breaks = qspec.breaks(params);
        let weight_spec = AdaptiveSpec {
            rel_tol: qspec.rel_tol.min(1e-9),
            abs_tol: 1e-300,
            max_panels: qspec.max_panels,
            order: 15,
        };
        let t_of = |k: f64| transmission_probability(Momentum::new(k).unwrap(), params);
        let tau_of = |k: f64| dwell_time(Momentum::new(k).unwrap(), params);

        // amplitude scale for the oscillatory probe's absolute budget
        let amp = integrate_real_with_breaks(
            |k| spectrum.magnitude(k) * t_of(k).sqrt(),
            &breaks,
            &weight_spec,
            "transmitted amplitude scale",
        )?;
        let g = Self::phase_gradient_bound(spectrum, params, qspec, ctx);
        let k0 = spectrum.k0;
        let osc = integrate_complex_with_breaks(
            |k| {
                Complex64::from_polar(
                    spectrum.magnitude(k) * t_of(k).sqrt().max(1e-30),
                    g * (k - k0),
                )
            },
            &breaks,
            &AdaptiveSpec {
                rel_tol: 0.0,
                abs_tol: 1e-8 * amp.value.re.max(1e-300),
                max_panels: qspec.max_panels,
                order: 15,
            },
            "oscillatory probe",
        )?;
        let trans = integrate_real_with_breaks(
            |k| spectrum.weight(k) * t_of(k),
            &breaks,
            &weight_spec,
            "transmission weight probe",
        )?;
        let dwell = integrate_real_with_breaks(
            |k| spectrum.weight(k) * tau_of(k),
            &breaks,
            &weight_spec,
            "dwell weight probe",
        )?;
        let norm = integrate_real_with_breaks(
            |k| spectrum.weight(k),
            &breaks,
            &weight_spec,
            "norm probe",
        )?;

        let mut edges: Vec<f64> = Vec::new();
        for set in [&osc.edges, &trans.edges, &dwell.edges, &norm.edges] {
            edges.extend_from_slice(set);
        }
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        Self::certify(spectrum, params, qspec, ctx, edges)
    }

    /// Bisected-grid comparison at probe points; refines globally until the
    /// two agree or the panel budget runs out.
    fn certify(
        spectrum: &GaussianSpectrum,
        params: &PhysicalParams,
        qspec: &QuadratureSpec,
        ctx: &EvalContext,
        mut edges: Vec<f64>,
    ) -> Result<Vec<f64>> {
        let amp_scale = (2.0 * std::f64::consts::PI * spectrum.sigma_x().powi(2)).powf(-0.25);
        let probes: Vec<(f64, f64)> = [
            (ctx.x_min, ctx.t_max),
            (ctx.x_max, ctx.t_max),
            (0.0, 0.5 * ctx.t_max),
            (ctx.x_max, 0.5 * ctx.t_max),
            (0.5 * (ctx.x_min + ctx.x_max), ctx.t_max),
        ]
        .into_iter()
        .collect();
        for round in 0..3 {
            let coarse = Self::from_grid(
                spectrum,
                params,
                &CompositeGrid::from_edges(&edges, qspec.order),
            );
            let fine_grid =
                CompositeGrid::from_edges(&crate::quadrature::bisect_edges(&edges), qspec.order);
            let fine = Self::from_grid(spectrum, params, &fine_grid);
            let mut worst = 0.0f64;
            for &(x, t) in &probes {
                let a = coarse.psi(x, t);
                let b = fine.psi(x, t);
                let budget = qspec.rel_tol * b.norm().max(1e-3 * amp_scale);
                let miss = (a - b).norm() / budget;
                worst = worst.max(miss);
            }
            if worst <= 1.0 {
                return Ok(edges);
            }
            if round == 2 || edges.len() * 2 > qspec.max_panels {
                return Err(Error::QuadratureNonConvergence {
                    context: format!(
                        "momentum-grid certification over x∈[{}, {}], t≤{}",
                        ctx.x_min, ctx.x_max, ctx.t_max
                    ),
                    achieved: worst * qspec.rel_tol,
                    required: qspec.rel_tol,
                });
            }
            edges = crate::quadrature::bisect_edges(&edges);
        }
        unreachable!()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// ψ_k(x) and ∂ₓψ_k(x) for one node, region-dispatched.
    fn mode_at(&self, node: &KNode, x: f64) -> (Complex64, Complex64) {
        let l = self.params.barrier_width;
        let ik = Complex64::new(0.0, node.k);
        if x < 0.0 {
            let inc = (ik * x).exp();
            let refl = node.r * (-ik * x).exp();
            (inc + refl, ik * (inc - refl))
        } else if x > l {
            let tr = node.t_exit * (ik * (x - l)).exp();
            (tr, ik * tr)
        } else {
            let u = x - l;
            let zu = node.eps * u;
            let ch = zu.cosh();
            let sc = sinhc(zu);
            let value = node.t_exit * (ch + Complex64::new(0.0, node.k * u) * sc);
            let deriv = node.t_exit * (Complex64::new(node.eps2 * u, 0.0) * sc + ik * ch);
            (value, deriv)
        }
    }

    pub fn psi(&self, x: f64, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for node in &self.nodes {
            let (v, _) = self.mode_at(node, x);
            acc += node.coeff * v * Complex64::from_polar(1.0, -node.energy * t / self.params.hbar);
        }
        acc
    }

    pub fn psi_and_deriv(&self, x: f64, t: f64) -> (Complex64, Complex64) {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut dacc = Complex64::new(0.0, 0.0);
        for node in &self.nodes {
            let (v, d) = self.mode_at(node, x);
            let ph = Complex64::from_polar(1.0, -node.energy * t / self.params.hbar);
            acc += node.coeff * v * ph;
            dacc += node.coeff * d * ph;
        }
        (acc, dacc)
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        self.psi(x, t).norm_sqr()
    }

    /// j(x,t) = (ħ/m)·Im[Ψ* ∂ₓΨ], with the analytic mode derivative.
    pub fn current(&self, x: f64, t: f64) -> f64 {
        let (psi, dpsi) = self.psi_and_deriv(x, t);
        self.params.hbar / self.params.mass * (psi.conj() * dpsi).im
    }

    /// Batched current series at fixed x (shared mode coefficients).
    pub fn current_series(&self, x: f64, ts: &[f64]) -> Vec<f64> {
        let modes: Vec<(Complex64, Complex64, f64)> = self
            .nodes
            .iter()
            .map(|n| {
                let (v, d) = self.mode_at(n, x);
                (n.coeff * v, n.coeff * d, n.energy / self.params.hbar)
            })
            .collect();
        ts.par_iter()
            .map(|&t| {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut dacc = Complex64::new(0.0, 0.0);
                for (c, d, w) in &modes {
                    let ph = Complex64::from_polar(1.0, -w * t);
                    acc += c * ph;
                    dacc += d * ph;
                }
                self.params.hbar / self.params.mass * (acc.conj() * dacc).im
            })
            .collect()
    }

    pub fn density_series(&self, x: f64, ts: &[f64]) -> Vec<f64> {
        let modes: Vec<(Complex64, f64)> = self
            .nodes
            .iter()
            .map(|n| {
                let (v, _) = self.mode_at(n, x);
                (n.coeff * v, n.energy / self.params.hbar)
            })
            .collect();
        ts.par_iter()
            .map(|&t| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (c, w) in &modes {
                    acc += c * Complex64::from_polar(1.0, -w * t);
                }
                acc.norm_sqr()
            })
            .collect()
    }

    /// Occupation series p over [a, b] by composite-GL spatial quadrature with
    /// the mode matrix shared across the whole time grid.
    pub fn regional_series(&self, a: f64, b: f64, ts: &[f64]) -> Vec<f64> {
        assert!(a < b, "regional occupation needs a < b");
        let xgrid = Self::spatial_grid(a, b);
        let nx = xgrid.len();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.nodes.len() * nx];
        for (j, node) in self.nodes.iter().enumerate() {
            for (i, &x) in xgrid.nodes.iter().enumerate() {
                let (v, _) = self.mode_at(node, x);
                coeffs[j * nx + i] = node.coeff * v;
            }
        }
        let freqs: Vec<f64> = self
            .nodes
            .iter()
            .map(|n| n.energy / self.params.hbar)
            .collect();
        ts.par_iter()
            .map(|&t| {
                let mut field = vec![Complex64::new(0.0, 0.0); nx];
                for (j, w) in freqs.iter().enumerate() {
                    let ph = Complex64::from_polar(1.0, -w * t);
                    let row = &coeffs[j * nx..(j + 1) * nx];
                    for (f, c) in field.iter_mut().zip(row) {
                        *f += c * ph;
                    }
                }
                field
                    .iter()
                    .zip(&xgrid.weights)
                    .map(|(f, w)| w * f.norm_sqr())
                    .sum()
            })
            .collect()
    }

    /// Single-time occupation of [a, b] by adaptive spatial quadrature.
    pub fn regional_occupation(&self, a: f64, b: f64, t: f64) -> Result<f64> {
        assert!(a < b, "regional occupation needs a < b");
        let est = integrate_real(
            |x| self.density(x, t),
            a,
            b,
            &AdaptiveSpec {
                rel_tol: 1e-9,
                abs_tol: 1e-13,
                max_panels: 6000,
                order: 15,
            },
            "regional occupation",
        )?;
        Ok(est.value.re)
    }

    /// Leftmost coordinate any packet component can have reached by time t.
    pub fn support_floor(&self, t: f64) -> f64 {
        support_floor(&self.spectrum, &self.params, t)
    }

    /// Rightmost coordinate reachable by time t.
    pub fn support_ceil(&self, t: f64) -> f64 {
        support_ceil(&self.spectrum, &self.params, t)
    }

    /// Cumulative F(x,t) = ∫ₓ^∞ ρ dx via the complement 1 − ∫_{-∞}^x ρ.
    pub fn cumulative(&self, x: f64, t: f64) -> Result<f64> {
        let floor = self.support_floor(t);
        if x <= floor {
            return Ok(1.0);
        }
        Ok(1.0 - self.regional_occupation(floor, x, t)?)
    }

    fn spatial_grid(a: f64, b: f64) -> CompositeGrid {
        let panels = ((b - a) / 1.0).ceil().max(1.0) as usize;
        CompositeGrid::uniform(a, b, panels, 16)
    }
}

fn dispersed_width(spectrum: &GaussianSpectrum, params: &PhysicalParams, t: f64) -> f64 {
    let s = spectrum.sigma_x();
    let rate = params.hbar * t.abs() / (2.0 * params.mass * s * s);
    s * (1.0 + rate * rate).sqrt()
}

/// Leftmost coordinate any packet component (incident or reflected) can
/// have reached by time t.
pub fn support_floor(spectrum: &GaussianSpectrum, params: &PhysicalParams, t: f64) -> f64 {
    let sigma_t = dispersed_width(spectrum, params, t);
    let v_max = params.velocity(spectrum.k0 + 12.0 * spectrum.sigma_k);
    (spectrum.x0 - 8.0 * sigma_t).min(spectrum.x0 - v_max * t) - 10.0
}

/// Rightmost coordinate reachable by time t.
pub fn support_ceil(spectrum: &GaussianSpectrum, params: &PhysicalParams, t: f64) -> f64 {
    let sigma_t = dispersed_width(spectrum, params, t);
    let v_max = params.velocity(spectrum.k0 + 12.0 * spectrum.sigma_k);
    spectrum.x0 + v_max * t + 8.0 * sigma_t + params.barrier_width + 10.0
}

fn uniform_window(window: (f64, f64), n: usize) -> Result<Vec<f64>> {
    let (t_i, t_f) = window;
    if t_i.is_nan() || t_f.is_nan() || t_i >= t_f {
        return Err(Error::InvalidParams(format!(
            "time window must satisfy t_i < t_f, got [{t_i}, {t_f}]"
        )));
    }
    if n < 16 {
        return Err(Error::InvalidParams(format!(
            "signal needs at least 16 samples, got {n}"
        )));
    }
    Ok((0..n)
        .map(|i| t_i + (t_f - t_i) * i as f64 / (n - 1) as f64)
        .collect())
}

/// Ψ(x, t) with an adaptive error estimate.
pub fn psi_at(
    x: f64,
    t: f64,
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<Complex64> {
    qspec.validate(spectrum)?;
    let ev = PacketEvaluator::new(spectrum, params, qspec, &EvalContext::point(x, t))?;
    Ok(ev.psi(x, t))
}

/// j(x, t) from the analytic spatial derivative inside the quadrature.
pub fn current_at(
    x: f64,
    t: f64,
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<f64> {
    qspec.validate(spectrum)?;
    let ev = PacketEvaluator::new(spectrum, params, qspec, &EvalContext::point(x, t))?;
    Ok(ev.current(x, t))
}

/// Occupation of [a, b] at time t.
pub fn regional_occupation(
    a: f64,
    b: f64,
    t: f64,
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<f64> {
    let ctx = EvalContext {
        x_min: a,
        x_max: b,
        t_max: t.abs(),
    };
    let ev = PacketEvaluator::new(spectrum, params, qspec, &ctx)?;
    ev.regional_occupation(a, b, t)
}

/// F(x0, t) = 1 − ∫_{-∞}^{x0} ρ dx.
pub fn cumulative_f(
    x0: f64,
    t: f64,
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<f64> {
    let ctx = EvalContext {
        x_min: x0.min(support_floor(spectrum, params, t)),
        x_max: x0.max(params.barrier_width),
        t_max: t.abs(),
    };
    let ev = PacketEvaluator::new(spectrum, params, qspec, &ctx)?;
    ev.cumulative(x0, t)
}

/// Uniformly sampled signal of the requested kind over the window.
pub fn sample_signal(
    kind: SignalKind,
    window: (f64, f64),
    n: usize,
    spectrum: &GaussianSpectrum,
    params: &PhysicalParams,
    qspec: &QuadratureSpec,
) -> Result<TimeSeries> {
    let ts = uniform_window(window, n)?;
    let l = params.barrier_width;
    let (x_min, x_max) = match kind {
        SignalKind::CurrentAtExit => (l, l),
        SignalKind::CurrentAtEntrance => (0.0, 0.0),
        SignalKind::Regional { a, b } => {
            if a.is_nan() || b.is_nan() || a >= b {
                return Err(Error::InvalidParams(format!(
                    "regional signal needs a < b, got [{a}, {b}]"
                )));
            }
            (a, b)
        }
        SignalKind::Cumulative { x } => (
            x.min(support_floor(
                spectrum,
                params,
                window.1.abs().max(window.0.abs()),
            )),
            x.max(l),
        ),
        SignalKind::DensityAt { x } => (x, x),
    };
    let ctx = EvalContext {
        x_min,
        x_max,
        t_max: window.1.abs().max(window.0.abs()),
    };
    let ev = PacketEvaluator::new(spectrum, params, qspec, &ctx)?;
    let values = match kind {
        SignalKind::CurrentAtExit => ev.current_series(l, &ts),
        SignalKind::CurrentAtEntrance => ev.current_series(0.0, &ts),
        SignalKind::Regional { a, b } => ev.regional_series(a, b, &ts),
        SignalKind::DensityAt { x } => ev.density_series(x, &ts),
        SignalKind::Cumulative { x } => {
            let mut out = Vec::with_capacity(ts.len());
            for (i, &t) in ts.iter().enumerate() {
                out.push(ev.cumulative(x, t).map_err(|e| match e {
                    Error::QuadratureNonConvergence {
                        context,
                        achieved,
                        required,
                    } => Error::QuadratureNonConvergence {
                        context: format!("{context} at t={t} (sample {i})"),
                        achieved,
                        required,
                    },
                    other => other,
                })?);
            }
            out
        }
    };
    Ok(TimeSeries {
        t: ts,
        values,
        meta: SeriesMeta::for_packet(&kind, params, spectrum),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn setup(l: f64) -> (GaussianSpectrum, PhysicalParams, QuadratureSpec) {
        let spectrum = GaussianSpectrum::new(1.0, 0.05, -50.0).unwrap();
        let params = PhysicalParams::new(0.5, 1.0, 2.0, l).unwrap();
        let qspec = QuadratureSpec::for_packet(&spectrum);
        (spectrum, params, qspec)
    }

    #[test]
    fn spectrum_norm_under_module_quadrature() {
        let (spectrum, params, qspec) = setup(5.0);
        let ev = PacketEvaluator::new(
            &spectrum,
            &params,
            &qspec,
            &EvalContext {
                x_min: -60.0,
                x_max: 10.0,
                t_max: 1.0,
            },
        )
        .unwrap();
        // Σ w |φ|² over the grid: reconstruct weights from coeff / φ
        let norm: f64 = ev
            .nodes
            .iter()
            .map(|n| {
                let mag = spectrum.magnitude(n.k);
                let w = n.coeff.norm() * (2.0 * std::f64::consts::PI).sqrt() / mag;
                w * mag * mag
            })
            .sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn initial_gaussian_at_center_and_far_field() {
        let (spectrum, params, qspec) = setup(5.0);
        // |Ψ(x0, 0)|² = (2π σ_x²)^{-1/2}
        let v = psi_at(-50.0, 0.0, &spectrum, &params, &qspec).unwrap();
        let expected = (2.0 * std::f64::consts::PI * 100.0).powf(-0.5);
        assert_relative_eq!(v.norm_sqr(), expected, max_relative = 1e-8);
        // beyond the barrier nothing has arrived yet
        let far = psi_at(10.0, 0.0, &spectrum, &params, &qspec).unwrap();
        assert!(far.norm_sqr() < 1e-12);
    }

    #[test]
    fn norm_is_conserved() {
        let (spectrum, params, qspec) = setup(5.0);
        for t in [0.0, 25.0] {
            let ctx = EvalContext {
                x_min: -200.0,
                x_max: 150.0,
                t_max: 25.0,
            };
            let ev = PacketEvaluator::new(&spectrum, &params, &qspec, &ctx).unwrap();
            let total = ev
                .regional_occupation(ev.support_floor(t), ev.support_ceil(t), t)
                .unwrap();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn region_sum_is_one() {
        let (spectrum, params, qspec) = setup(5.0);
        let t = 25.0;
        let ctx = EvalContext {
            x_min: -200.0,
            x_max: 150.0,
            t_max: t,
        };
        let ev = PacketEvaluator::new(&spectrum, &params, &qspec, &ctx).unwrap();
        let left = ev.regional_occupation(ev.support_floor(t), 0.0, t).unwrap();
        let barrier = ev.regional_occupation(0.0, 5.0, t).unwrap();
        let right = ev.regional_occupation(5.0, ev.support_ceil(t), t).unwrap();
        assert_abs_diff_eq!(left + barrier + right, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn initial_exit_current_is_dark() {
        // the 5σ_x evanescent dressing leaves a ~1e-11 physical residue
        let (spectrum, params, qspec) = setup(5.0);
        let j = current_at(5.0, 0.0, &spectrum, &params, &qspec).unwrap();
        assert!(j.abs() < 1e-10, "initial exit current {j}");
    }

    #[test]
    fn initial_regional_occupation_is_dark() {
        // the packet sits 5σ_x from the entrance: the in-barrier tail mass
        // is O(e^{-12.5}·σ_x-weighted) ≈ 1e-7, far below any signal scale
        let (spectrum, params, qspec) = setup(5.0);
        let p = regional_occupation(0.0, 5.0, 0.0, &spectrum, &params, &qspec).unwrap();
        assert!(p < 5e-7, "initial in-barrier occupation {p}");
        assert!(p >= 0.0);
    }

    #[test]
    fn continuity_equation() {
        // d/dt p_[0,L] = j(0,t) − j(L,t)
        let (spectrum, params, qspec) = setup(5.0);
        let t = 25.0;
        let ctx = EvalContext {
            x_min: 0.0,
            x_max: 5.0,
            t_max: t + 1.0,
        };
        let ev = PacketEvaluator::new(&spectrum, &params, &qspec, &ctx).unwrap();
        let h = 1e-3;
        let dp = (ev.regional_occupation(0.0, 5.0, t + h).unwrap()
            - ev.regional_occupation(0.0, 5.0, t - h).unwrap())
            / (2.0 * h);
        let flux = ev.current(0.0, t) - ev.current(5.0, t);
        assert_abs_diff_eq!(dp, flux, epsilon = 1e-4);
    }

    #[test]
    fn parseval_at_t0() {
        let (spectrum, params, qspec) = setup(2.0);
        let ctx = EvalContext {
            x_min: -150.0,
            x_max: 60.0,
            t_max: 1.0,
        };
        let ev = PacketEvaluator::new(&spectrum, &params, &qspec, &ctx).unwrap();
        let x_norm = ev
            .regional_occupation(ev.support_floor(0.0), ev.support_ceil(0.0), 0.0)
            .unwrap();
        assert_abs_diff_eq!(x_norm, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn region_matching_is_seamless() {
        let (spectrum, params, qspec) = setup(5.0);
        let ctx = EvalContext {
            x_min: -1.0,
            x_max: 6.0,
            t_max: 27.0,
        };
        let ev = PacketEvaluator::new(&spectrum, &params, &qspec, &ctx).unwrap();
        let eps = 1e-9;
        for t in [13.7, 25.0, 26.3] {
            for edge in [0.0, 5.0] {
                let (vl, dl) = ev.psi_and_deriv(edge - eps, t);
                let (vr, dr) = ev.psi_and_deriv(edge + eps, t);
                assert!((vl - vr).norm() < 1e-8, "value jump at x={edge}");
                assert!((dl - dr).norm() < 1e-8, "derivative jump at x={edge}");
            }
        }
    }

    #[test]
    fn cumulative_examples() {
        let (spectrum, params, qspec) = setup(2.0);
        // far-left proxy: everything is to the right
        let f = cumulative_f(-500.0, 0.0, &spectrum, &params, &qspec).unwrap();
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-8);
        // mass past the entrance at t = 0 is the 5σ Gaussian tail,
        // Φ(-5) ≈ 2.9e-7, plus scattering-dressing corrections
        let f0 = cumulative_f(0.0, 0.0, &spectrum, &params, &qspec).unwrap();
        assert!(f0 < 6e-7, "initial upstream mass {f0}");
        assert!(f0 > 0.0);
    }

    #[test]
    fn cumulative_rate_equals_current() {
        // ∂ₜF(L, t) = j(L, t) at L = 2, t = 30
        let (spectrum, params, qspec) = setup(2.0);
        let ctx = EvalContext {
            x_min: -200.0,
            x_max: 2.0,
            t_max: 31.0,
        };
        let ev = PacketEvaluator::new(&spectrum, &params, &qspec, &ctx).unwrap();
        let h = 1e-3;
        let df = (ev.cumulative(2.0, 30.0 + h).unwrap() - ev.cumulative(2.0, 30.0 - h).unwrap())
            / (2.0 * h);
        let j = ev.current(2.0, 30.0);
        assert_relative_eq!(df, j, max_relative = 1e-4);
    }

    #[test]
    fn entrance_current_peaks_then_reverses() {
        let (spectrum, params, qspec) = setup(5.0);
        let s = sample_signal(
            SignalKind::CurrentAtEntrance,
            (0.0, 45.0),
            600,
            &spectrum,
            &params,
            &qspec,
        )
        .unwrap();
        let (ipk, tpk) = s.peak();
        assert!(s.values[ipk] > 0.0);
        assert!((15.0..30.0).contains(&tpk), "main peak at {tpk}");
        let sign_change = s.values[ipk..].iter().any(|v| *v < 0.0);
        assert!(sign_change, "no reflection sign change after the peak");
    }

    #[test]
    fn regional_signal_peaks_near_saturation_time() {
        let (spectrum, params, qspec) = setup(5.0);
        let s = sample_signal(
            SignalKind::Regional { a: 0.0, b: 5.0 },
            (0.0, 60.0),
            600,
            &spectrum,
            &params,
            &qspec,
        )
        .unwrap();
        let (_, tpk) = s.peak();
        // −x0/v0 + τ_W^∞ = 26 up to narrow-band corrections
        assert!((tpk - 26.0).abs() < 1.5, "occupation peak at {tpk}");
    }

    #[test]
    fn exit_current_near_free_for_thin_barrier() {
        let (spectrum, params, qspec) = setup(0.5);
        let s = sample_signal(
            SignalKind::CurrentAtExit,
            (0.0, 60.0),
            600,
            &spectrum,
            &params,
            &qspec,
        )
        .unwrap();
        let (_, tpk) = s.peak();
        assert!((tpk - 25.0).abs() < 1.5, "exit peak at {tpk}");
    }

    #[test]
    fn stationary_single_k_limit() {
        // collapse the window: j/ρ → v(k0) for the transmitted wave
        let spectrum = GaussianSpectrum::new(1.0, 0.05, -50.0).unwrap();
        let params = PhysicalParams::new(0.5, 1.0, 2.0, 2.0).unwrap();
        let narrow = QuadratureSpec {
            k_min: 1.0 - 1e-6,
            k_max: 1.0 + 1e-6,
            rel_tol: 1e-9,
            order: 16,
            max_panels: 4000,
        };
        let ev = PacketEvaluator::from_grid(
            &spectrum,
            &params,
            &CompositeGrid::from_edges(&[narrow.k_min, narrow.k_max], narrow.order),
        );
        let j = ev.current(2.0, 25.0);
        let rho = ev.density(2.0, 25.0);
        assert_relative_eq!(j / rho, params.velocity(1.0), max_relative = 0.01);
    }

    #[test]
    fn starved_panel_budget_is_reported() {
        let (spectrum, params, _) = setup(5.0);
        let starved = QuadratureSpec {
            max_panels: 4,
            ..QuadratureSpec::for_packet(&spectrum)
        };
        let err = PacketEvaluator::new(
            &spectrum,
            &params,
            &starved,
            &EvalContext {
                x_min: -60.0,
                x_max: 10.0,
                t_max: 40.0,
            },
        );
        assert!(matches!(err, Err(Error::QuadratureNonConvergence { .. })));
    }

    #[test]
    fn cumulative_and_density_signals() {
        let (spectrum, params, qspec) = setup(2.0);
        let f = sample_signal(
            SignalKind::Cumulative { x: 2.0 },
            (0.0, 40.0),
            17,
            &spectrum,
            &params,
            &qspec,
        )
        .unwrap();
        // transmitted mass accumulates across the window
        assert!(f.values.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)));
        assert!(f.values[16] > f.values[0]);

        let rho = sample_signal(
            SignalKind::DensityAt { x: 0.0 },
            (0.0, 40.0),
            32,
            &spectrum,
            &params,
            &qspec,
        )
        .unwrap();
        assert!(rho.values.iter().all(|v| *v >= 0.0));
        let (_, tpk) = rho.peak();
        assert!((15.0..35.0).contains(&tpk), "entrance density peak at {tpk}");
    }

    #[test]
    fn sample_count_contract() {
        let (spectrum, params, qspec) = setup(5.0);
        assert!(sample_signal(
            SignalKind::DensityAt { x: 0.0 },
            (0.0, 10.0),
            15,
            &spectrum,
            &params,
            &qspec
        )
        .is_err());
        assert!(sample_signal(
            SignalKind::DensityAt { x: 0.0 },
            (0.0, 10.0),
            16,
            &spectrum,
            &params,
            &qspec
        )
        .is_ok());
    }

    #[test]
    fn series_metadata_is_complete() {
        let (spectrum, params, qspec) = setup(5.0);
        let s = sample_signal(
            SignalKind::Regional { a: 0.0, b: 5.0 },
            (0.0, 50.0),
            32,
            &spectrum,
            &params,
            &qspec,
        )
        .unwrap();
        let header = s.meta.header_line();
        for needle in [
            "kind=regional",
            "L=5",
            "k0=1",
            "sigma_k=0.05",
            "x0=-50",
            "m=0.5",
            "hbar=1",
            "V0=2",
            "params_hash=",
        ] {
            assert!(header.contains(needle), "missing {needle} in {header}");
        }
        let csv = s.to_csv();
        assert!(csv.lines().nth(1).unwrap() == "t,value");
    }
}
