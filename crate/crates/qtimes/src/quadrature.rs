//! Panel-adaptive Gauss–Legendre quadrature for real and complex integrands.
//!
//! Error control compares each panel at order `n` against order `2n` and
//! bisects the worst panel until the summed discrepancy meets the tolerance.
//! Refinement order is deterministic (worst panel first, ties broken by
//! panel age), so repeated runs produce bit-identical results.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights by Newton iteration on P_n.
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "Gauss-Legendre order must be at least 2");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_pair(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
            let (_, d) = legendre_pair(n, 0.0);
            weights[n / 2] = 2.0 / (d * d);
        }
        Self { nodes, weights }
    }

    pub fn integrate_complex<F: FnMut(f64) -> Complex64>(
        &self,
        a: f64,
        b: f64,
        f: &mut F,
    ) -> Complex64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// (P_n(x), P_n'(x)) by the three-term recurrence and the derivative
/// identity (1−x²)P_n' = n(P_{n−1} − x·P_n).
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (p0 - x * p1) / (1.0 - x * x);
    (p1, d)
}

/// Controls for the adaptive scheme.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// low order per panel; the error estimate uses order 2n
    pub order: usize,
}

impl Default for AdaptiveSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_panels: 4000,
            order: 15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadEstimate {
    pub value: Complex64,
    pub abs_error: f64,
    pub panels: usize,
    pub evals: usize,
    /// final panel edges, ascending; reusable as a fixed grid
    pub edges: Vec<f64>,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
    age: usize,
}

/// Adaptive integral of a complex integrand with caller-supplied initial
/// break points (`breaks` must be strictly ascending and span the domain).
pub fn integrate_complex_with_breaks<F: FnMut(f64) -> Complex64>(
    mut f: F,
    breaks: &[f64],
    spec: &AdaptiveSpec,
    context: &str,
) -> Result<QuadEstimate> {
    assert!(breaks.len() >= 2, "need at least two break points");
    let low = GaussLegendre::new(spec.order);
    let high = GaussLegendre::new(2 * spec.order);
    let mut evals = 0usize;
    let mut age = 0usize;
    let eval_panel = |a: f64, b: f64, f: &mut F, evals: &mut usize, age: &mut usize| -> Panel {
        let v_low = low.integrate_complex(a, b, f);
        let v_high = high.integrate_complex(a, b, f);
        *evals += 3 * spec.order;
        *age += 1;
        Panel {
            a,
            b,
            value: v_high,
            error: (v_high - v_low).norm(),
            age: *age,
        }
    };

    let mut panels: Vec<Panel> = Vec::with_capacity(breaks.len() * 2);
    for w in breaks.windows(2) {
        panels.push(eval_panel(w[0], w[1], &mut f, &mut evals, &mut age));
    }

    loop {
        let total: Complex64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let budget = spec.abs_tol.max(spec.rel_tol * total.norm());
        if err <= budget {
            let mut edges: Vec<f64> = panels.iter().map(|p| p.a).collect();
            edges.push(breaks[breaks.len() - 1]);
            edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return Ok(QuadEstimate {
                value: total,
                abs_error: err,
                panels: panels.len(),
                evals,
                edges,
            });
        }
        if panels.len() >= spec.max_panels {
            return Err(Error::QuadratureNonConvergence {
                context: context.to_string(),
                achieved: err,
                required: budget,
            });
        }
        // worst panel first; age breaks ties deterministically
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|(_, p), (_, q)| {
                p.error
                    .partial_cmp(&q.error)
                    .unwrap()
                    .then(q.age.cmp(&p.age))
            })
            .map(|(i, _)| i)
            .unwrap();
        let Panel { a, b, .. } = panels[worst];
        let mid = 0.5 * (a + b);
        panels[worst] = eval_panel(a, mid, &mut f, &mut evals, &mut age);
        panels.push(eval_panel(mid, b, &mut f, &mut evals, &mut age));
    }
}

pub fn integrate_complex<F: FnMut(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    spec: &AdaptiveSpec,
    context: &str,
) -> Result<QuadEstimate> {
    integrate_complex_with_breaks(f, &[a, b], spec, context)
}

pub fn integrate_real_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    spec: &AdaptiveSpec,
    context: &str,
) -> Result<QuadEstimate> {
    integrate_complex_with_breaks(|x| Complex64::new(f(x), 0.0), breaks, spec, context)
}

pub fn integrate_real<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &AdaptiveSpec,
    context: &str,
) -> Result<QuadEstimate> {
    integrate_real_with_breaks(f, &[a, b], spec, context)
}

/// Fixed composite Gauss–Legendre grid assembled from panel edges.
#[derive(Debug, Clone)]
pub struct CompositeGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeGrid {
    pub fn from_edges(edges: &[f64], order: usize) -> Self {
        let rule = GaussLegendre::new(order);
        let mut nodes = Vec::with_capacity((edges.len() - 1) * order);
        let mut weights = Vec::with_capacity((edges.len() - 1) * order);
        for w in edges.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            let mid = 0.5 * (w[0] + w[1]);
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(mid + half * x);
                weights.push(wt * half);
            }
        }
        Self { nodes, weights }
    }

    /// Uniform panels over [a, b].
    pub fn uniform(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let edges: Vec<f64> = (0..=panels)
            .map(|i| a + (b - a) * i as f64 / panels as f64)
            .collect();
        Self::from_edges(&edges, order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Every panel bisected; used for refinement checks.
pub fn bisect_edges(edges: &[f64]) -> Vec<f64> {
    let mut fine = Vec::with_capacity(edges.len() * 2);
    for w in edges.windows(2) {
        fine.push(w[0]);
        fine.push(0.5 * (w[0] + w[1]));
    }
    fine.push(edges[edges.len() - 1]);
    fine
}

/// Trapezoidal rule on an arbitrary ascending grid.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    assert_eq!(t.len(), y.len());
    let mut acc = 0.0;
    for i in 1..t.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_polynomial_exactness() {
        // order n integrates degree 2n-1 exactly
        let gl = GaussLegendre::new(5);
        let mut f = |x: f64| Complex64::new(x.powi(9) + 3.0 * x.powi(4) + 1.0, 0.0);
        let v = gl.integrate_complex(-1.0, 1.0, &mut f);
        assert_relative_eq!(v.re, 6.0 / 5.0 + 2.0, epsilon = 1e-14);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_interval() {
        for n in [2, 7, 15, 16, 30, 31] {
            let gl = GaussLegendre::new(n);
            let s: f64 = gl.weights.iter().sum();
            assert_relative_eq!(s, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn adaptive_handles_oscillatory_integrand() {
        // integral of cos(w x) over [0, 1] = sin(w)/w
        let w = 200.0;
        let est = integrate_real(
            |x| (w * x).cos(),
            0.0,
            1.0,
            &AdaptiveSpec {
                rel_tol: 1e-12,
                abs_tol: 1e-15,
                ..Default::default()
            },
            "oscillatory test",
        )
        .unwrap();
        assert_relative_eq!(est.value.re, w.sin() / w, epsilon = 1e-11);
    }

    #[test]
    fn adaptive_resolves_narrow_spike() {
        // Lorentzian of half-width 1e-6 buried in [0, 1]
        let g = 1e-6;
        let est = integrate_real(
            |x| g / ((x - 0.3).powi(2) + g * g),
            0.0,
            1.0,
            &AdaptiveSpec {
                rel_tol: 1e-9,
                max_panels: 20000,
                ..Default::default()
            },
            "spike test",
        )
        .unwrap();
        let exact = ((1.0 - 0.3) / g).atan() + (0.3 / g).atan();
        assert_relative_eq!(est.value.re, exact, max_relative = 1e-8);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let err = integrate_real(
            |x| {
                if x < 0.5 {
                    0.0
                } else {
                    1e30 * (x - 0.5).sqrt().recip()
                }
            },
            0.0,
            1.0,
            &AdaptiveSpec {
                rel_tol: 1e-14,
                max_panels: 8,
                ..Default::default()
            },
            "divergent test",
        );
        assert!(matches!(err, Err(Error::QuadratureNonConvergence { .. })));
    }

    #[test]
    fn determinism_bit_identical() {
        let run = || {
            integrate_real(
                |x| (50.0 * x).sin() * (-x).exp(),
                0.0,
                3.0,
                &AdaptiveSpec::default(),
                "determinism",
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.value.re.to_bits(), b.value.re.to_bits());
        assert_eq!(a.edges, b.edges);
    }
}
