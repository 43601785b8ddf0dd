//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// Tolerances and subdivision budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for j in 0..7 {
        let x = half * XGK[j];
        let sum = f(center - x) + f(center + x);
        kron += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]`, bisecting the segment with the largest error
/// estimate until the total error is within `max(abs_tol, rel_tol·|I|)`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, settings: &QuadratureSettings) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    let (value, error) = kronrod(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 15;
    let mut splits = 0;
    while total_err > settings.abs_tol.max(settings.rel_tol * total.abs()) {
        if splits >= settings.max_subdivisions {
            return Integral {
                value: total,
                error: total_err,
                converged: false,
                evaluations,
            };
        }
        let seg = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (seg.a + seg.b);
        let (v1, e1) = kronrod(&f, seg.a, mid);
        let (v2, e2) = kronrod(&f, mid, seg.b);
        evaluations += 30;
        splits += 1;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Integral {
        value,
        error,
        converged: true,
        evaluations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, &QuadratureSettings::default());
        assert!((r.value - 8.0).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn smooth_exponential() {
        let r = integrate(|t| libm::exp(-t), 0.0, 30.0, &QuadratureSettings::default());
        let exact = 1.0 - libm::exp(-30.0);
        assert!((r.value - exact).abs() < 1e-10);
    }

    #[test]
    fn peaked_integrand_subdivides() {
        let r = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, &QuadratureSettings::default());
        let exact = 2.0 * libm::atan(1.0 / 1e-2) / 1e-2;
        assert!(r.converged);
        assert!((r.value - exact).abs() / exact < 1e-8);
    }
}
