//! Node sets and composite rules shared by the MMSE and rate integrals.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;

/// Half-width of the truncated standard-normal support for 1-D rules (e^{-81} is negligible).
pub const NOISE_SPAN: f64 = 9.0;

/// Nodes per composite Gauss–Legendre panel.
pub const PANEL_ORDER: usize = 16;

fn nz(n: usize) -> NonZeroUsize {
    NonZeroUsize::new(n.max(1)).expect("non-zero")
}

/// Gauss–Legendre nodes and weights on [-1, 1], cached by order.
pub fn legendre(order: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(order)
        .or_insert_with(|| Arc::new(GaussLegendre::new(nz(order)).as_node_weight_pairs().to_vec()))
        .clone()
}

/// Gauss–Hermite nodes and weights for the weight e^{-x²}, cached by order.
pub fn hermite(order: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(order)
        .or_insert_with(|| Arc::new(GaussHermite::new(nz(order)).as_node_weight_pairs().to_vec()))
        .clone()
}

/// Composite Gauss–Legendre rule over `edges` (sorted panel boundaries).
pub fn composite<F: FnMut(f64) -> f64>(edges: &[f64], order: usize, mut f: F) -> f64 {
    let rule = legendre(order);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut panel = 0.0;
        for &(x, wt) in rule.iter() {
            panel += wt * f(mid + half * x);
        }
        total += half * panel;
    }
    total
}

/// Panel edges on [-span, span] refined geometrically around each breakpoint.
///
/// `width` is the scale of the sharpest feature at a breakpoint; panels shrink to
/// about that width next to it and grow by doubling away from it.
pub fn refined_edges(span: f64, breakpoints: &[f64], width: f64) -> Vec<f64> {
    let base = 0.5;
    let n_base = (2.0 * span / base).round() as usize;
    let mut edges: Vec<f64> = (0..=n_base)
        .map(|i| -span + 2.0 * span * i as f64 / n_base as f64)
        .collect();
    if width < base {
        for &b in breakpoints {
            if b.abs() >= span {
                continue;
            }
            edges.push(b);
            let mut off = width;
            while off < base {
                for e in [b - off, b + off] {
                    if e.abs() < span {
                        edges.push(e);
                    }
                }
                off *= 2.0;
            }
        }
    } else {
        edges.extend(breakpoints.iter().copied().filter(|b| b.abs() < span));
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    edges
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_integrates_gaussian_moments() {
        let rule = hermite(40);
        let pi = std::f64::consts::PI;
        let m0: f64 = rule.iter().map(|&(_, w)| w).sum();
        let m2: f64 = rule.iter().map(|&(x, w)| w * x * x).sum();
        assert!((m0 - pi.sqrt()).abs() < 1e-12);
        assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn composite_handles_sharp_sigmoid() {
        // logistic of width 1e-3 centred at 0.3: integral over [-9,9] is 9 - 0.3
        let w = 1e-3;
        let edges = refined_edges(NOISE_SPAN, &[0.3], w);
        let got = composite(&edges, PANEL_ORDER, |t| 1.0 / (1.0 + (-(t - 0.3) / w).exp()));
        assert!((got - 8.7).abs() < 1e-9, "{got}");
    }
}
