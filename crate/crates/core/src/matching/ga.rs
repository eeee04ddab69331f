//! Gaussian-approximation density evolution for BP decoding of LDPC ensembles.
//!
//! Messages are modelled as consistent Gaussian LLRs `N(m, 2m)`, tracked by their mean.

use std::sync::OnceLock;

use crate::constellation::{Constellation, Label};
use crate::curve::{RightTail, TransferCurve};
use crate::error::{Error, Result};
use crate::ldpc::DegreeDistribution;
use crate::quadrature::{composite, PANEL_ORDER};

const M_MAX: f64 = 800.0;
const M_STEP: f64 = 0.02;

/// Check-to-variable mean beyond which decoding is treated as complete.
pub const DECODED_MEAN: f64 = 80.0;

/// `E[1 - tanh(L/2)]` for `L ~ N(m, 2m)`; also the MMSE of a bit whose LLR has that law.
fn phi_direct(m: f64) -> f64 {
    if m <= 0.0 {
        return 1.0;
    }
    let s = (2.0 * m).sqrt();
    // mass sits near L = 0, i.e. z = -sqrt(m/2)
    let lo = -(0.5 * m).sqrt() - 10.0;
    let hi = 10.0;
    let panels = ((hi - lo) / 0.5).ceil() as usize;
    let edges: Vec<f64> = (0..=panels).map(|i| lo + (hi - lo) * i as f64 / panels as f64).collect();
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    composite(&edges, PANEL_ORDER, |z| {
        let l = m + s * z;
        let tail = if l > 0.0 {
            let e = (-l).exp();
            2.0 * e / (1.0 + e)
        } else {
            2.0 / (1.0 + l.exp())
        };
        norm * (-0.5 * z * z).exp() * tail
    })
}

struct Table {
    ln_phi: Vec<f64>,
    tail_slope: f64,
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = (M_MAX / M_STEP).round() as usize;
        let ln_phi: Vec<f64> = (0..=n).map(|i| phi_direct(i as f64 * M_STEP).ln()).collect();
        let tail_slope = (ln_phi[n] - ln_phi[n - 1]) / M_STEP;
        Table { ln_phi, tail_slope }
    })
}

/// The GA bit-MMSE function, tabulated.
pub fn ga_phi(m: f64) -> f64 {
    if m <= 0.0 {
        return 1.0;
    }
    let t = table();
    let n = t.ln_phi.len() - 1;
    let u = m / M_STEP;
    if u >= n as f64 {
        return (t.ln_phi[n] + t.tail_slope * (m - M_MAX)).exp();
    }
    let i = u as usize;
    let f = u - i as f64;
    ((1.0 - f) * t.ln_phi[i] + f * t.ln_phi[i + 1]).exp()
}

/// Inverse of [`ga_phi`]: the mean `m` with `ga_phi(m) = y`.
pub fn ga_phi_inv(y: f64) -> f64 {
    if y >= 1.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return f64::INFINITY;
    }
    let t = table();
    let ly = y.ln();
    let n = t.ln_phi.len() - 1;
    if ly <= t.ln_phi[n] {
        return M_MAX + (ly - t.ln_phi[n]) / t.tail_slope;
    }
    // ln_phi is decreasing
    let i = t.ln_phi.partition_point(|&v| v > ly).max(1);
    let (a, b) = (t.ln_phi[i - 1], t.ln_phi[i]);
    M_STEP * ((i - 1) as f64 + (a - ly) / (a - b))
}

/// Mean of the channel bit LLRs at SINR `rho`.
pub fn channel_llr_mean(c: &Constellation, rho: f64) -> Result<f64> {
    match c.label() {
        Label::Bpsk => Ok(4.0 * rho),
        Label::Qpsk => Ok(2.0 * rho),
        other => Err(Error::Unsupported(format!(
            "Gaussian-approximation design needs BPSK or QPSK, got {other}"
        ))),
    }
}

/// Check-node output mean for an incoming variable-to-check bit MMSE `x`.
pub fn check_output_mean(rho: &[(usize, f64)], x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    rho.iter()
        .map(|&(j, f)| f * ga_phi_inv(1.0 - (1.0 - x).powi(j as i32 - 1)))
        .sum()
}

/// GA prediction of the decoder's output MSE at channel LLR mean `m_ch`.
pub fn ga_output_mse(dd: &DegreeDistribution, m_ch: f64) -> f64 {
    let mut m = 0.0;
    for _ in 0..5000 {
        let x: f64 = dd.lambda.iter().map(|&(d, f)| f * ga_phi(m_ch + (d as f64 - 1.0) * m)).sum();
        let next = check_output_mean(&dd.rho, x);
        if next >= DECODED_MEAN {
            return 0.0;
        }
        let done = (next - m).abs() < 1e-10;
        m = next;
        if done {
            break;
        }
    }
    dd.variable_node_fractions()
        .iter()
        .map(|&(d, f)| f * ga_phi(m_ch + d as f64 * m))
        .sum()
}

/// The GA decoder transfer curve of an ensemble on `grid`.
pub fn ga_transfer_curve(dd: &DegreeDistribution, c: &Constellation, grid: &[f64]) -> Result<TransferCurve> {
    let mut v = Vec::with_capacity(grid.len());
    let mut prev = 1.0f64;
    for &rho in grid {
        // fixed-point tolerance can leave round-off wiggles; the true curve is non-increasing
        let x = ga_output_mse(dd, channel_llr_mean(c, rho)?).min(prev);
        v.push(x);
        prev = x;
    }
    TransferCurve::new(grid.to_vec(), v, 1.0, RightTail::Zero)
}
