//! Decoder/detector curve matching: tunnel checks, threshold prediction and degree design.

mod ga;
mod lp;

use serde::{Deserialize, Serialize};

pub use ga::{
    channel_llr_mean, check_output_mean, ga_output_mse, ga_phi, ga_phi_inv, ga_transfer_curve, DECODED_MEAN,
};
pub use lp::{design_for_rate, optimize_degrees, ConstraintRow, DesignTarget, LpDesign, LpOptions, RateDesign};

use crate::curve::{MseTransfer, TransferCurve};
use crate::error::Result;
use crate::se::{phi, phi_inv_raw, SePoint, SystemConfig};

/// Bisection bracket for thresholds, in dB.
const THRESHOLD_LO_DB: f64 = -20.0;
const THRESHOLD_HI_DB: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    /// Safety margin in MSE units absorbing Monte Carlo noise in the decoder curve.
    pub eps: f64,
    /// Decoder MSE below which a point counts as decoded. Measured curves of short codes
    /// keep an error-floor residue up to a few 1e-4 well above threshold, so this must stay above that.
    pub floor: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { eps: 1e-3, floor: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub snr_db: f64,
    pub tunnel_open: bool,
    /// Smallest `phi_inv - omega_c` over undecoded grid points below snr; `None` if there are none.
    pub min_gap: Option<f64>,
    /// Smallest snr with an open tunnel, if any within the search bracket.
    pub predicted_threshold_db: Option<f64>,
    /// Area between the target and decoder curves, in bits.
    pub rate_gap_to_capacity: f64,
}

/// Minimum gap between `phi_inv` and the decoder curve over its grid points below snr
/// and at snr itself, where `phi_inv` vanishes.
pub fn min_gap(cfg: &SystemConfig, curve_c: &TransferCurve, opts: &MatchOptions) -> Option<f64> {
    let snr = cfg.snr();
    curve_c
        .rho()
        .iter()
        .zip(curve_c.values())
        .filter(|&(&r, _)| r < snr)
        .map(|(&r, &v)| (r, v))
        .chain(std::iter::once((snr, curve_c.eval(snr))))
        .filter(|&(_, v)| v >= opts.floor)
        .map(|(r, v)| phi_inv_raw(cfg, r) - v)
        .reduce(f64::min)
}

/// Whether the detection tunnel is open with margin `eps`.
pub fn tunnel_open(cfg: &SystemConfig, curve_c: &TransferCurve, opts: &MatchOptions) -> bool {
    min_gap(cfg, curve_c, opts).is_none_or(|g| g > opts.eps)
}

/// Smallest snr (dB) at which the tunnel opens, by bisection.
pub fn predicted_threshold_db(beta: f64, curve_c: &TransferCurve, opts: &MatchOptions) -> Result<Option<f64>> {
    let open = |db: f64| -> Result<bool> { Ok(tunnel_open(&SystemConfig::from_snr_db(beta, db)?, curve_c, opts)) };
    if !open(THRESHOLD_HI_DB)? {
        return Ok(None);
    }
    if open(THRESHOLD_LO_DB)? {
        return Ok(Some(THRESHOLD_LO_DB));
    }
    let (mut lo, mut hi) = (THRESHOLD_LO_DB, THRESHOLD_HI_DB);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if open(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Compares a decoder curve with the matched target on a shared grid.
pub fn check_matching(
    cfg: &SystemConfig,
    curve_c: &TransferCurve,
    curve_star: &TransferCurve,
    opts: &MatchOptions,
) -> Result<MatchReport> {
    cfg.require_finite_snr()?;
    curve_c.same_grid(curve_star)?;
    let gap = min_gap(cfg, curve_c, opts);
    let area = curve_star.integral(cfg.snr()) - curve_c.total_area();
    Ok(MatchReport {
        snr_db: cfg.snr_db(),
        tunnel_open: gap.is_none_or(|g| g > opts.eps),
        min_gap: gap,
        predicted_threshold_db: predicted_threshold_db(cfg.beta, curve_c, opts)?,
        rate_gap_to_capacity: area / std::f64::consts::LN_2,
    })
}

/// Coded state evolution `rho = phi(v)`, `v = omega_c(rho)` from `v = 1`.
pub fn coded_se_trace<T: MseTransfer + ?Sized>(cfg: &SystemConfig, curve_c: &T, max_iter: usize) -> Vec<SePoint> {
    let mut v = 1.0;
    let mut out = Vec::with_capacity(max_iter);
    for _ in 0..max_iter {
        let rho = phi(cfg, v);
        let next = curve_c.mse(rho);
        out.push(SePoint { rho, v: next });
        if (next - v).abs() < 1e-14 {
            break;
        }
        v = next;
    }
    out
}
