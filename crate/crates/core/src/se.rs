//! Scalar state evolution: the linear-detector transfer `phi`, its inverse, the
//! fixed-point iteration and the single-crossing check.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curve::MseTransfer;
use crate::error::{Error, Result};

/// Channel load and noise level of a large random linear system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Load `N / M`.
    pub beta: f64,
    /// Noise variance per complex observation.
    pub sigma2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl SystemConfig {
    /// `sigma2 = 0` is accepted for noiseless sampling; analytical routines reject it.
    pub fn new(beta: f64, sigma2: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::invalid("beta", format!("must be positive and finite, got {beta}")));
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::invalid("sigma2", format!("must be non-negative and finite, got {sigma2}")));
        }
        Ok(SystemConfig {
            beta,
            sigma2,
            n: None,
            m: None,
        })
    }

    pub fn from_snr_db(beta: f64, snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() {
            return Err(Error::invalid("snr_db", "must be finite"));
        }
        Self::new(beta, 10f64.powf(-snr_db / 10.0))
    }

    /// Fixes the signal length; `M` is `round(N / beta)`.
    pub fn with_n(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be positive"));
        }
        let m = (n as f64 / self.beta).round() as usize;
        if m == 0 {
            return Err(Error::invalid("beta", "too large for the requested N"));
        }
        self.n = Some(n);
        self.m = Some(m);
        Ok(self)
    }

    /// Fixes both dimensions; `beta` becomes `n / m`.
    pub fn with_dims(mut self, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::invalid("dimensions", "N and M must be positive"));
        }
        self.n = Some(n);
        self.m = Some(m);
        self.beta = n as f64 / m as f64;
        Ok(self)
    }

    pub fn dims(&self) -> Result<(usize, usize)> {
        match (self.n, self.m) {
            (Some(n), Some(m)) => Ok((n, m)),
            _ => Err(Error::invalid("dimensions", "N and M not set")),
        }
    }

    pub fn snr(&self) -> f64 {
        1.0 / self.sigma2
    }

    pub fn snr_db(&self) -> f64 {
        -10.0 * self.sigma2.log10()
    }

    pub(crate) fn require_finite_snr(&self) -> Result<()> {
        if self.sigma2 > 0.0 {
            Ok(())
        } else {
            Err(Error::domain("analytical routines need sigma2 > 0"))
        }
    }
}

/// One state-evolution step: SINR fed to the denoiser and MSE of the estimate that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SePoint {
    pub rho: f64,
    pub v: f64,
}

/// SINR after the linear step for input MSE `v`.
pub fn phi(cfg: &SystemConfig, v: f64) -> f64 {
    1.0 / (cfg.beta * v + cfg.sigma2)
}

/// Inverse of [`phi`] on `(0, snr]`.
pub fn phi_inv(cfg: &SystemConfig, rho: f64) -> Result<f64> {
    cfg.require_finite_snr()?;
    let snr = cfg.snr();
    if !(rho > 0.0) || rho > snr * (1.0 + 1e-12) {
        return Err(Error::domain(format!("rho = {rho} outside (0, snr = {snr}]")));
    }
    Ok(phi_inv_raw(cfg, rho).max(0.0))
}

/// Written so that it vanishes exactly at `rho = snr`.
pub(crate) fn phi_inv_raw(cfg: &SystemConfig, rho: f64) -> f64 {
    if cfg.sigma2 == 0.0 {
        return 1.0 / (rho * cfg.beta);
    }
    let snr = cfg.snr();
    (snr - rho) / (rho * snr * cfg.beta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeResult {
    pub rho_star: f64,
    pub v_star: f64,
    pub trace: Vec<SePoint>,
    /// Whether the transfer crosses `phi_inv` exactly once.
    pub single_crossing: bool,
}

pub const SE_STEP_TOL: f64 = 1e-12;
pub const SE_MAX_ITER: usize = 10_000;

/// Iterates `rho = phi(v)`, `v = omega(rho)` from `v = 1` to the fixed point.
///
/// The returned point is polished by bisection on `omega - phi_inv` so the residual
/// is at round-off level even when the iteration contracts slowly.
pub fn se_fixed_point<T: MseTransfer + ?Sized>(cfg: &SystemConfig, omega: &T) -> Result<SeResult> {
    cfg.require_finite_snr()?;
    let mut trace = Vec::new();
    let mut v = 1.0;
    let mut converged = false;
    for _ in 0..SE_MAX_ITER {
        let rho = phi(cfg, v);
        trace.push(SePoint { rho, v });
        let next = omega.mse(rho);
        if !next.is_finite() {
            return Err(Error::domain(format!("transfer returned {next} at rho = {rho}")));
        }
        if (next - v).abs() < SE_STEP_TOL {
            v = next;
            converged = true;
            break;
        }
        v = next;
    }
    if !converged {
        return Err(Error::IterationLimit {
            limit: SE_MAX_ITER,
            trace,
        });
    }
    let mut rho_star = phi(cfg, v);
    if let Some(r) = polish(cfg, omega, rho_star) {
        rho_star = r;
    }
    let v_star = omega.mse(rho_star);
    trace.push(SePoint { rho: rho_star, v: v_star });
    let (single_crossing, _) = single_crossing_check(cfg, omega)?;
    Ok(SeResult {
        rho_star,
        v_star,
        trace,
        single_crossing,
    })
}

/// Sign of `omega - phi_inv`, counting only strictly positive gaps as positive.
fn above<T: MseTransfer + ?Sized>(cfg: &SystemConfig, omega: &T, rho: f64) -> bool {
    omega.mse(rho) - phi_inv_raw(cfg, rho) > 0.0
}

fn bisect<T: MseTransfer + ?Sized>(cfg: &SystemConfig, omega: &T, mut lo: f64, mut hi: f64) -> f64 {
    let lo_above = above(cfg, omega, lo);
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if above(cfg, omega, mid) == lo_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Finds the crossing just above `rho` (the one the iteration approaches).
fn polish<T: MseTransfer + ?Sized>(cfg: &SystemConfig, omega: &T, rho: f64) -> Option<f64> {
    let snr = cfg.snr();
    if above(cfg, omega, rho) {
        // already past the crossing: look below
        let mut step = 1e-12 * rho;
        let mut lo = rho;
        while above(cfg, omega, lo) {
            lo = (rho - step).max(0.0);
            if lo <= 0.0 {
                return None;
            }
            step *= 4.0;
        }
        return Some(bisect(cfg, omega, lo, rho));
    }
    let mut step = 1e-12 * rho;
    let mut hi = rho;
    while !above(cfg, omega, hi) {
        if hi >= snr {
            return None;
        }
        hi = (rho + step).min(snr);
        step *= 4.0;
    }
    Some(bisect(cfg, omega, rho, hi))
}

pub const CROSSING_GRID: usize = 4000;

/// Scans `omega - phi_inv` for sign changes and refines each by bisection.
///
/// Returns whether exactly one crossing exists and the crossing locations.
pub fn single_crossing_check<T: MseTransfer + ?Sized>(
    cfg: &SystemConfig,
    omega: &T,
) -> Result<(bool, Vec<f64>)> {
    let crossings = crossings(cfg, omega, CROSSING_GRID)?;
    Ok((crossings.len() == 1, crossings))
}

/// All crossings of `omega` with `phi_inv` on `(0, snr]` resolvable on an `n`-point log grid.
pub fn crossings<T: MseTransfer + ?Sized>(cfg: &SystemConfig, omega: &T, n: usize) -> Result<Vec<f64>> {
    cfg.require_finite_snr()?;
    let snr = cfg.snr();
    // Where omega <= 1 can meet phi_inv we need phi_inv <= 1, i.e. rho >= phi(1).
    let lo = (phi(cfg, 1.0) * 0.5).min(snr * 0.5);
    let grid = crate::curve::log_grid(lo, snr, n);
    let mut out = Vec::new();
    let mut prev = above(cfg, omega, grid[0]);
    for w in grid.windows(2) {
        let cur = above(cfg, omega, w[1]);
        if cur != prev {
            out.push(bisect(cfg, omega, w[0], w[1]));
        }
        prev = cur;
    }
    Ok(out)
}

/// Writes an SE trace as `iter,rho,v`.
pub fn write_se_csv<W: Write>(mut w: W, trace: &[SePoint]) -> Result<()> {
    writeln!(w, "iter,rho,v")?;
    for (i, p) in trace.iter().enumerate() {
        writeln!(w, "{i},{:.17e},{:.17e}", p.rho, p.v)?;
    }
    Ok(())
}
