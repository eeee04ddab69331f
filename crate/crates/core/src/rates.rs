//! Constrained capacity and achievable rates of AMP-type receivers.
//!
//! Everything is computed in nats on a shared [`MmseTable`] so that the different
//! routes to the same quantity agree to round-off; public functions report bits.

use std::f64::consts::LN_2;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::curve::{log_grid, RightTail, TransferCurve};
use crate::error::{Error, Result};
use crate::mmse::MmseTable;
use crate::quadrature;
use crate::se::{crossings, phi_inv_raw, SystemConfig, CROSSING_GRID};

/// `y - ln(1 + y)` without cancellation for small `y`.
fn y_minus_log1p(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        y * y * (0.5 - y * (1.0 / 3.0 - 0.25 * y))
    } else {
        y - y.ln_1p()
    }
}

/// Crossings of the tabulated transfer with `phi_inv`; errors unless exactly one.
fn unique_crossing(cfg: &SystemConfig, table: &MmseTable) -> Result<f64> {
    let xs = crossings(cfg, table, CROSSING_GRID)?;
    if xs.len() == 1 {
        Ok(xs[0])
    } else {
        Err(Error::SingleCrossing { crossings: xs })
    }
}

/// The fixed-point map residual in the `zeta` domain: `beta snr omega(snr/(1+zeta)) - zeta`.
fn zeta_residual(cfg: &SystemConfig, table: &MmseTable, zeta: f64) -> f64 {
    let snr = cfg.snr();
    cfg.beta * snr * table.eval(snr / (1.0 + zeta)) - zeta
}

/// All positive roots of the `zeta` fixed-point equation, scanning a log grid.
pub fn zeta_roots(cfg: &SystemConfig, table: &MmseTable) -> Result<Vec<f64>> {
    cfg.require_finite_snr()?;
    let hi = cfg.beta * cfg.snr();
    if table.eval(cfg.snr()) <= 0.0 {
        return Ok(vec![0.0]);
    }
    let grid = log_grid(hi * 1e-12, hi, CROSSING_GRID);
    let mut roots = Vec::new();
    let mut prev = zeta_residual(cfg, table, grid[0]) > 0.0;
    for w in grid.windows(2) {
        let cur = zeta_residual(cfg, table, w[1]) > 0.0;
        if cur != prev {
            let (mut lo, mut up) = (w[0], w[1]);
            for _ in 0..200 {
                if up - lo <= 1e-15 * up {
                    break;
                }
                let mid = 0.5 * (lo + up);
                if (zeta_residual(cfg, table, mid) > 0.0) == prev {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
            roots.push(0.5 * (lo + up));
        }
        prev = cur;
    }
    Ok(roots)
}

/// Capacity potential in nats at a given `zeta` (a stationary point when it solves the fixed point).
pub fn theorem2_potential(cfg: &SystemConfig, table: &MmseTable, zeta: f64) -> f64 {
    // ln(1+z) - z/(1+z) = y - ln(1+y) with 1+y = 1/(1+z)
    y_minus_log1p(-zeta / (1.0 + zeta)) / cfg.beta + table.integral(cfg.snr() / (1.0 + zeta))
}

/// Area potential in nats at a given SINR `rho`.
pub fn prop1_potential(cfg: &SystemConfig, table: &MmseTable, rho: f64) -> f64 {
    let x = rho / cfg.snr();
    y_minus_log1p(x - 1.0) / cfg.beta + table.integral(rho)
}

/// Constrained capacity per symbol (bits), via the positive root of the `zeta` equation.
pub fn capacity_theorem2(cfg: &SystemConfig, c: &Constellation) -> Result<f64> {
    let table = MmseTable::shared(c)?;
    Ok(capacity_theorem2_nats(cfg, &table)? / LN_2)
}

pub fn capacity_theorem2_nats(cfg: &SystemConfig, table: &MmseTable) -> Result<f64> {
    cfg.require_finite_snr()?;
    unique_crossing(cfg, table)?;
    let snr = cfg.snr();
    let zeta = if table.eval(snr) <= 0.0 {
        0.0
    } else {
        // residual is >= 0 at zero and <= 0 at beta*snr
        let (mut lo, mut hi) = (0.0, cfg.beta * snr);
        for _ in 0..200 {
            if hi - lo <= 1e-15 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if zeta_residual(cfg, table, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(within_entropy(table, theorem2_potential(cfg, table, zeta)))
}

/// Area under the matched target curve (bits); equals the capacity.
pub fn area_capacity_prop1(cfg: &SystemConfig, c: &Constellation) -> Result<f64> {
    let table = MmseTable::shared(c)?;
    Ok(area_capacity_prop1_nats(cfg, &table)? / LN_2)
}

pub fn area_capacity_prop1_nats(cfg: &SystemConfig, table: &MmseTable) -> Result<f64> {
    cfg.require_finite_snr()?;
    let rho = unique_crossing(cfg, table)?;
    Ok(within_entropy(table, prop1_potential(cfg, table, rho)))
}

pub const OMEGA_STAR_POINTS: usize = 1000;

/// The matched target `min(omega_s, phi_inv)` sampled on a log grid ending at `snr`.
pub fn omega_star(cfg: &SystemConfig, c: &Constellation) -> Result<TransferCurve> {
    let table = MmseTable::shared(c)?;
    let mut grid = default_star_grid(cfg)?;
    // knots at the kinks keep the interpolant exact there
    let (lo, hi) = (grid[0], cfg.snr());
    grid.extend(crossings(cfg, &*table, CROSSING_GRID)?.into_iter().filter(|&x| x > lo && x < hi));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    omega_star_on(cfg, &table, &grid)
}

/// Log grid over `(0, snr]` used for target curves.
pub fn default_star_grid(cfg: &SystemConfig) -> Result<Vec<f64>> {
    cfg.require_finite_snr()?;
    let snr = cfg.snr();
    Ok(log_grid(snr * 1e-6, snr, OMEGA_STAR_POINTS))
}

/// The target on an arbitrary grid; it vanishes beyond snr.
pub fn omega_star_on(cfg: &SystemConfig, table: &MmseTable, grid: &[f64]) -> Result<TransferCurve> {
    cfg.require_finite_snr()?;
    TransferCurve::from_fn(grid, table.eval(0.0), RightTail::Zero, |rho| {
        table.eval(rho).min(phi_inv_raw(cfg, rho).max(0.0))
    })
}

/// SINR delivered by the extrinsic LMMSE detector when the decoder feeds back MSE `v`.
///
/// Solves `rho = 1 / (sigma2 + beta v / (1 + v rho))`.
pub fn lmmse_extrinsic_sinr(cfg: &SystemConfig, v: f64) -> f64 {
    let s2 = cfg.sigma2;
    if v <= 0.0 {
        return 1.0 / s2;
    }
    let b = s2 + (cfg.beta - 1.0) * v;
    let disc = (b * b + 4.0 * s2 * v).sqrt();
    if b >= 0.0 {
        2.0 / (b + disc)
    } else {
        (disc - b) / (2.0 * s2 * v)
    }
}

/// Turbo-LMMSE achievable rate (bits).
///
/// Gaussian input has no finite entropy; its Turbo-LMMSE rate equals capacity, which is
/// returned with a warning.
pub fn rate_turbo_lmmse(cfg: &SystemConfig, c: &Constellation) -> Result<f64> {
    let table = MmseTable::shared(c)?;
    Ok(rate_turbo_lmmse_nats(cfg, &table)? / LN_2)
}

pub fn rate_turbo_lmmse_nats(cfg: &SystemConfig, table: &MmseTable) -> Result<f64> {
    cfg.require_finite_snr()?;
    if table.is_gaussian() {
        log::warn!("Turbo-LMMSE with Gaussian input achieves capacity; returning capacity");
        return capacity_theorem2_nats(cfg, table);
    }
    Ok(within_entropy(table, table.entropy() - turbo_loss_integral(cfg, table)))
}

/// Clamps a rate to `[0, H(S)]`; table quadrature can overshoot by ~1e-6 nats at high snr.
fn within_entropy(table: &MmseTable, nats: f64) -> f64 {
    nats.clamp(0.0, table.entropy())
}

/// `integral_0^inf omega(rho + psi(omega(rho))) d rho` in nats.
pub fn turbo_loss_integral(cfg: &SystemConfig, table: &MmseTable) -> f64 {
    let f = |rho: f64| table.eval(rho + lmmse_extrinsic_sinr(cfg, table.eval(rho)));
    let (lo, hi) = (table.rho_min(), table.rho_max());
    let mut total = quadrature::composite(&[0.0, lo], 8, f);
    let (u0, u1) = (lo.ln(), hi.ln());
    let panels = ((u1 - u0) / 0.05).ceil() as usize;
    let edges: Vec<f64> = (0..=panels)
        .map(|i| u0 + (u1 - u0) * i as f64 / panels as f64)
        .collect();
    total += quadrature::composite(&edges, 8, |u| {
        let rho = u.exp();
        f(rho) * rho
    });
    // beyond the table the integrand is below omega(rho), whose tail the table bounds
    total + (table.integral_to_infinity() - table.integral(hi)).max(0.0)
}

/// Rate of AMP followed by a single decoding pass (bits).
pub fn rate_amp_dec(cfg: &SystemConfig, c: &Constellation) -> Result<f64> {
    let table = MmseTable::shared(c)?;
    Ok(rate_amp_dec_nats(cfg, &table)? / LN_2)
}

pub fn rate_amp_dec_nats(cfg: &SystemConfig, table: &MmseTable) -> Result<f64> {
    cfg.require_finite_snr()?;
    let rho = unique_crossing(cfg, table)?;
    Ok(within_entropy(table, table.integral(rho)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    Capacity,
    /// Matched AMP: the area under the target curve.
    Amp,
    TurboLmmse,
    AmpDec,
}

impl RateKind {
    pub const ALL: [RateKind; 4] = [
        RateKind::Capacity,
        RateKind::Amp,
        RateKind::TurboLmmse,
        RateKind::AmpDec,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RateKind::Capacity => "capacity",
            RateKind::Amp => "amp",
            RateKind::TurboLmmse => "turbo_lmmse",
            RateKind::AmpDec => "amp_dec",
        }
    }
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RateKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("kind", format!("unknown rate kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub snr_db: f64,
    pub kind: RateKind,
    /// Bits per symbol; NaN when `error` is set.
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Evaluates one rate kind in bits.
pub fn rate_bits(cfg: &SystemConfig, table: &MmseTable, kind: RateKind) -> Result<f64> {
    let nats = match kind {
        RateKind::Capacity => capacity_theorem2_nats(cfg, table)?,
        RateKind::Amp => area_capacity_prop1_nats(cfg, table)?,
        RateKind::TurboLmmse => rate_turbo_lmmse_nats(cfg, table)?,
        RateKind::AmpDec => rate_amp_dec_nats(cfg, table)?,
    };
    Ok(nats / LN_2)
}

/// Evaluates `kinds` at every SNR in order; failures become flagged rows.
pub fn rate_sweep(
    template: &SystemConfig,
    c: &Constellation,
    snr_db: &[f64],
    kinds: &[RateKind],
) -> Result<Vec<RatePoint>> {
    if snr_db.is_empty() {
        return Ok(Vec::new());
    }
    let table = MmseTable::shared(c)?;
    let mut out = Vec::with_capacity(snr_db.len() * kinds.len());
    for &db in snr_db {
        let cfg = SystemConfig::from_snr_db(template.beta, db)?;
        for &kind in kinds {
            let (rate, error) = match rate_bits(&cfg, &table, kind) {
                Ok(r) => (r, None),
                Err(e) => (f64::NAN, Some(e.to_string())),
            };
            out.push(RatePoint {
                snr_db: db,
                kind,
                rate,
                error,
            });
        }
    }
    Ok(out)
}

/// Writes `snr_db,kind,rate_bits`; flagged rows carry an empty rate.
pub fn write_rates_csv<W: Write>(mut w: W, points: &[RatePoint]) -> Result<()> {
    writeln!(w, "snr_db,kind,rate_bits")?;
    for p in points {
        if p.rate.is_finite() {
            writeln!(w, "{},{},{:.12}", p.snr_db, p.kind, p.rate)?;
        } else {
            writeln!(w, "{},{},", p.snr_db, p.kind)?;
        }
    }
    Ok(())
}

/// Reads back a file written by [`write_rates_csv`].
pub fn read_rates_csv<R: std::io::Read>(r: R) -> Result<Vec<RatePoint>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| rec.get(i).ok_or_else(|| Error::Parse("short row".into()));
        let snr_db: f64 = field(0)?.parse().map_err(|e| Error::Parse(format!("{e}")))?;
        let kind: RateKind = field(1)?.parse()?;
        let raw = field(2)?;
        let (rate, error) = if raw.is_empty() {
            (f64::NAN, Some("flagged".to_string()))
        } else {
            (raw.parse().map_err(|e| Error::Parse(format!("{e}")))?, None)
        };
        out.push(RatePoint {
            snr_db,
            kind,
            rate,
            error,
        });
    }
    Ok(out)
}

/// SINR of the uncoded fixed point (the unique crossing).
pub fn uncoded_fixed_point(cfg: &SystemConfig, table: &MmseTable) -> Result<f64> {
    unique_crossing(cfg, table)
}
