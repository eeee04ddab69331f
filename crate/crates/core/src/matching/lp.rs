//! Degree-distribution design by linear programming on the GA surrogate.
//!
//! With a single check degree `dc`, decoding at SINR `rho` reaches check mean `m_req`
//! iff for all `m` in `[0, m_req]`
//!
//! ```text
//! sum_d lambda_d phi(m_ch + (d-1) m) < 1 - (1 - phi(m))^{1/(dc-1)}
//! ```
//!
//! which is linear in `lambda`. Maximising `sum_d lambda_d / d` maximises the design rate.

use std::io::Write;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::ga::{channel_llr_mean, ga_phi, ga_phi_inv, ga_transfer_curve};
use super::{predicted_threshold_db, MatchOptions};
use crate::constellation::Constellation;
use crate::curve::log_grid;
use crate::error::{Error, Result};
use crate::ldpc::DegreeDistribution;
use crate::mmse::MmseTable;
use crate::se::{crossings, phi_inv_raw, SystemConfig, CROSSING_GRID};

/// Check mean that counts as fully decoded inside the LP.
const FULL_DECODE_MEAN: f64 = 60.0;
/// Targets below this are treated as "decode completely".
const TARGET_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DesignTarget {
    /// Stay below `min(omega_s, phi_inv)` over `(0, snr)`.
    Matched,
    /// Decode completely on a scalar AWGN channel at SINR `rho0`.
    Siso { rho0: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub dv_min: usize,
    pub dv_max: usize,
    pub dc: usize,
    pub eps: f64,
    pub grid_points: usize,
    pub m_points: usize,
    /// Relative slack on the check-node side of each row.
    pub slack: f64,
    pub target: DesignTarget,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            dv_min: 2,
            dv_max: 12,
            dc: 6,
            eps: 1e-3,
            grid_points: 64,
            m_points: 40,
            slack: 1e-3,
            target: DesignTarget::Matched,
        }
    }
}

/// One LP row: `sum_d coeffs[d] lambda_d <= bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub rho: f64,
    pub m: f64,
    pub coeffs: Vec<f64>,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpDesign {
    pub dd: DegreeDistribution,
    pub design_rate: f64,
    pub degrees: Vec<usize>,
    pub rows: Vec<ConstraintRow>,
}

impl LpDesign {
    /// Constraint dump as `rho,m,degree,coefficient,bound`.
    pub fn write_constraints_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rho,m,degree,coefficient,bound")?;
        for row in &self.rows {
            for (d, c) in self.degrees.iter().zip(&row.coeffs) {
                writeln!(w, "{:.12e},{:.12e},{d},{:.12e},{:.12e}", row.rho, row.m, c, row.bound)?;
            }
        }
        Ok(())
    }
}

fn rows_for(rho: f64, m_req: f64, degrees: &[usize], opts: &LpOptions, c: &Constellation) -> Result<Vec<ConstraintRow>> {
    let m_ch = channel_llr_mean(c, rho)?;
    let k = opts.m_points.max(2);
    let e = 1.0 / (opts.dc as f64 - 1.0);
    Ok((0..k)
        .map(|i| {
            let m = m_req * i as f64 / (k - 1) as f64;
            let coeffs = degrees.iter().map(|&d| ga_phi(m_ch + (d as f64 - 1.0) * m)).collect();
            let bound = (1.0 - (1.0 - ga_phi(m)).powf(e)) * (1.0 - opts.slack);
            ConstraintRow { rho, m, coeffs, bound }
        })
        .collect())
}

fn build_rows(cfg: &SystemConfig, c: &Constellation, degrees: &[usize], opts: &LpOptions) -> Result<Vec<ConstraintRow>> {
    let mut rows = Vec::new();
    match opts.target {
        DesignTarget::Siso { rho0 } => {
            if !(rho0 > 0.0) {
                return Err(Error::invalid("rho0", "must be positive"));
            }
            rows.extend(rows_for(rho0, FULL_DECODE_MEAN, degrees, opts, c)?);
        }
        DesignTarget::Matched => {
            cfg.require_finite_snr()?;
            let snr = cfg.snr();
            let table = MmseTable::shared(c)?;
            let start = crossings(cfg, &*table, CROSSING_GRID)?.first().copied().unwrap_or(snr * 1e-6);
            // the last point is snr itself, where phi_inv vanishes and decoding must complete
            let grid = log_grid(start, snr, opts.grid_points);
            let d_min = degrees[0] as f64;
            for rho in grid {
                let t = phi_inv_raw(cfg, rho);
                let ws = table.eval(rho);
                if t >= ws {
                    continue;
                }
                let target = t - opts.eps;
                let m_ch = channel_llr_mean(c, rho)?;
                let m_req = if target <= TARGET_FLOOR {
                    FULL_DECODE_MEAN
                } else if target >= ga_phi(m_ch) {
                    continue;
                } else {
                    (ga_phi_inv(target) - m_ch).max(0.0) / d_min
                };
                rows.extend(rows_for(rho, m_req, degrees, opts, c)?);
            }
        }
    }
    Ok(rows)
}

/// The pure degree whose worst row is least violated, with that row.
fn most_violated(rows: &[ConstraintRow], degrees: &[usize]) -> (usize, f64, f64, f64) {
    let mut best = (degrees[0], f64::NAN, f64::NAN, f64::INFINITY);
    for (j, &d) in degrees.iter().enumerate() {
        let worst = rows
            .iter()
            .map(|r| (r.rho, r.m, r.coeffs[j] - r.bound))
            .fold((f64::NAN, f64::NAN, f64::NEG_INFINITY), |a, b| if b.2 > a.2 { b } else { a });
        if worst.2 < best.3 {
            best = (d, worst.0, worst.1, worst.2);
        }
    }
    best
}

/// Maximises the design rate subject to the GA-predicted decoder curve meeting the target.
pub fn optimize_degrees(cfg: &SystemConfig, c: &Constellation, opts: &LpOptions) -> Result<LpDesign> {
    if opts.dv_min < 2 || opts.dv_max < opts.dv_min {
        return Err(Error::invalid("dv range", "need 2 <= dv_min <= dv_max"));
    }
    if opts.dc < 3 {
        return Err(Error::invalid("dc", "check degree must be at least 3"));
    }
    let degrees: Vec<usize> = (opts.dv_min..=opts.dv_max).collect();
    let rows = build_rows(cfg, c, &degrees, opts)?;
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = degrees.iter().map(|&d| lp.add_var(1.0 / d as f64, (0.0, 1.0))).collect();
    lp.add_constraint(vars.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for row in &rows {
        lp.add_constraint(vars.iter().copied().zip(row.coeffs.iter().copied()), ComparisonOp::Le, row.bound);
    }
    let infeasible = || {
        let (d, rho, m, by) = most_violated(&rows, &degrees);
        Error::Infeasible(format!(
            "no degree distribution meets the target; most violated at rho = {rho:.6} (m = {m:.3}), \
             by {by:.3e} even for degree {d}"
        ))
    };
    let outcome = match lp.solve() {
        Ok(o) => o,
        Err(microlp::Error::Infeasible) => return Err(infeasible()),
        Err(e) => return Err(Error::Infeasible(format!("LP solver failed: {e}"))),
    };
    let sol = outcome
        .solution()
        .ok_or_else(|| Error::Infeasible("LP solve was interrupted".into()))?;
    let mut lambda: Vec<(usize, f64)> = degrees
        .iter()
        .zip(&vars)
        .map(|(&d, &v)| (d, sol.var_value(v).max(0.0)))
        .filter(|p| p.1 > 1e-9)
        .collect();
    let total: f64 = lambda.iter().map(|p| p.1).sum();
    for p in &mut lambda {
        p.1 /= total;
    }
    let inv: f64 = lambda.iter().map(|&(d, f)| f / d as f64).sum();
    if inv <= 1.0 / opts.dc as f64 {
        return Err(Error::Infeasible(format!(
            "best feasible distribution has non-positive rate with dc = {}",
            opts.dc
        )));
    }
    let dd = DegreeDistribution::new(lambda, vec![(opts.dc, 1.0)])?;
    Ok(LpDesign {
        design_rate: dd.design_rate(),
        dd,
        degrees,
        rows,
    })
}

/// A design meeting a target rate at the lowest operating point, and its predicted threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateDesign {
    pub design: LpDesign,
    /// For matched designs the snr designed for; for SISO designs the AWGN SINR `rho0`; in dB.
    pub design_point_db: f64,
    /// GA-predicted coded-AMP threshold of the design in the system with load `beta`.
    pub threshold_db: Option<f64>,
}

/// Finds, for each check degree in `dcs`, the lowest operating point at which the LP reaches
/// `rate`, and keeps the design with the best predicted threshold.
pub fn design_for_rate(
    beta: f64,
    c: &Constellation,
    rate: f64,
    dcs: &[usize],
    base: &LpOptions,
    matching: &MatchOptions,
) -> Result<RateDesign> {
    let grid = log_grid(1e-3, 1e3, 600);
    let mut best: Option<RateDesign> = None;
    for &dc in dcs {
        let attempt = |db: f64| -> Result<Option<LpDesign>> {
            let cfg = SystemConfig::from_snr_db(beta, db)?;
            let target = match base.target {
                DesignTarget::Matched => DesignTarget::Matched,
                DesignTarget::Siso { .. } => DesignTarget::Siso { rho0: 10f64.powf(db / 10.0) },
            };
            let opts = LpOptions { dc, target, ..base.clone() };
            match optimize_degrees(&cfg, c, &opts) {
                Ok(d) if d.design_rate >= rate => Ok(Some(d)),
                Ok(_) | Err(Error::Infeasible(_)) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let (mut lo, mut hi) = (-10.0, 30.0);
        let Some(mut found) = attempt(hi)? else { continue };
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            match attempt(mid)? {
                Some(d) => {
                    hi = mid;
                    found = d;
                }
                None => lo = mid,
            }
        }
        let curve = ga_transfer_curve(&found.dd, c, &grid)?;
        let threshold_db = predicted_threshold_db(beta, &curve, matching)?;
        let cand = RateDesign {
            design: found,
            design_point_db: hi,
            threshold_db,
        };
        let better = match (&best, cand.threshold_db) {
            (None, _) => true,
            (Some(b), Some(t)) => b.threshold_db.is_none_or(|bt| t < bt),
            (Some(_), None) => false,
        };
        if better {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| Error::Infeasible(format!("no check degree in {dcs:?} reaches rate {rate}")))
}
