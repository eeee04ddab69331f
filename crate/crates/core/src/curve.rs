//! Sampled MSE transfer curves `v = omega(rho)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmse::MmseTable;

/// Anything that maps an SINR to an MSE.
pub trait MseTransfer {
    fn mse(&self, rho: f64) -> f64;
}

impl<F: Fn(f64) -> f64> MseTransfer for F {
    fn mse(&self, rho: f64) -> f64 {
        self(rho)
    }
}

impl MseTransfer for MmseTable {
    fn mse(&self, rho: f64) -> f64 {
        self.eval(rho)
    }
}

impl<T: MseTransfer + ?Sized> MseTransfer for std::sync::Arc<T> {
    fn mse(&self, rho: f64) -> f64 {
        (**self).mse(rho)
    }
}

/// Behaviour beyond the last grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RightTail {
    Zero,
    /// Scaled `1/(1+rho)` continuing from the last sample.
    GaussianBound,
}

/// A non-increasing sampled transfer curve, interpolated linearly in `ln rho`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCurve {
    rho: Vec<f64>,
    v: Vec<f64>,
    /// Standard errors for measured curves.
    stderr: Option<Vec<f64>>,
    /// Value approached as `rho -> 0+`.
    left: f64,
    right: RightTail,
}

/// Slack allowed for round-off when checking monotonicity of computed curves.
const MONO_TOL: f64 = 1e-12;

impl TransferCurve {
    pub fn new(rho: Vec<f64>, v: Vec<f64>, left: f64, right: RightTail) -> Result<Self> {
        let curve = Self::unchecked(rho, v, None, left, right)?;
        if let Some(i) = curve.v.windows(2).position(|w| w[1] > w[0] + MONO_TOL) {
            return Err(Error::invalid(
                "curve",
                format!("increases between rho {} and {}", curve.rho[i], curve.rho[i + 1]),
            ));
        }
        Ok(curve)
    }

    /// A Monte Carlo curve; monotonicity may fail within `2 * stderr`.
    pub fn measured(rho: Vec<f64>, v: Vec<f64>, stderr: Vec<f64>, left: f64) -> Result<Self> {
        if stderr.len() != v.len() {
            return Err(Error::Dimension(format!(
                "{} values but {} standard errors",
                v.len(),
                stderr.len()
            )));
        }
        let curve = Self::unchecked(rho, v, Some(stderr), left, RightTail::Zero)?;
        Ok(curve)
    }

    fn unchecked(
        rho: Vec<f64>,
        v: Vec<f64>,
        stderr: Option<Vec<f64>>,
        left: f64,
        right: RightTail,
    ) -> Result<Self> {
        if rho.is_empty() || rho.len() != v.len() {
            return Err(Error::Dimension(format!(
                "{} grid points but {} values",
                rho.len(),
                v.len()
            )));
        }
        if !(rho[0] > 0.0) || rho.windows(2).any(|w| !(w[1] > w[0])) || !rho.iter().all(|r| r.is_finite()) {
            return Err(Error::invalid("curve", "grid must be positive, finite and strictly increasing"));
        }
        if v.iter().chain(std::iter::once(&left)).any(|&x| !(0.0..=1.0 + MONO_TOL).contains(&x)) {
            return Err(Error::invalid("curve", "values must lie in [0, 1]"));
        }
        Ok(TransferCurve {
            rho,
            v,
            stderr,
            left,
            right,
        })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn<F: FnMut(f64) -> f64>(grid: &[f64], left: f64, right: RightTail, mut f: F) -> Result<Self> {
        let v = grid.iter().map(|&r| f(r)).collect();
        Self::new(grid.to_vec(), v, left, right)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> RightTail {
        self.right
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// True if no sample rises above an earlier one by more than `k` standard errors.
    pub fn is_monotone_within(&self, k: f64) -> bool {
        let se = |i: usize| self.stderr.as_ref().map_or(0.0, |s| s[i]);
        let mut best = 0usize;
        for i in 1..self.v.len() {
            let tol = k * (se(i) * se(i) + se(best) * se(best)).sqrt() + MONO_TOL;
            if self.v[i] > self.v[best] + tol {
                return false;
            }
            if self.v[i] < self.v[best] {
                best = i;
            }
        }
        true
    }

    pub fn eval(&self, rho: f64) -> f64 {
        let n = self.rho.len();
        if rho <= self.rho[0] {
            let t = (rho / self.rho[0]).max(0.0);
            return self.left + (self.v[0] - self.left) * t;
        }
        if rho >= self.rho[n - 1] {
            return match self.right {
                RightTail::Zero => {
                    if rho == self.rho[n - 1] {
                        self.v[n - 1]
                    } else {
                        0.0
                    }
                }
                RightTail::GaussianBound => self.v[n - 1] * (1.0 + self.rho[n - 1]) / (1.0 + rho),
            };
        }
        let i = self.rho.partition_point(|&r| r <= rho) - 1;
        let (ua, ub) = (self.rho[i].ln(), self.rho[i + 1].ln());
        let f = (rho.ln() - ua) / (ub - ua);
        self.v[i] + (self.v[i + 1] - self.v[i]) * f
    }

    /// `integral_0^upper` of the interpolant, exact piece by piece.
    pub fn integral(&self, upper: f64) -> f64 {
        let n = self.rho.len();
        let upper = upper.max(0.0);
        let r0 = self.rho[0];
        if upper <= r0 {
            let t = upper / r0;
            return upper * (self.left + 0.5 * (self.v[0] - self.left) * t);
        }
        let mut total = 0.5 * (self.left + self.v[0]) * r0;
        for i in 0..n - 1 {
            let (a, b) = (self.rho[i], self.rho[i + 1]);
            if upper <= a {
                break;
            }
            let (ua, ub) = (a.ln(), b.ln());
            let len = upper.min(b).ln() - ua;
            total += log_segment_integral(ua, ub - ua, self.v[i], self.v[i + 1], len);
        }
        if upper > self.rho[n - 1] {
            total += match self.right {
                RightTail::Zero => 0.0,
                RightTail::GaussianBound => {
                    let c = self.v[n - 1] * (1.0 + self.rho[n - 1]);
                    c * ((1.0 + upper) / (1.0 + self.rho[n - 1])).ln()
                }
            };
        }
        total
    }

    /// Area under the whole curve; infinite for a Gaussian-bound tail.
    pub fn total_area(&self) -> f64 {
        match self.right {
            RightTail::Zero => self.integral(self.rho[self.rho.len() - 1]),
            RightTail::GaussianBound => f64::INFINITY,
        }
    }

    /// Checks that `other` is sampled on the same grid.
    pub fn same_grid(&self, other: &TransferCurve) -> Result<()> {
        let same = self.rho.len() == other.rho.len()
            && self
                .rho
                .iter()
                .zip(&other.rho)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
        if same {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "grids of {} and {} points differ",
                self.rho.len(),
                other.rho.len()
            )))
        }
    }
}

impl MseTransfer for TransferCurve {
    fn mse(&self, rho: f64) -> f64 {
        self.eval(rho)
    }
}

/// Integral over `u in [ua, ua + len]` of `w(u) e^u`, `w` linear from `wa` to `wb` across `du`.
pub(crate) fn log_segment_integral(ua: f64, du: f64, wa: f64, wb: f64, len: f64) -> f64 {
    let s = (wb - wa) / du;
    let w_end = wa + s * len;
    (w_end - s) * (ua + len).exp() - (wa - s) * ua.exp()
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    // pin the endpoints exactly
    g[0] = lo;
    g[n - 1] = hi;
    g
}
