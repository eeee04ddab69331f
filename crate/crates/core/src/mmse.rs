//! Scalar AWGN estimation: the MMSE transfer, the conditional-mean denoiser and
//! SISO capacity through the I-MMSE integral.
//!
//! The scalar channel is `y = sqrt(rho) x + z` with `z ~ CN(0, 1)`, equivalently
//! `r = x + h` with `h ~ CN(0, 1/rho)`.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, Label, Pam};
use crate::curve::log_segment_integral;
use crate::error::{Error, Result};
use crate::quadrature::{self, NOISE_SPAN, PANEL_ORDER};

/// How `omega_s` integrates over the channel noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmseOptions {
    /// Nodes per real dimension for the tensor Gauss–Hermite rule.
    pub gh_order: usize,
    /// Constellations with more points than this use Monte Carlo.
    pub mc_threshold: usize,
    pub mc_samples: usize,
    pub mc_seed: u64,
    /// Use exact 1-D composite rules for product constellations (BPSK, QPSK, 16QAM).
    pub use_separable: bool,
}

impl Default for MmseOptions {
    fn default() -> Self {
        MmseOptions {
            gh_order: 40,
            mc_threshold: 64,
            mc_samples: 1_000_000,
            mc_seed: 0x5eed_5eed,
            use_separable: true,
        }
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || rho < 0.0 {
        return Err(Error::domain(format!("SINR must be finite and non-negative, got {rho}")));
    }
    Ok(())
}

/// Posterior mean and variance over complex `points` from unnormalised log-weights.
///
/// The variance is accumulated as a sum of non-negative terms around the most
/// likely point so it stays positive deep into the high-SNR tail.
fn posterior_complex(points: &[Complex64], logw: &[f64], scratch: &mut Vec<f64>) -> (Complex64, f64) {
    let (k, lmax) = logw
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, l)| if l > acc.1 { (i, l) } else { acc });
    scratch.clear();
    let xk = points[k];
    let mut z = 0.0;
    let mut delta = Complex64::new(0.0, 0.0);
    for (x, &l) in points.iter().zip(logw) {
        let e = (l - lmax).exp();
        scratch.push(e);
        z += e;
        delta += (x - xk) * e;
    }
    delta /= z;
    let mut var = 0.0;
    for (x, &e) in points.iter().zip(scratch.iter()) {
        var += e * (x - xk - delta).norm_sqr();
    }
    (xk + delta, var / z)
}

/// Real-line counterpart of [`posterior_complex`]; returns the posterior variance only.
fn posterior_var_real(points: &[f64], logw: &[f64], scratch: &mut Vec<f64>) -> f64 {
    let (k, lmax) = logw
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, l)| if l > acc.1 { (i, l) } else { acc });
    scratch.clear();
    let ak = points[k];
    let mut z = 0.0;
    let mut delta = 0.0;
    for (&a, &l) in points.iter().zip(logw) {
        let e = (l - lmax).exp();
        scratch.push(e);
        z += e;
        delta += e * (a - ak);
    }
    delta /= z;
    let mut var = 0.0;
    for (&a, &e) in points.iter().zip(scratch.iter()) {
        let d = a - ak - delta;
        var += e * d * d;
    }
    var / z
}

/// MMSE of one rail of a product constellation; noise per rail is N(0, 1/2).
fn pam_mmse(pam: &Pam, rho: f64) -> f64 {
    let n = pam.points.len();
    if n == 1 {
        return 0.0;
    }
    if rho == 0.0 {
        let mean: f64 = pam.points.iter().zip(&pam.priors).map(|(a, p)| a * p).sum();
        return pam.points.iter().zip(&pam.priors).map(|(a, p)| p * (a - mean).powi(2)).sum();
    }
    let sr = rho.sqrt();
    let d_min = pam.min_distance().unwrap_or(1.0);
    let width = 1.0 / (2.0 * sr * d_min);
    let logp: Vec<f64> = pam.priors.iter().map(|p| p.ln()).collect();
    let mut logw = vec![0.0; n];
    let mut scratch = Vec::with_capacity(n);
    let mut total = 0.0;
    for k in 0..n {
        let ak = pam.points[k];
        let breaks: Vec<f64> = pam
            .points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &aj)| 0.5 * sr * (aj - ak))
            .collect();
        let edges = quadrature::refined_edges(NOISE_SPAN, &breaks, width);
        let integral = quadrature::composite(&edges, PANEL_ORDER, |t| {
            for j in 0..n {
                let u = t + sr * (ak - pam.points[j]);
                logw[j] = logp[j] - u * u;
            }
            posterior_var_real(&pam.points, &logw, &mut scratch) * (-t * t).exp()
        });
        total += pam.priors[k] * integral / PI.sqrt();
    }
    total
}

fn gh_mmse(c: &Constellation, rho: f64, order: usize) -> f64 {
    let rule = quadrature::hermite(order);
    let sr = rho.sqrt();
    let pts = c.points();
    let logp: Vec<f64> = c.priors().iter().map(|p| p.ln()).collect();
    let mut logw = vec![0.0; pts.len()];
    let mut scratch = Vec::with_capacity(pts.len());
    let mut total = 0.0;
    for (k, &xk) in pts.iter().enumerate() {
        let shifts: Vec<Complex64> = pts.iter().map(|&xj| (xk - xj) * sr).collect();
        let mut acc = 0.0;
        for &(t1, w1) in rule.iter() {
            for &(t2, w2) in rule.iter() {
                let z = Complex64::new(t1, t2);
                for j in 0..pts.len() {
                    logw[j] = logp[j] - (z + shifts[j]).norm_sqr();
                }
                acc += w1 * w2 * posterior_complex(pts, &logw, &mut scratch).1;
            }
        }
        total += c.priors()[k] * acc / PI;
    }
    total
}

fn mc_mmse(c: &Constellation, rho: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cdf: Vec<f64> = c
        .priors()
        .iter()
        .scan(0.0, |s, p| {
            *s += p;
            Some(*s)
        })
        .collect();
    let pts = c.points();
    let logp: Vec<f64> = c.priors().iter().map(|p| p.ln()).collect();
    let mut logw = vec![0.0; pts.len()];
    let mut scratch = Vec::with_capacity(pts.len());
    let sr = rho.sqrt();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut total = 0.0;
    for _ in 0..samples {
        let u: f64 = rng.random();
        let k = cdf.partition_point(|&c| c < u).min(pts.len() - 1);
        let zr: f64 = rng.sample(StandardNormal);
        let zi: f64 = rng.sample(StandardNormal);
        let z = Complex64::new(zr * scale, zi * scale);
        for j in 0..pts.len() {
            logw[j] = logp[j] - (z + (pts[k] - pts[j]) * sr).norm_sqr();
        }
        total += posterior_complex(pts, &logw, &mut scratch).1;
    }
    total / samples as f64
}

/// `omega_s` with the default integration settings.
pub fn omega_s(c: &Constellation, rho: f64) -> Result<f64> {
    omega_s_with(c, rho, &MmseOptions::default())
}

/// MMSE per symbol of `y = sqrt(rho) x + z` under the constellation prior.
pub fn omega_s_with(c: &Constellation, rho: f64, opts: &MmseOptions) -> Result<f64> {
    check_rho(rho)?;
    if c.is_gaussian() {
        return Ok(1.0 / (1.0 + rho));
    }
    if opts.use_separable {
        if let Some((re, im)) = c.separable() {
            return Ok(pam_mmse(&re, rho) + pam_mmse(&im, rho));
        }
    }
    if c.len() > opts.mc_threshold {
        return Ok(mc_mmse(c, rho, opts.mc_samples, opts.mc_seed));
    }
    Ok(gh_mmse(c, rho, opts.gh_order))
}

/// Conditional-mean denoiser for `r = x + CN(0, 1/rho)`: posterior mean and variance.
pub fn eta(c: &Constellation, r: Complex64, rho: f64) -> Result<(Complex64, f64)> {
    check_rho(rho)?;
    if !(r.re.is_finite() && r.im.is_finite()) {
        return Err(Error::domain("observation must be finite"));
    }
    Ok(SymbolDenoiser::new(c).denoise(r, rho))
}

/// Stable `1 - tanh(x)^2`.
pub(crate) fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// A prepared denoiser with closed forms for the common signal sets.
#[derive(Clone, Debug)]
pub struct SymbolDenoiser {
    kind: DenoiserKind,
}

#[derive(Clone, Debug)]
enum DenoiserKind {
    Gaussian,
    Bpsk,
    Qpsk,
    Generic {
        points: Vec<Complex64>,
        logp: Vec<f64>,
    },
}

impl SymbolDenoiser {
    pub fn new(c: &Constellation) -> Self {
        let kind = match c.label() {
            Label::Gaussian => DenoiserKind::Gaussian,
            Label::Bpsk => DenoiserKind::Bpsk,
            Label::Qpsk => DenoiserKind::Qpsk,
            _ => DenoiserKind::Generic {
                points: c.points().to_vec(),
                logp: c.priors().iter().map(|p| p.ln()).collect(),
            },
        };
        SymbolDenoiser { kind }
    }

    /// Posterior mean and variance given `r = x + CN(0, 1/rho)`.
    pub fn denoise(&self, r: Complex64, rho: f64) -> (Complex64, f64) {
        match &self.kind {
            DenoiserKind::Gaussian => (r * (rho / (1.0 + rho)), 1.0 / (1.0 + rho)),
            DenoiserKind::Bpsk => {
                let x = 2.0 * rho * r.re;
                (Complex64::new(x.tanh(), 0.0), sech2(x))
            }
            DenoiserKind::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                let s = std::f64::consts::SQRT_2 * rho;
                let (xr, xi) = (s * r.re, s * r.im);
                (
                    Complex64::new(a * xr.tanh(), a * xi.tanh()),
                    0.5 * (sech2(xr) + sech2(xi)),
                )
            }
            DenoiserKind::Generic { points, logp } => {
                let logw: Vec<f64> = points
                    .iter()
                    .zip(logp)
                    .map(|(x, lp)| lp - rho * (r - x).norm_sqr())
                    .collect();
                posterior_complex(points, &logw, &mut Vec::with_capacity(points.len()))
            }
        }
    }
}

/// `integral_0^rho_star omega_s` in nats, by composite Gauss–Legendre in `ln rho`.
pub fn siso_capacity_nats(c: &Constellation, rho_star: f64) -> Result<f64> {
    check_rho(rho_star)?;
    if c.is_gaussian() {
        return Ok(rho_star.ln_1p());
    }
    if rho_star == 0.0 {
        return Ok(0.0);
    }
    let opts = MmseOptions::default();
    let knee = 1e-3;
    let lin_end = rho_star.min(knee);
    let mut total = 0.0;
    let mut err = None;
    let mut eval = |rho: f64| match omega_s_with(c, rho, &opts) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            0.0
        }
    };
    total += quadrature::composite(&[0.0, lin_end], 8, &mut eval);
    if rho_star > knee {
        let (u0, u1) = (knee.ln(), rho_star.ln());
        let panels = ((u1 - u0) / 0.25).ceil().max(1.0) as usize;
        let edges: Vec<f64> = (0..=panels)
            .map(|i| u0 + (u1 - u0) * i as f64 / panels as f64)
            .collect();
        total += quadrature::composite(&edges, 8, |u| {
            let rho = u.exp();
            eval(rho) * rho
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// SISO constrained capacity `I(x; sqrt(rho*) x + z)` in bits.
pub fn siso_capacity(c: &Constellation, rho_star: f64) -> Result<f64> {
    Ok(siso_capacity_nats(c, rho_star)? / LN_2)
}

/// Tabulated `omega_s` on a log grid, with exact integrals of the interpolant.
///
/// Interpolation is linear in `ln rho`. Below the first node the curve is joined
/// linearly to `omega(0)`; above the last node it decays exponentially with the
/// slope of the final segment (or is zero if it already underflowed).
#[derive(Clone, Debug)]
pub struct MmseTable {
    gaussian: bool,
    entropy: f64,
    omega0: f64,
    u0: f64,
    du: f64,
    w: Vec<f64>,
    /// `cum[i]` = integral of the interpolant from 0 to `exp(u0 + i du)`.
    cum: Vec<f64>,
    tail_rate: f64,
}

pub const TABLE_RHO_MIN: f64 = 1e-4;
pub const TABLE_RHO_MAX: f64 = 1e4;
pub const TABLE_POINTS: usize = 4000;

impl MmseTable {
    pub fn new(c: &Constellation) -> Result<Self> {
        Self::with_grid(c, TABLE_RHO_MIN, TABLE_RHO_MAX, TABLE_POINTS, &MmseOptions::default())
    }

    /// Process-wide cached table for `c` with the default grid.
    pub fn shared(c: &Constellation) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<String, Arc<MmseTable>>>> = OnceLock::new();
        let key = serde_json::to_string(c)?;
        let cache = CACHE.get_or_init(Default::default);
        if let Some(t) = cache.lock().expect("table cache poisoned").get(&key) {
            return Ok(t.clone());
        }
        let table = Arc::new(Self::new(c)?);
        cache
            .lock()
            .expect("table cache poisoned")
            .insert(key, table.clone());
        Ok(table)
    }

    pub fn with_grid(
        c: &Constellation,
        rho_min: f64,
        rho_max: f64,
        points: usize,
        opts: &MmseOptions,
    ) -> Result<Self> {
        if !(rho_min > 0.0 && rho_max > rho_min && points >= 2) {
            return Err(Error::invalid("grid", "need 0 < rho_min < rho_max and >= 2 points"));
        }
        let u0 = rho_min.ln();
        let du = (rho_max.ln() - u0) / (points - 1) as f64;
        let gaussian = c.is_gaussian();
        let mut w = Vec::with_capacity(points);
        for i in 0..points {
            w.push(omega_s_with(c, (u0 + du * i as f64).exp(), opts)?);
        }
        let omega0 = omega_s_with(c, 0.0, opts)?;
        let mut cum = Vec::with_capacity(points);
        cum.push(0.5 * (omega0 + w[0]) * rho_min);
        for i in 1..points {
            let ua = u0 + du * (i - 1) as f64;
            let seg = log_segment_integral(ua, du, w[i - 1], w[i], du);
            cum.push(cum[i - 1] + seg);
        }
        let n = points;
        let rho_hi = (u0 + du * (n - 1) as f64).exp();
        let rho_prev = (u0 + du * (n - 2) as f64).exp();
        let tail_rate = if w[n - 1] > 0.0 && w[n - 2] > w[n - 1] {
            (w[n - 2] / w[n - 1]).ln() / (rho_hi - rho_prev)
        } else {
            f64::INFINITY
        };
        Ok(MmseTable {
            gaussian,
            entropy: c.entropy_nats(),
            omega0,
            u0,
            du,
            w,
            cum,
            tail_rate,
        })
    }

    pub fn is_gaussian(&self) -> bool {
        self.gaussian
    }

    /// Prior entropy in nats (infinite for Gaussian input).
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    pub fn rho_min(&self) -> f64 {
        self.u0.exp()
    }

    pub fn rho_max(&self) -> f64 {
        (self.u0 + self.du * (self.w.len() - 1) as f64).exp()
    }

    pub fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.w
            .iter()
            .enumerate()
            .map(move |(i, &w)| ((self.u0 + self.du * i as f64).exp(), w))
    }

    /// Interpolated `omega_s(rho)`; closed form for Gaussian input.
    pub fn eval(&self, rho: f64) -> f64 {
        if self.gaussian {
            return 1.0 / (1.0 + rho.max(0.0));
        }
        let rho_min = self.rho_min();
        if rho <= rho_min {
            let t = (rho / rho_min).max(0.0);
            return self.omega0 + (self.w[0] - self.omega0) * t;
        }
        let n = self.w.len();
        let rho_max = self.rho_max();
        if rho >= rho_max {
            return if self.tail_rate.is_finite() {
                self.w[n - 1] * (-(rho - rho_max) * self.tail_rate).exp()
            } else {
                0.0
            };
        }
        let x = (rho.ln() - self.u0) / self.du;
        let i = (x.floor() as usize).min(n - 2);
        let f = x - i as f64;
        self.w[i] + (self.w[i + 1] - self.w[i]) * f
    }

    /// `integral_0^rho omega` in nats, exact for the interpolant.
    pub fn integral(&self, rho: f64) -> f64 {
        let rho = rho.max(0.0);
        if self.gaussian {
            return rho.ln_1p();
        }
        let rho_min = self.rho_min();
        if rho <= rho_min {
            let t = rho / rho_min;
            return rho * (self.omega0 + 0.5 * (self.w[0] - self.omega0) * t);
        }
        let n = self.w.len();
        let rho_max = self.rho_max();
        if rho >= rho_max {
            let tail = if self.tail_rate.is_finite() {
                self.w[n - 1] * (1.0 - (-(rho - rho_max) * self.tail_rate).exp()) / self.tail_rate
            } else {
                0.0
            };
            return self.cum[n - 1] + tail;
        }
        let x = (rho.ln() - self.u0) / self.du;
        let i = (x.floor() as usize).min(n - 2);
        let ua = self.u0 + self.du * i as f64;
        self.cum[i] + log_segment_integral(ua, self.du, self.w[i], self.w[i + 1], rho.ln() - ua)
    }

    /// `integral_0^inf omega` in nats (the entropy for a discrete prior).
    pub fn integral_to_infinity(&self) -> f64 {
        if self.gaussian {
            return f64::INFINITY;
        }
        let n = self.w.len();
        let tail = if self.tail_rate.is_finite() {
            self.w[n - 1] / self.tail_rate
        } else {
            0.0
        };
        self.cum[n - 1] + tail
    }
}
