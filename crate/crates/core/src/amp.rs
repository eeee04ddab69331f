//! Vector AMP receiver for `y = A x + n` with IID `CN(0, 1/M)` matrices.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::curve::MseTransfer;
use crate::ldpc::{AppDecoder, CodewordSource, LdpcCode, Modulator};
use crate::ldpc::transfer::{draw_codeword, scramble};
use crate::error::{Error, Result};
use crate::mmse::SymbolDenoiser;
use crate::rng::sub_rng;
use crate::se::{phi, SystemConfig};

const STREAM_MATRIX: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_SYMBOLS: u64 = 3;

/// Dense complex matrix in single precision, row-major, split into real and imaginary planes.
#[derive(Clone, Debug)]
pub struct Matrix {
    m: usize,
    n: usize,
    re: Vec<f32>,
    im: Vec<f32>,
}

const LANES: usize = 8;

impl Matrix {
    /// IID `CN(0, 1/m)` entries.
    pub fn gaussian<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Self {
        let sd = (0.5 / m as f64).sqrt();
        let mut re = Vec::with_capacity(m * n);
        let mut im = Vec::with_capacity(m * n);
        for _ in 0..m * n {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            re.push((a * sd) as f32);
            im.push((b * sd) as f32);
        }
        Matrix { m, n, re, im }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.n + j;
        Complex64::new(self.re[k] as f64, self.im[k] as f64)
    }

    /// `A x` accumulated in double precision.
    pub fn mul_exact(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.m)
            .map(|i| {
                let row = i * self.n;
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, xj) in x.iter().enumerate() {
                    acc += Complex64::new(self.re[row + j] as f64, self.im[row + j] as f64) * xj;
                }
                acc
            })
            .collect()
    }

    /// `out = A x`.
    pub fn mul(&self, x: &[Complex64], out: &mut [Complex64]) {
        let xr: Vec<f32> = x.iter().map(|c| c.re as f32).collect();
        let xi: Vec<f32> = x.iter().map(|c| c.im as f32).collect();
        for (i, o) in out.iter_mut().enumerate() {
            let row = i * self.n..(i + 1) * self.n;
            let (sr, si) = cdot(&self.re[row.clone()], &self.im[row], &xr, &xi);
            *o = Complex64::new(sr, si);
        }
    }

    /// `out = A^H z`.
    pub fn mul_adjoint(&self, z: &[Complex64], out: &mut [Complex64]) {
        const FLUSH: usize = 256;
        let mut acc_r = vec![0f32; self.n];
        let mut acc_i = vec![0f32; self.n];
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for (i, zi) in z.iter().enumerate() {
            let (zr, zim) = (zi.re as f32, zi.im as f32);
            let row = i * self.n..(i + 1) * self.n;
            let (ar, ai) = (&self.re[row.clone()], &self.im[row]);
            for j in 0..self.n {
                acc_r[j] += ar[j] * zr + ai[j] * zim;
                acc_i[j] += ar[j] * zim - ai[j] * zr;
            }
            if (i + 1) % FLUSH == 0 || i + 1 == z.len() {
                for j in 0..self.n {
                    out[j] += Complex64::new(acc_r[j] as f64, acc_i[j] as f64);
                    acc_r[j] = 0.0;
                    acc_i[j] = 0.0;
                }
            }
        }
    }
}

fn cdot(ar: &[f32], ai: &[f32], xr: &[f32], xi: &[f32]) -> (f64, f64) {
    let mut sr = [0f32; LANES];
    let mut si = [0f32; LANES];
    let chunks = ar.len() / LANES;
    for c in 0..chunks {
        let o = c * LANES;
        let (a, b, x, y) = (&ar[o..o + LANES], &ai[o..o + LANES], &xr[o..o + LANES], &xi[o..o + LANES]);
        for l in 0..LANES {
            sr[l] += a[l] * x[l] - b[l] * y[l];
            si[l] += a[l] * y[l] + b[l] * x[l];
        }
    }
    let mut tr: f64 = sr.iter().map(|&v| v as f64).sum();
    let mut ti: f64 = si.iter().map(|&v| v as f64).sum();
    for j in chunks * LANES..ar.len() {
        tr += (ar[j] * xr[j] - ai[j] * xi[j]) as f64;
        ti += (ar[j] * xi[j] + ai[j] * xr[j]) as f64;
    }
    (tr, ti)
}

/// One realisation of the linear system.
#[derive(Clone, Debug)]
pub struct ChannelInstance {
    pub cfg: SystemConfig,
    pub a: Arc<Matrix>,
    pub x: Vec<Complex64>,
    /// Unit-variance noise; the channel adds `sqrt(sigma2) * w`.
    pub w: Vec<Complex64>,
    pub y: Vec<Complex64>,
}

impl ChannelInstance {
    pub fn noise(&self) -> Vec<Complex64> {
        let s = self.cfg.sigma2.sqrt();
        self.w.iter().map(|w| w * s).collect()
    }

    /// Same matrix, symbols and noise shape at a different noise level.
    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        let mut cfg = SystemConfig::new(self.cfg.beta, sigma2)?;
        cfg.n = self.cfg.n;
        cfg.m = self.cfg.m;
        Ok(Self::assemble(cfg, self.a.clone(), self.x.clone(), self.w.clone()))
    }

    /// Same matrix and noise with new transmitted symbols.
    pub fn with_symbols(&self, x: Vec<Complex64>) -> Result<Self> {
        if x.len() != self.x.len() {
            return Err(Error::Dimension(format!("expected {} symbols, got {}", self.x.len(), x.len())));
        }
        Ok(Self::assemble(self.cfg, self.a.clone(), x, self.w.clone()))
    }

    fn assemble(cfg: SystemConfig, a: Arc<Matrix>, x: Vec<Complex64>, w: Vec<Complex64>) -> Self {
        let s = cfg.sigma2.sqrt();
        let mut y = a.mul_exact(&x);
        for (yi, wi) in y.iter_mut().zip(&w) {
            *yi += wi * s;
        }
        ChannelInstance { cfg, a, x, w, y }
    }
}

/// IID symbols drawn from the constellation prior (or `CN(0,1)` for Gaussian input).
pub fn sample_symbols<R: Rng + ?Sized>(c: &Constellation, n: usize, rng: &mut R) -> Vec<Complex64> {
    if c.is_gaussian() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        return (0..n)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex64::new(a * s, b * s)
            })
            .collect();
    }
    let mut cdf = Vec::with_capacity(c.len());
    let mut acc = 0.0;
    for p in c.priors() {
        acc += p;
        cdf.push(acc);
    }
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            c.points()[cdf.partition_point(|&q| q < u).min(c.len() - 1)]
        })
        .collect()
}

/// Draws `A` and the noise for given symbols; deterministic in `seed`.
pub fn sample_system(cfg: &SystemConfig, symbols: &[Complex64], seed: u64) -> Result<ChannelInstance> {
    let (n, m) = cfg.dims()?;
    if symbols.len() != n {
        return Err(Error::Dimension(format!("N = {n} but {} symbols given", symbols.len())));
    }
    let a = Arc::new(Matrix::gaussian(m, n, &mut sub_rng(seed, 0, STREAM_MATRIX)));
    let mut rng = sub_rng(seed, 0, STREAM_NOISE);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let w = (0..m)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Complex64::new(a * s, b * s)
        })
        .collect();
    Ok(ChannelInstance::assemble(*cfg, a, symbols.to_vec(), w))
}

/// The non-linear step: posterior means and variances for `r = x + CN(0, 1/rho)`.
pub trait Denoise {
    fn denoise(&mut self, r: &[Complex64], rho: f64, mean: &mut [Complex64], var: &mut [f64]) -> Result<()>;

    /// True once the estimate is final (a decoder whose checks are all satisfied).
    fn done(&self) -> bool {
        false
    }
}

/// Symbol-by-symbol conditional-mean denoiser.
#[derive(Clone, Debug)]
pub struct SbsDenoiser(SymbolDenoiser);

impl SbsDenoiser {
    pub fn new(c: &Constellation) -> Self {
        SbsDenoiser(SymbolDenoiser::new(c))
    }
}

impl Denoise for SbsDenoiser {
    fn denoise(&mut self, r: &[Complex64], rho: f64, mean: &mut [Complex64], var: &mut [f64]) -> Result<()> {
        for ((ri, m), v) in r.iter().zip(mean.iter_mut()).zip(var.iter_mut()) {
            let (a, b) = self.0.denoise(*ri, rho);
            *m = a;
            *v = b;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmpOptions {
    pub max_iter: usize,
    /// Stop when the tracked MSE changes by less than this.
    pub tol: f64,
    pub onsager: bool,
    /// Abort when the tracked MSE exceeds this multiple of its running minimum.
    pub blowup_factor: f64,
    /// Largest SINR handed to the denoiser.
    pub rho_cap: f64,
}

impl Default for AmpOptions {
    fn default() -> Self {
        AmpOptions {
            max_iter: 50,
            tol: 1e-6,
            onsager: true,
            blowup_factor: 10.0,
            rho_cap: 1e12,
        }
    }
}

/// Per-iteration state of the receiver.
#[derive(Clone, Debug)]
pub struct AmpState {
    pub s: Vec<Complex64>,
    pub r: Vec<Complex64>,
    pub v_hat: f64,
    pub rho_hat: f64,
    /// `r - s` of the previous iteration (the matched-filter residual term).
    pub onsager_prev: Vec<Complex64>,
    /// Average denoiser derivative from the previous iteration.
    pub div_prev: f64,
    pub iter: usize,
    min_v_hat: f64,
}

impl AmpState {
    pub fn new(n: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        AmpState {
            s: vec![zero; n],
            r: vec![zero; n],
            v_hat: 1.0,
            rho_hat: 0.0,
            onsager_prev: vec![zero; n],
            div_prev: 0.0,
            iter: 0,
            min_v_hat: 1.0,
        }
    }
}

/// One linear step with Onsager correction followed by the denoiser.
pub fn amp_iteration<D: Denoise + ?Sized>(
    mut state: AmpState,
    inst: &ChannelInstance,
    nld: &mut D,
    opts: &AmpOptions,
) -> Result<AmpState> {
    let n = state.s.len();
    if n != inst.x.len() {
        return Err(Error::Dimension(format!("state length {n} vs N = {}", inst.x.len())));
    }
    let cfg = &inst.cfg;
    let rho = phi(cfg, state.v_hat).min(opts.rho_cap);
    let mut resid = vec![Complex64::new(0.0, 0.0); inst.y.len()];
    inst.a.mul(&state.s, &mut resid);
    for (z, y) in resid.iter_mut().zip(&inst.y) {
        *z = y - *z;
    }
    let mut g = vec![Complex64::new(0.0, 0.0); n];
    inst.a.mul_adjoint(&resid, &mut g);
    let c = if opts.onsager && state.iter > 0 {
        cfg.beta * state.div_prev
    } else {
        0.0
    };
    let mut r = Vec::with_capacity(n);
    for j in 0..n {
        r.push(state.s[j] + g[j] + state.onsager_prev[j] * c);
    }
    if r.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NumericBlowup {
            iteration: state.iter,
            reason: "non-finite pseudo-observation".into(),
            trace: Box::default(),
        });
    }
    let mut mean = vec![Complex64::new(0.0, 0.0); n];
    let mut var = vec![0.0; n];
    nld.denoise(&r, rho, &mut mean, &mut var)?;
    let v_new = (var.iter().sum::<f64>() / n as f64).clamp(0.0, 1.0);
    if !v_new.is_finite() || v_new > opts.blowup_factor * state.min_v_hat.max(1e-8) {
        return Err(Error::NumericBlowup {
            iteration: state.iter,
            reason: format!("tracked MSE rose to {v_new:.3e} from a minimum of {:.3e}", state.min_v_hat),
            trace: Box::default(),
        });
    }
    for j in 0..n {
        // Matched-filter residual A^H z, before the denoiser replaces s.
        state.onsager_prev[j] = r[j] - state.s[j];
    }
    state.div_prev = rho * v_new;
    state.s = mean;
    state.r = r;
    state.rho_hat = rho;
    state.v_hat = v_new;
    state.min_v_hat = state.min_v_hat.min(v_new);
    state.iter += 1;
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmpRecord {
    pub iter: usize,
    /// State-evolution prediction (or the tracked values when no transfer is supplied).
    pub rho_se: f64,
    pub v_se: f64,
    /// Empirical MSE of the estimate entering this iteration.
    pub mse_s: f64,
    /// Empirical MSE of the pseudo-observation produced by this iteration.
    pub mse_r: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AmpTrace {
    pub records: Vec<AmpRecord>,
    /// Empirical MSE of the final estimate.
    pub final_mse: f64,
    /// Tracked MSE after the last iteration.
    pub final_v_hat: f64,
}

impl AmpTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,rho_se,v_se,mse_s,mse_r")?;
        for r in &self.records {
            writeln!(w, "{},{:.12e},{:.12e},{:.12e},{:.12e}", r.iter, r.rho_se, r.v_se, r.mse_s, r.mse_r)?;
        }
        Ok(())
    }
}

pub fn mse(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len().max(1) as f64
}

/// Runs AMP on an instance.
///
/// `se` supplies the transfer for the predicted columns; `observe` sees `(t, r^t, s^t)`
/// after every iteration.
pub fn run_amp<D, F>(
    inst: &ChannelInstance,
    nld: &mut D,
    opts: &AmpOptions,
    se: Option<&dyn MseTransfer>,
    mut observe: F,
) -> Result<(Vec<Complex64>, AmpTrace)>
where
    D: Denoise + ?Sized,
    F: FnMut(usize, &[Complex64], &[Complex64]),
{
    let cfg = inst.cfg;
    let mut state = AmpState::new(inst.x.len());
    let mut trace = AmpTrace::default();
    let mut v_se = 1.0;
    for t in 0..opts.max_iter {
        let mse_s = mse(&state.s, &inst.x);
        let prev_v = state.v_hat;
        let rho_se_pred = phi(&cfg, v_se);
        state = match amp_iteration(state, inst, nld, opts) {
            Ok(s) => s,
            Err(Error::NumericBlowup { iteration, reason, .. }) => {
                trace.final_mse = f64::NAN;
                return Err(Error::NumericBlowup {
                    iteration,
                    reason,
                    trace: Box::new(trace),
                });
            }
            Err(e) => return Err(e),
        };
        let (rho_se, v_rec) = match se {
            Some(_) => (rho_se_pred, v_se),
            None => (state.rho_hat, prev_v),
        };
        trace.records.push(AmpRecord {
            iter: t,
            rho_se,
            v_se: v_rec,
            mse_s,
            mse_r: mse(&state.r, &inst.x),
        });
        observe(t, &state.r, &state.s);
        if let Some(f) = se {
            v_se = f.mse(rho_se_pred);
        }
        if nld.done() || (state.v_hat - prev_v).abs() < opts.tol {
            break;
        }
    }
    trace.final_mse = mse(&state.s, &inst.x);
    trace.final_v_hat = state.v_hat;
    Ok((state.s, trace))
}

/// Uncoded AMP with the symbol-wise denoiser on a freshly sampled system.
pub fn run_amp_uncoded(
    cfg: &SystemConfig,
    c: &Constellation,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<Complex64>, AmpTrace)> {
    let (n, _) = cfg.dims()?;
    let x = sample_symbols(c, n, &mut sub_rng(seed, 0, STREAM_SYMBOLS));
    let inst = sample_system(cfg, &x, seed)?;
    let table = crate::mmse::MmseTable::shared(c)?;
    if cfg.sigma2 > 0.0 {
        let (holds, xs) = crate::se::single_crossing_check(cfg, &*table)?;
        if !holds {
            log::warn!("single-crossing property fails (crossings at {xs:?}); AMP may stall");
        }
    }
    let opts = AmpOptions {
        max_iter,
        tol,
        ..AmpOptions::default()
    };
    run_amp(&inst, &mut SbsDenoiser::new(c), &opts, Some(&*table), |_, _, _| {})
}

/// Knobs for coded AMP: outer AMP iterations, inner BP iterations per decoder call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodedAmpOptions {
    pub amp: AmpOptions,
    pub max_bp_iters: usize,
    pub source: CodewordSource,
}

impl Default for CodedAmpOptions {
    fn default() -> Self {
        CodedAmpOptions {
            amp: AmpOptions {
                max_iter: 60,
                ..AmpOptions::default()
            },
            max_bp_iters: 50,
            source: CodewordSource::AllZeroCoset,
        }
    }
}

/// Outcome of one coded transmission.
#[derive(Clone, Debug, PartialEq)]
pub struct CodedRun {
    /// Decoded code bits.
    pub bits: Vec<u8>,
    pub trace: AmpTrace,
    /// Parity satisfied and every bit correct.
    pub success: bool,
    pub bit_errors: usize,
}

/// A coded frame: code bits, scrambling word and the mapped symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct CodedFrame {
    pub bits: Vec<u8>,
    pub coset: Vec<u8>,
    pub x: Vec<Complex64>,
}

/// Draws a codeword and coset for frame `seed`.
pub fn coded_frame(code: &LdpcCode, c: &Constellation, seed: u64, source: CodewordSource) -> Result<CodedFrame> {
    let modulator = Modulator::new(c)?;
    let (bits, coset) = draw_codeword(code, source, &mut sub_rng(seed, 0, STREAM_SYMBOLS))?;
    let x = modulator.map(&scramble(&bits, &coset))?;
    Ok(CodedFrame { bits, coset, x })
}

/// Coded AMP on an existing instance carrying `frame`.
pub fn run_amp_coded_on(
    inst: &ChannelInstance,
    code: &LdpcCode,
    c: &Constellation,
    frame: &CodedFrame,
    opts: &CodedAmpOptions,
) -> Result<CodedRun> {
    let mut dec = AppDecoder::new(code, c, Some(frame.coset.clone()), opts.max_bp_iters)?;
    let (_, trace) = run_amp(inst, &mut dec, &opts.amp, None, |_, _, _| {})?;
    let out = dec
        .last()
        .ok_or_else(|| Error::invalid("max_iter", "coded AMP needs at least one iteration"))?;
    let bit_errors = out.hard_bits.iter().zip(&frame.bits).filter(|(a, b)| a != b).count();
    Ok(CodedRun {
        bits: out.hard_bits.clone(),
        trace,
        success: out.parity_ok && bit_errors == 0,
        bit_errors,
    })
}

/// Coded AMP with the APP decoder as denoiser on a freshly sampled system.
///
/// The system size follows the code: `N = n / bits per symbol`.
pub fn run_amp_coded(
    cfg: &SystemConfig,
    code: &LdpcCode,
    c: &Constellation,
    seed: u64,
    opts: &CodedAmpOptions,
) -> Result<CodedRun> {
    let frame = coded_frame(code, c, seed, opts.source)?;
    let n_sym = frame.x.len();
    let cfg = match cfg.n {
        Some(n) if n == n_sym => *cfg,
        Some(n) => {
            return Err(Error::Dimension(format!("N = {n} but the code carries {n_sym} symbols")));
        }
        None => cfg.with_n(n_sym)?,
    };
    let inst = sample_system(&cfg, &frame.x, seed)?;
    run_amp_coded_on(&inst, code, c, &frame, opts)
}
