//! Flooding sum-product decoding and the APP denoiser built on it.

use num_complex::Complex64;

use super::{LdpcCode, Modulator};
use crate::amp::Denoise;
use crate::constellation::Constellation;
use crate::error::{Error, Result};

const LLR_MAX: f64 = 40.0;
const TANH_MAX: f64 = 1.0 - 1e-15;

/// Prepared edge structure plus message buffers for one code.
#[derive(Clone, Debug)]
pub struct BpDecoder {
    n: usize,
    check_ptr: Vec<usize>,
    edge_var: Vec<u32>,
    var_ptr: Vec<usize>,
    var_edge: Vec<u32>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    tmp: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpOutput {
    pub post_llr: Vec<f64>,
    pub hard: Vec<u8>,
    pub parity_ok: bool,
    pub iterations: usize,
}

impl BpDecoder {
    pub fn new(code: &LdpcCode) -> Self {
        let mut check_ptr = Vec::with_capacity(code.m() + 1);
        let mut edge_var = Vec::with_capacity(code.edges());
        check_ptr.push(0);
        for row in code.checks() {
            edge_var.extend_from_slice(row);
            check_ptr.push(edge_var.len());
        }
        let n = code.n();
        let mut deg = vec![0usize; n];
        for &v in &edge_var {
            deg[v as usize] += 1;
        }
        let mut var_ptr = vec![0; n + 1];
        for v in 0..n {
            var_ptr[v + 1] = var_ptr[v] + deg[v];
        }
        let mut fill = var_ptr.clone();
        let mut var_edge = vec![0u32; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edge[fill[v as usize]] = e as u32;
            fill[v as usize] += 1;
        }
        let e = edge_var.len();
        BpDecoder {
            n,
            check_ptr,
            edge_var,
            var_ptr,
            var_edge,
            v2c: vec![0.0; e],
            c2v: vec![0.0; e],
            tmp: vec![0.0; e],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn syndrome_ok(&self, hard: &[u8]) -> bool {
        self.check_ptr
            .windows(2)
            .all(|w| self.edge_var[w[0]..w[1]].iter().fold(0u8, |a, &v| a ^ hard[v as usize]) == 0)
    }

    fn harden(post: &[f64], hard: &mut [u8]) -> bool {
        let mut decided = true;
        for (h, &p) in hard.iter_mut().zip(post) {
            *h = (p < 0.0) as u8;
            decided &= p != 0.0;
        }
        decided
    }

    /// Runs up to `max_iter` flooding iterations, stopping once all checks are satisfied.
    pub fn decode(&mut self, ch: &[f64], max_iter: usize) -> BpOutput {
        let n = self.n;
        let mut post = ch.to_vec();
        let mut hard = vec![0u8; n];
        if Self::harden(&post, &mut hard) && self.syndrome_ok(&hard) {
            return BpOutput {
                post_llr: post,
                hard,
                parity_ok: true,
                iterations: 0,
            };
        }
        for (e, &v) in self.edge_var.iter().enumerate() {
            self.v2c[e] = ch[v as usize];
        }
        let mut parity_ok = false;
        let mut iterations = 0;
        for it in 0..max_iter {
            iterations = it + 1;
            for w in self.check_ptr.windows(2) {
                let (a, b) = (w[0], w[1]);
                let mut p = 1.0;
                for e in a..b {
                    self.tmp[e] = p;
                    p *= (0.5 * self.v2c[e].clamp(-LLR_MAX, LLR_MAX)).tanh();
                }
                let mut p = 1.0;
                for e in (a..b).rev() {
                    let t = (0.5 * self.v2c[e].clamp(-LLR_MAX, LLR_MAX)).tanh();
                    let x = (self.tmp[e] * p).clamp(-TANH_MAX, TANH_MAX);
                    self.c2v[e] = ((1.0 + x) / (1.0 - x)).ln();
                    p *= t;
                }
            }
            for v in 0..n {
                let edges = &self.var_edge[self.var_ptr[v]..self.var_ptr[v + 1]];
                let total = ch[v] + edges.iter().map(|&e| self.c2v[e as usize]).sum::<f64>();
                post[v] = total;
                for &e in edges {
                    self.v2c[e as usize] = total - self.c2v[e as usize];
                }
            }
            if Self::harden(&post, &mut hard) && self.syndrome_ok(&hard) {
                parity_ok = true;
                break;
            }
        }
        BpOutput {
            post_llr: post,
            hard,
            parity_ok,
            iterations,
        }
    }
}

/// Symbol-level result of APP decoding.
#[derive(Clone, Debug, PartialEq)]
pub struct AppOutput {
    pub means: Vec<Complex64>,
    pub vars: Vec<f64>,
    /// Hard decisions on the code bits (scrambling removed).
    pub hard_bits: Vec<u8>,
    pub parity_ok: bool,
    pub iterations: usize,
}

/// APP decoding of `r = x + CN(0, 1/rho)` where `x` carries the code bits XOR `coset`.
pub fn app_decode_with_coset(
    bp: &mut BpDecoder,
    modulator: &Modulator,
    r: &[Complex64],
    rho: f64,
    coset: Option<&[u8]>,
    max_bp_iters: usize,
) -> Result<AppOutput> {
    let n = bp.n();
    if r.len() * modulator.bits_per_symbol() != n {
        return Err(Error::Dimension(format!(
            "{} symbols x {} bits do not cover a length-{n} code",
            r.len(),
            modulator.bits_per_symbol()
        )));
    }
    if coset.is_some_and(|d| d.len() != n) {
        return Err(Error::Dimension("coset length differs from code length".into()));
    }
    let flip = |llr: &mut [f64]| {
        if let Some(d) = coset {
            for (l, &b) in llr.iter_mut().zip(d) {
                if b & 1 == 1 {
                    *l = -*l;
                }
            }
        }
    };
    let mut llr = vec![0.0; n];
    modulator.bit_llrs(r, rho, &mut llr);
    flip(&mut llr);
    let out = bp.decode(&llr, max_bp_iters);
    let mut post = out.post_llr;
    flip(&mut post);
    let mut means = vec![Complex64::new(0.0, 0.0); r.len()];
    let mut vars = vec![0.0; r.len()];
    modulator.symbol_stats(&post, &mut means, &mut vars);
    Ok(AppOutput {
        means,
        vars,
        hard_bits: out.hard,
        parity_ok: out.parity_ok,
        iterations: out.iterations,
    })
}

/// APP decoding without scrambling.
pub fn app_decode(
    code: &LdpcCode,
    r: &[Complex64],
    rho: f64,
    c: &Constellation,
    max_bp_iters: usize,
) -> Result<AppOutput> {
    let modulator = Modulator::new(c)?;
    app_decode_with_coset(&mut BpDecoder::new(code), &modulator, r, rho, None, max_bp_iters)
}

/// The APP decoder as an AMP denoiser.
#[derive(Clone, Debug)]
pub struct AppDecoder {
    bp: BpDecoder,
    modulator: Modulator,
    coset: Option<Vec<u8>>,
    max_bp_iters: usize,
    last: Option<AppOutput>,
}

impl AppDecoder {
    pub fn new(code: &LdpcCode, c: &Constellation, coset: Option<Vec<u8>>, max_bp_iters: usize) -> Result<Self> {
        let modulator = Modulator::new(c)?;
        if code.n() % modulator.bits_per_symbol() != 0 {
            return Err(Error::Dimension(format!(
                "code length {} is not a multiple of {} bits per symbol",
                code.n(),
                modulator.bits_per_symbol()
            )));
        }
        Ok(AppDecoder {
            bp: BpDecoder::new(code),
            modulator,
            coset,
            max_bp_iters,
            last: None,
        })
    }

    pub fn last(&self) -> Option<&AppOutput> {
        self.last.as_ref()
    }
}

impl Denoise for AppDecoder {
    fn denoise(&mut self, r: &[Complex64], rho: f64, mean: &mut [Complex64], var: &mut [f64]) -> Result<()> {
        let out = app_decode_with_coset(
            &mut self.bp,
            &self.modulator,
            r,
            rho,
            self.coset.as_deref(),
            self.max_bp_iters,
        )?;
        mean.copy_from_slice(&out.means);
        var.copy_from_slice(&out.vars);
        self.last = Some(out);
        Ok(())
    }

    fn done(&self) -> bool {
        self.last.as_ref().is_some_and(|o| o.parity_ok)
    }
}

#[cfg(test)]
mod tests {
    use super::super::build_regular;
    use super::*;

    #[test]
    fn zero_sinr_gives_prior() {
        let code = build_regular(240, 3, 6, 2).unwrap();
        let r = vec![Complex64::new(0.3, -0.2); 120];
        let out = app_decode(&code, &r, 0.0, &Constellation::qpsk(), 20).unwrap();
        assert!(out.means.iter().all(|m| m.norm() < 1e-12));
        assert!(out.vars.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(!out.parity_ok);
    }

    #[test]
    fn huge_sinr_recovers_codeword() {
        let code = build_regular(240, 3, 6, 2).unwrap();
        let info: Vec<u8> = (0..code.k()).map(|i| (i % 3 == 0) as u8).collect();
        let cw = code.encode(&info).unwrap();
        let m = Modulator::new(&Constellation::qpsk()).unwrap();
        let x = m.map(&cw).unwrap();
        let out = app_decode(&code, &x, 1e6, &Constellation::qpsk(), 20).unwrap();
        assert!(out.parity_ok);
        assert_eq!(out.hard_bits, cw);
        for (a, b) in out.means.iter().zip(&x) {
            assert!((a - b).norm() < 1e-9);
        }
        assert!(out.vars.iter().all(|&v| v < 1e-9));
    }

    #[test]
    fn bp_corrects_a_few_flips() {
        let code = build_regular(1200, 3, 6, 9).unwrap();
        let mut llr = vec![4.0; 1200];
        for i in [5, 300, 777] {
            llr[i] = -1.0;
        }
        let out = BpDecoder::new(&code).decode(&llr, 50);
        assert!(out.parity_ok);
        assert!(out.hard.iter().all(|&b| b == 0));
    }
}
