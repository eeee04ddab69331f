//! Bit-to-symbol mapping and the bit-level view of the Gaussian pseudo-channel.

use num_complex::Complex64;

use crate::constellation::{Constellation, Label};
use crate::error::{Error, Result};
use crate::mmse::sech2;

/// Labelled mapping; bit LLRs are `ln P(b = 0) / P(b = 1)`.
#[derive(Clone, Debug)]
pub struct Modulator {
    kind: Kind,
    bps: usize,
    /// Point for each label value.
    by_label: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Bpsk,
    Qpsk,
    General,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logsumexp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl Modulator {
    pub fn new(c: &Constellation) -> Result<Self> {
        let labels = c
            .bit_labels()
            .ok_or_else(|| Error::Unsupported(format!("constellation {} has no bit labelling", c.label())))?;
        let bps = c.bits_per_symbol().unwrap_or(0);
        if bps == 0 {
            return Err(Error::Unsupported("single-point constellation".into()));
        }
        let mut by_label = vec![Complex64::new(0.0, 0.0); c.len()];
        for (p, &l) in c.points().iter().zip(labels) {
            by_label[l as usize] = *p;
        }
        let kind = match c.label() {
            Label::Bpsk => Kind::Bpsk,
            Label::Qpsk => Kind::Qpsk,
            _ => Kind::General,
        };
        Ok(Modulator { kind, bps, by_label })
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bps
    }

    /// Maps bits (most significant first within a symbol) to symbols.
    pub fn map(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        if bits.len() % self.bps != 0 {
            return Err(Error::Dimension(format!(
                "{} bits is not a multiple of {} bits per symbol",
                bits.len(),
                self.bps
            )));
        }
        Ok(bits
            .chunks(self.bps)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| acc << 1 | (b & 1) as usize);
                self.by_label[label]
            })
            .collect())
    }

    /// Channel LLRs of every bit for `r = x + CN(0, 1/rho)`.
    pub fn bit_llrs(&self, r: &[Complex64], rho: f64, out: &mut [f64]) {
        match self.kind {
            Kind::Bpsk => {
                for (o, ri) in out.iter_mut().zip(r) {
                    *o = 4.0 * rho * ri.re;
                }
            }
            Kind::Qpsk => {
                let s = 2.0 * std::f64::consts::SQRT_2 * rho;
                for (pair, ri) in out.chunks_mut(2).zip(r) {
                    pair[0] = s * ri.re;
                    pair[1] = s * ri.im;
                }
            }
            Kind::General => {
                let q = self.by_label.len();
                let mut metric = vec![0.0; q];
                for (bits, ri) in out.chunks_mut(self.bps).zip(r) {
                    for (l, x) in self.by_label.iter().enumerate() {
                        metric[l] = -rho * (ri - x).norm_sqr();
                    }
                    for (k, o) in bits.iter_mut().enumerate() {
                        let shift = self.bps - 1 - k;
                        let (mut l0, mut l1) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                        for (l, &m) in metric.iter().enumerate() {
                            if l >> shift & 1 == 0 {
                                l0 = logsumexp(l0, m);
                            } else {
                                l1 = logsumexp(l1, m);
                            }
                        }
                        *o = l0 - l1;
                    }
                }
            }
        }
    }

    /// Symbol posterior mean and variance from bit LLRs, treating bits within a symbol as independent.
    pub fn symbol_stats(&self, llr: &[f64], mean: &mut [Complex64], var: &mut [f64]) {
        match self.kind {
            Kind::Bpsk => {
                for ((l, m), v) in llr.iter().zip(mean.iter_mut()).zip(var.iter_mut()) {
                    *m = Complex64::new((0.5 * l).tanh(), 0.0);
                    *v = sech2(0.5 * l);
                }
            }
            Kind::Qpsk => {
                let a = std::f64::consts::FRAC_1_SQRT_2;
                for ((pair, m), v) in llr.chunks(2).zip(mean.iter_mut()).zip(var.iter_mut()) {
                    let (h0, h1) = (0.5 * pair[0], 0.5 * pair[1]);
                    *m = Complex64::new(a * h0.tanh(), a * h1.tanh());
                    *v = 0.5 * (sech2(h0) + sech2(h1));
                }
            }
            Kind::General => {
                let q = self.by_label.len();
                let mut logp = vec![0.0; q];
                for ((bits, m), v) in llr.chunks(self.bps).zip(mean.iter_mut()).zip(var.iter_mut()) {
                    for (l, lp) in logp.iter_mut().enumerate() {
                        *lp = bits
                            .iter()
                            .enumerate()
                            .map(|(k, &b)| {
                                // ln P(bit) with P(0) = 1 / (1 + e^{-L})
                                if l >> (self.bps - 1 - k) & 1 == 0 {
                                    -softplus(-b)
                                } else {
                                    -softplus(b)
                                }
                            })
                            .sum();
                    }
                    let (kbest, _) = logp
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
                    let xk = self.by_label[kbest];
                    let mut delta = Complex64::new(0.0, 0.0);
                    for (l, lp) in logp.iter().enumerate() {
                        delta += (self.by_label[l] - xk) * lp.exp();
                    }
                    let mut s = 0.0;
                    for (l, lp) in logp.iter().enumerate() {
                        s += lp.exp() * (self.by_label[l] - xk - delta).norm_sqr();
                    }
                    *m = xk + delta;
                    *v = s;
                }
            }
        }
    }
}
