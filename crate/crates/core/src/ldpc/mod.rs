//! LDPC codes: construction, encoding, APP decoding under a Gaussian pseudo-channel
//! and measured decoder transfer curves.

mod alist;
mod construct;
mod decode;
mod degree;
mod encode;
mod modulate;
pub(crate) mod transfer;

use std::sync::OnceLock;

pub use alist::{read_alist, write_alist};
pub use construct::{build_from_degrees, build_irregular, build_regular};
pub use decode::{app_decode, app_decode_with_coset, AppDecoder, AppOutput, BpDecoder, BpOutput};
pub use degree::DegreeDistribution;
pub use encode::Encoder;
pub use modulate::Modulator;
pub use transfer::{decoder_transfer_curve, CodewordSource, TransferOptions};

use crate::error::{Error, Result};

/// Sparse parity-check code: `checks[i]` lists the variables in check `i`.
#[derive(Debug)]
pub struct LdpcCode {
    n: usize,
    vars: Vec<Vec<u32>>,
    checks: Vec<Vec<u32>>,
    encoder: OnceLock<Encoder>,
}

impl Clone for LdpcCode {
    fn clone(&self) -> Self {
        LdpcCode {
            n: self.n,
            vars: self.vars.clone(),
            checks: self.checks.clone(),
            encoder: OnceLock::new(),
        }
    }
}

impl PartialEq for LdpcCode {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.checks == other.checks
    }
}

impl LdpcCode {
    /// Builds a code from check rows; variable indices must be `< n` and distinct per row.
    pub fn from_checks(n: usize, checks: Vec<Vec<u32>>) -> Result<Self> {
        let mut vars = vec![Vec::new(); n];
        for (i, row) in checks.iter().enumerate() {
            let mut seen = row.clone();
            seen.sort_unstable();
            if seen.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid("parity-check", format!("row {i} repeats a variable")));
            }
            for &v in row {
                let v = v as usize;
                if v >= n {
                    return Err(Error::invalid("parity-check", format!("row {i} references column {v} >= {n}")));
                }
                vars[v].push(i as u32);
            }
        }
        Ok(LdpcCode {
            n,
            vars,
            checks,
            encoder: OnceLock::new(),
        })
    }

    /// Code length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of parity checks.
    pub fn m(&self) -> usize {
        self.checks.len()
    }

    pub fn checks(&self) -> &[Vec<u32>] {
        &self.checks
    }

    pub fn vars(&self) -> &[Vec<u32>] {
        &self.vars
    }

    pub fn edges(&self) -> usize {
        self.checks.iter().map(Vec::len).sum()
    }

    pub fn design_rate(&self) -> f64 {
        1.0 - self.m() as f64 / self.n as f64
    }

    pub(crate) fn encoder(&self) -> &Encoder {
        self.encoder.get_or_init(|| Encoder::new(self))
    }

    /// Information length `k = n - rank(H)`.
    pub fn k(&self) -> usize {
        self.encoder().k()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n as f64
    }

    /// Systematic encoding of `k` information bits.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        self.encoder().encode(info)
    }

    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.checks
            .iter()
            .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ bits[v as usize]) == 0)
    }

    /// Empirical edge-perspective degree distribution.
    pub fn degree_distribution(&self) -> DegreeDistribution {
        DegreeDistribution::from_code(self)
    }

    /// Number of 4-cycles (pairs of checks sharing two variables).
    pub fn four_cycles(&self) -> usize {
        let mut count = 0;
        let mut mark = vec![u32::MAX; self.checks.len()];
        let mut hits = vec![0u32; self.checks.len()];
        for (c, row) in self.checks.iter().enumerate() {
            let mut touched = Vec::new();
            for &v in row {
                for &c2 in &self.vars[v as usize] {
                    let c2 = c2 as usize;
                    if c2 <= c {
                        continue;
                    }
                    if mark[c2] != c as u32 {
                        mark[c2] = c as u32;
                        hits[c2] = 0;
                        touched.push(c2);
                    }
                    hits[c2] += 1;
                }
            }
            for c2 in touched {
                let h = hits[c2] as usize;
                count += h * (h - 1) / 2;
            }
        }
        count
    }
}
