//! Monte Carlo estimate of the APP decoder's MSE transfer under a Gaussian pseudo-channel.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{app_decode_with_coset, BpDecoder, LdpcCode, Modulator};
use crate::constellation::Constellation;
use crate::curve::TransferCurve;
use crate::error::{Error, Result};
use crate::par::par_map;
use crate::rng::sub_rng;

const STREAM_TRANSFER: u64 = 11;

/// Which codewords are simulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodewordSource {
    /// The all-zero codeword scrambled by a random coset word.
    #[default]
    AllZeroCoset,
    /// Random information bits, encoded, then scrambled.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferOptions {
    pub max_bp_iters: usize,
    pub seed: u64,
    pub source: CodewordSource,
    pub workers: usize,
}

impl Default for TransferOptions {
    fn default() -> Self {
        TransferOptions {
            max_bp_iters: 200,
            seed: 0,
            source: CodewordSource::AllZeroCoset,
            workers: 1,
        }
    }
}

/// Draws the transmitted code bits (before scrambling) and the coset word.
pub(crate) fn draw_codeword<R: Rng>(code: &LdpcCode, source: CodewordSource, rng: &mut R) -> Result<(Vec<u8>, Vec<u8>)> {
    let bits = match source {
        CodewordSource::AllZeroCoset => vec![0u8; code.n()],
        CodewordSource::Random => {
            let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
            code.encode(&info)?
        }
    };
    let coset = (0..code.n()).map(|_| rng.random_range(0..2u8)).collect();
    Ok((bits, coset))
}

pub(crate) fn scramble(bits: &[u8], coset: &[u8]) -> Vec<u8> {
    bits.iter().zip(coset).map(|(a, b)| a ^ b).collect()
}

/// Mean per-symbol MSE of the decoder's posterior means at each `rho`, with standard errors.
pub fn decoder_transfer_curve(
    code: &LdpcCode,
    c: &Constellation,
    rho_grid: &[f64],
    trials: usize,
    opts: &TransferOptions,
) -> Result<TransferCurve> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let modulator = Modulator::new(c)?;
    let bps = modulator.bits_per_symbol();
    if code.n() % bps != 0 {
        return Err(Error::Dimension(format!("code length {} is not a multiple of {bps}", code.n())));
    }
    let jobs = rho_grid.len() * trials;
    let results = par_map(jobs, opts.workers, |job| -> Result<f64> {
        let rho = rho_grid[job / trials];
        let mut rng = sub_rng(opts.seed, job as u64, STREAM_TRANSFER);
        let (bits, coset) = draw_codeword(code, opts.source, &mut rng)?;
        let x = modulator.map(&scramble(&bits, &coset))?;
        let s = (0.5 / rho).sqrt();
        let r: Vec<Complex64> = x
            .iter()
            .map(|xi| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                xi + Complex64::new(a * s, b * s)
            })
            .collect();
        let mut bp = BpDecoder::new(code);
        let out = app_decode_with_coset(&mut bp, &modulator, &r, rho, Some(&coset), opts.max_bp_iters)?;
        Ok(crate::amp::mse(&out.means, &x))
    });
    let results: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    let mut v = Vec::with_capacity(rho_grid.len());
    let mut se = Vec::with_capacity(rho_grid.len());
    for chunk in results.chunks(trials) {
        let mean = chunk.iter().sum::<f64>() / trials as f64;
        let var = if trials > 1 {
            chunk.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
        } else {
            0.0
        };
        v.push(mean.min(1.0));
        se.push((var / trials as f64).sqrt());
    }
    TransferCurve::measured(rho_grid.to_vec(), v, se, 1.0)
}
