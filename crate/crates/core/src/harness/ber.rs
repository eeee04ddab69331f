//! Monte Carlo BER/FER campaigns for coded AMP.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ExperimentSpec;
use crate::amp::{coded_frame, run_amp_coded_on, sample_system, AmpOptions, CodedAmpOptions};
use crate::error::{Error, Result};
use crate::ldpc::CodewordSource;
use crate::par::par_map;
use crate::rng::sub_rng;
use crate::se::SystemConfig;

const STREAM_FRAME: u64 = 21;
/// Per-frame BER above which a frame counts towards the early abort.
const ABORT_BER: f64 = 0.4;
/// Consecutive such frames that end an SNR point.
const ABORT_RUN: usize = 5;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub frame_errors: u64,
    pub frames: u64,
    pub ber: f64,
    pub fer: f64,
    /// Normal-approximation 95% half-width on `ber`.
    pub ci_half_width: f64,
}

#[derive(Clone, Debug, Default)]
struct Tally {
    bit_errors: u64,
    bits: u64,
    frame_errors: u64,
    frames: u64,
    bad_run: usize,
    done: bool,
}

impl Tally {
    fn point(&self, snr_db: f64) -> BerPoint {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { (a as f64 / b as f64).clamp(0.0, 1.0) };
        let ber = ratio(self.bit_errors, self.bits);
        let ci = if self.bits == 0 {
            0.0
        } else {
            Z95 * (ber * (1.0 - ber) / self.bits as f64).sqrt()
        };
        BerPoint {
            snr_db,
            bit_errors: self.bit_errors,
            bits: self.bits,
            frame_errors: self.frame_errors,
            frames: self.frames,
            ber,
            fer: ratio(self.frame_errors, self.frames),
            ci_half_width: ci,
        }
    }
}

/// Seed of frame `k`; the same frame is reused at every SNR point.
fn frame_seed(master: u64, k: u64) -> u64 {
    sub_rng(master, k, STREAM_FRAME).random()
}

/// Runs the coded AMP receiver frame by frame at every SNR point of `spec`.
///
/// A point stops at `target_frame_errors` frame errors, at `trials` frames, or after a run
/// of frames with BER above 0.4. Each frame draws one matrix and noise realisation shared
/// by all points still running; results are consumed in frame order, so the table does
/// not depend on the worker count.
pub fn ber_campaign(spec: &ExperimentSpec) -> Result<Vec<BerPoint>> {
    spec.validate()?;
    let code = spec
        .code
        .as_ref()
        .ok_or_else(|| Error::invalid("code", "a BER campaign needs a code"))?
        .build()?;
    let c = spec.constellation()?;
    let bps = c.bits_per_symbol().unwrap_or(1);
    let n_bits = code.n() as u64;
    let template = SystemConfig::new(spec.beta, 1.0)?.with_n(code.n() / bps)?;
    let sigma2: Vec<f64> = spec.snr_db.iter().map(|db| 10f64.powf(-db / 10.0)).collect();
    let opts = CodedAmpOptions {
        amp: AmpOptions {
            max_iter: spec.outer_iters,
            ..AmpOptions::default()
        },
        max_bp_iters: spec.inner_iters,
        source: CodewordSource::AllZeroCoset,
    };
    let workers = spec.effective_workers();
    let mut tallies = vec![Tally::default(); spec.snr_db.len()];
    let mut k = 0usize;
    while k < spec.trials && tallies.iter().any(|t| !t.done) {
        let active: Vec<usize> = (0..tallies.len()).filter(|&p| !tallies[p].done).collect();
        let batch = workers.min(spec.trials - k);
        let outcomes = par_map(batch, workers, |b| -> Result<Vec<usize>> {
            let seed = frame_seed(spec.seed, (k + b) as u64);
            let frame = coded_frame(&code, &c, seed, opts.source)?;
            let inst = sample_system(&template, &frame.x, seed)?;
            active
                .iter()
                .map(|&p| {
                    let run = run_amp_coded_on(&inst.with_sigma2(sigma2[p])?, &code, &c, &frame, &opts)?;
                    Ok(if run.success { 0 } else { run.bit_errors.max(1) })
                })
                .collect()
        });
        for errs in outcomes {
            let errs = errs?;
            for (&p, &e) in active.iter().zip(&errs) {
                let t = &mut tallies[p];
                if t.done {
                    continue;
                }
                t.frames += 1;
                t.bits += n_bits;
                t.bit_errors += e as u64;
                t.frame_errors += (e > 0) as u64;
                t.bad_run = if e as f64 > ABORT_BER * n_bits as f64 { t.bad_run + 1 } else { 0 };
                t.done = t.frame_errors >= spec.target_frame_errors as u64
                    || t.frames >= spec.trials as u64
                    || t.bad_run >= ABORT_RUN;
                log::debug!("snr {} dB: frame {} -> {e} bit errors", spec.snr_db[p], t.frames);
            }
        }
        k += batch;
    }
    Ok(tallies
        .iter()
        .zip(&spec.snr_db)
        .map(|(t, &db)| t.point(db))
        .collect())
}

pub(crate) fn write_ber_csv<W: Write>(w: W, points: &[BerPoint]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for p in points {
        wr.serialize(p).map_err(|e| Error::Parse(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{CodeSpec, ExperimentKind};

    fn spec() -> ExperimentSpec {
        ExperimentSpec {
            kind: ExperimentKind::Ber,
            beta: 0.5,
            snr_db: vec![-5.0, 200.0],
            code: Some(CodeSpec::Regular {
                n: 240,
                dv: 3,
                dc: 6,
                seed: 1,
            }),
            trials: 6,
            target_frame_errors: 3,
            outer_iters: 20,
            inner_iters: 20,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn noiseless_point_is_error_free_and_bad_point_stops_early() {
        let pts = ber_campaign(&spec()).unwrap();
        assert_eq!(pts[1].ber, 0.0);
        assert_eq!(pts[1].frames, 6);
        assert_eq!(pts[0].frame_errors, 3);
        assert_eq!(pts[0].frames, 3);
        for p in &pts {
            assert_eq!(p.ber, p.bit_errors as f64 / p.bits as f64);
            assert!((0.0..=1.0).contains(&p.ber));
        }
    }

    #[test]
    fn zero_frames_rejected() {
        let s = ExperimentSpec { trials: 0, ..spec() };
        assert!(matches!(ber_campaign(&s), Err(Error::InvalidSpec { field, .. }) if field == "trials"));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let seq = ber_campaign(&spec()).unwrap();
        let par = ber_campaign(&ExperimentSpec { workers: 3, ..spec() }).unwrap();
        assert_eq!(seq, par);
    }
}
