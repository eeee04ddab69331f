use coded_amp::ldpc::{
    app_decode, app_decode_with_coset, build_irregular, build_regular, decoder_transfer_curve, read_alist,
    write_alist, BpDecoder, CodewordSource, Modulator, TransferOptions,
};
use coded_amp::rng::trial_rng;
use coded_amp::{omega_s, Constellation, DegreeDistribution, Error, LdpcCode};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// Rank of H over GF(2), by elimination on packed rows.
fn gf2_rank(code: &LdpcCode) -> usize {
    let words = code.n().div_ceil(64);
    let mut rows: Vec<Vec<u64>> = code
        .checks()
        .iter()
        .map(|c| {
            let mut r = vec![0u64; words];
            for &v in c {
                r[v as usize / 64] ^= 1 << (v % 64);
            }
            r
        })
        .collect();
    let mut rank = 0;
    for col in 0..code.n() {
        let (w, b) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..rows.len()).find(|&i| rows[i][w] & b != 0) else { continue };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row[w] & b != 0 {
                row.iter_mut().zip(&pivot).for_each(|(a, p)| *a ^= p);
            }
        }
        rank += 1;
    }
    rank
}

fn random_info(k: usize, seed: u64) -> Vec<u8> {
    let mut rng = trial_rng(seed, 3);
    (0..k).map(|_| rng.random_range(0..2u8)).collect()
}

#[test]
fn regular_construction_contract() {
    let code = build_regular(1024, 3, 6, 7).unwrap();
    assert_eq!((code.n(), code.m()), (1024, 512));
    assert!(code.vars().iter().all(|v| v.len() == 3));
    assert!(code.checks().iter().all(|c| c.len() == 6));
    let k = code.n() - gf2_rank(&code);
    assert_eq!(code.k(), k);
    assert!((code.rate() - 0.5).abs() < 0.01);
    assert_eq!(code.four_cycles(), 0);
    assert_eq!(code, build_regular(1024, 3, 6, 7).unwrap());
    assert_ne!(code, build_regular(1024, 3, 6, 8).unwrap());
}

#[test]
fn infeasible_regular_is_rejected() {
    assert!(matches!(build_regular(1026, 3, 7, 1), Err(Error::Infeasible(_))));
}

#[test]
fn irregular_construction() {
    let dd = DegreeDistribution::regular(3, 6).unwrap();
    let code = build_irregular(1024, &dd, 7).unwrap();
    assert!(code.vars().iter().all(|v| v.len() == 3));
    assert!(code.checks().iter().all(|c| c.len() == 6));

    let dd = DegreeDistribution::new(vec![(2, 0.3), (3, 0.3), (12, 0.4)], vec![(7, 0.9333), (8, 0.0667)]).unwrap();
    assert!((dd.design_rate() - 0.5).abs() < 1e-3);
    let code = build_irregular(4000, &dd, 3).unwrap();
    let rate = (code.n() - gf2_rank(&code)) as f64 / code.n() as f64;
    assert!((rate - dd.design_rate()).abs() < 0.01, "{rate}");
    assert!(code.vars().iter().all(|v| v.len() >= 2));
    // edge-perspective fractions of the built graph within one edge per degree
    let edges = code.edges() as f64;
    for &(d, f) in &dd.lambda {
        let got = code.vars().iter().filter(|v| v.len() == d).count() as f64 * d as f64;
        assert!((got - f * edges).abs() <= d as f64 + 1.0, "degree {d}: {got} vs {}", f * edges);
    }
}

#[test]
fn degree_one_is_rejected() {
    let dd = DegreeDistribution::new(vec![(1, 0.2), (3, 0.8)], vec![(6, 1.0)]).unwrap();
    assert!(build_irregular(1000, &dd, 1).is_err());
}

#[test]
fn encoder_examples() {
    let code = build_regular(1024, 3, 6, 2).unwrap();
    assert!(code.encode(&vec![0; code.k()]).unwrap().iter().all(|&b| b == 0));
    let a = code.encode(&random_info(code.k(), 1)).unwrap();
    let b = code.encode(&random_info(code.k(), 2)).unwrap();
    assert!(code.syndrome_ok(&a) && code.syndrome_ok(&b));
    assert_ne!(a, b);
    assert!(code.encode(&vec![0; code.k() + 1]).is_err());
}

#[test]
fn alist_roundtrip() {
    let code = build_regular(600, 3, 6, 4).unwrap();
    let mut buf = Vec::new();
    write_alist(&code, &mut buf).unwrap();
    assert_eq!(read_alist(&buf[..]).unwrap(), code);
    assert!(matches!(read_alist(&b"3 2\n1 1\n"[..]), Err(Error::Parse(_))));
}

#[test]
fn decoder_limits() {
    let code = build_regular(1024, 3, 6, 2).unwrap();
    let q = Constellation::qpsk();
    let bits = code.encode(&random_info(code.k(), 5)).unwrap();
    let x = Modulator::new(&q).unwrap().map(&bits).unwrap();
    let out = app_decode(&code, &x, 1e6, &q, 50).unwrap();
    assert!(out.parity_ok);
    assert_eq!(out.hard_bits, bits);
    assert!(out.means.iter().zip(&x).all(|(m, x)| (m - x).norm() < 1e-9));
    assert!(out.vars.iter().all(|&v| v < 1e-9));

    // No observation, random coset: marginals are uniform.
    let coset = random_info(code.n(), 6);
    let r = vec![Complex64::new(0.3, -0.2); x.len()];
    let mut bp = BpDecoder::new(&code);
    let out = app_decode_with_coset(&mut bp, &Modulator::new(&q).unwrap(), &r, 0.0, Some(&coset), 50).unwrap();
    assert!(out.means.iter().all(|m| m.norm() < 1e-12));
    assert!(out.vars.iter().all(|&v| (v - 1.0).abs() < 1e-12));
}

/// Bit errors and bits over `frames` BPSK frames at `rho`.
fn bpsk_errors(code: &LdpcCode, source: CodewordSource, rho: f64, frames: usize, seed: u64) -> Vec<usize> {
    let bpsk = Modulator::new(&Constellation::bpsk()).unwrap();
    let mut bp = BpDecoder::new(code);
    let s = (0.5 / rho).sqrt();
    (0..frames)
        .map(|f| {
            let mut rng = trial_rng(seed, f as u64);
            let bits = match source {
                CodewordSource::AllZeroCoset => vec![0u8; code.n()],
                CodewordSource::Random => {
                    let info: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
                    code.encode(&info).unwrap()
                }
            };
            let coset: Vec<u8> = (0..code.n()).map(|_| rng.random_range(0..2u8)).collect();
            let sent: Vec<u8> = bits.iter().zip(&coset).map(|(a, b)| a ^ b).collect();
            let r: Vec<Complex64> = bpsk
                .map(&sent)
                .unwrap()
                .into_iter()
                .map(|x| x + Complex64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s))
                .collect();
            let out = app_decode_with_coset(&mut bp, &bpsk, &r, rho, Some(&coset), 200).unwrap();
            out.hard_bits.iter().zip(&bits).filter(|(a, b)| a != b).count()
        })
        .collect()
}

#[test]
fn bpsk_ber_above_threshold() {
    let code = build_regular(8192, 3, 6, 1).unwrap();
    // Es/N0 = R * Eb/N0 at Eb/N0 = 2.5 dB
    let rho = 0.5 * 10f64.powf(0.25);
    let frames = 10_000_000usize.div_ceil(code.n());
    let errors: usize = bpsk_errors(&code, CodewordSource::Random, rho, frames, 17).iter().sum();
    let ber = errors as f64 / (frames * code.n()) as f64;
    assert!(ber < 1e-4, "BER {ber}");
}

#[test]
fn coset_shortcut_matches_random_codewords() {
    let code = build_regular(2048, 3, 6, 1).unwrap();
    // inside the waterfall: a sizeable fraction of frames fail
    let rho = 0.5 * 10f64.powf(0.12);
    let frames = 300;
    let stats = |src| {
        let e = bpsk_errors(&code, src, rho, frames, 23);
        let per: Vec<f64> = e.iter().map(|&x| x as f64 / code.n() as f64).collect();
        let mean = per.iter().sum::<f64>() / frames as f64;
        let var = per.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (frames - 1) as f64;
        (mean, var / frames as f64)
    };
    let (a, va) = stats(CodewordSource::AllZeroCoset);
    let (b, vb) = stats(CodewordSource::Random);
    assert!(a > 1e-3 && b > 1e-3, "not in the waterfall: {a}, {b}");
    assert!((a - b).abs() < 4.0 * (va + vb).sqrt(), "{a} vs {b}");
}

fn measured(c: &Constellation, n: usize, grid: &[f64]) -> (LdpcCode, coded_amp::TransferCurve) {
    let code = build_regular(n, 3, 6, 1).unwrap();
    let opts = TransferOptions {
        max_bp_iters: 50,
        seed: 9,
        ..TransferOptions::default()
    };
    let curve = decoder_transfer_curve(&code, c, grid, 10, &opts).unwrap();
    (code, curve)
}

#[test]
fn transfer_curve_properties() {
    let q = Constellation::qpsk();
    let grid = coded_amp::curve::log_grid(0.01, 100.0, 40);
    let (_, curve) = measured(&q, 2048, &grid);
    let se = curve.stderr().unwrap();
    assert!(*curve.values().last().unwrap() < 1e-12);
    for ((&r, &v), &s) in grid.iter().zip(curve.values()).zip(se) {
        let ws = omega_s(&q, r).unwrap();
        assert!(v <= ws + 4.0 * s + 1e-12, "rho {r}: {v} above {ws}");
    }
    // Monotone within 2 SE until the decoder first succeeds; from there on only the
    // residual error floor remains.
    let cut = curve.values().iter().position(|&v| v < 1e-3).unwrap();
    let head = coded_amp::TransferCurve::measured(
        grid[..cut].to_vec(),
        curve.values()[..cut].to_vec(),
        se[..cut].to_vec(),
        1.0,
    )
    .unwrap();
    assert!(head.is_monotone_within(2.0));
    assert!(curve.values()[cut..].iter().all(|&v| v < 1e-3));
}

#[test]
fn bp_area_sits_just_above_the_rate() {
    // The lemma holds for the optimal decoder; BP loses the region between its own
    // threshold and the MAP threshold, so its area is above R log|S| by a few percent.
    let b = Constellation::bpsk();
    let grid = coded_amp::curve::log_grid(1e-3, 100.0, 60);
    let (code, curve) = measured(&b, 4096, &grid);
    let target = code.rate() * 2f64.ln();
    let ratio = curve.total_area() / target;
    assert!((1.0..1.1).contains(&ratio), "area ratio {ratio}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn encoder_outputs_satisfy_checks(seed in 0u64..1000, info_seed in 0u64..1000) {
        let code = build_regular(240, 3, 6, seed).unwrap();
        let word = code.encode(&random_info(code.k(), info_seed)).unwrap();
        prop_assert!(code.syndrome_ok(&word));
    }
}
