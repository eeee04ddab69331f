use coded_amp::amp::{
    coded_frame, run_amp, run_amp_coded, run_amp_coded_on, sample_symbols, sample_system, AmpOptions, Matrix,
    SbsDenoiser,
};
use coded_amp::ldpc::{build_regular, decoder_transfer_curve, TransferOptions};
use coded_amp::matching::{predicted_threshold_db, MatchOptions};
use coded_amp::rng::trial_rng;
use coded_amp::{
    run_amp_uncoded, se_fixed_point, CodedAmpOptions, Constellation, MmseTable, MseTransfer, SystemConfig,
};
use num_complex::Complex64;

fn sized(beta: f64, db: f64, n: usize) -> SystemConfig {
    SystemConfig::from_snr_db(beta, db).unwrap().with_n(n).unwrap()
}

#[test]
fn matrix_entries_have_variance_one_over_m() {
    let (m, n) = (1024, 2048);
    let a = Matrix::gaussian(m, n, &mut trial_rng(3, 0));
    let mut total = 0.0;
    let mut col_norms = Vec::with_capacity(n);
    for j in 0..n {
        let c: f64 = (0..m).map(|i| a.get(i, j).norm_sqr()).sum();
        col_norms.push(c);
        total += c;
    }
    let mean_sq = total / (m * n) as f64;
    assert!((mean_sq * m as f64 - 1.0).abs() < 0.05);
    // Column norms: mean 1, each with variance 1/m.
    let mean = col_norms.iter().sum::<f64>() / n as f64;
    let sd_of_mean = (1.0 / m as f64 / n as f64).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * sd_of_mean, "{mean}");
}

#[test]
fn identical_seeds_give_identical_traces() {
    let cfg = SystemConfig::from_snr_db(1.0, 8.0).unwrap().with_dims(256, 256).unwrap();
    let q = Constellation::qpsk();
    let a = run_amp_uncoded(&cfg, &q, 4, 30, 1e-9).unwrap();
    let b = run_amp_uncoded(&cfg, &q, 4, 30, 1e-9).unwrap();
    assert_eq!(a.1, b.1);
    assert_eq!(a.0, b.0);
}

#[test]
fn near_noiseless_square_system_converges() {
    let cfg = SystemConfig::new(1.0, 1e-10).unwrap().with_dims(1024, 1024).unwrap();
    let (_, trace) = run_amp_uncoded(&cfg, &Constellation::qpsk(), 1, 30, 0.0).unwrap();
    assert!(trace.records.len() <= 30);
    assert!(trace.final_mse < 1e-6, "{}", trace.final_mse);
}

#[test]
fn gaussian_converges_to_golden_ratio() {
    let cfg = SystemConfig::new(1.0, 1.0).unwrap().with_n(4096).unwrap();
    let g = Constellation::gaussian();
    let mse: f64 = (0..3)
        .map(|s| run_amp_uncoded(&cfg, &g, s, 50, 1e-8).unwrap().1.final_mse)
        .sum::<f64>()
        / 3.0;
    assert!((mse - 0.618_034).abs() < 0.05 * 0.618_034, "{mse}");
}

#[test]
fn zero_snr_returns_prior_mean() {
    let cfg = SystemConfig::new(1.0, 1e12).unwrap().with_n(512).unwrap();
    let (s, trace) = run_amp_uncoded(&cfg, &Constellation::qpsk(), 2, 20, 1e-9).unwrap();
    assert!(s.iter().all(|z| z.norm() < 1e-4));
    assert!((trace.final_mse - 1.0).abs() < 1e-3);
}

#[test]
fn converged_mse_matches_fixed_point() {
    let q = Constellation::qpsk();
    let cfg = sized(1.5, 5.0, 2048);
    let table = MmseTable::shared(&q).unwrap();
    let v_star = se_fixed_point(&cfg, &*table).unwrap().v_star;
    let seeds = 25;
    let mse: f64 = (0..seeds)
        .map(|s| run_amp_uncoded(&cfg, &q, 100 + s, 100, 1e-7).unwrap().1.final_mse)
        .sum::<f64>()
        / seeds as f64;
    assert!((mse - v_star).abs() < 0.05 * v_star, "empirical {mse} vs SE {v_star}");
}

fn trajectory(cfg: &SystemConfig, seed: u64, onsager: bool) -> Vec<(f64, f64)> {
    let q = Constellation::qpsk();
    let (n, _) = cfg.dims().unwrap();
    let x = sample_symbols(&q, n, &mut trial_rng(seed, 9));
    let inst = sample_system(cfg, &x, seed).unwrap();
    let table = MmseTable::shared(&q).unwrap();
    let opts = AmpOptions {
        max_iter: 8,
        tol: 0.0,
        onsager,
        blowup_factor: f64::INFINITY,
        ..AmpOptions::default()
    };
    let (_, trace) = run_amp(&inst, &mut SbsDenoiser::new(&q), &opts, Some(&*table as &dyn MseTransfer), |_, _, _| {})
        .unwrap();
    trace.records.iter().map(|r| (r.mse_s, r.v_se)).collect()
}

#[test]
fn onsager_term_is_necessary() {
    let cfg = sized(1.0, 8.0, 2048);
    let with = trajectory(&cfg, 7, true);
    let without = trajectory(&cfg, 7, false);
    let rel = |(e, v): (f64, f64)| (e - v).abs() / v;
    assert!(rel(with[5]) < 0.1, "with Onsager: {:?}", with[5]);
    assert!(rel(without[5]) > 0.2, "without Onsager: {:?}", without[5]);
}

fn moments(z: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = z.clone().count() as f64;
    let mean = z.clone().sum::<f64>() / n;
    let var = z.clone().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = z.map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (var, m4 / (var * var))
}

/// Per-iteration errors `h = r - x`, pooled over seeds.
fn pooled_errors(n: usize, seeds: u64, iters: usize) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
    let q = Constellation::qpsk();
    let cfg = sized(1.0, 8.0, n);
    let mut pooled = vec![(Vec::new(), Vec::new()); iters];
    for seed in 0..seeds {
        let x = sample_symbols(&q, n, &mut trial_rng(21 + seed, 0));
        let inst = sample_system(&cfg, &x, 21 + seed).unwrap();
        let opts = AmpOptions {
            max_iter: iters,
            tol: 0.0,
            ..AmpOptions::default()
        };
        run_amp(&inst, &mut SbsDenoiser::new(&q), &opts, None, |t, r, _| {
            let (h, xs) = &mut pooled[t];
            h.extend(r.iter().zip(&x).map(|(a, b)| a - b));
            xs.extend_from_slice(&x);
        })
        .unwrap();
    }
    pooled
}

#[test]
fn effective_noise_is_gaussian_and_uncorrelated() {
    for (t, (h, x)) in pooled_errors(4096, 4, 6).into_iter().enumerate() {
        let (_, k_re) = moments(h.iter().map(|z| z.re));
        let (_, k_im) = moments(h.iter().map(|z| z.im));
        let hx: Complex64 = h.iter().zip(&x).map(|(a, b)| a * b.conj()).sum();
        let hh: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        let xx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let corr = hx.norm() / (hh * xx).sqrt();
        assert!((2.8..=3.2).contains(&k_re) && (2.8..=3.2).contains(&k_im), "t={t}: kurtosis {k_re}, {k_im}");
        assert!(corr < 0.02, "t={t}: correlation {corr}");
    }
}

#[test]
fn coded_noiseless_succeeds_immediately() {
    let code = build_regular(480, 3, 6, 2).unwrap();
    let cfg = SystemConfig::new(0.5, 1e-12).unwrap();
    let run = run_amp_coded(&cfg, &code, &Constellation::qpsk(), 3, &CodedAmpOptions::default()).unwrap();
    assert!(run.success);
    assert_eq!(run.trace.records.len(), 1);
    assert_eq!(run.bit_errors, 0);
}

#[test]
fn coded_dimension_mismatch_is_an_error() {
    let code = build_regular(480, 3, 6, 2).unwrap();
    let cfg = SystemConfig::new(0.5, 0.1).unwrap().with_n(100).unwrap();
    assert!(run_amp_coded(&cfg, &code, &Constellation::qpsk(), 3, &CodedAmpOptions::default()).is_err());
}

/// Waterfall direction around the threshold predicted from the measured decoder curve.
fn waterfall(n: usize, seeds: u64) -> (f64, usize, usize) {
    let q = Constellation::qpsk();
    let code = build_regular(n, 3, 6, 1).unwrap();
    let grid = coded_amp::curve::log_grid(0.3, 30.0, 40);
    let opts = TransferOptions {
        max_bp_iters: 50,
        seed: 5,
        ..TransferOptions::default()
    };
    let curve = decoder_transfer_curve(&code, &q, &grid, 10, &opts).unwrap();
    let th = predicted_threshold_db(0.5, &curve, &MatchOptions::default()).unwrap().unwrap();
    let copts = CodedAmpOptions::default();
    let count = |db: f64| {
        let cfg = sized(0.5, db, n / 2);
        (0..seeds)
            .filter(|&s| {
                let frame = coded_frame(&code, &q, 1000 + s, copts.source).unwrap();
                let inst = sample_system(&cfg, &frame.x, 1000 + s).unwrap();
                run_amp_coded_on(&inst, &code, &q, &frame, &copts).unwrap().success
            })
            .count()
    };
    (th, count(th + 1.5), count(th - 1.0))
}

#[test]
fn coded_waterfall_direction_small() {
    let (th, above, below) = waterfall(2048, 10);
    assert!(above >= 9, "threshold {th} dB: {above}/10 above");
    assert!(below <= 1, "threshold {th} dB: {below}/10 below");
}

#[test]
#[ignore = "desk-scale run, about 15 minutes"]
fn coded_waterfall_direction_full() {
    let (th, above, below) = waterfall(16384, 20);
    assert!(above >= 19, "threshold {th} dB: {above}/20 above");
    assert!(below <= 1, "threshold {th} dB: {below}/20 below");
}
