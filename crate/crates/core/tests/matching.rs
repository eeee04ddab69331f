use coded_amp::curve::{log_grid, RightTail};
use coded_amp::ldpc::{build_regular, decoder_transfer_curve, TransferOptions};
use coded_amp::matching::{
    check_matching, coded_se_trace, design_for_rate, ga_transfer_curve, optimize_degrees, predicted_threshold_db,
    tunnel_open, DesignTarget, LpOptions, MatchOptions,
};
use coded_amp::rates::{omega_star, omega_star_on};
use coded_amp::{
    run_amp_coded, CodedAmpOptions, Constellation, DegreeDistribution, MmseTable, SystemConfig, TransferCurve,
};
use proptest::prelude::*;

fn qpsk_table() -> std::sync::Arc<MmseTable> {
    MmseTable::shared(&Constellation::qpsk()).unwrap()
}

#[test]
fn report_agrees_with_its_gap() {
    let q = Constellation::qpsk();
    let grid = log_grid(1e-2, 1e2, 120);
    let curve = ga_transfer_curve(&DegreeDistribution::regular(3, 6).unwrap(), &q, &grid).unwrap();
    let opts = MatchOptions::default();
    for db in [0.0, 1.0, 2.0, 3.0, 6.0] {
        let cfg = SystemConfig::from_snr_db(0.5, db).unwrap();
        let star = omega_star_on(&cfg, &qpsk_table(), &grid).unwrap();
        let rep = check_matching(&cfg, &curve, &star, &opts).unwrap();
        assert_eq!(rep.tunnel_open, rep.min_gap.is_none_or(|g| g > opts.eps), "{db} dB");
        let th = rep.predicted_threshold_db.unwrap();
        assert_eq!(rep.tunnel_open, db >= th, "{db} dB vs threshold {th}");
    }
}

#[test]
fn symbol_curve_closed_while_uncoded_fixed_point_positive() {
    let table = qpsk_table();
    for (beta, db) in [(1.5, 5.0), (1.0, 8.0), (0.5, 3.0)] {
        let cfg = SystemConfig::from_snr_db(beta, db).unwrap();
        let grid = log_grid(1e-3, cfg.snr(), 200);
        let s = TransferCurve::from_fn(&grid, 1.0, RightTail::Zero, |r| table.eval(r)).unwrap();
        let v_star = coded_amp::se_fixed_point(&cfg, &*table).unwrap().v_star;
        assert!(v_star > 1e-3);
        assert!(!tunnel_open(&cfg, &s, &MatchOptions::default()));
    }
}

/// GA curves of a few regular and irregular ensembles.
fn ensembles() -> Vec<DegreeDistribution> {
    vec![
        DegreeDistribution::regular(3, 6).unwrap(),
        DegreeDistribution::regular(4, 8).unwrap(),
        DegreeDistribution::regular(3, 12).unwrap(),
        DegreeDistribution::new(vec![(2, 0.3), (3, 0.3), (12, 0.4)], vec![(7, 1.0)]).unwrap(),
    ]
}

#[test]
fn lp_optimum_grows_with_max_degree() {
    let cfg = SystemConfig::from_snr_db(1.0, 4.0).unwrap();
    let q = Constellation::qpsk();
    let mut last = 0.0;
    for dv_max in [3, 4, 6, 9, 12] {
        let opts = LpOptions { dv_max, ..LpOptions::default() };
        let rate = optimize_degrees(&cfg, &q, &opts).map_or(0.0, |d| d.design_rate);
        assert!(rate >= last - 1e-9, "dv_max {dv_max}: {rate} < {last}");
        last = rate;
    }
    assert!(last > 0.0);
}

#[test]
fn lp_with_slack_target_reaches_high_rate() {
    let cfg = SystemConfig::from_snr_db(1.0, 25.0).unwrap();
    let q = Constellation::qpsk();
    let d = optimize_degrees(&cfg, &q, &LpOptions { dc: 30, ..LpOptions::default() }).unwrap();
    let grid = log_grid(1e-3, cfg.snr(), 200);
    let curve = ga_transfer_curve(&d.dd, &q, &grid).unwrap();
    assert!(d.design_rate > 0.85, "{}", d.design_rate);
    assert!(tunnel_open(&cfg, &curve, &MatchOptions::default()));
}

#[test]
fn optimized_code_beats_regular_at_same_rate() {
    let q = Constellation::qpsk();
    let lp = LpOptions::default();
    let mopts = MatchOptions::default();
    let opt = design_for_rate(1.0, &q, 0.5, &[6, 7, 8], &lp, &mopts).unwrap();
    let grid = log_grid(1e-3, 1e3, 600);
    let regular = ga_transfer_curve(&DegreeDistribution::regular(3, 6).unwrap(), &q, &grid).unwrap();
    let reg_th = predicted_threshold_db(1.0, &regular, &mopts).unwrap().unwrap();
    let opt_th = opt.threshold_db.unwrap();
    assert!(opt.design.design_rate >= 0.5);
    assert!(reg_th - opt_th >= 0.5, "optimized {opt_th} dB vs regular {reg_th} dB");
}

#[test]
fn siso_baseline_is_worse_than_matched() {
    let q = Constellation::qpsk();
    let mopts = MatchOptions::default();
    for beta in [1.0, 2.0] {
        let matched = design_for_rate(beta, &q, 0.5, &[6], &LpOptions::default(), &mopts).unwrap();
        let siso_opts = LpOptions {
            target: DesignTarget::Siso { rho0: 1.0 },
            ..LpOptions::default()
        };
        let siso = design_for_rate(beta, &q, 0.5, &[6], &siso_opts, &mopts).unwrap();
        let (m, s) = (matched.threshold_db.unwrap(), siso.threshold_db.unwrap());
        assert!(s > m, "beta {beta}: SISO {s} dB vs matched {m} dB");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn zero_curve_open_everywhere(beta in 0.1f64..3.0, db in -15.0f64..25.0) {
        let cfg = SystemConfig::from_snr_db(beta, db).unwrap();
        let grid = log_grid(1e-3, 1e3, 80);
        let zero = TransferCurve::from_fn(&grid, 1.0, RightTail::Zero, |_| 0.0).unwrap();
        prop_assert!(tunnel_open(&cfg, &zero, &MatchOptions::default()));
    }

    #[test]
    fn open_tunnel_means_coded_se_decodes(idx in 0usize..4, beta in 0.3f64..2.0, db in -2.0f64..12.0) {
        let q = Constellation::qpsk();
        let cfg = SystemConfig::from_snr_db(beta, db).unwrap();
        let grid = log_grid(1e-3, 1e3, 300);
        let curve = ga_transfer_curve(&ensembles()[idx], &q, &grid).unwrap();
        let opts = MatchOptions::default();
        if tunnel_open(&cfg, &curve, &opts) {
            let trace = coded_se_trace(&cfg, &curve, 2000);
            let end = trace.last().unwrap().v;
            prop_assert!(end < opts.floor, "stuck at {}", end);
        }
    }

    #[test]
    fn lp_rate_below_target_area(beta in 0.5f64..2.0, db in 0.0f64..12.0) {
        let q = Constellation::qpsk();
        let cfg = SystemConfig::from_snr_db(beta, db).unwrap();
        let opts = LpOptions { grid_points: 32, m_points: 24, ..LpOptions::default() };
        if let Ok(d) = optimize_degrees(&cfg, &q, &opts) {
            let area = omega_star(&cfg, &q).unwrap().integral(cfg.snr());
            prop_assert!(d.design_rate * 4f64.ln() <= 1.02 * area, "{} vs {}", d.design_rate * 4f64.ln(), area);
        }
    }
}

/// Fraction of frames decoded at `db`, for the (3,6) QPSK code at `beta`.
fn success_rate(code: &coded_amp::LdpcCode, beta: f64, db: f64, frames: u64) -> f64 {
    let cfg = SystemConfig::from_snr_db(beta, db).unwrap().with_n(code.n() / 2).unwrap();
    let ok = (0..frames)
        .filter(|&s| {
            run_amp_coded(&cfg, code, &Constellation::qpsk(), 500 + s, &CodedAmpOptions::default())
                .unwrap()
                .success
        })
        .count();
    ok as f64 / frames as f64
}

#[test]
#[ignore = "desk-scale run, about an hour"]
fn measured_threshold_predicts_waterfall_midpoint() {
    let q = Constellation::qpsk();
    let code = build_regular(16384, 3, 6, 1).unwrap();
    let opts = TransferOptions { max_bp_iters: 50, seed: 5, ..TransferOptions::default() };
    let curve = decoder_transfer_curve(&code, &q, &log_grid(0.3, 30.0, 40), 10, &opts).unwrap();
    let th = predicted_threshold_db(1.0, &curve, &MatchOptions::default()).unwrap().unwrap();
    // midpoint: 50% frame success, by bisection on a 0.05 dB resolution
    let (mut lo, mut hi) = (th - 2.0, th + 2.0);
    while hi - lo > 0.05 {
        let mid = 0.5 * (lo + hi);
        if success_rate(&code, 1.0, mid, 10) >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let midpoint = 0.5 * (lo + hi);
    assert!((midpoint - th).abs() <= 0.3, "predicted {th} dB, waterfall midpoint {midpoint} dB");
}
