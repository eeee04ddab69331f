use std::f64::consts::LN_2;

use coded_amp::mmse::siso_capacity;
use coded_amp::rates::{
    area_capacity_prop1, capacity_theorem2, omega_star, rate_amp_dec, rate_sweep, rate_turbo_lmmse, RatePoint,
};
use coded_amp::rng::trial_rng;
use coded_amp::{Constellation, Error, RateKind, SystemConfig};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn cfg(beta: f64, db: f64) -> SystemConfig {
    SystemConfig::from_snr_db(beta, db).unwrap()
}

fn discrete() -> Vec<Constellation> {
    vec![
        Constellation::bpsk(),
        Constellation::qpsk(),
        Constellation::psk8(),
        Constellation::qam16(),
    ]
}

/// `(1/N) log det(I + snr A^H A)` in nats, by Cholesky.
fn log_det_sample(n: usize, m: usize, snr: f64, seed: u64) -> f64 {
    let mut rng = trial_rng(seed, 0);
    let s = (0.5 / m as f64).sqrt();
    let a: Vec<Complex64> = (0..m * n)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s))
        .collect();
    // G = I + snr A^H A, column-major n x n
    let mut g = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                acc += a[k * n + i].conj() * a[k * n + j];
            }
            g[i * n + j] = acc * snr;
            g[j * n + i] = (acc * snr).conj();
        }
        g[i * n + i] += 1.0;
    }
    let mut logdet = 0.0;
    for j in 0..n {
        let mut d = g[j * n + j].re;
        for k in 0..j {
            d -= g[j * n + k].norm_sqr();
        }
        let d = d.sqrt();
        logdet += 2.0 * d.ln();
        g[j * n + j] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut v = g[i * n + j];
            for k in 0..j {
                v -= g[i * n + k] * g[j * n + k].conj();
            }
            g[i * n + j] = v / d;
        }
    }
    logdet / n as f64
}

#[test]
fn gaussian_capacity_closed_form() {
    let c = cfg(1.0, 0.0);
    let zeta = 1.0 / GOLDEN - 1.0;
    let nats = (1.0 + zeta).ln() - zeta / (1.0 + zeta) + (1.0 + GOLDEN).ln();
    let got = capacity_theorem2(&c, &Constellation::gaussian()).unwrap();
    assert!((got - nats / LN_2).abs() < 1e-9, "{got} vs {}", nats / LN_2);
    let area = area_capacity_prop1(&c, &Constellation::gaussian()).unwrap();
    assert!((area - got).abs() < 1e-6);
}

#[test]
fn gaussian_capacity_matches_log_det() {
    let (n, m, samples) = (128, 128, 20);
    let mc: f64 = (0..samples).map(|s| log_det_sample(n, m, 1.0, s)).sum::<f64>() / samples as f64;
    let got = capacity_theorem2(&cfg(1.0, 0.0), &Constellation::gaussian()).unwrap() * LN_2;
    assert!((got - mc).abs() < 0.02 * got, "{got} vs Monte Carlo {mc}");
}

#[test]
fn vanishing_load_reduces_to_siso() {
    let q = Constellation::qpsk();
    let c = cfg(1e-6, 5.0);
    let siso = siso_capacity(&q, c.snr()).unwrap();
    assert!((capacity_theorem2(&c, &q).unwrap() - siso).abs() < 1e-4);
    assert!((area_capacity_prop1(&c, &q).unwrap() - siso).abs() < 1e-4);
    assert!((rate_turbo_lmmse(&c, &q).unwrap() - siso).abs() < 1e-4);
    assert!((rate_amp_dec(&c, &q).unwrap() - siso).abs() < 1e-4);
}

#[test]
fn paper_anchor_rates() {
    let q = Constellation::qpsk();
    let amp = area_capacity_prop1(&cfg(1.5, 5.38), &q).unwrap();
    assert!((amp - 1.48).abs() < 0.02, "matched AMP {amp}");
    let turbo = rate_turbo_lmmse(&cfg(1.5, 7.99), &q).unwrap();
    assert!((turbo - 1.48).abs() < 0.03, "Turbo-LMMSE {turbo}");
}

#[test]
fn amp_dec_examples() {
    let g = Constellation::gaussian();
    let got = rate_amp_dec(&cfg(1.0, 0.0), &g).unwrap();
    assert!((got - (1.0 + GOLDEN).log2()).abs() < 1e-9);
    let q = Constellation::qpsk();
    let c = cfg(1.5, 10.0);
    assert!(rate_amp_dec(&c, &q).unwrap() < capacity_theorem2(&c, &q).unwrap() - 1e-4);
}

#[test]
fn gaussian_turbo_returns_capacity() {
    let g = Constellation::gaussian();
    let c = cfg(1.5, 4.0);
    assert!((rate_turbo_lmmse(&c, &g).unwrap() - capacity_theorem2(&c, &g).unwrap()).abs() < 1e-12);
}

#[test]
fn identity_over_qpsk_sweep() {
    let q = Constellation::qpsk();
    let worst = (-10..=20)
        .map(|db| {
            let c = cfg(1.5, db as f64);
            (area_capacity_prop1(&c, &q).unwrap() - capacity_theorem2(&c, &q).unwrap()).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn multiple_crossings_refused() {
    let q = Constellation::qpsk();
    let c = cfg(2.0, 12.0);
    assert!(matches!(capacity_theorem2(&c, &q), Err(Error::SingleCrossing { crossings }) if crossings.len() == 3));
    assert!(matches!(area_capacity_prop1(&c, &q), Err(Error::SingleCrossing { .. })));
}

#[test]
fn target_curve_examples() {
    let g = Constellation::gaussian();
    let c = cfg(1.0, 0.0);
    let star = omega_star(&c, &g).unwrap();
    assert!(star.eval(c.snr()).abs() < 1e-12);
    assert!((star.eval(1e-6) - 1.0).abs() < 1e-5);
    assert!((star.eval(GOLDEN) - GOLDEN).abs() < 1e-9);
    assert!((1.0 / (1.0 + GOLDEN) - GOLDEN).abs() < 1e-12);
}

fn column(points: &[RatePoint], kind: RateKind) -> Vec<f64> {
    points.iter().filter(|p| p.kind == kind).map(|p| p.rate).collect()
}

#[test]
fn sweep_columns_are_monotone() {
    let snrs: Vec<f64> = (-10..=20).map(f64::from).collect();
    let pts = rate_sweep(&cfg(1.0, 0.0), &Constellation::qpsk(), &snrs, &RateKind::ALL).unwrap();
    for kind in RateKind::ALL {
        let col = column(&pts, kind);
        assert_eq!(col.len(), snrs.len());
        for w in col.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "{kind} decreases");
        }
    }
}

#[test]
fn gaussian_sweep_columns_coincide() {
    let snrs: Vec<f64> = (-10..=20).step_by(2).map(f64::from).collect();
    let pts = rate_sweep(&cfg(1.5, 0.0), &Constellation::gaussian(), &snrs, &RateKind::ALL).unwrap();
    let cap = column(&pts, RateKind::Capacity);
    for kind in [RateKind::Amp, RateKind::TurboLmmse] {
        for (a, b) in column(&pts, kind).iter().zip(&cap) {
            assert!((a - b).abs() < 1e-6, "{kind}: {a} vs {b}");
        }
    }
    assert!(rate_sweep(&cfg(1.0, 0.0), &Constellation::qpsk(), &[], &RateKind::ALL).unwrap().is_empty());
}

#[test]
fn turbo_and_amp_dec_below_capacity_on_sweeps() {
    for c in discrete() {
        for beta in [0.5, 1.0, 1.5] {
            for db in (-10..=20).step_by(3) {
                let s = cfg(beta, db as f64);
                let Ok(cap) = capacity_theorem2(&s, &c) else { continue };
                assert!(rate_turbo_lmmse(&s, &c).unwrap() <= cap + 1e-9, "{} {beta} {db}", c.label());
                assert!(rate_amp_dec(&s, &c).unwrap() <= cap + 1e-9, "{} {beta} {db}", c.label());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rates_within_bounds(idx in 0usize..4, beta in 0.1f64..2.0, db in -10.0f64..20.0) {
        let c = &discrete()[idx];
        let s = cfg(beta, db);
        let ceiling = c.entropy_nats() / LN_2 + 1e-9;
        for r in [capacity_theorem2(&s, c), rate_turbo_lmmse(&s, c), rate_amp_dec(&s, c)] {
            match r {
                Ok(v) => prop_assert!((0.0..=ceiling).contains(&v), "{}", v),
                Err(Error::SingleCrossing { .. }) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }

    #[test]
    fn appendix_identity_holds(idx in 0usize..4, beta in 0.1f64..2.0, db in -10.0f64..20.0) {
        let c = &discrete()[idx];
        let s = cfg(beta, db);
        if let (Ok(a), Ok(b)) = (area_capacity_prop1(&s, c), capacity_theorem2(&s, c)) {
            prop_assert!((a - b).abs() < 1e-6);
        }
    }
}
