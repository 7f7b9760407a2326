mod common;

use std::sync::Arc;

use common::mrc_ser;
use vlqfb_core::codebook::build_covering_codebook;
use vlqfb_core::estimate::{
    estimate_gains, paired_compare, records_to_csv, ser_full_analytic, ser_open_analytic,
    ser_rate_sweep, Estimator,
};
use vlqfb_core::{QuantizerSpec, RngStream};

fn within(x: f64, target: f64, se: f64, k: f64) -> bool {
    (x - target).abs() <= k * se + 1e-15
}

#[test]
fn analytic_full_csit_matches_mrc() {
    for t in 1..=4u64 {
        for &p in &[1.0, 10.0, 100.0, 1000.0] {
            let q = ser_full_analytic(t as usize, p, 1.0).unwrap();
            let c = mrc_ser(t, p);
            assert!((q - c).abs() <= 1e-8 * c, "t={t} P={p}: {q:e} vs {c:e}");
        }
    }
    assert!((ser_full_analytic(1, 10.0, 1.0).unwrap() - 0.023269).abs() < 1e-6);
    assert!((ser_full_analytic(2, 10.0, 1.0).unwrap() - 1.599e-3).abs() < 1e-6);
    assert!((ser_full_analytic(3, 1e-12, 1.0).unwrap() - 0.5).abs() < 1e-5);
}

#[test]
fn code_rate_scales_power() {
    let a = ser_full_analytic(3, 40.0, 0.75).unwrap();
    let b = mrc_ser(3, 40.0 / 0.75);
    assert!((a - b).abs() <= 1e-8 * b);
}

#[test]
fn sweep_full_csit_single_antenna() {
    let spec = QuantizerSpec::bf_full(1);
    let exact = 0.5 * (1.0 - (10.0f64 / 11.0).sqrt());
    for est in [Estimator::Pathwise, Estimator::Conditional] {
        let recs = ser_rate_sweep(std::slice::from_ref(&spec), &[10.0], 100_000, RngStream::new(1, 0), est).unwrap();
        let r = &recs[0][0];
        assert!(within(r.ser, exact, r.ser_stderr.max(1e-12), 3.0), "{est:?} {} ± {}", r.ser, r.ser_stderr);
        assert!(r.rate.is_infinite());
    }
}

#[test]
fn sweep_open_loop_matches_quadrature() {
    let spec = QuantizerSpec::open_loop(2, 1.0);
    let recs = ser_rate_sweep(&[spec], &[10.0, 100.0], 100_000, RngStream::new(2, 0), Estimator::Pathwise).unwrap();
    for r in &recs[0] {
        let target = ser_open_analytic(2, r.p, 1.0).unwrap();
        assert!(within(r.ser, target, r.ser_stderr, 3.0), "P={} {} vs {}", r.p, r.ser, target);
        assert_eq!(r.rate, 0.0);
    }
}

#[test]
fn unbiased_against_quadrature_for_several_t() {
    for t in 1..=4 {
        let spec = QuantizerSpec::bf_full(t);
        let grid = [3.0, 30.0];
        let recs = ser_rate_sweep(&[spec], &grid, 50_000, RngStream::new(t as u64, 7), Estimator::Pathwise).unwrap();
        for r in &recs[0] {
            let target = ser_full_analytic(t, r.p, 1.0).unwrap();
            assert!(within(r.ser, target, r.ser_stderr, 3.0), "t={t} P={}", r.p);
        }
    }
}

#[test]
fn vlq_rates_stay_in_range() {
    let cb = Arc::new(build_covering_codebook(2, 0.2, RngStream::new(3, 0), 1000).unwrap());
    let bits = f64::from(cb.index_bits());
    let specs = [QuantizerSpec::bf_vlq(cb.clone()), QuantizerSpec::pc_vlq(cb.clone(), 1.0)];
    let grid = [2.0, 10.0, 100.0, 1000.0];
    for est in [Estimator::Pathwise, Estimator::Conditional] {
        let recs = ser_rate_sweep(&specs, &grid, 20_000, RngStream::new(4, 0), est).unwrap();
        for r in recs.iter().flatten() {
            assert!(r.rate >= 1.0 && r.rate <= 1.0 + bits, "{r:?}");
            assert!(r.ser >= 0.0 && r.ser <= 0.5);
        }
    }
}

#[test]
fn conditional_and_pathwise_agree() {
    let cb = Arc::new(build_covering_codebook(2, 0.3, RngStream::new(5, 0), 1000).unwrap());
    let specs = [
        QuantizerSpec::bf_flq(cb.clone()),
        QuantizerSpec::bf_vlq(cb.clone()),
        QuantizerSpec::pc_vlq(cb.clone(), 1.0),
        QuantizerSpec::open_loop(2, 1.0),
    ];
    let grid = [5.0, 20.0];
    let a = ser_rate_sweep(&specs, &grid, 200_000, RngStream::new(6, 0), Estimator::Pathwise).unwrap();
    let b = ser_rate_sweep(&specs, &grid, 200_000, RngStream::new(6, 1), Estimator::Conditional).unwrap();
    for (ra, rb) in a.iter().flatten().zip(b.iter().flatten()) {
        let se = (ra.ser_stderr.powi(2) + rb.ser_stderr.powi(2)).sqrt();
        assert!(within(ra.ser, rb.ser, se, 4.0), "{} P={}: {} vs {}", ra.quantizer, ra.p, ra.ser, rb.ser);
        let se = (ra.rate_stderr.powi(2) + rb.rate_stderr.powi(2)).sqrt();
        assert!(within(ra.rate, rb.rate, se, 4.0), "{} P={}: rate {} vs {}", ra.quantizer, ra.p, ra.rate, rb.rate);
        // conditioning never increases the variance
        assert!(rb.ser_stderr <= ra.ser_stderr * 1.05);
    }
}

#[test]
fn gains_from_quadrature_records() {
    let grid = [1e3, 1e4, 1e5];
    let mk = |open: bool| -> Vec<vlqfb_core::SweepRecord> {
        grid.iter()
            .map(|&p| vlqfb_core::SweepRecord {
                quantizer: "q".into(),
                p,
                ser: if open { ser_open_analytic(2, p, 1.0) } else { ser_full_analytic(2, p, 1.0) }.unwrap(),
                ser_stderr: 0.0,
                rate: 0.0,
                rate_stderr: 0.0,
                samples: 0,
            })
            .collect()
    };
    let full = estimate_gains(&mk(false), 2).unwrap();
    let open = estimate_gains(&mk(true), 2).unwrap();
    assert!((full.diversity - 2.0).abs() <= 0.1);
    assert!((open.diversity - 2.0).abs() <= 0.1);
    assert!(open.array_gain < full.array_gain);
}

#[test]
fn paired_comparisons() {
    let cb = Arc::new(build_covering_codebook(2, 0.2, RngStream::new(8, 0), 1000).unwrap());
    let flq = QuantizerSpec::bf_flq(cb.clone());
    let vlq = QuantizerSpec::bf_vlq(cb.clone());
    let full = QuantizerSpec::bf_full(2);
    let s = RngStream::new(9, 0);
    let same = paired_compare(&flq, &flq, 100.0, 20_000, s).unwrap();
    assert_eq!(same.mean_gap, 0.0);
    assert_eq!(same.fraction_a_dominates, 1.0);
    for q in [&flq, &vlq] {
        let c = paired_compare(q, &full, 100.0, 20_000, s).unwrap();
        assert_eq!(c.fraction_a_dominates, 1.0);
        assert_eq!(c.max_violation, 0.0);
    }
    let c = paired_compare(&vlq, &flq, 100.0, 100_000, s).unwrap();
    assert!(c.mean_gap >= -3.0 * c.gap_stderr);
    assert!(c.mean_gap <= 100f64.powi(-3) + 3.0 * c.gap_stderr);
}

#[test]
fn sweeps_are_reproducible_bit_for_bit() {
    let cb = Arc::new(build_covering_codebook(2, 0.3, RngStream::new(10, 0), 500).unwrap());
    let specs = [QuantizerSpec::bf_vlq(cb.clone()), QuantizerSpec::bf_full(2)];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let recs = ser_rate_sweep(&specs, &[10.0, 100.0], 30_000, RngStream::new(11, 0), Estimator::Pathwise).unwrap();
            records_to_csv(&recs.concat(), 11)
        })
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}
