//! Randomized invariants of the filter, smoother, metrics and file formats.

use proptest::prelude::*;

use mkf_core::adapt::estimate_r;
use mkf_core::baseline::{differential_subtract, pipeline_denoise};
use mkf_core::io::{read_volume, write_volume, Dtype};
use mkf_core::kalman::kf_filter;
use mkf_core::model::{FilterParams, RoiSpec, Trace, Volume};
use mkf_core::recon::{envelope, psnr, reconstruct};
use mkf_core::rts::{denoise_trace, rts_smooth};
use mkf_testkit::{batch_map_smooth, rel_max_err, ScalarModel};

const CASES: u32 = 500;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

fn samples(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 1..max_len)
}

fn trace(v: Vec<f64>) -> Trace {
    Trace::new(v, 1e-8).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn covariance_contracts(y in samples(64), q in log_uniform(1e-6, 1e2), r in log_uniform(1e-6, 1e2), p0 in 0.0..10.0f64) {
        let params = FilterParams::random_walk(q, r, y[0], p0);
        let t = kf_filter(&trace(y), &params).unwrap();
        for k in 0..t.len() {
            prop_assert!(t.p_post[k] <= t.p_prior[k]);
            prop_assert!(t.p_post[k] >= 0.0);
        }
    }

    #[test]
    fn gain_is_strictly_inside_unit_interval(y in samples(64), q in log_uniform(1e-6, 1e2), r in log_uniform(1e-6, 1e2)) {
        let params = FilterParams::random_walk(q, r, 0.0, r);
        let t = kf_filter(&trace(y), &params).unwrap();
        prop_assert!(t.gain.iter().all(|&k| k > 0.0 && k < 1.0));
    }

    #[test]
    fn gain_ignores_measurements(a in samples(64), seed_shift in -5.0..5.0f64, q in log_uniform(1e-4, 1e1), r in log_uniform(1e-4, 1e1)) {
        let b: Vec<f64> = a.iter().map(|v| v * 0.5 + seed_shift).collect();
        let params = FilterParams::random_walk(q, r, 0.3, 1.0);
        let ta = kf_filter(&trace(a), &params).unwrap();
        let tb = kf_filter(&trace(b), &params).unwrap();
        prop_assert_eq!(ta.gain, tb.gain);
        prop_assert_eq!(ta.p_post, tb.p_post);
    }

    #[test]
    fn filter_is_linear_from_zero_start(y in samples(64), alpha in -8.0..8.0f64, q in log_uniform(1e-4, 1e1), r in log_uniform(1e-4, 1e1)) {
        let params = FilterParams::random_walk(q, r, 0.0, 1.0);
        let base = kf_filter(&trace(y.clone()), &params).unwrap();
        let scaled = kf_filter(&trace(y.iter().map(|v| alpha * v).collect()), &params).unwrap();
        let expect: Vec<f64> = base.x_post.iter().map(|v| alpha * v).collect();
        prop_assert!(rel_max_err(&scaled.x_post, &expect, 1e-300) <= 1e-12);
    }

    #[test]
    fn smoothing_reduces_variance(y in samples(64), q in log_uniform(1e-6, 1e2), r in log_uniform(1e-6, 1e2)) {
        let params = FilterParams::random_walk(q, r, y[0], r);
        let t = kf_filter(&trace(y), &params).unwrap();
        let s = rts_smooth(&t, &params).unwrap();
        for k in 0..t.len() {
            prop_assert!(s.p[k] <= t.p_post[k] * (1.0 + 1e-12));
            prop_assert!(s.p[k] >= 0.0);
        }
        prop_assert_eq!(s.x[t.len() - 1], t.x_post[t.len() - 1]);
    }

    #[test]
    fn smoother_matches_batch_map(y in samples(128), q in log_uniform(1e-6, 1e2), r in log_uniform(1e-6, 1e2)) {
        let params = FilterParams::random_walk(q, r, y[0], r);
        let t = kf_filter(&trace(y.clone()), &params).unwrap();
        let s = rts_smooth(&t, &params).unwrap();
        let oracle = batch_map_smooth(&y, &ScalarModel::random_walk(q, r, y[0], r));
        prop_assert!(rel_max_err(&s.x, &oracle, 1e-300) <= 1e-9);
    }

    #[test]
    fn denoise_keeps_shape(y in samples(64), q in log_uniform(1e-6, 1e2), r in 0.0..10.0f64) {
        let t = trace(y);
        let out = denoise_trace(&t, q, r).unwrap();
        prop_assert_eq!(out.len(), t.len());
        prop_assert_eq!(out.dt(), t.dt());
    }

    #[test]
    fn subtraction_round_trips(pair in prop::collection::vec((-1e3..1e3f32, -1e3..1e3f32), 1..64)) {
        // single-precision acquisitions promoted to f64: s - b is exact, so adding b back is too
        let s = trace(pair.iter().map(|p| f64::from(p.0)).collect());
        let b = trace(pair.iter().map(|p| f64::from(p.1)).collect());
        let d = differential_subtract(&s, &b).unwrap();
        let back: Vec<f64> = d.samples().iter().zip(b.samples()).map(|(d, b)| d + b).collect();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(s.samples()));
        prop_assert!(differential_subtract(&s, &s).unwrap().samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn envelope_dominates_and_scales(y in samples(128), alpha in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64]) {
        prop_assume!(y.len() >= 2);
        let t = trace(y.clone());
        let e = envelope(&t).unwrap();
        for (ev, s) in e.samples().iter().zip(&y) {
            prop_assert!(*ev >= s.abs() - 1e-9);
        }
        let es = envelope(&t.scaled(alpha).unwrap()).unwrap();
        let expect: Vec<f64> = e.samples().iter().map(|v| alpha.abs() * v).collect();
        prop_assert!(rel_max_err(es.samples(), &expect, 1e-300) <= 1e-9);
    }

    #[test]
    fn psnr_is_scale_invariant(y in prop::collection::vec(-10.0..10.0f64, 32..96), alpha in prop_oneof![-1e3..-1e-3f64, 1e-3..1e3f64]) {
        let roi = RoiSpec::new(8, 24).unwrap();
        let t = trace(y);
        let a = psnr(&t, roi).unwrap();
        let b = psnr(&t.scaled(alpha).unwrap(), roi).unwrap();
        match (a.db(), b.db()) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
            (None, None) => {}
            _ => prop_assert!(false, "finite/infinite mismatch {a} vs {b}"),
        }
    }

    #[test]
    fn estimate_r_is_scale_quadratic(y in samples(64), e in -20i32..20) {
        // power-of-two scaling is exact in binary floating point
        let alpha = 2f64.powi(e);
        let t = trace(y);
        let w = t.len();
        let base = estimate_r(&t, w).unwrap();
        prop_assert_eq!(estimate_r(&t.scaled(alpha).unwrap(), w).unwrap(), alpha * alpha * base);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn volume_round_trips_bit_identically(nx in 1usize..4, ny in 1usize..4, nt in 1usize..12, seed in any::<u64>()) {
        let data: Vec<f64> = (0..nx * ny * nt)
            .map(|i| f64::from_bits(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(i as u32 % 64) >> 2))
            .map(|v| if v.is_finite() { v } else { 0.0 })
            .collect();
        let v = Volume::new(nx, ny, nt, 1e-8, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.hdr");
        write_volume(&v, &path, Dtype::F64Le, None).unwrap();
        let back = read_volume(&path).unwrap();
        let bits = |v: &Volume| v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(back.dims(), v.dims());
        prop_assert_eq!(bits(&back), bits(&v));
    }

    #[test]
    fn trace_extraction_is_the_stored_run(nx in 1usize..4, ny in 1usize..4, nt in 1usize..12) {
        let data: Vec<f64> = (0..nx * ny * nt).map(|i| i as f64).collect();
        let v = Volume::new(nx, ny, nt, 1.0, data).unwrap();
        for x in 0..nx {
            for y in 0..ny {
                let start = ((x * ny) + y) * nt;
                let expect: Vec<f64> = (start..start + nt).map(|i| i as f64).collect();
                prop_assert_eq!(v.trace_slice(x, y), &expect[..]);
            }
        }
    }

    #[test]
    fn volume_ops_preserve_shape(nx in 1usize..3, ny in 1usize..3, y in prop::collection::vec(-1.0..1.0f64, 40)) {
        let traces: Vec<Trace> = (0..nx * ny).map(|i| trace(y.iter().map(|v| v + i as f64).collect())).collect();
        let v = Volume::from_traces(nx, ny, 1e-8, &traces).unwrap();
        let out = pipeline_denoise(&v, Some(&v), 1e-2, 16).unwrap();
        prop_assert_eq!(out.dims(), v.dims());
        let img = reconstruct(&v).unwrap();
        for x in 0..nx {
            for yy in 0..ny {
                let env = envelope(&v.trace(x, yy)).unwrap();
                let peak = env.samples().iter().fold(0.0_f64, |m, e| m.max(*e));
                prop_assert!(img.get(x, yy) >= 0.0);
                prop_assert!(img.get(x, yy) <= peak);
            }
        }
    }
}
