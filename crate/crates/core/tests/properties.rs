use haldual::family::{self, PVector};
use haldual::fixedpoint::{self, LyapunovKind};
use haldual::hduality;
use haldual::hmatrix::{named_hmatrix, run_fp_hmatrix};
use haldual::minimax::{self, MinimaxMethod};
use haldual::numerics::{dist, norm_sq, sub, DenseVector};
use haldual::operators::{nonexpansive_from_monotone, nonexpansive_ratio, random_linear_monotone, ProblemSpec};
use haldual::rng::{gaussian_vector, prng};
use haldual::trace::{max_sequence_gap, GRAD_NORM_SQ, RESIDUAL_SQ};
use haldual::{anti_transpose, Convention, FixedPointKind, HMatrix};
use proptest::prelude::*;

fn lower_rows(n: usize) -> impl Strategy<Value = HMatrix> {
    prop::collection::vec(-2.0f64..2.0, n * (n + 1) / 2).prop_map(move |v| {
        let mut h = HMatrix::zeros(n, Convention::FixedPoint).unwrap();
        let mut it = v.into_iter();
        for k in 0..n {
            for j in 0..=k {
                h.set(k, j, it.next().unwrap());
            }
        }
        h
    })
}

fn sized_hmatrix() -> impl Strategy<Value = HMatrix> {
    (1usize..10).prop_flat_map(lower_rows)
}

fn start(seed: u64, d: usize) -> DenseVector {
    gaussian_vector(&mut prng(seed.wrapping_add(77)), d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn anti_transpose_is_an_involution(h in sized_hmatrix()) {
        prop_assert_eq!(anti_transpose(&anti_transpose(&h)), h.clone());
        let a = anti_transpose(&h);
        let n = h.size();
        for k in 0..n {
            for j in 0..=k {
                prop_assert_eq!(a.get(k, j), h.get(n - 1 - j, n - 1 - k));
            }
        }
    }

    #[test]
    fn hmatrix_csv_round_trip(h in sized_hmatrix()) {
        let back = HMatrix::from_csv(&h.to_csv(), Convention::FixedPoint).unwrap();
        prop_assert!(back.max_abs_diff(&h) == 0.0);
    }

    #[test]
    fn f_map_is_invertible(n in 2usize..10, seed in any::<u64>()) {
        let mut rng = prng(seed);
        let u = hduality::random_weights(&mut rng, n, 0.1, 5.0);
        let g: Vec<DenseVector> = (0..n).map(|_| gaussian_vector(&mut rng, 2)).collect();
        let back = hduality::f_inverse(&u, &hduality::f_map(&u, &g).unwrap()).unwrap();
        prop_assert!(max_sequence_gap(&g, &back) < 1e-9);
    }

    #[test]
    fn duality_identity_holds(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = prng(seed);
        let h = hduality::random_hmatrix(&mut rng, n - 1).unwrap();
        let u = hduality::random_weights(&mut rng, n, 0.2, 3.0);
        let r = hduality::verify_duality_with(&h, &u, 4, &mut rng, 3).unwrap();
        prop_assert!(r.max_discrepancy < 1e-10);
        prop_assert!(r.psd_agree);
    }

    #[test]
    fn dual_weights_round_trip(seed in any::<u64>(), n in 2usize..12) {
        let u = hduality::random_weights(&mut prng(seed), n, 0.1, 4.0);
        let back = hduality::dualize_weights(&hduality::dualize_weights(&u));
        prop_assert!((back.tau - u.tau).abs() < 1e-12);
        for (a, b) in back.weights.iter().zip(&u.weights) {
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn resolvent_reflection_is_nonexpansive(seed in any::<u64>(), d in 1usize..9, mu in 0.0f64..1.0) {
        let p = random_linear_monotone(d, seed, mu, true).unwrap();
        let t = nonexpansive_from_monotone(&p.grad, 1.0).unwrap();
        prop_assert!(nonexpansive_ratio(&t, &mut prng(seed), 20) <= 1.0 + 1e-10);
        let fix = t.known_fix.clone().unwrap();
        prop_assert!(dist(&t.apply(&fix), &fix) < 1e-9 * (1.0 + norm_sq(&fix).sqrt()));
    }

    #[test]
    fn fixed_point_rates(seed in any::<u64>(), d in 1usize..9, n in 2usize..60) {
        let p = random_linear_monotone(d, seed, 0.0, true).unwrap();
        let t = nonexpansive_from_monotone(&p.grad, 1.0).unwrap();
        let y0 = start(seed, d);
        let r2 = fixedpoint::initial_distance_sq(&t, &y0).unwrap();
        let ohm = fixedpoint::run_ohm(&t, &y0, n).unwrap();
        for (k, v) in ohm.metric(RESIDUAL_SQ).iter().enumerate() {
            prop_assert!(*v <= fixedpoint::rate_bound(r2, (k + 1) as f64) + 1e-9);
        }
        let dual = fixedpoint::run_dual_ohm(&t, &y0, n).unwrap();
        prop_assert!(*dual.metric(RESIDUAL_SQ).last().unwrap() <= fixedpoint::rate_bound(r2, n as f64) + 1e-9);
        prop_assert_eq!(dual.iterates.len(), n);
    }

    #[test]
    fn forms_agree(seed in any::<u64>(), d in 1usize..6, n in 2usize..25) {
        let p = random_linear_monotone(d, seed, 0.0, true).unwrap();
        let t = nonexpansive_from_monotone(&p.grad, 1.0).unwrap();
        let y0 = start(seed, d);
        for kind in [FixedPointKind::Ohm, FixedPointKind::DualOhm] {
            prop_assert!(fixedpoint::form_equivalence_gap(kind, &t, &y0, n).unwrap() < 1e-10);
        }
    }

    #[test]
    fn lyapunov_identities(seed in any::<u64>(), d in 1usize..6, n in 2usize..30) {
        let p = random_linear_monotone(d, seed, 0.0, true).unwrap();
        let t = nonexpansive_from_monotone(&p.grad, 1.0).unwrap();
        let y0 = start(seed, d);
        let u = fixedpoint::lyapunov_series(LyapunovKind::UOhm, &t, &fixedpoint::run_ohm(&t, &y0, n).unwrap()).unwrap();
        let v = fixedpoint::lyapunov_series(LyapunovKind::VDualOhm, &t, &fixedpoint::run_dual_ohm(&t, &y0, n).unwrap()).unwrap();
        let scale = |s: &[f64]| s.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        prop_assert!(u.identity_gap <= 1e-10 * scale(&u.values));
        prop_assert!(v.identity_gap <= 1e-10 * scale(&v.values));
        prop_assert!(u.expected_decrements.iter().chain(&v.expected_decrements).all(|e| *e >= -1e-12));
    }

    #[test]
    fn gradient_methods_meet_bound(seed in any::<u64>(), d in 1usize..7, n in 1usize..80) {
        let p = random_linear_monotone(d, seed, 0.0, true).unwrap();
        let alpha = 1.0 / p.lipschitz().unwrap();
        let x0 = start(seed, d);
        let r2 = norm_sq(&sub(&x0, p.known_saddle().unwrap()));
        let feg = minimax::run(MinimaxMethod::Feg, &p, &x0, alpha, n).unwrap();
        let g = feg.metric(GRAD_NORM_SQ);
        for k in 1..=n {
            prop_assert!(g[k] <= minimax::gradient_bound(r2, alpha, k) * (1.0 + 1e-9) + 1e-12);
        }
        let dual = minimax::run(MinimaxMethod::DualFeg, &p, &x0, alpha, n).unwrap();
        prop_assert!(*dual.metric(GRAD_NORM_SQ).last().unwrap() <= minimax::gradient_bound(r2, alpha, n) * (1.0 + 1e-9) + 1e-12);
        prop_assert!(dist(feg.last(), dual.last()) <= 1e-9 * (1.0 + norm_sq(&x0).sqrt()));
    }

    #[test]
    fn synthesized_members_certify(n in 3usize..14, fracs in prop::collection::vec(0.02f64..0.98, 12), seed in any::<u64>()) {
        let nf = n as f64;
        let mut p = vec![1.0 / nf];
        for k in 2..n {
            let r = nf - k as f64 + 1.0;
            let lo = 1.0 / r;
            let hi = ((r - 1.0) * p[k - 2] + 1.0) / r;
            p.push(lo + fracs[k - 2] * (hi - lo));
        }
        let p = PVector::new(n, p).unwrap();
        prop_assert!(p.is_interior());
        let h = family::synthesize(&p).unwrap();
        let back = PVector::from_hmatrix(&h).unwrap();
        for k in 1..n {
            prop_assert!((back.get(k) - p.get(k)).abs() < 1e-12);
        }
        let cert = family::certify(&h, &p).unwrap();
        prop_assert!(cert.passes(1e-8));
        prop_assert!(cert.lambdas.min() > 0.0);
        prop_assert!(cert.closure_residual < 1e-8);
        let q = random_linear_monotone(3, seed, 0.0, true).unwrap();
        let t = nonexpansive_from_monotone(&q.grad, 1.0).unwrap();
        let y0 = start(seed, 3);
        let run = run_fp_hmatrix(&h, &t, &y0).unwrap();
        let r2 = fixedpoint::initial_distance_sq(&t, &y0).unwrap();
        prop_assert!(*run.metric(RESIDUAL_SQ).last().unwrap() <= fixedpoint::rate_bound(r2, nf) + 1e-9);
    }

    #[test]
    fn composed_meets_terminal_rate(seed in any::<u64>(), n in 3usize..30, frac in 0.0f64..1.0) {
        let np = 2 + ((frac * (n - 2) as f64) as usize).min(n - 3);
        let p = random_linear_monotone(4, seed, 0.0, true).unwrap();
        let t = nonexpansive_from_monotone(&p.grad, 1.0).unwrap();
        let y0 = start(seed, 4);
        let run = fixedpoint::run_composed(&t, &y0, n, np).unwrap();
        let r2 = fixedpoint::initial_distance_sq(&t, &y0).unwrap();
        prop_assert!(*run.metric(RESIDUAL_SQ).last().unwrap() <= fixedpoint::rate_bound(r2, n as f64) + 1e-9);
        let via_h = run_fp_hmatrix(&fixedpoint::composed_hmatrix(n, np).unwrap(), &t, &y0).unwrap();
        prop_assert!(max_sequence_gap(&run.iterates, &via_h.iterates) < 1e-10);
    }

    #[test]
    fn inline_specs_parse(d in 1usize..50, seed in any::<u32>()) {
        let spec = ProblemSpec::parse_inline(&format!("random_linear_monotone:d={d},seed={seed}")).unwrap();
        prop_assert_eq!(spec, ProblemSpec::RandomLinearMonotone { d, seed: seed as u64, mu: 0.0, affine: false });
    }
}

#[test]
fn named_matrices_certify_in_the_family() {
    for n in 3..=20 {
        for kind in [FixedPointKind::Ohm, FixedPointKind::DualOhm] {
            let h = named_hmatrix(kind, n).unwrap();
            let cert = family::certify(&h, &PVector::from_hmatrix(&h).unwrap()).unwrap();
            assert!(cert.passes(1e-10), "{kind:?} N={n}");
        }
    }
}
