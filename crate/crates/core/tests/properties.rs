use heavylog::clt::{stirling_gap, LawConstants};
use heavylog::matrix::self_normalize;
use heavylog::moments::oracle::{random_rational_unit_vector, random_rational_weights};
use heavylog::moments::{
    fourth_moment_sphere, k_coefficients, permutation_oracle, sphere_residuals, Rational, Scalar, WeightVector,
};
use heavylog::perpendiculars::{girko_log_det_observed, ProjectionState};
use heavylog::sampling::fill_matrix;
use heavylog::{RngStream, TailLaw};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

fn weights() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.001f64..1.0, 2..9).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn laws() -> impl Strategy<Value = TailLaw> {
    prop_oneof![
        Just(TailLaw::Gaussian),
        (2.2f64..6.0).prop_map(|df| TailLaw::StudentT { df }),
        (2.2f64..6.0).prop_map(|alpha| TailLaw::SymmetricPareto { alpha }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weight_sum_reductions(a in weights()) {
        let w = WeightVector::new(a.clone()).unwrap();
        let s = w.power_sums();
        let n = a.len();
        let (mut pair, mut pair21, mut pair31, mut pair22, mut triple211, mut quad) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            for l in 0..n {
                if k == l {
                    continue;
                }
                pair += a[k] * a[l];
                pair21 += a[k] * a[k] * a[l];
                pair31 += a[k].powi(3) * a[l];
                pair22 += a[k] * a[k] * a[l] * a[l];
                for m in 0..n {
                    if m == k || m == l {
                        continue;
                    }
                    triple211 += a[k] * a[k] * a[l] * a[m];
                    for o in 0..n {
                        if o != k && o != l && o != m {
                            quad += a[k] * a[l] * a[m] * a[o];
                        }
                    }
                }
            }
        }
        let tol = 1e-12;
        prop_assert!((pair - (1.0 - s.s2)).abs() < tol);
        prop_assert!((pair21 - (s.s2 - s.s3)).abs() < tol);
        prop_assert!((pair31 - (s.s3 - s.s4)).abs() < tol);
        prop_assert!((pair22 - (s.s2 * s.s2 - s.s4)).abs() < tol);
        prop_assert!((triple211 - (s.s2 - s.s2 * s.s2 - 2.0 * s.s3 + 2.0 * s.s4)).abs() < tol);
        prop_assert!((quad - (1.0 - 6.0 * s.s2 + 3.0 * s.s2 * s.s2 + 8.0 * s.s3 - 6.0 * s.s4)).abs() < tol);
    }

    #[test]
    fn k_coefficients_sum_to_zero(a in weights()) {
        let w = WeightVector::new(a.clone()).unwrap();
        prop_assert!(k_coefficients(w.power_sums(), a.len()).sum().abs() <= 1e-10);
    }

    #[test]
    fn equal_weights_collapse(n in 3usize..7, seed in any::<u64>()) {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let z: Vec<Rational> = random_rational_unit_vector(n, &mut rng);
        let t = permutation_oracle(&z, true, 4).unwrap();
        let a = WeightVector::<Rational>::uniform(n).unwrap();
        prop_assert_eq!(fourth_moment_sphere(&a, &t, n).unwrap(), Rational::from_int(0));
        for r in sphere_residuals(&t) {
            prop_assert_eq!(r.residual, Rational::from_int(0));
        }
        let w: Vec<Rational> = random_rational_weights(n, &mut rng);
        let kc = k_coefficients(WeightVector::new(w).unwrap().power_sums(), n);
        prop_assert_eq!(kc.sum(), Rational::from_int(0));
    }

    #[test]
    fn girko_step_invariants(law in laws(), p in 2usize..25, extra in 1usize..40, seed in any::<u64>()) {
        let n = p + extra;
        let x = fill_matrix(&law, p, n, &RngStream::new(seed, 0)).unwrap();
        let y = self_normalize(&x).unwrap();
        let mut worst_split = 0.0f64;
        let mut worst_trace = 0.0f64;
        let mut worst_idem = 0.0f64;
        let mut jensen = true;
        let trace = girko_log_det_observed(&y, |state, row| {
            let nf = n as f64;
            let (u, v) = state.split_uv(row);
            let direct = nf * state.quad_form(row) - 1.0;
            worst_split = worst_split.max((u + v - direct).abs());
            let sums = state.diag_power_sums(4).unwrap();
            worst_trace = worst_trace.max((sums[0] - 1.0).abs());
            let ns2 = nf * sums[1];
            jensen &= ns2 >= 1.0 - 1e-12 && ns2 <= nf * state.scale() + 1e-12;
            // Q^2 = Q / (n - i) on the row as a probe.
            let q1 = state.apply_q(row);
            let q2 = state.apply_q(&q1);
            for (a, b) in q2.iter().zip(&q1) {
                worst_idem = worst_idem.max((a - b * state.scale()).abs());
            }
        }).unwrap();
        prop_assert!(worst_split <= 1e-10, "split {}", worst_split);
        prop_assert!(worst_trace <= 1e-10);
        prop_assert!(worst_idem <= 1e-10);
        prop_assert!(jensen);
        for (i, z) in trace.z_tilde.iter().enumerate() {
            prop_assert!((trace.u_part[i] + trace.v_part[i] - z).abs() <= 1e-10);
        }
    }

    #[test]
    fn dense_q_power_sums(seed in any::<u64>(), i in 0usize..12) {
        let n = 20;
        let x = fill_matrix(&TailLaw::StudentT { df: 3.5 }, i + 1, n, &RngStream::new(seed, 1)).unwrap();
        let y = self_normalize(&x).unwrap();
        let mut checked = false;
        girko_log_det_observed(&y, |state: &ProjectionState, _| {
            if state.step() != i {
                return;
            }
            let q = state.materialize_q();
            let sums = state.diag_power_sums(4).unwrap();
            for (j, s) in sums.iter().enumerate() {
                let dense: f64 = (0..n).map(|k| q[k * n + k].powi(j as i32 + 1)).sum();
                assert!((dense - s).abs() <= 1e-12, "S_{} {} vs {}", j + 1, dense, s);
            }
            for k in 0..n {
                for l in 0..n {
                    assert!((q[k * n + l] - state.q_entry(k, l)).abs() <= 1e-13);
                }
            }
            checked = true;
        }).unwrap();
        prop_assert!(checked);
    }

    #[test]
    fn fill_is_deterministic(law in laws(), p in 1usize..6, n in 1usize..9, seed in any::<u64>()) {
        let rng = RngStream::new(seed, 3);
        let a = fill_matrix(&law, p, n, &rng).unwrap();
        let b = fill_matrix(&law, p + 2, n + 3, &rng).unwrap();
        prop_assert_eq!(&a, &fill_matrix(&law, p, n, &rng).unwrap());
        for i in 0..p {
            prop_assert_eq!(a.row(i), &b.row(i)[..n]);
        }
    }

    #[test]
    fn corr_constants_are_consistent(n in 2usize..3000, frac in 0.001f64..0.999) {
        let p = ((n as f64 * frac) as usize).clamp(1, n - 1);
        let c = LawConstants::new(p, n).unwrap();
        prop_assert!(c.sigma2_n > 0.0);
        prop_assert!(c.c_n <= 0.0);
        prop_assert!(stirling_gap(p, n).unwrap().abs() < 0.51);
    }
}
