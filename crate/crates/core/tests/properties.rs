use num_bigint::BigInt;
use num_rational::BigRational;
use progpoly::constraints::{hex64, parse_hex64, rounding_interval};
use progpoly::exact::{f64_to_rational, mul_pow2};
use progpoly::formats::round_exact;
use progpoly::generator::{weighted_random_sample, ProgressivePolynomial, SpecialCase, Weights};
use progpoly::lp::{solve, LpProblem, LpRow};
use progpoly::runtime::{horner_eval, kernel_eval, ExponentSchedule};
use progpoly::{round_f64, CompiledFunction, ExactReal, FpFormat, FunctionId, LadderRung, LpStatus, RoundingMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn format() -> impl Strategy<Value = FpFormat> {
    (2u32..=8).prop_flat_map(|e| (e + 2..=e + 16).prop_map(move |n| FpFormat::new(n, e).unwrap()))
}

fn mode() -> impl Strategy<Value = RoundingMode> {
    prop::sample::select(RoundingMode::ALL.to_vec())
}

fn finite_f64() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<u64>().prop_map(f64::from_bits).prop_filter("finite", |v| v.is_finite()),
        (-1e6f64..1e6),
        (-300i32..300, 1u64..1 << 20).prop_map(|(e, m)| m as f64 * 2f64.powi(e)),
    ]
}

fn rational() -> impl Strategy<Value = BigRational> {
    (1u64..1 << 40, 1u64..1 << 40, -160i64..140, any::<bool>()).prop_map(|(n, d, e, neg)| {
        let r = mul_pow2(&BigRational::new(BigInt::from(n), BigInt::from(d)), e);
        if neg {
            -r
        } else {
            r
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn fast_rounding_matches_exact(x in finite_f64(), fmt in format(), m in mode()) {
        prop_assert_eq!(round_f64(x, fmt, m), round_exact(&ExactReal::from_f64(x), fmt, m));
    }

    #[test]
    fn directed_results_bracket_input(x in rational(), fmt in format()) {
        let ex = ExactReal::Finite(x);
        let down = round_exact(&ex, fmt, RoundingMode::TowardNegative).decode();
        let up = round_exact(&ex, fmt, RoundingMode::TowardPositive).decode();
        prop_assert!(down.partial_cmp_real(&ex).unwrap().is_le());
        prop_assert!(up.partial_cmp_real(&ex).unwrap().is_ge());
    }

    #[test]
    fn round_to_odd_is_exact_or_odd(x in rational(), fmt in format()) {
        let ex = ExactReal::Finite(x);
        let y = round_exact(&ex, fmt, RoundingMode::ToOdd);
        let exact = y.decode() == ex;
        prop_assert!(exact || y.is_odd());
    }

    #[test]
    fn double_rounding_through_odd(x in rational(), e in 2u32..=8, k_extra in 2u32..=10, gap in 2u32..=4, m in prop::sample::select(RoundingMode::IEEE.to_vec())) {
        let target = FpFormat::new(e + k_extra, e).unwrap();
        let wide = FpFormat::new(e + k_extra + gap, e).unwrap();
        let ex = ExactReal::Finite(x);
        let via = round_exact(&round_exact(&ex, wide, RoundingMode::ToOdd).decode(), target, m);
        prop_assert_eq!(via, round_exact(&ex, target, m));
    }

    #[test]
    fn rounding_interval_contains_input(x in rational(), fmt in format(), m in mode()) {
        let ex = ExactReal::Finite(x);
        let y = round_exact(&ex, fmt, m);
        prop_assert!(rounding_interval(y, fmt, m).contains(&ex));
    }

    #[test]
    fn hex64_round_trips(x in any::<u64>().prop_map(f64::from_bits)) {
        let back = parse_hex64(&hex64(x)).unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn horner_matches_power_sum(c in prop::collection::vec(-64i32..64, 1..8), x in -8i32..8, terms in 1usize..8) {
        let coeffs: Vec<f64> = c.iter().map(|&v| v as f64).collect();
        let t = terms.min(coeffs.len());
        let x = x as f64 / 4.0;
        let want: f64 = (0..t).map(|j| coeffs[j] * x.powi(j as i32)).sum();
        prop_assert_eq!(horner_eval(&coeffs, t, x), want);
    }

    #[test]
    fn odd_schedule_is_odd(c in prop::collection::vec(-64i32..64, 1..6), x in 1i32..32) {
        let coeffs: Vec<f64> = c.iter().map(|&v| v as f64).collect();
        let x = x as f64 / 64.0;
        let t = coeffs.len();
        prop_assert_eq!(kernel_eval(&coeffs, t, -x, ExponentSchedule::Odd), -kernel_eval(&coeffs, t, x, ExponentSchedule::Odd));
    }

    #[test]
    fn prefix_cost_grows_with_terms(t in 1usize..20) {
        for s in [ExponentSchedule::Dense, ExponentSchedule::Odd, ExponentSchedule::Even] {
            prop_assert!(s.multiply_adds(t) < s.multiply_adds(t + 1));
        }
    }

    #[test]
    fn weighted_sample_is_distinct_and_sized(n in 1usize..200, size in 1usize..50, doubled in prop::collection::vec(0usize..200, 0..40), seed in any::<u64>()) {
        let mut w = Weights::uniform(n);
        for i in doubled {
            if i < n {
                w.double(i);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = weighted_random_sample(&w, size, &mut rng);
        prop_assert_eq!(s.len(), size.min(n));
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), size.min(n));
        prop_assert!(s.iter().all(|&i| i < n));
    }

    #[test]
    fn lp_solution_satisfies_every_row(seed in any::<u64>(), k in 1usize..=5) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..k).map(|_| rng.random_range(-4.0..4.0)).collect();
        let rows: Vec<LpRow> = (0..4 * k)
            .map(|_| {
                let x: f64 = rng.random_range(-1.0..1.0);
                let terms = rng.random_range(1..=k);
                let y = horner_eval(&truth, terms, x);
                let w: f64 = rng.random_range(1e-6..1e-1);
                LpRow::from_f64(x, terms, y - w, y + w)
            })
            .collect();
        let p = LpProblem::new(k, rows.clone());
        let s = solve(&p);
        prop_assert_eq!(s.status, LpStatus::Feasible);
        for r in &rows {
            let mut v = BigRational::from_integer(0.into());
            let mut pw = BigRational::from_integer(1.into());
            for c in &s.coefficients[..r.terms] {
                v += c * &pw;
                pw *= &r.x;
            }
            let v = ExactReal::Finite(v);
            prop_assert!(v.partial_cmp_real(&r.lower).unwrap().is_ge());
            prop_assert!(v.partial_cmp_real(&r.upper).unwrap().is_le());
        }
    }

    #[test]
    fn artifact_json_round_trips(c in prop::collection::vec(-1e3f64..1e3, 3), split in 0.0f64..0.3, input in 1.0f64..2.0) {
        let bf16 = FpFormat::new(16, 8).unwrap();
        let tf32 = FpFormat::new(19, 8).unwrap();
        let poly = ProgressivePolynomial {
            function: FunctionId::Log2,
            ladder: vec![
                LadderRung { format: bf16, terms: 2, interval: Default::default() },
                LadderRung { format: tf32, terms: 3, interval: Default::default() },
            ],
            exponents: ExponentSchedule::Odd,
            split_points: vec![split],
            coefficients: vec![c.clone(), c.iter().map(|v| -v).collect()],
            special_cases: vec![SpecialCase { rung: 0, input: round_f64(input, bf16, RoundingMode::NearestEven).to_f64(), result: 0.5 }],
        };
        let cf = CompiledFunction::new(poly.clone()).unwrap();
        let back = CompiledFunction::from_json(&cf.to_json()).unwrap();
        prop_assert_eq!(&back.poly, &poly);
        prop_assert_eq!(back.to_json(), cf.to_json());
    }
}

#[test]
fn binary64_embedding_is_exact() {
    let fmt = FpFormat::new(16, 8).unwrap();
    for v in fmt.enumerate().unwrap().filter(|v| v.is_finite()) {
        assert_eq!(ExactReal::Finite(f64_to_rational(v.to_f64())), v.decode());
    }
}
