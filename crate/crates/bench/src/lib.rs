use std::hint::black_box;

use criterion::{BenchmarkId, Criterion, Throughput};
use progpoly::formats::round_exact;
use progpoly::generator::{weighted_random_sample, Weights};
use progpoly::lp::{solve, LpProblem, LpRow};
use progpoly::runtime::horner_eval;
use progpoly::{round_f64, CompiledFunction, ExactReal, FpFormat, RoundingMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const LOG2_ARTIFACT: &str = include_str!("../data/log2.json");

pub fn log2() -> CompiledFunction {
    CompiledFunction::from_json(LOG2_ARTIFACT).expect("bundled artifact")
}

/// Positive finite inputs of `fmt`, strided so each batch stays small.
pub fn inputs(fmt: FpFormat, stride: u64) -> Vec<f64> {
    (1..fmt.max_finite_magnitude()).step_by(stride as usize).map(|b| fmt.value(b).to_f64()).collect()
}

fn evaluate(c: &mut Criterion) {
    let cf = log2();
    let mut g = c.benchmark_group("evaluate");
    for (j, rung) in cf.ladder().iter().enumerate() {
        let fmt = rung.format;
        let xs = inputs(fmt, 64);
        g.throughput(Throughput::Elements(xs.len() as u64));
        g.bench_with_input(BenchmarkId::new("log2", fmt.name()), &xs, |b, xs| {
            b.iter(|| xs.iter().map(|&x| cf.evaluate_rung(x, fmt, RoundingMode::NearestEven, j).bits).sum::<u64>())
        });
    }
    g.finish();
}

fn horner(c: &mut Criterion) {
    let cf = log2();
    let coeffs = &cf.poly.coefficients[0];
    let mut g = c.benchmark_group("horner");
    for terms in 1..=coeffs.len() {
        g.bench_with_input(BenchmarkId::from_parameter(terms), &terms, |b, &t| b.iter(|| horner_eval(coeffs, t, black_box(0.2))));
    }
    g.finish();
}

fn rounding(c: &mut Criterion) {
    let fmt = FpFormat::new(19, 8).unwrap();
    let x = std::f64::consts::PI;
    let exact = ExactReal::from_f64(x);
    c.bench_function("round_f64", |b| b.iter(|| round_f64(black_box(x), fmt, RoundingMode::NearestEven)));
    c.bench_function("round_exact", |b| b.iter(|| round_exact(black_box(&exact), fmt, RoundingMode::ToOdd)));
}

fn lp(c: &mut Criterion) {
    let mut g = c.benchmark_group("lp_solve");
    for k in [3usize, 6] {
        let rows: Vec<LpRow> = (0..6 * k)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / (6 * k) as f64;
                let y = x.exp();
                LpRow::from_f64(x, k, y - 1e-3, y + 1e-3)
            })
            .collect();
        let p = LpProblem::new(k, rows);
        g.bench_with_input(BenchmarkId::from_parameter(k), &p, |b, p| b.iter(|| solve(p)));
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let mut w = Weights::uniform(100_000);
    for i in (0..100_000).step_by(7) {
        w.double(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("weighted_sample_36_of_100k", |b| b.iter(|| weighted_random_sample(&w, 36, &mut rng)));
}

pub fn benchmarks(c: &mut Criterion) {
    evaluate(c);
    horner(c);
    rounding(c);
    lp(c);
    sampling(c);
}
