//! Exhaustive conformance checks against the oracle and the statistical
//! convergence harness for the sampling loop.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::IntervalConstraint;
use crate::error::Result;
use crate::formats::{FpFormat, FpValue, RoundingMode};
use crate::generator::{run_sampling, SamplingParams};
use crate::oracle::{Evaluation, FunctionId, OracleCache};
use crate::runtime::{horner_eval, CompiledFunction};

pub const MISMATCH_CAP: usize = 100;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub input: String,
    pub got: String,
    pub expected: String,
}

/// Results for one `(format, mode)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeReport {
    pub format: FpFormat,
    pub mode: RoundingMode,
    pub rung: usize,
    pub terms: usize,
    pub total: u64,
    pub mismatch_count: u64,
    /// First mismatches in encoding order, at most [`MISMATCH_CAP`].
    pub mismatches: Vec<Mismatch>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub function: FunctionId,
    pub entries: Vec<ModeReport>,
    /// Failed structural checks, such as decreasing term counts.
    pub notes: Vec<String>,
    pub pass: bool,
}

impl ConformanceReport {
    fn new(function: FunctionId, entries: Vec<ModeReport>) -> Self {
        let pass = entries.iter().all(|e| e.pass);
        ConformanceReport { function, entries, notes: Vec::new(), pass }
    }

    pub fn merge(mut self, other: ConformanceReport) -> Self {
        self.entries.extend(other.entries);
        self.notes.extend(other.notes);
        self.pass = self.pass && other.pass;
        self
    }

    pub fn total_mismatches(&self) -> u64 {
        self.entries.iter().map(|e| e.mismatch_count).sum()
    }
}

fn same(a: FpValue, b: FpValue) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

/// Expected results for every encoding of `fmt`, one vector per mode.
fn expected_results(f: FunctionId, fmt: FpFormat, modes: &[RoundingMode], cache: Option<&Path>) -> Result<Vec<Vec<FpValue>>> {
    if let Some(dir) = cache {
        return modes
            .iter()
            .map(|&m| {
                let c = OracleCache::load_or_build(dir, f, fmt, m)?;
                Ok(c.outputs.iter().map(|&b| fmt.value(b)).collect())
            })
            .collect();
    }
    let inputs: Vec<FpValue> = fmt.enumerate()?.collect();
    let rows: Vec<Vec<FpValue>> = inputs
        .into_par_iter()
        .map(|x| {
            let v = x.decode();
            match Evaluation::new(f, &v) {
                Err(_) => Ok(vec![fmt.nan(); modes.len()]),
                Ok(mut ev) => modes.iter().map(|&m| ev.round(fmt, m).map(|r| r.value)).collect(),
            }
        })
        .collect::<Result<_>>()?;
    Ok((0..modes.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
}

/// Every encoding of `fmt` under every mode, served by `rung`.
pub fn check_with_rung(
    cf: &CompiledFunction,
    fmt: FpFormat,
    modes: &[RoundingMode],
    rung: usize,
    cache: Option<&Path>,
) -> Result<ConformanceReport> {
    let f = cf.function();
    let expected = expected_results(f, fmt, modes, cache)?;
    let inputs: Vec<FpValue> = fmt.enumerate()?.collect();
    let entries = modes
        .iter()
        .zip(&expected)
        .map(|(&mode, want)| {
            let bad: Vec<(FpValue, FpValue, FpValue)> = inputs
                .par_iter()
                .zip(want.par_iter())
                .filter_map(|(&x, &w)| {
                    let got = cf.evaluate_rung(x.to_f64(), fmt, mode, rung);
                    (!same(got, w)).then_some((x, got, w))
                })
                .collect();
            ModeReport {
                format: fmt,
                mode,
                rung,
                terms: cf.ladder()[rung].terms,
                total: inputs.len() as u64,
                mismatch_count: bad.len() as u64,
                mismatches: bad
                    .iter()
                    .take(MISMATCH_CAP)
                    .map(|(x, g, w)| Mismatch { input: x.hex(), got: g.hex(), expected: w.hex() })
                    .collect(),
                pass: bad.is_empty(),
            }
        })
        .collect();
    Ok(ConformanceReport::new(f, entries))
}

/// Every encoding of `fmt`, dispatched to the smallest rung that covers it.
pub fn check_exhaustive(cf: &CompiledFunction, fmt: FpFormat, modes: &[RoundingMode]) -> Result<ConformanceReport> {
    check_with_rung(cf, fmt, modes, cf.rung_for(fmt)?, None)
}

/// Each rung's own format with its truncated term count, under the modes
/// its interval mode guarantees.
pub fn check_progressive(cf: &CompiledFunction, cache: Option<&Path>) -> Result<ConformanceReport> {
    let f = cf.function();
    let mut report = ConformanceReport::new(f, Vec::new());
    for (j, r) in cf.ladder().iter().enumerate() {
        let modes = cf.guaranteed_modes(j, r.format);
        report = report.merge(check_with_rung(cf, r.format, modes, j, cache)?);
    }
    for w in cf.ladder().windows(2) {
        if w[1].terms < w[0].terms {
            report.notes.push(format!("term counts decrease from {} to {}", w[0].format.name(), w[1].format.name()));
            report.pass = false;
        }
    }
    Ok(report)
}

/// `F(k, E)` for every `k` in `bits` with the top rung's full term count.
pub fn sweep(cf: &CompiledFunction, bits: std::ops::RangeInclusive<u32>, modes: &[RoundingMode]) -> Result<ConformanceReport> {
    let e = cf.ladder()[0].format.exponent_bits();
    let top = cf.top_rung();
    let mut report = ConformanceReport::new(cf.function(), Vec::new());
    for k in bits {
        let fmt = FpFormat::new(k, e)?;
        report = report.merge(check_with_rung(cf, fmt, modes, top, None)?);
    }
    Ok(report)
}

/// Default sweep range: `|E| + 2` bits up to the top rung.
pub fn sweep_range(cf: &CompiledFunction) -> std::ops::RangeInclusive<u32> {
    let top = cf.ladder()[cf.top_rung()].format;
    top.exponent_bits() + 2..=top.total_bits()
}

fn default_seeds() -> u64 {
    20
}

fn default_width_log2() -> i32 {
    -30
}

fn default_bench_iterations() -> usize {
    2000
}

fn default_factor() -> usize {
    6
}

/// Synthetic full-rank instances: `n` random points in `[-1, 1]`, intervals
/// of width `2 * 2^width_log2` around a random polynomial with `k` terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub ks: Vec<usize>,
    pub ns: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default = "default_width_log2")]
    pub width_log2: i32,
    #[serde(default = "default_bench_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_factor")]
    pub sample_size_factor: usize,
    #[serde(default)]
    pub base_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStats {
    pub k: usize,
    pub n: usize,
    pub runs: u64,
    pub successes: u64,
    pub iterations: Vec<usize>,
    pub median_iterations: f64,
    /// `6 k ln n`.
    pub bound: f64,
    pub lucky: usize,
    pub total_iterations: usize,
    pub lucky_fraction: f64,
    /// `0.5 - 3 sqrt(0.25 / total_iterations)`.
    pub lucky_floor: f64,
    pub pass: bool,
}

pub fn synthetic_constraints(k: usize, n: usize, width_log2: i32, seed: u64) -> (Vec<f64>, Vec<IntervalConstraint>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poly: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let half = 2f64.powi(width_log2);
    let cs = (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            let v = horner_eval(&poly, k, x);
            IntervalConstraint { x, lower: v - half, upper: v + half, term_count: k, weight: 1, origins: Vec::new() }
        })
        .collect();
    (poly, cs)
}

fn median(v: &[usize]) -> f64 {
    let mut s = v.to_vec();
    s.sort_unstable();
    if s.is_empty() {
        return f64::NAN;
    }
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m] as f64
    } else {
        (s[m - 1] + s[m]) as f64 / 2.0
    }
}

pub fn convergence_bench(spec: &ConvergenceSpec) -> Vec<ConvergenceStats> {
    let mut out = Vec::new();
    for &k in &spec.ks {
        for &n in &spec.ns {
            let mut iterations = Vec::new();
            let (mut successes, mut lucky, mut total) = (0, 0, 0);
            for seed in 0..spec.seeds {
                let seed = spec.base_seed.wrapping_mul(1_000_003).wrapping_add(seed * 7919 + (k * 31 + n) as u64);
                let (_, cs) = synthetic_constraints(k, n, spec.width_log2, seed);
                let mut p = SamplingParams::new(k, spec.sample_size_factor * k * k, spec.max_iterations, 1);
                p.retries = 8;
                let res = run_sampling(&cs, &p, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
                successes += u64::from(res.success);
                iterations.push(res.iterations);
                lucky += res.lucky;
                total += res.iterations;
            }
            let bound = 6.0 * k as f64 * (n as f64).ln();
            let median_iterations = median(&iterations);
            let lucky_fraction = lucky as f64 / total.max(1) as f64;
            let lucky_floor = 0.5 - 3.0 * (0.25 / total.max(1) as f64).sqrt();
            let pass = successes == spec.seeds && median_iterations <= bound && lucky_fraction >= lucky_floor;
            out.push(ConvergenceStats {
                k,
                n,
                runs: spec.seeds,
                successes,
                iterations,
                median_iterations,
                bound,
                lucky,
                total_iterations: total,
                lucky_fraction,
                lucky_floor,
                pass,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{IntervalMode, LadderRung};
    use crate::generator::{ProgressivePolynomial, SpecialCase};
    use crate::runtime::ExponentSchedule;

    fn exact_log2_artifact() -> CompiledFunction {
        // F(8,4): log2 only has specials and polynomial inputs; a crude
        // linear kernel fails and the checker has to say so.
        let fmt = FpFormat::new(8, 4).unwrap();
        CompiledFunction::new(ProgressivePolynomial {
            function: FunctionId::Log2,
            ladder: vec![LadderRung { format: fmt, terms: 2, interval: IntervalMode::RoundToOdd }],
            exponents: ExponentSchedule::Dense,
            split_points: vec![],
            coefficients: vec![vec![-1.0, 1.0]],
            special_cases: vec![SpecialCase { rung: 0, input: 3.0, result: 1.5849609375 }],
        })
        .unwrap()
    }

    #[test]
    fn crude_kernel_is_caught_with_encodings() {
        let cf = exact_log2_artifact();
        let fmt = cf.ladder()[0].format;
        let r = check_exhaustive(&cf, fmt, &RoundingMode::IEEE).unwrap();
        assert!(!r.pass);
        assert_eq!(r.entries.len(), 5);
        let e = &r.entries[0];
        assert_eq!(e.total, 256);
        assert!(e.mismatch_count > 0);
        assert!(e.mismatches[0].input.starts_with("0x"));
        assert!(e.mismatches.len() as u64 <= e.mismatch_count);
    }

    #[test]
    fn specials_agree_with_oracle() {
        let cf = exact_log2_artifact();
        let fmt = cf.ladder()[0].format;
        let r = check_exhaustive(&cf, fmt, &[RoundingMode::NearestEven]).unwrap();
        let bad: Vec<f64> = r.entries[0]
            .mismatches
            .iter()
            .map(|m| fmt.value(u64::from_str_radix(&m.input[2..], 16).unwrap()).to_f64())
            .collect();
        for x in bad {
            assert!(x.is_finite() && x > 0.0 && x.log2().fract() != 0.0, "{x}");
            assert_ne!(x, 3.0);
        }
    }

    #[test]
    fn synthetic_instances_converge() {
        let spec = ConvergenceSpec {
            ks: vec![3],
            ns: vec![2000],
            seeds: 3,
            width_log2: -30,
            max_iterations: 500,
            sample_size_factor: 6,
            base_seed: 0,
        };
        let s = &convergence_bench(&spec)[0];
        assert_eq!(s.successes, 3);
        assert!(s.median_iterations <= s.bound);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3, 1, 2]), 2.0);
        assert_eq!(median(&[4, 1, 2, 3]), 2.5);
    }
}
