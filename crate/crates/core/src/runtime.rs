//! The evaluator: special values and special cases first, then reduction,
//! a truncated Horner kernel in binary64, compensation and final rounding.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constraints::{hex64, parse_hex64, validate_ladder, IntervalMode, LadderRung};
use crate::error::{Error, Result};
use crate::formats::{round_exact, round_f64, FpFormat, FpValue, RoundingMode};
use crate::generator::{ProgressivePolynomial, SpecialCase};
use crate::oracle::FunctionId;
use crate::reduction::{output_compensate, reduce_f64, reduced_domain, special_value};

pub const ARTIFACT_VERSION: u32 = 1;

/// Which monomials the coefficients multiply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentSchedule {
    /// `x^0, x^1, x^2, ...`
    #[default]
    Dense,
    /// `x^1, x^3, x^5, ...`
    Odd,
    /// `x^0, x^2, x^4, ...`
    Even,
}

impl ExponentSchedule {
    pub fn exponents(&self, k: usize) -> Vec<u32> {
        let k = k as u32;
        match self {
            ExponentSchedule::Dense => (0..k).collect(),
            ExponentSchedule::Odd => (0..k).map(|j| 2 * j + 1).collect(),
            ExponentSchedule::Even => (0..k).map(|j| 2 * j).collect(),
        }
    }

    /// Binary64 multiply-adds of a `terms`-term kernel, counting the `x*x`
    /// square and the trailing odd factor as one each.
    pub fn multiply_adds(&self, terms: usize) -> usize {
        let base = terms.saturating_sub(1);
        match self {
            ExponentSchedule::Dense => base,
            ExponentSchedule::Even => base + usize::from(terms > 1),
            ExponentSchedule::Odd => base + usize::from(terms > 1) + 1,
        }
    }
}

/// `(((c[t-1] x + c[t-2]) x + ...) x + c[0])` with one binary64 rounding
/// per multiply and per add.
pub fn horner_eval(coeffs: &[f64], terms: usize, x: f64) -> f64 {
    coeffs[..terms].iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn kernel_eval(coeffs: &[f64], terms: usize, x: f64, schedule: ExponentSchedule) -> f64 {
    match schedule {
        ExponentSchedule::Dense => horner_eval(coeffs, terms, x),
        ExponentSchedule::Even => horner_eval(coeffs, terms, x * x),
        ExponentSchedule::Odd => x * horner_eval(coeffs, terms, x * x),
    }
}

#[derive(Clone, Debug)]
pub struct CompiledFunction {
    pub poly: ProgressivePolynomial,
    specials: HashMap<(usize, u64), f64>,
}

impl PartialEq for CompiledFunction {
    fn eq(&self, other: &Self) -> bool {
        self.poly == other.poly
    }
}

impl CompiledFunction {
    pub fn new(poly: ProgressivePolynomial) -> Result<Self> {
        validate_ladder(&poly.ladder)?;
        let k = poly.k_max();
        let bad = |m: String| Err(Error::Artifact(m));
        if poly.coefficients.is_empty() || poly.coefficients.len() > 4 {
            return bad(format!("{} sub-domains", poly.coefficients.len()));
        }
        if poly.coefficients.len() != poly.split_points.len() + 1 {
            return bad("split points do not match sub-domains".into());
        }
        if !poly.split_points.windows(2).all(|w| w[0] < w[1]) {
            return bad("split points must ascend".into());
        }
        if poly.coefficients.iter().any(|c| c.len() != k) {
            return bad(format!("coefficient vectors must have {k} entries"));
        }
        let mut specials = HashMap::new();
        for s in &poly.special_cases {
            if s.rung >= poly.ladder.len() {
                return bad(format!("special case for missing rung {}", s.rung));
            }
            specials.insert((s.rung, s.input.to_bits()), s.result);
        }
        Ok(CompiledFunction { poly, specials })
    }

    pub fn function(&self) -> FunctionId {
        self.poly.function
    }

    pub fn ladder(&self) -> &[LadderRung] {
        &self.poly.ladder
    }

    pub fn top_rung(&self) -> usize {
        self.poly.ladder.len() - 1
    }

    /// The smallest rung at least as wide as `fmt` with the same exponent width.
    pub fn rung_for(&self, fmt: FpFormat) -> Result<usize> {
        let unsupported = || Error::UnsupportedFormat(format!("{} for this {} artifact", fmt.name(), self.function().name()));
        if fmt.exponent_bits() != self.poly.exponent_bits() {
            return Err(unsupported());
        }
        self.poly.ladder.iter().position(|r| r.format.total_bits() >= fmt.total_bits()).ok_or_else(unsupported)
    }

    /// Modes under which `fmt` results are guaranteed when served by `rung`.
    pub fn guaranteed_modes(&self, rung: usize, fmt: FpFormat) -> &'static [RoundingMode] {
        let r = &self.poly.ladder[rung];
        match r.interval {
            IntervalMode::RoundToOdd => &RoundingMode::IEEE,
            IntervalMode::NearestOnly if r.format == fmt => &[RoundingMode::NearestEven],
            IntervalMode::NearestOnly => &[],
        }
    }

    /// Result of the function at `x`, rounded into `out_fmt` under `mode`,
    /// using the rung chosen by [`Self::rung_for`].
    pub fn evaluate(&self, x: FpValue, out_fmt: FpFormat, mode: RoundingMode) -> Result<FpValue> {
        let rung = self.rung_for(out_fmt)?;
        Ok(self.evaluate_rung(x.to_f64(), out_fmt, mode, rung))
    }

    /// Evaluation with `rung`'s term count and special-case table.
    pub fn evaluate_rung(&self, x: f64, out_fmt: FpFormat, mode: RoundingMode, rung: usize) -> FpValue {
        let f = self.poly.function;
        if let Some(s) = special_value(f, x, self.poly.exponent_bits()) {
            return round_exact(&s, out_fmt, mode);
        }
        if let Some(&y) = self.specials.get(&(rung, x.to_bits())) {
            return round_f64(y, out_fmt, mode);
        }
        round_f64(self.binary64_result(x, rung), out_fmt, mode)
    }

    /// The compensated binary64 value before final rounding.
    pub fn binary64_result(&self, x: f64, rung: usize) -> f64 {
        let f = self.poly.function;
        let red = reduce_f64(f, x);
        let s = self.poly.subdomain_of(red.x_reduced);
        let y = kernel_eval(&self.poly.coefficients[s], self.poly.ladder[rung].terms, red.x_reduced, self.poly.exponents);
        output_compensate(f, y, red.recon)
    }

    pub fn multiply_adds(&self, rung: usize) -> usize {
        self.poly.exponents.multiply_adds(self.poly.ladder[rung].terms)
    }

    pub fn to_json(&self) -> String {
        let body = ArtifactBody::from_poly(&self.poly);
        let checksum = body.checksum();
        serde_json::to_string(&Artifact { body, checksum }).expect("artifact serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let a: Artifact = serde_json::from_str(s)?;
        if a.body.version != ARTIFACT_VERSION {
            return Err(Error::Artifact(format!("unsupported artifact version {}", a.body.version)));
        }
        if a.body.checksum() != a.checksum {
            return Err(Error::Artifact("checksum mismatch".into()));
        }
        CompiledFunction::new(a.body.into_poly()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Writes `<stem>.json` and, if asked, `<stem>.c` into `dir`.
    pub fn export(&self, dir: &Path, stem: &str, emit_source: bool) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("{stem}.json"));
        self.save(&json)?;
        let mut out = vec![json];
        if emit_source {
            let c = dir.join(format!("{stem}.c"));
            std::fs::write(&c, self.c_source())?;
            out.push(c);
        }
        Ok(out)
    }

    /// Portable C with the coefficient table, special cases and one kernel
    /// per rung. Contraction into FMA is switched off.
    pub fn c_source(&self) -> String {
        let p = &self.poly;
        let name = p.function.name();
        let k = p.k_max();
        let (lo, hi) = reduced_domain(p.function);
        let mut s = String::new();
        let _ = writeln!(s, "/* {name}: kernel over reduced inputs in [{lo}, {hi}), {:?} exponents */", p.exponents);
        s.push_str("#include <math.h>\n#include <stddef.h>\n\n#pragma STDC FP_CONTRACT OFF\n\n");
        let _ = writeln!(s, "static const double {name}_coeffs[{}][{k}] = {{", p.coefficients.len());
        for c in &p.coefficients {
            let row: Vec<String> = c.iter().map(|&v| c_hex_float(v)).collect();
            let _ = writeln!(s, "    {{{}}},", row.join(", "));
        }
        s.push_str("};\n\n");
        let _ = writeln!(s, "static int {name}_subdomain(double r) {{\n    int s = 0;");
        for sp in &p.split_points {
            let _ = writeln!(s, "    if (r >= {}) s++;", c_hex_float(*sp));
        }
        s.push_str("    return s;\n}\n\n");
        let _ = writeln!(s, "static double {name}_kernel(const double *c, int terms, double r) {{");
        match p.exponents {
            ExponentSchedule::Dense => s.push_str("    double x = r;\n"),
            _ => s.push_str("    double x = r * r;\n"),
        }
        s.push_str("    double y = c[terms - 1];\n    for (int j = terms - 2; j >= 0; j--) y = y * x + c[j];\n");
        match p.exponents {
            ExponentSchedule::Odd => s.push_str("    return r * y;\n}\n"),
            _ => s.push_str("    return y;\n}\n"),
        }
        for (j, rung) in p.ladder.iter().enumerate() {
            let fmt = rung.format.name();
            let specials: Vec<&SpecialCase> = p.special_cases.iter().filter(|c| c.rung == j).collect();
            let _ = writeln!(
                s,
                "\n/* {fmt}: {} terms, {} multiply-adds, {} special cases */",
                rung.terms,
                self.multiply_adds(j),
                specials.len()
            );
            if !specials.is_empty() {
                let _ = writeln!(s, "static const double {name}_{j}_special[{}][2] = {{", specials.len());
                for c in &specials {
                    let _ = writeln!(s, "    {{{}, {}}},", c_hex_float(c.input), c_hex_float(c.result));
                }
                s.push_str("};\n");
            }
            let _ = writeln!(s, "/* returns 1 and sets *y when x is a special case */");
            let _ = writeln!(s, "int {name}_{j}_special_case(double x, double *y) {{");
            if !specials.is_empty() {
                let _ = writeln!(s, "    for (size_t i = 0; i < {}; i++)", specials.len());
                let _ = writeln!(s, "        if ({name}_{j}_special[i][0] == x) {{ *y = {name}_{j}_special[i][1]; return 1; }}");
            } else {
                s.push_str("    (void)x;\n    (void)y;\n");
            }
            s.push_str("    return 0;\n}\n");
            let _ = writeln!(s, "double {name}_{j}_kernel(double r) {{");
            let _ = writeln!(s, "    return {name}_kernel({name}_coeffs[{name}_subdomain(r)], {}, r);\n}}", rung.terms);
        }
        s
    }
}

/// C99 hexadecimal floating literal.
pub fn c_hex_float(v: f64) -> String {
    if v.is_nan() {
        return "NAN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "INFINITY".into() } else { "-INFINITY".into() };
    }
    let sign = if v.is_sign_negative() { "-" } else { "" };
    if v == 0.0 {
        return format!("{sign}0x0p+0");
    }
    let bits = v.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (lead, e) = if exp == 0 { (0, -1022) } else { (1, exp - 1023) };
    let mut digits = format!("{frac:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let dot = if digits.is_empty() { String::new() } else { format!(".{digits}") };
    format!("{sign}0x{lead}{dot}p{e:+}")
}

#[derive(Serialize, Deserialize)]
struct ArtifactRung {
    format: FpFormat,
    terms: usize,
    interval: IntervalMode,
    multiply_adds: usize,
}

#[derive(Serialize, Deserialize)]
struct ArtifactSpecial {
    rung: usize,
    /// Encoding in the rung's format.
    input: String,
    result: String,
}

#[derive(Serialize, Deserialize)]
struct ArtifactBody {
    version: u32,
    function: FunctionId,
    exponents: ExponentSchedule,
    ladder: Vec<ArtifactRung>,
    split_points: Vec<String>,
    coefficients: Vec<Vec<String>>,
    special_cases: Vec<ArtifactSpecial>,
}

#[derive(Serialize, Deserialize)]
struct Artifact {
    #[serde(flatten)]
    body: ArtifactBody,
    checksum: String,
}

impl ArtifactBody {
    fn from_poly(p: &ProgressivePolynomial) -> Self {
        ArtifactBody {
            version: ARTIFACT_VERSION,
            function: p.function,
            exponents: p.exponents,
            ladder: p
                .ladder
                .iter()
                .map(|r| ArtifactRung {
                    format: r.format,
                    terms: r.terms,
                    interval: r.interval,
                    multiply_adds: p.exponents.multiply_adds(r.terms),
                })
                .collect(),
            split_points: p.split_points.iter().map(|&v| hex64(v)).collect(),
            coefficients: p.coefficients.iter().map(|c| c.iter().map(|&v| hex64(v)).collect()).collect(),
            special_cases: p
                .special_cases
                .iter()
                .map(|s| {
                    let fmt = p.ladder[s.rung].format;
                    ArtifactSpecial {
                        rung: s.rung,
                        input: round_f64(s.input, fmt, RoundingMode::NearestEven).hex(),
                        result: hex64(s.result),
                    }
                })
                .collect(),
        }
    }

    fn checksum(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("artifact serializes")))
    }

    fn into_poly(self) -> Result<ProgressivePolynomial> {
        let h = |s: &str| parse_hex64(s).ok_or_else(|| Error::Artifact(format!("bad binary64 hex {s:?}")));
        let ladder: Vec<LadderRung> =
            self.ladder.iter().map(|r| LadderRung { format: r.format, terms: r.terms, interval: r.interval }).collect();
        let mut special_cases = Vec::with_capacity(self.special_cases.len());
        for s in &self.special_cases {
            let fmt = ladder.get(s.rung).ok_or_else(|| Error::Artifact(format!("missing rung {}", s.rung)))?.format;
            let bits = u64::from_str_radix(s.input.trim_start_matches("0x"), 16)
                .map_err(|_| Error::Artifact(format!("bad encoding {:?}", s.input)))?;
            special_cases.push(SpecialCase { rung: s.rung, input: fmt.value(bits).to_f64(), result: h(&s.result)? });
        }
        Ok(ProgressivePolynomial {
            function: self.function,
            ladder,
            exponents: self.exponents,
            split_points: self.split_points.iter().map(|s| h(s)).collect::<Result<_>>()?,
            coefficients: self.coefficients.iter().map(|c| c.iter().map(|s| h(s)).collect::<Result<_>>()).collect::<Result<_>>()?,
            special_cases,
        })
    }
}
