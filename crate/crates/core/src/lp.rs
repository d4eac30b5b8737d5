//! Exact rational LP for the small sampled subproblems.
//!
//! Unknowns are the polynomial coefficients `C_1..C_k`; every row bounds a
//! prefix polynomial at one point from below and/or above. The solver
//! returns the lexicographic minimum of `(C_1, C_2, ..., C_k)` over the
//! feasible set, which is unique, so the answer does not depend on pivoting
//! choices.
//!
//! Method: dual simplex on the inequality form `g_i · C >= b_i`, keeping a
//! basis of `k` tight rows. Box rows `|C_j| <= 2^64` give a lexicographically
//! dual-feasible start; the lexicographic ratio test keeps it so and rules
//! out cycling. All arithmetic is on integers: rows are scaled to integer
//! vectors and the basis inverse is kept as an integer adjugate with its
//! determinant (fraction-free updates). Row checks are screened in binary64
//! with a rigorous error margin and decided exactly only when close.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::exact::{rational_to_f64, ExactReal};

/// Default box bound exponent: `|C_j| <= 2^64`.
pub const DEFAULT_BOUND_LOG2: u32 = 64;

/// `lower <= sum_{j < terms} C_j * x^{e_j} <= upper`; infinite bounds are
/// absent sides.
#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub x: BigRational,
    pub terms: usize,
    pub lower: ExactReal,
    pub upper: ExactReal,
}

impl LpRow {
    pub fn from_f64(x: f64, terms: usize, lower: f64, upper: f64) -> Self {
        LpRow { x: crate::exact::f64_to_rational(x), terms, lower: ExactReal::from_f64(lower), upper: ExactReal::from_f64(upper) }
    }
}

/// Which violated row enters the basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnteringRule {
    /// Lowest-index violated row.
    #[default]
    Bland,
    /// Largest normalized violation, lowest index on ties.
    MostViolated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub unknowns: usize,
    /// Monomial exponent of each coefficient column.
    pub exponents: Vec<u32>,
    pub rows: Vec<LpRow>,
    pub entering: EnteringRule,
    pub bound_log2: u32,
}

impl LpProblem {
    /// Dense exponents `0..unknowns`.
    pub fn new(unknowns: usize, rows: Vec<LpRow>) -> Self {
        LpProblem {
            unknowns,
            exponents: (0..unknowns as u32).collect(),
            rows,
            entering: EnteringRule::default(),
            bound_log2: DEFAULT_BOUND_LOG2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty when infeasible.
    pub coefficients: Vec<BigRational>,
    pub pivots: usize,
}

struct Ineq {
    g: Vec<BigInt>,
    beta: BigInt,
    gf: Vec<f64>,
    betaf: f64,
    norm: f64,
}

impl Ineq {
    fn new(g: Vec<BigRational>, beta: BigRational) -> Self {
        let gf: Vec<f64> = g.iter().map(rational_to_f64).collect();
        let betaf = rational_to_f64(&beta);
        let norm = gf.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mut l = beta.denom().clone();
        for v in &g {
            l = l.lcm(v.denom());
        }
        let scale = |v: &BigRational| (v.numer() * &l) / v.denom();
        Ineq { g: g.iter().map(scale).collect(), beta: scale(&beta), gf, betaf, norm }
    }
}

/// `a / b` as binary64 for integers of any size (relative error < 2^-52).
fn ratio_f64(a: &BigInt, b: &BigInt) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let top = |v: &BigInt| -> (f64, i64) {
        let bits = v.bits() as i64;
        let sh = (bits - 64).max(0);
        let t = (v.abs() >> sh as usize).to_u64().expect("64 bits") as f64;
        (if v.is_negative() { -t } else { t }, sh)
    };
    let (fa, sa) = top(a);
    let (fb, sb) = top(b);
    crate::exact::scale_f64(fa / fb, sa - sb)
}

struct State<'a> {
    rows: &'a [Ineq],
    k: usize,
    basis: Vec<usize>,
    /// Row `i` is `det * (column i of the basis inverse)`.
    adj: Vec<Vec<BigInt>>,
    det: BigInt,
    /// Current vertex is `num / det`.
    num: Vec<BigInt>,
}

impl State<'_> {
    fn recompute_vertex(&mut self) {
        let mut num = vec![BigInt::zero(); self.k];
        for (i, &r) in self.basis.iter().enumerate() {
            let b = &self.rows[r].beta;
            if b.is_zero() {
                continue;
            }
            for (n, a) in num.iter_mut().zip(&self.adj[i]) {
                *n += b * a;
            }
        }
        self.num = num;
    }

    /// Sign of `g_q · C - b_q`.
    fn slack_sign(&self, q: usize) -> i32 {
        let row = &self.rows[q];
        let mut s = -(&row.beta * &self.det);
        for (g, n) in row.g.iter().zip(&self.num) {
            if !g.is_zero() {
                s += g * n;
            }
        }
        let sign = match s.sign() {
            Sign::Plus => 1,
            Sign::Minus => -1,
            Sign::NoSign => 0,
        };
        if self.det.is_negative() {
            -sign
        } else {
            sign
        }
    }

    fn vertex_f64(&self) -> Vec<f64> {
        self.num.iter().map(|n| ratio_f64(n, &self.det)).collect()
    }

    /// Binary64 classification of row `q` at the approximate vertex `c`;
    /// `Unsure` rows need the exact check.
    fn screen(&self, q: usize, c: &[f64]) -> Screen {
        let row = &self.rows[q];
        let mut s = 0.0;
        let mut mag = 0.0;
        for (g, v) in row.gf.iter().zip(c) {
            let p = g * v;
            s += p;
            mag += p.abs();
        }
        let bound = (self.k as f64 + 4.0) * f64::EPSILON * mag + f64::EPSILON * row.betaf.abs() + 1e-300;
        let viol = row.betaf - s;
        if !viol.is_finite() || !bound.is_finite() {
            return Screen::Unsure;
        }
        if viol > bound {
            Screen::Violated(viol / row.norm)
        } else if viol < -bound {
            Screen::Satisfied
        } else {
            Screen::Unsure
        }
    }

    fn pick_entering(&self, rule: EnteringRule) -> Option<usize> {
        let c = self.vertex_f64();
        let in_basis = |q: usize| self.basis.contains(&q);
        match rule {
            EnteringRule::Bland => (0..self.rows.len()).find(|&q| {
                !in_basis(q)
                    && match self.screen(q, &c) {
                        Screen::Violated(_) => true,
                        Screen::Satisfied => false,
                        Screen::Unsure => self.slack_sign(q) < 0,
                    }
            }),
            EnteringRule::MostViolated => {
                let mut best: Option<(f64, usize)> = None;
                let mut unsure = Vec::new();
                for q in 0..self.rows.len() {
                    if in_basis(q) {
                        continue;
                    }
                    match self.screen(q, &c) {
                        Screen::Violated(v) => {
                            if best.is_none_or(|(b, _)| v > b) {
                                best = Some((v, q));
                            }
                        }
                        Screen::Satisfied => {}
                        Screen::Unsure => unsure.push(q),
                    }
                }
                best.map(|(_, q)| q).or_else(|| unsure.into_iter().find(|&q| self.slack_sign(q) < 0))
            }
        }
    }

    /// Lexicographic ratio test; `None` proves infeasibility.
    fn pick_leaving(&self, alpha: &[BigInt]) -> Option<usize> {
        let positive = |a: &BigInt| if self.det.is_negative() { a.is_negative() } else { a.is_positive() };
        let mut best: Option<usize> = None;
        for i in 0..self.k {
            if !positive(&alpha[i]) {
                continue;
            }
            best = Some(match best {
                None => i,
                Some(b) => {
                    // compare adj_i / alpha_i with adj_b / alpha_b lexicographically
                    let mut choose_i = false;
                    for t in 0..self.k {
                        let lhs = &self.adj[i][t] * &alpha[b];
                        let rhs = &self.adj[b][t] * &alpha[i];
                        if lhs != rhs {
                            // alpha_i * alpha_b > 0, so the cross-multiplied order holds
                            choose_i = lhs < rhs;
                            break;
                        }
                    }
                    if choose_i {
                        i
                    } else {
                        b
                    }
                }
            });
        }
        best
    }

    fn pivot(&mut self, q: usize, r: usize, alpha: &[BigInt]) {
        let ar = alpha[r].clone();
        let adj_r = self.adj[r].clone();
        for (j, (row, aj)) in self.adj.iter_mut().zip(alpha).enumerate() {
            if j == r {
                continue;
            }
            for (a, ar_t) in row.iter_mut().zip(&adj_r) {
                *a = (&ar * &*a - aj * ar_t) / &self.det;
            }
        }
        self.det = ar;
        self.basis[r] = q;
        self.recompute_vertex();
    }
}

enum Screen {
    Violated(f64),
    Satisfied,
    Unsure,
}

fn monomials(x: &BigRational, exponents: &[u32], terms: usize, k: usize) -> Vec<BigRational> {
    let mut g = vec![BigRational::zero(); k];
    for (j, &e) in exponents.iter().enumerate().take(terms) {
        g[j] = num_traits::pow(x.clone(), e as usize);
    }
    g
}

pub fn solve(p: &LpProblem) -> LpSolution {
    let k = p.unknowns;
    assert!(k >= 1 && p.exponents.len() >= k, "LP needs k >= 1 columns with exponents");
    let mut rows = Vec::with_capacity(2 * p.rows.len() + 2 * k);
    for r in &p.rows {
        assert!(r.terms >= 1 && r.terms <= k, "row term count out of range");
        let g = monomials(&r.x, &p.exponents, r.terms, k);
        if let ExactReal::Finite(l) = &r.lower {
            rows.push(Ineq::new(g.clone(), l.clone()));
        }
        if let ExactReal::Finite(h) = &r.upper {
            rows.push(Ineq::new(g.iter().map(|v| -v).collect(), -h));
        }
    }
    let bound = BigRational::from_integer(BigInt::one() << p.bound_log2 as usize);
    let first_box = rows.len();
    for sign in [1i32, -1] {
        for j in 0..k {
            let mut g = vec![BigRational::zero(); k];
            g[j] = BigRational::from_integer(BigInt::from(sign));
            rows.push(Ineq::new(g, -bound.clone()));
        }
    }
    let mut st = State {
        rows: &rows,
        k,
        basis: (first_box..first_box + k).collect(),
        adj: (0..k).map(|i| (0..k).map(|t| if i == t { BigInt::one() } else { BigInt::zero() }).collect()).collect(),
        det: BigInt::one(),
        num: Vec::new(),
    };
    st.recompute_vertex();
    let mut pivots = 0;
    while let Some(q) = st.pick_entering(p.entering) {
        let alpha: Vec<BigInt> = (0..k)
            .map(|i| rows[q].g.iter().zip(&st.adj[i]).filter(|(g, _)| !g.is_zero()).map(|(g, a)| g * a).sum())
            .collect();
        let Some(r) = st.pick_leaving(&alpha) else {
            return LpSolution { status: LpStatus::Infeasible, coefficients: Vec::new(), pivots };
        };
        st.pivot(q, r, &alpha);
        pivots += 1;
    }
    for q in 0..rows.len() {
        assert!(st.slack_sign(q) >= 0, "LP vertex violates row {q}");
    }
    let coefficients = st.num.iter().map(|n| BigRational::new(n.clone(), st.det.clone())).collect();
    LpSolution { status: LpStatus::Feasible, coefficients, pivots }
}

/// Rounds each coefficient to the nearest binary64.
pub fn coefficients_to_binary64(sol: &LpSolution) -> Vec<f64> {
    sol.coefficients.iter().map(rational_to_f64).collect()
}
