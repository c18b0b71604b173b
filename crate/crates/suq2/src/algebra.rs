//! The dense word algebra of A and its representations.
//!
//! A is generated by an isometry T and a normal S subject to T*T = I,
//! S*S = SS*, TT* + S*S = I. Words come in two families:
//!
//! * `Word { m, j, n }` denotes TᵐSʲT^{−n} under the conventions
//!   T⁰ = (T*)⁰ = I, S⁰ = S*S, S^{−1} = S*; these span the ideal J.
//! * `Quot { a, b }` denotes Tᵃ(T*)ᵇ, which together with the ideal words
//!   spans a dense subalgebra of A.
//!
//! Since Tᵃ(T*)ᵇ = T^{a−1}(T*)^{b−1} − T^{a−1}S*S(T*)^{b−1}, every quotient
//! word reduces until min(a,b) = 0; after that reduction the two families are
//! linearly independent and word sums have a canonical normal form.
//!
//! The defining representation ρ acts on ℓ²(ℕ×ℤ) by
//! ρ(T): ξ(k,m) ↦ ξ(k+1,m) and ρ(S): ξ(k,m) ↦ δ_{k,0} ξ(k,m+1).
//! The irreducible families are the characters ω_t (T ↦ t, S ↦ 0) and the
//! half-line representations ρ_t on ℓ²(ℕ) with ρ_t(S)ξ(n) = δ_{n,0} t ξ(0).
//!
//! The isomorphism with the q-deformed algebra sends the generators to
//! φ_q(a), φ_q(b), available both as direct sparse matrices and as word
//! series with geometric tail bounds; the two constructions cross-check each
//! other.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::operator::{Operator, SparseBuilder};
use crate::window::{BasisIndex, InteriorSet, TruncationWindow, WindowVec};

/// Validates a deformation parameter: the artifact covers q ∈ [0,1) only.
pub fn validate_q(q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("q = {q} outside [0,1)")));
    }
    Ok(())
}

/// A single algebra word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AWord {
    /// TᵐSʲT^{−n} with the S-block conventions (j = 0 means S*S).
    Word { m: u32, j: i32, n: u32 },
    /// Tᵃ(T*)ᵇ.
    Quot { a: u32, b: u32 },
}

impl AWord {
    pub fn word(m: u32, j: i32, n: u32) -> Self {
        AWord::Word { m, j, n }
    }

    pub fn quot(a: u32, b: u32) -> Self {
        AWord::Quot { a, b }
    }

    pub fn identity() -> Self {
        AWord::Quot { a: 0, b: 0 }
    }

    pub fn s() -> Self {
        AWord::Word { m: 0, j: 1, n: 0 }
    }

    pub fn s_star() -> Self {
        AWord::Word { m: 0, j: -1, n: 0 }
    }

    pub fn s_star_s() -> Self {
        AWord::Word { m: 0, j: 0, n: 0 }
    }

    pub fn t() -> Self {
        AWord::Quot { a: 1, b: 0 }
    }

    pub fn t_star() -> Self {
        AWord::Quot { a: 0, b: 1 }
    }

    pub fn adjoint(&self) -> Self {
        match *self {
            AWord::Word { m, j, n } => AWord::Word { m: n, j: -j, n: m },
            AWord::Quot { a, b } => AWord::Quot { a: b, b: a },
        }
    }

    /// Maximal level shift reach of the word, for interior margins.
    pub fn reach(&self) -> usize {
        match *self {
            AWord::Word { m, j, n } => (m.max(n) as usize).max(j.unsigned_abs() as usize),
            AWord::Quot { a, b } => a.max(b) as usize,
        }
    }
}

impl fmt::Display for AWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            AWord::Word { m, j, n } => write!(f, "T^{m} S^{j} T*^{n}"),
            AWord::Quot { a, b } => write!(f, "T^{a} T*^{b}"),
        }
    }
}

/// Product of two words; `None` is the zero element. The S-block rules
/// S*T = T*S = ST = 0 and Sʲ·Sʲ′ = S^{j+j′} make every product a single word.
pub fn word_mul(x: AWord, y: AWord) -> Option<AWord> {
    use AWord::*;
    match (x, y) {
        (Quot { a, b }, Quot { a: c, b: d }) => {
            Some(Quot { a: a + c.saturating_sub(b), b: d + b.saturating_sub(c) })
        }
        (Quot { a, b }, Word { m, j, n }) => (m >= b).then(|| Word { m: a + m - b, j, n }),
        (Word { m, j, n }, Quot { a, b }) => (a <= n).then(|| Word { m, j, n: n - a + b }),
        (Word { m, j, n }, Word { m: m2, j: j2, n: n2 }) => {
            (n == m2).then(|| Word { m, j: j + j2, n: n2 })
        }
    }
}

/// Normal form of a single word: quotient words reduce via
/// Tᵃ(T*)ᵇ = T^{a−1}(T*)^{b−1} − T^{a−1}S*S(T*)^{b−1} until min(a,b) = 0.
fn normalize_word(w: AWord) -> Vec<(Complex64, AWord)> {
    match w {
        AWord::Quot { a, b } if a.min(b) > 0 => {
            let c = a.min(b);
            let mut out = vec![(Complex64::ONE, AWord::Quot { a: a - c, b: b - c })];
            for t in 1..=c {
                out.push((-Complex64::ONE, AWord::Word { m: a - t, j: 0, n: b - t }));
            }
            out
        }
        w => vec![(Complex64::ONE, w)],
    }
}

/// Finite linear combination of words in normal form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WordSum {
    pub terms: BTreeMap<AWord, Complex64>,
}

impl WordSum {
    pub fn zero() -> Self {
        WordSum::default()
    }

    pub fn from_word(w: AWord) -> Self {
        let mut s = WordSum::zero();
        s.insert(w, Complex64::ONE);
        s
    }

    pub fn insert(&mut self, w: AWord, coeff: Complex64) {
        if coeff == Complex64::ZERO {
            return;
        }
        for (c, nw) in normalize_word(w) {
            let e = self.terms.entry(nw).or_insert(Complex64::ZERO);
            *e += c * coeff;
            if *e == Complex64::ZERO {
                self.terms.remove(&nw);
            }
        }
    }

    pub fn add(&self, other: &WordSum) -> WordSum {
        let mut out = self.clone();
        for (&w, &c) in &other.terms {
            out.insert(w, c);
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> WordSum {
        let mut out = WordSum::zero();
        for (&w, &cc) in &self.terms {
            out.insert(w, c * cc);
        }
        out
    }

    pub fn mul(&self, other: &WordSum) -> WordSum {
        let mut out = WordSum::zero();
        for (&w1, &c1) in &self.terms {
            for (&w2, &c2) in &other.terms {
                if let Some(w) = word_mul(w1, w2) {
                    out.insert(w, c1 * c2);
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> WordSum {
        let mut out = WordSum::zero();
        for (&w, &c) in &self.terms {
            out.insert(w.adjoint(), c.conj());
        }
        out
    }

    pub fn prune(&self, eps: f64) -> WordSum {
        let mut out = WordSum::zero();
        for (&w, &c) in &self.terms {
            if c.norm() > eps {
                out.insert(w, c);
            }
        }
        out
    }

    pub fn reach(&self) -> usize {
        self.terms.keys().map(|w| w.reach()).max().unwrap_or(0)
    }
}

/// ε(T) = 1, ε(S) = 0, extended as a character: 1 on quotient words, 0 on
/// every ideal word (each contains an S, S* or S*S factor).
pub fn counit_char(w: &AWord) -> Complex64 {
    match w {
        AWord::Word { .. } => Complex64::ZERO,
        AWord::Quot { .. } => Complex64::ONE,
    }
}

pub fn counit_sum(s: &WordSum) -> Complex64 {
    s.terms.iter().map(|(w, c)| c * counit_char(w)).sum()
}

/// ρ(T): ξ(k,m) ↦ ξ(k+1,m), compressed to the window.
pub fn gen_t(window: TruncationWindow) -> Operator {
    let mut b = SparseBuilder::new(window);
    for p in window.leg_points() {
        b.push(&[BasisIndex::new(p.k + 1, p.m)], &[p], Complex64::ONE);
    }
    Operator::sparse(b.finish())
}

/// ρ(S): ξ(k,m) ↦ δ_{k,0} ξ(k,m+1).
pub fn gen_s(window: TruncationWindow) -> Operator {
    let mut b = SparseBuilder::new(window);
    for p in window.leg_points() {
        if p.k == 0 {
            b.push(&[BasisIndex::new(0, p.m + 1)], &[p], Complex64::ONE);
        }
    }
    Operator::sparse(b.finish())
}

/// ρ of a single word: ideal words map ξ(n,x) ↦ ξ(m,x+j) and kill every
/// other level; quotient words map ξ(k,x) ↦ ξ(k+a−b,x) for k ≥ b.
pub fn word_op(window: TruncationWindow, w: &AWord) -> Operator {
    let mut bld = SparseBuilder::new(window);
    match *w {
        AWord::Word { m, j, n } => {
            let (m, n, j) = (m as usize, n as usize, j as i64);
            for x in -(window.m_max as i64)..=window.m_max as i64 {
                bld.push(&[BasisIndex::new(m, x + j)], &[BasisIndex::new(n, x)], Complex64::ONE);
            }
        }
        AWord::Quot { a, b } => {
            let (a, b) = (a as usize, b as usize);
            for p in window.leg_points() {
                if p.k >= b {
                    bld.push(&[BasisIndex::new(p.k + a - b, p.m)], &[p], Complex64::ONE);
                }
            }
        }
    }
    Operator::sparse(bld.finish())
}

pub fn wordsum_op(window: TruncationWindow, s: &WordSum) -> Operator {
    if s.terms.is_empty() {
        return Operator::zero(window);
    }
    Operator::lincomb(s.terms.iter().map(|(w, &c)| (c, word_op(window, w))).collect())
}

/// ρ(φ_q(a)): ξ(k,m) ↦ √(1−q^{2k}) ξ(k−1,m), direct matrix.
pub fn phi_a(window: TruncationWindow, q: f64) -> Operator {
    let mut b = SparseBuilder::new(window);
    for p in window.leg_points() {
        if p.k >= 1 {
            let amp = (1.0 - q.powi(2 * p.k as i32)).sqrt();
            b.push(&[BasisIndex::new(p.k - 1, p.m)], &[p], Complex64::new(amp, 0.0));
        }
    }
    Operator::sparse(b.finish())
}

/// ρ(φ_q(b)): ξ(k,m) ↦ qᵏ ξ(k,m+1), direct matrix.
pub fn phi_b(window: TruncationWindow, q: f64) -> Operator {
    let mut b = SparseBuilder::new(window);
    for p in window.leg_points() {
        let amp = q.powi(p.k as i32);
        if amp != 0.0 {
            b.push(&[BasisIndex::new(p.k, p.m + 1)], &[p], Complex64::new(amp, 0.0));
        }
    }
    Operator::sparse(b.finish())
}

/// n-th coefficient of the series φ_q(a) = Σ (√(1−q^{2(n+1)}) − √(1−q^{2n})) Tⁿ(T*)^{n+1}.
pub fn phi_a_coeff(q: f64, n: u32) -> f64 {
    (1.0 - q.powi(2 * (n as i32 + 1))).sqrt() - (1.0 - q.powi(2 * n as i32)).sqrt()
}

/// Series construction of φ_q(a), with its analytic tail bound. The partial
/// sums telescope, so the tail after N terms has norm ≤ 1 − √(1−q^{2(N+1)})
/// ≤ q^{2(N+1)}; terms with n ≥ k_max − 1 vanish on the window entirely.
pub fn phi_a_series(window: TruncationWindow, q: f64, tol: f64) -> Result<(Operator, f64)> {
    validate_q(q)?;
    if q == 0.0 {
        return Err(Error::InvalidParameter("series form of the isomorphism needs q in (0,1)".into()));
    }
    let mut sum = WordSum::zero();
    // terms with n ≥ k_max − 1 act above the window, so the on-window tail
    // is zero when the loop runs out
    let mut tail = 0.0;
    for n in 0..window.k_max as u32 {
        sum.insert(AWord::quot(n, n + 1), Complex64::new(phi_a_coeff(q, n), 0.0));
        let tail_after = q.powi(2 * (n as i32 + 1));
        if tail_after <= tol {
            tail = tail_after;
            break;
        }
    }
    Ok((wordsum_op(window, &sum), tail))
}

/// Series construction of φ_q(b) = Σ qⁿ TⁿS(T*)ⁿ, tail ≤ q^{N+1}/(1−q).
pub fn phi_b_series(window: TruncationWindow, q: f64, tol: f64) -> Result<(Operator, f64)> {
    validate_q(q)?;
    if q == 0.0 {
        return Err(Error::InvalidParameter("series form of the isomorphism needs q in (0,1)".into()));
    }
    let mut sum = WordSum::zero();
    let mut tail = 0.0;
    for n in 0..window.k_max as u32 {
        sum.insert(AWord::word(n, 1, n), Complex64::new(q.powi(n as i32), 0.0));
        let tail_after = q.powi(n as i32 + 1) / (1.0 - q);
        if tail_after <= tol {
            tail = tail_after;
            break;
        }
    }
    Ok((wordsum_op(window, &sum), tail))
}

/// Max of ‖op·v‖ over interior basis vectors.
pub fn max_column_residual(op: &Operator, interior: &InteriorSet) -> f64 {
    let mut worst = 0.0f64;
    for tuple in interior.tuples() {
        let v = WindowVec::basis(op.window(), &tuple);
        worst = worst.max(op.apply(&v).expect("window fixed").norm());
    }
    worst
}

pub struct RelationCheck {
    pub name: &'static str,
    pub anchor: &'static str,
    pub residual: f64,
    pub budget: f64,
}

impl RelationCheck {
    pub fn passed(&self) -> bool {
        self.residual <= self.budget
    }
}

/// The defining relations of A, exact up to floating point: residuals on
/// interior vectors must vanish to 1e−12.
pub fn check_a_relations(window: TruncationWindow) -> Vec<RelationCheck> {
    let t = gen_t(window);
    let s = gen_s(window);
    let id = Operator::identity(window);
    let interior = InteriorSet::new(window, 1);
    let budget = 1e-12;
    let rel = |name, anchor, op: Operator| RelationCheck {
        name,
        anchor,
        residual: max_column_residual(&op, &interior),
        budget,
    };
    vec![
        rel(
            "a-relation-isometry",
            "T*T = I",
            Operator::lincomb(vec![
                (Complex64::ONE, Operator::compose(vec![t.adjoint(), t.clone()])),
                (-Complex64::ONE, id.clone()),
            ]),
        ),
        rel(
            "a-relation-normal",
            "S*S = SS*",
            Operator::lincomb(vec![
                (Complex64::ONE, Operator::compose(vec![s.adjoint(), s.clone()])),
                (-Complex64::ONE, Operator::compose(vec![s.clone(), s.adjoint()])),
            ]),
        ),
        rel(
            "a-relation-defect",
            "TT* + S*S = I",
            Operator::lincomb(vec![
                (Complex64::ONE, Operator::compose(vec![t.clone(), t.adjoint()])),
                (Complex64::ONE, Operator::compose(vec![s.adjoint(), s.clone()])),
                (-Complex64::ONE, id),
            ]),
        ),
    ]
}

/// The five quantum SU_q(2) relations for a = φ_q(a), b = φ_q(b);
/// square roots enter, so the budget is 1e−10.
pub fn check_suq2_relations(window: TruncationWindow, q: f64) -> Result<Vec<RelationCheck>> {
    validate_q(q)?;
    let a = phi_a(window, q);
    let b = phi_b(window, q);
    let id = Operator::identity(window);
    let interior = InteriorSet::new(window, 2);
    let budget = 1e-10;
    let qc = Complex64::new(q, 0.0);
    let q2 = Complex64::new(q * q, 0.0);
    let rel = |name, anchor, op: Operator| RelationCheck {
        name,
        anchor,
        residual: max_column_residual(&op, &interior),
        budget,
    };
    Ok(vec![
        rel(
            "suq2-relation-unit",
            "a*a + b*b = I",
            Operator::lincomb(vec![
                (Complex64::ONE, Operator::compose(vec![a.adjoint(), a.clone()])),
                (Complex64::ONE, Operator::compose(vec![b.adjoint(), b.clone()])),
                (-Complex64::ONE, id.clone()),
            ]),
        ),
        rel(
            "suq2-relation-ab",
            "ab = q ba",
            Operator::lincomb(vec![
                (Complex64::ONE, Operator::compose(vec![a.clone(), b.clone()])),
                (-qc, Operator::compose(vec![b.clone(), a.clone()])),
            ]),
        ),
        rel(
            "suq2-relation-counit-side",
            "aa* + q^2 b*b = I",
            Operator::lincomb(vec![
                (Complex64::ONE, Operator::compose(vec![a.clone(), a.adjoint()])),
                (q2, Operator::compose(vec![b.adjoint(), b.clone()])),
                (-Complex64::ONE, id),
            ]),
        ),
        rel(
            "suq2-relation-ab-star",
            "ab* = q b*a",
            Operator::lincomb(vec![
                (Complex64::ONE, Operator::compose(vec![a.clone(), b.adjoint()])),
                (-qc, Operator::compose(vec![b.adjoint(), a.clone()])),
            ]),
        ),
        rel(
            "suq2-relation-b-normal",
            "b*b = bb*",
            Operator::lincomb(vec![
                (Complex64::ONE, Operator::compose(vec![b.adjoint(), b.clone()])),
                (-Complex64::ONE, Operator::compose(vec![b.clone(), b.adjoint()])),
            ]),
        ),
    ])
}

/// One-dimensional irreducible ω_t: T ↦ t, S ↦ 0, for |t| = 1.
#[derive(Debug, Clone, Copy)]
pub struct OmegaChar {
    pub t: Complex64,
}

impl OmegaChar {
    pub fn new(t: Complex64) -> Result<Self> {
        if (t.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("|t| = {} is not 1", t.norm())));
        }
        Ok(OmegaChar { t })
    }

    pub fn word(&self, w: &AWord) -> Complex64 {
        match *w {
            AWord::Word { .. } => Complex64::ZERO,
            AWord::Quot { a, b } => self.t.powi(a as i32 - b as i32),
        }
    }

    pub fn wordsum(&self, s: &WordSum) -> Complex64 {
        s.terms.iter().map(|(w, c)| c * self.word(w)).sum()
    }

    /// ω_t(φ_q(a)), through the series for q > 0; φ_0(a) = T* gives t̄.
    pub fn phi_a(&self, q: f64, tol: f64) -> Complex64 {
        if q == 0.0 {
            return self.t.conj();
        }
        let mut acc = Complex64::ZERO;
        let mut n = 0u32;
        loop {
            acc += Complex64::new(phi_a_coeff(q, n), 0.0) * self.t.powi(-1);
            if q.powi(2 * (n as i32 + 1)) <= tol {
                break;
            }
            n += 1;
        }
        acc
    }

    /// ω_t(φ_q(b)) = 0: every series term carries ω_t(S) = 0.
    pub fn phi_b(&self, _q: f64) -> Complex64 {
        Complex64::ZERO
    }
}

/// ρ_t on ℓ²(ℕ): ρ_t(T)ξ(n) = ξ(n+1), ρ_t(S)ξ(n) = δ_{n,0} t ξ(0).
/// Returns (ρ_t(T), ρ_t(S)) on a half-line window with `levels` levels.
pub fn rep_rho_t(t: Complex64, levels: usize) -> Result<(Operator, Operator)> {
    if (t.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("|t| = {} is not 1", t.norm())));
    }
    let w = TruncationWindow::half_line(levels)?;
    let mut tb = SparseBuilder::new(w);
    for k in 0..levels {
        tb.push(&[BasisIndex::new(k + 1, 0)], &[BasisIndex::new(k, 0)], Complex64::ONE);
    }
    let mut sb = SparseBuilder::new(w);
    sb.push(&[BasisIndex::new(0, 0)], &[BasisIndex::new(0, 0)], t);
    Ok((Operator::sparse(tb.finish()), Operator::sparse(sb.finish())))
}

/// ρ_t of a single word on the half-line window.
pub fn rho_t_word_op(t: Complex64, window: TruncationWindow, w: &AWord) -> Operator {
    debug_assert_eq!(window.m_max, 0);
    let mut bld = SparseBuilder::new(window);
    match *w {
        AWord::Word { m, j, n } => {
            bld.push(
                &[BasisIndex::new(m as usize, 0)],
                &[BasisIndex::new(n as usize, 0)],
                t.powi(j),
            );
        }
        AWord::Quot { a, b } => {
            for k in b as usize..window.k_max {
                bld.push(
                    &[BasisIndex::new(k + a as usize - b as usize, 0)],
                    &[BasisIndex::new(k, 0)],
                    Complex64::ONE,
                );
            }
        }
    }
    Operator::sparse(bld.finish())
}

pub fn rho_t_wordsum_op(t: Complex64, window: TruncationWindow, s: &WordSum) -> Operator {
    if s.terms.is_empty() {
        return Operator::zero(window);
    }
    Operator::lincomb(s.terms.iter().map(|(w, &c)| (c, rho_t_word_op(t, window, w))).collect())
}
