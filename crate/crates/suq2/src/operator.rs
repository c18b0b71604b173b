//! Sparse complex operators on truncation windows, with lazy composition.
//!
//! Leaf operators are stored column-compressed. Tensor products of explicit
//! leaves are materialized entrywise (the entry at (r₁⊗r₂, c₁⊗c₂) is the
//! product of factor entries), while compositions, powers and series remain
//! lazy expression trees evaluated by repeated matrix–vector action. Explicit
//! materialization of a product is permitted on order-1 windows only.
//!
//! The functional calculus needed downstream lives here too:
//! [`power_projection`] approximates the spectral projection at the isolated
//! eigenvalue 1 of a positive contraction by plain operator powers, and
//! [`inv_sqrt`] computes y^{−1/2} by the binomial series in Z = I − y. Both
//! carry analytic error bounds chosen from the requested tolerance.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::window::{BasisIndex, TruncationWindow, WindowVec};

/// Explicit sparse matrix in column-compressed form.
#[derive(Debug, Clone)]
pub struct SparseMat {
    pub window: TruncationWindow,
    col_ptr: Vec<u32>,
    rows: Vec<u32>,
    vals: Vec<Complex64>,
}

/// Accumulates (row, col, amplitude) triplets; duplicates are summed.
pub struct SparseBuilder {
    window: TruncationWindow,
    triplets: Vec<(u32, u32, Complex64)>,
}

impl SparseBuilder {
    pub fn new(window: TruncationWindow) -> Self {
        SparseBuilder { window, triplets: Vec::new() }
    }

    pub fn push(&mut self, row: &[BasisIndex], col: &[BasisIndex], amp: Complex64) {
        if self.window.contains_tuple(row) && self.window.contains_tuple(col) {
            self.push_flat(self.window.flat(row), self.window.flat(col), amp);
        }
        // out-of-window images are dropped: compression semantics
    }

    pub fn push_flat(&mut self, row: usize, col: usize, amp: Complex64) {
        if amp != Complex64::ZERO {
            self.triplets.push((col as u32, row as u32, amp));
        }
    }

    pub fn finish(mut self) -> SparseMat {
        self.triplets.sort_unstable_by_key(|&(c, r, _)| (c, r));
        let dim = self.window.dim();
        // merge duplicates, dropping entries that cancel exactly
        let mut merged: Vec<(u32, u32, Complex64)> = Vec::with_capacity(self.triplets.len());
        for &(c, r, v) in &self.triplets {
            match merged.last_mut() {
                Some((lc, lr, lv)) if *lc == c && *lr == r => *lv += v,
                _ => merged.push((c, r, v)),
            }
        }
        let mut col_ptr = vec![0u32; dim + 1];
        let mut rows = Vec::with_capacity(merged.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(merged.len());
        for &(c, r, v) in &merged {
            if v != Complex64::ZERO {
                rows.push(r);
                vals.push(v);
                col_ptr[c as usize + 1] += 1;
            }
        }
        for i in 0..dim {
            col_ptr[i + 1] += col_ptr[i];
        }
        SparseMat { window: self.window, col_ptr, rows, vals }
    }
}

impl SparseMat {
    pub fn zero(window: TruncationWindow) -> Self {
        SparseBuilder::new(window).finish()
    }

    pub fn identity(window: TruncationWindow) -> Self {
        let mut b = SparseBuilder::new(window);
        for i in 0..window.dim() {
            b.push_flat(i, i, Complex64::ONE);
        }
        b.finish()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn col_range(&self, c: usize) -> std::ops::Range<usize> {
        self.col_ptr[c] as usize..self.col_ptr[c + 1] as usize
    }

    pub fn apply(&self, v: &WindowVec) -> WindowVec {
        let mut out = WindowVec::zero(self.window);
        for (c, &x) in v.data.iter().enumerate() {
            if x == Complex64::ZERO {
                continue;
            }
            for i in self.col_range(c) {
                out.data[self.rows[i] as usize] += self.vals[i] * x;
            }
        }
        out
    }

    pub fn apply_adjoint(&self, v: &WindowVec) -> WindowVec {
        let mut out = WindowVec::zero(self.window);
        for c in 0..self.window.dim() {
            let mut acc = Complex64::ZERO;
            for i in self.col_range(c) {
                acc += self.vals[i].conj() * v.data[self.rows[i] as usize];
            }
            out.data[c] = acc;
        }
        out
    }

    pub fn adjoint(&self) -> SparseMat {
        let mut b = SparseBuilder::new(self.window);
        for c in 0..self.window.dim() {
            for i in self.col_range(c) {
                b.push_flat(c, self.rows[i] as usize, self.vals[i].conj());
            }
        }
        b.finish()
    }

    pub fn scaled(&self, s: Complex64) -> SparseMat {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &SparseMat) -> SparseMat {
        debug_assert_eq!(self.window, other.window);
        let mut b = SparseBuilder::new(self.window);
        for m in [self, other] {
            for c in 0..m.window.dim() {
                for i in m.col_range(c) {
                    b.push_flat(m.rows[i] as usize, c, m.vals[i]);
                }
            }
        }
        b.finish()
    }

    /// Matrix product self·other. Reserved for order-1 windows; tensor
    /// windows go through the fanout-guarded [`Operator::compact`].
    pub fn matmul(&self, other: &SparseMat) -> SparseMat {
        debug_assert_eq!(self.window, other.window);
        debug_assert_eq!(self.window.order, 1, "products are materialized on order-1 windows only");
        self.matmul_unchecked(other)
    }

    fn matmul_unchecked(&self, other: &SparseMat) -> SparseMat {
        let mut b = SparseBuilder::new(self.window);
        for c in 0..other.window.dim() {
            for i in other.col_range(c) {
                let mid = other.rows[i] as usize;
                let w = other.vals[i];
                for j in self.col_range(mid) {
                    b.push_flat(self.rows[j] as usize, c, self.vals[j] * w);
                }
            }
        }
        b.finish()
    }

    /// Kronecker product: entry ((r₁,r₂),(c₁,c₂)) = a(r₁,c₁)·b(r₂,c₂).
    pub fn kron(&self, other: &SparseMat) -> SparseMat {
        assert_eq!(self.window.k_max, other.window.k_max);
        assert_eq!(self.window.m_max, other.window.m_max);
        let order = self.window.order + other.window.order;
        assert!(order <= 3);
        let window = TruncationWindow { order, ..self.window };
        let shift = other.window.dim();
        let mut b = SparseBuilder::new(window);
        for c1 in 0..self.window.dim() {
            for i in self.col_range(c1) {
                let (r1, v1) = (self.rows[i] as usize, self.vals[i]);
                for c2 in 0..other.window.dim() {
                    for j in other.col_range(c2) {
                        b.push_flat(
                            r1 * shift + other.rows[j] as usize,
                            c1 * shift + c2,
                            v1 * other.vals[j],
                        );
                    }
                }
            }
        }
        b.finish()
    }

    pub fn max_col_fanout(&self) -> usize {
        (0..self.window.dim()).map(|c| self.col_range(c).len()).max().unwrap_or(0)
    }

    pub fn entry_flat(&self, row: usize, col: usize) -> Complex64 {
        let range = self.col_range(col);
        match self.rows[range.clone()].binary_search(&(row as u32)) {
            Ok(pos) => self.vals[range.start + pos],
            Err(_) => Complex64::ZERO,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.window.dim()).flat_map(move |c| {
            self.col_range(c).map(move |i| (self.rows[i] as usize, c, self.vals[i]))
        })
    }
}

/// A custom operator evaluated by its own matvec rules.
pub trait CustomOp: Send + Sync {
    fn window(&self) -> TruncationWindow;
    fn apply(&self, v: &WindowVec) -> WindowVec;
    fn apply_adjoint(&self, v: &WindowVec) -> WindowVec;
    fn label(&self) -> &str;
}

#[derive(Clone)]
enum Node {
    Sparse(SparseMat),
    Identity(TruncationWindow),
    /// Mathematical product, leftmost factor applied last.
    Compose(Vec<Operator>),
    LinComb(Vec<(Complex64, Operator)>),
    Adjoint(Operator),
    Power(Operator, u32),
    /// Σ_k coeffs[k]·base^k, evaluated by Horner's scheme.
    Poly { base: Operator, coeffs: Vec<f64> },
    Custom(Arc<dyn CustomOp>),
}

/// Shareable operator expression; all variants are immutable after
/// construction and safe to use from parallel checks.
#[derive(Clone)]
pub struct Operator {
    node: Arc<Node>,
    window: TruncationWindow,
}

impl Operator {
    pub fn sparse(mat: SparseMat) -> Self {
        let window = mat.window;
        Operator { node: Arc::new(Node::Sparse(mat)), window }
    }

    pub fn identity(window: TruncationWindow) -> Self {
        Operator { node: Arc::new(Node::Identity(window)), window }
    }

    pub fn zero(window: TruncationWindow) -> Self {
        Operator::sparse(SparseMat::zero(window))
    }

    pub fn compose(factors: Vec<Operator>) -> Self {
        assert!(!factors.is_empty());
        let window = factors[0].window;
        assert!(factors.iter().all(|f| f.window == window), "window mismatch in composition");
        Operator { node: Arc::new(Node::Compose(factors)), window }
    }

    pub fn lincomb(terms: Vec<(Complex64, Operator)>) -> Self {
        assert!(!terms.is_empty());
        let window = terms[0].1.window;
        assert!(terms.iter().all(|(_, f)| f.window == window), "window mismatch in sum");
        Operator { node: Arc::new(Node::LinComb(terms)), window }
    }

    pub fn scaled(c: Complex64, op: Operator) -> Self {
        Operator::lincomb(vec![(c, op)])
    }

    pub fn adjoint(&self) -> Self {
        Operator { node: Arc::new(Node::Adjoint(self.clone())), window: self.window }
    }

    pub fn power(&self, p: u32) -> Self {
        Operator { node: Arc::new(Node::Power(self.clone(), p)), window: self.window }
    }

    pub fn poly(base: Operator, coeffs: Vec<f64>) -> Self {
        let window = base.window;
        Operator { node: Arc::new(Node::Poly { base, coeffs }), window }
    }

    pub fn custom(op: Arc<dyn CustomOp>) -> Self {
        let window = op.window();
        Operator { node: Arc::new(Node::Custom(op)), window }
    }

    /// Tensor product of explicit factors; materialized entrywise, so each
    /// factor must itself be materializable.
    pub fn tensor(factors: &[Operator]) -> Result<Self> {
        assert!(factors.len() >= 2);
        let mut mat: Option<SparseMat> = None;
        for f in factors {
            let fm = f.to_sparse().ok_or_else(|| {
                Error::InvalidParameter(
                    "tensor factor is not materializable (lazy product on tensor window)".into(),
                )
            })?;
            mat = Some(match mat {
                None => fm,
                Some(acc) => acc.kron(&fm),
            });
        }
        Ok(Operator::sparse(mat.unwrap()))
    }

    pub fn window(&self) -> TruncationWindow {
        self.window
    }

    /// Evaluates the expression tree on `v`, right-to-left for products.
    pub fn apply(&self, v: &WindowVec) -> Result<WindowVec> {
        if v.window != self.window {
            return Err(Error::WindowMismatch {
                op: format!("{:?}", self.window),
                vec: format!("{:?}", v.window),
            });
        }
        Ok(self.apply_unchecked(v))
    }

    fn apply_unchecked(&self, v: &WindowVec) -> WindowVec {
        match &*self.node {
            Node::Sparse(m) => m.apply(v),
            Node::Identity(_) => v.clone(),
            Node::Compose(fs) => {
                let mut cur = v.clone();
                for f in fs.iter().rev() {
                    cur = f.apply_unchecked(&cur);
                }
                cur
            }
            Node::LinComb(ts) => {
                let mut out = WindowVec::zero(self.window);
                for (c, f) in ts {
                    out.axpy(*c, &f.apply_unchecked(v));
                }
                out
            }
            Node::Adjoint(f) => f.apply_adjoint_unchecked(v),
            Node::Power(f, p) => {
                let mut cur = v.clone();
                for _ in 0..*p {
                    cur = f.apply_unchecked(&cur);
                }
                cur
            }
            Node::Poly { base, coeffs } => {
                if coeffs.is_empty() {
                    return WindowVec::zero(self.window);
                }
                let mut acc = v.clone();
                acc.scale(Complex64::new(*coeffs.last().unwrap(), 0.0));
                for &c in coeffs.iter().rev().skip(1) {
                    acc = base.apply_unchecked(&acc);
                    acc.axpy(Complex64::new(c, 0.0), v);
                }
                acc
            }
            Node::Custom(op) => op.apply(v),
        }
    }

    pub fn apply_adjoint(&self, v: &WindowVec) -> Result<WindowVec> {
        if v.window != self.window {
            return Err(Error::WindowMismatch {
                op: format!("{:?}", self.window),
                vec: format!("{:?}", v.window),
            });
        }
        Ok(self.apply_adjoint_unchecked(v))
    }

    fn apply_adjoint_unchecked(&self, v: &WindowVec) -> WindowVec {
        match &*self.node {
            Node::Sparse(m) => m.apply_adjoint(v),
            Node::Identity(_) => v.clone(),
            Node::Compose(fs) => {
                let mut cur = v.clone();
                for f in fs {
                    cur = f.apply_adjoint_unchecked(&cur);
                }
                cur
            }
            Node::LinComb(ts) => {
                let mut out = WindowVec::zero(self.window);
                for (c, f) in ts {
                    out.axpy(c.conj(), &f.apply_adjoint_unchecked(v));
                }
                out
            }
            Node::Adjoint(f) => f.apply_unchecked(v),
            Node::Power(f, p) => {
                let mut cur = v.clone();
                for _ in 0..*p {
                    cur = f.apply_adjoint_unchecked(&cur);
                }
                cur
            }
            Node::Poly { base, coeffs } => {
                if coeffs.is_empty() {
                    return WindowVec::zero(self.window);
                }
                let mut acc = v.clone();
                acc.scale(Complex64::new(*coeffs.last().unwrap(), 0.0));
                for &c in coeffs.iter().rev().skip(1) {
                    acc = base.apply_adjoint_unchecked(&acc);
                    acc.axpy(Complex64::new(c, 0.0), v);
                }
                acc
            }
            Node::Custom(op) => op.apply_adjoint(v),
        }
    }

    pub fn column(&self, col: &[BasisIndex]) -> Result<WindowVec> {
        self.apply(&WindowVec::basis(self.window, col))
    }

    /// Matrix entry ⟨row, self·col⟩, via one column application.
    pub fn entry(&self, row: &[BasisIndex], col: &[BasisIndex]) -> Result<Complex64> {
        Ok(self.column(col)?.component(row))
    }

    /// Explicit entry form. Available for leaves, adjoints and sums on any
    /// window; for products only on order-1 windows.
    pub fn to_sparse(&self) -> Option<SparseMat> {
        match &*self.node {
            Node::Sparse(m) => Some(m.clone()),
            Node::Identity(w) => Some(SparseMat::identity(*w)),
            Node::Adjoint(f) => f.to_sparse().map(|m| m.adjoint()),
            Node::LinComb(ts) => {
                let mut acc = SparseMat::zero(self.window);
                for (c, f) in ts {
                    acc = acc.add(&f.to_sparse()?.scaled(*c));
                }
                Some(acc)
            }
            Node::Compose(fs) if self.window.order == 1 => {
                let mut acc: Option<SparseMat> = None;
                for f in fs.iter().rev() {
                    let fm = f.to_sparse()?;
                    acc = Some(match acc {
                        None => fm,
                        Some(prev) => fm.matmul(&prev),
                    });
                }
                acc
            }
            Node::Power(f, p) if self.window.order == 1 => {
                let fm = f.to_sparse()?;
                let mut acc = SparseMat::identity(self.window);
                for _ in 0..*p {
                    acc = fm.matmul(&acc);
                }
                Some(acc)
            }
            Node::Poly { base, coeffs } if self.window.order == 1 => {
                let bm = base.to_sparse()?;
                let mut acc = SparseMat::zero(self.window);
                let mut pow = SparseMat::identity(self.window);
                for (k, &c) in coeffs.iter().enumerate() {
                    if k > 0 {
                        pow = bm.matmul(&pow);
                    }
                    acc = acc.add(&pow.scaled(Complex64::new(c, 0.0)));
                }
                Some(acc)
            }
            _ => None,
        }
    }

    /// Collapses additive trees into a single explicit leaf when permitted;
    /// lazy products on tensor windows are returned unchanged.
    pub fn materialized(self) -> Operator {
        match self.to_sparse() {
            Some(m) => Operator::sparse(m),
            None => self,
        }
    }

    /// Materializes a product whose column fanout stays at or below
    /// `max_fanout` — the hot inner loops of the functional calculus apply
    /// such products thousands of times, and a bounded-fanout explicit form
    /// is strictly cheaper than walking the tree. Anything wider, or any
    /// factor without an explicit form, is returned unchanged.
    pub fn compact(self, max_fanout: usize) -> Operator {
        let factors: &[Operator] = match &*self.node {
            Node::Compose(fs) => fs,
            _ => return self.materialized(),
        };
        let mut acc: Option<SparseMat> = None;
        for f in factors.iter().rev() {
            let fm = match f.to_sparse() {
                Some(m) => m,
                None => return self,
            };
            acc = Some(match acc {
                None => fm,
                Some(prev) => fm.matmul_unchecked(&prev),
            });
        }
        match acc {
            Some(m) if m.max_col_fanout() <= max_fanout => Operator::sparse(m),
            _ => self,
        }
    }

    /// Writes the explicit entries in the dump format: one line per nonzero,
    /// `k₁ m₁ [k₂ m₂ …] | k₁′ m₁′ […] | re im` (row tuple, column tuple),
    /// after a header naming the window.
    pub fn dump(&self, out: &mut dyn std::io::Write) -> Result<()> {
        let mat = self.to_sparse().ok_or_else(|| {
            Error::InvalidParameter("cannot dump a lazy product on a tensor window".into())
        })?;
        let w = self.window;
        writeln!(out, "# window k_max={} m_max={} order={}", w.k_max, w.m_max, w.order)?;
        let fmt = |tuple: &[BasisIndex]| {
            tuple.iter().map(|b| format!("{} {}", b.k, b.m)).collect::<Vec<_>>().join(" ")
        };
        for (r, c, v) in mat.entries() {
            writeln!(out, "{} | {} | {:.17e} {:.17e}", fmt(&w.unflat(r)), fmt(&w.unflat(c)), v.re, v.im)?;
        }
        Ok(())
    }
}

/// Operator together with analytic bookkeeping: `target_norm` bounds the
/// norm of the exact object it approximates, `err` bounds the deviation from
/// that object on interior vectors. Interval-style accumulation through
/// compositions keeps every downstream residual threshold computable.
#[derive(Clone)]
pub struct BoundedOp {
    pub op: Operator,
    pub target_norm: f64,
    pub err: f64,
}

impl BoundedOp {
    pub fn exact(op: Operator, target_norm: f64) -> Self {
        BoundedOp { op, target_norm, err: 0.0 }
    }

    pub fn norm_bound(&self) -> f64 {
        self.target_norm + self.err
    }

    pub fn compose(&self, rhs: &BoundedOp) -> BoundedOp {
        BoundedOp {
            op: Operator::compose(vec![self.op.clone(), rhs.op.clone()]),
            target_norm: self.target_norm * rhs.target_norm,
            err: self.err * rhs.norm_bound() + self.target_norm * rhs.err,
        }
    }

    pub fn adjoint(&self) -> BoundedOp {
        BoundedOp { op: self.op.adjoint(), target_norm: self.target_norm, err: self.err }
    }

    pub fn lincomb(terms: &[(Complex64, &BoundedOp)]) -> BoundedOp {
        let op = Operator::lincomb(terms.iter().map(|(c, b)| (*c, b.op.clone())).collect());
        BoundedOp {
            op,
            target_norm: terms.iter().map(|(c, b)| c.norm() * b.target_norm).sum(),
            err: terms.iter().map(|(c, b)| c.norm() * b.err).sum(),
        }
    }
}

/// Power-iteration estimate of ‖op‖ via the top eigenvalue of op*∘op.
/// Returns a lower bound that converges upward; deterministic for a given
/// rng state. The zero operator reports 0 at once.
pub fn norm_estimate(op: &Operator, iters: usize, rng: &mut impl Rng) -> f64 {
    let mut v = WindowVec::zero(op.window());
    for z in &mut v.data {
        *z = Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0);
    }
    if v.normalize() == 0.0 {
        return 0.0;
    }
    let mut best = 0.0f64;
    for _ in 0..iters {
        let av = op.apply_unchecked(&v);
        let sigma = av.norm();
        best = best.max(sigma);
        if sigma < 1e-300 {
            return 0.0;
        }
        v = op.apply_adjoint_unchecked(&av);
        if v.normalize() < 1e-300 {
            return best;
        }
    }
    best
}

/// Restriction of `op` to interior columns: op ∘ P_interior, as a lazy
/// composition with the diagonal interior projection.
pub fn restrict_to_interior(op: &Operator, interior: &crate::window::InteriorSet) -> Operator {
    let mut b = SparseBuilder::new(op.window());
    for t in interior.tuples() {
        let f = op.window().flat(&t);
        b.push_flat(f, f, Complex64::ONE);
    }
    Operator::compose(vec![op.clone(), Operator::sparse(b.finish())])
}

/// Restriction away from the top and winding faces only; the level floor is
/// kept because compression below level 0 is exact.
pub fn restrict_from_faces(op: &Operator, margin: usize) -> Operator {
    let w = op.window();
    let mut b = SparseBuilder::new(w);
    for flat in 0..w.dim() {
        let tuple = w.unflat(flat);
        if tuple
            .iter()
            .all(|p| p.k + margin < w.k_max && p.m.unsigned_abs() as usize + margin <= w.m_max)
        {
            b.push_flat(flat, flat, Complex64::ONE);
        }
    }
    Operator::compose(vec![op.clone(), Operator::sparse(b.finish())])
}

/// Spectral projection at the isolated eigenvalue 1 of a positive
/// contraction, computed as x^p with p = ⌈log tol / log gap⌉. On a spectrum
/// inside [0, gap] ∪ {1} the operator-norm error is ≤ gap^p ≤ tol.
pub struct PowerProjection {
    pub op: BoundedOp,
    pub power: u32,
}

pub fn power_projection(
    x: &BoundedOp,
    gap: f64,
    tol: f64,
    power_budget: usize,
) -> Result<PowerProjection> {
    if !(0.0..1.0).contains(&gap) {
        return Err(Error::InvalidParameter(format!("spectral gap {gap} not in [0,1)")));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let p = if gap == 0.0 { 1 } else { (tol.ln() / gap.ln()).ceil().max(1.0) as usize };
    if p > power_budget {
        return Err(Error::BudgetExceeded { what: "power", needed: p, budget: power_budget });
    }
    let bound = gap.powi(p as i32);
    Ok(PowerProjection {
        op: BoundedOp {
            op: x.op.power(p as u32),
            target_norm: 1.0,
            // ‖x^p − E({1})‖ ≤ gap^p, plus p·err for the inexactness of x itself
            err: bound + p as f64 * x.err,
        },
        power: p as u32,
    })
}

/// y^{−1/2} for positive y = I − Z with ‖Z‖ ≤ 1 − lower, via the binomial
/// series Σ_k c_k Z^k of (1−z)^{−1/2} truncated once the analytic tail is
/// ≤ tol. The series coefficients c_k = (2k−1)!!/(2k)!! are positive and
/// decreasing, so the tail after N terms is ≤ c_{N+1} r^{N+1}/(1−r).
pub struct InvSqrt {
    pub op: BoundedOp,
    pub terms: usize,
}

pub fn inv_sqrt(y: &BoundedOp, lower: f64, tol: f64, series_budget: usize) -> Result<InvSqrt> {
    if lower <= 0.0 {
        return Err(Error::InvalidParameter(format!("spectral lower bound {lower} must be > 0")));
    }
    if lower > 1.0 {
        return Err(Error::InvalidParameter(format!("spectral lower bound {lower} exceeds 1")));
    }
    let r = 1.0 - lower;
    let mut coeffs = vec![1.0f64];
    let mut c = 1.0f64;
    let mut rk = 1.0f64;
    let mut tail;
    loop {
        let k = coeffs.len() as f64;
        c *= (2.0 * k - 1.0) / (2.0 * k);
        rk *= r;
        // tail after the terms collected so far, with c_{N+1} = c
        tail = if r == 0.0 { 0.0 } else { c * rk / (1.0 - r) };
        if tail <= tol {
            break;
        }
        coeffs.push(c);
        if coeffs.len() > series_budget {
            return Err(Error::BudgetExceeded {
                what: "series",
                needed: coeffs.len(),
                budget: series_budget,
            });
        }
    }
    let z = Operator::lincomb(vec![
        (Complex64::ONE, Operator::identity(y.op.window())),
        (-Complex64::ONE, y.op.clone()),
    ])
    .materialized();
    let target = 1.0 / lower.sqrt();
    // d/dz (1−z)^{−1/2} = ½(1−z)^{−3/2} controls sensitivity to err(y)
    let sensitivity = 0.5 / lower.powf(1.5);
    Ok(InvSqrt {
        op: BoundedOp {
            op: Operator::poly(z, coeffs.clone()),
            target_norm: target,
            err: tail + sensitivity * y.err,
        },
        terms: coeffs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::window::InteriorSet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn win() -> TruncationWindow {
        TruncationWindow::standard(6, 5).unwrap()
    }

    /// Level-raising shift: ξ(k,m) ↦ ξ(k+1,m), entries dropped at the top.
    fn shift_up(w: TruncationWindow) -> Operator {
        let mut b = SparseBuilder::new(w);
        for p in w.leg_points() {
            b.push(&[BasisIndex::new(p.k + 1, p.m)], &[p], Complex64::ONE);
        }
        Operator::sparse(b.finish())
    }

    /// Diagonal with amplitude q^k at level k.
    fn geometric_diag(w: TruncationWindow, q: f64) -> Operator {
        let mut b = SparseBuilder::new(w);
        for p in w.leg_points() {
            b.push(&[p], &[p], Complex64::new(q.powi(p.k as i32), 0.0));
        }
        Operator::sparse(b.finish())
    }

    #[test]
    fn identity_applies_trivially() {
        let w = win();
        let v = WindowVec::basis(w, &[BasisIndex::new(2, -3)]);
        let out = Operator::identity(w).apply(&v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn apply_rejects_window_mismatch() {
        let w = win();
        let other = TruncationWindow::standard(7, 5).unwrap();
        let v = WindowVec::zero(other);
        assert!(Operator::identity(w).apply(&v).is_err());
    }

    #[test]
    fn compose_evaluates_right_to_left() {
        let w = win();
        let t = shift_up(w);
        // (T ∘ T*) on ξ(0,m) is 0 because T* kills level 0
        let tt_star = Operator::compose(vec![t.clone(), t.adjoint()]);
        let v = WindowVec::basis(w, &[BasisIndex::new(0, 2)]);
        assert_eq!(tt_star.apply(&v).unwrap().norm(), 0.0);
        // while (T* ∘ T) fixes it
        let t_star_t = Operator::compose(vec![t.adjoint(), t]);
        let out = t_star_t.apply(&v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn adjoint_compose_agrees_on_interior() {
        let w = win();
        let t = shift_up(w);
        let d = geometric_diag(w, 0.5);
        let op = Operator::compose(vec![t.clone(), d]);
        let composed = Operator::compose(vec![op.adjoint(), op.clone()]);
        let interior = InteriorSet::new(w, 1);
        for tuple in interior.tuples() {
            let v = WindowVec::basis(w, &tuple);
            let a = op.apply_adjoint(&op.apply(&v).unwrap()).unwrap();
            let b = composed.apply(&v).unwrap();
            assert!(a.sub(&b).norm() <= 1e-12);
        }
    }

    #[test]
    fn tensor_entries_are_products_and_associative() {
        let w = win();
        let t = shift_up(w);
        let d = geometric_diag(w, 0.3);
        let ab = Operator::tensor(&[t.clone(), d.clone()]).unwrap();
        let am = t.to_sparse().unwrap();
        let bm = d.to_sparse().unwrap();
        let abm = ab.to_sparse().unwrap();
        for (r, c, v) in abm.entries() {
            let rt = ab.window().unflat(r);
            let ct = ab.window().unflat(c);
            let expect = am.entry_flat(w.flat(&[rt[0]]), w.flat(&[ct[0]]))
                * bm.entry_flat(w.flat(&[rt[1]]), w.flat(&[ct[1]]));
            assert_eq!(v, expect);
        }
        // associativity on entries, exact
        let small = TruncationWindow::standard(4, 4).unwrap();
        let x = shift_up(small);
        let y = geometric_diag(small, 0.5);
        let z = x.adjoint();
        let left = Operator::tensor(&[Operator::tensor(&[x.clone(), y.clone()]).unwrap(), z.clone()])
            .unwrap()
            .to_sparse()
            .unwrap();
        let right = Operator::tensor(&[x, Operator::tensor(&[y, z]).unwrap()])
            .unwrap()
            .to_sparse()
            .unwrap();
        let lv: Vec<_> = left.entries().collect();
        let rv: Vec<_> = right.entries().collect();
        assert_eq!(lv, rv);
    }

    #[test]
    fn power_projection_fixes_projections() {
        let w = win();
        // diagonal projection onto level 0: already idempotent
        let mut b = SparseBuilder::new(w);
        for p in w.leg_points() {
            if p.k == 0 {
                b.push(&[p], &[p], Complex64::ONE);
            }
        }
        let x = BoundedOp::exact(Operator::sparse(b.finish()), 1.0);
        let proj = power_projection(&x, 0.25, 1e-8, 512).unwrap();
        for p in w.leg_points() {
            let v = WindowVec::basis(w, &[p]);
            let out = proj.op.op.apply(&v).unwrap();
            let expect = x.op.apply(&v).unwrap();
            assert!(out.sub(&expect).norm() <= 1e-15);
        }
    }

    #[test]
    fn power_projection_geometric_spectrum() {
        let w = win();
        // eigenvalues 0.25^k: isolated 1 at level 0, gap 0.25
        let x = BoundedOp::exact(geometric_diag(w, 0.25), 1.0);
        let proj = power_projection(&x, 0.25, 1e-8, 512).unwrap();
        assert_eq!(proj.power, 14); // ⌈ln(1e−8)/ln(0.25)⌉
        let v0 = WindowVec::basis(w, &[BasisIndex::new(0, 1)]);
        assert!((proj.op.op.apply(&v0).unwrap().sub(&v0)).norm() <= 1e-15);
        let v1 = WindowVec::basis(w, &[BasisIndex::new(1, 0)]);
        let leak = proj.op.op.apply(&v1).unwrap().norm();
        let expect = 0.25f64.powi(proj.power as i32);
        assert!((leak - expect).abs() <= 1e-18);
        assert!(leak <= proj.op.err);
    }

    #[test]
    fn power_projection_budget_and_gap_errors() {
        let w = win();
        let x = BoundedOp::exact(geometric_diag(w, 0.25), 1.0);
        assert!(power_projection(&x, 1.0, 1e-8, 512).is_err());
        assert!(matches!(
            power_projection(&x, 0.99, 1e-8, 5),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn inv_sqrt_identity_is_single_term() {
        let w = win();
        let y = BoundedOp::exact(Operator::identity(w), 1.0);
        let r = inv_sqrt(&y, 1.0, 1e-10, 512).unwrap();
        assert_eq!(r.terms, 1);
        let v = WindowVec::basis(w, &[BasisIndex::new(2, 2)]);
        assert!(r.op.op.apply(&v).unwrap().sub(&v).norm() <= 1e-15);
    }

    #[test]
    fn inv_sqrt_scalar_block() {
        let w = win();
        // y = 0.75·I: exact inverse square root is (0.75)^{−1/2}
        let y = BoundedOp::exact(
            Operator::scaled(Complex64::new(0.75, 0.0), Operator::identity(w)),
            1.0,
        );
        let r = inv_sqrt(&y, 0.75, 1e-12, 512).unwrap();
        let v = WindowVec::basis(w, &[BasisIndex::new(1, 0)]);
        let out = r.op.op.apply(&v).unwrap();
        let scalar = out.component(&[BasisIndex::new(1, 0)]).re;
        let oracle = 0.75f64.powf(-0.5); // 1.1547005383792515…
        assert!((scalar - oracle).abs() <= 1e-12);
    }

    #[test]
    fn inv_sqrt_sandwich_property() {
        let w = win();
        // y = I − Z with Z = 0.25·(geometric diag), spectrum in [0.75, 1]
        let z = Operator::scaled(Complex64::new(0.25, 0.0), geometric_diag(w, 0.5));
        let y_op = Operator::lincomb(vec![
            (Complex64::ONE, Operator::identity(w)),
            (-Complex64::ONE, z),
        ]);
        let y = BoundedOp::exact(y_op.clone(), 1.0);
        let tol = 1e-9;
        let r = inv_sqrt(&y, 0.75, tol, 512).unwrap();
        let sandwich = Operator::compose(vec![r.op.op.clone(), y_op, r.op.op.clone()]);
        for p in w.leg_points() {
            let v = WindowVec::basis(w, &[p]);
            let out = sandwich.apply(&v).unwrap();
            assert!(out.sub(&v).norm() <= 3.0 * tol);
        }
    }

    #[test]
    fn inv_sqrt_rejects_bad_lower() {
        let w = win();
        let y = BoundedOp::exact(Operator::identity(w), 1.0);
        assert!(inv_sqrt(&y, 0.0, 1e-8, 512).is_err());
        assert!(matches!(
            inv_sqrt(&y, 1e-6, 1e-12, 3),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn norm_estimates() {
        let w = win();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // isometric shift has norm 1
        let t = shift_up(w);
        let n = norm_estimate(&t, 30, &mut rng);
        assert!((n - 1.0).abs() <= 1e-9, "norm of shift: {n}");
        // zero operator
        assert_eq!(norm_estimate(&Operator::zero(w), 10, &mut rng), 0.0);
        // geometric diagonal attains its norm 1 on the level-0 block
        let d = geometric_diag(w, 0.5);
        let nd = norm_estimate(&d, 60, &mut rng);
        assert!((nd - 1.0).abs() <= 1e-6, "norm of diag: {nd}");
    }

    #[test]
    fn dump_roundtrip_format() {
        let w = TruncationWindow::standard(4, 4).unwrap();
        let t = shift_up(w);
        let mut buf = Vec::new();
        t.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# window k_max=4 m_max=4 order=1");
        // one line per nonzero entry: 3 levels survive × 9 windings
        assert_eq!(lines.clone().count(), 27);
        let first = lines.next().unwrap();
        let parts: Vec<&str> = first.split(" | ").collect();
        assert_eq!(parts.len(), 3);
    }
}
