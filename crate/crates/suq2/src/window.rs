//! Truncation windows for ℓ²(ℕ×ℤ) and its tensor powers.
//!
//! All operators in this crate live on a finite sub-lattice of the basis
//! ξ(k,m), k ∈ ℕ, m ∈ ℤ: levels 0..k_max and windings −m_max..m_max, raised
//! to a tensor power of order 1, 2 or 3. Compression of an infinite operator
//! to a window is exact only on vectors whose images stay inside the window;
//! [`InteriorSet`] selects those vectors for a given shift reach.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Basis point ξ(k,m): level k ∈ ℕ, winding m ∈ ℤ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisIndex {
    pub k: usize,
    pub m: i64,
}

impl BasisIndex {
    pub fn new(k: usize, m: i64) -> Self {
        BasisIndex { k, m }
    }
}

/// Finite sub-lattice hosting all matrices: levels 0..k_max−1, windings
/// −m_max..=m_max, per tensor leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruncationWindow {
    pub k_max: usize,
    pub m_max: usize,
    pub order: usize,
}

impl TruncationWindow {
    /// Window for the defining representation on ℓ²(ℕ×ℤ). Requires
    /// k_max ≥ 4 and m_max ≥ 4 so a nondegenerate interior exists.
    pub fn standard(k_max: usize, m_max: usize) -> Result<Self> {
        if k_max < 4 || m_max < 4 {
            return Err(Error::InvalidParameter(format!(
                "window ({k_max},{m_max}) too small: need k_max >= 4 and m_max >= 4"
            )));
        }
        Ok(TruncationWindow { k_max, m_max, order: 1 })
    }

    /// Window for the irreducible family acting on ℓ²(ℕ): a single winding
    /// column m = 0.
    pub fn half_line(k_max: usize) -> Result<Self> {
        if k_max < 4 {
            return Err(Error::InvalidParameter(format!(
                "half-line window needs k_max >= 4, got {k_max}"
            )));
        }
        Ok(TruncationWindow { k_max, m_max: 0, order: 1 })
    }

    pub fn tensor_square(&self) -> Self {
        TruncationWindow { order: 2, ..*self }
    }

    pub fn tensor_cube(&self) -> Self {
        TruncationWindow { order: 3, ..*self }
    }

    /// The order-1 window of a single tensor leg.
    pub fn leg(&self) -> Self {
        TruncationWindow { order: 1, ..*self }
    }

    pub fn windings(&self) -> usize {
        2 * self.m_max + 1
    }

    pub fn leg_dim(&self) -> usize {
        self.k_max * self.windings()
    }

    pub fn dim(&self) -> usize {
        self.leg_dim().pow(self.order as u32)
    }

    pub fn contains(&self, idx: BasisIndex) -> bool {
        idx.k < self.k_max && idx.m.unsigned_abs() as usize <= self.m_max
    }

    pub fn contains_tuple(&self, tuple: &[BasisIndex]) -> bool {
        tuple.len() == self.order && tuple.iter().all(|&i| self.contains(i))
    }

    fn leg_flat(&self, idx: BasisIndex) -> usize {
        debug_assert!(self.contains(idx));
        idx.k * self.windings() + (idx.m + self.m_max as i64) as usize
    }

    /// Flat index of a basis tuple; leg 1 is the most significant digit.
    pub fn flat(&self, tuple: &[BasisIndex]) -> usize {
        debug_assert_eq!(tuple.len(), self.order);
        let d = self.leg_dim();
        tuple.iter().fold(0, |acc, &i| acc * d + self.leg_flat(i))
    }

    pub fn unflat(&self, mut flat: usize) -> Vec<BasisIndex> {
        let d = self.leg_dim();
        let w = self.windings();
        let mut out = vec![BasisIndex::new(0, 0); self.order];
        for leg in (0..self.order).rev() {
            let leg_flat = flat % d;
            flat /= d;
            out[leg] = BasisIndex::new(leg_flat / w, (leg_flat % w) as i64 - self.m_max as i64);
        }
        out
    }

    /// Basis points of a single leg, level-major.
    pub fn leg_points(&self) -> impl Iterator<Item = BasisIndex> + '_ {
        (0..self.k_max).flat_map(move |k| {
            (-(self.m_max as i64)..=self.m_max as i64).map(move |m| BasisIndex::new(k, m))
        })
    }
}

/// Basis tuples at distance ≥ `margin` from every window edge, where the
/// compression of an operator with shift reach ≤ margin is exact.
#[derive(Debug, Clone, Copy)]
pub struct InteriorSet {
    pub window: TruncationWindow,
    pub margin: usize,
}

impl InteriorSet {
    pub fn new(window: TruncationWindow, margin: usize) -> Self {
        InteriorSet { window, margin }
    }

    pub fn contains_leg(&self, idx: BasisIndex) -> bool {
        idx.k >= self.margin
            && idx.k + self.margin < self.window.k_max
            && idx.m.unsigned_abs() as usize + self.margin <= self.window.m_max
    }

    pub fn contains(&self, tuple: &[BasisIndex]) -> bool {
        tuple.len() == self.window.order && tuple.iter().all(|&i| self.contains_leg(i))
    }

    pub fn is_empty(&self) -> bool {
        self.margin >= self.window.k_max - self.margin
            || self.window.k_max < 2 * self.margin
            || self.window.m_max < self.margin
    }

    /// All interior tuples, in flat order.
    pub fn tuples(&self) -> Vec<Vec<BasisIndex>> {
        let legs: Vec<BasisIndex> =
            self.window.leg_points().filter(|&p| self.contains_leg(p)).collect();
        let mut out = Vec::new();
        match self.window.order {
            1 => out.extend(legs.iter().map(|&a| vec![a])),
            2 => {
                for &a in &legs {
                    for &b in &legs {
                        out.push(vec![a, b]);
                    }
                }
            }
            3 => {
                for &a in &legs {
                    for &b in &legs {
                        for &c in &legs {
                            out.push(vec![a, b, c]);
                        }
                    }
                }
            }
            _ => unreachable!("tensor order is 1, 2 or 3"),
        }
        out
    }
}

/// Dense complex vector bound to a window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowVec {
    pub window: TruncationWindow,
    pub data: Vec<Complex64>,
}

impl WindowVec {
    pub fn zero(window: TruncationWindow) -> Self {
        WindowVec { window, data: vec![Complex64::ZERO; window.dim()] }
    }

    pub fn basis(window: TruncationWindow, tuple: &[BasisIndex]) -> Self {
        let mut v = Self::zero(window);
        v.data[window.flat(tuple)] = Complex64::ONE;
        v
    }

    pub fn from_entries(
        window: TruncationWindow,
        entries: impl IntoIterator<Item = (Vec<BasisIndex>, Complex64)>,
    ) -> Self {
        let mut v = Self::zero(window);
        for (tuple, amp) in entries {
            v.data[window.flat(&tuple)] += amp;
        }
        v
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self, other⟩, conjugate-linear in `self`.
    pub fn dot(&self, other: &Self) -> Complex64 {
        debug_assert_eq!(self.window, other.window);
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&mut self, c: Complex64) {
        for z in &mut self.data {
            *z *= c;
        }
    }

    pub fn axpy(&mut self, c: Complex64, other: &Self) {
        debug_assert_eq!(self.window, other.window);
        for (z, w) in self.data.iter_mut().zip(&other.data) {
            *z += c * w;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.window, other.window);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        WindowVec { window: self.window, data }
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let inv = Complex64::new(1.0 / n, 0.0);
            self.scale(inv);
        }
        n
    }

    pub fn component(&self, tuple: &[BasisIndex]) -> Complex64 {
        self.data[self.window.flat(tuple)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_dimensions() {
        let w = TruncationWindow::standard(10, 10).unwrap();
        assert_eq!(w.leg_dim(), 210);
        assert_eq!(w.dim(), 210);
        assert_eq!(w.tensor_square().dim(), 210 * 210);
        assert_eq!(w.tensor_cube().dim(), 210 * 210 * 210);
    }

    #[test]
    fn window_minimums_enforced() {
        assert!(TruncationWindow::standard(3, 10).is_err());
        assert!(TruncationWindow::standard(10, 3).is_err());
        assert!(TruncationWindow::standard(4, 4).is_ok());
    }

    #[test]
    fn flat_unflat_roundtrip() {
        let w = TruncationWindow::standard(5, 4).unwrap().tensor_square();
        for flat in 0..w.dim() {
            let tuple = w.unflat(flat);
            assert!(w.contains_tuple(&tuple));
            assert_eq!(w.flat(&tuple), flat);
        }
    }

    #[test]
    fn interior_margins() {
        let w = TruncationWindow::standard(10, 10).unwrap();
        let int = InteriorSet::new(w, 2);
        assert!(int.contains(&[BasisIndex::new(2, -8)]));
        assert!(!int.contains(&[BasisIndex::new(1, 0)]));
        assert!(!int.contains(&[BasisIndex::new(8, 0)]));
        assert!(!int.contains(&[BasisIndex::new(5, 9)]));
        // order ≤ k < k_max − order and |m| ≤ m_max − order, per leg
        assert_eq!(int.tuples().len(), 6 * 17);
    }

    #[test]
    fn basis_vector_components() {
        let w = TruncationWindow::standard(4, 4).unwrap().tensor_square();
        let t = vec![BasisIndex::new(1, -2), BasisIndex::new(0, 3)];
        let v = WindowVec::basis(w, &t);
        assert_eq!(v.component(&t), Complex64::ONE);
        assert_eq!(v.norm(), 1.0);
    }
}
