//! Coefficient fields and the exact linear algebra the cohomology code needs.
//!
//! Vectors are field-specific: `F2` packs bits into `u64` words so row
//! operations are word-wide XORs; rationals use `BigRational` entries.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub trait Field: Clone + Debug + PartialEq + Send + Sync + 'static {
    type Vector: Clone + Debug + PartialEq + Send + Sync;

    const NAME: &'static str;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse of a nonzero element.
    fn inv(&self) -> Self;

    fn zeros(len: usize) -> Self::Vector;
    fn len(v: &Self::Vector) -> usize;
    fn get(v: &Self::Vector, i: usize) -> Self;
    fn set(v: &mut Self::Vector, i: usize, x: Self);
    /// `y += a·x`
    fn axpy(y: &mut Self::Vector, a: &Self, x: &Self::Vector);
    fn scale(v: &mut Self::Vector, a: &Self);
    fn first_nonzero(v: &Self::Vector) -> Option<usize>;

    fn unit(len: usize, i: usize) -> Self::Vector {
        let mut v = Self::zeros(len);
        Self::set(&mut v, i, Self::one());
        v
    }
}

/// The two-element field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct F2(pub bool);

/// Bit-packed vector over `F2`; bits past `len` stay zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl Field for F2 {
    type Vector = BitVector;

    const NAME: &'static str = "F2";

    fn zero() -> Self {
        F2(false)
    }
    fn one() -> Self {
        F2(true)
    }
    fn from_i64(v: i64) -> Self {
        F2(v.rem_euclid(2) == 1)
    }
    fn is_zero(&self) -> bool {
        !self.0
    }
    fn add(&self, other: &Self) -> Self {
        F2(self.0 ^ other.0)
    }
    fn mul(&self, other: &Self) -> Self {
        F2(self.0 & other.0)
    }
    fn neg(&self) -> Self {
        *self
    }
    fn inv(&self) -> Self {
        assert!(self.0, "zero has no inverse");
        *self
    }

    fn zeros(len: usize) -> BitVector {
        BitVector { len, words: vec![0; len.div_ceil(64)] }
    }
    fn len(v: &BitVector) -> usize {
        v.len
    }
    fn get(v: &BitVector, i: usize) -> Self {
        F2(v.words[i / 64] >> (i % 64) & 1 == 1)
    }
    fn set(v: &mut BitVector, i: usize, x: Self) {
        let bit = 1u64 << (i % 64);
        if x.0 {
            v.words[i / 64] |= bit;
        } else {
            v.words[i / 64] &= !bit;
        }
    }
    fn axpy(y: &mut BitVector, a: &Self, x: &BitVector) {
        if a.0 {
            for (w, u) in y.words.iter_mut().zip(&x.words) {
                *w ^= u;
            }
        }
    }
    fn scale(v: &mut BitVector, a: &Self) {
        if !a.0 {
            v.words.iter_mut().for_each(|w| *w = 0);
        }
    }
    fn first_nonzero(v: &BitVector) -> Option<usize> {
        v.words
            .iter()
            .position(|&w| w != 0)
            .map(|k| 64 * k + v.words[k].trailing_zeros() as usize)
    }
}

impl Field for BigRational {
    type Vector = Vec<BigRational>;

    const NAME: &'static str = "Q";

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Self {
        self.recip()
    }

    fn zeros(len: usize) -> Vec<BigRational> {
        vec![Zero::zero(); len]
    }
    fn len(v: &Vec<BigRational>) -> usize {
        v.len()
    }
    fn get(v: &Vec<BigRational>, i: usize) -> Self {
        v[i].clone()
    }
    fn set(v: &mut Vec<BigRational>, i: usize, x: Self) {
        v[i] = x;
    }
    fn axpy(y: &mut Vec<BigRational>, a: &Self, x: &Vec<BigRational>) {
        if Zero::is_zero(a) {
            return;
        }
        for (yi, xi) in y.iter_mut().zip(x) {
            if !Zero::is_zero(xi) {
                *yi += a * xi;
            }
        }
    }
    fn scale(v: &mut Vec<BigRational>, a: &Self) {
        v.iter_mut().for_each(|x| *x *= a);
    }
    fn first_nonzero(v: &Vec<BigRational>) -> Option<usize> {
        v.iter().position(|x| !Zero::is_zero(x))
    }
}

/// Rational field element, for callers that want a short name.
pub type Q = BigRational;

/// Dense matrix stored as rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<F: Field> {
    rows: usize,
    cols: usize,
    data: Vec<F::Vector>,
}

impl<F: Field> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: (0..rows).map(|_| F::zeros(cols)).collect() }
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: n, cols: n, data: (0..n).map(|i| F::unit(n, i)).collect() }
    }

    /// Matrix whose columns are the given vectors (each of length `rows`).
    pub fn from_columns(rows: usize, columns: &[F::Vector]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            for r in 0..rows {
                let x = F::get(col, r);
                if !x.is_zero() {
                    m.set(r, c, x);
                }
            }
        }
        m
    }

    pub fn from_rows(cols: usize, rows: Vec<F::Vector>) -> Self {
        debug_assert!(rows.iter().all(|r| F::len(r) == cols));
        Self { rows: rows.len(), cols, data: rows }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &F::Vector {
        &self.data[r]
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        F::get(&self.data[r], c)
    }

    pub fn set(&mut self, r: usize, c: usize, x: F) {
        F::set(&mut self.data[r], c, x);
    }

    pub fn column(&self, c: usize) -> F::Vector {
        let mut v = F::zeros(self.rows);
        for r in 0..self.rows {
            let x = self.get(r, c);
            if !x.is_zero() {
                F::set(&mut v, r, x);
            }
        }
        v
    }

    /// `self · other`
    pub fn mul(&self, other: &Mat<F>) -> Mat<F> {
        assert_eq!(self.cols, other.rows, "matrix shapes do not chain");
        let data = self
            .data
            .iter()
            .map(|row| {
                let mut out = F::zeros(other.cols);
                for k in 0..self.cols {
                    let a = F::get(row, k);
                    if !a.is_zero() {
                        F::axpy(&mut out, &a, &other.data[k]);
                    }
                }
                out
            })
            .collect();
        Mat { rows: self.rows, cols: other.cols, data }
    }

    /// `self · v` for a column vector `v`.
    pub fn apply(&self, v: &F::Vector) -> F::Vector {
        let mut out = F::zeros(self.rows);
        for (r, row) in self.data.iter().enumerate() {
            let mut acc = F::zero();
            for c in 0..self.cols {
                let a = F::get(row, c);
                if !a.is_zero() {
                    acc = acc.add(&a.mul(&F::get(v, c)));
                }
            }
            if !acc.is_zero() {
                F::set(&mut out, r, acc);
            }
        }
        out
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.data.clone();
        rref::<F>(&mut rows, self.cols).len()
    }

    /// Basis of `{x : self · x = 0}`.
    pub fn kernel(&self) -> Vec<F::Vector> {
        let mut rows = self.data.clone();
        let pivots = rref::<F>(&mut rows, self.cols);
        let mut is_pivot = vec![false; self.cols];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        (0..self.cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut x = F::unit(self.cols, free);
                for (r, &p) in pivots.iter().enumerate() {
                    let a = F::get(&rows[r], free);
                    if !a.is_zero() {
                        F::set(&mut x, p, a.neg());
                    }
                }
                x
            })
            .collect()
    }
}

/// Reduced row echelon form in place; returns pivot columns, one per nonzero
/// row, and truncates zero rows.
pub fn rref<F: Field>(rows: &mut Vec<F::Vector>, cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut next = 0;
    for c in 0..cols {
        let Some(found) = (next..rows.len()).find(|&r| !F::get(&rows[r], c).is_zero()) else {
            continue;
        };
        rows.swap(next, found);
        let inv = F::get(&rows[next], c).inv();
        F::scale(&mut rows[next], &inv);
        let pivot_row = rows[next].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next {
                let a = F::get(row, c);
                if !a.is_zero() {
                    F::axpy(row, &a.neg(), &pivot_row);
                }
            }
        }
        pivots.push(c);
        next += 1;
        if next == rows.len() {
            break;
        }
    }
    rows.truncate(next);
    pivots
}

/// Incrementally built basis of a subspace, remembering how each reduced
/// vector combines the accepted inputs.
#[derive(Clone, Debug)]
pub struct EchelonBasis<F: Field> {
    dim: usize,
    capacity: usize,
    /// `(pivot, reduced vector with 1 at pivot, combination of accepted inputs)`
    reduced: Vec<(usize, F::Vector, F::Vector)>,
}

impl<F: Field> EchelonBasis<F> {
    /// Basis of vectors of length `dim`, accepting at most `capacity` inputs.
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self { dim, capacity, reduced: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.reduced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reduced.is_empty()
    }

    fn reduce(&self, mut v: F::Vector) -> (F::Vector, F::Vector) {
        let mut combo = F::zeros(self.capacity);
        for (p, r, c) in &self.reduced {
            let a = F::get(&v, *p);
            if !a.is_zero() {
                let na = a.neg();
                F::axpy(&mut v, &na, r);
                F::axpy(&mut combo, &a, c);
            }
        }
        (v, combo)
    }

    /// Adds `v` if it is independent of the accepted inputs; returns whether it was.
    pub fn insert(&mut self, v: F::Vector) -> bool {
        debug_assert_eq!(F::len(&v), self.dim);
        let (rest, combo) = self.reduce(v);
        let Some(p) = F::first_nonzero(&rest) else {
            return false;
        };
        assert!(self.reduced.len() < self.capacity, "echelon basis capacity exceeded");
        // rest = v − combo·inputs, so v's coordinates are e_new + combo
        let mut coords = F::unit(self.capacity, self.reduced.len());
        F::axpy(&mut coords, &F::one().neg(), &combo);
        let inv = F::get(&rest, p).inv();
        let mut rest = rest;
        F::scale(&mut rest, &inv);
        F::scale(&mut coords, &inv);
        self.reduced.push((p, rest, coords));
        true
    }

    /// Coordinates of `v` in the accepted inputs, or `None` if outside the span.
    pub fn express(&self, v: &F::Vector) -> Option<F::Vector> {
        let (rest, combo) = self.reduce(v.clone());
        F::first_nonzero(&rest).is_none().then_some(combo)
    }
}

pub(crate) fn sign<F: Field>(odd: bool) -> F {
    if odd {
        F::one().neg()
    } else {
        F::one()
    }
}
