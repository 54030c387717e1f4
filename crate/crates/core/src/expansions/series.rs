//! Truncated power series in `eps` with an explicit validity order.
//!
//! An `EpsSeries<T>` with coefficients `a_0, ..., a_m` stands for
//! `a_0 + a_1 eps + ... + a_m eps^m + o(eps^m)`. Binary operations keep the
//! smaller of the two orders, so a result never claims more terms than both
//! operands justify. The coefficient type is a scalar, matrix or vector.

use std::ops::{AddAssign, Mul, Sub};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSeries<T> {
    coeffs: Vec<T>,
}

impl<T> EpsSeries<T> {
    /// Series of order `coeffs.len() - 1`.
    ///
    /// # Panics
    /// If `coeffs` is empty.
    pub fn new(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least the eps^0 coefficient");
        Self { coeffs }
    }

    pub fn from_fn(order: usize, f: impl FnMut(usize) -> T) -> Self {
        Self::new((0..=order).map(f).collect())
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> &T {
        &self.coeffs[n]
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn truncated(mut self, order: usize) -> Self {
        self.coeffs.truncate(order + 1);
        self
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> EpsSeries<U> {
        EpsSeries::new(self.coeffs.iter().map(f).collect())
    }

    /// Truncated Cauchy product, of order `min(self.order, other.order)`.
    pub fn mul_series<U, V>(&self, other: &EpsSeries<U>) -> EpsSeries<V>
    where
        for<'a> &'a T: Mul<&'a U, Output = V>,
        V: AddAssign,
    {
        let order = self.order().min(other.order());
        EpsSeries::from_fn(order, |n| {
            let mut acc = &self.coeffs[0] * &other.coeffs[n];
            for q in 1..=n {
                acc += &self.coeffs[q] * &other.coeffs[n - q];
            }
            acc
        })
    }
}

impl<T: Clone + AddAssign> EpsSeries<T> {
    pub fn add_series(&self, other: &EpsSeries<T>) -> EpsSeries<T> {
        let order = self.order().min(other.order());
        EpsSeries::from_fn(order, |n| {
            let mut c = self.coeffs[n].clone();
            c += other.coeffs[n].clone();
            c
        })
    }
}

impl<T> EpsSeries<T>
where
    for<'a> &'a T: Sub<&'a T, Output = T>,
{
    pub fn sub_series(&self, other: &EpsSeries<T>) -> EpsSeries<T> {
        let order = self.order().min(other.order());
        EpsSeries::from_fn(order, |n| &self.coeffs[n] - &other.coeffs[n])
    }
}

impl<T> EpsSeries<T>
where
    T: Clone + AddAssign + Mul<f64, Output = T>,
{
    /// The polynomial part evaluated at `eps`.
    pub fn eval(&self, eps: f64) -> T {
        let mut iter = self.coeffs.iter().rev();
        let mut acc = iter.next().expect("non-empty").clone();
        for c in iter {
            acc = acc * eps;
            acc += c.clone();
        }
        acc
    }

    pub fn scaled(&self, factor: f64) -> EpsSeries<T> {
        self.map(|c| c.clone() * factor)
    }
}
