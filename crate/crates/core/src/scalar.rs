//! Floating point abstraction and the log-domain helpers shared by every module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the numerical core is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log(sum(exp(x)))` over the iterator; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<T: Scalar, I>(values: I) -> T
where
    I: IntoIterator<Item = T>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter
        .clone()
        .fold(T::neg_infinity(), |m, x| if x > m { x } else { m });
    if max == T::neg_infinity() {
        return max;
    }
    if max == T::infinity() {
        return max;
    }
    let mut acc = NeumaierSum::new();
    for x in iter {
        acc.add((x - max).exp());
    }
    max + acc.value().ln()
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp<T: Scalar>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Compensated (Kahan–Babuška–Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> NeumaierSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation = self.compensation + ((self.sum - t) + x);
        } else {
            self.compensation = self.compensation + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.compensation
    }
}

/// Compensated sum of an iterator.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut acc = NeumaierSum::new();
    for x in values {
        acc.add(x);
    }
    acc.value()
}

/// Least-squares slope of `ys` against `0..ys.len()`.
pub fn ls_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    sxy / sxx
}
