//! Scalar primitives: distance to the nearest integer, clamped logarithm,
//! geometric mean, compensated summation and a float/exact-rational scalar.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to flag comparisons that land on a boundary.
pub const ETA_CMP: f64 = 1e-12;

/// Distance from `x` to the nearest integer, in `[0, 1/2]`.
///
/// Ties round half to even, which does not change the distance.
pub fn nearest_int_distance(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("non-finite input {x}")));
    }
    Ok(frac_dist(x))
}

/// Unchecked variant of [`nearest_int_distance`] for hot loops.
#[inline]
pub fn frac_dist(x: f64) -> f64 {
    (x - x.round_ties_even()).abs()
}

/// `max(1, x)`.
#[inline]
pub fn clamp_plus(x: f64) -> f64 {
    if x > 1.0 {
        x
    } else {
        1.0
    }
}

/// `ln(max(x, e))`, always at least 1.
#[inline]
pub fn clamped_log(x: f64) -> f64 {
    if x > std::f64::consts::E {
        x.ln()
    } else {
        1.0
    }
}

/// Geometric mean of a nonempty sequence of values, each at least 1.
pub fn geo_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("geometric mean of an empty sequence"));
    }
    if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 1.0)) {
        return Err(Error::domain(format!("box side {bad} is below 1")));
    }
    let n = values.len() as f64;
    let prod: f64 = values.iter().product();
    if prod.is_finite() {
        Ok(prod.powf(1.0 / n))
    } else {
        Ok((values.iter().map(|v| v.ln()).sum::<f64>() / n).exp())
    }
}

/// True when `a` and `b` agree to within [`ETA_CMP`] relative to their size.
#[inline]
pub fn near_boundary(a: f64, b: f64) -> bool {
    (a - b).abs() <= ETA_CMP * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Fold another partial sum into this one.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// A real number carried either as a float or as an exact rational.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Float(f64),
    Exact(BigRational),
}

impl Scalar {
    pub fn ratio(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::domain("zero denominator"));
        }
        Ok(Scalar::Exact(BigRational::new(num.into(), den.into())))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Float(x) => *x,
            Scalar::Exact(r) => rational_to_f64(r),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    /// Distance to the nearest integer; exact when the scalar is exact.
    pub fn nearest_int_distance(&self) -> Result<Scalar> {
        match self {
            Scalar::Float(x) => nearest_int_distance(*x).map(Scalar::Float),
            Scalar::Exact(r) => Ok(Scalar::Exact(exact_frac_dist(r))),
        }
    }

    pub fn clamp_plus(&self) -> Scalar {
        match self {
            Scalar::Float(x) => Scalar::Float(clamp_plus(*x)),
            Scalar::Exact(r) => {
                if *r > BigRational::one() {
                    Scalar::Exact(r.clone())
                } else {
                    Scalar::Exact(BigRational::one())
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Float(x) => *x == 0.0,
            Scalar::Exact(r) => r.is_zero(),
        }
    }

    fn binary(
        &self,
        rhs: &Scalar,
        f: impl Fn(f64, f64) -> f64,
        g: impl Fn(&BigRational, &BigRational) -> BigRational,
    ) -> Scalar {
        match (self, rhs) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(g(a, b)),
            _ => Scalar::Float(f(self.to_f64(), rhs.to_f64())),
        }
    }

    /// Parse `"p/q"` and integers as exact rationals, anything else as a float.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p: BigInt = p
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad rational {s}")))?;
            let q: BigInt = q
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad rational {s}")))?;
            if q.is_zero() {
                return Err(Error::domain("zero denominator"));
            }
            return Ok(Scalar::Exact(BigRational::new(p, q)));
        }
        if let Ok(k) = s.parse::<i64>() {
            return Ok(Scalar::from(k));
        }
        s.parse::<f64>()
            .map(Scalar::Float)
            .map_err(|_| Error::config(format!("bad number {s}")))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Float(x) => write!(f, "{x}"),
            Scalar::Exact(r) => write!(f, "{r}"),
        }
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Float(x)
    }
}

impl From<i64> for Scalar {
    fn from(x: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(x.into()))
    }
}

impl Add for &Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        self.binary(rhs, |a, b| a + b, |a, b| a + b)
    }
}

impl Sub for &Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        self.binary(rhs, |a, b| a - b, |a, b| a - b)
    }
}

impl Mul for &Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        self.binary(rhs, |a, b| a * b, |a, b| a * b)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Float(x) => Scalar::Float(-x),
            Scalar::Exact(r) => Scalar::Exact(-r),
        }
    }
}

/// Exact `||r||` for a rational `r`.
pub fn exact_frac_dist(r: &BigRational) -> BigRational {
    let fl = r.floor();
    let up = &fl + BigRational::one();
    let d1 = r - &fl;
    let d2 = &up - r;
    if d1 <= d2 {
        d1.abs()
    } else {
        d2.abs()
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Real `m x n` matrix, rows indexed by `i`, columns by `j`.
///
/// Floats are cached for the hot loops; exact entries are kept so that
/// rational rows can be tested for exact vanishing.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixL {
    rows: usize,
    cols: usize,
    entries: Vec<Scalar>,
    floats: Vec<f64>,
}

impl MatrixL {
    pub fn new(rows: usize, cols: usize, entries: Vec<Scalar>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::domain("matrix needs at least one row and column"));
        }
        if entries.len() != rows * cols {
            return Err(Error::domain(format!(
                "expected {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        let floats: Vec<f64> = entries.iter().map(Scalar::to_f64).collect();
        if floats.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("non-finite matrix entry"));
        }
        Ok(Self {
            rows,
            cols,
            entries,
            floats,
        })
    }

    pub fn from_f64_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::domain("ragged matrix rows"));
        }
        let entries = rows.iter().flatten().map(|&x| Scalar::Float(x)).collect();
        Self::new(m, n, entries)
    }

    /// A single row `(a_1, ..., a_n)`, i.e. the form `q -> a . q`.
    pub fn row(alpha: &[f64]) -> Result<Self> {
        Self::from_f64_rows(&[alpha.to_vec()])
    }

    /// A single column, i.e. the simultaneous problem `q -> (a_i q)`.
    pub fn column(alpha: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = alpha.iter().map(|&a| vec![a]).collect();
        Self::from_f64_rows(&rows)
    }

    /// Parse rows separated by `;` and entries by `,`; `p/q` entries are exact.
    pub fn parse(s: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        for row in s.split(';').filter(|r| !r.trim().is_empty()) {
            let parsed: Vec<Scalar> = row
                .split(',')
                .map(Scalar::parse)
                .collect::<Result<_>>()?;
            match cols {
                None => cols = Some(parsed.len()),
                Some(c) if c != parsed.len() => {
                    return Err(Error::config("ragged matrix rows"))
                }
                _ => {}
            }
            entries.extend(parsed);
            rows += 1;
        }
        Self::new(rows, cols.unwrap_or(0), entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.floats[i * self.cols + j]
    }

    pub fn entry(&self, i: usize, j: usize) -> &Scalar {
        &self.entries[i * self.cols + j]
    }

    pub fn row_is_exact(&self, i: usize) -> bool {
        (0..self.cols).all(|j| self.entry(i, j).is_exact())
    }

    /// `L_i . q` in floating point.
    #[inline]
    pub fn row_dot(&self, i: usize, q: &[i64]) -> f64 {
        let row = &self.floats[i * self.cols..(i + 1) * self.cols];
        row.iter().zip(q).map(|(a, &k)| a * k as f64).sum()
    }

    /// Exact `||L_i . q||` when row `i` is exact.
    pub fn row_frac_dist_exact(&self, i: usize, q: &[i64]) -> Option<BigRational> {
        if !self.row_is_exact(i) {
            return None;
        }
        let mut acc = BigRational::zero();
        for (j, &k) in q.iter().enumerate() {
            if let Scalar::Exact(r) = self.entry(i, j) {
                acc += r * BigRational::from_integer(k.into());
            }
        }
        Some(exact_frac_dist(&acc))
    }

    pub fn transpose(&self) -> MatrixL {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.entry(i, j).clone());
            }
        }
        MatrixL::new(self.cols, self.rows, entries).expect("transpose keeps shape valid")
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

impl Serialize for MatrixL {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_f64_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for MatrixL {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        MatrixL::from_f64_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Number of integer points `q` with `|q_j| <= t_j`, saturating at `u128::MAX`.
pub fn box_volume(t: &[f64]) -> u128 {
    t.iter()
        .map(|&tj| 2 * (tj.floor().max(0.0) as u128) + 1)
        .fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// Default work budget for enumerations over `prod (2 T_j + 1)` points.
pub const DEFAULT_BUDGET: u128 = 1_000_000_000;

/// Refuse enumerations whose box exceeds `budget` points.
pub fn check_budget(t: &[f64], budget: u128) -> Result<()> {
    let vol = box_volume(t);
    if vol > budget {
        let pieces = vol.div_ceil(budget);
        return Err(Error::capability(format!(
            "enumeration of {vol} points exceeds budget {budget}; split the leading range into at least {pieces} pieces"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(nearest_int_distance(0.5).unwrap(), 0.5);
        assert!((nearest_int_distance(1.25).unwrap() - 0.25).abs() < 1e-15);
        assert!((nearest_int_distance(-2.7).unwrap() - 0.3).abs() < 1e-12);
        assert!(nearest_int_distance(f64::NAN).is_err());
        assert!(nearest_int_distance(f64::INFINITY).is_err());
    }

    #[test]
    fn log_and_plus() {
        assert_eq!(clamped_log(1.0), 1.0);
        assert!((clamped_log(std::f64::consts::E.powi(2)) - 2.0).abs() < 1e-12);
        assert_eq!(clamped_log(0.0), 1.0);
        assert_eq!(clamp_plus(0.3), 1.0);
        assert_eq!(clamp_plus(7.0), 7.0);
    }

    #[test]
    fn geometric_mean() {
        assert!((geo_mean(&[2.0, 8.0]).unwrap() - 4.0).abs() < 1e-12);
        assert!(geo_mean(&[]).is_err());
        assert!(geo_mean(&[0.5, 3.0]).is_err());
        let big = vec![1e300, 1e300, 1e300];
        assert!((geo_mean(&big).unwrap() / 1e300 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_scalar_distance() {
        let half = Scalar::ratio(1, 2).unwrap();
        let d = half.nearest_int_distance().unwrap();
        assert_eq!(d, Scalar::ratio(1, 2).unwrap());
        let two = &half * &Scalar::from(4);
        assert!(two.nearest_int_distance().unwrap().is_zero());
        assert!(Scalar::ratio(1, 0).is_err());
    }

    #[test]
    fn matrix_parse_and_exact_rows() {
        let l = MatrixL::parse("1/2, 0.25; 3, 1/3").unwrap();
        assert_eq!((l.rows(), l.cols()), (2, 2));
        assert!(!l.row_is_exact(0));
        assert!(l.row_is_exact(1));
        let d = l.row_frac_dist_exact(1, &[1, 3]).unwrap();
        assert!(d.is_zero());
        assert!(MatrixL::parse("1,2;3").is_err());
        let t = l.transpose();
        assert_eq!(t.get(0, 1), 3.0);
    }

    #[test]
    fn budget_guard() {
        assert!(check_budget(&[10.0, 10.0], DEFAULT_BUDGET).is_ok());
        let err = check_budget(&[1e5, 1e5], DEFAULT_BUDGET).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    proptest! {
        #[test]
        fn distance_is_periodic_and_even(x in -1e6f64..1e6, k in -1000i64..1000) {
            let d = nearest_int_distance(x).unwrap();
            prop_assert!((0.0..=0.5).contains(&d));
            let shifted = nearest_int_distance(x + k as f64).unwrap();
            prop_assert!((d - shifted).abs() <= 1e-9);
            prop_assert!((d - nearest_int_distance(-x).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn geo_mean_scales(v in proptest::collection::vec(1.0f64..1e4, 1..6), c in 1.0f64..100.0) {
            let g = geo_mean(&v).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let gs = geo_mean(&scaled).unwrap();
            prop_assert!((gs - c * g).abs() <= 1e-12 * gs.max(1.0) * 10.0);
        }

        #[test]
        fn exact_path_matches_float(p in -10_000i64..10_000, q in 1i64..1000, r in -100i64..100) {
            let a = Scalar::ratio(p, q).unwrap();
            let b = Scalar::from(r);
            let exact = (&(&a * &b) + &a).nearest_int_distance().unwrap().to_f64();
            let fa = p as f64 / q as f64;
            let float = nearest_int_distance(fa * r as f64 + fa).unwrap();
            prop_assert!((exact - float).abs() <= 1e-10);
        }
    }
}
