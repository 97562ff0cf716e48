//! Closed-form right-hand sides, lower-bound shapes and the dyadic chain
//! bounding `Sigma(L, T)` by point counts.

use serde::{Deserialize, Serialize};

use crate::cert::PhiSpec;
use crate::counting::{brute_count_m, CountQuery};
use crate::error::{Error, Result};
use crate::scalar::{clamped_log, geo_mean, MatrixL};

fn check_dims(m: usize, n: usize, t: &[f64]) -> Result<()> {
    if m == 0 || n == 0 || t.len() != n {
        return Err(Error::domain("need m, n >= 1 and one box side per column"));
    }
    Ok(())
}

/// `(1 + R)^{m+n-1} log(R^m/eps)^{m-1} [eps T^n + (eps T^n / phi(T))^{(m+n-1)/(m+n)}]`,
/// `T` the geometric mean of the box sides. Needs `R^m / eps >= e^m`.
pub fn rhs_main_theorem(m: usize, n: usize, eps: f64, r: f64, t: &[f64], phi: &PhiSpec) -> Result<f64> {
    check_dims(m, n, t)?;
    phi.validate()?;
    if !(eps > 0.0 && r > 0.0) {
        return Err(Error::domain("eps and R must be positive"));
    }
    let log_ratio = m as f64 * r.ln() - eps.ln();
    if log_ratio < m as f64 * (1.0 - 1e-12) {
        return Err(Error::precondition("bound needs R^m / eps >= e^m"));
    }
    let t_bar = geo_mean(t)?;
    let vol = eps * t_bar.powi(n as i32);
    let d = (m + n) as f64;
    Ok((1.0 + r).powi((m + n - 1) as i32)
        * log_ratio.powi(m as i32 - 1)
        * (vol + (vol / phi.eval(t_bar)).powf((d - 1.0) / d)))
}

/// `1 + R^{m+n-1} + eps T^n + (eps T^n / phi(T))^{(m+n-1)/(m+n)}`.
pub fn rhs_cube_bound(m: usize, n: usize, eps: f64, r: f64, t: &[f64], phi: &PhiSpec) -> Result<f64> {
    check_dims(m, n, t)?;
    let t_bar = geo_mean(t)?;
    let vol = eps * t_bar.powi(n as i32);
    let d = (m + n) as f64;
    Ok(1.0 + r.powi((m + n - 1) as i32) + vol + (vol / phi.eval(t_bar)).powf((d - 1.0) / d))
}

/// `T^n log(T/phi(T))^m + (T^n / phi(T)) log(T/phi(T))^{m-1}` with the
/// clamped logarithm. Needs `T >= 2`.
pub fn rhs_sigma_theorem(m: usize, n: usize, t: &[f64], phi: &PhiSpec) -> Result<f64> {
    check_dims(m, n, t)?;
    phi.validate()?;
    let t_bar = geo_mean(t)?;
    if t_bar < 2.0 {
        return Err(Error::precondition("bound needs geometric mean of T at least 2"));
    }
    let p = phi.eval(t_bar);
    let tn = t_bar.powi(n as i32);
    let lg = clamped_log(t_bar / p);
    Ok(tn * lg.powi(m as i32) + tn / p * lg.powi(m as i32 - 1))
}

/// Shapes of known lower bounds for the sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerBoundKind {
    /// `log T * prod log T_i` for the joint sum over a box.
    Bhv,
    /// `log(T)^{n+1}` for the dual sum.
    BhvDual,
    /// `T log(T)^{n+1}` for the dual sum without the `1/q` weight.
    Lv,
    /// `log(T)^2` for a single linear form.
    Kruse,
}

/// Evaluate a lower-bound shape; `t` holds the box sides (joint) or the
/// single bound `T`, `n` the number of `alpha` coordinates.
pub fn lower_bound(kind: LowerBoundKind, n: usize, t: &[f64]) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::domain("T is empty"));
    }
    match kind {
        LowerBoundKind::Bhv => {
            let t_bar = geo_mean(t)?;
            Ok(clamped_log(t_bar) * t.iter().map(|v| clamped_log(*v)).product::<f64>())
        }
        LowerBoundKind::BhvDual => Ok(clamped_log(t[0]).powi(n as i32 + 1)),
        LowerBoundKind::Lv => Ok(t[0] * clamped_log(t[0]).powi(n as i32 + 1)),
        LowerBoundKind::Kruse => Ok(clamped_log(t[0]).powi(2)),
    }
}

/// Value of the dyadic chain and its number of levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainValue {
    pub k_max: i64,
    pub value: f64,
}

/// `sum_{k=0}^{K} 2^{k+1} #M(L, 2^{-k}, 1/2, T)` with
/// `K = floor(log2(T^n / phi(T)))`; zero when `T^n / phi(T) < 1`.
///
/// Dominates `Sigma(L, T)` whenever `phi` is certified on the box.
pub fn dyadic_sigma_chain(l: &MatrixL, t: &[f64], phi: &PhiSpec) -> Result<ChainValue> {
    check_dims(l.rows(), l.cols(), t)?;
    phi.validate()?;
    let t_bar = geo_mean(t)?;
    let ratio = t_bar.powi(l.cols() as i32) / phi.eval(t_bar);
    if ratio < 1.0 {
        return Ok(ChainValue { k_max: -1, value: 0.0 });
    }
    let k_max = ratio.log2().floor() as i64;
    let mut value = 0.0;
    for k in 0..=k_max {
        let q = CountQuery::new(l.clone(), 2f64.powi(-k as i32), 0.5, t.to_vec())?;
        value += 2f64.powi(k as i32 + 1) * brute_count_m(&q)?.count as f64;
    }
    Ok(ChainValue { k_max, value })
}

/// `lhs / rhs`, or `None` when `rhs` is not positive.
pub fn empirical_ratio(lhs: f64, rhs: f64) -> Option<f64> {
    (rhs > 0.0).then(|| lhs / rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::sum_sigma;
    use std::f64::consts::E;

    #[test]
    fn main_theorem_examples() {
        let phi = PhiSpec::Constant { c: 0.2 };
        let v = rhs_main_theorem(1, 1, 0.1, 0.5, &[10.0], &phi).unwrap();
        assert!((v - 1.5 * (1.0 + 5f64.sqrt())).abs() < 1e-9);
        assert!((v - 4.854102).abs() < 1e-6);
        assert!(matches!(rhs_main_theorem(1, 1, 0.2, 0.5, &[10.0], &phi), Err(Error::Precondition(_))));
        for (m, n) in [(1, 1), (2, 1), (1, 3), (3, 2)] {
            let t = vec![1.0; n];
            let v = rhs_main_theorem(m, n, 1.0, E, &t, &PhiSpec::Constant { c: 1.0 }).unwrap();
            let want = (1.0 + E).powi((m + n - 1) as i32) * (m as f64).powi(m as i32 - 1) * 2.0;
            assert!((v - want).abs() < 1e-9 * want);
        }
    }

    #[test]
    fn sigma_theorem_example() {
        let v = rhs_sigma_theorem(1, 1, &[E * E], &PhiSpec::Constant { c: 0.5 }).unwrap();
        let want = E * E * (2.0 + 2f64.ln()) + 2.0 * E * E;
        assert!((v - want).abs() < 1e-9);
        assert!((v - 34.677).abs() < 1e-3);
        assert!(rhs_sigma_theorem(1, 1, &[1.5], &PhiSpec::Constant { c: 0.5 }).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let v = lower_bound(LowerBoundKind::Bhv, 2, &[E * E, E.powi(3)]).unwrap();
        assert!((v - 15.0).abs() < 1e-9);
        assert!((lower_bound(LowerBoundKind::Kruse, 1, &[E * E]).unwrap() - 4.0).abs() < 1e-9);
        let lv = lower_bound(LowerBoundKind::Lv, 1, &[E * E]).unwrap();
        assert!((lv - 4.0 * E * E).abs() < 1e-9);
        assert!((lv - 29.556).abs() < 1e-3);
    }

    #[test]
    fn chain_dominates_sigma() {
        let l = MatrixL::row(&[1.6180339887]).unwrap();
        let phi = PhiSpec::Constant { c: 0.38 };
        let chain = dyadic_sigma_chain(&l, &[10.0], &phi).unwrap();
        assert_eq!(chain.k_max, 4);
        assert!(chain.value >= sum_sigma(&l, &[10.0]).unwrap());
        assert_eq!(empirical_ratio(1.0, 0.0), None);
    }
}
