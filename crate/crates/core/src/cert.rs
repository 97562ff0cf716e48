//! Finite-range certificates for multiplicative badly approximable matrices
//! and estimates of the best constant.

use serde::{Deserialize, Serialize};

use crate::counting::SumMode;
use crate::error::{Error, Result};
use crate::par::{for_each_point, map_range};
use crate::scalar::{check_budget, clamp_plus, clamped_log, frac_dist, MatrixL, DEFAULT_BUDGET};

/// A positive nonincreasing function on `[1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiSpec {
    /// `phi(x) = c`.
    Constant { c: f64 },
    /// `phi(x) = c * log(x)^{-p}` with the clamped logarithm.
    LogPower { c: f64, p: f64 },
}

impl PhiSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PhiSpec::Constant { c } => c,
            PhiSpec::LogPower { c, p } => c * clamped_log(x).powf(-p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PhiSpec::Constant { c } => c > 0.0 && c.is_finite(),
            PhiSpec::LogPower { c, p } => c > 0.0 && c.is_finite() && p >= 0.0 && p.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain("phi needs c > 0 and p >= 0"))
        }
    }

    /// Parse `const:C` or `log:C:P`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| Error::config(format!("bad phi {s}")));
        let phi = match parts.as_slice() {
            ["const", c] => PhiSpec::Constant { c: num(c)? },
            ["log", c, p] => PhiSpec::LogPower { c: num(c)?, p: num(p)? },
            _ => return Err(Error::config(format!("phi must be const:C or log:C:P, got {s}"))),
        };
        phi.validate()?;
        Ok(phi)
    }
}

/// Outcome of scanning `0 < max |q_j| <= qmax`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub holds: bool,
    pub qmax: u64,
    /// `q` attaining the smallest ratio (first in scan order on ties).
    pub worst_q: Vec<i64>,
    pub worst_ratio: f64,
    pub message: String,
}

/// Smallest value of `f(prod |q_j|^+, prod_i ||L_i q||, q)` over
/// `0 < max |q_j| <= qmax`, scanning one of each pair `q, -q`.
fn scan_min(
    l: &MatrixL,
    qmax: u64,
    f: impl Fn(f64, f64, &[i64]) -> f64 + Sync + Send,
) -> Result<(f64, Vec<i64>)> {
    let n = l.cols();
    let m = l.rows();
    let q = qmax as i64;
    let t = vec![qmax as f64; n];
    // Half the box is scanned, so allow twice the usual budget.
    check_budget(&t, 2 * DEFAULT_BUDGET)?;
    let parts = map_range(0, q, |lead| {
        let mut best = (f64::INFINITY, Vec::new());
        let mut qq = vec![0i64; n];
        qq[0] = lead;
        let lo = vec![-q; n - 1];
        let hi = vec![q; n - 1];
        for_each_point(&lo, &hi, |rest| {
            // Keep q whose first nonzero coordinate is positive.
            if lead == 0 && rest.iter().find(|&&v| v != 0).map_or(true, |&v| v < 0) {
                return;
            }
            qq[1..].copy_from_slice(rest);
            let w: f64 = qq.iter().map(|&k| clamp_plus(k.abs() as f64)).product();
            let mut prod = 1.0;
            for i in 0..m {
                let d = match l.row_frac_dist_exact(i, &qq) {
                    Some(ex) if num_traits::Zero::is_zero(&ex) => 0.0,
                    _ => frac_dist(l.row_dot(i, &qq)),
                };
                prod *= d;
            }
            let v = f(w, prod, &qq);
            if v < best.0 {
                best = (v, qq.clone());
            }
        });
        best
    });
    let mut best = (f64::INFINITY, Vec::new());
    for p in parts {
        if p.0 < best.0 {
            best = p;
        }
    }
    if best.1.is_empty() {
        return Err(Error::domain("qmax must be at least 1"));
    }
    Ok(best)
}

/// Check `prod |q_j|^+ prod_i ||L_i q|| >= phi((prod |q_j|^+)^{1/n})` for
/// every `q` with `0 < max |q_j| <= qmax`.
pub fn certify_phi(l: &MatrixL, phi: &PhiSpec, qmax: u64) -> Result<CertReport> {
    phi.validate()?;
    let n = l.cols() as f64;
    let (ratio, q) = scan_min(l, qmax, |w, prod, _| w * prod / phi.eval(w.powf(1.0 / n)))?;
    let holds = ratio >= 1.0;
    let message = if holds {
        format!("certified up to Qmax = {qmax}; worst ratio {ratio:.6} at q = {q:?}")
    } else {
        format!("fails at q = {q:?} with ratio {ratio:.6}; scanned up to Qmax = {qmax}")
    };
    Ok(CertReport {
        holds,
        qmax,
        worst_q: q,
        worst_ratio: ratio,
        message,
    })
}

/// Smallest `prod |q_j|^+ prod_i ||L_i q|| * log(prod |q_j|^+)^p` over the
/// scanned range, with its minimiser.
pub fn min_weighted_product(l: &MatrixL, p: f64, qmax: u64) -> Result<(f64, Vec<i64>)> {
    scan_min(l, qmax, |w, prod, _| w * prod * clamped_log(w).powf(p))
}

/// Estimate of the constant `c(alpha)`:
/// joint `min prod q_i^+ ||q . alpha|| log(prod q_i^+)^{n + eps0}` over the box,
/// dual `min q prod ||q alpha_i|| log(q)^{n + eps0}` over `1..=qmax`.
pub fn estimate_c_alpha(alpha: &[f64], eps0: f64, qmax: u64, mode: SumMode) -> Result<(f64, Vec<i64>)> {
    if alpha.is_empty() {
        return Err(Error::domain("alpha is empty"));
    }
    let l = match mode {
        SumMode::Joint => MatrixL::row(alpha)?,
        SumMode::Dual => MatrixL::column(alpha)?,
    };
    min_weighted_product(&l, alpha.len() as f64 + eps0, qmax)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PHI0: f64 = 1.6180339887;

    #[test]
    fn golden_certificates() {
        let l = MatrixL::row(&[PHI0]).unwrap();
        let rep = certify_phi(&l, &PhiSpec::Constant { c: 0.3 }, 10_000).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.worst_q, vec![1]);
        assert!((rep.worst_ratio - 1.2732).abs() < 1e-4);
        assert!(rep.message.contains("certified up to Qmax"));
        let rep = certify_phi(&l, &PhiSpec::Constant { c: 0.4 }, 10_000).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.worst_q, vec![1]);
    }

    #[test]
    fn rational_entry_fails_with_zero_ratio() {
        let l = MatrixL::parse("1/2").unwrap();
        let rep = certify_phi(&l, &PhiSpec::Constant { c: 0.1 }, 100).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.worst_q, vec![2]);
        assert_eq!(rep.worst_ratio, 0.0);
        let rep = certify_phi(&MatrixL::row(&[0.5]).unwrap(), &PhiSpec::Constant { c: 0.1 }, 100).unwrap();
        assert_eq!((rep.worst_q.clone(), rep.worst_ratio), (vec![2], 0.0));
    }

    #[test]
    fn golden_constant_estimate() {
        let (c, q) = estimate_c_alpha(&[PHI0], 0.1, 100, SumMode::Joint).unwrap();
        assert!((c - 0.381966).abs() < 1e-6);
        assert_eq!(q, vec![1]);
    }

    #[test]
    fn constant_certificate_matches_minimum() {
        let l = MatrixL::row(&[2f64.sqrt(), 3f64.sqrt()]).unwrap();
        let (min, _) = min_weighted_product(&l, 0.0, 40).unwrap();
        for c in [min * 0.999, min * 1.001] {
            let rep = certify_phi(&l, &PhiSpec::Constant { c }, 40).unwrap();
            assert_eq!(rep.holds, c <= min);
        }
    }

    #[test]
    fn symmetric_scan_agrees_with_full_scan() {
        let l = MatrixL::row(&[0.3183, 0.5772]).unwrap();
        let (min, _) = min_weighted_product(&l, 0.0, 12).unwrap();
        let mut full = f64::INFINITY;
        for a in -12i64..=12 {
            for b in -12i64..=12 {
                if (a, b) == (0, 0) {
                    continue;
                }
                let w = (a.abs().max(1) * b.abs().max(1)) as f64;
                full = full.min(w * frac_dist(0.3183 * a as f64 + 0.5772 * b as f64));
            }
        }
        assert_eq!(min, full);
    }

    #[test]
    fn phi_parsing() {
        assert_eq!(PhiSpec::parse("const:0.38").unwrap(), PhiSpec::Constant { c: 0.38 });
        assert_eq!(PhiSpec::parse("log:1:2").unwrap(), PhiSpec::LogPower { c: 1.0, p: 2.0 });
        assert!(PhiSpec::parse("const:-1").is_err());
        assert!(PhiSpec::parse("foo").is_err());
    }
}
