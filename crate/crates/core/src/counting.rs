//! Lattice point counts in `Z = H1 x prod [-T_j, T_j]` and the multiplicative
//! sums built from distances to the nearest integer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{assemble_lattice, for_each_in_box_triangular, Orientation};
use crate::par::{for_each_point, map_chunks, map_range};
use crate::scalar::{
    check_budget, clamp_plus, clamped_log, frac_dist, CompensatedSum, MatrixL, DEFAULT_BUDGET,
    ETA_CMP,
};
use crate::tess::{partition_h1, StarBodyH1};

/// Terms whose denominator falls below this are reported as singular.
pub const SINGULAR_TOL: f64 = 1e-15;

/// Chunk length used when splitting one-dimensional ranges.
const CHUNK: i64 = 4096;

/// `#M(L, eps, R, T)`: points `(L q + p, q)` with `q != 0`, `|q_j| <= T_j`,
/// `|L_i q + p_i| <= R` and `prod_i |L_i q + p_i| < eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountQuery {
    pub l: MatrixL,
    pub eps: f64,
    pub r: f64,
    pub t: Vec<f64>,
}

impl CountQuery {
    pub fn new(l: MatrixL, eps: f64, r: f64, t: Vec<f64>) -> Result<Self> {
        if l.cols() != t.len() {
            return Err(Error::domain(format!(
                "matrix has {} columns but T has {} entries",
                l.cols(),
                t.len()
            )));
        }
        if !(eps > 0.0 && eps.is_finite()) || !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain("eps and R must be positive and finite"));
        }
        if t.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::domain("box sides must be finite and nonnegative"));
        }
        Ok(Self { l, eps, r, t })
    }

    fn limits(&self) -> Vec<i64> {
        self.t.iter().map(|v| v.floor() as i64).collect()
    }

    /// Number of admissible `p` tuples for a fixed `q`, plus a boundary flag.
    fn count_fibre(&self, q: &[i64], vals: &mut Vec<Vec<f64>>) -> (u64, bool) {
        let m = self.l.rows();
        let mut boundary = false;
        for (i, row) in vals.iter_mut().enumerate().take(m) {
            row.clear();
            let x = self.l.row_dot(i, q);
            let lo = (-self.r - x).ceil() as i64 - 1;
            let hi = (self.r - x).floor() as i64 + 1;
            for p in lo..=hi {
                let v = (x + p as f64).abs();
                if v <= self.r {
                    if self.r - v <= ETA_CMP * self.r {
                        boundary = true;
                    }
                    row.push(v);
                }
            }
        }
        let mut count = 0u64;
        fibre_products(vals, 0, 1.0, self.eps, &mut count, &mut boundary);
        (count, boundary)
    }
}

fn fibre_products(vals: &[Vec<f64>], i: usize, acc: f64, eps: f64, count: &mut u64, boundary: &mut bool) {
    if i == vals.len() {
        if (acc - eps).abs() <= ETA_CMP * eps {
            *boundary = true;
        }
        if acc < eps {
            *count += 1;
        }
        return;
    }
    for v in &vals[i] {
        fibre_products(vals, i + 1, acc * v, eps, count, boundary);
    }
}

/// A count with a flag raised when some point sat within `ETA_CMP` of a
/// boundary of the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountResult {
    pub count: u64,
    pub boundary_sensitive: bool,
}

impl CountResult {
    fn merge(self, other: CountResult) -> CountResult {
        CountResult {
            count: self.count + other.count,
            boundary_sensitive: self.boundary_sensitive || other.boundary_sensitive,
        }
    }

    const ZERO: CountResult = CountResult {
        count: 0,
        boundary_sensitive: false,
    };
}

/// `#M` by direct enumeration of every `q` in the box.
pub fn brute_count_m(query: &CountQuery) -> Result<CountResult> {
    brute_count_m_budget(query, DEFAULT_BUDGET)
}

/// [`brute_count_m`] with an explicit budget on `prod (2 T_j + 1)`.
pub fn brute_count_m_budget(query: &CountQuery, budget: u128) -> Result<CountResult> {
    check_budget(&query.t, budget)?;
    let lim = query.limits();
    let n = lim.len();
    let m = query.l.rows();
    let parts = map_range(-lim[0], lim[0], |lead| {
        let mut vals = vec![Vec::new(); m];
        let mut acc = CountResult::ZERO;
        let lo: Vec<i64> = (1..n).map(|j| -lim[j]).collect();
        let mut q = vec![0i64; n];
        q[0] = lead;
        for_each_point(&lo, &lim[1..], |rest| {
            q[1..].copy_from_slice(rest);
            if q.iter().all(|&x| x == 0) {
                return;
            }
            let (c, b) = query.count_fibre(&q, &mut vals);
            acc.count += c;
            acc.boundary_sensitive |= b;
        });
        acc
    });
    Ok(parts.into_iter().fold(CountResult::ZERO, CountResult::merge))
}

/// `#M` through the partition of H1: every tile's rescaled lattice is
/// enumerated in the image cube, points are pulled back and kept when the
/// tile claims them. Points with a vanishing `x` coordinate are counted
/// separately.
///
/// Needs the partition precondition `R^m / eps > e^m`.
pub fn tile_count_m(query: &CountQuery) -> Result<CountResult> {
    check_budget(&query.t, DEFAULT_BUDGET)?;
    let m = query.l.rows();
    let n = query.l.cols();
    let body = StarBodyH1::new(m, query.eps, query.r)?;
    let part = partition_h1(&body)?;
    let base = assemble_lattice(&query.l, Orientation::Upper);
    let hw = part.image_half_width() * (1.0 + 1e-9);
    let mut lo = vec![-hw; m];
    let mut hi = vec![hw; m];
    lo.extend(query.t.iter().map(|t| -t.floor()));
    hi.extend(query.t.iter().map(|t| t.floor()));
    let per_tile = map_range(0, part.tiles.len() as i64 - 1, |k| -> Result<CountResult> {
        let tile = &part.tiles[k as usize];
        let mut exps = tile.map.exponents.clone();
        exps.extend(std::iter::repeat(0.0).take(n));
        let scaled = base.scale_coordinates(&exps);
        let mut acc = CountResult::ZERO;
        let mut x = vec![0.0; m];
        for_each_in_box_triangular(&scaled, &lo, &hi, |c| {
            let q = &c[m..];
            if q.iter().all(|&v| v == 0) {
                return;
            }
            for i in 0..m {
                x[i] = query.l.row_dot(i, q) + c[i] as f64;
            }
            if part.claims(k as usize, &x) {
                acc.count += 1;
                let prod: f64 = x.iter().map(|v| v.abs()).product();
                if (prod - query.eps).abs() <= ETA_CMP * query.eps
                    || x.iter().any(|v| (query.r - v.abs()).abs() <= ETA_CMP * query.r)
                {
                    acc.boundary_sensitive = true;
                }
            }
        })?;
        Ok(acc)
    });
    let mut total = CountResult::ZERO;
    for r in per_tile {
        total = total.merge(r?);
    }
    Ok(total.merge(slice_count(query)))
}

/// Points of `M` with some `L_i q + p_i` exactly zero. These only occur for
/// `q` making a row integral, which is checked exactly on exact rows.
fn slice_count(query: &CountQuery) -> CountResult {
    let lim = query.limits();
    let m = query.l.rows();
    let n = lim.len();
    let lo: Vec<i64> = lim.iter().map(|v| -v).collect();
    let mut total = CountResult::ZERO;
    let mut q_buf = vec![0i64; n];
    for_each_point(&lo, &lim, |q| {
        if q.iter().all(|&v| v == 0) {
            return;
        }
        q_buf.copy_from_slice(q);
        let integral: Vec<bool> = (0..m)
            .map(|i| match query.l.row_frac_dist_exact(i, q) {
                Some(d) => num_traits::Zero::is_zero(&d),
                None => {
                    let x = query.l.row_dot(i, q);
                    x == x.round()
                }
            })
            .collect();
        if !integral.iter().any(|&b| b) {
            return;
        }
        // Enumerate the p tuples with at least one zero coordinate.
        let mut options: Vec<Vec<f64>> = Vec::with_capacity(m);
        for i in 0..m {
            let x = query.l.row_dot(i, &q_buf);
            let mut row = Vec::new();
            let lo_p = (-query.r - x).ceil() as i64 - 1;
            let hi_p = (query.r - x).floor() as i64 + 1;
            for p in lo_p..=hi_p {
                let v = if integral[i] && p == -(x.round() as i64) {
                    0.0
                } else {
                    (x + p as f64).abs()
                };
                if v <= query.r {
                    row.push(v);
                }
            }
            options.push(row);
        }
        count_with_zero(&options, 0, false, &mut total.count);
    });
    total
}

fn count_with_zero(options: &[Vec<f64>], i: usize, seen_zero: bool, count: &mut u64) {
    if i == options.len() {
        if seen_zero {
            *count += 1;
        }
        return;
    }
    for v in &options[i] {
        count_with_zero(options, i + 1, seen_zero || *v == 0.0, count);
    }
}

fn check_alpha_t(alpha: &[f64], t: &[f64]) -> Result<Vec<i64>> {
    if alpha.is_empty() || alpha.len() != t.len() {
        return Err(Error::domain("alpha and T must have the same positive length"));
    }
    if alpha.iter().chain(t).any(|v| !v.is_finite()) || t.iter().any(|v| *v < 0.0) {
        return Err(Error::domain("alpha and T must be finite with T >= 0"));
    }
    check_budget(t, DEFAULT_BUDGET)?;
    Ok(t.iter().map(|v| v.floor() as i64).collect())
}

/// Sum a function of `q` over `prod [0, T_j] \ {0}` with compensated
/// summation, split by the first coordinate.
fn sum_over_box(lim: &[i64], term: impl Fn(&[i64]) -> Result<f64> + Sync + Send) -> Result<f64> {
    let n = lim.len();
    let parts = map_range(0, lim[0], |lead| -> Result<CompensatedSum> {
        let mut acc = CompensatedSum::new();
        let mut q = vec![0i64; n];
        q[0] = lead;
        let zeros = vec![0i64; n - 1];
        let mut err = None;
        for_each_point(&zeros, &lim[1..], |rest| {
            if err.is_some() {
                return;
            }
            q[1..].copy_from_slice(rest);
            if lead == 0 && rest.iter().all(|&v| v == 0) {
                return;
            }
            match term(&q) {
                Ok(v) => acc.add(v),
                Err(e) => err = Some(e),
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(acc),
        }
    });
    let mut total = CompensatedSum::new();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total.value())
}

#[inline]
fn dot_q(alpha: &[f64], q: &[i64]) -> f64 {
    alpha.iter().zip(q).map(|(a, &k)| a * k as f64).sum()
}

/// `S(alpha, T) = sum over 0 <= q_i <= T_i, q != 0 of 1 / (q_1^+ ... q_n^+ ||q . alpha||)`.
pub fn sum_s(alpha: &[f64], t: &[f64]) -> Result<f64> {
    let lim = check_alpha_t(alpha, t)?;
    sum_over_box(&lim, |q| {
        let d = frac_dist(dot_q(alpha, q));
        if d < SINGULAR_TOL {
            return Err(Error::Singular { q: q.to_vec() });
        }
        let w: f64 = q.iter().map(|&k| clamp_plus(k as f64)).product();
        Ok(1.0 / (w * d))
    })
}

/// `S*(alpha, T) = sum_{0 < q <= T} 1 / (q prod_i ||q alpha_i||)`.
pub fn sum_s_star(alpha: &[f64], t: f64) -> Result<f64> {
    if alpha.is_empty() || alpha.iter().any(|a| !a.is_finite()) || !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain("need a nonempty finite alpha and finite T >= 0"));
    }
    check_budget(&[t], DEFAULT_BUDGET)?;
    let parts = map_chunks(1, t.floor() as i64, CHUNK, |a, b| -> Result<CompensatedSum> {
        let mut acc = CompensatedSum::new();
        for q in a..=b {
            let qf = q as f64;
            let mut prod = qf;
            for al in alpha {
                let d = frac_dist(al * qf);
                if d < SINGULAR_TOL {
                    return Err(Error::Singular { q: vec![q] });
                }
                prod *= d;
            }
            acc.add(1.0 / prod);
        }
        Ok(acc)
    });
    let mut total = CompensatedSum::new();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total.value())
}

/// `Sigma(L, T) = sum over 0 <= q_j <= T_j, q != 0 of 1 / prod_i ||L_i q||`.
pub fn sum_sigma(l: &MatrixL, t: &[f64]) -> Result<f64> {
    if l.cols() != t.len() {
        return Err(Error::domain("matrix columns must match the length of T"));
    }
    let lim = check_alpha_t(&vec![0.0; t.len()], t)?;
    let m = l.rows();
    sum_over_box(&lim, |q| {
        let mut prod = 1.0;
        for i in 0..m {
            let d = frac_dist(l.row_dot(i, q));
            if d < SINGULAR_TOL {
                return Err(Error::Singular { q: q.to_vec() });
            }
            prod *= d;
        }
        Ok(1.0 / prod)
    })
}

/// Joint (`q` in a box, linear form) or dual (`q` scalar, simultaneous) setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumMode {
    Joint,
    Dual,
}

/// Products `q_1 ... q_n ||q . alpha||` (joint) or `q prod ||q alpha_i||`
/// (dual) over the positive part of the box, passed to `visit` in a fixed
/// order. The joint product uses `q_i^+`, so points on coordinate
/// hyperplanes are included with weight 1 per vanishing coordinate.
fn for_each_product(
    alpha: &[f64],
    t: &[f64],
    mode: SumMode,
    plus: bool,
) -> Result<Vec<Vec<f64>>> {
    match mode {
        SumMode::Joint => {
            let lim = check_alpha_t(alpha, t)?;
            let n = lim.len();
            let start = if plus { 0 } else { 1 };
            Ok(map_range(start, lim[0], |lead| {
                let mut out = Vec::new();
                let lo = vec![start; n - 1];
                let mut q = vec![0i64; n];
                q[0] = lead;
                for_each_point(&lo, &lim[1..], |rest| {
                    q[1..].copy_from_slice(rest);
                    if q.iter().all(|&v| v == 0) {
                        return;
                    }
                    let w: f64 = q.iter().map(|&k| clamp_plus(k as f64)).product();
                    out.push(w * frac_dist(dot_q(alpha, &q)));
                });
                out
            }))
        }
        SumMode::Dual => {
            if t.len() != 1 {
                return Err(Error::domain("dual mode takes a single bound T"));
            }
            if alpha.is_empty() || !(t[0] >= 0.0) {
                return Err(Error::domain("need nonempty alpha and T >= 0"));
            }
            check_budget(t, DEFAULT_BUDGET)?;
            Ok(map_chunks(1, t[0].floor() as i64, CHUNK, |a, b| {
                (a..=b)
                    .map(|q| {
                        let qf = q as f64;
                        alpha.iter().fold(qf, |acc, al| acc * frac_dist(al * qf))
                    })
                    .collect()
            }))
        }
    }
}

/// `N(alpha, T, a, b)`: number of `q` with all `q_i >= 1` in the box and
/// `a < q_1 ... q_n ||q . alpha|| <= b` (joint), or of `1 <= q <= T` with
/// `a < q prod ||q alpha_i|| <= b` (dual).
pub fn count_n(alpha: &[f64], t: &[f64], a: f64, b: f64, mode: SumMode) -> Result<CountResult> {
    if !(0.0 <= a && a < b) {
        return Err(Error::domain("need 0 <= a < b"));
    }
    let parts = for_each_product(alpha, t, mode, false)?;
    let mut res = CountResult::ZERO;
    for v in parts.iter().flatten() {
        if *v > a && *v <= b {
            res.count += 1;
        }
        if (v - a).abs() <= ETA_CMP * a.max(f64::MIN_POSITIVE) || (v - b).abs() <= ETA_CMP * b {
            res.boundary_sensitive = true;
        }
    }
    Ok(res)
}

/// Parts of the sum below, between and above the two thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSplit {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub lower: f64,
    pub upper: f64,
}

impl RangeSplit {
    pub fn total(&self) -> f64 {
        self.s1 + self.s2 + self.s3
    }
}

/// Default exponent `C = n (n + 1)` for the upper threshold.
pub fn default_split_c(n: usize) -> f64 {
    (n * (n + 1)) as f64
}

/// Default `eps_0` for the lower threshold.
pub const DEFAULT_EPS0: f64 = 0.1;

/// Split `S` (joint) or `S*` (dual) by the size of the product `v` in each
/// term `1 / v`: `v <= log(P)^{-n-eps0}`, up to `log(P)^C`, and above,
/// where `P = T_1 ... T_n` (joint) or `T` (dual) and log is clamped.
pub fn range_split(alpha: &[f64], t: &[f64], c: f64, eps0: f64, mode: SumMode) -> Result<RangeSplit> {
    let n = alpha.len() as f64;
    let p: f64 = t.iter().product();
    let lg = clamped_log(p);
    let lower = lg.powf(-n - eps0);
    let upper = lg.powf(c);
    let parts = for_each_product(alpha, t, mode, true)?;
    let mut s = [CompensatedSum::new(); 3];
    for v in parts.iter().flatten() {
        if *v < SINGULAR_TOL {
            return Err(Error::domain("singular term in range split"));
        }
        let k = if *v <= lower {
            0
        } else if *v <= upper {
            1
        } else {
            2
        };
        s[k].add(1.0 / v);
    }
    Ok(RangeSplit {
        s1: s[0].value(),
        s2: s[1].value(),
        s3: s[2].value(),
        lower,
        upper,
    })
}

/// Upper bound for `N(alpha, T, e^{-k-1}, e^{-k})` by e-adic boxes in `q`.
///
/// Joint: sum over integer `h` with `0 <= h_i <= ceil(log T_i)` and
/// `sum h >= -k` of `#M(alpha^t, e^{-k - sum h + n}, 1/2, e^h)`.
/// Dual: sum over `max(0, -k) <= h <= ceil(log T)` of
/// `#M(alpha, e^{-k - h + 1}, 1/2, e^h)`.
pub fn dyadic_n_overcount(alpha: &[f64], t: &[f64], k: i64, mode: SumMode) -> Result<u64> {
    let n = alpha.len();
    match mode {
        SumMode::Joint => {
            if t.len() != n || n == 0 {
                return Err(Error::domain("alpha and T must have the same positive length"));
            }
            let l = MatrixL::row(alpha)?;
            let hmax: Vec<i64> = t.iter().map(|v| v.max(1.0).ln().ceil() as i64).collect();
            let mut total = 0u64;
            let mut err = None;
            for_each_point(&vec![0; n], &hmax, |h| {
                let sh: i64 = h.iter().sum();
                if sh < -k || err.is_some() {
                    return;
                }
                let eps = ((-k - sh + n as i64) as f64).exp();
                let box_t: Vec<f64> = h.iter().map(|&x| (x as f64).exp()).collect();
                match CountQuery::new(l.clone(), eps, 0.5, box_t).and_then(|q| brute_count_m(&q)) {
                    Ok(c) => total += c.count,
                    Err(e) => err = Some(e),
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(total),
            }
        }
        SumMode::Dual => {
            if t.len() != 1 {
                return Err(Error::domain("dual mode takes a single bound T"));
            }
            let l = MatrixL::column(alpha)?;
            let hmax = t[0].max(1.0).ln().ceil() as i64;
            let mut total = 0;
            for h in (-k).max(0)..=hmax {
                let eps = ((-k - h + 1) as f64).exp();
                let q = CountQuery::new(l.clone(), eps, 0.5, vec![(h as f64).exp()])?;
                total += brute_count_m(&q)?.count;
            }
            Ok(total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::with_workers;
    use proptest::prelude::*;

    const PHI0: f64 = 1.6180339887;

    fn golden(eps: f64, r: f64, t: f64) -> CountQuery {
        CountQuery::new(MatrixL::row(&[PHI0]).unwrap(), eps, r, vec![t]).unwrap()
    }

    /// Independent count: scan q and p directly over a generous window.
    fn naive_m(q: &CountQuery) -> u64 {
        let m = q.l.rows();
        let lim: Vec<i64> = q.t.iter().map(|v| v.floor() as i64).collect();
        let lo: Vec<i64> = lim.iter().map(|v| -v).collect();
        let mut count = 0;
        for_each_point(&lo, &lim, |qq| {
            if qq.iter().all(|&v| v == 0) {
                return;
            }
            let xs: Vec<f64> = (0..m).map(|i| q.l.row_dot(i, qq)).collect();
            let w = q.r.ceil() as i64 + 2;
            let plo: Vec<i64> = xs.iter().map(|x| -(x.round() as i64) - w).collect();
            let phi: Vec<i64> = xs.iter().map(|x| -(x.round() as i64) + w).collect();
            for_each_point(&plo, &phi, |p| {
                let vals: Vec<f64> = xs.iter().zip(p).map(|(x, &pi)| (x + pi as f64).abs()).collect();
                if vals.iter().all(|v| *v <= q.r) && vals.iter().product::<f64>() < q.eps {
                    count += 1;
                }
            });
        });
        count
    }

    #[test]
    fn brute_examples() {
        assert_eq!(brute_count_m(&golden(0.2, 0.5, 3.0)).unwrap().count, 2);
        assert_eq!(brute_count_m(&golden(0.1, 0.5, 3.0)).unwrap().count, 0);
        assert_eq!(brute_count_m(&golden(0.5, 1.0, 2.0)).unwrap().count, 4);
    }

    #[test]
    fn brute_budget_guard() {
        let q = CountQuery::new(MatrixL::row(&[0.3, 0.7]).unwrap(), 0.1, 0.5, vec![1e5, 1e5]).unwrap();
        assert_eq!(brute_count_m(&q).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn sum_examples() {
        assert!((sum_s(&[0.5], &[1.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((sum_s(&[PHI0], &[2.0]).unwrap() - 4.736068).abs() < 1e-5);
        assert!((sum_s(&[PHI0], &[1.0]).unwrap() - 2.618034).abs() < 1e-5);
        let s = sum_s_star(&[2f64.sqrt(), 3f64.sqrt()], 1.0).unwrap();
        // 1 / ((sqrt 2 - 1)(2 - sqrt 3))
        assert!((s - 9.009968).abs() < 1e-4, "{s}");
        let sig = sum_sigma(&MatrixL::row(&[PHI0]).unwrap(), &[3.0]).unwrap();
        assert!((sig - 13.70820).abs() < 1e-4, "{sig}");
    }

    #[test]
    fn singular_terms_are_reported() {
        let err = sum_sigma(&MatrixL::row(&[0.5]).unwrap(), &[2.0]).unwrap_err();
        assert_eq!(err, Error::Singular { q: vec![2] });
        assert!(matches!(sum_s(&[0.5], &[2.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn count_n_examples() {
        let c = count_n(&[PHI0], &[5.0], 0.3, 0.5, SumMode::Joint).unwrap();
        assert_eq!(c.count, 4);
        let c = count_n(&[PHI0], &[5.0], 0.001, 0.2, SumMode::Joint).unwrap();
        assert_eq!(c.count, 0);
        assert!(count_n(&[PHI0], &[5.0], 0.5, 0.3, SumMode::Joint).is_err());
    }

    #[test]
    fn range_split_example() {
        let rs = range_split(&[PHI0], &[10.0], 2.0, 0.1, SumMode::Joint).unwrap();
        // log(10)^{-1.1} = 0.39954...; only q = 1 has a product below it.
        assert!((rs.lower - 0.399542).abs() < 1e-5, "{}", rs.lower);
        assert!((rs.s1 - 2.618034).abs() < 1e-5, "{}", rs.s1);
        let total = sum_s(&[PHI0], &[10.0]).unwrap();
        assert!((rs.total() - total).abs() < 1e-10 * total);
    }

    #[test]
    fn dyadic_overcount_bounds_count() {
        for k in -2..6 {
            let n = count_n(
                &[PHI0],
                &[40.0],
                (-(k as f64) - 1.0).exp(),
                (-(k as f64)).exp(),
                SumMode::Joint,
            )
            .unwrap()
            .count;
            let over = dyadic_n_overcount(&[PHI0], &[40.0], k, SumMode::Joint).unwrap();
            assert!(over >= n, "k={k}: {over} < {n}");
        }
        assert_eq!(dyadic_n_overcount(&[PHI0], &[40.0], -10, SumMode::Joint).unwrap(), 0);
    }

    #[test]
    fn tile_count_examples() {
        let q = golden(0.1, 0.5, 40.0);
        assert_eq!(tile_count_m(&q).unwrap(), brute_count_m(&q).unwrap());
        let exact = CountQuery::new(MatrixL::parse("1/2").unwrap(), 0.1, 0.5, vec![6.0]).unwrap();
        assert_eq!(tile_count_m(&exact).unwrap().count, brute_count_m(&exact).unwrap().count);
    }

    #[test]
    fn worker_counts_agree() {
        let alpha = [2f64.sqrt() - 1.0, 3f64.sqrt() - 1.0];
        let base = with_workers(1, || sum_s(&alpha, &[200.0, 150.0])).unwrap().unwrap();
        for w in [2, 4, 8] {
            let v = with_workers(w, || sum_s(&alpha, &[200.0, 150.0])).unwrap().unwrap();
            assert_eq!(v, base);
        }
    }

    #[test]
    fn kruse_regime() {
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        for t in [1e2, 1e3, 1e4, 1e5, 1e6] {
            let s = sum_s(&[golden], &[t]).unwrap();
            let ratio = s / t.ln().powi(2);
            assert!((0.1..=10.0).contains(&ratio), "T={t}: {ratio}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn brute_matches_naive(a in 0.0f64..1.0, b in 0.0f64..1.0, eps in 0.01f64..0.6, r in 0.3f64..1.6, t in 1.0f64..12.0, shape in 0usize..3) {
            let l = match shape {
                0 => MatrixL::row(&[a]).unwrap(),
                1 => MatrixL::row(&[a, b]).unwrap(),
                _ => MatrixL::column(&[a, b]).unwrap(),
            };
            let tt = vec![t; l.cols()];
            let q = CountQuery::new(l, eps, r, tt).unwrap();
            prop_assert_eq!(brute_count_m(&q).unwrap().count, naive_m(&q));
        }

        #[test]
        fn count_monotone(a in 0.0f64..1.0, eps in 0.01f64..0.4, r in 0.3f64..1.0, t in 1.0f64..30.0) {
            let c = |e: f64, rr: f64, tt: f64| brute_count_m(&CountQuery::new(MatrixL::row(&[a]).unwrap(), e, rr, vec![tt]).unwrap()).unwrap().count;
            let base = c(eps, r, t);
            prop_assert!(c(eps * 1.5, r, t) >= base);
            prop_assert!(c(eps, r * 1.5, t) >= base);
            prop_assert!(c(eps, r, t + 3.0) >= base);
        }

        #[test]
        fn count_symmetric_in_q(a in 0.0f64..1.0, eps in 0.01f64..0.4, t in 1.0f64..30.0) {
            // Points with q and -q pair up, so the count is even.
            let q = CountQuery::new(MatrixL::row(&[a]).unwrap(), eps, 0.4, vec![t]).unwrap();
            prop_assert_eq!(brute_count_m(&q).unwrap().count % 2, 0);
        }

        #[test]
        fn overcount_dominates(a in 0.01f64..0.99, t in 2.0f64..60.0, k in -1i64..5) {
            let lo = (-(k as f64) - 1.0).exp();
            let hi = (-(k as f64)).exp();
            let n = count_n(&[a], &[t], lo, hi, SumMode::Joint).unwrap().count;
            prop_assert!(dyadic_n_overcount(&[a], &[t], k, SumMode::Joint).unwrap() >= n);
            let beta = [a, (2.0 * a).sqrt()];
            let kd = k + 2;
            let nd = count_n(&beta, &[t], (-(kd as f64) - 1.0).exp(), (-(kd as f64)).exp(), SumMode::Dual).unwrap().count;
            prop_assert!(dyadic_n_overcount(&beta, &[t], kd, SumMode::Dual).unwrap() >= nd);
        }
    }
}
