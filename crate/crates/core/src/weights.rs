//! Weight schedule attached to a support profile, its exact identities and
//! the empirical check of the product of successive minima.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cert::PhiSpec;
use crate::error::{Error, Result};
use crate::lattice::{assemble_lattice, exact_successive_minima, Orientation};
use crate::scalar::{geo_mean, MatrixL};
use crate::tess::{cube_scaling, partition_h1, StarBodyH1};

/// 0/1 matrix of `m + n - 1` rows and `n` columns; row `s` records which
/// `y` coordinates are in the support of the `s`-th vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportMatrix {
    pub m: usize,
    pub n: usize,
    pub rows: Vec<Vec<u8>>,
}

impl SupportMatrix {
    /// Validate shape and the four structural conditions, naming the first
    /// one that fails.
    pub fn new(m: usize, n: usize, rows: Vec<Vec<u8>>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::domain("m and n must be positive"));
        }
        if rows.len() != m + n - 1 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::domain(format!(
                "support matrix must be {} x {n}",
                m + n - 1
            )));
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(Error::domain("support matrix entries must be 0 or 1"));
        }
        for (s, row) in rows.iter().enumerate() {
            let s1 = s + 1;
            if row[0] != 1 {
                return Err(Error::domain(format!("first column violated at row {s1}")));
            }
            if row.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::domain(format!("row-triangular violated at row {s1}")));
            }
            if s > 0 && rows[s - 1].iter().zip(row).any(|(a, b)| a > b) {
                return Err(Error::domain(format!("nested violated at row {s1}")));
            }
            let h = row.iter().filter(|&&v| v == 1).count();
            if h + m < s1 + 1 {
                return Err(Error::domain(format!(
                    "h lower bound violated at row {s1}: h = {h} < {}",
                    s1 + 1 - m
                )));
            }
        }
        Ok(Self { m, n, rows })
    }

    /// Number of ones in row `s` (0-based).
    pub fn h(&self, s: usize) -> usize {
        self.rows[s].iter().filter(|&&v| v == 1).count()
    }

    /// Parse comma separated 0/1 rows, one per line.
    pub fn from_csv(m: usize, text: &str) -> Result<Self> {
        let rows: Vec<Vec<u8>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|v| v.trim().parse::<u8>().map_err(|_| Error::config(format!("bad entry {v:?}"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.first().map_or(0, Vec::len);
        Self::new(m, n, rows)
    }

    /// Uniformly chosen nondecreasing row lengths satisfying every condition.
    pub fn random<R: Rng>(m: usize, n: usize, rng: &mut R) -> Self {
        let mut rows = Vec::with_capacity(m + n - 1);
        let mut prev = 1;
        for s1 in 1..m + n {
            let lower = prev.max((s1 + 1).saturating_sub(m)).max(1);
            let h = rng.gen_range(lower..=n);
            rows.push((0..n).map(|j| u8::from(j < h)).collect());
            prev = h;
        }
        Self::new(m, n, rows).expect("generated matrix satisfies the conditions")
    }
}

/// Exact weights `k_s`, partial sums `alpha_s = sum_{i<=s} 1/k_i` and
/// `alpha_{s,j} = sum_{i<=s} t_{ij}/k_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub m: usize,
    pub k: Vec<BigRational>,
    pub alpha: Vec<BigRational>,
    pub alpha_j: Vec<Vec<BigRational>>,
}

/// Exact rational used throughout the schedule.
pub type Rational = BigRational;

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `k_s = m + h_s` for `s <= m`, and for `s > m`
/// `k_s = (m + h_s) / (1 - sum_{i<s} (1 - t_{i, s+1-m}) / k_i)`.
pub fn build_schedule(t: &SupportMatrix, sigma: Option<usize>) -> Result<Schedule> {
    let (m, n) = (t.m, t.n);
    let sigma = sigma.unwrap_or(m + n - 1);
    if sigma == 0 || sigma > m + n - 1 {
        return Err(Error::domain(format!("sigma must lie in 1..={}", m + n - 1)));
    }
    let mut k: Vec<BigRational> = Vec::with_capacity(sigma);
    for s in 0..sigma {
        let s1 = s + 1;
        let top = rat((m + t.h(s)) as i64);
        if s1 <= m {
            k.push(top);
        } else {
            let col = s1 - m; // 0-based index of column s + 1 - m
            let mut denom = BigRational::one();
            for (i, ki) in k.iter().enumerate() {
                denom -= rat(1 - i64::from(t.rows[i][col])) / ki;
            }
            if !denom.is_positive() {
                return Err(Error::domain(format!("weight denominator is not positive at s = {s1}")));
            }
            k.push(top / denom);
        }
    }
    let mut alpha = Vec::with_capacity(sigma);
    let mut alpha_j = Vec::with_capacity(sigma);
    let mut acc = BigRational::zero();
    let mut acc_j = vec![BigRational::zero(); n];
    for (s, ks) in k.iter().enumerate() {
        acc += ks.recip();
        for (j, a) in acc_j.iter_mut().enumerate() {
            if t.rows[s][j] == 1 {
                *a += ks.recip();
            }
        }
        alpha.push(acc.clone());
        alpha_j.push(acc_j.clone());
    }
    Ok(Schedule { m, k, alpha, alpha_j })
}

/// Which identities were checked and the largest `alpha_s (s+1)/s`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub checked_rows: usize,
    pub max_alpha_ratio: BigRational,
}

/// Check `k_s >= m + h_s`, the balance identity
/// `alpha_s (s + 1) + sum_{j > s+1-m} alpha_{s,j} = s` for `m <= s <= sigma`,
/// and its consequence `alpha_s <= s / (s + 1)`.
pub fn verify_identities(t: &SupportMatrix, sched: &Schedule) -> Result<IdentityReport> {
    let m = t.m;
    let mut max_ratio = BigRational::zero();
    let mut checked = 0;
    for (s, ks) in sched.k.iter().enumerate() {
        let s1 = s + 1;
        if *ks < rat((m + t.h(s)) as i64) {
            return Err(Error::Internal(format!("k_{s1} below m + h_{s1}")));
        }
        if s1 < m {
            continue;
        }
        let mut lhs = &sched.alpha[s] * rat(s1 as i64 + 1);
        // Columns j (1-based) with j > s + 1 - m.
        for j in (s1 + 1 - m)..t.n {
            lhs += &sched.alpha_j[s][j];
        }
        if lhs != rat(s1 as i64) {
            return Err(Error::Internal(format!("balance identity fails at s = {s1}: {lhs}")));
        }
        let ratio = &sched.alpha[s] * rat(s1 as i64 + 1) / rat(s1 as i64);
        if ratio > BigRational::one() {
            return Err(Error::Internal(format!("alpha_{s1} exceeds s/(s+1)")));
        }
        if ratio > max_ratio {
            max_ratio = ratio;
        }
        checked += 1;
    }
    Ok(IdentityReport {
        checked_rows: checked,
        max_alpha_ratio: max_ratio,
    })
}

/// Result of comparing `(eps T^n)^{s/(m+n)} / (delta_1 ... delta_s)` with
/// `1 + R^{m+n-1} + eps T^n + (eps T^n / phi(T))^{(m+n-1)/(m+n)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaCheck {
    pub max_ratio: f64,
    /// `(tile shift, sigma, ratio)` for the worst sigma of every tile.
    pub per_tile: Vec<(Vec<i64>, usize, f64)>,
    pub rhs: f64,
    /// Set when the check does not apply.
    pub skipped: Option<String>,
}

/// Empirical check of the minima product bound on every tile of the H1
/// partition, after the cube scaling.
pub fn minima_product_check(l: &MatrixL, phi: &PhiSpec, eps: f64, r: f64, t: &[f64]) -> Result<MinimaCheck> {
    let (m, n) = (l.rows(), l.cols());
    if m + n > 6 {
        return Err(Error::capability("minima product check limited to m + n <= 6"));
    }
    if t.len() != n {
        return Err(Error::domain("T must have one entry per column"));
    }
    let t_bar = geo_mean(t)?;
    let vol = eps * t_bar.powi(n as i32);
    let d = (m + n) as f64;
    let rhs = 1.0 + r.powi(m as i32 + n as i32 - 1) + vol + (vol / phi.eval(t_bar)).powf((d - 1.0) / d);
    if vol / phi.eval(t_bar) < 1.0 {
        return Ok(MinimaCheck {
            max_ratio: 0.0,
            per_tile: Vec::new(),
            rhs,
            skipped: Some("eps T^n / phi(T) < 1: no lattice points in the region".into()),
        });
    }
    let part = partition_h1(&StarBodyH1::new(m, eps, r)?)?;
    let scaling = cube_scaling(m, n, eps, t)?;
    let base = assemble_lattice(l, Orientation::Upper);
    let mut per_tile = Vec::with_capacity(part.tiles.len());
    let mut max_ratio: f64 = 0.0;
    for tile in &part.tiles {
        let exps: Vec<f64> = (0..m + n)
            .map(|i| {
                let a = if i < m { tile.map.exponents[i] } else { 0.0 };
                a + scaling.omega1.exponents[i] + scaling.omega2.exponents[i]
            })
            .collect();
        let profile = exact_successive_minima(&base.scale_coordinates(&exps))?;
        let mut prod = 1.0;
        let mut worst = (0, 0.0f64);
        for (s, delta) in profile.minima.iter().enumerate() {
            prod *= delta;
            let lhs = vol.powf((s + 1) as f64 / d) / prod;
            let ratio = lhs / rhs;
            if ratio > worst.1 {
                worst = (s + 1, ratio);
            }
        }
        max_ratio = max_ratio.max(worst.1);
        per_tile.push((tile.grid.clone(), worst.0, worst.1));
    }
    Ok(MinimaCheck {
        max_ratio,
        per_tile,
        rhs,
        skipped: None,
    })
}

/// Render a rational as `p/q` (or `p` for integers).
pub fn fraction(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn schedule_examples() {
        let t = SupportMatrix::new(1, 2, vec![vec![1, 1], vec![1, 1]]).unwrap();
        let s = build_schedule(&t, None).unwrap();
        assert_eq!(s.k, vec![r(3, 1), r(3, 1)]);
        assert_eq!(s.alpha, vec![r(1, 3), r(2, 3)]);

        let t = SupportMatrix::new(1, 2, vec![vec![1, 0], vec![1, 1]]).unwrap();
        let s = build_schedule(&t, None).unwrap();
        assert_eq!(s.k, vec![r(2, 1), r(6, 1)]);
        assert_eq!(s.alpha, vec![r(1, 2), r(2, 3)]);

        let t = SupportMatrix::new(2, 1, vec![vec![1], vec![1]]).unwrap();
        let s = build_schedule(&t, None).unwrap();
        assert_eq!(s.k, vec![r(3, 1), r(3, 1)]);
        verify_identities(&t, &s).unwrap();
    }

    #[test]
    fn invalid_matrices_name_the_condition() {
        let msg = |rows: Vec<Vec<u8>>, m, n| SupportMatrix::new(m, n, rows).unwrap_err().to_string();
        assert!(msg(vec![vec![0, 0], vec![1, 1]], 1, 2).contains("first column"));
        assert!(msg(vec![vec![1, 0, 1], vec![1, 1, 1], vec![1, 1, 1]], 1, 3).contains("row-triangular"));
        assert!(msg(vec![vec![1, 1], vec![1, 0]], 1, 2).contains("nested"));
        assert!(msg(vec![vec![1, 0], vec![1, 0]], 1, 2).contains("h lower bound"));
    }

    #[test]
    fn single_flip_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = rng.gen_range(1..=4);
            let n = rng.gen_range(1..=4);
            let t = SupportMatrix::random(m, n, &mut rng);
            let s = rng.gen_range(0..m + n - 1);
            let j = rng.gen_range(0..n);
            let mut rows = t.rows.clone();
            rows[s][j] ^= 1;
            if let Ok(flipped) = SupportMatrix::new(m, n, rows) {
                // The flip produced another valid matrix; identities still hold.
                let sched = build_schedule(&flipped, None).unwrap();
                verify_identities(&flipped, &sched).unwrap();
            }
        }
    }

    #[test]
    fn csv_and_fractions() {
        let t = SupportMatrix::from_csv(1, "1,0\n1,1\n").unwrap();
        let s = build_schedule(&t, None).unwrap();
        let shown: Vec<String> = s.alpha.iter().map(fraction).collect();
        assert_eq!(shown, vec!["1/2", "2/3"]);
    }

    #[test]
    fn golden_minima_product() {
        let l = MatrixL::row(&[1.6180339887]).unwrap();
        let chk = minima_product_check(&l, &PhiSpec::Constant { c: 0.3 }, 0.1, 0.5, &[10.0]).unwrap();
        assert!(chk.skipped.is_none());
        assert!(chk.max_ratio <= 10.0, "{}", chk.max_ratio);
        let chk = minima_product_check(&l, &PhiSpec::Constant { c: 0.3 }, 0.001, 0.5, &[10.0]).unwrap();
        assert!(chk.skipped.is_some());
    }

    proptest! {
        #[test]
        fn identities_hold_for_valid_matrices(seed in 0u64..u64::MAX, m in 1usize..=4, n in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = SupportMatrix::random(m, n, &mut rng);
            let s = build_schedule(&t, None).unwrap();
            verify_identities(&t, &s).unwrap();
            prop_assert!(s.alpha.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
