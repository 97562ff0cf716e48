//! Dyadic interval families, prefix coverings and Monte-Carlo checks of
//! moment bounds and expected lattice-point counts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_range, sample_rng};
use crate::scalar::{frac_dist, CompensatedSum};
use crate::tess::{tessellate_h2, SlabDomainH2, StarBodyH1};

/// Integer interval `(2^a b, 2^a (b + 1)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub a: u32,
    pub b: u64,
}

impl DyadicInterval {
    pub fn lo(&self) -> u64 {
        self.b << self.a
    }

    pub fn hi(&self) -> u64 {
        (self.b + 1) << self.a
    }

    pub fn len(&self) -> u64 {
        1 << self.a
    }
}

const MAX_S: u32 = 30;

/// All `(2^a b, 2^a (b+1)]` with `2^a (b+1) < 2^s`, ordered by `a` then `b`.
pub fn dyadic_family(s: u32) -> Result<Vec<DyadicInterval>> {
    if s == 0 {
        return Err(Error::domain("s must be at least 1"));
    }
    if s > MAX_S {
        return Err(Error::capability(format!("s <= {MAX_S} required")));
    }
    let top = 1u64 << s;
    let mut out = Vec::with_capacity(dyadic_family_len(s) as usize);
    for a in 0..s {
        let mut b = 0;
        while (b + 1) << a < top {
            out.push(DyadicInterval { a, b });
            b += 1;
        }
    }
    Ok(out)
}

/// `2^{s+1} - s - 2`.
pub fn dyadic_family_len(s: u32) -> u64 {
    (1u64 << (s + 1)) - u64::from(s) - 2
}

/// Disjoint members of the family for `s` whose union is `(0, k]`, read off
/// the binary digits of `k` from the top.
pub fn cover_prefix(k: u64, s: u32) -> Result<Vec<DyadicInterval>> {
    if s == 0 || s > MAX_S {
        return Err(Error::domain(format!("s must lie in 1..={MAX_S}")));
    }
    if k >= 1 << s {
        return Err(Error::domain(format!("k = {k} must be below 2^{s}")));
    }
    let mut out = Vec::new();
    let mut c = 0u64;
    for a in (0..s).rev() {
        if k >> a & 1 == 1 {
            out.push(DyadicInterval { a, b: c >> a });
            c += 1 << a;
        }
    }
    Ok(out)
}

/// Function families `f_n(y)` on a probability space, indexed by `n >= 1`
/// in each of `d` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Family {
    Zero,
    /// `f = 1`.
    Const,
    /// `f_n = (-1)^{n_1 + ... + n_d}`.
    Alt,
    /// `f_n = n^r - (n-1)^r`, one index only.
    PowerDiff { r: u32 },
    /// Independent fair signs.
    Rademacher,
    /// `f_h(alpha) = #{q in (2^{h-1}, 2^h] : q ||q alpha|| <= eps}`, one index,
    /// `alpha` uniform on `[0, 1)`.
    Lattice { eps: f64 },
}

impl Family {
    /// Parse `zero`, `const`, `alt`, `powerdiff:R`, `rademacher`, `lattice[:EPS]`.
    pub fn parse(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = || Error::config(format!("unknown family {s}"));
        Ok(match (head, arg) {
            ("zero", None) => Family::Zero,
            ("const", None) => Family::Const,
            ("alt", None) => Family::Alt,
            ("rademacher", None) => Family::Rademacher,
            ("powerdiff", Some(r)) => Family::PowerDiff { r: r.parse().map_err(|_| bad())? },
            ("lattice", None) => Family::Lattice { eps: 0.25 },
            ("lattice", Some(e)) => Family::Lattice { eps: e.parse().map_err(|_| bad())? },
            _ => return Err(bad()),
        })
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Family::Rademacher | Family::Lattice { .. })
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d == 0 {
            return Err(Error::domain("need at least one index"));
        }
        if matches!(self, Family::PowerDiff { .. } | Family::Lattice { .. }) && d != 1 {
            return Err(Error::domain("this family has a single index"));
        }
        Ok(())
    }

    /// The majorant `g`; every family here satisfies the moment hypothesis
    /// with `g = 1` up to the recorded constant.
    pub fn g(&self, _x: f64) -> f64 {
        1.0
    }

    /// Constant `C` with `g(2x) <= 2 C g(x)`.
    pub fn doubling_constant(&self) -> f64 {
        0.5
    }

    /// Values `f_n` for `n` in `prod 1..=N_i`, row-major.
    fn realize<R: Rng>(&self, n_max: &[u64], rng: &mut R) -> Vec<f64> {
        let total: u64 = n_max.iter().product();
        match *self {
            Family::Zero => vec![0.0; total as usize],
            Family::Const => vec![1.0; total as usize],
            Family::Alt => {
                let mut out = Vec::with_capacity(total as usize);
                let mut idx = vec![1u64; n_max.len()];
                for _ in 0..total {
                    let parity: u64 = idx.iter().sum();
                    out.push(if parity % 2 == 0 { 1.0 } else { -1.0 });
                    for i in (0..idx.len()).rev() {
                        if idx[i] < n_max[i] {
                            idx[i] += 1;
                            break;
                        }
                        idx[i] = 1;
                    }
                }
                out
            }
            Family::PowerDiff { r } => (1..=total)
                .map(|n| (n as f64).powi(r as i32) - ((n - 1) as f64).powi(r as i32))
                .collect(),
            Family::Rademacher => (0..total).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect(),
            Family::Lattice { eps } => {
                let alpha: f64 = rng.gen();
                (1..=total)
                    .map(|h| {
                        let lo = 1u64 << (h - 1);
                        let hi = 1u64 << h;
                        ((lo + 1)..=hi)
                            .filter(|&q| q as f64 * frac_dist(q as f64 * alpha) <= eps)
                            .count() as f64
                    })
                    .collect()
            }
        }
    }
}

/// Cumulative sums over `prod 0..=N_i` with zero padding at index 0.
struct PrefixGrid {
    dims: Vec<usize>,
    strides: Vec<usize>,
    data: Vec<f64>,
}

impl PrefixGrid {
    fn new(n_max: &[u64], values: &[f64]) -> Self {
        let dims: Vec<usize> = n_max.iter().map(|&n| n as usize + 1).collect();
        let d = dims.len();
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let total: usize = dims.iter().product();
        let mut data = vec![0.0; total];
        // Scatter values into positions with every coordinate >= 1.
        let mut k = 0;
        for (pos, slot) in data.iter_mut().enumerate() {
            if (0..d).all(|i| (pos / strides[i]) % dims[i] != 0) {
                *slot = values[k];
                k += 1;
            }
        }
        for i in 0..d {
            for pos in 0..total {
                if (pos / strides[i]) % dims[i] != 0 {
                    data[pos] += data[pos - strides[i]];
                }
            }
        }
        Self { dims, strides, data }
    }

    fn at(&self, n: &[u64]) -> f64 {
        self.data[n.iter().zip(&self.strides).map(|(&v, s)| v as usize * s).sum::<usize>()]
    }

    /// Sum of `f_n` over `prod (lo_i, hi_i]`.
    fn box_sum(&self, ivs: &[DyadicInterval]) -> f64 {
        let d = self.dims.len();
        let mut corner = vec![0u64; d];
        let mut acc = 0.0;
        for mask in 0u32..(1 << d) {
            for i in 0..d {
                corner[i] = if mask >> i & 1 == 1 { ivs[i].lo() } else { ivs[i].hi() };
            }
            let v = self.at(&corner);
            if mask.count_ones() % 2 == 0 {
                acc += v;
            } else {
                acc -= v;
            }
        }
        acc
    }
}

/// `sum over interval tuples of |sum_{n in I_1 x ... x I_d} f_n|`.
fn tuple_abs_sum(grid: &PrefixGrid, families: &[Vec<DyadicInterval>]) -> f64 {
    let d = families.len();
    let mut idx = vec![0usize; d];
    let mut ivs: Vec<DyadicInterval> = families.iter().map(|f| f[0]).collect();
    let mut acc = CompensatedSum::new();
    loop {
        acc.add(grid.box_sum(&ivs).abs());
        let mut i = d;
        loop {
            if i == 0 {
                return acc.value();
            }
            i -= 1;
            if idx[i] + 1 < families[i].len() {
                idx[i] += 1;
                ivs[i] = families[i][idx[i]];
                break;
            }
            idx[i] = 0;
            ivs[i] = families[i][0];
        }
    }
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).collect::<CompensatedSum>().value() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// How interval sums are weighted in the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Bound `g(2^{sum s}) prod s_i 2^{sum s}`.
    Plain,
    /// Single index, bound `g(2^s) s 2^{r s}`.
    Power(u32),
}

/// Estimate of the interval-tuple moment sum against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub s: Vec<u32>,
    pub lhs: f64,
    pub se: f64,
    pub bound: f64,
    pub ratio: f64,
    pub samples: u64,
}

const MAX_GRID: u64 = 1 << 22;
const MAX_TUPLES: u64 = 10_000_000;

struct Setup {
    n_max: Vec<u64>,
    families: Vec<Vec<DyadicInterval>>,
    sum_s: u32,
    prod_s: f64,
    samples: u64,
}

fn setup(fam: &Family, s: &[u32], weighting: Weighting, samples: u64) -> Result<Setup> {
    fam.check_dim(s.len())?;
    if matches!(weighting, Weighting::Power(_)) && s.len() != 1 {
        return Err(Error::domain("power weighting takes a single s"));
    }
    if let Weighting::Power(0) = weighting {
        return Err(Error::domain("power weighting needs r >= 1"));
    }
    if s.iter().any(|&v| v == 0 || v > MAX_S) {
        return Err(Error::domain(format!("each s must lie in 1..={MAX_S}")));
    }
    let sum_s: u32 = s.iter().sum();
    if sum_s > 22 || (matches!(fam, Family::Lattice { .. }) && sum_s > 5) {
        return Err(Error::capability("index grid too large; lower s"));
    }
    let n_max: Vec<u64> = s.iter().map(|&v| (1u64 << v) - 1).collect();
    let grid: u64 = n_max.iter().map(|v| v + 1).product();
    let tuples: u64 = s.iter().map(|&v| dyadic_family_len(v)).product();
    if grid > MAX_GRID || tuples > MAX_TUPLES {
        return Err(Error::capability("too many interval tuples; lower s"));
    }
    let families = s.iter().map(|&v| dyadic_family(v)).collect::<Result<_>>()?;
    let samples = if fam.is_deterministic() { 1 } else { samples.max(1) };
    Ok(Setup {
        n_max,
        families,
        sum_s,
        prod_s: s.iter().map(|&v| v as f64).product(),
        samples,
    })
}

fn per_sample<T: Send>(
    fam: &Family,
    st: &Setup,
    seed: u64,
    f: impl Fn(&PrefixGrid, f64) -> T + Sync + Send,
) -> Vec<T> {
    map_range(0, st.samples as i64 - 1, |i| {
        let mut rng = sample_rng(seed, i as u64);
        let vals = fam.realize(&st.n_max, &mut rng);
        let grid = PrefixGrid::new(&st.n_max, &vals);
        let v = tuple_abs_sum(&grid, &st.families);
        f(&grid, v)
    })
}

fn moment_bound(fam: &Family, st: &Setup, weighting: Weighting) -> f64 {
    let two_s = 2f64.powi(st.sum_s as i32);
    match weighting {
        Weighting::Plain => fam.g(two_s) * st.prod_s * two_s,
        Weighting::Power(r) => fam.g(two_s) * st.prod_s * 2f64.powi((r * st.sum_s) as i32),
    }
}

/// Estimate `sum over tuples of E|sum_{n in I} f_n|` and compare it with the
/// bound for the chosen weighting.
pub fn moment_sum_check(fam: &Family, s: &[u32], weighting: Weighting, samples: u64, seed: u64) -> Result<MomentReport> {
    let st = setup(fam, s, weighting, samples)?;
    let values = per_sample(fam, &st, seed, |_, v| v);
    let (lhs, se) = mean_se(&values);
    let bound = moment_bound(fam, &st, weighting);
    Ok(MomentReport {
        s: s.to_vec(),
        lhs,
        se,
        bound,
        ratio: lhs / bound,
        samples: st.samples,
    })
}

/// Sampled size of the exceptional set and the pointwise prefix bound off it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalReport {
    pub s: Vec<u32>,
    pub eta: f64,
    pub threshold: f64,
    /// Fraction of samples in the exceptional set.
    pub measure: f64,
    pub se: f64,
    /// `(prod s_i)^{-1-eta}`.
    pub allowed: f64,
    /// `measure <= allowed + 3 se`.
    pub within: bool,
    /// Largest `|sum_{n <= N} f_n| / threshold` over samples off the set.
    pub max_prefix_ratio: f64,
    pub samples: u64,
}

/// Chebyshev-thresholded exceptional set: samples whose tuple sum reaches
/// `g(2^{sum s}) (prod s_i)^{2+eta} 2^{sum s}` (or `2^{r s}` for the power
/// weighting). Off the set, every prefix sum over `N_i < 2^{s_i}` is checked
/// against the threshold through its dyadic covering.
pub fn exceptional_set_estimate(
    fam: &Family,
    s: &[u32],
    weighting: Weighting,
    eta: f64,
    samples: u64,
    seed: u64,
) -> Result<ExceptionalReport> {
    if !(eta > 0.0) {
        return Err(Error::domain("eta must be positive"));
    }
    let st = setup(fam, s, weighting, samples)?;
    let threshold = moment_bound(fam, &st, weighting) * st.prod_s.powf(1.0 + eta);
    let d = s.len();
    let rows = per_sample(fam, &st, seed, |grid, v| -> Result<(f64, f64)> {
        if v >= threshold {
            return Ok((1.0, 0.0));
        }
        let covers: Vec<Vec<Vec<DyadicInterval>>> = (0..d)
            .map(|i| (0..=st.n_max[i]).map(|k| cover_prefix(k, s[i])).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        let lo = vec![0i64; d];
        let hi: Vec<i64> = st.n_max.iter().map(|&v| v as i64).collect();
        let mut failure = None;
        crate::par::for_each_point(&lo, &hi, |n| {
            let n_u: Vec<u64> = n.iter().map(|&v| v as u64).collect();
            let direct = grid.at(&n_u).abs();
            let parts: Vec<&Vec<DyadicInterval>> = (0..d).map(|i| &covers[i][n[i] as usize]).collect();
            let covered = if parts.iter().any(|p| p.is_empty()) {
                0.0
            } else {
                tuple_abs_sum(grid, &parts.iter().map(|p| (*p).clone()).collect::<Vec<_>>())
            };
            if direct > covered + 1e-9 * (1.0 + covered) || covered > v + 1e-9 * (1.0 + v) {
                failure = Some(n_u.clone());
            }
            worst = worst.max(direct / threshold);
        });
        if let Some(n) = failure {
            return Err(Error::Internal(format!("covering bound fails at N = {n:?}")));
        }
        Ok((0.0, worst))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let flags: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let (measure, se) = mean_se(&flags);
    let allowed = st.prod_s.powf(-1.0 - eta);
    Ok(ExceptionalReport {
        s: s.to_vec(),
        eta,
        threshold,
        measure,
        se,
        allowed,
        within: measure <= allowed + 3.0 * se,
        max_prefix_ratio: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        samples: st.samples,
    })
}

/// Sample mean of a lattice-point count against its envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanCountReport {
    pub label: String,
    pub mean: f64,
    pub se: f64,
    pub envelope: f64,
    /// Exact mean: the count's expectation is the region's volume.
    pub expected: f64,
    pub within: bool,
    pub samples: u64,
}

/// Points of `{(p + alpha . q, q)}` with positive first coordinate in tile
/// `tile` of the H2 covering, for uniform `alpha` in `[0,1)^n`. One report per
/// tile, with envelope `5 eps`. For each `q` the first coordinate ranges
/// over `(0, min(R, eps / prod |q_i|)]`, which gives the exact mean.
pub fn mean_count_h2_tiles(domain: &SlabDomainH2, samples: u64, seed: u64) -> Result<Vec<MeanCountReport>> {
    let tiling = tessellate_h2(domain)?;
    let n = domain.n();
    let samples = samples.max(1);
    let mut reports = Vec::with_capacity(tiling.tiles.len());
    for (idx, tile) in tiling.tiles.iter().enumerate() {
        // Integer ranges of |q_i| meeting the tile's shell, with signs.
        let mut lo = Vec::with_capacity(n);
        let mut hi = Vec::with_capacity(n);
        for i in 0..n {
            let b = tile.grid[i];
            let inner = if b == 0 { 1.0 } else { (b as f64).exp() };
            let outer = if b == tiling.grid_max[i] { domain.t[i] } else { ((b + 1) as f64).exp() };
            let (a, z) = (inner.floor().max(1.0) as i64, outer.floor() as i64);
            if tile.orthant >> i & 1 == 1 {
                lo.push(-z);
                hi.push(-a);
            } else {
                lo.push(a);
                hi.push(z);
            }
        }
        let counts = map_range(0, samples as i64 - 1, |k| {
            let mut rng = sample_rng(seed, k as u64);
            let alpha: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut count = 0u64;
            let mut x = vec![0.0; n + 1];
            crate::par::for_each_point(&lo, &hi, |q| {
                let dot: f64 = q.iter().zip(&alpha).map(|(&qi, a)| qi as f64 * a).sum();
                let first = (-dot).floor() as i64 + 1;
                let last = (domain.r - dot).floor() as i64;
                for p in first..=last {
                    x[0] = p as f64 + dot;
                    for i in 0..n {
                        x[i + 1] = q[i] as f64;
                    }
                    if let Some(hit) = tiling.member_tile(&x) {
                        if hit.tile == idx && !hit.reflected {
                            count += 1;
                        }
                    }
                }
            });
            count as f64
        });
        let (mean, se) = mean_se(&counts);
        let envelope = 5.0 * domain.eps;
        let mut expected = 0.0;
        let mut x = vec![0.0; n + 1];
        crate::par::for_each_point(&lo, &hi, |q| {
            let prod: f64 = q.iter().map(|v| v.unsigned_abs() as f64).product();
            let len = domain.r.min(domain.eps / prod);
            x[0] = len / 2.0;
            for i in 0..n {
                x[i + 1] = q[i] as f64;
            }
            if tiling.member_tile(&x).is_some_and(|h| h.tile == idx) {
                expected += len;
            }
        });
        reports.push(MeanCountReport {
            label: format!("h2 tile {:?} orthant {}", tile.grid, tile.orthant),
            mean,
            se,
            envelope,
            expected,
            within: mean <= envelope,
            samples,
        });
    }
    Ok(reports)
}

/// Points of `{(p + q alpha, q)}` in `H1 x [1, T']` for uniform `alpha` in
/// `[0,1)^n`, against `5 log(R^n / eps)^{n-1} eps T'`. The exact mean is
/// `floor(T') vol(H1)` with `vol(H1) = 2^n eps sum_{k<n} log(R^n / eps)^k / k!`.
pub fn mean_count_h1_slab(body: &StarBodyH1, t_prime: f64, samples: u64, seed: u64) -> Result<MeanCountReport> {
    if !(t_prime >= 1.0) {
        return Err(Error::domain("T' must be at least 1"));
    }
    let n = body.m;
    let log_ratio = n as f64 * body.r.ln() - body.eps.ln();
    if log_ratio <= 0.0 {
        return Err(Error::precondition("envelope needs R^n > eps"));
    }
    let samples = samples.max(1);
    let q_max = t_prime.floor() as i64;
    let counts = map_range(0, samples as i64 - 1, |k| {
        let mut rng = sample_rng(seed, k as u64);
        let alpha: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut count = 0u64;
        for q in 1..=q_max {
            let centres: Vec<f64> = alpha.iter().map(|a| q as f64 * a).collect();
            let lo: Vec<i64> = centres.iter().map(|c| (-body.r - c).ceil() as i64).collect();
            let hi: Vec<i64> = centres.iter().map(|c| (body.r - c).floor() as i64).collect();
            crate::par::for_each_point(&lo, &hi, |p| {
                let x: Vec<f64> = p.iter().zip(&centres).map(|(&pi, c)| pi as f64 + c).collect();
                if body.contains(&x) {
                    count += 1;
                }
            });
        }
        count as f64
    });
    let (mean, se) = mean_se(&counts);
    let envelope = 5.0 * log_ratio.powi(n as i32 - 1) * body.eps * t_prime;
    let mut term = 1.0;
    let mut series = 0.0;
    for k in 0..n {
        if k > 0 {
            term *= log_ratio / k as f64;
        }
        series += term;
    }
    let expected = q_max as f64 * 2f64.powi(n as i32) * body.eps * series;
    Ok(MeanCountReport {
        label: format!("h1 slab n={n} eps={} T'={t_prime}", body.eps),
        mean,
        se,
        envelope,
        expected,
        within: mean <= envelope,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn set_of(ivs: &[DyadicInterval]) -> Option<BTreeSet<u64>> {
        let mut out = BTreeSet::new();
        for iv in ivs {
            for v in iv.lo() + 1..=iv.hi() {
                if !out.insert(v) {
                    return None;
                }
            }
        }
        Some(out)
    }

    #[test]
    fn family_examples() {
        assert_eq!(dyadic_family(1).unwrap(), vec![DyadicInterval { a: 0, b: 0 }]);
        let f2: Vec<(u64, u64)> = dyadic_family(2).unwrap().iter().map(|i| (i.lo(), i.hi())).collect();
        assert_eq!(f2, vec![(0, 1), (1, 2), (2, 3), (0, 2)]);
        assert_eq!(dyadic_family(3).unwrap().len(), 11);
        assert!(dyadic_family(0).is_err());
        for s in 1..=20 {
            assert_eq!(dyadic_family(s).unwrap().len() as u64, dyadic_family_len(s));
        }
    }

    #[test]
    fn cover_examples() {
        let c = |k, s| -> Vec<(u64, u64)> { cover_prefix(k, s).unwrap().iter().map(|i| (i.lo(), i.hi())).collect() };
        assert_eq!(c(3, 2), vec![(0, 2), (2, 3)]);
        assert_eq!(c(5, 3), vec![(0, 4), (4, 5)]);
        assert_eq!(c(1, 4), vec![(0, 1)]);
        assert!(cover_prefix(4, 2).is_err());
    }

    #[test]
    fn cover_exhaustive_small() {
        for s in 1..=8 {
            let fam: BTreeSet<DyadicInterval> = dyadic_family(s).unwrap().into_iter().collect();
            for k in 0..(1u64 << s) {
                let cov = cover_prefix(k, s).unwrap();
                assert!(cov.len() <= s as usize);
                assert!(cov.iter().all(|i| fam.contains(i)));
                assert_eq!(set_of(&cov).unwrap(), (1..=k).collect());
            }
        }
    }

    #[test]
    fn moment_examples() {
        let r = moment_sum_check(&Family::Const, &[2], Weighting::Plain, 10, 1).unwrap();
        assert_eq!((r.lhs, r.bound, r.se), (5.0, 8.0, 0.0));
        assert!((r.ratio - 0.625).abs() < 1e-15);
        let r = moment_sum_check(&Family::Const, &[3], Weighting::Plain, 10, 1).unwrap();
        assert_eq!(r.lhs, 17.0);
        let r = moment_sum_check(&Family::Const, &[1, 1], Weighting::Plain, 10, 1).unwrap();
        assert_eq!((r.lhs, r.bound), (1.0, 4.0));
        let mut prev = f64::INFINITY;
        for s in 2..=10 {
            let r = moment_sum_check(&Family::Alt, &[s], Weighting::Plain, 1, 1).unwrap();
            assert_eq!(r.lhs, (1u64 << s) as f64 - 1.0);
            assert!(r.ratio < prev);
            prev = r.ratio;
        }
    }

    #[test]
    fn power_weighting_bounded() {
        for r in 1..=3 {
            for s in 1..=10 {
                let rep = moment_sum_check(&Family::PowerDiff { r }, &[s], Weighting::Power(r), 1, 0).unwrap();
                assert!(rep.ratio <= 2.0f64.powi(r as i32), "r={r} s={s} ratio={}", rep.ratio);
            }
        }
    }

    #[test]
    fn exceptional_examples() {
        let r = exceptional_set_estimate(&Family::Zero, &[4], Weighting::Plain, 0.5, 100, 3).unwrap();
        assert_eq!(r.measure, 0.0);
        let r = exceptional_set_estimate(&Family::Const, &[3], Weighting::Plain, 0.5, 1, 3).unwrap();
        assert!((r.threshold - 3f64.powf(2.5) * 8.0).abs() < 1e-9);
        assert_eq!(r.measure, 0.0);
        assert!(r.max_prefix_ratio <= 1.0);
        let r = exceptional_set_estimate(&Family::Rademacher, &[3, 2], Weighting::Plain, 0.5, 200, 9).unwrap();
        assert!(r.within);
    }

    #[test]
    fn sampling_is_seeded() {
        let a = moment_sum_check(&Family::Rademacher, &[5], Weighting::Plain, 64, 42).unwrap();
        let b = moment_sum_check(&Family::Rademacher, &[5], Weighting::Plain, 64, 42).unwrap();
        assert_eq!(a, b);
        let c = moment_sum_check(&Family::Rademacher, &[5], Weighting::Plain, 64, 43).unwrap();
        assert_ne!(a.lhs, c.lhs);
        let lat = moment_sum_check(&Family::Lattice { eps: 0.25 }, &[3], Weighting::Plain, 200, 1).unwrap();
        assert!(lat.ratio < 1.0 && lat.se > 0.0);
    }

    #[test]
    fn mean_counts_within_envelopes() {
        let dom = SlabDomainH2::new(0.05, 0.5, vec![20.0, 20.0]).unwrap();
        for rep in mean_count_h2_tiles(&dom, 200, 5).unwrap() {
            assert!(rep.within, "{rep:?}");
        }
        let body = StarBodyH1::new(2, 0.0001, 0.5).unwrap();
        let rep = mean_count_h1_slab(&body, 400.0, 300, 5).unwrap();
        assert!(rep.within && rep.mean > 0.0, "{rep:?}");
        assert!((rep.mean - rep.expected).abs() <= 4.0 * rep.se, "{rep:?}");
    }

    #[test]
    fn mean_counts_match_volume() {
        let dom = SlabDomainH2::new(0.1, 0.5, vec![30.0]).unwrap();
        let reps = mean_count_h2_tiles(&dom, 400, 9).unwrap();
        for rep in &reps {
            assert!((rep.mean - rep.expected).abs() <= 4.0 * rep.se + 1e-12, "{rep:?}");
        }
        let total: f64 = reps.iter().map(|r| r.expected).sum();
        let direct: f64 = (1..=30).map(|q| 0.5f64.min(0.1 / q as f64)).sum::<f64>() * 2.0;
        assert!((total - direct).abs() < 1e-12);
        let body = StarBodyH1::new(1, 0.01, 0.5).unwrap();
        let rep = mean_count_h1_slab(&body, 100.0, 400, 9).unwrap();
        assert!((rep.expected - 2.0).abs() < 1e-12);
    }

    #[test]
    fn family_parsing() {
        assert_eq!(Family::parse("powerdiff:2").unwrap(), Family::PowerDiff { r: 2 });
        assert_eq!(Family::parse("lattice").unwrap(), Family::Lattice { eps: 0.25 });
        assert!(Family::parse("nope").is_err());
    }

    proptest! {
        #[test]
        fn cover_is_exact(s in 1u32..=30, k in any::<u64>()) {
            let k = k % (1u64 << s);
            let cov = cover_prefix(k, s).unwrap();
            prop_assert!(cov.len() <= s as usize);
            let mut c = 0;
            for iv in &cov {
                prop_assert_eq!(iv.lo(), c);
                prop_assert!(iv.hi() < 1u64 << s);
                c = iv.hi();
            }
            prop_assert_eq!(c, k);
        }
    }
}
