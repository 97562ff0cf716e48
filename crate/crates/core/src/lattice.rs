//! Lattice bases, LLL reduction, exact successive minima for small
//! dimension and the support-shaping transforms applied to minima profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::MatrixL;

/// Largest dimension accepted by [`exact_successive_minima`].
pub const MAX_EXACT_DIM: usize = 8;

/// Lovasz parameter used by [`lll_reduce`].
pub const LLL_DELTA: f64 = 0.99;

/// Enumeration stops with a capability error beyond this many points.
pub const ENUM_POINT_CAP: usize = 20_000_000;

/// Which of the two block layouts to assemble from a matrix `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Columns of `[[I_m, L], [0, I_n]]`: points `(L q + p, q)`.
    Upper,
    /// The same layout built from the transpose of `L`.
    Dual,
}

/// A full-rank lattice in `R^d` given by basis columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeBasis {
    /// `cols[j]` is the `j`-th basis vector.
    pub cols: Vec<Vec<f64>>,
}

impl LatticeBasis {
    pub fn from_columns(cols: Vec<Vec<f64>>) -> Result<Self> {
        let d = cols.len();
        if d == 0 || cols.iter().any(|c| c.len() != d) {
            return Err(Error::domain("basis must be a nonempty square matrix"));
        }
        if cols.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::domain("non-finite basis entry"));
        }
        Ok(Self { cols })
    }

    pub fn dim(&self) -> usize {
        self.cols.len()
    }

    /// `sum_j coeffs[j] * cols[j]`.
    pub fn vector(&self, coeffs: &[i64]) -> Vec<f64> {
        let d = self.dim();
        let mut v = vec![0.0; d];
        for (c, col) in coeffs.iter().zip(&self.cols) {
            if *c != 0 {
                let cf = *c as f64;
                for i in 0..d {
                    v[i] += cf * col[i];
                }
            }
        }
        v
    }

    /// Multiply coordinate `i` of every basis vector by `exp(exponents[i])`.
    pub fn scale_coordinates(&self, exponents: &[f64]) -> LatticeBasis {
        let factors: Vec<f64> = exponents.iter().map(|e| e.exp()).collect();
        self.scale_by(&factors)
    }

    /// Multiply coordinate `i` of every basis vector by `factors[i]`.
    pub fn scale_by(&self, factors: &[f64]) -> LatticeBasis {
        let cols = self
            .cols
            .iter()
            .map(|c| c.iter().zip(factors).map(|(x, f)| x * f).collect())
            .collect();
        LatticeBasis { cols }
    }

    /// Permute coordinates: coordinate `i` moves to position `perm[i]`.
    pub fn permute_coordinates(&self, perm: &[usize]) -> LatticeBasis {
        let cols = self
            .cols
            .iter()
            .map(|c| {
                let mut out = vec![0.0; c.len()];
                for (i, x) in c.iter().enumerate() {
                    out[perm[i]] = *x;
                }
                out
            })
            .collect();
        LatticeBasis { cols }
    }

    /// Absolute value of the determinant.
    pub fn covolume(&self) -> f64 {
        let d = self.dim();
        let mut a: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| self.cols[j][i]).collect()).collect();
        let mut det = 1.0;
        for k in 0..d {
            let p = (k..d)
                .max_by(|&x, &y| a[x][k].abs().total_cmp(&a[y][k].abs()))
                .unwrap();
            if a[p][k] == 0.0 {
                return 0.0;
            }
            if p != k {
                a.swap(p, k);
            }
            det *= a[k][k];
            for i in k + 1..d {
                let f = a[i][k] / a[k][k];
                for j in k..d {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
        det.abs()
    }

    /// True when every basis vector has zeros below its own index.
    pub fn is_upper_triangular(&self) -> bool {
        self.cols
            .iter()
            .enumerate()
            .all(|(j, c)| c.iter().skip(j + 1).all(|x| *x == 0.0) && c[j] != 0.0)
    }
}

/// Basis of `Lambda_L` in the requested layout.
///
/// For an `m x n` matrix the upper layout lives in `R^{m+n}` with points
/// `(L q + p, q)`; the dual layout uses the transpose and has points
/// `(L^t p + q, p)`.
pub fn assemble_lattice(l: &MatrixL, orientation: Orientation) -> LatticeBasis {
    let l = match orientation {
        Orientation::Upper => l.clone(),
        Orientation::Dual => l.transpose(),
    };
    let (m, n) = (l.rows(), l.cols());
    let d = m + n;
    let mut cols = Vec::with_capacity(d);
    for j in 0..m {
        let mut c = vec![0.0; d];
        c[j] = 1.0;
        cols.push(c);
    }
    for j in 0..n {
        let mut c = vec![0.0; d];
        for (i, ci) in c.iter_mut().enumerate().take(m) {
            *ci = l.get(i, j);
        }
        c[m + j] = 1.0;
        cols.push(c);
    }
    LatticeBasis { cols }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Gram-Schmidt data: `mu[i][j]` for `j < i` and squared norms of `b_i^*`.
struct GramSchmidt {
    mu: Vec<Vec<f64>>,
    bstar_sq: Vec<f64>,
}

fn gram_schmidt(cols: &[Vec<f64>]) -> GramSchmidt {
    let d = cols.len();
    let mut bstar: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut mu = vec![vec![0.0; d]; d];
    let mut bstar_sq = vec![0.0; d];
    for i in 0..d {
        let mut v = cols[i].clone();
        for j in 0..i {
            mu[i][j] = dot(&cols[i], &bstar[j]) / bstar_sq[j];
            for (vk, bk) in v.iter_mut().zip(&bstar[j]) {
                *vk -= mu[i][j] * bk;
            }
        }
        bstar_sq[i] = dot(&v, &v);
        bstar.push(v);
    }
    GramSchmidt { mu, bstar_sq }
}

/// An LLL-reduced basis together with the integer change of basis.
#[derive(Debug, Clone)]
pub struct Reduced {
    pub basis: LatticeBasis,
    /// `transform[j]` holds the coefficients of reduced vector `j` in the input basis.
    pub transform: Vec<Vec<i64>>,
}

impl Reduced {
    /// Coefficients in the input basis of `sum_j c[j] * reduced_j`.
    pub fn input_coeffs(&self, c: &[i64]) -> Vec<i64> {
        let d = c.len();
        let mut out = vec![0i64; d];
        for (cj, tj) in c.iter().zip(&self.transform) {
            if *cj != 0 {
                for k in 0..d {
                    out[k] += cj * tj[k];
                }
            }
        }
        out
    }
}

/// LLL reduction with parameter [`LLL_DELTA`].
pub fn lll_reduce(basis: &LatticeBasis) -> Reduced {
    let d = basis.dim();
    let mut b = basis.cols.clone();
    let mut u: Vec<Vec<i64>> = (0..d)
        .map(|j| (0..d).map(|k| i64::from(j == k)).collect())
        .collect();
    let mut k = 1;
    let mut guard = 0usize;
    while k < d && guard < 100_000 {
        guard += 1;
        for j in (0..k).rev() {
            let gs = gram_schmidt(&b);
            let r = gs.mu[k][j].round();
            if r != 0.0 {
                let bj = b[j].clone();
                for (x, y) in b[k].iter_mut().zip(&bj) {
                    *x -= r * y;
                }
                let ri = r as i64;
                let uj = u[j].clone();
                for (x, y) in u[k].iter_mut().zip(&uj) {
                    *x -= ri * y;
                }
            }
        }
        let gs = gram_schmidt(&b);
        let lhs = gs.bstar_sq[k];
        let rhs = (LLL_DELTA - gs.mu[k][k - 1].powi(2)) * gs.bstar_sq[k - 1];
        if lhs >= rhs {
            k += 1;
        } else {
            b.swap(k, k - 1);
            u.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    Reduced {
        basis: LatticeBasis { cols: b },
        transform: u,
    }
}

/// Visit every nonzero lattice vector of Euclidean length at most `radius`.
///
/// The callback receives coefficients in the given basis and the vector.
/// Returns the number of visited points, or a capability error past
/// [`ENUM_POINT_CAP`].
pub fn enumerate_ball(
    basis: &LatticeBasis,
    radius: f64,
    mut visit: impl FnMut(&[i64], &[f64]),
) -> Result<usize> {
    let d = basis.dim();
    let gs = gram_schmidt(&basis.cols);
    let r2 = radius * radius * (1.0 + 1e-9) + 1e-300;
    let mut coeffs = vec![0i64; d];
    let mut count = 0usize;
    let mut overflow = false;
    fn rec(
        level: usize,
        partial: f64,
        gs: &GramSchmidt,
        basis: &LatticeBasis,
        r2: f64,
        coeffs: &mut Vec<i64>,
        count: &mut usize,
        overflow: &mut bool,
        visit: &mut dyn FnMut(&[i64], &[f64]),
    ) {
        if *overflow {
            return;
        }
        let d = coeffs.len();
        let i = level;
        let center: f64 = -(i + 1..d).map(|j| gs.mu[j][i] * coeffs[j] as f64).sum::<f64>();
        let room = (r2 - partial).max(0.0);
        let half = (room / gs.bstar_sq[i]).sqrt();
        let lo = (center - half).ceil() as i64;
        let hi = (center + half).floor() as i64;
        for x in lo..=hi {
            let t = x as f64 - center;
            let p = partial + t * t * gs.bstar_sq[i];
            if p > r2 {
                continue;
            }
            coeffs[i] = x;
            if i == 0 {
                if coeffs.iter().any(|&c| c != 0) {
                    *count += 1;
                    if *count > ENUM_POINT_CAP {
                        *overflow = true;
                        return;
                    }
                    let v = basis.vector(coeffs);
                    visit(coeffs, &v);
                }
            } else {
                rec(i - 1, p, gs, basis, r2, coeffs, count, overflow, visit);
            }
        }
        coeffs[i] = 0;
    }
    rec(
        d - 1,
        0.0,
        &gs,
        basis,
        r2,
        &mut coeffs,
        &mut count,
        &mut overflow,
        &mut visit,
    );
    if overflow {
        return Err(Error::capability(format!(
            "lattice enumeration exceeded {ENUM_POINT_CAP} points"
        )));
    }
    Ok(count)
}

/// Successive minima with realizing vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaProfile {
    pub minima: Vec<f64>,
    pub realizers: Vec<Vec<f64>>,
    /// Integer coefficients of each realizer in the input basis.
    pub coeffs: Vec<Vec<i64>>,
    /// Enumeration radius that certified the result.
    pub radius: f64,
}

/// Exact successive minima in the Euclidean norm for `d <= 8`.
///
/// After LLL the enumeration radius starts at `d` times the shortest reduced
/// vector and doubles at most three times; it is capped at the longest
/// reduced vector, which always suffices.
pub fn exact_successive_minima(basis: &LatticeBasis) -> Result<MinimaProfile> {
    let d = basis.dim();
    if d > MAX_EXACT_DIM {
        return Err(Error::capability(format!(
            "exact minima limited to dimension {MAX_EXACT_DIM}, got {d}"
        )));
    }
    if basis.covolume() == 0.0 {
        return Err(Error::domain("basis is singular"));
    }
    let red = lll_reduce(basis);
    let lens: Vec<f64> = red.basis.cols.iter().map(|c| norm(c)).collect();
    let shortest = lens.iter().cloned().fold(f64::INFINITY, f64::min);
    let longest = lens.iter().cloned().fold(0.0, f64::max);
    let mut radius = d as f64 * shortest;
    for attempt in 0..4 {
        let capped = attempt == 3 || radius >= longest;
        let r = if capped { radius.min(longest) } else { radius };
        let r = if attempt == 3 { longest } else { r };
        if let Some(profile) = minima_within(&red, r)? {
            return Ok(profile);
        }
        radius *= 2.0;
    }
    Err(Error::Internal("minima enumeration failed at the covering radius".into()))
}

fn minima_within(red: &Reduced, radius: f64) -> Result<Option<MinimaProfile>> {
    let d = red.basis.dim();
    let mut pts: Vec<(f64, Vec<i64>)> = Vec::new();
    enumerate_ball(&red.basis, radius, |c, v| {
        // v and -v have the same length; keep one representative.
        let lead = c.iter().rev().find(|&&x| x != 0).copied().unwrap_or(0);
        if lead > 0 {
            pts.push((dot(v, v), c.to_vec()));
        }
    })?;
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut chosen: Vec<Vec<i64>> = Vec::new();
    for (_, c) in &pts {
        let mut trial = chosen.clone();
        trial.push(c.clone());
        if integer_rank(&trial) == trial.len() {
            chosen = trial;
            if chosen.len() == d {
                break;
            }
        }
    }
    if chosen.len() < d {
        return Ok(None);
    }
    let realizers: Vec<Vec<f64>> = chosen.iter().map(|c| red.basis.vector(c)).collect();
    let minima = realizers.iter().map(|v| norm(v)).collect();
    let coeffs = chosen.iter().map(|c| red.input_coeffs(c)).collect();
    Ok(Some(MinimaProfile {
        minima,
        realizers,
        coeffs,
        radius,
    }))
}

/// Rank of a list of integer vectors, by fraction-free elimination.
pub fn integer_rank(rows: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let (nr, nc) = (a.len(), a.first().map_or(0, Vec::len));
    let mut rank = 0;
    for col in 0..nc {
        let Some(p) = (rank..nr).find(|&i| a[i][col] != 0) else {
            continue;
        };
        a.swap(rank, p);
        for i in rank + 1..nr {
            if a[i][col] != 0 {
                let (x, y) = (a[rank][col], a[i][col]);
                let g = gcd_i128(x, y);
                let (fx, fy) = (y / g, x / g);
                for j in col..nc {
                    a[i][j] = a[i][j] * fy - a[rank][j] * fx;
                }
                let rg = a[i].iter().fold(0i128, |acc, &v| gcd_i128(acc, v));
                if rg > 1 {
                    for v in a[i].iter_mut() {
                        *v /= rg;
                    }
                }
            }
        }
        rank += 1;
    }
    rank
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Determinant of a square integer matrix by Bareiss elimination.
pub fn integer_det(rows: &[Vec<i64>]) -> i128 {
    let n = rows.len();
    let mut a: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&i| a[i][k] != 0) else {
                return 0;
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a % b);
        (g, y, x - (a / b) * y)
    }
}

/// Complete the realizers of a minima profile to a lattice basis whose
/// leading subsets span the same subspaces as the leading realizers.
///
/// Returns the new basis vectors and their integer coefficients in the input
/// basis; the coefficient matrix is unimodular. Each vector is size-reduced
/// against the earlier ones.
pub fn workable_basis(
    basis: &LatticeBasis,
    profile: &MinimaProfile,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<i64>>)> {
    let d = basis.dim();
    if integer_det(&profile.coeffs).abs() == 1 {
        return Ok((profile.realizers.clone(), profile.coeffs.clone()));
    }
    // Row-reduce C (columns = realizer coefficients) to upper triangular
    // form V C = H, accumulating U = V^{-1} by the inverse column moves.
    let mut c: Vec<Vec<i64>> = (0..d).map(|i| (0..d).map(|j| profile.coeffs[j][i]).collect()).collect();
    let mut u: Vec<Vec<i64>> = (0..d).map(|i| (0..d).map(|j| i64::from(i == j)).collect()).collect();
    for s in 0..d {
        for j in s + 1..d {
            if c[j][s] == 0 {
                continue;
            }
            let (x, y) = (c[s][s], c[j][s]);
            let (g, a, b) = ext_gcd(x, y);
            let (cc, dd) = (-y / g, x / g);
            for k in 0..d {
                let (ri, rj) = (c[s][k], c[j][k]);
                c[s][k] = a * ri + b * rj;
                c[j][k] = cc * ri + dd * rj;
            }
            for row in u.iter_mut() {
                let (ui, uj) = (row[s], row[j]);
                row[s] = dd * ui - cc * uj;
                row[j] = -b * ui + a * uj;
            }
        }
        if c[s][s] == 0 {
            return Err(Error::Internal("realizers are linearly dependent".into()));
        }
    }
    let mut coeffs: Vec<Vec<i64>> = (0..d).map(|j| (0..d).map(|i| u[i][j]).collect()).collect();
    let mut vecs: Vec<Vec<f64>> = coeffs.iter().map(|c| basis.vector(c)).collect();
    for s in 1..d {
        for j in (0..s).rev() {
            let gs = gram_schmidt(&vecs);
            let r = gs.mu[s][j].round();
            if r != 0.0 {
                let ri = r as i64;
                let (vj, cj) = (vecs[j].clone(), coeffs[j].clone());
                for (x, y) in vecs[s].iter_mut().zip(&vj) {
                    *x -= r * y;
                }
                for (x, y) in coeffs[s].iter_mut().zip(&cj) {
                    *x -= ri * y;
                }
            }
        }
    }
    Ok((vecs, coeffs))
}

/// Output of [`support_monotone_basis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneBasis {
    pub vectors: Vec<Vec<f64>>,
    /// `multipliers[s]` is the integer added times the previous output; 0 for `s = 0`.
    pub multipliers: Vec<i64>,
    /// Row `s`: coefficients of output `s` in terms of the inputs.
    pub transform: Vec<Vec<i64>>,
    pub supports: Vec<Vec<usize>>,
}

/// Indices of the coordinates of `v` whose magnitude exceeds `tol`.
pub fn support_of(v: &[f64], tol: f64) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > tol)
        .map(|(i, _)| i)
        .collect()
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.contains(x))
}

fn support_tolerance(vectors: &[Vec<f64>]) -> f64 {
    let scale = vectors
        .iter()
        .flatten()
        .fold(0.0f64, |acc, x| acc.max(x.abs()));
    1e-10 * scale.max(1.0)
}

/// Replace `v_s` by `v_s + c_s w_{s-1}` with the least `c_s` in `0, 1, ..., d`
/// for which the support of the previous output is contained in the new one.
pub fn support_monotone_basis(vectors: &[Vec<f64>]) -> Result<MonotoneBasis> {
    let k = vectors.len();
    if k == 0 {
        return Err(Error::domain("no vectors given"));
    }
    let d = vectors[0].len();
    let tol = support_tolerance(vectors);
    let mut out: Vec<Vec<f64>> = vec![vectors[0].clone()];
    let mut multipliers = vec![0i64];
    let mut transform: Vec<Vec<i64>> = vec![(0..k).map(|j| i64::from(j == 0)).collect()];
    let mut supports = vec![support_of(&vectors[0], tol)];
    for s in 1..k {
        let prev = out[s - 1].clone();
        let prev_supp = supports[s - 1].clone();
        let mut found = None;
        for c in 0..=d as i64 {
            let cand: Vec<f64> = vectors[s]
                .iter()
                .zip(&prev)
                .map(|(a, b)| a + c as f64 * b)
                .collect();
            let supp = support_of(&cand, tol);
            if is_subset(&prev_supp, &supp) {
                found = Some((c, cand, supp));
                break;
            }
        }
        let Some((c, cand, supp)) = found else {
            return Err(Error::Internal(format!(
                "no multiplier among 0..={d} keeps supports nested at step {s}"
            )));
        };
        let mut row: Vec<i64> = transform[s - 1].iter().map(|x| c * x).collect();
        row[s] += 1;
        transform.push(row);
        out.push(cand);
        multipliers.push(c);
        supports.push(supp);
    }
    Ok(MonotoneBasis {
        vectors: out,
        multipliers,
        transform,
        supports,
    })
}

/// Permutation of the last `n` coordinates making nested supports
/// triangular in the `y` block.
///
/// `supports` are index sets in `0..m+n`; entry `j` of the result is the new
/// position (within `0..n`) of `y_j`. Coordinates first appearing in the
/// support of vector `s` take the next free positions, in index order.
pub fn support_triangular_permutation(
    supports: &[Vec<usize>],
    m: usize,
    n: usize,
) -> Result<Vec<usize>> {
    for w in supports.windows(2) {
        if !is_subset(&w[0], &w[1]) {
            return Err(Error::precondition("supports are not nested"));
        }
    }
    let mut perm = vec![usize::MAX; n];
    let mut next = 0;
    let mut ranks = Vec::with_capacity(supports.len());
    for supp in supports {
        let mut fresh: Vec<usize> = supp
            .iter()
            .filter(|&&i| i >= m && i < m + n && perm[i - m] == usize::MAX)
            .map(|&i| i - m)
            .collect();
        fresh.sort_unstable();
        for j in fresh {
            perm[j] = next;
            next += 1;
        }
        ranks.push(next);
    }
    for p in perm.iter_mut().filter(|p| **p == usize::MAX) {
        *p = next;
        next += 1;
    }
    for (supp, &r) in supports.iter().zip(&ranks) {
        if supp.iter().any(|&i| i >= m && i < m + n && perm[i - m] >= r) {
            return Err(Error::Internal("permuted supports are not triangular".into()));
        }
    }
    Ok(perm)
}

/// `1 + sum_s Q^s / (delta_1 ... delta_s)`.
pub fn davenport_rhs(q: f64, minima: &[f64]) -> f64 {
    let mut total = 1.0;
    let mut denom = 1.0;
    for (s, delta) in minima.iter().enumerate() {
        denom *= delta;
        total += q.powi(s as i32 + 1) / denom;
    }
    total
}

/// Number of lattice points (including 0) in the cube `[-q, q]^d`.
pub fn count_in_cube(basis: &LatticeBasis, q: f64) -> Result<usize> {
    let d = basis.dim();
    let lim = q * (1.0 + 1e-12);
    if basis.is_upper_triangular() {
        let mut count = 0usize;
        for_each_in_box_triangular(basis, &vec![-lim; d], &vec![lim; d], |_| count += 1)?;
        return Ok(count);
    }
    let red = lll_reduce(basis);
    let mut count = 1usize;
    enumerate_ball(&red.basis, q * (d as f64).sqrt(), |_, v| {
        if v.iter().all(|x| x.abs() <= lim) {
            count += 1;
        }
    })?;
    Ok(count)
}

/// Visit all points of an upper-triangular basis inside the box `[lo, hi]`.
///
/// Coordinate `i` of `sum_j c_j b_j` only involves `c_j` for `j >= i`, so
/// the coefficient ranges are found one coordinate at a time from the last.
pub fn for_each_in_box_triangular(
    basis: &LatticeBasis,
    lo: &[f64],
    hi: &[f64],
    mut visit: impl FnMut(&[i64]),
) -> Result<()> {
    if !basis.is_upper_triangular() {
        return Err(Error::domain("basis is not upper triangular"));
    }
    let d = basis.dim();
    let mut coeffs = vec![0i64; d];
    fn rec(
        i: usize,
        basis: &LatticeBasis,
        lo: &[f64],
        hi: &[f64],
        coeffs: &mut Vec<i64>,
        visit: &mut dyn FnMut(&[i64]),
    ) {
        let d = coeffs.len();
        let offset: f64 = (i + 1..d).map(|j| basis.cols[j][i] * coeffs[j] as f64).sum();
        let diag = basis.cols[i][i];
        let (a, b) = ((lo[i] - offset) / diag, (hi[i] - offset) / diag);
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        for x in a.ceil() as i64..=b.floor() as i64 {
            coeffs[i] = x;
            if i == 0 {
                visit(coeffs);
            } else {
                rec(i - 1, basis, lo, hi, coeffs, visit);
            }
        }
        coeffs[i] = 0;
    }
    rec(d - 1, basis, lo, hi, &mut coeffs, &mut visit);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(cols: &[&[f64]]) -> LatticeBasis {
        LatticeBasis::from_columns(cols.iter().map(|c| c.to_vec()).collect()).unwrap()
    }

    #[test]
    fn assembles_both_layouts() {
        let l = MatrixL::from_f64_rows(&[vec![0.3, 0.7]]).unwrap();
        let up = assemble_lattice(&l, Orientation::Upper);
        assert_eq!(up.cols, vec![vec![1.0, 0.0, 0.0], vec![0.3, 1.0, 0.0], vec![0.7, 0.0, 1.0]]);
        let dual = assemble_lattice(&l, Orientation::Dual);
        assert_eq!(dual.cols[2], vec![0.3, 0.7, 1.0]);
        assert!((up.covolume() - 1.0).abs() < 1e-12);
        assert!((dual.covolume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minima_examples() {
        let z2 = basis(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let p = exact_successive_minima(&z2).unwrap();
        assert_eq!(p.minima, vec![1.0, 1.0]);

        let skew = basis(&[&[2.0, 0.0], &[0.0, 0.5]]);
        let p = exact_successive_minima(&skew).unwrap();
        assert!((p.minima[0] - 0.5).abs() < 1e-12 && (p.minima[1] - 2.0).abs() < 1e-12);

        let l = MatrixL::from_f64_rows(&[vec![1.6180339887]]).unwrap();
        let p = exact_successive_minima(&assemble_lattice(&l, Orientation::Upper)).unwrap();
        assert!((p.minima[0] - 1.0).abs() < 1e-9);
        let second = (1.0f64 + 0.3819660113f64.powi(2)).sqrt();
        assert!((p.minima[1] - second).abs() < 1e-8, "{:?}", p.minima);
    }

    #[test]
    fn minima_rejects_large_dimension() {
        let cols: Vec<Vec<f64>> = (0..9)
            .map(|j| (0..9).map(|i| f64::from(u8::from(i == j))).collect())
            .collect();
        let err = exact_successive_minima(&LatticeBasis::from_columns(cols).unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn monotone_examples() {
        let out = support_monotone_basis(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(out.vectors, vec![vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(out.multipliers[1], 1);

        let out = support_monotone_basis(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(out.vectors, vec![vec![1.0, 1.0], vec![2.0, 1.0]]);

        let out = support_monotone_basis(&[vec![1.0, 0.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(out.vectors, vec![vec![1.0, 0.0], vec![2.0, 1.0]]);
        assert_eq!(out.multipliers[1], 0);
    }

    #[test]
    fn triangular_permutation_example() {
        let perm = support_triangular_permutation(&[vec![0, 2], vec![0, 1, 2]], 1, 2).unwrap();
        assert_eq!(perm, vec![1, 0]);
        assert!(support_triangular_permutation(&[vec![0, 2], vec![0, 1]], 1, 2).is_err());
    }

    #[test]
    fn davenport_examples() {
        assert_eq!(davenport_rhs(3.0, &[1.0, 1.0]), 13.0);
        assert_eq!(davenport_rhs(3.0, &[0.5, 2.0]), 16.0);
        assert_eq!(davenport_rhs(5.0, &[1.0]), 6.0);
    }

    #[test]
    fn cube_count_of_integer_lattice() {
        let z2 = basis(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(count_in_cube(&z2, 2.0).unwrap(), 25);
        let rotated = basis(&[&[1.0, 1.0], &[-1.0, 1.0]]);
        assert_eq!(count_in_cube(&rotated, 2.0).unwrap(), 13);
    }

    #[test]
    fn davenport_constant_grows_like_cube_volume() {
        // The cube has volume (2Q)^d, so Z^d needs a constant near 2^d.
        for d in 1..=4usize {
            let cols: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| f64::from(u8::from(i == j))).collect()).collect();
            let z = LatticeBasis::from_columns(cols).unwrap();
            let c = count_in_cube(&z, 20.0).unwrap() as f64 / davenport_rhs(20.0, &vec![1.0; d]);
            assert!(c > 0.9 * (1u32 << d) as f64 && c <= (1u32 << (d + 1)) as f64, "d={d} c={c}");
        }
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..60 {
            let m = rng.gen_range(1..=3usize);
            let n = rng.gen_range(1..=(4 - m));
            let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
            let d = m + n;
            let mut e: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mean = e.iter().sum::<f64>() / d as f64;
            e.iter_mut().for_each(|x| *x -= mean);
            let b = assemble_lattice(&MatrixL::from_f64_rows(&rows).unwrap(), Orientation::Upper).scale_coordinates(&e);
            let p = exact_successive_minima(&b).unwrap();
            let q = rng.gen_range(1..=20) as f64;
            let c = count_in_cube(&b, q).unwrap() as f64 / davenport_rhs(q, &p.minima);
            assert!(c <= (1u32 << (d + 1)) as f64, "d={d} q={q} c={c}");
        }
    }

    #[test]
    fn integer_helpers() {
        assert_eq!(integer_det(&[vec![2, 1], vec![1, 1]]), 1);
        assert_eq!(integer_det(&[vec![0, 1], vec![1, 0]]), -1);
        assert_eq!(integer_rank(&[vec![1, 2], vec![2, 4]]), 1);
        assert_eq!(integer_rank(&[vec![1, 2], vec![2, 5]]), 2);
    }

    #[test]
    fn completes_non_basis_realizers() {
        // Index-2 sublattice realizers in the checkerboard lattice D_4*.
        let mut cols: Vec<Vec<f64>> = (0..3)
            .map(|j| (0..4).map(|i| f64::from(u8::from(i == j))).collect())
            .collect();
        cols.push(vec![0.5, 0.5, 0.5, 0.5]);
        let b = LatticeBasis::from_columns(cols).unwrap();
        let coeffs = vec![
            vec![1, 0, 0, 0],
            vec![0, 1, 0, 0],
            vec![0, 0, 1, 0],
            vec![-1, -1, -1, 2],
        ];
        let realizers = coeffs.iter().map(|c| b.vector(c)).collect();
        let profile = MinimaProfile {
            minima: vec![1.0; 4],
            realizers,
            coeffs: coeffs.clone(),
            radius: 1.0,
        };
        assert_eq!(integer_det(&coeffs).abs(), 2);
        let (vecs, new_coeffs) = workable_basis(&b, &profile).unwrap();
        assert_eq!(integer_det(&new_coeffs).abs(), 1);
        for s in 0..4 {
            let mut rows: Vec<Vec<i64>> = coeffs[..=s].to_vec();
            rows.extend(new_coeffs[..=s].iter().cloned());
            assert_eq!(integer_rank(&rows), s + 1);
        }
        assert_eq!(vecs.len(), 4);
    }

    #[test]
    fn triangular_box_enumeration() {
        let l = MatrixL::from_f64_rows(&[vec![0.5]]).unwrap();
        let b = assemble_lattice(&l, Orientation::Upper);
        let mut pts = Vec::new();
        for_each_in_box_triangular(&b, &[-0.6, -1.0], &[0.6, 1.0], |c| pts.push(c.to_vec())).unwrap();
        // q = -1: x = p - 0.5 in [-0.6, 0.6] gives p = 0, 1; q = 0: p = 0; q = 1: p = -1, 0.
        assert_eq!(pts.len(), 5);
    }
}
