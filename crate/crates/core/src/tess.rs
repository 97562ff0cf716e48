//! Hyperbolic star bodies and their tessellations by diagonal maps.
//!
//! `H1` is `{x in R^m : prod |x_i| < eps, |x_i| <= R}`; `H2` is
//! `{x in R^{n+1} : prod |x_i| <= eps, |x_0| <= R, 1 <= |x_i| <= T_i}`.
//! The `plus` variants drop points with a vanishing coordinate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::geo_mean;

/// `{x in R^m : prod |x_i| < eps, max |x_i| <= r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarBodyH1 {
    pub m: usize,
    pub eps: f64,
    pub r: f64,
}

/// `{x in R^{n+1} : prod |x_i| <= eps, |x_0| <= r, 1 <= |x_i| <= t_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabDomainH2 {
    pub eps: f64,
    pub r: f64,
    pub t: Vec<f64>,
}

impl StarBodyH1 {
    pub fn new(m: usize, eps: f64, r: f64) -> Result<Self> {
        if m == 0 || !(eps > 0.0 && eps.is_finite()) || !(r > 0.0 && r.is_finite()) {
            return Err(Error::domain("H1 needs m >= 1 and positive finite eps, R"));
        }
        Ok(Self { m, eps, r })
    }

    /// Strict product condition, sup-norm bound inclusive.
    #[inline]
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.r) && x.iter().map(|v| v.abs()).product::<f64>() < self.eps
    }
}

impl SlabDomainH2 {
    pub fn new(eps: f64, r: f64, t: Vec<f64>) -> Result<Self> {
        if t.is_empty() || !(eps > 0.0) || !(r > 0.0) || t.iter().any(|v| !(*v >= 1.0)) {
            return Err(Error::domain("H2 needs n >= 1, eps, R > 0 and T_i >= 1"));
        }
        Ok(Self { eps, r, t })
    }

    pub fn n(&self) -> usize {
        self.t.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x[0].abs() <= self.r
            && x[1..]
                .iter()
                .zip(&self.t)
                .all(|(v, t)| v.abs() >= 1.0 && v.abs() <= *t)
            && x.iter().map(|v| v.abs()).product::<f64>() <= self.eps
    }
}

/// Which part of a star body a membership query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Full,
    /// Only points with all coordinates nonzero.
    Plus,
    /// Only points whose coordinate `i` vanishes.
    Slice(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    H1(StarBodyH1),
    H2(SlabDomainH2),
}

/// Membership of `point` in the requested variant of `domain`.
pub fn star_member(point: &[f64], domain: &Domain, variant: Variant) -> Result<bool> {
    let dim = match domain {
        Domain::H1(b) => b.m,
        Domain::H2(s) => s.n() + 1,
    };
    if point.len() != dim {
        return Err(Error::domain(format!("point has {} coordinates, expected {dim}", point.len())));
    }
    if point.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("non-finite coordinate"));
    }
    let base = match domain {
        Domain::H1(b) => b.contains(point),
        Domain::H2(s) => s.contains(point),
    };
    Ok(base
        && match variant {
            Variant::Full => true,
            Variant::Plus => point.iter().all(|x| *x != 0.0),
            Variant::Slice(i) => {
                if i >= dim {
                    return Err(Error::domain("slice index out of range"));
                }
                point[i] == 0.0
            }
        })
}

/// `x -> (sign_i * exp(exponent_i) * x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMap {
    pub exponents: Vec<f64>,
    /// Integer form of the exponents when they are integral.
    pub int_exponents: Option<Vec<i64>>,
    pub signs: Vec<i8>,
}

impl DiagonalMap {
    pub fn from_ints(exps: Vec<i64>, signs: Vec<i8>) -> Self {
        Self {
            exponents: exps.iter().map(|&e| e as f64).collect(),
            int_exponents: Some(exps),
            signs,
        }
    }

    pub fn from_reals(exponents: Vec<f64>) -> Self {
        let signs = vec![1; exponents.len()];
        Self {
            exponents,
            int_exponents: None,
            signs,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.exponents)
            .zip(&self.signs)
            .map(|((v, e), s)| f64::from(*s) * e.exp() * v)
            .collect()
    }

    /// Sum of the exponents; zero means the map has determinant 1 up to sign.
    pub fn exponent_sum(&self) -> f64 {
        self.exponents.iter().sum()
    }

    pub fn int_exponent_sum(&self) -> Option<i64> {
        self.int_exponents.as_ref().map(|v| v.iter().sum())
    }

    /// Composition `other after self`.
    pub fn then(&self, other: &DiagonalMap) -> DiagonalMap {
        let exponents = self.exponents.iter().zip(&other.exponents).map(|(a, b)| a + b).collect();
        let int_exponents = match (&self.int_exponents, &other.int_exponents) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => None,
        };
        let signs = self.signs.iter().zip(&other.signs).map(|(a, b)| a * b).collect();
        DiagonalMap {
            exponents,
            int_exponents,
            signs,
        }
    }
}

/// One piece of a tessellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    /// Integer part of the index: `b` for H2, the shift `a` for H1.
    pub grid: Vec<i64>,
    /// Sign pattern tag; bit `i` set means coordinate `i + 1` is negative.
    pub orthant: u32,
    pub map: DiagonalMap,
}

/// Result of locating a point in the H2 covering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileHit {
    pub tile: usize,
    /// The point was replaced by its negative before locating; the lattices
    /// counted here are symmetric so both halves share a tile.
    pub reflected: bool,
}

/// Covering of the plus part of H2 by `prod (floor(log T_i) + 1) * 2^n` tiles,
/// each mapped into `(0, eps] x [1, e]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Tiling {
    pub domain: SlabDomainH2,
    pub tiles: Vec<Tile>,
    pub grid_max: Vec<i64>,
}

/// Build the H2 covering; requires `eps < R * prod T_i`.
pub fn tessellate_h2(domain: &SlabDomainH2) -> Result<H2Tiling> {
    let n = domain.n();
    let prod_t: f64 = domain.t.iter().product();
    if !(domain.eps < domain.r * prod_t) {
        return Err(Error::precondition("covering needs eps < R * prod T_i"));
    }
    if n > 20 {
        return Err(Error::capability("too many sign patterns"));
    }
    let grid_max: Vec<i64> = domain.t.iter().map(|t| t.ln().floor() as i64).collect();
    let mut tiles = Vec::new();
    let mut b = vec![0i64; n];
    loop {
        for orthant in 0..(1u32 << n) {
            let sum: i64 = b.iter().sum();
            let mut exps = vec![sum];
            exps.extend(b.iter().map(|x| -x));
            let mut signs = vec![1i8];
            signs.extend((0..n).map(|i| if orthant >> i & 1 == 1 { -1 } else { 1 }));
            tiles.push(Tile {
                grid: b.clone(),
                orthant,
                map: DiagonalMap::from_ints(exps, signs),
            });
        }
        if !odometer(&mut b, &grid_max) {
            break;
        }
    }
    Ok(H2Tiling {
        domain: domain.clone(),
        tiles,
        grid_max,
    })
}

/// Advance `b` through `prod [0, max_i]`; false once it wraps around.
fn odometer(b: &mut [i64], max: &[i64]) -> bool {
    for i in (0..b.len()).rev() {
        if b[i] < max[i] {
            b[i] += 1;
            return true;
        }
        b[i] = 0;
    }
    false
}

impl H2Tiling {
    fn position(&self, b: &[i64], orthant: u32) -> usize {
        let n = b.len();
        let mut idx = 0usize;
        for i in 0..n {
            idx = idx * (self.grid_max[i] as usize + 1) + b[i] as usize;
        }
        idx * (1usize << n) + orthant as usize
    }

    /// Locate a point of the plus part; `None` for points outside it.
    ///
    /// A coordinate `|x_i| = e^k` on a tile boundary goes to the lower
    /// tile index `k - 1`.
    pub fn member_tile(&self, x: &[f64]) -> Option<TileHit> {
        let n = self.domain.n();
        if x.len() != n + 1 || x.iter().any(|v| *v == 0.0) || !self.domain.contains(x) {
            return None;
        }
        let reflected = x[0] < 0.0;
        let sgn = if reflected { -1.0 } else { 1.0 };
        let mut orthant = 0u32;
        let mut b = vec![0i64; n];
        for i in 0..n {
            let v = sgn * x[i + 1];
            if v < 0.0 {
                orthant |= 1 << i;
            }
            let k = v.abs().ln().ceil() as i64 - 1;
            b[i] = k.clamp(0, self.grid_max[i]);
        }
        Some(TileHit {
            tile: self.position(&b, orthant),
            reflected,
        })
    }

    /// Image of `x` under the map of the tile that contains it.
    pub fn map_point(&self, x: &[f64]) -> Option<(TileHit, Vec<f64>)> {
        let hit = self.member_tile(x)?;
        let y: Vec<f64> = if hit.reflected {
            x.iter().map(|v| -v).collect()
        } else {
            x.to_vec()
        };
        Some((hit, self.tiles[hit.tile].map.apply(&y)))
    }
}

/// Partition of the plus part of H1 into tiles `X_a`, `a in Z^m`,
/// `sum a = 0`, with `diag(e^{a_i})` mapping `X_a` into `[-c rho, c rho]^m`,
/// `rho = eps^{1/m}` and `c = e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Partition {
    pub body: StarBodyH1,
    pub tiles: Vec<Tile>,
    /// `eps^{1/m}`.
    pub rho: f64,
    /// Every shift satisfies `a_i >= -lower`.
    pub lower: i64,
    /// Every shift satisfies `a_i <= upper`.
    pub upper: i64,
    /// Measured constant `c` of the image cube.
    pub c: f64,
    #[serde(skip)]
    lookup: HashMap<Vec<i64>, usize>,
}

/// Build the H1 partition; requires `R^m / eps > e^m`.
pub fn partition_h1(body: &StarBodyH1) -> Result<H1Partition> {
    let m = body.m;
    let log_ratio = m as f64 * body.r.ln() - body.eps.ln();
    if !(log_ratio > m as f64) {
        return Err(Error::precondition("partition needs R^m / eps > e^m"));
    }
    let rho = body.eps.powf(1.0 / m as f64);
    let lower = (log_ratio / m as f64).ceil() as i64;
    let upper = (m as i64 - 1) * lower;
    let mut tiles = Vec::new();
    let mut lookup = HashMap::new();
    let mut a = vec![-lower; m.saturating_sub(1)];
    let span: Vec<i64> = vec![upper + lower; m.saturating_sub(1)];
    loop {
        let last = -a.iter().sum::<i64>();
        if (-lower..=upper).contains(&last) {
            let mut shift = a.clone();
            shift.push(last);
            lookup.insert(shift.clone(), tiles.len());
            tiles.push(Tile {
                grid: shift.clone(),
                orthant: 0,
                map: DiagonalMap::from_ints(shift, vec![1; m]),
            });
        }
        // Odometer over [-lower, upper]^{m-1}.
        let mut shifted: Vec<i64> = a.iter().map(|x| x + lower).collect();
        if !odometer(&mut shifted, &span) {
            break;
        }
        a = shifted.iter().map(|x| x - lower).collect();
    }
    Ok(H1Partition {
        body: *body,
        tiles,
        rho,
        lower,
        upper,
        c: std::f64::consts::E,
        lookup,
    })
}

impl H1Partition {
    /// Shift assigned to a point of the plus part of H1.
    ///
    /// With `w_i = log(|x_i| / rho)` every coordinate gets the cap
    /// `u_i = min(floor(1 - w_i), upper)`; the surplus `sum u_i >= 0` is then
    /// removed from the coordinates in index order without going below
    /// `-lower`. Hence `w_i + a_i <= 1`.
    pub fn shift_of(&self, x: &[f64]) -> Option<Vec<i64>> {
        if x.len() != self.body.m || x.iter().any(|v| *v == 0.0) || !self.body.contains(x) {
            return None;
        }
        let mut u: Vec<i64> = x
            .iter()
            .map(|v| {
                let w = (v.abs() / self.rho).ln();
                ((1.0 - w).floor() as i64).min(self.upper)
            })
            .collect();
        let mut surplus: i64 = u.iter().sum();
        if surplus < 0 {
            return None;
        }
        for ui in u.iter_mut() {
            let take = surplus.min(*ui + self.lower);
            *ui -= take;
            surplus -= take;
        }
        if surplus != 0 {
            return None;
        }
        Some(u)
    }

    /// Index of the tile containing `x`, or `None` off the plus part.
    pub fn member_tile(&self, x: &[f64]) -> Option<usize> {
        self.shift_of(x).and_then(|a| self.lookup.get(&a).copied())
    }

    /// True when tile `idx` claims `x`.
    pub fn claims(&self, idx: usize, x: &[f64]) -> bool {
        self.member_tile(x) == Some(idx)
    }

    pub fn index_of(&self, shift: &[i64]) -> Option<usize> {
        self.lookup.get(shift).copied()
    }

    /// Half-width `c * rho` of the cube containing every tile image.
    pub fn image_half_width(&self) -> f64 {
        self.c * self.rho
    }
}

/// The maps `omega_1` (equalising the `y` box) and `omega_2` (turning the
/// image box into a cube of side `(eps T^n)^{1/(m+n)}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeScaling {
    pub theta: f64,
    pub omega1: DiagonalMap,
    pub omega2: DiagonalMap,
    pub half_width: f64,
    pub t_bar: f64,
}

/// `theta = (eps T^n)^{1/(m+n)} / eps^{1/m}` with `T` the geometric mean.
pub fn cube_scaling(m: usize, n: usize, eps: f64, t: &[f64]) -> Result<CubeScaling> {
    if m == 0 || n == 0 || t.len() != n || !(eps > 0.0) {
        return Err(Error::domain("cube scaling needs m, n >= 1, T of length n and eps > 0"));
    }
    let t_bar = geo_mean(t)?;
    let d = (m + n) as f64;
    let half_width = (eps * t_bar.powi(n as i32)).powf(1.0 / d);
    let theta = half_width / eps.powf(1.0 / m as f64);
    let mut e1 = vec![0.0; m];
    e1.extend(t.iter().map(|tj| (t_bar / tj).ln()));
    let lt = theta.ln();
    let mut e2 = vec![lt; m];
    e2.extend(std::iter::repeat(-(m as f64) / n as f64 * lt).take(n));
    Ok(CubeScaling {
        theta,
        omega1: DiagonalMap::from_reals(e1),
        omega2: DiagonalMap::from_reals(e2),
        half_width,
        t_bar,
    })
}

/// CSV listing of tiles: `index`, the exponents and the sign pattern.
pub fn tiles_csv(tiles: &[Tile]) -> Result<String> {
    let dim = tiles.first().map_or(0, |t| t.map.exponents.len());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    let mut header = vec!["index".to_string()];
    header.extend((0..dim).map(|i| format!("exp{i}")));
    header.push("signs".into());
    w.write_record(&header).map_err(|e| Error::Internal(e.to_string()))?;
    for (k, t) in tiles.iter().enumerate() {
        let mut row = vec![k.to_string()];
        match &t.map.int_exponents {
            Some(v) => row.extend(v.iter().map(|x| x.to_string())),
            None => row.extend(t.map.exponents.iter().map(|x| format!("{x:.16e}"))),
        }
        row.push(t.map.signs.iter().map(|s| if *s < 0 { '-' } else { '+' }).collect());
        w.write_record(&row).map_err(|e| Error::Internal(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}
