//! Seeded experiment runner and report emitters.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{dyadic_sigma_chain, lower_bound, rhs_main_theorem, rhs_sigma_theorem, LowerBoundKind};
use crate::cert::PhiSpec;
use crate::counting::{brute_count_m, sum_s, sum_s_star, sum_sigma, CountQuery};
use crate::error::{Error, Result};
use crate::par::{map_range, sample_rng, with_workers};
use crate::scalar::{check_budget, clamped_log, MatrixL, DEFAULT_BUDGET};
use crate::schmidt::{exceptional_set_estimate, mean_count_h1_slab, mean_count_h2_tiles, moment_sum_check, Family, Weighting};
use crate::tess::{SlabDomainH2, StarBodyH1};

/// Skew `max T_i / min T_i` every bhv grid with `n >= 2` must reach.
pub const MIN_SKEW: f64 = 100.0;

/// Mode and its parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "grid", rename_all = "kebab-case")]
pub enum Plan {
    /// `S(alpha, T) / log(T)^2` for one linear form.
    Kruse { samples: u64, t: Vec<f64> },
    /// `S(alpha, T) / (log T * prod log T_i)` on box tuples.
    Bhv { n: usize, samples: u64, t: Vec<Vec<f64>> },
    /// `S*(alpha, T) / log(T)^{n+1}`.
    BhvDual { n: usize, samples: u64, t: Vec<f64> },
    /// `#M(L, eps, R, T)` against the main counting bound.
    CountVsBound { l: String, phi: PhiSpec, r: f64, eps: Vec<f64>, t: Vec<Vec<f64>> },
    /// `Sigma(L, T)` against its bound, with the dyadic chain as a check.
    SigmaVsBound { l: String, phi: PhiSpec, t: Vec<Vec<f64>> },
    /// Sample means of lattice-point counts against their envelopes.
    MeanCount {
        samples: u64,
        /// `(n, eps, R, T')` for the H1 slab counts.
        slab: Vec<(usize, f64, f64, f64)>,
        /// `(eps, R, T)` for the per-tile H2 counts.
        tiles: Vec<(f64, f64, Vec<f64>)>,
    },
    /// Moment sums and exceptional sets of a function family.
    Schmidt { family: String, s: Vec<Vec<u32>>, eta: f64, samples: u64, power: Option<u32> },
}

fn default_workers() -> usize {
    1
}

/// A full experiment description; `seed` is mandatory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(flatten)]
    pub plan: Plan,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn mode(&self) -> &'static str {
        match self.plan {
            Plan::Kruse { .. } => "kruse",
            Plan::Bhv { .. } => "bhv",
            Plan::BhvDual { .. } => "bhv-dual",
            Plan::CountVsBound { .. } => "count-vs-bound",
            Plan::SigmaVsBound { .. } => "sigma-vs-bound",
            Plan::MeanCount { .. } => "mean-count",
            Plan::Schmidt { .. } => "schmidt",
        }
    }

    /// Reject empty grids and grids the modes cannot use.
    pub fn validate(&self) -> Result<()> {
        let empty = match &self.plan {
            Plan::Kruse { samples, t } => *samples == 0 || t.is_empty(),
            Plan::Bhv { samples, t, .. } => *samples == 0 || t.is_empty(),
            Plan::BhvDual { samples, t, .. } => *samples == 0 || t.is_empty(),
            Plan::CountVsBound { eps, t, .. } => eps.is_empty() || t.is_empty(),
            Plan::SigmaVsBound { t, .. } => t.is_empty(),
            Plan::MeanCount { samples, slab, tiles } => *samples == 0 || (slab.is_empty() && tiles.is_empty()),
            Plan::Schmidt { s, samples, .. } => *samples == 0 || s.is_empty(),
        };
        if empty {
            return Err(Error::config("empty grid"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        match &self.plan {
            Plan::Bhv { n, t, .. } => {
                if *n == 0 || t.iter().any(|tt| tt.len() != *n) {
                    return Err(Error::config("every T tuple must have n entries"));
                }
                let skewed = t.iter().any(|tt| {
                    let hi = tt.iter().cloned().fold(f64::MIN, f64::max);
                    let lo = tt.iter().cloned().fold(f64::MAX, f64::min);
                    hi >= MIN_SKEW * lo
                });
                if *n >= 2 && !skewed {
                    return Err(Error::config(format!(
                        "bhv grid needs a tuple with max T_i / min T_i >= {MIN_SKEW}"
                    )));
                }
            }
            Plan::BhvDual { n, .. } if *n == 0 => return Err(Error::config("n must be positive")),
            Plan::CountVsBound { l, t, .. } | Plan::SigmaVsBound { l, t, .. } => {
                let l = MatrixL::parse(l)?;
                if t.iter().any(|tt| tt.len() != l.cols()) {
                    return Err(Error::config("every T tuple must have one entry per column of L"));
                }
            }
            Plan::Schmidt { family, .. } => {
                Family::parse(family)?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// One line of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub m: usize,
    pub n: usize,
    pub t: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    /// `;`-joined in CSV; identifiers appear as `key=value`.
    pub flags: Vec<String>,
}

impl Row {
    fn new(m: usize, n: usize, t: Vec<f64>, lhs: f64, rhs: f64, flags: Vec<String>) -> Self {
        let ratio = (rhs > 0.0 && lhs.is_finite() && rhs.is_finite()).then(|| lhs / rhs);
        Self { m, n, t, lhs, rhs, ratio, flags }
    }

    fn failed(m: usize, n: usize, t: Vec<f64>, err: &Error, mut flags: Vec<String>) -> Self {
        let tag = match err {
            Error::Capability(_) => "skipped=budget".to_string(),
            Error::Precondition(_) => "skipped=precondition".to_string(),
            Error::Singular { q } => format!("skipped=singular at {q:?}"),
            other => format!("error={}", other.to_string().replace([',', ';', '\n'], " ")),
        };
        flags.push(tag);
        Self {
            m,
            n,
            t,
            lhs: f64::NAN,
            rhs: f64::NAN,
            ratio: None,
            flags,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rows: usize,
    pub skipped: usize,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub version: String,
    pub workers: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub summary: Summary,
    pub environment: Environment,
}

/// `alpha` for sample `index`: coordinates uniform on `[0, 1)`.
pub fn sample_alpha(seed: u64, index: u64, n: usize) -> Vec<f64> {
    let mut rng = sample_rng(seed, index);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

fn alpha_flags(index: u64, alpha: &[f64]) -> Vec<String> {
    let shown: Vec<String> = alpha.iter().map(|a| format!("{a:.17e}")).collect();
    vec![format!("sample={index}"), format!("alpha={}", shown.join(" "))]
}

fn guarded<T>(t: &[f64], f: impl FnOnce() -> Result<T>) -> Result<T> {
    check_budget(t, DEFAULT_BUDGET)?;
    f()
}

/// Rows for `(sample, T)` pairs in sample-major order.
fn sampled_rows(
    seed: u64,
    samples: u64,
    n: usize,
    ts: &[Vec<f64>],
    m: usize,
    eval: impl Fn(&[f64], &[f64]) -> Result<(f64, f64)> + Sync + Send,
) -> Vec<Row> {
    let total = samples as i64 * ts.len() as i64;
    map_range(0, total - 1, |k| {
        let index = (k / ts.len() as i64) as u64;
        let t = &ts[(k % ts.len() as i64) as usize];
        let alpha = sample_alpha(seed, index, n);
        let flags = alpha_flags(index, &alpha);
        match guarded(t, || eval(&alpha, t)) {
            Ok((lhs, rhs)) => Row::new(m, n, t.clone(), lhs, rhs, flags),
            Err(e) => Row::failed(m, n, t.clone(), &e, flags),
        }
    })
}

fn run_rows(cfg: &ExperimentConfig) -> Result<Vec<Row>> {
    let seed = cfg.seed;
    Ok(match &cfg.plan {
        Plan::Kruse { samples, t } => {
            let ts: Vec<Vec<f64>> = t.iter().map(|v| vec![*v]).collect();
            sampled_rows(seed, *samples, 1, &ts, 1, |a, t| {
                Ok((sum_s(a, t)?, lower_bound(LowerBoundKind::Kruse, 1, t)?))
            })
        }
        Plan::Bhv { n, samples, t } => sampled_rows(seed, *samples, *n, t, 1, |a, t| {
            Ok((sum_s(a, t)?, lower_bound(LowerBoundKind::Bhv, a.len(), t)?))
        }),
        Plan::BhvDual { n, samples, t } => {
            let ts: Vec<Vec<f64>> = t.iter().map(|v| vec![*v]).collect();
            sampled_rows(seed, *samples, *n, &ts, *n, |a, t| {
                Ok((sum_s_star(a, t[0])?, lower_bound(LowerBoundKind::BhvDual, a.len(), t)?))
            })
        }
        Plan::CountVsBound { l, phi, r, eps, t } => {
            let l = MatrixL::parse(l)?;
            let (m, n) = (l.rows(), l.cols());
            let cells: Vec<(f64, &Vec<f64>)> = eps.iter().flat_map(|e| t.iter().map(move |tt| (*e, tt))).collect();
            map_range(0, cells.len() as i64 - 1, |k| {
                let (e, tt) = cells[k as usize];
                let flags = vec![format!("eps={e:.17e}"), format!("r={r:.17e}")];
                let out = guarded(tt, || {
                    let rhs = rhs_main_theorem(m, n, e, *r, tt, phi)?;
                    let res = brute_count_m(&CountQuery::new(l.clone(), e, *r, tt.clone())?)?;
                    Ok((res.count as f64, rhs, res.boundary_sensitive))
                });
                match out {
                    Ok((lhs, rhs, sensitive)) => {
                        let mut f = flags;
                        if sensitive {
                            f.push("boundary".into());
                        }
                        Row::new(m, n, tt.clone(), lhs, rhs, f)
                    }
                    Err(err) => Row::failed(m, n, tt.clone(), &err, flags),
                }
            })
        }
        Plan::SigmaVsBound { l, phi, t } => {
            let l = MatrixL::parse(l)?;
            let (m, n) = (l.rows(), l.cols());
            map_range(0, t.len() as i64 - 1, |k| {
                let tt = &t[k as usize];
                let out = guarded(tt, || {
                    let lhs = sum_sigma(&l, tt)?;
                    let rhs = rhs_sigma_theorem(m, n, tt, phi)?;
                    let chain = dyadic_sigma_chain(&l, tt, phi)?;
                    Ok((lhs, rhs, chain))
                });
                match out {
                    Ok((lhs, rhs, chain)) => {
                        let ok = if chain.value >= lhs { "chain=ok" } else { "chain=below" };
                        let flags = vec![format!("chain_value={:.17e}", chain.value), ok.into()];
                        Row::new(m, n, tt.clone(), lhs, rhs, flags)
                    }
                    Err(err) => Row::failed(m, n, tt.clone(), &err, Vec::new()),
                }
            })
        }
        Plan::MeanCount { samples, slab, tiles } => {
            let mut rows = Vec::new();
            for &(n, eps, r, tp) in slab {
                let flags = vec![format!("kind=h1-slab"), format!("eps={eps:.17e}"), format!("r={r:.17e}")];
                let row = StarBodyH1::new(n, eps, r).and_then(|b| mean_count_h1_slab(&b, tp, *samples, seed));
                rows.push(match row {
                    Ok(rep) => {
                        let mut f = flags;
                        f.push(format!("se={:.17e}", rep.se));
                        f.push(format!("volume={:.17e}", rep.expected));
                        Row::new(n, n, vec![tp], rep.mean, rep.envelope, f)
                    }
                    Err(e) => Row::failed(n, n, vec![tp], &e, flags),
                });
            }
            for (eps, r, t) in tiles {
                let n = t.len();
                let flags = vec![format!("kind=h2-tile"), format!("eps={eps:.17e}"), format!("r={r:.17e}")];
                match SlabDomainH2::new(*eps, *r, t.clone()).and_then(|d| mean_count_h2_tiles(&d, *samples, seed)) {
                    Ok(reps) => {
                        for rep in reps {
                            let mut f = flags.clone();
                            f.push(format!("tile={}", rep.label));
                            f.push(format!("se={:.17e}", rep.se));
                            f.push(format!("volume={:.17e}", rep.expected));
                            rows.push(Row::new(1, n, t.clone(), rep.mean, rep.envelope, f));
                        }
                    }
                    Err(e) => rows.push(Row::failed(1, n, t.clone(), &e, flags)),
                }
            }
            rows
        }
        Plan::Schmidt { family, s, eta, samples, power } => {
            let fam = Family::parse(family)?;
            let weighting = power.map_or(Weighting::Plain, Weighting::Power);
            let mut rows = Vec::new();
            for sv in s {
                let t: Vec<f64> = sv.iter().map(|&v| v as f64).collect();
                let d = sv.len();
                let flags = vec![format!("family={family}")];
                let out = moment_sum_check(&fam, sv, weighting, *samples, seed)
                    .and_then(|mom| Ok((mom, exceptional_set_estimate(&fam, sv, weighting, *eta, *samples, seed)?)));
                rows.push(match out {
                    Ok((mom, exc)) => {
                        let mut f = flags;
                        f.push(format!("se={:.17e}", mom.se));
                        f.push(format!("exceptional={:.17e}", exc.measure));
                        f.push(format!("exceptional_se={:.17e}", exc.se));
                        f.push(format!("allowed={:.17e}", exc.allowed));
                        f.push(if exc.within { "chebyshev=ok".into() } else { "chebyshev=exceeded".into() });
                        Row::new(d, d, t, mom.lhs, mom.bound, f)
                    }
                    Err(e) => Row::failed(d, d, t, &e, flags),
                });
            }
            rows
        }
    })
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 { values[k / 2] } else { 0.5 * (values[k / 2 - 1] + values[k / 2]) })
}

/// Execute the grid on `cfg.workers` threads; rows come back in grid order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let rows = with_workers(cfg.workers, || run_rows(cfg))??;
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let summary = Summary {
        rows: rows.len(),
        skipped: rows.iter().filter(|r| r.ratio.is_none()).count(),
        max_ratio: ratios.iter().cloned().reduce(f64::max),
        median_ratio: median(&mut ratios),
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        summary,
        environment: Environment {
            version: env!("CARGO_PKG_VERSION").to_string(),
            workers: cfg.workers,
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
    })
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `mode,seed,m,n,T1..Tk,lhs,rhs,ratio,flags`.
pub fn emit_csv(report: &ExperimentReport) -> Result<String> {
    let k = report.rows.iter().map(|r| r.t.len()).max().unwrap_or(0);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header: Vec<String> = ["mode", "seed", "m", "n"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=k).map(|i| format!("T{i}")));
    header.extend(["lhs", "rhs", "ratio", "flags"].iter().map(|s| s.to_string()));
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for row in &report.rows {
        let mut rec = vec![
            report.config.mode().to_string(),
            report.config.seed.to_string(),
            row.m.to_string(),
            row.n.to_string(),
        ];
        rec.extend((0..k).map(|i| row.t.get(i).map_or(String::new(), |v| fmt_float(*v))));
        rec.push(fmt_float(row.lhs));
        rec.push(fmt_float(row.rhs));
        rec.push(row.ratio.map_or(String::new(), fmt_float));
        rec.push(row.flags.join(";"));
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

pub fn emit_json(report: &ExperimentReport) -> Result<String> {
    serde_json::to_string_pretty(report).map_err(|e| Error::Internal(e.to_string()))
}

/// Plain-text gnuplot script plotting ratio against `log T` (geometric
/// mean of the `T` columns) from `csv_name`.
pub fn emit_gnuplot(report: &ExperimentReport, csv_name: &str) -> String {
    let k = report.rows.iter().map(|r| r.t.len()).max().unwrap_or(0).max(1);
    let cols: Vec<String> = (0..k).map(|i| format!("log(${})", 5 + i)).collect();
    let ratio_col = 4 + k + 3;
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'log T'\nset ylabel 'ratio'\n\
         set title '{mode} seed {seed}'\nplot '{csv_name}' using (({sum})/{k}):{ratio_col} with points pt 7\n",
        mode = report.config.mode(),
        seed = report.config.seed,
        sum = cols.join("+"),
    )
}

/// Output formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Gnuplot,
}

/// Write `prefix.csv`, `prefix.json` and/or `prefix.gp`; the gnuplot script
/// always comes with the CSV it reads.
pub fn emit_report(report: &ExperimentReport, prefix: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
    let with_ext = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(format!(".{ext}"));
        PathBuf::from(p)
    };
    let mut written = Vec::new();
    let csv_path = with_ext("csv");
    if formats.contains(&Format::Csv) || formats.contains(&Format::Gnuplot) {
        std::fs::write(&csv_path, emit_csv(report)?)?;
        written.push(csv_path.clone());
    }
    if formats.contains(&Format::Json) {
        let p = with_ext("json");
        std::fs::write(&p, emit_json(report)?)?;
        written.push(p);
    }
    if formats.contains(&Format::Gnuplot) {
        let p = with_ext("gp");
        let name = csv_path.file_name().and_then(|s| s.to_str()).unwrap_or("report.csv");
        std::fs::write(&p, emit_gnuplot(report, name))?;
        written.push(p);
    }
    Ok(written)
}

/// Per-`alpha` spread `max ratio / min ratio` of a sampled report, keyed by
/// the `sample=` flag.
pub fn ratio_spread_by_sample(report: &ExperimentReport) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64, f64)> = Vec::new();
    for row in &report.rows {
        let Some(ratio) = row.ratio else { continue };
        let Some(idx) = row
            .flags
            .iter()
            .find_map(|f| f.strip_prefix("sample=").and_then(|v| v.parse::<u64>().ok()))
        else {
            continue;
        };
        match out.iter_mut().find(|e| e.0 == idx) {
            Some(e) => {
                e.1 = e.1.min(ratio);
                e.2 = e.2.max(ratio);
            }
            None => out.push((idx, ratio, ratio)),
        }
    }
    out.into_iter().map(|(i, lo, hi)| (i, hi / lo)).collect()
}

/// `clamped_log` of the geometric mean of `t`, for plotting axes.
pub fn log_t_bar(t: &[f64]) -> f64 {
    clamped_log(t.iter().product::<f64>().powf(1.0 / t.len().max(1) as f64))
}
