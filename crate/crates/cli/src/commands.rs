use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use starcount::bounds::rhs_main_theorem;
use starcount::cert::{certify_phi, estimate_c_alpha};
use starcount::counting::{brute_count_m, default_split_c, range_split, sum_s, sum_s_star, sum_sigma, tile_count_m};
use starcount::experiment::{emit_report, run_experiment, ExperimentConfig, Format};
use starcount::lattice::{assemble_lattice, exact_successive_minima, support_monotone_basis, workable_basis};
use starcount::par::with_workers;
use starcount::schmidt::{exceptional_set_estimate, moment_sum_check, Family, Weighting};
use starcount::tess::{partition_h1, tessellate_h2, tiles_csv, SlabDomainH2, StarBodyH1};
use starcount::weights::{build_schedule, fraction, verify_identities, SupportMatrix};
use starcount::{CountQuery, Error, MatrixL, Orientation, PhiSpec, Result, SumMode};

use crate::args::*;

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| Error::config(format!("bad {what} entry {v:?}"))))
        .collect()
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut p = prefix.as_os_str().to_owned();
    p.push(format!(".{ext}"));
    PathBuf::from(p)
}

/// Write to stdout; a reader that closed the pipe early is not an error.
fn out_text(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Print JSON to stdout and, with `--out`, also to `prefix.json`.
fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    out_text(&format!("{text}\n"))?;
    if let Some(prefix) = out {
        std::fs::write(with_ext(prefix, "json"), text + "\n")?;
    }
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.config.is_some() && !matches!(cli.command, Command::Experiment(_)) {
        return Err(Error::config("--config is only read by the experiment subcommand"));
    }
    if let Command::Experiment(args) = &cli.command {
        return experiment(&cli, args);
    }
    let workers = cli.workers.unwrap_or(1);
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(0);
    with_workers(workers, || match &cli.command {
        Command::Count(a) => count(a, out),
        Command::Sum(a) => sum(a, out),
        Command::Certify(a) => certify(a, out),
        Command::Tess(a) => tess(a, out),
        Command::Minima(a) => minima(a, out),
        Command::Weights(a) => weights(a, out),
        Command::Schmidt(a) => schmidt(a, seed, out),
        Command::Experiment(_) => unreachable!(),
    })?
}

fn count(a: &CountArgs, out: Option<&Path>) -> Result<()> {
    let l = MatrixL::parse(&a.l)?;
    let t: Vec<f64> = parse_list(&a.t, "T")?;
    let (m, n) = (l.rows(), l.cols());
    let q = CountQuery::new(l, a.eps, a.r, t.clone())?;
    let res = match a.method {
        CountMethod::Brute => brute_count_m(&q)?,
        CountMethod::Tile => tile_count_m(&q)?,
    };
    let bound = rhs_main_theorem(m, n, a.eps, a.r, &t, &PhiSpec::Constant { c: 1.0 }).ok();
    emit(
        &json!({
            "count": res.count,
            "boundary_sensitive": res.boundary_sensitive,
            "bound_phi_1": bound,
        }),
        out,
    )
}

fn sum(a: &SumArgs, out: Option<&Path>) -> Result<()> {
    let t: Vec<f64> = parse_list(&a.t, "T")?;
    let alpha = || -> Result<Vec<f64>> {
        let s = a.alpha.as_deref().ok_or_else(|| Error::config("--alpha is required"))?;
        parse_list(s, "alpha")
    };
    let mut value = match a.kind {
        SumKind::S => json!({ "kind": "s", "value": sum_s(&alpha()?, &t)? }),
        SumKind::SStar => {
            if t.len() != 1 {
                return Err(Error::config("s-star takes a single T"));
            }
            json!({ "kind": "s-star", "value": sum_s_star(&alpha()?, t[0])? })
        }
        SumKind::Sigma => {
            let l = a.l.as_deref().ok_or_else(|| Error::config("--l is required for sigma"))?;
            json!({ "kind": "sigma", "value": sum_sigma(&MatrixL::parse(l)?, &t)? })
        }
    };
    if a.split {
        let mode = match a.kind {
            SumKind::S => SumMode::Joint,
            SumKind::SStar => SumMode::Dual,
            SumKind::Sigma => return Err(Error::config("--split applies to s and s-star")),
        };
        let alpha = alpha()?;
        let c = a.c.unwrap_or_else(|| default_split_c(alpha.len()));
        value["split"] = to_value(&range_split(&alpha, &t, c, a.eps0, mode)?);
    }
    emit(&value, out)
}

fn certify(a: &CertifyArgs, out: Option<&Path>) -> Result<()> {
    if let Some(alpha) = &a.estimate {
        let alpha: Vec<f64> = parse_list(alpha, "alpha")?;
        let mode = match a.mode {
            ModeArg::Joint => SumMode::Joint,
            ModeArg::Dual => SumMode::Dual,
        };
        let (value, q) = estimate_c_alpha(&alpha, a.eps0, a.qmax, mode)?;
        return emit(&json!({ "c_alpha": value, "witness": q, "qmax": a.qmax }), out);
    }
    let l = a.l.as_deref().ok_or_else(|| Error::config("--l is required"))?;
    let phi = a.phi.as_deref().ok_or_else(|| Error::config("--phi is required"))?;
    let rep = certify_phi(&MatrixL::parse(l)?, &PhiSpec::parse(phi)?, a.qmax)?;
    eprintln!("{}", rep.message);
    emit(&to_value(&rep), out)
}

fn tess(a: &TessArgs, out: Option<&Path>) -> Result<()> {
    let (csv, summary) = match a.domain {
        DomainArg::H1 => {
            let m = a.m.ok_or_else(|| Error::config("--m is required for h1"))?;
            let part = partition_h1(&StarBodyH1::new(m, a.eps, a.r)?)?;
            let summary = json!({
                "domain": "h1",
                "tiles": part.tiles.len(),
                "rho": part.rho,
                "c": part.c,
                "shift_range": [-part.lower, part.upper],
            });
            (tiles_csv(&part.tiles)?, summary)
        }
        DomainArg::H2 => {
            let t = a.t.as_deref().ok_or_else(|| Error::config("--t is required for h2"))?;
            let tiling = tessellate_h2(&SlabDomainH2::new(a.eps, a.r, parse_list(t, "T")?)?)?;
            let summary = json!({ "domain": "h2", "tiles": tiling.tiles.len(), "grid_max": tiling.grid_max });
            (tiles_csv(&tiling.tiles)?, summary)
        }
    };
    match out {
        Some(prefix) => {
            std::fs::write(with_ext(prefix, "csv"), &csv)?;
            emit(&summary, Some(prefix))
        }
        None => {
            out_text(&csv)?;
            Ok(())
        }
    }
}

fn minima(a: &MinimaArgs, out: Option<&Path>) -> Result<()> {
    let l = MatrixL::parse(&a.l)?;
    let orientation = match a.orientation {
        OrientationArg::Upper => Orientation::Upper,
        OrientationArg::Dual => Orientation::Dual,
    };
    let mut basis = assemble_lattice(&l, orientation);
    if let Some(s) = &a.scale {
        let exps: Vec<f64> = parse_list(s, "scale")?;
        if exps.len() != basis.dim() {
            return Err(Error::config(format!("--scale needs {} entries", basis.dim())));
        }
        basis = basis.scale_coordinates(&exps);
    }
    let profile = exact_successive_minima(&basis)?;
    let mut value = json!({ "profile": to_value(&profile), "covolume": basis.covolume() });
    if a.monotone {
        let (vectors, _) = workable_basis(&basis, &profile)?;
        value["monotone"] = to_value(&support_monotone_basis(&vectors)?);
    }
    emit(&value, out)
}

fn weights(a: &WeightsArgs, out: Option<&Path>) -> Result<()> {
    let t = match (&a.rows, &a.file) {
        (Some(rows), None) => SupportMatrix::from_csv(a.m, &rows.replace(';', "\n"))?,
        (None, Some(path)) => SupportMatrix::from_csv(a.m, &std::fs::read_to_string(path)?)?,
        _ => return Err(Error::config("give exactly one of --rows or --file")),
    };
    let sched = build_schedule(&t, a.sigma)?;
    let report = verify_identities(&t, &sched)?;
    let list = |v: &[starcount::weights::Rational]| v.iter().map(fraction).collect::<Vec<_>>();
    emit(
        &json!({
            "k": list(&sched.k),
            "alpha": list(&sched.alpha),
            "alpha_j": sched.alpha_j.iter().map(|r| list(r)).collect::<Vec<_>>(),
            "identities": "ok",
            "rows_checked": report.checked_rows,
            "max_alpha_ratio": fraction(&report.max_alpha_ratio),
        }),
        out,
    )
}

fn schmidt(a: &SchmidtArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let fam = Family::parse(&a.family)?;
    let s: Vec<u32> = parse_list(&a.s, "s")?;
    let weighting = a.power.map_or(Weighting::Plain, Weighting::Power);
    let moment = moment_sum_check(&fam, &s, weighting, a.samples, seed)?;
    let exceptional = exceptional_set_estimate(&fam, &s, weighting, a.eta, a.samples, seed)?;
    emit(
        &json!({ "seed": seed, "moment": to_value(&moment), "exceptional": to_value(&exceptional) }),
        out,
    )
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| Error::config("experiment needs --config"))?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let prefix = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::config("experiment needs --out or an output field"))?;
    let report = run_experiment(&cfg)?;
    let formats: Vec<Format> = a
        .format
        .iter()
        .map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Gnuplot => Format::Gnuplot,
        })
        .collect();
    for p in emit_report(&report, &prefix, &formats)? {
        out_text(&format!("{}\n", p.display()))?;
    }
    let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
    eprintln!(
        "{} rows, {} skipped, max ratio {}, median ratio {}",
        report.summary.rows,
        report.summary.skipped,
        show(report.summary.max_ratio),
        show(report.summary.median_ratio)
    );
    Ok(())
}
