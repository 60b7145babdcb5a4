//! Subcommand implementations. Data goes to `--out` or stdout; diagnostics to stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use hpv_core::distances::{
    coupled_l2_sweep, ks_distance, ks_two_sample, normal_cdf, rate_fit, wasserstein1, RateFit,
};
use hpv_core::kernel_norms::{discrepancy_sweep, tv_rate_curve, write_sweep_csv, BracketTable};
use hpv_core::malliavin_bound::{berry_estimate, BoundEstimate};
use hpv_core::table::{write_csv, Cell};
use hpv_core::variations::sample_zn;
use hpv_core::{CriticalSpec, FgnSampler, Hurst, Regime, RegimeSpec, SamplerMethod, Seed};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::config::{CliError, CliResult, Format, RunConfig};

const STREAM_ZN: u64 = 1;
const STREAM_PROXY: u64 = 2;
const STREAM_BOUND: u64 = 3;
const STREAM_REFERENCE: u64 = 4;
const STREAM_COUPLED: u64 = 5;

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn fit_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".fit.json");
    PathBuf::from(s)
}

/// Writes rate fits beside the CSV (`<out>.fit.json`) or to stderr.
fn emit_fits(cfg: &RunConfig, fits: &serde_json::Value) -> CliResult<()> {
    match &cfg.out {
        Some(p) => {
            let mut f = BufWriter::new(File::create(fit_path(p))?);
            write_json(&mut f, fits)?;
            f.flush()?;
        }
        None => eprintln!("rate fit: {}", serde_json::to_string(fits).map_err(io::Error::from)?),
    }
    Ok(())
}

/// Fit `log y` on `log n`, or `null` with a diagnostic when the data do not allow it.
fn try_fit(label: &str, ns: &[usize], ys: &[f64]) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = ns.iter().zip(ys).map(|(&n, &y)| (n as f64, y)).collect();
    match rate_fit(&pts) {
        Ok(f) => Some(f),
        Err(e) => {
            eprintln!("note: no rate fit for {label}: {e}");
            None
        }
    }
}

#[derive(Serialize)]
struct PathRecord<'a> {
    #[serde(rename = "H")]
    h: f64,
    n: usize,
    seed: Seed,
    xi: &'a [f64],
}

pub fn cmd_sample(cfg: &RunConfig) -> CliResult<()> {
    let h = cfg.hurst()?;
    let ns = cfg.n_list()?;
    let root = Seed::new(cfg.seed);
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    if cfg.out.is_none() && (ns.len() > 1 || cfg.batch > 1) {
        return Err(CliError::Usage(
            "sample writes one file per path: pass --out DIR, or a single n with --batch 1 for stdout".into(),
        ));
    }
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
    }
    for &n in ns {
        let sampler = FgnSampler::new(h, n, SamplerMethod::Auto)?;
        for i in 0..cfg.batch {
            let seed = root.child(n as u64).child(i as u64);
            let path = sampler.sample(seed);
            let target = cfg
                .out
                .as_ref()
                .map(|d| d.join(format!("fgn_n{n}_seed{}_{i}.{ext}", cfg.seed)));
            let mut out = open_out(target.as_deref())?;
            match cfg.format {
                Format::Csv => path.write_csv(&mut out)?,
                Format::Json => write_json(
                    &mut out,
                    &PathRecord {
                        h: h.value(),
                        n,
                        seed,
                        xi: &path.xi,
                    },
                )?,
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn cmd_discrepancy(cfg: &RunConfig) -> CliResult<()> {
    let h = cfg.hurst()?;
    let ns = cfg.n_list()?;
    RegimeSpec::new(cfg.q, h)?.require(Regime::Supercritical)?;
    let reports = discrepancy_sweep(cfg.q, h, ns)?;
    let deltas: Vec<f64> = reports.iter().map(|r| r.delta).collect();
    let fit = try_fit("delta", ns, &deltas);
    let mut out = open_out(cfg.out.as_deref())?;
    match cfg.format {
        Format::Csv => {
            write_sweep_csv(&mut out, &reports)?;
            out.flush()?;
            emit_fits(cfg, &serde_json::json!({ "delta": fit }))?;
        }
        Format::Json => {
            write_json(&mut out, &serde_json::json!({ "rows": reports, "fit": fit }))?;
            out.flush()?;
        }
    }
    Ok(())
}

fn critical_spec(cfg: &RunConfig) -> CliResult<CriticalSpec> {
    if cfg.hurst.is_some() {
        let h = cfg.hurst()?;
        RegimeSpec::new(cfg.q, h)?.require(Regime::Critical)?;
    }
    Ok(CriticalSpec::new(cfg.q))
}

fn bound_row(b: &BoundEstimate) -> Vec<Cell> {
    vec![
        b.n.into(),
        b.seed.value.into(),
        b.seed.stream_id.into(),
        b.batch.into(),
        b.mean_sq.into(),
        b.se.into(),
        b.tv_bound.into(),
    ]
}

pub fn cmd_berry(cfg: &RunConfig) -> CliResult<()> {
    let spec = critical_spec(cfg)?;
    let ns = cfg.n_list()?;
    let root = Seed::new(cfg.seed).child(STREAM_BOUND);
    let estimates: Vec<BoundEstimate> = ns
        .iter()
        .map(|&n| berry_estimate(&spec, n, cfg.batch, root.child(n as u64)))
        .collect::<hpv_core::Result<_>>()?;
    let mut out = open_out(cfg.out.as_deref())?;
    match cfg.format {
        Format::Csv => {
            let rows: Vec<Vec<Cell>> = estimates.iter().map(bound_row).collect();
            write_csv(&mut out, &["n", "seed", "stream", "batch", "mean_sq", "se", "tv_bound"], &rows)?;
        }
        Format::Json => write_json(&mut out, &estimates)?,
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default, Serialize)]
struct RateRow {
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coupled_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coupled_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_se: Option<f64>,
    ks: f64,
    w1: f64,
}

fn normal_reference(seed: Seed, len: usize) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn cmd_rate(cfg: &RunConfig) -> CliResult<()> {
    let h: Hurst = cfg.hurst()?;
    let ns = cfg.n_list()?;
    let spec = RegimeSpec::new(cfg.q, h)?;
    let root = Seed::new(cfg.seed);
    let zn = |n: usize| sample_zn(&spec, n, cfg.batch, root.child(STREAM_ZN).child(n as u64));

    let mut rows = Vec::with_capacity(ns.len());
    let mut fits = serde_json::Map::new();
    let columns: &[&str] = match spec.regime {
        Regime::Supercritical => {
            let proxy = sample_zn(&spec, cfg.big_n, cfg.batch, root.child(STREAM_PROXY))?;
            let coupled = coupled_l2_sweep(cfg.q, h, ns, cfg.big_n, cfg.batch, root.child(STREAM_COUPLED))?;
            let tv = tv_rate_curve(cfg.q, h, ns)?;
            for (i, &n) in ns.iter().enumerate() {
                let z = zn(n)?;
                rows.push(RateRow {
                    n,
                    tv_rate: Some(tv[i]),
                    coupled_mean: Some(coupled[i].mean),
                    coupled_se: Some(coupled[i].se),
                    ks: ks_two_sample(&z, &proxy)?,
                    w1: wasserstein1(&z, &proxy)?,
                    ..Default::default()
                });
            }
            let cm: Vec<f64> = coupled.iter().map(|c| c.mean).collect();
            fits.insert("coupled_l2".into(), serde_json::json!(try_fit("coupled_l2", ns, &cm)));
            &["n", "tv_rate", "coupled_mean", "coupled_se", "ks", "w1"]
        }
        Regime::Critical => {
            let crit = CriticalSpec::new(cfg.q);
            for &n in ns {
                let b = berry_estimate(&crit, n, cfg.batch, root.child(STREAM_BOUND).child(n as u64))?;
                let z = zn(n)?;
                let reference = normal_reference(root.child(STREAM_REFERENCE).child(n as u64), z.len());
                rows.push(RateRow {
                    n,
                    tv_bound: Some(b.tv_bound),
                    tv_se: Some(b.se),
                    ks: ks_distance(&z, normal_cdf)?,
                    w1: wasserstein1(&z, &reference)?,
                    ..Default::default()
                });
            }
            &["n", "tv_bound", "tv_se", "ks", "w1"]
        }
        Regime::Subcritical => {
            for &n in ns {
                let z = zn(n)?;
                let reference = normal_reference(root.child(STREAM_REFERENCE).child(n as u64), z.len());
                rows.push(RateRow {
                    n,
                    ks: ks_distance(&z, normal_cdf)?,
                    w1: wasserstein1(&z, &reference)?,
                    ..Default::default()
                });
            }
            &["n", "ks", "w1"]
        }
    };
    let ks: Vec<f64> = rows.iter().map(|r| r.ks).collect();
    fits.insert("ks".into(), serde_json::json!(try_fit("ks", ns, &ks)));
    let fits = serde_json::Value::Object(fits);

    let mut out = open_out(cfg.out.as_deref())?;
    match cfg.format {
        Format::Csv => {
            let table: Vec<Vec<Cell>> = rows
                .iter()
                .map(|r| {
                    columns
                        .iter()
                        .map(|c| match *c {
                            "n" => r.n.into(),
                            "tv_rate" => r.tv_rate.unwrap_or(f64::NAN).into(),
                            "coupled_mean" => r.coupled_mean.unwrap_or(f64::NAN).into(),
                            "coupled_se" => r.coupled_se.unwrap_or(f64::NAN).into(),
                            "tv_bound" => r.tv_bound.unwrap_or(f64::NAN).into(),
                            "tv_se" => r.tv_se.unwrap_or(f64::NAN).into(),
                            "ks" => r.ks.into(),
                            _ => r.w1.into(),
                        })
                        .collect()
                })
                .collect();
            write_csv(&mut out, columns, &table)?;
            out.flush()?;
            emit_fits(cfg, &fits)?;
        }
        Format::Json => {
            write_json(
                &mut out,
                &serde_json::json!({
                    "q": cfg.q.get(),
                    "H": h.value(),
                    "regime": spec.regime,
                    "batch": cfg.batch,
                    "seed": cfg.seed,
                    "rows": rows,
                    "fits": fits,
                }),
            )?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn cmd_bracket_table(cfg: &RunConfig) -> CliResult<()> {
    let h = cfg.hurst()?;
    let mut table = BracketTable::new(cfg.q, h)?;
    let len = usize::try_from(cfg.max_lag)
        .ok()
        .and_then(|m| m.checked_add(1))
        .ok_or_else(|| CliError::Usage("--max-lag too large".into()))?;
    table.extend_to(len)?;
    let mut out = open_out(cfg.out.as_deref())?;
    match cfg.format {
        Format::Csv => table.write_csv(&mut out)?,
        Format::Json => write_json(&mut out, table.terms())?,
    }
    out.flush()?;
    Ok(())
}
