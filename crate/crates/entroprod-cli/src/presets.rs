//! Canned sweeps reproducing the figure datasets.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};

use entroprod::models::{macrospin_protocol, MacrospinParams};
use entroprod::operators::HermitianMatrix;
use entroprod::perturbation::{analyticity_report, PerturbationInput};
use entroprod::trajectories::{build_table, distribution, histogram, Quantity};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::spec::{Model, OutputFormat, ParamSpec, SweepSpec};
use crate::sweep::{emit, format_value, manifest_path_for, run_sweep, SweepOutput};

fn fixed(name: &str, value: f64) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        value: Some(value),
        start: None,
        stop: None,
        count: None,
        log: false,
        values: None,
    }
}

fn range(name: &str, start: f64, stop: f64, count: usize, log: bool) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        value: None,
        start: Some(start),
        stop: Some(stop),
        count: Some(count),
        log,
        values: None,
    }
}

fn list(name: &str, values: &[f64]) -> ParamSpec {
    ParamSpec {
        name: name.into(),
        value: None,
        start: None,
        stop: None,
        count: None,
        log: false,
        values: Some(values.to_vec()),
    }
}

const FIVE: [&str; 5] = ["sigma", "gamma_cl", "gamma_qu", "lambda_cl", "lambda_qu"];

/// The qubit-quench split curves at theta = 1.1 over a log beta grid.
fn fig1_spec() -> SweepSpec {
    SweepSpec {
        model: Model::QubitQuench,
        params: vec![fixed("theta", 1.1), range("beta", 0.05, 12.0, 120, true)],
        outputs: FIVE.iter().map(|s| s.to_string()).collect(),
        format: OutputFormat::Csv,
        scaling: None,
        quantity: None,
        matrix_file: None,
        quad_nodes: None,
    }
}

/// The cyclic x-pulse qubit at omega = 1, h_x = 1.3 for two pulse lengths.
fn fig2_spec() -> SweepSpec {
    SweepSpec {
        model: Model::QubitPulse,
        params: vec![
            fixed("hx", 1.3),
            list("tau", &[0.4, 1.0]),
            range("beta", 0.05, 12.0, 100, true),
        ],
        outputs: FIVE.iter().map(|s| s.to_string()).collect(),
        format: OutputFormat::Csv,
        scaling: None,
        quantity: None,
        matrix_file: None,
        quad_nodes: None,
    }
}

/// TFIM splittings around criticality, raw and scaled by beta dg^2.
fn fig4_spec() -> SweepSpec {
    SweepSpec {
        model: Model::Tfim,
        params: vec![
            fixed("delta_g", 0.01),
            list("beta", &[4.0, 8.0, 16.0, 32.0]),
            range("g0", 0.5, 1.5, 101, false),
        ],
        outputs: FIVE.iter().map(|s| s.to_string()).collect(),
        format: OutputFormat::Csv,
        scaling: Some("beta*delta_g^2".into()),
        quantity: None,
        matrix_file: None,
        quad_nodes: None,
    }
}

/// Macrospin cumulants of one stochastic quantity over (d, beta).
fn macrospin_cumulant_spec(quantity: &str) -> SweepSpec {
    SweepSpec {
        model: Model::Macrospin,
        params: vec![
            fixed("hz", 1.0),
            fixed("hx", 0.5),
            fixed("tau", 2.0),
            list("beta", &[1.0, 2.5]),
            list("d", &[25.0, 50.0, 100.0, 200.0, 400.0]),
        ],
        outputs: vec![
            "kappa1".into(),
            "kappa2".into(),
            "kappa3".into(),
            "kappa4".into(),
        ],
        format: OutputFormat::Csv,
        scaling: None,
        quantity: Some(quantity.into()),
        matrix_file: None,
        quad_nodes: None,
    }
}

/// Analyticity diagnostics of the theta = 0.1 qubit quench (the |s|, |f|,
/// |f~| curves against beta omega).
fn fig3_rows() -> Result<SweepOutput> {
    let theta = 0.1_f64;
    let c = theta.cos() - 1.0;
    let s = theta.sin();
    let header = vec![
        "beta".to_string(),
        "s_max".to_string(),
        "f_max".to_string(),
        "f_tilde_max".to_string(),
    ];
    let mut rows = Vec::new();
    let mut bw = 0.25;
    while bw <= 12.0 + 1e-9 {
        let h0 = HermitianMatrix::from_diagonal(&[1.0, -1.0]);
        let dh = HermitianMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(c, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(-c, 0.0),
            ],
        ))?;
        let rep = analyticity_report(&PerturbationInput::new(h0, dh, bw)?)?;
        rows.push(vec![
            format_value(bw),
            format_value(rep.max_s),
            format_value(rep.max_f),
            format_value(rep.max_f_tilde),
        ]);
        bw += 0.25;
    }
    Ok(SweepOutput { header, rows })
}

/// Drops leading/trailing atoms whose cumulative mass is below `tail`; the
/// far tails carry weights like 1e-80 and would stretch the binning range
/// far beyond anything visible in a linear-scale histogram.
fn trim_tails(
    dist: &entroprod::trajectories::DiscreteDistribution,
    tail: f64,
) -> entroprod::trajectories::DiscreteDistribution {
    let finite: Vec<(f64, f64)> = dist
        .atoms
        .iter()
        .copied()
        .filter(|&(v, _)| v.is_finite())
        .collect();
    let mut lo = 0;
    let mut acc = 0.0;
    while lo + 1 < finite.len() && acc + finite[lo].1 < tail {
        acc += finite[lo].1;
        lo += 1;
    }
    let mut hi = finite.len();
    acc = 0.0;
    while hi > lo + 1 && acc + finite[hi - 1].1 < tail {
        acc += finite[hi - 1].1;
        hi -= 1;
    }
    entroprod::trajectories::DiscreteDistribution {
        atoms: finite[lo..hi].to_vec(),
    }
}

/// Histograms of the lambda (fig5) or gamma (fig6) distributions at d = 200.
fn histogram_rows(quantities: [Quantity; 2]) -> Result<SweepOutput> {
    let header = vec![
        "quantity".to_string(),
        "beta".to_string(),
        "bin_left".to_string(),
        "bin_right".to_string(),
        "mass".to_string(),
    ];
    let mut rows = Vec::new();
    for &beta in &[1.0, 2.5] {
        let p = macrospin_protocol(&MacrospinParams {
            d: 200,
            hz: 1.0,
            hx: 0.5,
            tau: 2.0,
            beta,
        })?;
        let table = build_table(&p)?;
        for q in quantities {
            let dist = trim_tails(&distribution(&table, q), 1e-9);
            let hist = histogram(&dist, None)?;
            for (i, &mass) in hist.masses.iter().enumerate() {
                rows.push(vec![
                    q.as_str().to_string(),
                    format_value(beta),
                    format_value(hist.edges[i]),
                    format_value(hist.edges[i + 1]),
                    format_value(mass),
                ]);
            }
        }
    }
    Ok(SweepOutput { header, rows })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

/// Runs a figure preset; returns every file written.
pub fn run_preset(name: &str, out: &Path, quad_nodes: usize, seed: u64) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    match name {
        "fig1" => {
            let spec = fig1_spec();
            let data = run_sweep(&spec, quad_nodes)?;
            emit(&spec, &data, out, seed, started)
        }
        "fig2" => {
            let spec = fig2_spec();
            let data = run_sweep(&spec, quad_nodes)?;
            emit(&spec, &data, out, seed, started)
        }
        "fig3" => {
            let data = fig3_rows()?;
            crate::sweep::write_csv(out, &data)?;
            let manifest = serde_json::json!({
                "preset": "fig3",
                "theta": 0.1,
                "library_version": env!("CARGO_PKG_VERSION"),
                "seed": seed,
                "wall_time_ms": started.elapsed().as_millis(),
                "outputs": [out.display().to_string()],
            });
            let mpath = manifest_path_for(out);
            std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
            Ok(vec![out.to_path_buf(), mpath])
        }
        "fig4" => {
            let spec = fig4_spec();
            let data = run_sweep(&spec, quad_nodes)?;
            emit(&spec, &data, out, seed, started)
        }
        "fig5" | "fig6" => {
            let (qa, qb) = if name == "fig5" {
                ("lambda_cl", "lambda_qu")
            } else {
                ("gamma_cl", "gamma_qu")
            };
            let mut written = Vec::new();
            for q in [qa, qb] {
                let spec = macrospin_cumulant_spec(q);
                let data = run_sweep(&spec, quad_nodes)?;
                let path = with_suffix(out, &format!("_{q}"));
                written.extend(emit(&spec, &data, &path, seed, started)?);
            }
            let hist = histogram_rows(if name == "fig5" {
                [Quantity::LambdaCl, Quantity::LambdaQu]
            } else {
                [Quantity::GammaCl, Quantity::GammaQu]
            })?;
            let hist_path = with_suffix(out, "_hist");
            crate::sweep::write_csv(&hist_path, &hist)?;
            written.push(hist_path);
            Ok(written)
        }
        other => bail!("unknown preset `{other}` (expected fig1..fig6)"),
    }
    .context("preset run failed")
}
