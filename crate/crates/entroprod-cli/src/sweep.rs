//! Grid expansion, parallel evaluation, and deterministic CSV/JSON output
//! with a run manifest next to every file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use entroprod::models::{
    macrospin_protocol, qubit_pulse_protocol, qubit_quench_protocol, MacrospinParams,
    QubitQuenchParams,
};
use entroprod::operators::{HermitianMatrix, UnitaryMatrix};
use entroprod::splitting::{average_split, WorkProtocol};
use entroprod::tfim::{gamma_split_tfim, lambda_split_tfim, SystemSize, TfimParams};
use entroprod::trajectories::{build_table, cumulants, distribution, Quantity};

use crate::spec::{parse_scaling, scaling_divisor, Model, OutputFormat, SweepSpec};

/// Snapshot written alongside every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub config: &'a SweepSpec,
    pub seed: u64,
    pub library_version: &'static str,
    pub threads: usize,
    pub wall_time_ms: u128,
    pub outputs: Vec<String>,
}

/// A complex matrix protocol loaded from JSON (custom-matrix model).
#[derive(Debug, Deserialize)]
struct MatrixFile {
    h0: Vec<Vec<[f64; 2]>>,
    h_tau: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    u: Option<Vec<Vec<[f64; 2]>>>,
}

fn parse_matrix(rows: &[Vec<[f64; 2]>]) -> Result<DMatrix<Complex64>> {
    let n = rows.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            bail!("matrix row {i} has {} entries, expected {n}", row.len());
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Ok(m)
}

fn lookup(point: &[(String, f64)], name: &str) -> Option<f64> {
    point
        .iter()
        .find(|(n, _)| n == name)
        .map(|&(_, v)| v)
}

fn require(point: &[(String, f64)], name: &str, model: &str) -> Result<f64> {
    lookup(point, name)
        .with_context(|| format!("model `{model}` needs grid parameter `{name}`"))
}

/// All five averaged quantities plus optional cumulants of one stochastic
/// quantity at a single grid point.
fn evaluate_point(
    spec: &SweepSpec,
    point: &[(String, f64)],
    matrix: Option<&MatrixFile>,
    quad_nodes: usize,
) -> Result<Vec<(String, f64)>> {
    let wants_kappa = spec.outputs.iter().any(|o| o.starts_with("kappa"));
    let mut values: Vec<(String, f64)> = Vec::new();

    let protocol: Option<WorkProtocol> = match spec.model {
        Model::QubitQuench => Some(qubit_quench_protocol(&QubitQuenchParams {
            omega: lookup(point, "omega").unwrap_or(1.0),
            theta: require(point, "theta", "qubit-quench")?,
            beta: require(point, "beta", "qubit-quench")?,
        })),
        Model::QubitPulse => Some(qubit_pulse_protocol(
            lookup(point, "omega").unwrap_or(1.0),
            require(point, "hx", "qubit-pulse")?,
            require(point, "tau", "qubit-pulse")?,
            require(point, "beta", "qubit-pulse")?,
        )?),
        Model::Macrospin => Some(macrospin_protocol(&MacrospinParams {
            d: require(point, "d", "macrospin")? as usize,
            hz: lookup(point, "hz").unwrap_or(1.0),
            hx: require(point, "hx", "macrospin")?,
            tau: require(point, "tau", "macrospin")?,
            beta: require(point, "beta", "macrospin")?,
        })?),
        Model::CustomMatrix => {
            let file = matrix.context("custom-matrix model without a loaded matrix file")?;
            let h0 = HermitianMatrix::new(parse_matrix(&file.h0)?)?;
            let h_tau = HermitianMatrix::new(parse_matrix(&file.h_tau)?)?;
            let u = match &file.u {
                Some(rows) => UnitaryMatrix::new(parse_matrix(rows)?)?,
                None => UnitaryMatrix::identity(h0.dim()),
            };
            Some(WorkProtocol::new(
                h0,
                h_tau,
                u,
                require(point, "beta", "custom-matrix")?,
            )?)
        }
        Model::Tfim => None,
    };

    match spec.model {
        Model::Tfim => {
            if wants_kappa {
                bail!("cumulant outputs are not defined for the tfim model");
            }
            let n = lookup(point, "n").unwrap_or(0.0);
            let size = if n == 0.0 {
                SystemSize::Thermodynamic
            } else {
                SystemSize::Finite(n as usize)
            };
            let params = TfimParams {
                g0: require(point, "g0", "tfim")?,
                delta_g: require(point, "delta_g", "tfim")?,
                beta: require(point, "beta", "tfim")?,
                size,
                quad_nodes,
            };
            let l = lambda_split_tfim(&params)?;
            let (gcl, gqu) = gamma_split_tfim(&params)?;
            values.push(("sigma".into(), l.sigma));
            values.push(("gamma_cl".into(), gcl));
            values.push(("gamma_qu".into(), gqu));
            values.push(("lambda_cl".into(), l.lambda_cl));
            values.push(("lambda_qu".into(), l.lambda_qu));
        }
        _ => {
            let p = protocol.expect("non-tfim models build a protocol");
            // one spectral pass: the table carries the averages too
            let s = if wants_kappa {
                let name = spec
                    .quantity
                    .as_deref()
                    .context("kappa outputs need `quantity`")?;
                let q = Quantity::parse(name)
                    .with_context(|| format!("unknown stochastic quantity `{name}`"))?;
                let table = build_table(&p)?;
                let k = cumulants(&distribution(&table, q))?;
                values.push(("kappa1".into(), k.kappa1));
                values.push(("kappa2".into(), k.kappa2));
                values.push(("kappa3".into(), k.kappa3));
                values.push(("kappa4".into(), k.kappa4));
                table.averages()
            } else {
                average_split(&p)?
            };
            values.push(("sigma".into(), s.sigma));
            values.push(("gamma_cl".into(), s.gamma_cl));
            values.push(("gamma_qu".into(), s.gamma_qu));
            values.push(("lambda_cl".into(), s.lambda_cl));
            values.push(("lambda_qu".into(), s.lambda_qu));
        }
    }
    Ok(values)
}

/// Formats with 17 significant digits (IEEE round-trip safe); infinities use
/// the literal `inf` token.
pub fn format_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub struct SweepOutput {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Expands the grid, evaluates every point on the current rayon pool, and
/// assembles rows in deterministic grid order. A NaN anywhere is a hard
/// failure naming the offending grid point.
pub fn run_sweep(spec: &SweepSpec, quad_nodes: usize) -> Result<SweepOutput> {
    spec.validate()?;
    let matrix = match &spec.matrix_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read matrix file `{path}`"))?;
            Some(serde_json::from_str::<MatrixFile>(&text).context("bad matrix file")?)
        }
        None => None,
    };
    let axes: Vec<(String, Vec<f64>)> = spec
        .params
        .iter()
        .map(|p| Ok((p.name.clone(), p.expand()?)))
        .collect::<Result<_>>()?;
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    let scaling_terms = spec.scaling.as_deref().map(parse_scaling).transpose()?;

    let points: Vec<Vec<(String, f64)>> = (0..total)
        .map(|mut idx| {
            let mut point = Vec::with_capacity(axes.len());
            for (name, vals) in axes.iter().rev() {
                point.push((name.clone(), vals[idx % vals.len()]));
                idx /= vals.len();
            }
            point.reverse();
            point
        })
        .collect();

    let results: Vec<Result<Vec<(String, f64)>>> = points
        .par_iter()
        .map(|point| evaluate_point(spec, point, matrix.as_ref(), quad_nodes))
        .collect();

    let mut header: Vec<String> = axes.iter().map(|(n, _)| n.clone()).collect();
    for out in &spec.outputs {
        header.push(out.clone());
        if scaling_terms.is_some() {
            header.push(format!("{out}_scaled"));
        }
    }

    let mut rows = Vec::with_capacity(total);
    for (point, result) in points.iter().zip(results) {
        let values = result?;
        let mut row: Vec<String> = point.iter().map(|&(_, v)| format_value(v)).collect();
        let divisor = match &scaling_terms {
            Some(terms) => Some(scaling_divisor(terms, |n| lookup(point, n))?),
            None => None,
        };
        for out in &spec.outputs {
            let v = values
                .iter()
                .find(|(n, _)| n == out)
                .map(|&(_, v)| v)
                .with_context(|| format!("unknown output selector `{out}`"))?;
            if v.is_nan() {
                bail!("NaN in output `{out}` at grid point {point:?}");
            }
            row.push(format_value(v));
            if let Some(d) = divisor {
                row.push(format_value(v / d));
            }
        }
        rows.push(row);
    }
    Ok(SweepOutput { header, rows })
}

pub fn write_csv(path: &Path, out: &SweepOutput) -> Result<()> {
    let mut text = out.header.join(",");
    text.push('\n');
    for row in &out.rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json(path: &Path, out: &SweepOutput) -> Result<()> {
    let rows: Vec<serde_json::Map<String, serde_json::Value>> = out
        .rows
        .iter()
        .map(|row| {
            out.header
                .iter()
                .zip(row)
                .map(|(h, v)| (h.clone(), serde_json::Value::String(v.clone())))
                .collect()
        })
        .collect();
    let text = serde_json::to_string_pretty(&rows)?;
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Writes the sweep result plus its manifest; returns the output paths.
pub fn emit(
    spec: &SweepSpec,
    out: &SweepOutput,
    path: &Path,
    seed: u64,
    started: Instant,
) -> Result<Vec<PathBuf>> {
    match spec.format {
        OutputFormat::Csv => write_csv(path, out)?,
        OutputFormat::Json => write_json(path, out)?,
    }
    let manifest_path = manifest_path_for(path);
    let manifest = RunManifest {
        config: spec,
        seed,
        library_version: env!("CARGO_PKG_VERSION"),
        threads: rayon::current_num_threads(),
        wall_time_ms: started.elapsed().as_millis(),
        outputs: vec![path.display().to_string()],
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;
    Ok(vec![path.to_path_buf(), manifest_path])
}

pub fn manifest_path_for(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}
