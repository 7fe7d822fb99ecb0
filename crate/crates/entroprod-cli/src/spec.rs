//! Sweep specification: the TOML config mirrors this structure one-to-one.
//!
//! ```toml
//! model = "qubit-quench"
//! outputs = ["sigma", "gamma_cl", "gamma_qu", "lambda_cl", "lambda_qu"]
//! format = "csv"           # optional, default csv
//! scaling = "beta*theta^2" # optional divisor expression
//! quantity = "lambda_cl"   # required only for kappa outputs
//!
//! [[param]]
//! name = "theta"
//! value = 1.1
//!
//! [[param]]
//! name = "beta"
//! start = 0.05
//! stop = 12.0
//! count = 120
//! log = true
//! ```

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    QubitQuench,
    QubitPulse,
    Tfim,
    Macrospin,
    CustomMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// One grid axis: a fixed value, a linear/log range, or an explicit list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub log: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl ParamSpec {
    pub fn expand(&self) -> Result<Vec<f64>> {
        if let Some(v) = self.value {
            return Ok(vec![v]);
        }
        if let Some(list) = &self.values {
            if list.is_empty() {
                bail!("param `{}`: explicit value list is empty", self.name);
            }
            return Ok(list.clone());
        }
        let (Some(start), Some(stop), Some(count)) = (self.start, self.stop, self.count) else {
            bail!(
                "param `{}`: give either `value`, `values`, or `start`/`stop`/`count`",
                self.name
            );
        };
        if count < 1 {
            bail!("param `{}`: count must be at least 1", self.name);
        }
        if count == 1 {
            return Ok(vec![start]);
        }
        if self.log && (start <= 0.0 || stop <= 0.0) {
            bail!("param `{}`: log grid endpoints must be positive", self.name);
        }
        let grid = (0..count)
            .map(|k| {
                let t = k as f64 / (count - 1) as f64;
                if self.log {
                    (start.ln() + (stop.ln() - start.ln()) * t).exp()
                } else {
                    start + (stop - start) * t
                }
            })
            .collect();
        Ok(grid)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub model: Model,
    #[serde(rename = "param")]
    pub params: Vec<ParamSpec>,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub format: OutputFormat,
    /// Divisor expression applied to every output, e.g. "beta*delta_g^2".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling: Option<String>,
    /// Stochastic quantity the kappa outputs refer to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<String>,
    /// Path of a JSON matrix file, for the custom-matrix model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_file: Option<String>,
    /// Gauss-Legendre order for TFIM momentum integrals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<SweepSpec> {
        let spec: SweepSpec = toml::from_str(text).context("failed to parse sweep config")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            bail!("sweep grid is empty: declare at least one [[param]]");
        }
        if self.outputs.is_empty() {
            bail!("no outputs requested");
        }
        for p in &self.params {
            p.expand()
                .with_context(|| format!("invalid grid for param `{}`", p.name))?;
        }
        let needs_quantity = self.outputs.iter().any(|o| o.starts_with("kappa"));
        if needs_quantity && self.quantity.is_none() {
            bail!("kappa outputs need a `quantity` field naming the stochastic variable");
        }
        if self.model == Model::CustomMatrix && self.matrix_file.is_none() {
            bail!("custom-matrix model needs a `matrix_file` path");
        }
        if let Some(expr) = &self.scaling {
            parse_scaling(expr)?;
        }
        Ok(())
    }
}

/// Parses a divisor expression: `name`, `name^k`, joined by `*`.
pub fn parse_scaling(expr: &str) -> Result<Vec<(String, i32)>> {
    let mut terms = Vec::new();
    for raw in expr.split('*') {
        let token = raw.trim();
        if token.is_empty() {
            bail!("scaling expression `{expr}` has an empty factor");
        }
        let (name, power) = match token.split_once('^') {
            Some((n, p)) => (
                n.trim(),
                p.trim()
                    .parse::<i32>()
                    .with_context(|| format!("bad exponent in scaling factor `{token}`"))?,
            ),
            None => (token, 1),
        };
        if name.is_empty() {
            bail!("scaling expression `{expr}` has an empty parameter name");
        }
        terms.push((name.to_string(), power));
    }
    Ok(terms)
}

/// Evaluates the divisor at one grid point.
pub fn scaling_divisor(terms: &[(String, i32)], lookup: impl Fn(&str) -> Option<f64>) -> Result<f64> {
    let mut divisor = 1.0;
    for (name, power) in terms {
        let v = lookup(name)
            .with_context(|| format!("scaling refers to unknown parameter `{name}`"))?;
        divisor *= v.powi(*power);
    }
    if divisor == 0.0 || !divisor.is_finite() {
        bail!("scaling divisor evaluated to {divisor}");
    }
    Ok(divisor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let text = r#"
model = "qubit-quench"
outputs = ["sigma"]

[[param]]
name = "theta"
value = 1.1

[[param]]
name = "beta"
start = 0.1
stop = 1.0
count = 5
"#;
        let spec = SweepSpec::from_toml(text).unwrap();
        assert_eq!(spec.model, Model::QubitQuench);
        assert_eq!(spec.params[1].expand().unwrap().len(), 5);
    }

    #[test]
    fn rejects_empty_grid() {
        let text = r#"
model = "tfim"
outputs = ["sigma"]
"#;
        assert!(SweepSpec::from_toml(text).is_err());
    }

    #[test]
    fn rejects_empty_value_list() {
        let p = ParamSpec {
            name: "beta".into(),
            value: None,
            start: None,
            stop: None,
            count: None,
            log: false,
            values: Some(vec![]),
        };
        assert!(p.expand().is_err());
    }

    #[test]
    fn scaling_expression_roundtrip() {
        let terms = parse_scaling("beta*delta_g^2").unwrap();
        assert_eq!(terms.len(), 2);
        let div = scaling_divisor(&terms, |n| match n {
            "beta" => Some(4.0),
            "delta_g" => Some(0.01),
            _ => None,
        })
        .unwrap();
        assert!((div - 4.0 * 1e-4).abs() < 1e-18);
        assert!(parse_scaling("beta**2").is_err());
    }
}
