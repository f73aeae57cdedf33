//! Experiment configuration: a single document of key=value tokens or one
//! JSON object. Unknown keys are rejected; defaults are resolved at parse
//! time so a config fully determines a run.

use crate::error::{DegwaveError, Result};
use crate::params::{mu_critical, Parameters};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Hardy,
    Identities,
    Observability,
    Hum,
    Eigen,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hardy" => Ok(Self::Hardy),
            "identities" => Ok(Self::Identities),
            "observability" => Ok(Self::Observability),
            "hum" => Ok(Self::Hum),
            "eigen" => Ok(Self::Eigen),
            other => Err(DegwaveError::Config(format!(
                "unknown experiment kind '{other}' (expected hardy | identities | \
                 observability | hum | eigen)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Hardy => "hardy",
            Self::Identities => "identities",
            Self::Observability => "observability",
            Self::Hum => "hum",
            Self::Eigen => "eigen",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// One or more alpha values (comma-separated in the config).
    pub alphas: Vec<f64>,
    /// None means "critical": resolve to mu(alpha) per alpha.
    pub mu: Option<f64>,
    pub n: usize,
    /// Horizons; observability sweeps over all, other kinds use the first.
    pub horizons: Vec<f64>,
    /// None means dt = h.
    pub dt: Option<f64>,
    /// None means K = N/10.
    pub k_filter: Option<usize>,
    pub seed: u64,
    pub cg_tol: f64,
    pub max_cg: usize,
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn parameters(&self, alpha: f64) -> Result<Parameters> {
        match self.mu {
            Some(mu) => Parameters::new(alpha, mu),
            None => Parameters::critical(alpha),
        }
    }

    pub fn resolved_dt(&self) -> f64 {
        self.dt.unwrap_or(1.0 / self.n as f64)
    }

    pub fn resolved_k(&self) -> usize {
        self.k_filter.unwrap_or(self.n / 10).max(1)
    }

    /// Default horizon when none is given: just above the threshold.
    pub fn default_horizon(alpha: f64) -> f64 {
        4.0 / (2.0 - alpha) + 1.0
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| DegwaveError::Config(format!("{key}: expected a number, got '{v}'")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| DegwaveError::Config(format!("{key}: expected an integer, got '{v}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|tok| parse_f64(key, tok.trim()))
        .collect()
}

#[derive(Default)]
struct Builder {
    kind: Option<String>,
    alpha: Option<String>,
    mu: Option<String>,
    n: Option<String>,
    t: Option<String>,
    dt: Option<String>,
    k: Option<String>,
    seed: Option<String>,
    cg_tol: Option<String>,
    max_cg: Option<String>,
    out: Option<String>,
}

impl Builder {
    fn set(&mut self, key: &str, value: String, line: usize) -> Result<()> {
        let slot = match key {
            "kind" => &mut self.kind,
            "alpha" => &mut self.alpha,
            "mu" => &mut self.mu,
            "N" | "n" => &mut self.n,
            "T" => &mut self.t,
            "dt" => &mut self.dt,
            "K" => &mut self.k,
            "seed" => &mut self.seed,
            "cg_tol" => &mut self.cg_tol,
            "max_cg" => &mut self.max_cg,
            "out" => &mut self.out,
            other => {
                return Err(DegwaveError::Config(format!(
                    "line {line}: unknown key '{other}'"
                )))
            }
        };
        if slot.is_some() {
            return Err(DegwaveError::Config(format!("line {line}: duplicate key '{key}'")));
        }
        *slot = Some(value);
        Ok(())
    }

    fn finish(self) -> Result<ExperimentConfig> {
        let kind = ExperimentKind::parse(
            self.kind
                .as_deref()
                .ok_or_else(|| DegwaveError::Config("missing required key 'kind'".into()))?,
        )?;
        let alphas = parse_list(
            "alpha",
            self.alpha
                .as_deref()
                .ok_or_else(|| DegwaveError::Config("missing required key 'alpha'".into()))?,
        )?;
        for &a in &alphas {
            if a == 1.0 {
                return Err(DegwaveError::Config(
                    "alpha = 1 is an excluded regime".into(),
                ));
            }
            mu_critical(a).map_err(|e| DegwaveError::Config(e.to_string()))?;
        }
        let mu = match self.mu.as_deref() {
            None | Some("critical") => None,
            Some(v) => Some(parse_f64("mu", v)?),
        };
        let n = match self.n.as_deref() {
            None => 1000,
            Some(v) => parse_usize("N", v)?,
        };
        if n < 4 {
            return Err(DegwaveError::Config(format!("N = {n} is too coarse (need >= 4)")));
        }
        if let Some(mu) = mu {
            for &a in &alphas {
                let crit = mu_critical(a).unwrap();
                if mu > crit + 1e-14 {
                    return Err(DegwaveError::Config(format!(
                        "mu = {mu} exceeds the critical value {crit} at alpha = {a}"
                    )));
                }
            }
        }
        let horizons = match self.t.as_deref() {
            None => alphas.iter().map(|&a| ExperimentConfig::default_horizon(a)).collect(),
            Some(v) => parse_list("T", v)?,
        };
        for &t in &horizons {
            if t <= 0.0 {
                return Err(DegwaveError::Config(format!("T = {t} must be positive")));
            }
        }
        let dt = match self.dt.as_deref() {
            None | Some("auto") => None,
            Some(v) => {
                let d = parse_f64("dt", v)?;
                if d <= 0.0 {
                    return Err(DegwaveError::Config(format!("dt = {d} must be positive")));
                }
                Some(d)
            }
        };
        let k_filter = match self.k.as_deref() {
            None => None,
            Some(v) => {
                let k = parse_usize("K", v)?;
                if k == 0 || 10 * k > n {
                    return Err(DegwaveError::Config(format!(
                        "K = {k} outside 1..=N/10 with N = {n}"
                    )));
                }
                Some(k)
            }
        };
        let seed = match self.seed.as_deref() {
            None => 0,
            Some(v) => v.parse::<u64>().map_err(|_| {
                DegwaveError::Config(format!("seed: expected an integer, got '{v}'"))
            })?,
        };
        let cg_tol = match self.cg_tol.as_deref() {
            None => 1e-8,
            Some(v) => parse_f64("cg_tol", v)?,
        };
        let max_cg = match self.max_cg.as_deref() {
            None => 500,
            Some(v) => parse_usize("max_cg", v)?,
        };
        Ok(ExperimentConfig {
            kind,
            alphas,
            mu,
            n,
            horizons,
            dt,
            k_filter,
            seed,
            cg_tol,
            max_cg,
            out: self.out,
        })
    }
}

fn json_scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Array(items) => {
            let parts: Vec<String> = items
                .iter()
                .map(|item| json_scalar(key, item))
                .collect::<Result<_>>()?;
            Ok(parts.join(","))
        }
        other => Err(DegwaveError::Config(format!(
            "{key}: unsupported JSON value {other}"
        ))),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let trimmed = text.trim_start();
    let mut builder = Builder::default();
    if trimmed.starts_with('{') {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| DegwaveError::Config(format!("JSON parse error: {e}")))?;
        let obj = doc.as_object().ok_or_else(|| {
            DegwaveError::Config("JSON config must be a single object".into())
        })?;
        for (key, value) in obj {
            builder.set(key, json_scalar(key, value)?, 1)?;
        }
    } else {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                let (key, value) = token.split_once('=').ok_or_else(|| {
                    DegwaveError::Config(format!(
                        "line {}: expected key=value, got '{token}'",
                        lineno + 1
                    ))
                })?;
                builder.set(key, value.to_string(), lineno + 1)?;
            }
        }
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_example() {
        let c = parse_config("kind=hum alpha=0.5 mu=critical N=500 T=3").unwrap();
        assert_eq!(c.kind, ExperimentKind::Hum);
        assert_eq!(c.alphas, vec![0.5]);
        assert!(c.mu.is_none());
        let p = c.parameters(0.5).unwrap();
        assert_eq!(p.mu(), 0.0625);
        assert_eq!(c.n, 500);
        assert_eq!(c.horizons, vec![3.0]);
    }

    #[test]
    fn defaults_resolved() {
        let c = parse_config("kind=hardy alpha=0 N=1000").unwrap();
        assert_eq!(c.resolved_dt(), 1e-3);
        assert_eq!(c.seed, 0);
        assert_eq!(c.resolved_k(), 100);
        assert_eq!(c.horizons, vec![3.0]); // 4/(2-0) + 1
    }

    #[test]
    fn alpha_one_rejected() {
        assert!(parse_config("kind=hardy alpha=1").is_err());
        assert!(parse_config("kind=hardy alpha=0,1,0.5").is_err());
    }

    #[test]
    fn mu_range_checked() {
        assert!(parse_config("kind=eigen alpha=0.5 mu=0.3").is_err());
        assert!(parse_config("kind=eigen alpha=0.5 mu=0.05").is_ok());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config("kind=hardy alpha=0 bogus=1").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn json_form() {
        let c = parse_config(
            r#"{"kind": "observability", "alpha": 0, "mu": 0, "N": 500, "T": [2, 3, 4]}"#,
        )
        .unwrap();
        assert_eq!(c.kind, ExperimentKind::Observability);
        assert_eq!(c.horizons, vec![2.0, 3.0, 4.0]);
        assert_eq!(c.mu, Some(0.0));
    }

    #[test]
    fn comma_separated_alpha_sweep() {
        let c = parse_config("kind=hardy alpha=0,0.25,0.5,0.75,1.25,1.5,1.75").unwrap();
        assert_eq!(c.alphas.len(), 7);
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = parse_config("kind=hardy\nalpha 0.5").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
