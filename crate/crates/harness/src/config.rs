//! Experiment configuration files (TOML).
//!
//! ```toml
//! id = "fig2_noiseless"
//! max_iters = 3000
//! repeats = 1
//!
//! [problem]
//! generator = "least_squares"
//! n = 1000
//! d = 20
//! seed = 1
//!
//! [[method]]
//! name = "adagrad_norm"
//! mode = "stochastic"
//! eta = 1.0
//! b0 = 1.0
//! ```
//!
//! `b0_l` gives `b0` as a multiple of the instance's `L` instead.

use std::path::Path;

use adanorm::optimizers::{Method, Mode};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub max_iters: usize,
    #[serde(default)]
    pub stop_tol: f64,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default = "one")]
    pub stride: usize,
    /// Base seed for per-cell sampling streams.
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemSpec,
    #[serde(rename = "method")]
    pub methods: Vec<MethodSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ruig: Option<RuigSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    LeastSquares,
    /// Noiseless least squares that tolerates `n <= d` (PL rather than
    /// strongly convex).
    LeastSquaresDegenerate,
    LeastSquaresNoisy,
    Regularized,
    TwoLayerRelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSpec {
    /// The generator's own start (zero for least squares).
    #[default]
    Default,
    Zero,
    /// `x0_scale · w0` with `w0` standard Gaussian (scale defaults to 1).
    Gaussian,
    /// Same as `gaussian` with the scale defaulting to 100.
    Extreme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub generator: Generator,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub x0: StartSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default = "unit")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b0_l: Option<f64>,
    #[serde(default = "one")]
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    B0,
    B0L,
    Eta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Error (or gap) at the last iterate.
    #[default]
    FinalErrSq,
    /// Best error over the run.
    MinErrSq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    #[serde(default)]
    pub statistic: Statistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaScale {
    /// `alpha = factor`.
    Absolute,
    /// `alpha = factor · min_j ‖a_j‖²`.
    MinRowNormSq,
    /// `alpha = factor · (min_j mu_j)²`.
    MinComponentMuSq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuigSpec {
    pub epsilon: f64,
    pub alpha_scale: AlphaScale,
    pub alpha_factors: Vec<f64>,
    pub points: usize,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub eps: f64,
    #[serde(default = "default_delta_h")]
    pub delta_h: f64,
    /// RUIG tuple for the stochastic budget, as `alpha_factor · min_j ‖a_j‖²`.
    #[serde(default = "default_alpha_factor")]
    pub alpha_factor: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_delta_h() -> f64 {
    0.05
}

fn default_alpha_factor() -> f64 {
    0.45
}

fn default_gamma() -> f64 {
    0.5
}

impl MethodSpec {
    pub fn method(&self) -> Result<Method, HarnessError> {
        self.name
            .parse()
            .map_err(|e: adanorm::optimizers::OptimizerError| HarnessError::config(e.to_string()))
    }

    pub fn mode(&self) -> Result<Mode, HarnessError> {
        let method = self.method()?;
        match &self.mode {
            Some(m) => m
                .parse()
                .map_err(|e: adanorm::optimizers::OptimizerError| HarnessError::config(e.to_string())),
            None => Ok(method.implied_mode().unwrap_or(Mode::Stochastic)),
        }
    }

    pub fn b0_for(&self, smoothness: f64) -> Result<f64, HarnessError> {
        match (self.b0, self.b0_l) {
            (Some(b), None) => Ok(b),
            (None, Some(f)) => Ok(f * smoothness),
            (None, None) => Err(HarnessError::config(format!(
                "method `{}` needs `b0` or `b0_l`",
                self.name
            ))),
            (Some(_), Some(_)) => Err(HarnessError::config(format!(
                "method `{}` sets both `b0` and `b0_l`",
                self.name
            ))),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text)
            .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types serialize to TOML")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::config(m));
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return bad(format!("id `{}` must be nonempty [A-Za-z0-9_-]", self.id));
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        if self.stride == 0 {
            return bad("stride must be >= 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one [[method]] is required".into());
        }
        let p = &self.problem;
        if p.n == 0 || p.d == 0 {
            return bad("problem n and d must be >= 1".into());
        }
        match p.generator {
            Generator::TwoLayerRelu if p.m.is_none() => {
                return bad("two_layer_relu needs `m`".into())
            }
            Generator::Regularized if p.lambda.is_none() => {
                return bad("regularized needs `lambda`".into())
            }
            _ => {}
        }
        let mut labels = std::collections::HashSet::new();
        for (i, m) in self.methods.iter().enumerate() {
            let method = m.method()?;
            let mode = m.mode()?;
            if let Some(implied) = method.implied_mode() {
                if implied != mode {
                    return bad(format!("method `{}` cannot run in {mode} mode", m.name));
                }
            }
            if self.sweep.is_none() {
                m.b0_for(1.0)?;
            }
            if !labels.insert(self.label(i)) {
                return bad(format!("duplicate method label `{}`", self.label(i)));
            }
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep values must be nonempty".into());
            }
            if s.values.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
                return bad("sweep values must be strictly increasing".into());
            }
        }
        if let Some(r) = &self.ruig {
            if r.points == 0 || r.samples == 0 || r.alpha_factors.is_empty() {
                return bad("ruig needs points, samples >= 1 and alpha_factors".into());
            }
        }
        Ok(())
    }

    /// File-name-safe label of method `i`.
    pub fn label(&self, i: usize) -> String {
        let m = &self.methods[i];
        m.label.clone().unwrap_or_else(|| format!("m{i}_{}", m.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
id = "t"
max_iters = 10

[problem]
generator = "least_squares"
n = 20
d = 3

[[method]]
name = "adagrad_norm"
b0 = 1.0
"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!((c.repeats, c.stride, c.seed), (1, 1, 0));
        assert_eq!(c.methods[0].eta, 1.0);
        assert_eq!(c.methods[0].mode().unwrap(), Mode::Stochastic);
        assert_eq!(c.label(0), "m0_adagrad_norm");
    }

    #[test]
    fn unknown_field_is_reported_with_location() {
        let err = ExperimentConfig::parse(&MINIMAL.replace("max_iters", "max_iter")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("max_iter"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn mode_conflict_and_missing_b0_are_rejected() {
        let gd = MINIMAL.replace("adagrad_norm\"", "gd_const\"\nmode = \"stochastic\"");
        assert!(ExperimentConfig::parse(&gd).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("b0 = 1.0", "")).is_err());
        let both = MINIMAL.replace("b0 = 1.0", "b0 = 1.0\nb0_l = 2.0");
        assert!(ExperimentConfig::parse(&both).is_err());
    }

    #[test]
    fn round_trip_is_idempotent() {
        for (_, text) in crate::bundled::BUNDLED {
            let c = ExperimentConfig::parse(text).unwrap();
            let again = ExperimentConfig::parse(&c.to_toml()).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.to_toml(), again.to_toml());
        }
    }
}
