//! Run configuration as a `key = value` text file whose keys are the field
//! names of [`RunConfig`].

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experts::{enumerate_pool, ExpertId, ExpertParams, ScaleParams};
use crate::selection::SelectionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Roulette selection of `executive_count` experts per frame.
    Adaptive,
    /// Every expert of the pool is executive in every frame.
    AllExperts,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Adaptive => "adaptive",
            Mode::AllExperts => "all-experts",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Mode::Adaptive),
            "all-experts" | "all" => Ok(Mode::AllExperts),
            _ => Err(Error::Config(format!(
                "unknown mode {s:?} (adaptive | all-experts)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSourceSpec {
    Synthetic,
    ChannelFile(PathBuf),
}

impl fmt::Display for FeatureSourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSourceSpec::Synthetic => f.write_str("synthetic"),
            FeatureSourceSpec::ChannelFile(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for FeatureSourceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "" => Err(Error::Config(
                "features must be 'synthetic' or a channel-file path".into(),
            )),
            "synthetic" => Ok(FeatureSourceSpec::Synthetic),
            path => Ok(FeatureSourceSpec::ChannelFile(PathBuf::from(path))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lambda: f64,
    pub eta: f64,
    pub sigma_factor: f64,
    pub padding: f64,
    pub cell_size: usize,
    pub max_template_area: f64,
    pub color_mask: bool,
    pub color_bins: usize,
    pub scale_count: usize,
    pub scale_step: f64,
    pub scale_eta: f64,
    pub scale_lambda: f64,
    pub scale_sigma_factor: f64,
    pub scale_model_max_area: f64,
    pub executive_count: usize,
    pub delta_t: usize,
    pub rho: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub include_self_overlap: bool,
    pub seed: u64,
    pub features: FeatureSourceSpec,
    pub mode: Mode,
    /// Restricts the expert pool; `None` is the full 63-expert pool.
    pub pool: Option<Vec<ExpertId>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = ExpertParams::default();
        let s = SelectionConfig::default();
        RunConfig {
            lambda: e.lambda,
            eta: e.eta,
            sigma_factor: e.sigma_factor,
            padding: e.padding,
            cell_size: e.cell_size,
            max_template_area: e.max_template_area,
            color_mask: e.color_mask,
            color_bins: e.color_bins,
            scale_count: e.scale.count,
            scale_step: e.scale.step,
            scale_eta: e.scale.eta,
            scale_lambda: e.scale.lambda,
            scale_sigma_factor: e.scale.sigma_factor,
            scale_model_max_area: e.scale.model_max_area,
            executive_count: s.k,
            delta_t: s.delta_t,
            rho: s.rho,
            mu: s.mu,
            epsilon: s.epsilon,
            include_self_overlap: s.include_self_overlap,
            seed: s.rng_seed,
            features: FeatureSourceSpec::Synthetic,
            mode: Mode::Adaptive,
            pool: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_pool(value: &str) -> Result<Option<Vec<ExpertId>>> {
    if value == "all" {
        return Ok(None);
    }
    let mut ids = value
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<ExpertId>()
                .map_err(|e| Error::Config(format!("pool entry {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    ids.sort_unstable();
    ids.dedup();
    Ok(Some(ids))
}

impl RunConfig {
    pub fn expert_params(&self) -> ExpertParams {
        ExpertParams {
            lambda: self.lambda,
            eta: self.eta,
            sigma_factor: self.sigma_factor,
            padding: self.padding,
            cell_size: self.cell_size,
            max_template_area: self.max_template_area,
            color_mask: self.color_mask,
            color_bins: self.color_bins,
            scale: ScaleParams {
                count: self.scale_count,
                step: self.scale_step,
                eta: self.scale_eta,
                lambda: self.scale_lambda,
                sigma_factor: self.scale_sigma_factor,
                model_max_area: self.scale_model_max_area,
            },
        }
    }

    /// Experts the tracker instantiates, in canonical order.
    pub fn pool_ids(&self) -> Vec<ExpertId> {
        self.pool.clone().unwrap_or_else(enumerate_pool)
    }

    /// In all-experts mode the executive count is the pool size.
    pub fn selection_config(&self) -> SelectionConfig {
        let k = match self.mode {
            Mode::Adaptive => self.executive_count,
            Mode::AllExperts => self.pool_ids().len(),
        };
        SelectionConfig {
            k,
            delta_t: self.delta_t,
            rho: self.rho,
            mu: self.mu,
            epsilon: self.epsilon,
            rng_seed: self.seed,
            include_self_overlap: self.include_self_overlap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            e => e,
        };
        if matches!(&self.pool, Some(p) if p.is_empty()) {
            return Err(Error::Config("pool override is empty".into()));
        }
        self.expert_params().validate().map_err(as_config)?;
        self.selection_config()
            .validate(self.pool_ids().len())
            .map_err(as_config)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lambda" => self.lambda = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "sigma_factor" => self.sigma_factor = parse(key, value)?,
            "padding" => self.padding = parse(key, value)?,
            "cell_size" => self.cell_size = parse(key, value)?,
            "max_template_area" => self.max_template_area = parse(key, value)?,
            "color_mask" => self.color_mask = parse(key, value)?,
            "color_bins" => self.color_bins = parse(key, value)?,
            "scale_count" => self.scale_count = parse(key, value)?,
            "scale_step" => self.scale_step = parse(key, value)?,
            "scale_eta" => self.scale_eta = parse(key, value)?,
            "scale_lambda" => self.scale_lambda = parse(key, value)?,
            "scale_sigma_factor" => self.scale_sigma_factor = parse(key, value)?,
            "scale_model_max_area" => self.scale_model_max_area = parse(key, value)?,
            "executive_count" => self.executive_count = parse(key, value)?,
            "delta_t" => self.delta_t = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "include_self_overlap" => self.include_self_overlap = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "features" => self.features = value.parse()?,
            "mode" => self.mode = value.parse()?,
            "pool" => self.pool = parse_pool(value)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment line.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }

    /// Every key with its value; parsing the result reproduces `self` exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("lambda", self.lambda.to_string());
        kv("eta", self.eta.to_string());
        kv("sigma_factor", self.sigma_factor.to_string());
        kv("padding", self.padding.to_string());
        kv("cell_size", self.cell_size.to_string());
        kv("max_template_area", self.max_template_area.to_string());
        kv("color_mask", self.color_mask.to_string());
        kv("color_bins", self.color_bins.to_string());
        kv("scale_count", self.scale_count.to_string());
        kv("scale_step", self.scale_step.to_string());
        kv("scale_eta", self.scale_eta.to_string());
        kv("scale_lambda", self.scale_lambda.to_string());
        kv("scale_sigma_factor", self.scale_sigma_factor.to_string());
        kv(
            "scale_model_max_area",
            self.scale_model_max_area.to_string(),
        );
        kv("executive_count", self.executive_count.to_string());
        kv("delta_t", self.delta_t.to_string());
        kv("rho", self.rho.to_string());
        kv("mu", self.mu.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv(
            "include_self_overlap",
            self.include_self_overlap.to_string(),
        );
        kv("seed", self.seed.to_string());
        kv("features", self.features.to_string());
        kv("mode", self.mode.to_string());
        kv(
            "pool",
            match &self.pool {
                None => "all".to_owned(),
                Some(ids) => ids
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            },
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.executive_count, 28);
        assert_eq!(c.delta_t, 5);
        assert_eq!(c.pool_ids().len(), 63);
    }

    #[test]
    fn text_round_trips() {
        let c = RunConfig {
            lambda: 0.1 + 0.2,
            seed: u64::MAX,
            mode: Mode::AllExperts,
            features: FeatureSourceSpec::ChannelFile("maps/seq.facf".into()),
            pool: Some(vec!["HOG".parse().unwrap(), "HOG+L37".parse().unwrap()]),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::parse_text(&c.to_text()).unwrap(), c);
        let d = RunConfig::default();
        assert_eq!(RunConfig::parse_text(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn bad_input_is_a_config_error() {
        for text in [
            "nope = 1",
            "lambda",
            "eta = fast",
            "mode = greedy",
            "pool = HOG+X",
        ] {
            let e = RunConfig::parse_text(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}");
        }
        let c = RunConfig::parse_text("executive_count = 64").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = RunConfig::parse_text("pool = HOG,L5\nexecutive_count = 3").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::parse_text("pool = HOG,L5\nmode = all-experts").unwrap();
        c.validate().unwrap();
        assert_eq!(c.selection_config().k, 2);
    }
}
