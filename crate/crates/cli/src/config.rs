//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use parafis::harness::{DatasetLayout, LabelPosition, ModelSpec, ProtocolPConfig, ReplaySource};
use parafis::{CreationRule, HyperParams, InitMethod};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; `--seed` overrides it, and one of the two is required.
    pub seed: Option<u64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Trailing window used for the metric curves and the fits.
    #[serde(default = "default_smoothing")]
    pub smoothing: usize,
    /// Output directory, relative to the config file.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub dataset: DatasetConfig,
    pub protocol: ProtocolConfig,
    #[serde(rename = "models")]
    pub models: Vec<ModelConfig>,
}

fn default_repeats() -> usize {
    1
}

fn default_smoothing() -> usize {
    parafis::analysis::METRIC_WINDOW
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Data file, relative to the config file.
    pub path: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub label: LabelSpec,
    pub feature_count: Option<usize>,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_delimiter() -> char {
    ','
}

fn default_true() -> bool {
    true
}

/// `"first"`, `"last"` or a 0-based column index.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LabelSpec {
    Named(String),
    Column(usize),
}

impl Default for LabelSpec {
    fn default() -> Self {
        LabelSpec::Named("last".into())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// `pendigits`, `letters` or `laviola`; explicit fields override it.
    pub preset: Option<String>,
    pub t1: Option<usize>,
    pub t2: Option<usize>,
    pub t3: Option<usize>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub n3: Option<usize>,
    pub class_order: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CreationRuleName {
    Separability,
    GefsStar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethodName {
    I1,
    I2,
    I3,
    Promotion,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub creation_rule: Option<CreationRuleName>,
    pub init_method: Option<InitMethodName>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    pub n_min: Option<u64>,
    pub omega: Option<f64>,
    pub kappa: Option<f64>,
    pub m_exp: Option<f64>,
    /// Replay the traces recorded by this model instead of detecting drift.
    pub replay_from: Option<String>,
}

impl ModelConfig {
    pub fn hyper(&self) -> HyperParams {
        let d = HyperParams::default();
        HyperParams {
            alpha1: self.alpha1.unwrap_or(d.alpha1),
            alpha2: self.alpha2.unwrap_or(d.alpha2),
            n_min: self.n_min.unwrap_or(d.n_min),
            omega: self.omega.unwrap_or(d.omega),
            init_method: match self.init_method {
                None => d.init_method,
                Some(InitMethodName::I1) => InitMethod::I1,
                Some(InitMethodName::I2) => InitMethod::I2,
                Some(InitMethodName::I3) => InitMethod::I3,
                Some(InitMethodName::Promotion) => InitMethod::AnticipationPromotion,
            },
            creation_rule: match self.creation_rule {
                None => d.creation_rule,
                Some(CreationRuleName::Separability) => CreationRule::SeparabilityConditions,
                Some(CreationRuleName::GefsStar) => CreationRule::GefsStar,
            },
            kappa: self.kappa.unwrap_or(d.kappa),
            m_exp: self.m_exp.unwrap_or(d.m_exp),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            name: self.name.clone(),
            hyper: self.hyper(),
            replay: self.replay_from.clone().map(ReplaySource::Config),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`; relative paths inside the file are resolved against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.dataset.path = base.join(&cfg.dataset.path);
        cfg.output = base.join(&cfg.output);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.models.is_empty() {
            return Err(CliError::Usage("models: at least one model is required".into()));
        }
        if self.repeats == 0 {
            return Err(CliError::Usage("repeats: must be at least 1".into()));
        }
        if self.smoothing == 0 {
            return Err(CliError::Usage("smoothing: window must be at least 1".into()));
        }
        for (i, m) in self.models.iter().enumerate() {
            if m.name.is_empty() || m.name.contains(['/', '\\', ',']) {
                return Err(CliError::Usage(format!("models[{i}].name: {:?} is not a usable name", m.name)));
            }
            m.hyper().validate().map_err(|e| CliError::Usage(format!("models[{i}] ({}): {e}", m.name)))?;
            if let Some(src) = &m.replay_from {
                if !self.models.iter().any(|o| &o.name == src) {
                    return Err(CliError::Usage(format!("models[{i}].replay_from: unknown model {src:?}")));
                }
            }
        }
        self.layout()?;
        self.protocol()?.validate().map_err(|e| CliError::Usage(format!("protocol: {e}")))?;
        Ok(())
    }

    pub fn layout(&self) -> Result<DatasetLayout, CliError> {
        let d = &self.dataset;
        let label = match &d.label {
            LabelSpec::Named(s) if s == "first" => LabelPosition::First,
            LabelSpec::Named(s) if s == "last" => LabelPosition::Last,
            LabelSpec::Named(s) => {
                return Err(CliError::Usage(format!(
                    "dataset.label: expected \"first\", \"last\" or a column index, got {s:?}"
                )))
            }
            LabelSpec::Column(c) => LabelPosition::Column(*c),
        };
        Ok(DatasetLayout {
            delimiter: d.delimiter,
            label,
            feature_count: d.feature_count,
            has_header: d.has_header,
            normalize: d.normalize,
        })
    }

    pub fn protocol(&self) -> Result<ProtocolPConfig, CliError> {
        let p = &self.protocol;
        let base = match p.preset.as_deref() {
            Some("pendigits") => Some(ProtocolPConfig::pendigits()),
            Some("letters") => Some(ProtocolPConfig::letters()),
            Some("laviola") => Some(ProtocolPConfig::laviola()),
            Some(other) => return Err(CliError::Usage(format!("protocol.preset: unknown preset {other:?}"))),
            None => None,
        };
        let field = |v: Option<usize>, from: Option<usize>, name: &str| {
            v.or(from).ok_or_else(|| CliError::Usage(format!("protocol.{name}: missing (no preset given)")))
        };
        let b = base.as_ref();
        Ok(ProtocolPConfig {
            t1: field(p.t1, b.map(|b| b.t1), "t1")?,
            t2: field(p.t2, b.map(|b| b.t2), "t2")?,
            t3: field(p.t3, b.map(|b| b.t3), "t3")?,
            n1: field(p.n1, b.map(|b| b.n1), "n1")?,
            n2: field(p.n2, b.map(|b| b.n2), "n2")?,
            n3: field(p.n3, b.map(|b| b.n3), "n3")?,
            class_order: p.class_order.clone(),
        })
    }

    pub fn specs(&self) -> Vec<ModelSpec> {
        self.models.iter().map(ModelConfig::spec).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
[dataset]
path = "d.csv"
[protocol]
preset = "pendigits"
[[models]]
name = "Para1"
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.repeats, 1);
        assert_eq!(cfg.smoothing, 5);
        assert_eq!(cfg.models[0].hyper(), HyperParams::default());
        assert_eq!(cfg.protocol().unwrap(), ProtocolPConfig::pendigits());
        assert_eq!(cfg.layout().unwrap(), DatasetLayout::default());
    }

    #[test]
    fn overrides_and_enums() {
        let text = MINIMAL.replace(
            "name = \"Para1\"",
            "name = \"G\"\ncreation_rule = \"gefs_star\"\ninit_method = \"i3\"\nkappa = 1.6\nalpha2 = 0.95",
        ) + "[[models]]\nname = \"R\"\ninit_method = \"i1\"\nreplay_from = \"G\"\n";
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let g = cfg.models[0].hyper();
        assert_eq!(g.creation_rule, CreationRule::GefsStar);
        assert_eq!(g.init_method, InitMethod::I3);
        assert_eq!(g.kappa, 1.6);
        assert_eq!(g.alpha2, 0.95);
        assert_eq!(cfg.specs()[1].replay, Some(ReplaySource::Config("G".into())));
    }

    #[test]
    fn field_level_errors() {
        let cases = [
            (MINIMAL.replace("[[models]]\nname = \"Para1\"\n", "models = []\n"), "models"),
            (MINIMAL.replace("name = \"Para1\"", "name = \"P\"\nalpha2 = 1.5"), "models[0]"),
            (MINIMAL.replace("name = \"Para1\"", "name = \"P\"\ninit_method = \"i9\""), "init_method"),
            (MINIMAL.replace("name = \"Para1\"", "name = \"P\"\nreplay_from = \"Q\""), "replay_from"),
            (MINIMAL.replace("preset = \"pendigits\"", "t1 = 5"), "protocol.t2"),
            (MINIMAL.replace("preset = \"pendigits\"", "preset = \"mnist\""), "protocol.preset"),
            (MINIMAL.replace("seed = 7", "seed = 7\nbogus = 1"), "bogus"),
            (MINIMAL.replace("path = \"d.csv\"", "path = \"d.csv\"\nlabel = \"middle\""), "dataset.label"),
        ];
        for (text, field) in cases {
            let err = ExperimentConfig::parse(&text).unwrap_err();
            assert!(matches!(err, CliError::Usage(_)));
            assert!(err.to_string().contains(field), "{field}: {err}");
        }
    }
}
