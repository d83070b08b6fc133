//! Run configuration, read from and written back to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finetune::FineTuneConfig;
use crate::ica::IcaOptions;
use crate::ingest::DuplicatePolicy;
use crate::preprocess::{ClassifyParams, LiulParams, MIN_ENSEMBLE};
use crate::synth::CorpusSpec;

/// File locations of one customer's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomerPaths {
    pub id: String,
    pub power: PathBuf,
    pub temperature: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
}

/// Where `disaggregate` and `evaluate` find their data.
///
/// Customers listed explicitly take precedence. Otherwise every
/// subdirectory of `corpus_dir` holding a `power.csv` is a customer named
/// after the directory, as laid out by `synth`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_dir: Option<PathBuf>,
    pub customers: Vec<CustomerPaths>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    /// Days missing more than this fraction of their 15-minute bins are dropped.
    pub max_missing_fraction: f64,
    pub duplicate_policy: DuplicatePolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_missing_fraction: 0.05,
            duplicate_policy: DuplicatePolicy::Reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualOptions {
    /// Calendar-nearest mild days per hot day.
    pub k_use: usize,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        Self { k_use: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Rating used when a customer has no ground truth to derive one from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nameplate_kw: Option<f64>,
    /// Also write SVG plots next to the report CSVs.
    pub svg: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            nameplate_kw: None,
            svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub input: InputConfig,
    pub synth: CorpusSpec,
    pub ingest: IngestOptions,
    pub classify: ClassifyParams,
    pub liul: LiulParams,
    pub residual: ResidualOptions,
    pub ica: IcaOptions,
    pub finetune: FineTuneConfig,
    pub eval: EvalOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dir: PathBuf::from("run"),
            input: InputConfig::default(),
            synth: CorpusSpec::default(),
            ingest: IngestOptions::default(),
            classify: ClassifyParams::default(),
            liul: LiulParams::default(),
            residual: ResidualOptions::default(),
            ica: IcaOptions::default(),
            finetune: FineTuneConfig::default(),
            eval: EvalOptions::default(),
        }
    }
}

/// False for NaN as well as for values ≤ 0.
fn positive(x: f64) -> bool {
    x > 0.0
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative input paths and `out_dir` are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.input.resolve_relative(dir);
            if cfg.out_dir.is_relative() {
                cfg.out_dir = dir.join(&cfg.out_dir);
            }
        }
        Ok(cfg)
    }

    /// Every field, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.ingest.max_missing_fraction) {
            return bad("ingest.max_missing_fraction must lie in [0, 1]".into());
        }
        let c = &self.classify;
        if !(c.mild_lo_c <= c.mild_hi_c && c.mild_hi_c < c.hot_max_c) {
            return bad("classify bands must satisfy mild_lo_c ≤ mild_hi_c < hot_max_c".into());
        }
        if !(0.0..=1.0).contains(&c.max_ks) {
            return bad("classify.max_ks must lie in [0, 1]".into());
        }
        let l = &self.liul;
        if !positive(l.min_jump_kw) || l.max_duration_slots == 0 || !(0.0..=1.0).contains(&l.fall_ratio) {
            return bad("liul: min_jump_kw > 0, max_duration_slots ≥ 1, fall_ratio in [0, 1]".into());
        }
        if self.residual.k_use < MIN_ENSEMBLE {
            return bad(format!("residual.k_use must be at least {MIN_ENSEMBLE}"));
        }
        if !positive(self.ica.tol) {
            return bad("ica.tol must be positive".into());
        }
        if let Some(r) = self.eval.nameplate_kw {
            if !positive(r) {
                return bad("eval.nameplate_kw must be positive".into());
            }
        }
        self.finetune.validate()?;
        self.synth.validate()?;
        Ok(())
    }
}

impl InputConfig {
    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = self.corpus_dir.as_mut() {
            fix(d);
        }
        for c in &mut self.customers {
            fix(&mut c.power);
            fix(&mut c.temperature);
            if let Some(t) = c.truth.as_mut() {
                fix(t);
            }
        }
    }

    /// Explicit customers, or those discovered under `corpus_dir`, sorted by id.
    pub fn resolve_customers(&self) -> Result<Vec<CustomerPaths>> {
        let mut out = if !self.customers.is_empty() {
            self.customers.clone()
        } else if let Some(dir) = &self.corpus_dir {
            let entries = std::fs::read_dir(dir).map_err(|e| Error::Config(format!("corpus_dir {}: {e}", dir.display())))?;
            let mut found = Vec::new();
            for entry in entries {
                let path = entry.map_err(|e| Error::io(dir, e))?.path();
                if path.join("power.csv").is_file() {
                    let id = path
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    let truth = path.join("truth.csv");
                    found.push(CustomerPaths {
                        id,
                        power: path.join("power.csv"),
                        temperature: path.join("temperature.csv"),
                        truth: truth.is_file().then_some(truth),
                    });
                }
            }
            found
        } else {
            return Err(Error::Config("input needs corpus_dir or customers".into()));
        };
        out.sort_by(|a, b| a.id.cmp(&b.id));
        if out.is_empty() {
            return Err(Error::Config("no customers found".into()));
        }
        if out.windows(2).any(|w| w[0].id == w[1].id) {
            return Err(Error::Config("customer ids must be unique".into()));
        }
        for c in &out {
            for p in [Some(&c.power), Some(&c.temperature), c.truth.as_ref()].into_iter().flatten() {
                if !p.is_file() {
                    return Err(Error::Config(format!("customer `{}`: {} does not exist", c.id, p.display())));
                }
            }
        }
        Ok(out)
    }
}
