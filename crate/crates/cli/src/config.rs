use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use kgreason_core::context::{RetrievalOptions, DEFAULT_MAX_TOKENS, DEFAULT_PER_RELATION_CAP};
use kgreason_core::render::DEFAULT_STEP_DISPLAY_CAP;
use kgreason_core::{CorpusConfig, CurriculumSchedule, QueryType, TokenBudget};
use serde::{Deserialize, Serialize};

/// Settings shared by all subcommands. Loaded from a JSON file when
/// `--config` is given; command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub budget: usize,
    /// `s1=80,10,10;s2=10,80,10;s3=10,10,80`
    pub mix: String,
    /// Comma-separated type tags; empty means all fourteen.
    pub types: String,
    pub per_type: usize,
    /// Samples per stage; absent means as many as the pools allow.
    pub stage_size: Option<usize>,
    pub disjoint_stages: bool,
    pub per_relation_cap: usize,
    pub step_display_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dataset: None,
            out: None,
            seed: 0,
            budget: DEFAULT_MAX_TOKENS,
            mix: "s1=80,10,10;s2=10,80,10;s3=10,10,80".into(),
            types: String::new(),
            per_type: 50,
            stage_size: None,
            disjoint_stages: true,
            per_relation_cap: DEFAULT_PER_RELATION_CAP,
            step_display_cap: DEFAULT_STEP_DISPLAY_CAP,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| kgreason_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for (name, v) in [
            ("budget", self.budget),
            ("per_type", self.per_type),
            ("per_relation_cap", self.per_relation_cap),
            ("step_display_cap", self.step_display_cap),
        ] {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        if self.stage_size == Some(0) {
            bail!("stage_size must be positive");
        }
        self.schedule()?;
        self.query_types()?;
        Ok(())
    }

    pub fn dataset(&self) -> anyhow::Result<&Path> {
        self.dataset.as_deref().context("no dataset directory given (--dataset)")
    }

    pub fn out(&self) -> anyhow::Result<&Path> {
        self.out.as_deref().context("no output directory given (--out)")
    }

    pub fn query_types(&self) -> anyhow::Result<Vec<QueryType>> {
        if self.types.trim().is_empty() {
            return Ok(QueryType::ALL.to_vec());
        }
        let mut out = Vec::new();
        for tag in self.types.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let ty: QueryType = tag.parse()?;
            if ty == QueryType::General {
                bail!("`general` queries cannot be sampled");
            }
            if !out.contains(&ty) {
                out.push(ty);
            }
        }
        Ok(out)
    }

    pub fn schedule(&self) -> anyhow::Result<CurriculumSchedule> {
        let mut schedule = CurriculumSchedule::with_seed(self.seed);
        schedule.set_mixes(&self.mix)?;
        schedule.disjoint = self.disjoint_stages;
        for stage in &mut schedule.stages {
            stage.size = self.stage_size;
        }
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn corpus_config(&self) -> anyhow::Result<CorpusConfig> {
        Ok(CorpusConfig {
            budget: TokenBudget::new(self.budget)?,
            retrieval: RetrievalOptions {
                per_relation_cap: self.per_relation_cap,
            },
            step_display_cap: self.step_display_cap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_mix_is_rejected() {
        let c = PipelineConfig {
            mix: "s1=80,10,5".into(),
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"seed": 7, "types": "1p, 2in"}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.budget, 4096);
        assert_eq!(c.query_types().unwrap(), vec![QueryType::P1, QueryType::In2]);
    }
}
