//! Run configuration: built-in defaults, overlaid by a TOML file, overlaid by
//! command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use schedrag::alignment::{LossWeights, TrainConfig};
use schedrag::eval::AccuracyMode;
use schedrag::gateway::GatewayConfig;
use schedrag::prompts::TaskKind;
use schedrag::sampler::SamplerConfig;
use schedrag::synth::{GeneratorParams, DEFAULT_TARGET_MEAN_DEGREE, DEFAULT_WINDOW};

use crate::error::CliError;

pub const DEFAULT_COLLECTION_SEED: u64 = 42;
pub const DEFAULT_INFERENCE_SEED: u64 = 12345;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsSection,
    pub seeds: SeedsSection,
    pub generate: GenerateSection,
    pub knowledge: KnowledgeSection,
    pub sampler: SamplerSection,
    pub gateway: GatewaySection,
    pub eval: EvalSection,
    pub loss: LossSection,
    pub polish: PolishSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub schedule: Option<PathBuf>,
    pub corpus_dir: Option<PathBuf>,
    pub term_file: Option<PathBuf>,
    pub kb_dir: Option<PathBuf>,
    /// Directory with `rules/` and `tasks/` templates replacing the built-in ones.
    pub prompts_dir: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    /// Preference store; defaults to `preferences.jsonl` inside the run directory.
    pub preference_db: Option<PathBuf>,
    /// Transcript replayed by the `mock:replay` backend.
    pub transcript: Option<PathBuf>,
    /// JSON object of task key to answer text for the `mock:table` backend.
    pub answers: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            schedule: None,
            corpus_dir: None,
            term_file: None,
            kb_dir: None,
            prompts_dir: None,
            outcomes: None,
            preference_db: None,
            transcript: None,
            answers: None,
            output_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedsSection {
    /// Drives generation, masking, context sampling, corruption and training.
    pub collection: u64,
    /// Sent with every model request.
    pub inference: u64,
}

impl Default for SeedsSection {
    fn default() -> Self {
        Self {
            collection: DEFAULT_COLLECTION_SEED,
            inference: DEFAULT_INFERENCE_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub n_activities: usize,
    pub target_mean_degree: f64,
    pub window: usize,
    pub max_duration_days: u32,
    pub start_date: NaiveDate,
}

impl Default for GenerateSection {
    fn default() -> Self {
        let p = GeneratorParams::default();
        Self {
            n_activities: p.n_activities,
            target_mean_degree: DEFAULT_TARGET_MEAN_DEGREE,
            window: DEFAULT_WINDOW,
            max_duration_days: p.max_duration_days,
            start_date: p.start_date,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnowledgeSection {
    pub dimension: usize,
    pub chunk_tokens: usize,
    pub global_k: usize,
}

impl Default for KnowledgeSection {
    fn default() -> Self {
        Self {
            dimension: schedrag::knowledge::DEFAULT_DIMENSION,
            chunk_tokens: schedrag::knowledge::DEFAULT_CHUNK_TOKENS,
            global_k: schedrag::knowledge::DEFAULT_GLOBAL_K,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub max_sequential_hops: usize,
    pub max_wbs_levels: usize,
    pub paths_per_direction: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let s = SamplerConfig::default();
        Self {
            max_sequential_hops: s.max_sequential_hops,
            max_wbs_levels: s.max_wbs_levels,
            paths_per_direction: s.paths_per_direction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewaySection {
    /// `http` or `mock:<echo|wrong|replay|table|strip|identity>`.
    pub backend: String,
    /// Client settings; `request_seed` is replaced by the inference seed.
    pub client: GatewayConfig,
}

impl Default for GatewaySection {
    fn default() -> Self {
        Self {
            backend: "mock:echo".into(),
            client: GatewayConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    /// Row, static knowledge, sampled graph context and rules.
    #[default]
    Graph,
    /// Row and rules only.
    Row,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub tasks: Vec<TaskKind>,
    pub k: usize,
    pub tolerance_days: Option<u32>,
    pub mode: AccuracyMode,
    pub context: ContextMode,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            tasks: TaskKind::SCORED.to_vec(),
            k: schedrag::eval::DEFAULT_K,
            tolerance_days: None,
            mode: AccuracyMode::Cells,
            context: ContextMode::Graph,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RuleLossKind {
    /// Cross-entropy against `rule_applicable` labels where present.
    #[default]
    Applicability,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub alpha: f64,
    pub beta: f64,
    pub sft_epochs: usize,
    pub align_epochs: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub rule_loss: RuleLossKind,
}

impl Default for LossSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            alpha: t.weights.alpha,
            beta: t.weights.beta,
            sft_epochs: t.sft_epochs,
            align_epochs: t.align_epochs,
            learning_rate: t.learning_rate,
            init_scale: t.init_scale,
            rule_loss: RuleLossKind::Applicability,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolishSection {
    pub bin_width: usize,
}

impl Default for PolishSection {
    fn default() -> Self {
        Self { bin_width: 25 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| e.at(path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(e.message().to_owned()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn generator_params(&self) -> GeneratorParams {
        GeneratorParams {
            n_activities: self.generate.n_activities,
            target_mean_degree: self.generate.target_mean_degree,
            window: self.generate.window,
            max_duration_days: self.generate.max_duration_days,
            start_date: self.generate.start_date,
            seed: self.seeds.collection,
            ..GeneratorParams::default()
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            max_sequential_hops: self.sampler.max_sequential_hops,
            max_wbs_levels: self.sampler.max_wbs_levels,
            paths_per_direction: self.sampler.paths_per_direction,
            rng_seed: self.seeds.collection,
        }
    }

    pub fn gateway_config(&self) -> GatewayConfig {
        GatewayConfig {
            request_seed: self.seeds.inference,
            ..self.gateway.client.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            weights: LossWeights {
                alpha: self.loss.alpha,
                beta: self.loss.beta,
            },
            sft_epochs: self.loss.sft_epochs,
            align_epochs: self.loss.align_epochs,
            learning_rate: self.loss.learning_rate,
            init_scale: self.loss.init_scale,
            seed: self.seeds.collection,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::parse("").unwrap(), cfg);
    }

    #[test]
    fn seeds_default_and_propagate() {
        let cfg = RunConfig::parse("[seeds]\ninference = 7\n").unwrap();
        assert_eq!(cfg.seeds.collection, 42);
        assert_eq!(cfg.gateway_config().request_seed, 7);
        assert_eq!(cfg.sampler_config().rng_seed, 42);
        assert_eq!(cfg.generator_params().seed, 42);
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = RunConfig::parse("[gateway]\nbackend = \"mock:wrong\"\n[gateway.client]\nmax_parallel = 2\n").unwrap();
        assert_eq!(cfg.gateway.backend, "mock:wrong");
        assert_eq!(cfg.gateway.client.max_parallel, 2);
        assert_eq!(cfg.gateway.client.retry_limit, 3);
        let cfg = RunConfig::parse("[eval]\ntasks = [\"AP\"]\nmode = \"rows\"\n").unwrap();
        assert_eq!(cfg.eval.tasks, vec![TaskKind::AP]);
        assert_eq!(cfg.eval.mode, AccuracyMode::Rows);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::parse("[seeds]\ncolection = 1\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
