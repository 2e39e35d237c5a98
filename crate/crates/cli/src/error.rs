use std::fmt;

use schedrag::alignment::AlignmentError;
use schedrag::eval::EvalError;
use schedrag::gateway::GatewayError;
use schedrag::graph::GraphError;
use schedrag::knowledge::KnowledgeError;
use schedrag::prompts::PromptError;
use schedrag::sampler::SamplerError;
use schedrag::schedule::ScheduleError;
use schedrag::synth::SynthError;

/// Failure of a subcommand, classified by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or missing input paths.
    Usage(String),
    /// Input data that cannot be parsed or violates a precondition.
    Data(String),
    /// The model endpoint or a mock backend failed.
    Gateway(String),
    /// Anything else, including failures to write outputs.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Gateway(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Gateway(_) => "gateway",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Gateway(m) | CliError::Internal(m) => m,
        }
    }

    /// Prefixes the message with a locator such as a file path.
    pub fn at(self, locator: impl fmt::Display) -> Self {
        let wrap = |m: String| format!("{locator}: {m}");
        match self {
            CliError::Usage(m) => CliError::Usage(wrap(m)),
            CliError::Data(m) => CliError::Data(wrap(m)),
            CliError::Gateway(m) => CliError::Gateway(wrap(m)),
            CliError::Internal(m) => CliError::Internal(wrap(m)),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.class(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::Io(e) => CliError::Internal(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<KnowledgeError> for CliError {
    fn from(e: KnowledgeError) -> Self {
        match e {
            KnowledgeError::InvalidChunkSize | KnowledgeError::InvalidK => CliError::Usage(e.to_string()),
            KnowledgeError::Gateway(m) => CliError::Gateway(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::InvalidConfig(_) | GatewayError::MissingMockData { .. } => CliError::Usage(e.to_string()),
            GatewayError::Transcript { .. } => CliError::Data(e.to_string()),
            other => CliError::Gateway(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Gateway { .. } => CliError::Gateway(e.to_string()),
            EvalError::Knowledge(k) => k.into(),
            EvalError::Sampler(s) => s.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<AlignmentError> for CliError {
    fn from(e: AlignmentError) -> Self {
        match e {
            AlignmentError::InvalidWeights(_) => CliError::Usage(e.to_string()),
            AlignmentError::Gateway(g) => g.into(),
            AlignmentError::Knowledge(k) => k.into(),
            AlignmentError::Io { .. } => CliError::Internal(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InfeasibleParams(_) => CliError::Usage(e.to_string()),
            SynthError::Knowledge(k) => k.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}
