use faqrank_core::corpus::CorpusError;
use faqrank_core::evalkit::EvalError;
use faqrank_core::fusion::SearchError;
use faqrank_core::lexical::LexicalError;
use faqrank_core::relevance::{ScorerError, TrainingError};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Scorer(String),
    #[error("{0}")]
    Data(String),
    /// Stdout was closed by the reader (e.g. `| head`); not a failure.
    #[error("output closed")]
    OutputClosed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::OutputClosed => 0,
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Scorer(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::OutputClosed => "closed",
            CliError::Data(_) => "data",
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Scorer(_) => "scorer",
        }
    }

    /// Single-line JSON rendering for stderr.
    pub fn to_json_line(&self) -> String {
        json!({"error": {"kind": self.kind(), "code": self.exit_code(), "message": self.to_string()}}).to_string()
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<LexicalError> for CliError {
    fn from(e: LexicalError) -> Self {
        match e {
            LexicalError::Io { .. } => CliError::Io(e.to_string()),
            LexicalError::InvalidParams(_) => CliError::Config(e.to_string()),
            LexicalError::Analyze(faqrank_core::analyzer::AnalyzeError::Stopwords { .. }) => {
                CliError::Io(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ScorerError> for CliError {
    fn from(e: ScorerError) -> Self {
        CliError::Scorer(e.to_string())
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Lexical(e) => e.into(),
            SearchError::Scorer(e) => e.into(),
            SearchError::Fusion(e) => CliError::Config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io(_) => CliError::Io(e.to_string()),
            EvalError::InvalidConfig(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::OutputClosed;
        }
        CliError::Io(e.to_string())
    }
}
