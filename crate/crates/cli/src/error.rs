use synthgov_core::anonymizer::AnonymizeError;
use synthgov_core::gateway::GatewayError;
use synthgov_core::governance::{AuditError, GovernanceError};
use synthgov_core::metrics::MetricsError;
use synthgov_core::profile::ProfileError;
use synthgov_core::review::ReviewError;
use synthgov_core::survey::IngestError;
use thiserror::Error;

/// One variant per exit-code family.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("governance veto: {0}")]
    Veto(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Backend(_) => 4,
            CliError::Veto(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(IngestError, AnonymizeError, ProfileError, MetricsError, ReviewError, AuditError, std::io::Error, serde_json::Error);

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::InvalidStub(_) | GatewayError::InvalidRequest(_) => CliError::Config(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<GovernanceError> for CliError {
    fn from(e: GovernanceError) -> Self {
        match e {
            GovernanceError::MissingOversightStatement(_)
            | GovernanceError::EmptyRuleTable
            | GovernanceError::NoRuleMatched
            | GovernanceError::IncompleteChecklist(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
