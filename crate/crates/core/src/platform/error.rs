use serde::{Deserialize, Serialize};

use crate::study::StudyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    PhaseViolation,
    NotFound,
    SafetyRejected,
    BackendUnavailable,
    ContractViolation,
    Validation,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::PhaseViolation => "phase_violation",
            ErrorCode::NotFound => "not_found",
            ErrorCode::SafetyRejected => "safety_rejected",
            ErrorCode::BackendUnavailable => "backend_unavailable",
            ErrorCode::ContractViolation => "contract_violation",
            ErrorCode::Validation => "validation",
        }
    }
}

/// Error body returned by every API operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{code:?}: {message} [{correlation_id}]")]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    pub correlation_id: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>, correlation_id: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            correlation_id: correlation_id.into(),
        }
    }

    pub fn from_study(e: StudyError, correlation_id: &str) -> Self {
        let code = match &e {
            StudyError::PhaseViolation(_) => ErrorCode::PhaseViolation,
            StudyError::NotFound(_) => ErrorCode::NotFound,
            StudyError::Validation(_) | StudyError::Domain(_) => ErrorCode::Validation,
            StudyError::Invariant(_) | StudyError::Io(_) => ErrorCode::ContractViolation,
        };
        Self::new(code, e.to_string(), correlation_id)
    }
}
