use std::io;
use std::path::PathBuf;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use topicrec_core::bim::FormatError;
use topicrec_core::corpus::CorpusError;
use topicrec_core::interest::InterestError;
use topicrec_core::ndjson::ReadError;

/// Failure to load the service's input files.
#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: ReadError,
    },
    #[error("{path}: {source}")]
    Index {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Interest(#[from] InterestError),
}

/// An error response: `{"error": code, "message": text}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn unknown_user(user: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_user", format!("unknown user {user}"))
    }

    pub fn unknown_topic(topic: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_topic", format!("unknown topic {topic}"))
    }

    pub fn not_inferred(user: &str) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "interests_missing",
            format!("interests for user {user} have not been inferred yet"),
        )
    }

    pub fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<InterestError> for ApiError {
    fn from(e: InterestError) -> Self {
        match e {
            InterestError::NoExpertFollowings(_) => Self::invalid("no_expert_followings", e.to_string()),
            InterestError::Corpus(CorpusError::UnknownUser(u)) => Self::unknown_user(&u),
            other => Self::internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
