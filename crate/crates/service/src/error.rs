use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

/// JSON error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self {
            status: status_for(code),
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
            },
        }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new("not_found", format!("no {what} `{id}`"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new("invalid_request", message)
    }
}

/// HTTP status of an error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "invalid_parameter" | "invalid_request" | "malformed_header" | "empty_stops" | "invalid_trip"
        | "invalid_anchors" | "alignment_error" | "unknown_criterion" | "invalid_config" | "invalid_route" => {
            StatusCode::BAD_REQUEST
        }
        "not_found" | "unknown_stop" | "unknown_route" | "unknown_dataset" => StatusCode::NOT_FOUND,
        "invalid_state" => StatusCode::CONFLICT,
        "constraint_violation" | "empty_graph" => StatusCode::UNPROCESSABLE_ENTITY,
        "too_many_sessions" => StatusCode::TOO_MANY_REQUESTS,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<busnet_core::Error> for ApiError {
    fn from(e: busnet_core::Error) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

macro_rules! engine {
    ($($t:ty),*) => {
        $(impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                busnet_core::Error::from(e).into()
            }
        })*
    };
}

engine!(
    busnet_core::NetworkError,
    busnet_core::GraphError,
    busnet_core::CriteriaError,
    busnet_core::SearchError,
    busnet_core::AnalyticsError,
    busnet_core::ResolutionError
);

macro_rules! rejection {
    ($($t:ty),*) => {
        $(impl From<$t> for ApiError {
            fn from(r: $t) -> Self {
                Self::bad_request(r.body_text())
            }
        })*
    };
}

rejection!(
    axum::extract::rejection::JsonRejection,
    axum::extract::rejection::QueryRejection,
    axum::extract::multipart::MultipartError,
    axum::extract::multipart::MultipartRejection
);
