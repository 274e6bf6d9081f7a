//! HTTP API over an immutable [`RankedIndex`] snapshot.
//!
//! Readers clone the current `Arc` under a short read lock, so a reload swaps
//! the whole snapshot at once and in-flight requests keep the old one.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use expertise::rank::RankedIndex;
use expertise::Error;

pub const DEFAULT_LIMIT: usize = 10;
pub const RELOAD_HEADER: &str = "x-reload-secret";
pub const RELOAD_SECRET_ENV: &str = "EXPERTISE_RELOAD_SECRET";

#[derive(Debug, Serialize, PartialEq)]
pub struct Expert {
    #[serde(rename = "twitterUsername")]
    pub twitter_username: String,
    pub rank: usize,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct ExpertsResponse {
    #[serde(rename = "topicSlug")]
    pub topic_slug: String,
    pub experts: Vec<Expert>,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct TopicEntry {
    #[serde(rename = "topicId")]
    pub topic_id: String,
    #[serde(rename = "topicSlug")]
    pub topic_slug: String,
    #[serde(rename = "topicDisplayName")]
    pub topic_display_name: String,
    #[serde(rename = "topicScore")]
    pub topic_score: f64,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct UserTopicsResponse {
    #[serde(rename = "twitterUsername")]
    pub twitter_username: String,
    #[serde(rename = "topicSetType")]
    pub topic_set_type: &'static str,
    #[serde(rename = "topicSet")]
    pub topic_set: Vec<TopicEntry>,
}

pub struct AppState {
    snapshot: RwLock<Arc<RankedIndex>>,
    index_dir: Option<PathBuf>,
    reload_secret: Option<String>,
}

impl AppState {
    pub fn new(index: RankedIndex, index_dir: Option<PathBuf>, reload_secret: Option<String>) -> Self {
        AppState {
            snapshot: RwLock::new(Arc::new(index)),
            index_dir,
            reload_secret: reload_secret.filter(|s| !s.is_empty()),
        }
    }

    /// Loads the index directory; the reload secret comes from the environment.
    pub fn from_dir(dir: PathBuf) -> expertise::Result<Self> {
        let index = RankedIndex::load(&dir)?;
        Ok(Self::new(index, Some(dir), std::env::var(RELOAD_SECRET_ENV).ok()))
    }

    pub fn snapshot(&self) -> Arc<RankedIndex> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    pub fn replace(&self, index: RankedIndex) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(index);
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.message, "status": self.status.as_u16() });
        (self.status, Json(body)).into_response()
    }
}

pub fn experts_response(index: &RankedIndex, slug: &str, limit: usize) -> expertise::Result<ExpertsResponse> {
    let experts = index
        .top_experts(slug, limit)?
        .iter()
        .map(|e| Expert { twitter_username: index.display_handle(&e.user).to_string(), rank: e.rank })
        .collect();
    Ok(ExpertsResponse { topic_slug: slug.to_string(), experts })
}

pub fn user_topics_response(index: &RankedIndex, username: &str) -> expertise::Result<UserTopicsResponse> {
    let topics = index.user_topics(username)?;
    Ok(UserTopicsResponse {
        twitter_username: username.to_string(),
        topic_set_type: "expertise",
        topic_set: topics
            .into_iter()
            .map(|t| TopicEntry {
                topic_id: t.topic.id,
                topic_slug: t.topic.slug,
                topic_display_name: t.topic.display_name,
                topic_score: t.percentile,
            })
            .collect(),
    })
}

fn parse_limit(params: &HashMap<String, String>) -> Result<usize, ApiError> {
    match params.get("limit") {
        None => Ok(DEFAULT_LIMIT),
        Some(raw) => raw.parse::<usize>().map_err(|_| {
            ApiError::new(StatusCode::BAD_REQUEST, format!("limit must be a non-negative integer, got \"{raw}\""))
        }),
    }
}

async fn experts(
    State(state): State<Arc<AppState>>,
    Path(slug): Path<String>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Json<ExpertsResponse>, ApiError> {
    let limit = parse_limit(&params)?;
    Ok(Json(experts_response(&state.snapshot(), &slug, limit)?))
}

async fn user_topics(
    State(state): State<Arc<AppState>>,
    Path(username): Path<String>,
) -> Result<Json<UserTopicsResponse>, ApiError> {
    Ok(Json(user_topics_response(&state.snapshot(), &username)?))
}

async fn reload(State(state): State<Arc<AppState>>, headers: HeaderMap) -> Result<Json<serde_json::Value>, ApiError> {
    let Some(secret) = &state.reload_secret else {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "reload is disabled"));
    };
    let given = headers.get(RELOAD_HEADER).and_then(|v| v.to_str().ok());
    if given != Some(secret.as_str()) {
        return Err(ApiError::new(StatusCode::UNAUTHORIZED, "missing or wrong reload secret"));
    }
    let Some(dir) = &state.index_dir else {
        return Err(ApiError::new(StatusCode::CONFLICT, "no index directory configured"));
    };
    let dir = dir.clone();
    let index = tokio::task::spawn_blocking(move || RankedIndex::load(&dir))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let (topics, users) = (index.topics().count(), index.user_count());
    state.replace(index);
    Ok(Json(serde_json::json!({ "status": "reloaded", "topics": topics, "users": users })))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/topics/{slug}/experts", get(experts))
        .route("/users/{username}/topics", get(user_topics))
        .route("/admin/reload", post(reload))
        .with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
