use std::collections::BTreeSet;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use topicrec_core::interest::{infer_interest, InterestVector};
use topicrec_core::recommend::{dedup_list, recommend_for_topics_cached, RecommendConfig, DEFAULT_LIMIT};

use crate::error::ApiError;
use crate::journal::{InterestEntry, JournalEntry, UserState};
use crate::snapshot::Snapshot;
use crate::{AppState, MAX_LIMIT};

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: AppState) -> Router {
    let cors = match &state.config().cors_origin {
        Some(origin) => match HeaderValue::from_str(origin) {
            Ok(v) => CorsLayer::new().allow_origin(AllowOrigin::list([v])),
            Err(_) => {
                log::warn!("ignoring invalid CORS origin {origin:?}");
                CorsLayer::new()
            }
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods([Method::GET, Method::POST, Method::DELETE])
    .allow_headers([header::CONTENT_TYPE]);

    let v1 = Router::new()
        .route("/health", get(health))
        .route("/users", get(users))
        .route("/topics", get(topics))
        .route("/topics/{title}/tweets", get(topic_tweets))
        .route("/users/{id}/interests", get(get_interests).post(add_interest))
        .route("/users/{id}/interests/edits", post(edit_interests))
        .route("/users/{id}/interests/recompute", post(recompute))
        .route("/users/{id}/interests/{topic}", delete(remove_interest))
        .route("/users/{id}/recommendations", get(recommendations))
        .route("/admin/reload", post(reload));
    Router::new()
        .nest("/v1", v1)
        .fallback(not_found)
        .layer(cors)
        .with_state(state)
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

fn body<T>(r: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    r.map(|Json(v)| v)
        .map_err(|e| ApiError::new(e.status(), "invalid_body", e.body_text()))
}

#[derive(Deserialize)]
struct LimitQuery {
    limit: Option<String>,
}

fn limit(q: Result<Query<LimitQuery>, QueryRejection>) -> Result<usize, ApiError> {
    let q = q.map_err(|e| ApiError::invalid("invalid_parameter", e.body_text()))?;
    match q.0.limit {
        None => Ok(DEFAULT_LIMIT),
        Some(raw) => match raw.parse::<usize>() {
            Ok(n) if (1..=MAX_LIMIT).contains(&n) => Ok(n),
            _ => Err(ApiError::invalid(
                "invalid_parameter",
                format!("limit must be an integer in 1..={MAX_LIMIT}, got {raw:?}"),
            )),
        },
    }
}

fn is_known(snap: &Snapshot, user_id: &str) -> bool {
    snap.corpus.is_known_user(user_id) || snap.interests.contains_key(user_id)
}

fn require_user(snap: &Snapshot, user_id: &str) -> Result<(), ApiError> {
    if is_known(snap, user_id) {
        Ok(())
    } else {
        Err(ApiError::unknown_user(user_id))
    }
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    loaded_at: String,
    users: usize,
    topics: usize,
    experts: usize,
    candidates: usize,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let snap = state.snapshot();
    Json(Health {
        status: "ok",
        loaded_at: snap.loaded_at.clone(),
        users: snap.corpus.users().count(),
        topics: snap.corpus.catalog().topics().len(),
        experts: snap.experts.len(),
        candidates: snap.candidates.len(),
    })
}

#[derive(Serialize)]
struct UserList {
    users: Vec<String>,
}

async fn users(State(state): State<AppState>) -> Json<UserList> {
    let snap = state.snapshot();
    let users: BTreeSet<&str> = snap
        .corpus
        .users()
        .chain(snap.interests.keys().map(String::as_str))
        .collect();
    Json(UserList {
        users: users.into_iter().map(str::to_string).collect(),
    })
}

#[derive(Serialize)]
struct TopicList {
    topics: Vec<String>,
}

async fn topics(State(state): State<AppState>) -> Json<TopicList> {
    let snap = state.snapshot();
    Json(TopicList {
        topics: snap.corpus.catalog().topics().iter().cloned().collect(),
    })
}

#[derive(Serialize)]
struct TopicTweet {
    rank: usize,
    tweet_id: String,
    text: String,
    log_score: f64,
}

#[derive(Serialize)]
struct TopicTweets {
    topic: String,
    items: Vec<TopicTweet>,
}

async fn topic_tweets(
    State(state): State<AppState>,
    Path(title): Path<String>,
    q: Result<Query<LimitQuery>, QueryRejection>,
) -> ApiResult<TopicTweets> {
    let limit = limit(q)?;
    let snap = state.snapshot();
    let topic = snap.canonical_topic(&title).ok_or_else(|| ApiError::unknown_topic(&title))?;
    let cfg = &state.config().recommend;
    // A topic without expert tweets has no evidence to rank by.
    let ranked = if snap.index.has_topic(topic) {
        snap.index.top_tweets(topic, &snap.candidates, cfg.top_n)
    } else {
        Vec::new()
    };
    let items = dedup_list(ranked, cfg.threshold)
        .into_iter()
        .take(limit)
        .enumerate()
        .map(|(i, r)| TopicTweet {
            rank: i + 1,
            tweet_id: r.bag.tweet_id.clone(),
            text: snap.texts.get(&r.bag.tweet_id).cloned().unwrap_or_default(),
            log_score: r.log_score,
        })
        .collect();
    Ok(Json(TopicTweets {
        topic: topic.to_string(),
        items,
    }))
}

#[derive(Serialize)]
struct InterestsView {
    user_id: String,
    /// Whether an inferred vector exists (offline or recomputed).
    inferred: bool,
    interests: Vec<InterestEntry>,
}

fn view(user_id: &str, state: &UserState, snap: &Snapshot) -> InterestsView {
    let inferred = state.inferred(snap.interests.get(user_id));
    InterestsView {
        user_id: user_id.to_string(),
        inferred: inferred.is_some(),
        interests: state.merged(inferred),
    }
}

async fn get_interests(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<InterestsView> {
    let snap = state.snapshot();
    require_user(&snap, &id)?;
    let slot = state.user_slot(&id);
    let user = slot.lock().await;
    if user.inferred(snap.interests.get(&id)).is_none() {
        return Err(ApiError::not_inferred(&id));
    }
    Ok(Json(view(&id, &user, &snap)))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterestEdit {
    user_id: Option<String>,
    #[serde(default)]
    add: BTreeSet<String>,
    #[serde(default)]
    remove: BTreeSet<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AddTopic {
    topic: String,
}

fn canonical_set(snap: &Snapshot, titles: BTreeSet<String>) -> Result<BTreeSet<String>, ApiError> {
    titles
        .into_iter()
        .map(|t| {
            snap.canonical_topic(&t)
                .map(str::to_string)
                .ok_or_else(|| ApiError::unknown_topic(&t))
        })
        .collect()
}

/// Validates, journals and applies one edit under the user's lock.
async fn apply_edit(
    state: &AppState,
    id: &str,
    add: BTreeSet<String>,
    remove: BTreeSet<String>,
) -> ApiResult<InterestsView> {
    let snap = state.snapshot();
    require_user(&snap, id)?;
    let add = canonical_set(&snap, add)?;
    let remove = canonical_set(&snap, remove)?;
    if let Some(t) = add.intersection(&remove).next() {
        return Err(ApiError::invalid(
            "conflicting_edit",
            format!("topic {t} is both added and removed"),
        ));
    }
    let slot = state.user_slot(id);
    let mut user = slot.lock().await;
    if !add.is_empty() || !remove.is_empty() {
        let entry = JournalEntry::Edit { add, remove };
        state
            .journal()
            .append(id, &entry)
            .map_err(|e| ApiError::internal(format!("journal write failed: {e}")))?;
        user.apply(entry);
    }
    Ok(Json(view(id, &user, &snap)))
}

async fn edit_interests(
    State(state): State<AppState>,
    Path(id): Path<String>,
    edit: Result<Json<InterestEdit>, JsonRejection>,
) -> ApiResult<InterestsView> {
    let edit = body(edit)?;
    if let Some(u) = &edit.user_id {
        if *u != id {
            return Err(ApiError::invalid(
                "invalid_body",
                format!("body user_id {u} does not match path user {id}"),
            ));
        }
    }
    apply_edit(&state, &id, edit.add, edit.remove).await
}

async fn add_interest(
    State(state): State<AppState>,
    Path(id): Path<String>,
    add: Result<Json<AddTopic>, JsonRejection>,
) -> ApiResult<InterestsView> {
    let add = body(add)?;
    apply_edit(&state, &id, [add.topic].into(), BTreeSet::new()).await
}

async fn remove_interest(
    State(state): State<AppState>,
    Path((id, topic)): Path<(String, String)>,
) -> ApiResult<InterestsView> {
    apply_edit(&state, &id, BTreeSet::new(), [topic].into()).await
}

async fn recompute(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<InterestsView> {
    let snap = state.snapshot();
    require_user(&snap, &id)?;
    let slot = state.user_slot(&id);
    let mut user = slot.lock().await;
    let interest: InterestVector = infer_interest(&id, &snap.corpus, &snap.experts, &snap.popularity, &state.config().em)?;
    let entry = JournalEntry::Recompute { interest };
    state
        .journal()
        .append(&id, &entry)
        .map_err(|e| ApiError::internal(format!("journal write failed: {e}")))?;
    user.apply(entry);
    Ok(Json(view(&id, &user, &snap)))
}

#[derive(Serialize)]
struct ExplainedItem {
    tweet_id: String,
    text: String,
    topic: String,
    topical_rank: usize,
    final_rank: usize,
    explanation: String,
}

#[derive(Serialize)]
struct Recommendations {
    user_id: String,
    generated_at: String,
    items: Vec<ExplainedItem>,
}

pub(crate) fn explanation(topic: &str) -> String {
    format!("recommended because you are interested in {topic}")
}

async fn recommendations(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<LimitQuery>, QueryRejection>,
) -> ApiResult<Recommendations> {
    let limit = limit(q)?;
    let snap = state.snapshot();
    require_user(&snap, &id)?;
    let topics: Vec<String> = {
        let slot = state.user_slot(&id);
        let user = slot.lock().await;
        let inferred = user
            .inferred(snap.interests.get(&id))
            .ok_or_else(|| ApiError::not_inferred(&id))?;
        user.merged(Some(inferred)).into_iter().map(|e| e.topic).collect()
    };
    let cfg = RecommendConfig {
        limit,
        ..state.config().recommend
    };
    let topics: Vec<String> = topics.into_iter().take(cfg.max_topics).collect();
    let list = recommend_for_topics_cached(
        &id,
        &topics,
        &snap.index,
        &snap.candidates,
        &cfg,
        &snap.loaded_at,
        &snap.topic_lists,
    );
    Ok(Json(Recommendations {
        user_id: list.user_id,
        generated_at: list.generated_at,
        items: list
            .items
            .into_iter()
            .map(|i| ExplainedItem {
                text: snap.texts.get(&i.tweet_id).cloned().unwrap_or_default(),
                explanation: explanation(&i.topic),
                tweet_id: i.tweet_id,
                topic: i.topic,
                topical_rank: i.topical_rank,
                final_rank: i.final_rank,
            })
            .collect(),
    }))
}

#[derive(Serialize)]
struct Reloaded {
    status: &'static str,
    loaded_at: String,
}

async fn reload(State(state): State<AppState>) -> ApiResult<Reloaded> {
    let loaded_at = state
        .reload()
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "reload_failed", e.to_string()))?;
    Ok(Json(Reloaded {
        status: "reloaded",
        loaded_at,
    }))
}
