//! HTTP API for viewing and editing topical interests, browsing topical
//! tweets and fetching explained recommendations.
//!
//! Loaded inputs live in an immutable [`Snapshot`] that is swapped whole on
//! reload. Per-user interest edits and recomputes are serialized by a
//! per-user lock and persisted in an append-only [`Journal`].

mod api;
pub mod error;
pub mod journal;
pub mod snapshot;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use tokio::net::TcpListener;
use topicrec_core::interest::EmConfig;
use topicrec_core::recommend::RecommendConfig;

pub use api::router;
pub use error::{ApiError, LoadError};
pub use journal::{replay_log, InterestEntry, Journal, JournalEntry, UserState, Weight};
pub use snapshot::{Snapshot, Sources};

/// Longest list a client may request.
pub const MAX_LIMIT: usize = 1000;

/// Produces the timestamp stamped on a freshly loaded snapshot.
pub type Clock = Arc<dyn Fn() -> String + Send + Sync>;

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub recommend: RecommendConfig,
    pub em: EmConfig,
    /// Allowed browser origin; any origin when unset.
    pub cors_origin: Option<String>,
}

type UserSlot = Arc<tokio::sync::Mutex<UserState>>;

struct Inner {
    sources: Sources,
    config: ServiceConfig,
    clock: Clock,
    snapshot: RwLock<Arc<Snapshot>>,
    users: Mutex<HashMap<String, UserSlot>>,
    journal: Journal,
    reload_lock: tokio::sync::Mutex<()>,
}

/// Shared service state. Cloning is cheap.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// Loads the inputs and replays the journal in `journal_dir`.
    pub fn new(sources: Sources, journal_dir: &Path, config: ServiceConfig, clock: Clock) -> Result<Self, LoadError> {
        let snapshot = Snapshot::load(&sources, clock())?;
        let io_err = |source| LoadError::Io {
            path: journal_dir.to_path_buf(),
            source,
        };
        let journal = Journal::open(journal_dir).map_err(io_err)?;
        let users = journal
            .replay()
            .map_err(io_err)?
            .into_iter()
            .map(|(u, s)| (u, Arc::new(tokio::sync::Mutex::new(s))))
            .collect();
        Ok(AppState {
            inner: Arc::new(Inner {
                sources,
                config,
                clock,
                snapshot: RwLock::new(Arc::new(snapshot)),
                users: Mutex::new(users),
                journal,
                reload_lock: tokio::sync::Mutex::new(()),
            }),
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.inner.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    fn journal(&self) -> &Journal {
        &self.inner.journal
    }

    fn user_slot(&self, user_id: &str) -> UserSlot {
        let mut users = self.inner.users.lock().unwrap_or_else(|e| e.into_inner());
        users.entry(user_id.to_string()).or_default().clone()
    }

    /// Re-reads every input and swaps the snapshot in one step. Requests in
    /// flight keep the snapshot they started with. Returns the new load time.
    pub async fn reload(&self) -> Result<String, LoadError> {
        let _guard = self.inner.reload_lock.lock().await;
        let inner = self.inner.clone();
        let snapshot = tokio::task::spawn_blocking(move || Snapshot::load(&inner.sources, (inner.clock)()))
            .await
            .map_err(|e| LoadError::Io {
                path: self.inner.sources.store.clone(),
                source: std::io::Error::other(e),
            })??;
        let loaded_at = snapshot.loaded_at.clone();
        *self.inner.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(snapshot);
        log::info!("snapshot reloaded at {loaded_at}");
        Ok(loaded_at)
    }
}

/// Serves until Ctrl-C. On Unix, SIGHUP reloads the inputs.
pub async fn serve(state: AppState, listener: TcpListener) -> std::io::Result<()> {
    #[cfg(unix)]
    {
        let state = state.clone();
        let mut hup = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::hangup())?;
        tokio::spawn(async move {
            while hup.recv().await.is_some() {
                if let Err(e) = state.reload().await {
                    log::error!("reload failed: {e}");
                }
            }
        });
    }
    let app = router(state);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
