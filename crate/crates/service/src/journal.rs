//! Per-user append-only journal of interest edits and recomputes.
//!
//! Each user has one NDJSON file. A line is written and synced before the
//! change it records is applied, so replaying the files at startup rebuilds
//! the in-memory state.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use topicrec_core::interest::{top_interests, InterestVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum JournalEntry {
    Edit {
        #[serde(default)]
        add: BTreeSet<String>,
        #[serde(default)]
        remove: BTreeSet<String>,
    },
    Recompute {
        interest: InterestVector,
    },
}

/// Edits and the latest recomputed vector for one user.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UserState {
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
    pub recomputed: Option<InterestVector>,
}

/// A topic weight as shown to clients: inferred, or added by hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Inferred(f64),
    Manual,
}

impl Serialize for Weight {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Weight::Inferred(w) => s.serialize_f64(*w),
            Weight::Manual => s.serialize_str("manual"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterestEntry {
    pub topic: String,
    pub weight: Weight,
}

impl UserState {
    pub fn apply(&mut self, entry: JournalEntry) {
        match entry {
            JournalEntry::Edit { add, remove } => {
                for t in remove {
                    self.added.remove(&t);
                    self.removed.insert(t);
                }
                for t in add {
                    self.removed.remove(&t);
                    self.added.insert(t);
                }
            }
            JournalEntry::Recompute { interest } => self.recomputed = Some(interest),
        }
    }

    /// The vector in force: the latest recompute, else the offline one.
    pub fn inferred<'a>(&'a self, offline: Option<&'a InterestVector>) -> Option<&'a InterestVector> {
        self.recomputed.as_ref().or(offline)
    }

    /// Inferred topics by descending weight (ties by title), then manual
    /// additions by title. Removed topics never appear.
    pub fn merged(&self, inferred: Option<&InterestVector>) -> Vec<InterestEntry> {
        let mut out: Vec<InterestEntry> = Vec::new();
        let mut shown = BTreeSet::new();
        if let Some(iv) = inferred {
            for t in top_interests(iv, usize::MAX) {
                if !self.removed.contains(&t) {
                    out.push(InterestEntry {
                        weight: Weight::Inferred(iv.weight(&t)),
                        topic: t.clone(),
                    });
                    shown.insert(t);
                }
            }
        }
        for t in &self.added {
            if !shown.contains(t) && !self.removed.contains(t) {
                out.push(InterestEntry {
                    topic: t.clone(),
                    weight: Weight::Manual,
                });
            }
        }
        out
    }
}

/// Escapes a user id into a file name: `[A-Za-z0-9_-]` are kept, every
/// other byte becomes `%XX`.
pub fn file_stem(user_id: &str) -> String {
    let mut out = String::with_capacity(user_id.len());
    for b in user_id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'_' || b == b'-' {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

pub fn user_from_stem(stem: &str) -> Option<String> {
    let bytes = stem.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = stem.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

/// Folds one user's journal text into a state, skipping unparseable lines.
/// `source` only labels warnings.
pub fn replay_log(text: &str, source: &str) -> UserState {
    let mut state = UserState::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => state.apply(e),
            Err(e) => log::warn!("{source}:{}: skipped: {e}", i + 1),
        }
    }
    state
}

#[derive(Debug, Clone)]
pub struct Journal {
    dir: PathBuf,
}

impl Journal {
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Journal { dir: dir.to_path_buf() })
    }

    fn path(&self, user_id: &str) -> PathBuf {
        self.dir.join(format!("{}.ndjson", file_stem(user_id)))
    }

    /// Appends one entry and syncs it to disk.
    pub fn append(&self, user_id: &str, entry: &JournalEntry) -> io::Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        let mut f = OpenOptions::new().create(true).append(true).open(self.path(user_id))?;
        f.write_all(&line)?;
        f.sync_data()
    }

    /// Rebuilds every user's state. Unparseable lines (e.g. a write torn by a
    /// crash) are skipped with a warning.
    pub fn replay(&self) -> io::Result<BTreeMap<String, UserState>> {
        let mut out = BTreeMap::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("ndjson") {
                continue;
            }
            let Some(user) = path.file_stem().and_then(|s| s.to_str()).and_then(user_from_stem) else {
                log::warn!("{}: not a journal file name", path.display());
                continue;
            };
            let text = fs::read_to_string(&path)?;
            out.insert(user, replay_log(&text, &path.display().to_string()));
        }
        Ok(out)
    }
}
