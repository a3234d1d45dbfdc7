use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime};

use clicksel::encoding::ClickSet;
use clicksel::{BinaryMask, Image, ProbabilityMap};
use tokio::sync::Mutex as AsyncMutex;

/// One image and the clicks placed on it so far.
#[derive(Debug)]
pub struct Session {
    pub image: Image,
    pub clicks: ClickSet,
    /// All background while the click list is empty.
    pub mask: BinaryMask,
    pub probability: Option<ProbabilityMap>,
    pub created_at: SystemTime,
}

impl Session {
    pub fn new(image: Image) -> Self {
        let (h, w) = image.dims();
        Self {
            image,
            clicks: ClickSet::new(),
            mask: BinaryMask::new(h, w),
            probability: None,
            created_at: SystemTime::now(),
        }
    }
}

pub type SessionHandle = Arc<AsyncMutex<Session>>;

struct Entry {
    session: SessionHandle,
    touched: Instant,
}

/// In-memory sessions keyed by opaque id, dropped after `ttl` without use.
pub struct SessionStore {
    ttl: Duration,
    entries: Mutex<HashMap<String, Entry>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self { ttl, entries: Mutex::new(HashMap::new()) }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn insert(&self, session: Session) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let entry = Entry { session: Arc::new(AsyncMutex::new(session)), touched: Instant::now() };
        self.lock().insert(id.clone(), entry);
        id
    }

    /// Returns the session and refreshes its idle timer. Expired sessions are
    /// removed and reported as missing.
    pub fn get(&self, id: &str) -> Option<SessionHandle> {
        let now = Instant::now();
        let mut entries = self.lock();
        let expired = now.duration_since(entries.get(id)?.touched) > self.ttl;
        if expired {
            entries.remove(id);
            return None;
        }
        let entry = entries.get_mut(id)?;
        entry.touched = now;
        Some(entry.session.clone())
    }

    pub fn remove(&self, id: &str) -> bool {
        self.lock().remove(id).is_some()
    }

    /// Drops every idle session; returns how many were removed.
    pub fn sweep(&self) -> usize {
        let now = Instant::now();
        let mut entries = self.lock();
        let before = entries.len();
        entries.retain(|_, e| now.duration_since(e.touched) <= self.ttl);
        before - entries.len()
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HashMap<String, Entry>> {
        self.entries.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}
