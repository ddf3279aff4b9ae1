use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::Mutex;
use tokio::sync::{Mutex as AsyncMutex, OwnedMutexGuard};

use crate::id::Id;

/// One async mutex per key, created on demand.
#[derive(Default)]
pub struct KeyedLocks {
    slots: Mutex<HashMap<Id, Arc<AsyncMutex<()>>>>,
}

impl KeyedLocks {
    fn slot(&self, key: &Id) -> Arc<AsyncMutex<()>> {
        let mut slots = self.slots.lock();
        // Drop idle entries so the map does not grow without bound.
        if slots.len() > 1024 {
            slots.retain(|_, m| Arc::strong_count(m) > 1);
        }
        slots.entry(key.clone()).or_default().clone()
    }

    pub async fn lock(&self, key: &Id) -> OwnedMutexGuard<()> {
        self.slot(key).lock_owned().await
    }

    /// `None` when another holder has the key.
    pub fn try_lock(&self, key: &Id) -> Option<OwnedMutexGuard<()>> {
        self.slot(key).try_lock_owned().ok()
    }
}
