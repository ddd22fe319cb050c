use std::collections::HashMap;
use std::hash::Hash;

use parking_lot::RwLock;

pub type Version = u64;
const OPEN: Version = Version::MAX;

#[derive(Debug, Clone)]
struct Versioned<V> {
    begin: Version,
    end: Version,
    value: V,
}

impl<V> Versioned<V> {
    fn visible_at(&self, v: Version) -> bool {
        self.begin <= v && v < self.end
    }

    fn is_open(&self) -> bool {
        self.end == OPEN
    }
}

/// Key to a single value, with the full version history per key.
#[derive(Debug)]
pub struct VersionedMap<K, V> {
    inner: RwLock<HashMap<K, Vec<Versioned<V>>>>,
}

impl<K, V> Default for VersionedMap<K, V> {
    fn default() -> Self {
        Self {
            inner: RwLock::new(HashMap::new()),
        }
    }
}

impl<K: Eq + Hash + Copy, V: Clone> VersionedMap<K, V> {
    pub fn get(&self, key: &K, v: Version) -> Option<V> {
        let map = self.inner.read();
        map.get(key)?
            .iter()
            .rev()
            .find(|e| e.visible_at(v))
            .map(|e| e.value.clone())
    }

    pub fn contains(&self, key: &K, v: Version) -> bool {
        let map = self.inner.read();
        map.get(key)
            .is_some_and(|h| h.iter().any(|e| e.visible_at(v)))
    }

    /// Adds a value that becomes visible from version `v`. The caller
    /// guarantees no open value exists for the key.
    pub fn insert(&self, key: K, value: V, v: Version) {
        self.inner.write().entry(key).or_default().push(Versioned {
            begin: v,
            end: OPEN,
            value,
        });
    }

    /// Closes the open value of `key` at version `v`.
    pub fn remove(&self, key: &K, v: Version) -> bool {
        let mut map = self.inner.write();
        match map
            .get_mut(key)
            .and_then(|h| h.iter_mut().rev().find(|e| e.is_open()))
        {
            Some(e) => {
                e.end = v;
                true
            }
            None => false,
        }
    }

    /// Replaces the open value (if any) with `value` from version `v`.
    pub fn replace(&self, key: K, value: V, v: Version) {
        let mut map = self.inner.write();
        let history = map.entry(key).or_default();
        if let Some(e) = history.iter_mut().rev().find(|e| e.is_open()) {
            if e.begin == v {
                e.value = value;
                return;
            }
            e.end = v;
        }
        history.push(Versioned {
            begin: v,
            end: OPEN,
            value,
        });
    }

    /// All key/value pairs visible at `v`.
    pub fn scan(&self, v: Version) -> Vec<(K, V)> {
        let map = self.inner.read();
        map.iter()
            .filter_map(|(k, h)| {
                h.iter()
                    .find(|e| e.visible_at(v))
                    .map(|e| (*k, e.value.clone()))
            })
            .collect()
    }
}

/// Key to a set of values, each with its own version interval.
#[derive(Debug)]
pub struct VersionedMultiMap<K, V> {
    inner: RwLock<HashMap<K, Vec<Versioned<V>>>>,
}

impl<K, V> Default for VersionedMultiMap<K, V> {
    fn default() -> Self {
        Self {
            inner: RwLock::new(HashMap::new()),
        }
    }
}

impl<K: Eq + Hash + Copy, V: Eq + Copy> VersionedMultiMap<K, V> {
    pub fn values(&self, key: &K, v: Version) -> Vec<V> {
        let map = self.inner.read();
        map.get(key)
            .map(|h| {
                h.iter()
                    .filter(|e| e.visible_at(v))
                    .map(|e| e.value)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn add(&self, key: K, value: V, v: Version) {
        self.inner.write().entry(key).or_default().push(Versioned {
            begin: v,
            end: OPEN,
            value,
        });
    }

    pub fn remove(&self, key: &K, value: &V, v: Version) -> bool {
        let mut map = self.inner.write();
        match map
            .get_mut(key)
            .and_then(|h| h.iter_mut().find(|e| e.is_open() && e.value == *value))
        {
            Some(e) => {
                e.end = v;
                true
            }
            None => false,
        }
    }
}
