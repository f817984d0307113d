//! Content-addressed response cache keyed by canonicalized request hashes.
//!
//! Enabling the cache never changes an operation's output, only upstream
//! call counts. Values for identical keys are identical by construction, so
//! concurrent writers racing on a key are harmless (last write wins).

use serde_json::Value;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{ChatProvider, ChatRequest, ProviderError};
use crate::text::normalize_ws;

/// Serializes a JSON value canonically: object keys sorted, string contents
/// whitespace-normalized, no insignificant whitespace.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null | Value::Bool(_) | Value::Number(_) => {
            out.push_str(&value.to_string());
        }
        Value::String(s) => {
            out.push_str(&Value::String(normalize_ws(s)).to_string());
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
    }
}

/// SHA-256 over the canonical form of an arbitrary JSON value.
pub fn cache_key_of_value(value: &Value) -> String {
    let canonical = canonical_json(value);
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(digest)
}

/// Opaque cache key: SHA-256 of the canonicalized request.
pub fn cache_key(request: &ChatRequest) -> String {
    let value = serde_json::to_value(request).expect("chat request serializes");
    cache_key_of_value(&value)
}

/// Content-addressed file cache: one file per key under a cache directory.
#[derive(Debug, Clone)]
pub struct FileCache {
    dir: PathBuf,
}

impl FileCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| ProviderError::CacheIo {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self { dir })
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    /// Returns the stored value, or `None` on a miss.
    pub fn get(&self, key: &str) -> Result<Option<String>, ProviderError> {
        let path = self.path_for(key);
        match std::fs::read_to_string(&path) {
            Ok(value) => Ok(Some(value)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(ProviderError::CacheIo {
                path: path.display().to_string(),
                source,
            }),
        }
    }

    /// Stores a value; writes to a temp file then renames so readers never
    /// observe a partial value.
    pub fn put(&self, key: &str, value: &str) -> Result<(), ProviderError> {
        let path = self.path_for(key);
        let io_err = |source, p: &Path| ProviderError::CacheIo {
            path: p.display().to_string(),
            source,
        };
        let tmp = self.dir.join(format!(".{key}.tmp.{}", std::process::id()));
        {
            let mut file = std::fs::File::create(&tmp).map_err(|e| io_err(e, &tmp))?;
            file.write_all(value.as_bytes()).map_err(|e| io_err(e, &tmp))?;
        }
        std::fs::rename(&tmp, &path).map_err(|e| io_err(e, &path))?;
        Ok(())
    }
}

/// Chat provider wrapper that serves repeated requests from a [`FileCache`].
pub struct CachingChatProvider<P> {
    inner: P,
    cache: FileCache,
}

impl<P: ChatProvider> CachingChatProvider<P> {
    pub fn new(inner: P, cache: FileCache) -> Self {
        Self { inner, cache }
    }
}

impl<P: ChatProvider> ChatProvider for CachingChatProvider<P> {
    fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let key = cache_key(request);
        if let Some(hit) = self.cache.get(&key)? {
            return Ok(hit);
        }
        let reply = self.inner.chat(request)?;
        self.cache.put(&key, &reply)?;
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::MockChatProvider;
    use crate::providers::{DecodeParams, ProviderSet};
    use std::sync::Arc;

    #[test]
    fn roundtrip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FileCache::new(dir.path()).unwrap();
        cache.put("k", "value \u{00e9} bytes").unwrap();
        assert_eq!(cache.get("k").unwrap().unwrap(), "value \u{00e9} bytes");
    }

    #[test]
    fn miss_returns_none() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FileCache::new(dir.path()).unwrap();
        assert_eq!(cache.get("absent").unwrap(), None);
    }

    #[test]
    fn key_invariant_under_json_key_order() {
        let a: Value =
            serde_json::from_str(r#"{"backend_id":"m","decode_params":{"temperature":0.0,"max_tokens":64},"messages":[]}"#)
                .unwrap();
        let b: Value =
            serde_json::from_str(r#"{"messages":[],"decode_params":{"max_tokens":64,"temperature":0.0},"backend_id":"m"}"#)
                .unwrap();
        assert_eq!(canonical_json(&a), canonical_json(&b));
    }

    #[test]
    fn key_invariant_under_whitespace() {
        let mk = |content: &str| {
            ChatRequest::from_system("m", "sys")
                .with_user(content)
                .with_params(DecodeParams::default())
        };
        assert_eq!(cache_key(&mk("hello   world")), cache_key(&mk("hello world")));
        assert_ne!(cache_key(&mk("hello world")), cache_key(&mk("hello worlds")));
    }

    #[test]
    fn cache_short_circuits_second_identical_call() {
        let dir = tempfile::tempdir().unwrap();
        let mock = MockChatProvider::new();
        mock.script("m", ["reply one"]);
        let mock = Arc::new(mock);
        let caching = CachingChatProvider::new(Arc::clone(&mock), FileCache::new(dir.path()).unwrap());
        let providers = ProviderSet::new().register_chat("m", Arc::new(caching));

        let req = ChatRequest::from_system("m", "sys").with_user("q");
        let first = providers.chat(&req).unwrap();
        let second = providers.chat(&req).unwrap();
        assert_eq!(first, "reply one");
        assert_eq!(second, "reply one");
        assert_eq!(mock.call_count(), 1, "one upstream call for two requests");
    }
}
