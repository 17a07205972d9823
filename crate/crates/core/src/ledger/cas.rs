//! Content-addressed blob storage.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{LedgerError, Result};

/// SHA-256 of the stored bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CasAddress(pub [u8; 32]);

impl CasAddress {
    pub fn of(bytes: &[u8]) -> Self {
        Self(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let v = hex::decode(s).map_err(|e| LedgerError::Format(e.to_string()))?;
        Ok(Self(v.try_into().map_err(|_| LedgerError::Format("address must be 32 bytes".into()))?))
    }
}

impl fmt::Debug for CasAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cas:{}", &self.to_hex()[..16])
    }
}

impl fmt::Display for CasAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for CasAddress {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for CasAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CasAddress::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

pub trait BlobStore: Send + Sync {
    fn put(&self, bytes: &[u8]) -> Result<CasAddress>;
    fn get(&self, addr: &CasAddress) -> Result<Vec<u8>>;
    fn contains(&self, addr: &CasAddress) -> bool;
}

fn check_put(bytes: &[u8]) -> Result<CasAddress> {
    if bytes.is_empty() {
        return Err(LedgerError::EmptyBlob);
    }
    Ok(CasAddress::of(bytes))
}

/// Blobs under `<root>/cas/<first 2 hex>/<64 hex>`.
#[derive(Debug, Clone)]
pub struct DiskCas {
    root: PathBuf,
}

impl DiskCas {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("cas")).map_err(io)?;
        Ok(Self { root })
    }

    pub fn path_of(&self, addr: &CasAddress) -> PathBuf {
        let h = addr.to_hex();
        self.root.join("cas").join(&h[..2]).join(h)
    }
}

fn io(e: std::io::Error) -> LedgerError {
    LedgerError::Io(e.to_string())
}

impl BlobStore for DiskCas {
    fn put(&self, bytes: &[u8]) -> Result<CasAddress> {
        let addr = check_put(bytes)?;
        let path = self.path_of(&addr);
        if path.exists() {
            return Ok(addr);
        }
        let dir = path.parent().expect("nested path");
        fs::create_dir_all(dir).map_err(io)?;
        let mut tmp = tempfile_in(dir)?;
        tmp.1.write_all(bytes).map_err(io)?;
        tmp.1.sync_all().map_err(io)?;
        fs::rename(&tmp.0, &path).map_err(io)?;
        Ok(addr)
    }

    fn get(&self, addr: &CasAddress) -> Result<Vec<u8>> {
        let bytes = match fs::read(self.path_of(addr)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(LedgerError::NotFound(*addr)),
            Err(e) => return Err(io(e)),
        };
        if CasAddress::of(&bytes) != *addr {
            return Err(LedgerError::CorruptBlob(*addr));
        }
        Ok(bytes)
    }

    fn contains(&self, addr: &CasAddress) -> bool {
        self.path_of(addr).exists()
    }
}

fn tempfile_in(dir: &Path) -> Result<(PathBuf, fs::File)> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let name = format!(".tmp-{}-{}", std::process::id(), COUNTER.fetch_add(1, Ordering::Relaxed));
    let path = dir.join(name);
    let f = fs::File::create(&path).map_err(io)?;
    Ok((path, f))
}

/// In-memory store shared by every simulated node.
#[derive(Default)]
pub struct MemCas {
    blobs: RwLock<HashMap<CasAddress, Arc<Vec<u8>>>>,
}

impl MemCas {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.blobs.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replaces a stored blob without changing its address, for tamper tests.
    #[doc(hidden)]
    pub fn overwrite(&self, addr: CasAddress, bytes: Vec<u8>) {
        self.blobs.write().unwrap_or_else(|e| e.into_inner()).insert(addr, Arc::new(bytes));
    }

    /// Shared handle to a blob without copying it.
    pub fn get_shared(&self, addr: &CasAddress) -> Result<Arc<Vec<u8>>> {
        let blob = self
            .blobs
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(addr)
            .cloned()
            .ok_or(LedgerError::NotFound(*addr))?;
        if CasAddress::of(&blob) != *addr {
            return Err(LedgerError::CorruptBlob(*addr));
        }
        Ok(blob)
    }
}

impl BlobStore for MemCas {
    fn put(&self, bytes: &[u8]) -> Result<CasAddress> {
        let addr = check_put(bytes)?;
        self.blobs
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .entry(addr)
            .or_insert_with(|| Arc::new(bytes.to_vec()));
        Ok(addr)
    }

    fn get(&self, addr: &CasAddress) -> Result<Vec<u8>> {
        self.get_shared(addr).map(|b| b.as_ref().clone())
    }

    fn contains(&self, addr: &CasAddress) -> bool {
        self.blobs.read().unwrap_or_else(|e| e.into_inner()).contains_key(addr)
    }
}
