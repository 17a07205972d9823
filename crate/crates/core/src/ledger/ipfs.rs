//! Blob store backed by an IPFS node's HTTP API.

use std::collections::HashMap;
use std::io::Read;
use std::sync::RwLock;

use super::cas::{BlobStore, CasAddress};
use super::{LedgerError, Result};

const BOUNDARY: &str = "zkpot-blob-boundary";

/// Maps SHA-256 addresses to the CIDs returned by `/api/v0/add` and
/// re-hashes everything fetched through `/api/v0/cat`.
pub struct IpfsCas {
    api: String,
    agent: ureq::Agent,
    cids: RwLock<HashMap<CasAddress, String>>,
}

impl IpfsCas {
    /// `api` is the node's API root, e.g. `http://127.0.0.1:5001`.
    pub fn new(api: impl Into<String>) -> Self {
        Self {
            api: api.into().trim_end_matches('/').to_owned(),
            agent: ureq::AgentBuilder::new().build(),
            cids: RwLock::new(HashMap::new()),
        }
    }

    pub fn cid_of(&self, addr: &CasAddress) -> Option<String> {
        self.cids.read().unwrap_or_else(|e| e.into_inner()).get(addr).cloned()
    }

    /// Makes a blob added elsewhere resolvable.
    pub fn register(&self, addr: CasAddress, cid: String) {
        self.cids.write().unwrap_or_else(|e| e.into_inner()).insert(addr, cid);
    }

    fn fetch(&self, cid: &str) -> Result<Vec<u8>> {
        let resp = self
            .agent
            .post(&format!("{}/api/v0/cat", self.api))
            .query("arg", cid)
            .call()
            .map_err(|e| LedgerError::Ipfs(e.to_string()))?;
        let mut body = Vec::new();
        resp.into_reader().read_to_end(&mut body).map_err(|e| LedgerError::Io(e.to_string()))?;
        Ok(body)
    }
}

fn multipart(bytes: &[u8]) -> Vec<u8> {
    let mut body = format!(
        "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"blob\"\r\nContent-Type: application/octet-stream\r\n\r\n"
    )
    .into_bytes();
    body.extend_from_slice(bytes);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    body
}

#[derive(serde::Deserialize)]
struct AddResponse {
    #[serde(rename = "Hash")]
    hash: String,
}

impl BlobStore for IpfsCas {
    fn put(&self, bytes: &[u8]) -> Result<CasAddress> {
        if bytes.is_empty() {
            return Err(LedgerError::EmptyBlob);
        }
        let addr = CasAddress::of(bytes);
        if self.cid_of(&addr).is_some() {
            return Ok(addr);
        }
        let resp = self
            .agent
            .post(&format!("{}/api/v0/add", self.api))
            .query("pin", "true")
            .set("Content-Type", &format!("multipart/form-data; boundary={BOUNDARY}"))
            .send_bytes(&multipart(bytes))
            .map_err(|e| LedgerError::Ipfs(e.to_string()))?;
        let text = resp.into_string().map_err(|e| LedgerError::Io(e.to_string()))?;
        let added: AddResponse = serde_json::from_str(text.lines().last().unwrap_or_default())
            .map_err(|e| LedgerError::Ipfs(format!("bad add response: {e}")))?;
        self.register(addr, added.hash);
        Ok(addr)
    }

    fn get(&self, addr: &CasAddress) -> Result<Vec<u8>> {
        let cid = self.cid_of(addr).ok_or(LedgerError::NotFound(*addr))?;
        let bytes = self.fetch(&cid)?;
        if CasAddress::of(&bytes) != *addr {
            return Err(LedgerError::CorruptBlob(*addr));
        }
        Ok(bytes)
    }

    fn contains(&self, addr: &CasAddress) -> bool {
        self.cid_of(addr).is_some()
    }
}
