use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Where paper metadata comes from.
#[derive(Debug, Clone)]
pub enum MetadataSource {
    /// `GET <endpoint>/<paper_id>` returning `{title, date, venue}`.
    Http { endpoint: String },
    /// Offline mode: `<dir>/<paper_id>.json`.
    Fixture { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub title: String,
    pub date: String,
    #[serde(default)]
    pub venue: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum MetadataError {
    #[error("no metadata for paper {0}")]
    NotFound(String),
    #[error("offline metadata requested but fixture directory {0} is unavailable")]
    OfflineUnavailable(PathBuf),
    #[error("metadata endpoint error: {0}")]
    Endpoint(String),
    #[error("malformed metadata for {id}: {reason}")]
    Malformed { id: String, reason: String },
}

pub fn fetch_metadata(paper_id: &str, source: &MetadataSource) -> Result<MetadataRecord, MetadataError> {
    if paper_id.is_empty()
        || paper_id.contains(['/', '\\'])
        || paper_id.starts_with('.')
    {
        return Err(MetadataError::NotFound(paper_id.to_string()));
    }
    let body = match source {
        MetadataSource::Fixture { dir } => {
            if !dir.is_dir() {
                return Err(MetadataError::OfflineUnavailable(dir.clone()));
            }
            let path = dir.join(format!("{paper_id}.json"));
            match std::fs::read_to_string(&path) {
                Ok(text) => text,
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    return Err(MetadataError::NotFound(paper_id.to_string()))
                }
                Err(e) => return Err(MetadataError::Endpoint(format!("{}: {e}", path.display()))),
            }
        }
        MetadataSource::Http { endpoint } => {
            let url = format!("{}/{}", endpoint.trim_end_matches('/'), paper_id);
            let agent: ureq::Agent = ureq::Agent::config_builder()
                .http_status_as_error(false)
                .timeout_global(Some(Duration::from_secs(30)))
                .build()
                .into();
            let mut resp = agent
                .get(&url)
                .call()
                .map_err(|e| MetadataError::Endpoint(e.to_string()))?;
            match resp.status().as_u16() {
                200..=299 => {}
                404 => return Err(MetadataError::NotFound(paper_id.to_string())),
                code => return Err(MetadataError::Endpoint(format!("GET {url} returned {code}"))),
            }
            resp.body_mut()
                .read_to_string()
                .map_err(|e| MetadataError::Endpoint(e.to_string()))?
        }
    };
    serde_json::from_str(&body).map_err(|e| MetadataError::Malformed {
        id: paper_id.to_string(),
        reason: e.to_string(),
    })
}
