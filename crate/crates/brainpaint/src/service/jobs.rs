//! Render jobs and their on-disk layout.
//!
//! Each job owns `<data_dir>/jobs/<id>/` holding `input.csv`, the resolved
//! `config.json`, the job record `job.json` and, once rendered, `out/`.
//! `job.json` is replaced atomically, so a restart sees either the old or
//! the new record.

use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use brainpaint_core::{Diagnostic, RunConfig, RunManifest};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

/// Structured error body shared by HTTP errors and failed jobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    pub details: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub state: JobState,
    /// Unix seconds.
    pub created_at: u64,
    /// Unix seconds. Pushed back when the job finishes, so retention
    /// counts from completion.
    pub expires_at: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manifest: Option<RunManifest>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<ErrorBody>,
}

impl JobRecord {
    /// Only finished jobs expire; queued and running ones are kept.
    pub fn is_expired(&self, now: u64) -> bool {
        self.state.is_terminal() && now >= self.expires_at
    }
}

pub fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn new_job_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

/// Job ids are 32 lowercase hex digits; anything else never names a job
/// and is never joined onto a path.
pub fn valid_job_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

#[derive(Debug, Clone)]
pub struct JobStore {
    root: PathBuf,
}

impl JobStore {
    pub fn open(data_dir: &Path) -> io::Result<Self> {
        let root = data_dir.join("jobs");
        std::fs::create_dir_all(&root)?;
        Ok(JobStore { root })
    }

    pub fn job_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn output_dir(&self, id: &str) -> PathBuf {
        self.job_dir(id).join("out")
    }

    pub fn create(&self, record: &JobRecord, csv: &str, config: &RunConfig) -> io::Result<()> {
        let dir = self.job_dir(&record.id);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("input.csv"), csv)?;
        let cfg = serde_json::to_vec_pretty(config).map_err(io::Error::other)?;
        std::fs::write(dir.join("config.json"), cfg)?;
        self.save(record)
    }

    pub fn save(&self, record: &JobRecord) -> io::Result<()> {
        let dir = self.job_dir(&record.id);
        let tmp = dir.join("job.json.tmp");
        let bytes = serde_json::to_vec_pretty(record).map_err(io::Error::other)?;
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, dir.join("job.json"))
    }

    pub fn inputs(&self, id: &str) -> io::Result<(RunConfig, String)> {
        let dir = self.job_dir(id);
        let cfg = std::fs::read(dir.join("config.json"))?;
        let cfg: RunConfig = serde_json::from_slice(&cfg).map_err(io::Error::other)?;
        let csv = std::fs::read_to_string(dir.join("input.csv"))?;
        Ok((cfg, csv))
    }

    pub fn remove(&self, id: &str) -> io::Result<()> {
        match std::fs::remove_dir_all(self.job_dir(id)) {
            Err(e) if e.kind() != io::ErrorKind::NotFound => Err(e),
            _ => Ok(()),
        }
    }

    /// Every readable job record, oldest first. Directories without a
    /// readable record are leftovers of an interrupted submission and are
    /// removed.
    pub fn load_all(&self) -> io::Result<Vec<JobRecord>> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.root)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !valid_job_id(&name) {
                continue;
            }
            let record = std::fs::read(entry.path().join("job.json"))
                .ok()
                .and_then(|b| serde_json::from_slice::<JobRecord>(&b).ok())
                .filter(|r| r.id == name);
            match record {
                Some(r) => out.push(r),
                None => self.remove(&name)?,
            }
        }
        out.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids() {
        let id = new_job_id();
        assert!(valid_job_id(&id), "{id}");
        assert!(!valid_job_id("../etc"));
        assert!(!valid_job_id(&id.to_uppercase()));
    }

    #[test]
    fn records_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let store = JobStore::open(dir.path()).unwrap();
        let rec = JobRecord {
            id: new_job_id(),
            state: JobState::Queued,
            created_at: 5,
            expires_at: 10,
            manifest: None,
            error: None,
        };
        store.create(&rec, "id,x\n", &RunConfig::default()).unwrap();
        std::fs::create_dir_all(store.job_dir(&new_job_id())).unwrap();
        assert_eq!(store.load_all().unwrap(), vec![rec.clone()]);
        let (cfg, csv) = store.inputs(&rec.id).unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(csv, "id,x\n");
        assert!(!rec.is_expired(100));
        store.remove(&rec.id).unwrap();
        assert!(store.load_all().unwrap().is_empty());
    }
}
