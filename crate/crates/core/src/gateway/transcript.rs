use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Generation, GenerationRequest};

/// One provider call, as written to the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub prompt_hash: String,
    pub relation: String,
    pub subject: String,
    pub variant: String,
    pub provider: String,
    pub text: String,
    pub first_token_logprob: Option<f64>,
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    pub price: f64,
    #[serde(default)]
    pub refused: bool,
}

impl TranscriptRecord {
    pub fn new(hash: &str, request: &GenerationRequest, generation: &Generation, price: f64) -> Self {
        Self {
            prompt_hash: hash.to_string(),
            relation: request.prompt.relation.clone(),
            subject: request.prompt.subject.id.clone(),
            variant: request.prompt.variant.as_str().to_string(),
            provider: generation.provider.clone(),
            text: generation.text.clone(),
            first_token_logprob: generation.first_token_logprob,
            prompt_tokens: generation.prompt_tokens,
            completion_tokens: generation.completion_tokens,
            price,
            refused: generation.refused,
        }
    }

    pub fn to_generation(&self) -> Generation {
        Generation {
            text: self.text.clone(),
            first_token_logprob: self.first_token_logprob,
            provider: self.provider.clone(),
            latency: Duration::ZERO,
            prompt_tokens: self.prompt_tokens,
            completion_tokens: self.completion_tokens,
            refused: self.refused,
            replayed: true,
        }
    }
}

/// Append-only JSON-lines log of provider calls.
///
/// Opening an existing file loads its records so repeated prompts are
/// answered from the log. A torn final line (interrupted write) is ignored
/// and truncated away before appending resumes.
pub struct Transcript {
    path: PathBuf,
    inner: Mutex<TranscriptInner>,
}

struct TranscriptInner {
    file: File,
    by_hash: HashMap<String, TranscriptRecord>,
    appended: usize,
}

impl Transcript {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut by_hash = HashMap::new();
        let mut valid_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            let mut offset = 0u64;
            for line in reader.split(b'\n') {
                let line = line?;
                let len = line.len() as u64 + 1;
                match serde_json::from_slice::<TranscriptRecord>(&line) {
                    Ok(record) => {
                        offset += len;
                        valid_len = offset;
                        by_hash.entry(record.prompt_hash.clone()).or_insert(record);
                    }
                    Err(_) if line.iter().all(u8::is_ascii_whitespace) => {
                        offset += len;
                        valid_len = offset;
                    }
                    Err(e) => {
                        tracing::warn!(path = %path.display(), "ignoring transcript tail: {e}");
                        break;
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        // Drop a torn tail so the next record starts on a fresh line.
        if file.metadata()?.len() > valid_len {
            file.set_len(valid_len)?;
        }
        Ok(Self {
            path,
            inner: Mutex::new(TranscriptInner {
                file,
                by_hash,
                appended: 0,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn lookup(&self, hash: &str) -> Option<TranscriptRecord> {
        self.inner
            .lock()
            .expect("transcript lock poisoned")
            .by_hash
            .get(hash)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("transcript lock poisoned").by_hash.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records appended through this handle.
    pub fn appended(&self) -> usize {
        self.inner.lock().expect("transcript lock poisoned").appended
    }

    /// Appends and flushes one record. A record for an already logged
    /// prompt is ignored.
    pub fn append(&self, record: TranscriptRecord) -> std::io::Result<()> {
        let mut inner = self.inner.lock().expect("transcript lock poisoned");
        if inner.by_hash.contains_key(&record.prompt_hash) {
            return Ok(());
        }
        let mut line = serde_json::to_vec(&record).map_err(std::io::Error::other)?;
        line.push(b'\n');
        inner.file.write_all(&line)?;
        inner.file.flush()?;
        inner.appended += 1;
        inner.by_hash.insert(record.prompt_hash.clone(), record);
        Ok(())
    }

    /// Reads every well-formed record in file order.
    pub fn read_records(path: impl AsRef<Path>) -> std::io::Result<Vec<TranscriptRecord>> {
        let reader = BufReader::new(File::open(path)?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            match serde_json::from_str(&line) {
                Ok(r) => out.push(r),
                Err(_) => break,
            }
        }
        Ok(out)
    }
}
