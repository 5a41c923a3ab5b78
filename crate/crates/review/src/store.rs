use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use kbc::{LikertRating, LikertValue};
use serde::{Deserialize, Serialize};

use crate::accuracy::{manual_accuracy, ManualAccuracyReport};
use crate::sample::{ReviewBatch, ReviewItem};
use crate::ReviewError;

/// One line of the review log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    BatchCreated { batch: ReviewBatch },
    RatingRecorded { rating: StoredRating },
    BatchClosed { batch_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRating {
    pub rating_id: String,
    pub seq: u64,
    pub batch_id: String,
    #[serde(flatten)]
    pub rating: LikertRating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRequest {
    pub prediction_id: String,
    pub value: LikertValue,
    pub annotator: String,
    /// Needed only when the prediction sits in more than one open batch;
    /// otherwise the newest open batch holding it is used.
    #[serde(default)]
    pub batch_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub id: String,
    pub relation: String,
    pub size: usize,
    pub rated_items: usize,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchView {
    #[serde(flatten)]
    pub batch: ReviewBatch,
    pub closed: bool,
    /// Current rating per (item, annotator), in item then annotator order.
    pub ratings: Vec<StoredRating>,
}

#[derive(Debug)]
struct BatchState {
    batch: ReviewBatch,
    closed: bool,
    /// (prediction id, annotator) → current rating
    ratings: BTreeMap<(String, String), StoredRating>,
}

impl BatchState {
    fn contains(&self, prediction_id: &str) -> bool {
        self.batch.items.iter().any(|i| i.prediction_id == prediction_id)
    }

    fn summary(&self) -> BatchSummary {
        let mut rated: Vec<&str> = self.ratings.keys().map(|(p, _)| p.as_str()).collect();
        rated.dedup();
        BatchSummary {
            id: self.batch.id.clone(),
            relation: self.batch.relation.clone(),
            size: self.batch.items.len(),
            rated_items: rated.len(),
            closed: self.closed,
        }
    }
}

#[derive(Debug, Default)]
struct State {
    /// Creation order.
    batches: Vec<BatchState>,
    next_seq: u64,
}

impl State {
    fn find(&self, id: &str) -> Option<&BatchState> {
        self.batches.iter().find(|b| b.batch.id == id)
    }

    fn apply(&mut self, event: Event) {
        match event {
            Event::BatchCreated { batch } => {
                if self.find(&batch.id).is_none() {
                    self.batches.push(BatchState {
                        batch,
                        closed: false,
                        ratings: BTreeMap::new(),
                    });
                }
            }
            Event::RatingRecorded { rating } => {
                self.next_seq = self.next_seq.max(rating.seq + 1);
                if let Some(b) = self.batches.iter_mut().find(|b| b.batch.id == rating.batch_id) {
                    let key = (rating.rating.prediction_id.clone(), rating.rating.annotator.clone());
                    b.ratings.insert(key, rating);
                }
            }
            Event::BatchClosed { batch_id } => {
                if let Some(b) = self.batches.iter_mut().find(|b| b.batch.id == batch_id) {
                    b.closed = true;
                }
            }
        }
    }
}

struct Inner {
    state: State,
    file: File,
}

/// Review state backed by a single append-only JSON-lines event log.
///
/// Every mutation is one appended, synced line; opening the store replays
/// the log. A torn final line from an interrupted write is dropped.
pub struct ReviewStore {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl ReviewStore {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ReviewError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| ReviewError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut state = State::default();
        let mut valid_len = 0u64;
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io)?);
            for line in reader.split(b'\n') {
                let line = line.map_err(io)?;
                if line.iter().all(u8::is_ascii_whitespace) {
                    valid_len += line.len() as u64 + 1;
                    continue;
                }
                match serde_json::from_slice::<Event>(&line) {
                    Ok(event) => {
                        state.apply(event);
                        valid_len += line.len() as u64 + 1;
                    }
                    Err(e) => {
                        tracing::warn!(path = %path.display(), "dropping review log tail: {e}");
                        break;
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        if file.metadata().map_err(io)?.len() > valid_len {
            file.set_len(valid_len).map_err(io)?;
        }
        Ok(Self {
            path,
            inner: Mutex::new(Inner { state, file }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().expect("review store poisoned")
    }

    fn append(&self, inner: &mut Inner, event: Event) -> Result<(), ReviewError> {
        let mut line = serde_json::to_vec(&event).expect("event serializes");
        line.push(b'\n');
        let io = |source| ReviewError::Io {
            path: self.path.display().to_string(),
            source,
        };
        inner.file.write_all(&line).map_err(io)?;
        inner.file.sync_data().map_err(io)?;
        inner.state.apply(event);
        Ok(())
    }

    /// Stores a batch. Re-adding an identical batch is a no-op; a different
    /// batch under an existing id is rejected.
    pub fn add_batch(&self, batch: ReviewBatch) -> Result<ReviewBatch, ReviewError> {
        let mut inner = self.lock();
        if let Some(existing) = inner.state.find(&batch.id) {
            if existing.batch == batch {
                return Ok(batch);
            }
            return Err(ReviewError::Invalid(format!("batch {} already exists with other items", batch.id)));
        }
        self.append(&mut inner, Event::BatchCreated { batch: batch.clone() })?;
        Ok(batch)
    }

    pub fn record_rating(&self, request: RatingRequest, at: DateTime<Utc>) -> Result<StoredRating, ReviewError> {
        if request.annotator.trim().is_empty() {
            return Err(ReviewError::Invalid("annotator must not be empty".into()));
        }
        let mut inner = self.lock();
        let batch_id = match &request.batch_id {
            Some(id) => {
                let b = inner.state.find(id).ok_or_else(|| ReviewError::UnknownBatch(id.clone()))?;
                if !b.contains(&request.prediction_id) {
                    return Err(ReviewError::UnknownItem(request.prediction_id));
                }
                if b.closed {
                    return Err(ReviewError::Closed(id.clone()));
                }
                id.clone()
            }
            None => {
                let holding: Vec<&BatchState> = inner
                    .state
                    .batches
                    .iter()
                    .filter(|b| b.contains(&request.prediction_id))
                    .collect();
                let last = holding.last().ok_or_else(|| ReviewError::UnknownItem(request.prediction_id.clone()))?;
                match holding.iter().rev().find(|b| !b.closed) {
                    Some(b) => b.batch.id.clone(),
                    None => return Err(ReviewError::Closed(last.batch.id.clone())),
                }
            }
        };
        let seq = inner.state.next_seq;
        let rating = StoredRating {
            rating_id: format!("r{seq:06}"),
            seq,
            batch_id,
            rating: LikertRating {
                prediction_id: request.prediction_id,
                value: request.value,
                annotator: request.annotator,
                timestamp: at,
            },
        };
        self.append(&mut inner, Event::RatingRecorded { rating: rating.clone() })?;
        Ok(rating)
    }

    pub fn close_batch(&self, id: &str) -> Result<BatchSummary, ReviewError> {
        let mut inner = self.lock();
        let b = inner.state.find(id).ok_or_else(|| ReviewError::UnknownBatch(id.to_string()))?;
        if !b.closed {
            self.append(&mut inner, Event::BatchClosed { batch_id: id.to_string() })?;
        }
        Ok(inner.state.find(id).expect("present").summary())
    }

    pub fn batches(&self) -> Vec<BatchSummary> {
        self.lock().state.batches.iter().map(BatchState::summary).collect()
    }

    pub fn batch(&self, id: &str) -> Result<BatchView, ReviewError> {
        let inner = self.lock();
        let b = inner.state.find(id).ok_or_else(|| ReviewError::UnknownBatch(id.to_string()))?;
        Ok(BatchView {
            batch: b.batch.clone(),
            closed: b.closed,
            ratings: b.ratings.values().cloned().collect(),
        })
    }

    /// Current rating of `prediction_id` by `annotator`, newest batch first.
    pub fn current_rating(&self, prediction_id: &str, annotator: &str) -> Option<StoredRating> {
        let inner = self.lock();
        let key = (prediction_id.to_string(), annotator.to_string());
        inner.state.batches.iter().rev().find_map(|b| b.ratings.get(&key).cloned())
    }

    /// First item in the batch the annotator has not rated yet.
    pub fn next_item(&self, id: &str, annotator: &str) -> Result<Option<ReviewItem>, ReviewError> {
        let inner = self.lock();
        let b = inner.state.find(id).ok_or_else(|| ReviewError::UnknownBatch(id.to_string()))?;
        if b.closed {
            return Err(ReviewError::Closed(id.to_string()));
        }
        Ok(b.batch
            .items
            .iter()
            .find(|i| !b.ratings.contains_key(&(i.prediction_id.clone(), annotator.to_string())))
            .cloned())
    }

    pub fn batch_report(&self, id: &str) -> Result<ManualAccuracyReport, ReviewError> {
        let inner = self.lock();
        let b = inner.state.find(id).ok_or_else(|| ReviewError::UnknownBatch(id.to_string()))?;
        report_over(&b.batch.relation, std::slice::from_ref(b))
    }

    /// Accuracy over every batch of a relation. An item sampled in several
    /// batches counts once, with each annotator's latest rating.
    pub fn relation_report(&self, relation: &str) -> Result<ManualAccuracyReport, ReviewError> {
        let inner = self.lock();
        let batches: Vec<&BatchState> = inner.state.batches.iter().filter(|b| b.batch.relation == relation).collect();
        if batches.is_empty() {
            return Err(ReviewError::UnknownRelation(relation.to_string()));
        }
        report_over(relation, batches)
    }
}

fn report_over<'a>(
    relation: &str,
    batches: impl IntoIterator<Item = &'a BatchState>,
) -> Result<ManualAccuracyReport, ReviewError> {
    let mut latest: BTreeMap<String, BTreeMap<String, (u64, LikertValue)>> = BTreeMap::new();
    for b in batches {
        for item in &b.batch.items {
            latest.entry(item.prediction_id.clone()).or_default();
        }
        for ((item, annotator), r) in &b.ratings {
            let slot = latest.entry(item.clone()).or_default();
            match slot.get(annotator) {
                Some((seq, _)) if *seq > r.seq => {}
                _ => {
                    slot.insert(annotator.clone(), (r.seq, r.rating.value));
                }
            }
        }
    }
    let per_item: BTreeMap<String, Vec<LikertValue>> = latest
        .into_iter()
        .map(|(item, by_annotator)| (item, by_annotator.into_values().map(|(_, v)| v).collect()))
        .collect();
    manual_accuracy(relation, per_item.len(), &per_item)
}
