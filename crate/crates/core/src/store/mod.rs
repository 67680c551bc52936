//! Candidate profile persistence: a pluggable document-store contract, an
//! append-only event log, and single-writer-per-profile updates.

mod file;
mod memory;

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::{Mutex, RawMutex};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::career::RoleMapping;
use crate::coach::{ChatTurn, CoachError, QATranscript, Recalibration};
use crate::courses::{RecommendationQuery, ScoredCourse};
use crate::ingest::{ParsedResume, ResumeDocument};
use crate::skills::SkillAssessmentReport;
use crate::time::{Clock, Timestamp};

pub use file::FileStore;
pub use memory::MemoryStore;

/// Version of the on-disk profile directory layout.
pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown profile `{0}`")]
    UnknownProfile(String),
    #[error("invalid profile id `{0}`")]
    InvalidProfileId(String),
    #[error("course `{0}` was never recommended to this profile")]
    UnknownCourse(String),
    #[error("illegal course status transition {from} -> {to}")]
    IllegalTransition {
        from: CourseStatus,
        to: CourseStatus,
    },
    #[error("resume uploaded at {uploaded_at} predates the latest stored resume")]
    OutOfOrder { uploaded_at: Timestamp },
    #[error("storage unavailable: {0}")]
    StorageUnavailable(String),
    #[error("stored document for `{profile_id}` is corrupt: {message}")]
    Corrupt { profile_id: String, message: String },
    #[error(transparent)]
    Coach(#[from] CoachError),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::StorageUnavailable(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CourseStatus {
    Recommended,
    InProgress,
    Completed,
}

impl CourseStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CourseStatus::Recommended => "recommended",
            CourseStatus::InProgress => "in_progress",
            CourseStatus::Completed => "completed",
        }
    }

    pub fn can_become(self, next: CourseStatus) -> bool {
        use CourseStatus::*;
        matches!(
            (self, next),
            (Recommended, InProgress) | (InProgress, Completed) | (Recommended, Completed)
        )
    }
}

impl std::fmt::Display for CourseStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackedCourse {
    pub course_id: String,
    pub status: CourseStatus,
    pub updated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateProfile {
    pub profile_id: String,
    pub display_name: String,
    /// Every uploaded resume, oldest first. Never shrinks.
    pub resumes: Vec<ResumeDocument>,
    pub current_parsed: Option<ParsedResume>,
    pub mapping: Option<RoleMapping>,
    pub latest_report: Option<SkillAssessmentReport>,
    pub qa: QATranscript,
    pub chat: Vec<ChatTurn>,
    pub recommendation_query: Option<RecommendationQuery>,
    pub recommendations: Vec<ScoredCourse>,
    /// One entry per course ever recommended.
    pub course_tracker: Vec<TrackedCourse>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
}

impl CandidateProfile {
    pub fn new(
        profile_id: impl Into<String>,
        display_name: impl Into<String>,
        at: Timestamp,
    ) -> Self {
        let profile_id = profile_id.into();
        CandidateProfile {
            qa: QATranscript::new(format!("{profile_id}-qa")),
            profile_id,
            display_name: display_name.into(),
            resumes: Vec::new(),
            current_parsed: None,
            mapping: None,
            latest_report: None,
            chat: Vec::new(),
            recommendation_query: None,
            recommendations: Vec::new(),
            course_tracker: Vec::new(),
            created_at: at,
            updated_at: at,
        }
    }

    pub fn tracked(&self, course_id: &str) -> Option<&TrackedCourse> {
        self.course_tracker
            .iter()
            .find(|t| t.course_id == course_id)
    }

    /// Replaces the current recommendation list and starts tracking any
    /// course not seen before.
    pub fn set_recommendations(
        &mut self,
        query: Option<RecommendationQuery>,
        courses: Vec<ScoredCourse>,
        at: Timestamp,
    ) {
        for c in &courses {
            if self.tracked(&c.course.course_id).is_none() {
                self.course_tracker.push(TrackedCourse {
                    course_id: c.course.course_id.clone(),
                    status: CourseStatus::Recommended,
                    updated_at: at,
                });
            }
        }
        self.recommendation_query = query;
        self.recommendations = courses;
    }

    pub fn set_course_status(
        &mut self,
        course_id: &str,
        status: CourseStatus,
        at: Timestamp,
    ) -> Result<TrackedCourse, StoreError> {
        let entry = self
            .course_tracker
            .iter_mut()
            .find(|t| t.course_id == course_id)
            .ok_or_else(|| StoreError::UnknownCourse(course_id.to_string()))?;
        if !entry.status.can_become(status) {
            return Err(StoreError::IllegalTransition {
                from: entry.status,
                to: status,
            });
        }
        entry.status = status;
        entry.updated_at = at;
        Ok(entry.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ProfileUpserted,
    ResumeUploaded,
    AnswerRecorded,
    QuestionsGenerated,
    ChatAppended,
    Recalibrated,
    CourseStatusChanged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreEvent {
    /// Starts at 1 and increases by one per event of the same profile.
    pub event_id: u64,
    pub profile_id: String,
    pub kind: EventKind,
    pub at: Timestamp,
}

/// What changed, so the caller can rebuild derived results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecalibrationTrigger {
    ResumeUploaded { document_id: String },
    AnswerRecorded(Recalibration),
}

/// Canonical serialization: keys sorted at every level, fixed timestamp
/// format, pretty-printed with a trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

/// Backend contract. Implementations must make `save` atomic with respect
/// to concurrent `load` calls.
pub trait DocumentStore: Send + Sync {
    fn load(&self, profile_id: &str) -> Result<Option<CandidateProfile>, StoreError>;
    fn save(&self, profile: &CandidateProfile) -> Result<(), StoreError>;
    fn append_event(&self, event: &StoreEvent) -> Result<(), StoreError>;
    fn events(&self, profile_id: &str) -> Result<Vec<StoreEvent>, StoreError>;
    fn profile_ids(&self) -> Result<Vec<String>, StoreError>;
}

/// Profile ids double as file names, so they are restricted to
/// `[A-Za-z0-9_-]`, 1 to 64 characters.
pub fn validate_profile_id(profile_id: &str) -> Result<(), StoreError> {
    let ok = !profile_id.is_empty()
        && profile_id.len() <= 64
        && profile_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidProfileId(profile_id.to_string()))
    }
}

pub struct ProfileStore {
    backend: Box<dyn DocumentStore>,
    clock: Arc<dyn Clock>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    create_lock: Mutex<()>,
}

impl ProfileStore {
    pub fn new(backend: Box<dyn DocumentStore>, clock: Arc<dyn Clock>) -> Self {
        ProfileStore {
            backend,
            clock,
            locks: Mutex::new(HashMap::new()),
            create_lock: Mutex::new(()),
        }
    }

    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self::new(Box::new(MemoryStore::default()), clock)
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    fn lock_for(&self, profile_id: &str) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .entry(profile_id.to_string())
            .or_default()
            .clone()
    }

    /// Last committed state; never blocks on writers.
    pub fn get(&self, profile_id: &str) -> Result<CandidateProfile, StoreError> {
        validate_profile_id(profile_id)?;
        self.backend
            .load(profile_id)?
            .ok_or_else(|| StoreError::UnknownProfile(profile_id.to_string()))
    }

    pub fn events(&self, profile_id: &str) -> Result<Vec<StoreEvent>, StoreError> {
        validate_profile_id(profile_id)?;
        self.backend.events(profile_id)
    }

    pub fn profile_ids(&self) -> Result<Vec<String>, StoreError> {
        self.backend.profile_ids()
    }

    /// Exclusive write access to an existing profile until the writer drops.
    pub fn writer(&self, profile_id: &str) -> Result<ProfileWriter<'_>, StoreError> {
        validate_profile_id(profile_id)?;
        let guard = self.lock_for(profile_id).lock_arc();
        let profile = self
            .backend
            .load(profile_id)?
            .ok_or_else(|| StoreError::UnknownProfile(profile_id.to_string()))?;
        Ok(ProfileWriter {
            store: self,
            _guard: guard,
            profile,
        })
    }

    /// Creates a profile under the next free sequential id (`p-000001`, ...).
    pub fn create_profile(&self, display_name: &str) -> Result<CandidateProfile, StoreError> {
        let _create = self.create_lock.lock();
        let next = self
            .backend
            .profile_ids()?
            .iter()
            .filter_map(|id| id.strip_prefix("p-").and_then(|n| n.parse::<u64>().ok()))
            .max()
            .unwrap_or(0)
            + 1;
        let profile = CandidateProfile::new(format!("p-{next:06}"), display_name, self.now());
        self.upsert_profile(profile)
    }

    /// Stores `profile` wholesale, creating it when unknown. `created_at` of an
    /// existing profile is preserved; `updated_at` is stamped.
    pub fn upsert_profile(
        &self,
        mut profile: CandidateProfile,
    ) -> Result<CandidateProfile, StoreError> {
        validate_profile_id(&profile.profile_id)?;
        let _guard = self.lock_for(&profile.profile_id).lock_arc();
        if let Some(existing) = self.backend.load(&profile.profile_id)? {
            profile.created_at = existing.created_at;
        }
        self.commit(&mut profile, EventKind::ProfileUpserted)?;
        Ok(profile)
    }

    pub fn append_resume(
        &self,
        profile_id: &str,
        document: ResumeDocument,
    ) -> Result<(CandidateProfile, RecalibrationTrigger), StoreError> {
        let mut w = self.writer(profile_id)?;
        let trigger = w.append_resume(document)?;
        Ok((w.into_profile(), trigger))
    }

    pub fn set_course_status(
        &self,
        profile_id: &str,
        course_id: &str,
        status: CourseStatus,
    ) -> Result<TrackedCourse, StoreError> {
        self.writer(profile_id)?
            .set_course_status(course_id, status)
    }

    fn commit(
        &self,
        profile: &mut CandidateProfile,
        kind: EventKind,
    ) -> Result<StoreEvent, StoreError> {
        let at = self.now();
        profile.updated_at = at;
        self.backend.save(profile)?;
        let event_id = self
            .backend
            .events(&profile.profile_id)?
            .last()
            .map_or(1, |e| e.event_id + 1);
        let event = StoreEvent {
            event_id,
            profile_id: profile.profile_id.clone(),
            kind,
            at,
        };
        self.backend.append_event(&event)?;
        Ok(event)
    }
}

/// Holds the profile's write lock; every `commit` persists the working copy
/// and records one event.
pub struct ProfileWriter<'s> {
    store: &'s ProfileStore,
    _guard: parking_lot::ArcMutexGuard<RawMutex, ()>,
    profile: CandidateProfile,
}

impl ProfileWriter<'_> {
    pub fn profile(&self) -> &CandidateProfile {
        &self.profile
    }

    pub fn profile_mut(&mut self) -> &mut CandidateProfile {
        &mut self.profile
    }

    pub fn into_profile(self) -> CandidateProfile {
        self.profile
    }

    pub fn now(&self) -> Timestamp {
        self.store.now()
    }

    pub fn commit(&mut self, kind: EventKind) -> Result<StoreEvent, StoreError> {
        self.store.commit(&mut self.profile, kind)
    }

    /// Appends to the resume history and commits immediately, so the upload
    /// survives any later pipeline failure.
    pub fn append_resume(
        &mut self,
        document: ResumeDocument,
    ) -> Result<RecalibrationTrigger, StoreError> {
        if let Some(last) = self.profile.resumes.last() {
            if document.uploaded_at < last.uploaded_at {
                return Err(StoreError::OutOfOrder {
                    uploaded_at: document.uploaded_at,
                });
            }
        }
        let document_id = document.document_id.clone();
        self.profile.resumes.push(document);
        self.commit(EventKind::ResumeUploaded)?;
        Ok(RecalibrationTrigger::ResumeUploaded { document_id })
    }

    pub fn record_answer(
        &mut self,
        question_id: &str,
        answer: &str,
        attests_advanced: bool,
    ) -> Result<RecalibrationTrigger, StoreError> {
        let at = self.now();
        let signal = self
            .profile
            .qa
            .record_answer(question_id, answer, attests_advanced, at)?;
        self.commit(EventKind::AnswerRecorded)?;
        Ok(RecalibrationTrigger::AnswerRecorded(signal))
    }

    pub fn set_course_status(
        &mut self,
        course_id: &str,
        status: CourseStatus,
    ) -> Result<TrackedCourse, StoreError> {
        let at = self.now();
        let tracked = self.profile.set_course_status(course_id, status, at)?;
        self.commit(EventKind::CourseStatusChanged)?;
        Ok(tracked)
    }
}
