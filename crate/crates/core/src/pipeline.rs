//! End-to-end orchestration: resume upload, role mapping, assessment and
//! retrieval, plus recalibration whenever a profile's inputs change.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::career::{
    manual_mapping, map_role, map_role_text, recommend_paths, CareerError, CareerNode, CareerTree,
    RoleMapping, DEFAULT_MAPPING_THRESHOLD,
};
use crate::coach::{
    self, ChatTurn, CoachContext, CoachError, QAQuestion, QATranscript, Speaker, TakeawaySummary,
};
use crate::courses::{
    build_query, search_with, CourseError, RecommendationQuery, ScanMode, ScoredCourse,
    VectorCollection, DEFAULT_K,
};
use crate::embeddings::Embedder;
use crate::gateway::{Gateway, TokenCount};
use crate::ingest::{
    chunk_text, extract_structured, extract_text, merge_partials, IngestError, MediaKind,
    ParsedResume, ResumeDocument, DEFAULT_CHUNK_BUDGET, DEFAULT_CHUNK_OVERLAP,
};
use crate::skills::{assess, collect_evidence, SkillAssessmentReport, SkillsError, SkillsStore};
use crate::store::{
    CandidateProfile, CourseStatus, EventKind, ProfileStore, ProfileWriter, StoreError,
    TrackedCourse,
};
use crate::text::normalize_key;
use crate::time::Clock;

/// Generic question whose answer is used to place a candidate the resume
/// alone could not map.
pub const FALLBACK_ROLE_QUESTION: &str = "generic-current-role";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Career(#[from] CareerError),
    #[error(transparent)]
    Skills(#[from] SkillsError),
    #[error(transparent)]
    Courses(#[from] CourseError),
    #[error(transparent)]
    Coach(#[from] CoachError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("no resume has been uploaded yet")]
    NoResumeYet,
    #[error("the candidate has not been mapped to a role yet")]
    NoMappingYet,
    #[error("no skill report has been generated yet")]
    NoReportYet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineSettings {
    pub mapping_threshold: f64,
    pub k: usize,
    pub chunk_budget: TokenCount,
    pub chunk_overlap: TokenCount,
    pub scan_mode: ScanMode,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            mapping_threshold: DEFAULT_MAPPING_THRESHOLD,
            k: DEFAULT_K,
            chunk_budget: DEFAULT_CHUNK_BUDGET,
            chunk_overlap: DEFAULT_CHUNK_OVERLAP,
            scan_mode: ScanMode::default(),
        }
    }
}

/// Shared, read-only configuration for every pipeline stage.
pub struct Pipeline {
    pub tree: CareerTree,
    pub skills: SkillsStore,
    pub templates: crate::templates::Templates,
    pub gateway: Gateway,
    pub embedder: Box<dyn Embedder>,
    pub collection: VectorCollection,
    pub settings: PipelineSettings,
}

/// Derived results for one profile state.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub mapping: RoleMapping,
    pub report: SkillAssessmentReport,
    pub query: Option<RecommendationQuery>,
    pub recommendations: Vec<ScoredCourse>,
}

/// Response of a resume upload or a recalibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineBundle {
    pub profile_id: String,
    pub parsed: ParsedResume,
    pub mapping: RoleMapping,
    pub report: SkillAssessmentReport,
    pub query: Option<RecommendationQuery>,
    pub recommendations: Vec<ScoredCourse>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CareerPathView {
    pub current_node: CareerNode,
    pub immediate: Vec<CareerNode>,
    pub advanced: Vec<CareerNode>,
}

impl Pipeline {
    pub fn parse_document(&self, document: &ResumeDocument) -> Result<ParsedResume, PipelineError> {
        let chunks = chunk_text(
            &document.extracted_text,
            self.settings.chunk_budget,
            self.settings.chunk_overlap,
        );
        let partials =
            extract_structured(&chunks, &self.gateway, &self.templates.resume_extraction)?;
        Ok(merge_partials(&partials)?)
    }

    /// Maps from the resume; when that fails, from the candidate's answer to
    /// [`FALLBACK_ROLE_QUESTION`]: a role picked by id or title is taken as
    /// is, any other description is mapped by similarity.
    pub fn map_candidate(
        &self,
        parsed: &ParsedResume,
        qa: &QATranscript,
        clock: &dyn Clock,
    ) -> Result<RoleMapping, PipelineError> {
        let threshold = self.settings.mapping_threshold;
        let from_resume = map_role(
            parsed,
            &self.tree,
            self.embedder.as_ref(),
            threshold,
            clock.now(),
        );
        match from_resume {
            Err(CareerError::UnmappableRole { .. } | CareerError::NoExperience) => {
                let answer = qa
                    .latest()
                    .into_iter()
                    .find(|(q, _)| q.question_id == FALLBACK_ROLE_QUESTION)
                    .map(|(_, e)| e.answer.clone());
                match answer {
                    Some(text) => match self.picked_node(&text) {
                        Some(node_id) => Ok(manual_mapping(&self.tree, &node_id, clock.now())?),
                        None => Ok(map_role_text(
                            &text,
                            &self.tree,
                            self.embedder.as_ref(),
                            threshold,
                            clock.now(),
                        )?),
                    },
                    None => Ok(from_resume?),
                }
            }
            other => Ok(other?),
        }
    }

    /// A node named exactly (by id or title) in a fallback answer.
    fn picked_node(&self, answer: &str) -> Option<String> {
        let key = normalize_key(answer.trim().trim_end_matches('.'));
        self.tree
            .nodes()
            .iter()
            .find(|n| normalize_key(&n.node_id) == key || normalize_key(&n.title) == key)
            .map(|n| n.node_id.clone())
    }

    pub fn career_path(&self, node_id: &str) -> Result<CareerPathView, PipelineError> {
        let current_node = self
            .tree
            .node(node_id)
            .cloned()
            .ok_or_else(|| CareerError::UnknownNode(node_id.to_string()))?;
        let paths = recommend_paths(node_id, &self.tree)?;
        Ok(CareerPathView {
            current_node,
            immediate: paths.immediate,
            advanced: paths.advanced,
        })
    }

    pub fn analyze(
        &self,
        profile_id: &str,
        parsed: &ParsedResume,
        qa: &QATranscript,
        clock: &dyn Clock,
    ) -> Result<Analysis, PipelineError> {
        let mapping = self.map_candidate(parsed, qa, clock)?;
        let path = self.career_path(&mapping.node_id)?;
        let now = clock.now();
        let evidence = collect_evidence(parsed, &qa.evidence(), &self.skills, now.year_month());
        let report = assess(
            profile_id,
            &evidence,
            &path.current_node,
            &path.immediate,
            &self.skills,
            now,
        )?;
        let target = path.immediate.first().unwrap_or(&path.current_node);
        let (query, recommendations) = match build_query(&report, target, self.settings.k) {
            Ok(query) => {
                let found = search_with(
                    &self.collection,
                    &query,
                    self.embedder.as_ref(),
                    self.settings.scan_mode,
                )?;
                (Some(query), found)
            }
            Err(CourseError::NoGaps) => (None, Vec::new()),
            Err(e) => return Err(e.into()),
        };
        Ok(Analysis {
            mapping,
            report,
            query,
            recommendations,
        })
    }

    fn next_titles(&self, mapping: Option<&RoleMapping>) -> Vec<String> {
        mapping
            .and_then(|m| recommend_paths(&m.node_id, &self.tree).ok())
            .map(|p| p.immediate.into_iter().map(|n| n.title).collect())
            .unwrap_or_default()
    }

    fn role_title(&self, mapping: Option<&RoleMapping>) -> Option<String> {
        mapping
            .and_then(|m| self.tree.node(&m.node_id))
            .map(|n| n.title.clone())
    }
}

/// Q&A state as served to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaView {
    pub questions: Vec<QaQuestionView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaQuestionView {
    #[serde(flatten)]
    pub question: QAQuestion,
    pub answer: Option<String>,
    pub revision: Option<u32>,
    pub revisions: usize,
}

/// Outcome of a recorded Q&A answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub question_id: String,
    pub revision: u32,
    /// Present when the profile had a resume to recalibrate.
    pub bundle: Option<PipelineBundle>,
}

/// Pipeline plus persistence: every mutating call runs under the profile's
/// write lock and persists its results before returning.
pub struct CoachService {
    pub pipeline: Pipeline,
    pub store: ProfileStore,
}

impl CoachService {
    pub fn new(pipeline: Pipeline, store: ProfileStore) -> Self {
        CoachService { pipeline, store }
    }

    fn clock(&self) -> Arc<dyn Clock> {
        self.store.clock().clone()
    }

    pub fn create_profile(&self, display_name: &str) -> Result<CandidateProfile, PipelineError> {
        Ok(self.store.create_profile(display_name)?)
    }

    pub fn profile(&self, profile_id: &str) -> Result<CandidateProfile, PipelineError> {
        Ok(self.store.get(profile_id)?)
    }

    /// Extracts, appends to the resume history, parses and recalibrates.
    /// The history append survives any later failure.
    pub fn upload_resume(
        &self,
        profile_id: &str,
        filename: &str,
        bytes: &[u8],
    ) -> Result<PipelineBundle, PipelineError> {
        let mut w = self.store.writer(profile_id)?;
        let document = extract_text(filename, bytes, MediaKind::detect(filename, bytes), w.now())?;
        w.append_resume(document.clone())?;
        let parsed = self.pipeline.parse_document(&document)?;
        w.profile_mut().current_parsed = Some(parsed);
        self.recalibrate(&mut w)
    }

    /// Re-runs mapping, assessment and retrieval for the writer's profile and
    /// commits the outcome. An unmappable candidate has derived results
    /// cleared and receives the generic question set.
    pub fn recalibrate(&self, w: &mut ProfileWriter<'_>) -> Result<PipelineBundle, PipelineError> {
        let clock = self.clock();
        let profile = w.profile();
        let parsed = profile
            .current_parsed
            .clone()
            .ok_or(PipelineError::NoResumeYet)?;
        match self
            .pipeline
            .analyze(&profile.profile_id, &parsed, &profile.qa, clock.as_ref())
        {
            Ok(analysis) => {
                let at = w.now();
                let p = w.profile_mut();
                p.mapping = Some(analysis.mapping.clone());
                p.latest_report = Some(analysis.report.clone());
                p.set_recommendations(analysis.query.clone(), analysis.recommendations.clone(), at);
                w.commit(EventKind::Recalibrated)?;
                Ok(PipelineBundle {
                    profile_id: w.profile().profile_id.clone(),
                    parsed,
                    mapping: analysis.mapping,
                    report: analysis.report,
                    query: analysis.query,
                    recommendations: analysis.recommendations,
                })
            }
            Err(
                e @ PipelineError::Career(
                    CareerError::UnmappableRole { .. } | CareerError::NoExperience,
                ),
            ) => {
                let generic = coach::generate_questions(
                    None,
                    &self.pipeline.tree,
                    &self.pipeline.skills,
                    &self.pipeline.gateway,
                    &self.pipeline.templates,
                )?;
                let at = w.now();
                let p = w.profile_mut();
                p.mapping = None;
                p.latest_report = None;
                p.set_recommendations(None, Vec::new(), at);
                p.qa.add_questions(generic);
                w.commit(EventKind::Recalibrated)?;
                Err(e)
            }
            Err(e) => Err(e),
        }
    }

    pub fn career_path(&self, profile_id: &str) -> Result<CareerPathView, PipelineError> {
        let profile = self.store.get(profile_id)?;
        let mapping = profile.mapping.ok_or(PipelineError::NoMappingYet)?;
        self.pipeline.career_path(&mapping.node_id)
    }

    pub fn skill_report(&self, profile_id: &str) -> Result<SkillAssessmentReport, PipelineError> {
        self.store
            .get(profile_id)?
            .latest_report
            .ok_or(PipelineError::NoReportYet)
    }

    /// Questions for the current role, generated on first request and kept
    /// in the transcript afterwards.
    pub fn qa(&self, profile_id: &str) -> Result<QaView, PipelineError> {
        let current = self.store.get(profile_id)?;
        if needs_questions(&current) {
            let mut w = self.store.writer(profile_id)?;
            if needs_questions(w.profile()) {
                let questions = coach::generate_questions(
                    w.profile().mapping.as_ref(),
                    &self.pipeline.tree,
                    &self.pipeline.skills,
                    &self.pipeline.gateway,
                    &self.pipeline.templates,
                )?;
                w.profile_mut().qa.add_questions(questions);
                w.commit(EventKind::QuestionsGenerated)?;
            }
            return Ok(qa_view(&w.into_profile().qa));
        }
        Ok(qa_view(&current.qa))
    }

    /// Records (or revises) an answer and recalibrates when a resume exists.
    pub fn answer(
        &self,
        profile_id: &str,
        question_id: &str,
        answer: &str,
        attests_advanced: bool,
    ) -> Result<AnswerOutcome, PipelineError> {
        if answer.trim().is_empty() {
            return Err(CoachError::InvalidInput("answer must not be empty".into()).into());
        }
        let mut w = self.store.writer(profile_id)?;
        let signal = match w.record_answer(question_id, answer, attests_advanced)? {
            crate::store::RecalibrationTrigger::AnswerRecorded(signal) => signal,
            crate::store::RecalibrationTrigger::ResumeUploaded { .. } => unreachable!(),
        };
        let bundle = if w.profile().current_parsed.is_some() {
            Some(self.recalibrate(&mut w)?)
        } else {
            None
        };
        Ok(AnswerOutcome {
            question_id: signal.question_id,
            revision: signal.revision,
            bundle,
        })
    }

    /// Appends the candidate's message and one coach reply. The first
    /// exchange is preceded by the coach's greeting.
    pub fn chat(&self, profile_id: &str, text: &str) -> Result<ChatTurn, PipelineError> {
        let mut w = self.store.writer(profile_id)?;
        let mut history = w.profile().chat.clone();
        let empty = ParsedResume::default();
        let p = w.profile();
        let resume = p.current_parsed.as_ref().unwrap_or(&empty);
        if history.is_empty() {
            history.push(coach::greeting(&self.pipeline.templates, resume, w.now())?);
        }
        let role_title = self.pipeline.role_title(p.mapping.as_ref());
        let next_titles = self.pipeline.next_titles(p.mapping.as_ref());
        let ctx = CoachContext {
            resume,
            role_title: role_title.as_deref(),
            next_titles: &next_titles,
            report: p.latest_report.as_ref(),
            qa: &p.qa,
            courses: &p.recommendations,
        };
        let asked = ChatTurn {
            speaker: Speaker::Candidate,
            text: text.trim().to_string(),
            at: w.now(),
        };
        let reply = coach::chat_reply(
            &ctx,
            &history,
            text,
            &self.pipeline.gateway,
            &self.pipeline.templates,
            w.now(),
        )?;
        history.push(asked);
        history.push(reply.clone());
        w.profile_mut().chat = history;
        w.commit(EventKind::ChatAppended)?;
        Ok(reply)
    }

    pub fn takeaways(&self, profile_id: &str) -> Result<TakeawaySummary, PipelineError> {
        let profile = self.store.get(profile_id)?;
        let report = profile
            .latest_report
            .as_ref()
            .ok_or(PipelineError::NoReportYet)?;
        let title = self
            .pipeline
            .role_title(profile.mapping.as_ref())
            .ok_or(PipelineError::NoMappingYet)?;
        Ok(coach::summarize_takeaways(
            report,
            &title,
            &self.pipeline.gateway,
            &self.pipeline.templates,
        )?)
    }

    pub fn set_course_status(
        &self,
        profile_id: &str,
        course_id: &str,
        status: CourseStatus,
    ) -> Result<TrackedCourse, PipelineError> {
        Ok(self
            .store
            .set_course_status(profile_id, course_id, status)?)
    }
}

fn needs_questions(profile: &CandidateProfile) -> bool {
    let role = profile.mapping.as_ref().map(|m| m.node_id.as_str());
    !profile
        .qa
        .questions
        .iter()
        .any(|q| q.role_node_id.as_deref() == role)
}

fn qa_view(qa: &QATranscript) -> QaView {
    let latest = qa.latest();
    QaView {
        questions: qa
            .questions
            .iter()
            .map(|q| {
                let entry = latest
                    .iter()
                    .find(|(lq, _)| lq.question_id == q.question_id)
                    .map(|(_, e)| *e);
                QaQuestionView {
                    question: q.clone(),
                    answer: entry.map(|e| e.answer.clone()),
                    revision: entry.map(|e| e.revision),
                    revisions: qa.revisions(&q.question_id).len(),
                }
            })
            .collect(),
    }
}
