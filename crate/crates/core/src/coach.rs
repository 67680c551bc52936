//! Q&A interview, coaching chat and takeaway summaries.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::career::{CareerTree, RoleMapping};
use crate::courses::ScoredCourse;
use crate::gateway::{Gateway, GatewayError, LlmRequest, CHAT_TEMPERATURE};
use crate::ingest::ParsedResume;
use crate::skills::{QaEvidence, SkillAssessmentReport, SkillsStore};
use crate::templates::{render, TemplateError, Templates};
use crate::text::normalize_key;
use crate::time::Timestamp;

/// Chat turns included in a prompt.
pub const CHAT_HISTORY_WINDOW: usize = 12;

#[derive(Debug, Error)]
pub enum CoachError {
    #[error("unknown question `{0}`")]
    UnknownQuestion(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
}

impl CoachError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, CoachError::Gateway(e) if e.is_retriable())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Aspiration,
    SkillProbe,
    Preference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAQuestion {
    pub question_id: String,
    pub text: String,
    /// Role the question was generated for; absent for the generic set.
    pub role_node_id: Option<String>,
    pub kind: QuestionKind,
    /// Skill probed by a skill-probe question.
    #[serde(default)]
    pub skill: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAEntry {
    pub question_id: String,
    pub answer: String,
    pub answered_at: Timestamp,
    pub revision: u32,
    /// Candidate states advanced, hands-on use of the probed skill.
    #[serde(default)]
    pub attests_advanced: bool,
}

/// Append-only answer log; the highest revision per question is authoritative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QATranscript {
    pub session_id: String,
    pub questions: Vec<QAQuestion>,
    pub entries: Vec<QAEntry>,
}

/// Emitted whenever stored inputs change and downstream results must be rebuilt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recalibration {
    pub question_id: String,
    pub revision: u32,
}

impl QATranscript {
    pub fn new(session_id: impl Into<String>) -> Self {
        QATranscript {
            session_id: session_id.into(),
            ..Default::default()
        }
    }

    pub fn question(&self, question_id: &str) -> Option<&QAQuestion> {
        self.questions.iter().find(|q| q.question_id == question_id)
    }

    /// Adds questions whose ids are not already present.
    pub fn add_questions(&mut self, questions: impl IntoIterator<Item = QAQuestion>) {
        for q in questions {
            if self.question(&q.question_id).is_none() {
                self.questions.push(q);
            }
        }
    }

    pub fn record_answer(
        &mut self,
        question_id: &str,
        answer: &str,
        attests_advanced: bool,
        answered_at: Timestamp,
    ) -> Result<Recalibration, CoachError> {
        if self.question(question_id).is_none() {
            return Err(CoachError::UnknownQuestion(question_id.to_string()));
        }
        let revision = self
            .entries
            .iter()
            .filter(|e| e.question_id == question_id)
            .map(|e| e.revision + 1)
            .max()
            .unwrap_or(0);
        self.entries.push(QAEntry {
            question_id: question_id.to_string(),
            answer: answer.to_string(),
            answered_at,
            revision,
            attests_advanced,
        });
        Ok(Recalibration {
            question_id: question_id.to_string(),
            revision,
        })
    }

    /// Latest answer per question, in question order.
    pub fn latest(&self) -> Vec<(&QAQuestion, &QAEntry)> {
        self.questions
            .iter()
            .filter_map(|q| {
                self.entries
                    .iter()
                    .filter(|e| e.question_id == q.question_id)
                    .max_by_key(|e| e.revision)
                    .map(|e| (q, e))
            })
            .collect()
    }

    pub fn revisions(&self, question_id: &str) -> Vec<&QAEntry> {
        self.entries
            .iter()
            .filter(|e| e.question_id == question_id)
            .collect()
    }

    /// Latest answers in the shape the skills layer consumes.
    pub fn evidence(&self) -> Vec<QaEvidence> {
        self.latest()
            .into_iter()
            .map(|(q, e)| QaEvidence {
                answer: e.answer.clone(),
                probed_skill: match q.kind {
                    QuestionKind::SkillProbe => q.skill.clone(),
                    _ => None,
                },
                attests_advanced: e.attests_advanced,
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct GeneratedQuestions {
    questions: Vec<GeneratedQuestion>,
}

#[derive(Deserialize)]
struct GeneratedQuestion {
    question_id: String,
    text: String,
    kind: QuestionKind,
    #[serde(default)]
    skill: Option<String>,
}

pub fn questions_request(
    mapping: &RoleMapping,
    tree: &CareerTree,
    skills: &SkillsStore,
    templates: &Templates,
) -> Result<LlmRequest, CoachError> {
    let node = tree
        .node(&mapping.node_id)
        .ok_or_else(|| CoachError::InvalidInput(format!("unknown role `{}`", mapping.node_id)))?;
    let next_titles: Vec<&str> = node
        .next_positions
        .iter()
        .filter_map(|id| tree.node(id).map(|n| n.title.as_str()))
        .collect();
    let mut target_skills: Vec<&str> = node
        .next_positions
        .iter()
        .flat_map(|id| skills.for_role(id).map(|r| r.skill_name.as_str()))
        .collect();
    target_skills.dedup();
    Ok(templates.qa_questions.request(&json!({
        "role_title": node.title,
        "role_description": node.description,
        "next_titles": next_titles.join(", "),
        "target_skills": target_skills.join(", "),
    }))?)
}

/// Role-specific interview questions, or the configured generic set when
/// the candidate could not be mapped.
pub fn generate_questions(
    mapping: Option<&RoleMapping>,
    tree: &CareerTree,
    skills: &SkillsStore,
    gateway: &Gateway,
    templates: &Templates,
) -> Result<Vec<QAQuestion>, CoachError> {
    let Some(mapping) = mapping else {
        return Ok(templates
            .generic_questions
            .iter()
            .map(|seed| QAQuestion {
                question_id: seed.question_id.clone(),
                text: seed.text.clone(),
                role_node_id: None,
                kind: seed.kind,
                skill: seed.skill.clone(),
            })
            .collect());
    };
    let request = questions_request(mapping, tree, skills, templates)?;
    let (generated, _) = gateway.complete_as::<GeneratedQuestions>(request)?;
    let mut ids = HashSet::new();
    Ok(generated
        .questions
        .into_iter()
        .map(|g| {
            let mut id = g.question_id.trim().to_string();
            let mut n = 2;
            while !ids.insert(id.clone()) {
                id = format!("{}-{n}", g.question_id.trim());
                n += 1;
            }
            QAQuestion {
                question_id: id,
                text: g.text,
                role_node_id: Some(mapping.node_id.clone()),
                kind: g.kind,
                skill: g.skill.filter(|s| !s.trim().is_empty()),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Coach,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub speaker: Speaker,
    pub text: String,
    pub at: Timestamp,
}

/// Everything the coach may draw on when replying.
#[derive(Debug, Clone, Copy)]
pub struct CoachContext<'a> {
    pub resume: &'a ParsedResume,
    pub role_title: Option<&'a str>,
    pub next_titles: &'a [String],
    pub report: Option<&'a SkillAssessmentReport>,
    pub qa: &'a QATranscript,
    pub courses: &'a [ScoredCourse],
}

fn chat_context(ctx: &CoachContext<'_>) -> serde_json::Value {
    let recent = ctx.resume.latest_experience().map(|e| {
        let mut line = format!(
            "{} at {} ({} to {})",
            e.title,
            e.organization,
            e.start.as_deref().unwrap_or("?"),
            e.end.as_deref().unwrap_or("?")
        );
        for b in &e.bullets {
            line.push_str("\n- ");
            line.push_str(b);
        }
        line
    });
    let gaps: Vec<String> = ctx
        .report
        .map(|r| {
            r.gaps
                .iter()
                .map(|g| format!("{} (needs {})", g.skill_name, g.required_level))
                .collect()
        })
        .unwrap_or_default();
    let qa: Vec<String> = ctx
        .qa
        .latest()
        .into_iter()
        .map(|(q, e)| format!("Q: {}\nA: {}", q.text, e.answer))
        .collect();
    json!({
        "name": if ctx.resume.name.is_empty() { "there" } else { ctx.resume.name.as_str() },
        "role_title": ctx.role_title.unwrap_or("not yet mapped"),
        "recent_experience": recent.unwrap_or_else(|| "none listed".into()),
        "next_titles": ctx.next_titles.join(", "),
        "top_skills": ctx.report.map(|r| r.top_skills.join(", ")).unwrap_or_default(),
        "gaps": gaps.join(", "),
        "qa": qa.join("\n"),
        "courses": ctx.courses.iter().map(|c| c.course.title.as_str()).collect::<Vec<_>>().join(", "),
    })
}

/// Opening coach turn for a new conversation.
pub fn greeting(
    templates: &Templates,
    resume: &ParsedResume,
    at: Timestamp,
) -> Result<ChatTurn, CoachError> {
    let name = if resume.name.is_empty() {
        "there"
    } else {
        resume.name.as_str()
    };
    Ok(ChatTurn {
        speaker: Speaker::Coach,
        text: render(
            "chat_greeting",
            &templates.chat_greeting,
            &json!({ "name": name }),
        )?,
        at,
    })
}

/// Deterministic prompt for the next coach reply, including at most the last
/// [`CHAT_HISTORY_WINDOW`] turns.
pub fn chat_request(
    ctx: &CoachContext<'_>,
    history: &[ChatTurn],
    user_text: &str,
    templates: &Templates,
) -> Result<LlmRequest, CoachError> {
    if user_text.trim().is_empty() {
        return Err(CoachError::InvalidInput(
            "message text must not be empty".into(),
        ));
    }
    let window = &history[history.len().saturating_sub(CHAT_HISTORY_WINDOW)..];
    let rendered_history: Vec<String> = window
        .iter()
        .map(|t| {
            let who = match t.speaker {
                Speaker::Coach => "Coach",
                Speaker::Candidate => "Candidate",
            };
            format!("{who}: {}", t.text)
        })
        .collect();
    let mut context = chat_context(ctx);
    context["history"] = json!(rendered_history.join("\n"));
    context["user_text"] = json!(user_text.trim());
    Ok(templates
        .chat_reply
        .request(&context)?
        .with_temperature(CHAT_TEMPERATURE))
}

#[derive(Deserialize)]
struct Reply {
    reply: String,
}

pub fn chat_reply(
    ctx: &CoachContext<'_>,
    history: &[ChatTurn],
    user_text: &str,
    gateway: &Gateway,
    templates: &Templates,
    at: Timestamp,
) -> Result<ChatTurn, CoachError> {
    let request = chat_request(ctx, history, user_text, templates)?;
    let (reply, _) = gateway.complete_as::<Reply>(request)?;
    Ok(ChatTurn {
        speaker: Speaker::Coach,
        text: reply.reply,
        at,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TakeawaySummary {
    pub strengths: Vec<String>,
    pub gaps_highlighted: Vec<String>,
    pub improvement_areas: Vec<String>,
    pub motivational_note: String,
    pub next_steps: Vec<String>,
}

pub fn takeaways_request(
    report: &SkillAssessmentReport,
    role_title: &str,
    templates: &Templates,
) -> Result<LlmRequest, CoachError> {
    let gaps: Vec<String> = report
        .gaps
        .iter()
        .map(|g| {
            format!(
                "- {}, {}, {}, {}",
                g.skill_name,
                g.current_level
                    .map_or("none".to_string(), |l| l.to_string()),
                g.required_level,
                g.target_role_node_id
            )
        })
        .collect();
    Ok(templates.takeaways.request(&json!({
        "role_title": role_title,
        "top_skills": report.top_skills.join(", "),
        "gaps": if gaps.is_empty() { "(none)".to_string() } else { gaps.join("\n") },
    }))?)
}

/// Asks the model for a summary, then keeps only highlighted gaps that are
/// actually in `report` (spelled as the report spells them).
pub fn summarize_takeaways(
    report: &SkillAssessmentReport,
    role_title: &str,
    gateway: &Gateway,
    templates: &Templates,
) -> Result<TakeawaySummary, CoachError> {
    let request = takeaways_request(report, role_title, templates)?;
    let (mut summary, _) = gateway.complete_as::<TakeawaySummary>(request)?;
    summary.gaps_highlighted = ground_gaps(&summary.gaps_highlighted, report);
    Ok(summary)
}

fn ground_gaps(claimed: &[String], report: &SkillAssessmentReport) -> Vec<String> {
    let mut kept = Vec::new();
    for name in claimed {
        let key = normalize_key(name);
        match report
            .gaps
            .iter()
            .find(|g| normalize_key(&g.skill_name) == key)
        {
            Some(gap) if !kept.contains(&gap.skill_name) => kept.push(gap.skill_name.clone()),
            Some(_) => {}
            None => tracing::warn!(gap = %name, "dropping takeaway gap not present in the report"),
        }
    }
    kept
}
