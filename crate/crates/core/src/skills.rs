//! Four-level skill rating from resume and Q&A evidence, and gap analysis
//! against per-role benchmarks.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::career::{CareerNode, CareerTree};
use crate::ingest::dates::months_between;
use crate::ingest::ParsedResume;
use crate::text::{count_phrase, normalize_key};
use crate::time::Timestamp;

pub const TOP_SKILLS: usize = 10;
const MAX_SNIPPETS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProficiencyLevel {
    Beginner = 1,
    Intermediate = 2,
    Advanced = 3,
    Expert = 4,
}

impl ProficiencyLevel {
    pub const ALL: [ProficiencyLevel; 4] = [
        ProficiencyLevel::Beginner,
        ProficiencyLevel::Intermediate,
        ProficiencyLevel::Advanced,
        ProficiencyLevel::Expert,
    ];

    pub fn value(self) -> u8 {
        self as u8
    }

    fn from_value(v: u8) -> Self {
        Self::ALL[(v.clamp(1, 4) - 1) as usize]
    }

    pub fn promoted(self) -> Self {
        Self::from_value(self.value() + 1)
    }

    pub fn demoted(self) -> Self {
        Self::from_value(self.value().saturating_sub(1))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProficiencyLevel::Beginner => "beginner",
            ProficiencyLevel::Intermediate => "intermediate",
            ProficiencyLevel::Advanced => "advanced",
            ProficiencyLevel::Expert => "expert",
        }
    }
}

impl fmt::Display for ProficiencyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillCategory {
    Technical,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillRequirement {
    pub requirement_id: String,
    pub role_node_id: String,
    pub skill_name: String,
    pub category: SkillCategory,
    #[serde(default)]
    pub description: String,
    pub minimum_level: ProficiencyLevel,
}

/// Month thresholds at which the base level becomes intermediate, advanced
/// and expert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub month_thresholds: [u32; 3],
}

impl Default for Rubric {
    fn default() -> Self {
        Rubric {
            month_thresholds: [12, 36, 72],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceSource {
    Resume,
    Qa,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillEvidence {
    pub skill_name: String,
    pub months_experience: u32,
    pub mention_count: u32,
    pub sources: BTreeSet<EvidenceSource>,
    pub snippets: Vec<String>,
    /// A Q&A skill probe for this skill was answered with self-attested
    /// advanced usage.
    #[serde(default)]
    pub self_attested_advanced: bool,
}

/// Base level from months, then −1 for a single resume-only mention and +1
/// for self-attested advanced usage from Q&A.
pub fn rate_skill(evidence: &SkillEvidence, rubric: &Rubric) -> ProficiencyLevel {
    let [to_intermediate, to_advanced, to_expert] = rubric.month_thresholds;
    let months = evidence.months_experience;
    let mut level = if months >= to_expert {
        ProficiencyLevel::Expert
    } else if months >= to_advanced {
        ProficiencyLevel::Advanced
    } else if months >= to_intermediate {
        ProficiencyLevel::Intermediate
    } else {
        ProficiencyLevel::Beginner
    };
    let resume_only =
        evidence.sources.len() == 1 && evidence.sources.contains(&EvidenceSource::Resume);
    if evidence.mention_count == 1 && resume_only {
        level = level.demoted();
    }
    if evidence.self_attested_advanced && evidence.sources.contains(&EvidenceSource::Qa) {
        level = level.promoted();
    }
    level
}

#[derive(Debug, Error)]
pub enum SkillsError {
    #[error("skills configuration is not valid JSON: {0}")]
    Parse(String),
    #[error("invalid skills configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("no skill requirements defined for role `{0}`")]
    MissingBenchmarks(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SkillsDocument {
    version: String,
    #[serde(default)]
    rubric: Rubric,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
    requirements: Vec<SkillRequirement>,
}

/// Loaded `skills.json`: per-role requirements, alias table and rubric.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillsStore {
    version: String,
    rubric: Rubric,
    aliases: HashMap<String, String>,
    requirements: Vec<SkillRequirement>,
}

impl SkillsStore {
    /// Parses and validates; when `tree` is given, every role id must be a
    /// tree node and every node's `required_skill_refs` must resolve.
    pub fn from_json(text: &str, tree: Option<&CareerTree>) -> Result<Self, SkillsError> {
        let doc: SkillsDocument =
            serde_json::from_str(text).map_err(|e| SkillsError::Parse(e.to_string()))?;
        let mut problems = Vec::new();
        let mut ids = HashSet::new();
        let mut pairs = HashSet::new();
        let aliases: HashMap<String, String> = doc
            .aliases
            .iter()
            .map(|(k, v)| (normalize_key(k), normalize_key(v)))
            .collect();
        let canonical = |name: &str| {
            let key = normalize_key(name);
            aliases.get(&key).cloned().unwrap_or(key)
        };
        for req in &doc.requirements {
            if !ids.insert(req.requirement_id.as_str()) {
                problems.push(format!("duplicate requirement_id `{}`", req.requirement_id));
            }
            if !pairs.insert((req.role_node_id.clone(), canonical(&req.skill_name))) {
                problems.push(format!(
                    "role `{}` lists skill `{}` twice",
                    req.role_node_id, req.skill_name
                ));
            }
            if let Some(tree) = tree {
                if !tree.contains(&req.role_node_id) {
                    problems.push(format!(
                        "requirement `{}` names unknown role `{}`",
                        req.requirement_id, req.role_node_id
                    ));
                }
            }
        }
        if let Some(tree) = tree {
            for node in tree.nodes() {
                for r in &node.required_skill_refs {
                    if !ids.contains(r.as_str()) {
                        problems.push(format!(
                            "node `{}` references unknown requirement `{r}`",
                            node.node_id
                        ));
                    }
                }
            }
        }
        let [a, b, c] = doc.rubric.month_thresholds;
        if !(a <= b && b <= c) {
            problems.push("rubric month_thresholds must be non-decreasing".into());
        }
        if !problems.is_empty() {
            return Err(SkillsError::Invalid(problems));
        }
        Ok(SkillsStore {
            version: doc.version,
            rubric: doc.rubric,
            aliases,
            requirements: doc.requirements,
        })
    }

    pub fn load(path: &std::path::Path, tree: Option<&CareerTree>) -> Result<Self, SkillsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SkillsError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, tree)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn rubric(&self) -> &Rubric {
        &self.rubric
    }

    pub fn requirements(&self) -> &[SkillRequirement] {
        &self.requirements
    }

    pub fn for_role<'a>(
        &'a self,
        role_node_id: &'a str,
    ) -> impl Iterator<Item = &'a SkillRequirement> + 'a {
        self.requirements
            .iter()
            .filter(move |r| r.role_node_id == role_node_id)
    }

    /// Normalized name with aliases resolved.
    pub fn canonical(&self, name: &str) -> String {
        let key = normalize_key(name);
        self.aliases.get(&key).cloned().unwrap_or(key)
    }

    fn alias_forms(&self, canonical: &str) -> Vec<String> {
        let mut forms: Vec<String> = self
            .aliases
            .iter()
            .filter(|(_, target)| target.as_str() == canonical)
            .map(|(alias, _)| alias.clone())
            .collect();
        forms.sort();
        forms
    }
}

/// One Q&A answer as seen by the skills layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaEvidence {
    pub answer: String,
    /// Skill the question probed, for skill-probe questions.
    pub probed_skill: Option<String>,
    pub attests_advanced: bool,
}

#[derive(Default)]
struct Accumulator {
    display: String,
    soft: bool,
    months: u32,
    mentions: u32,
    sources: BTreeSet<EvidenceSource>,
    snippets: Vec<String>,
    attested: bool,
}

impl Accumulator {
    fn add_snippet(&mut self, text: &str) {
        if self.snippets.len() < MAX_SNIPPETS && !self.snippets.iter().any(|s| s == text) {
            self.snippets.push(text.to_string());
        }
    }
}

/// Builds one evidence record per distinct canonical skill mentioned in the
/// resume or Q&A. The vocabulary is the resume's own skill lists plus every
/// benchmark skill (and its aliases). Ongoing roles end at `as_of`.
pub fn collect_evidence(
    resume: &ParsedResume,
    qa: &[QaEvidence],
    store: &SkillsStore,
    as_of: (i32, u32),
) -> Vec<SkillEvidence> {
    let mut acc: BTreeMap<String, Accumulator> = BTreeMap::new();
    let mut entry = |name: &str, soft: bool| -> String {
        let key = store.canonical(name);
        let a = acc.entry(key.clone()).or_default();
        if a.display.is_empty() {
            a.display = name.trim().to_string();
        }
        a.soft |= soft;
        key
    };

    // benchmark names take display precedence
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    for req in store.requirements() {
        vocab.insert(entry(&req.skill_name, req.category == SkillCategory::Soft));
    }
    let mut listed: Vec<(String, String)> = Vec::new();
    for s in &resume.technical_skills {
        let key = entry(&s.name, false);
        for snippet in &s.context_snippets {
            listed.push((key.clone(), snippet.clone()));
        }
        listed.push((key.clone(), String::new()));
        vocab.insert(key);
    }
    for s in &resume.soft_skills {
        let key = entry(&s.name, true);
        listed.push((key.clone(), s.justification.clone()));
        vocab.insert(key);
    }

    for (key, snippet) in &listed {
        let a = acc.get_mut(key).expect("listed skills are registered");
        if snippet.is_empty() {
            a.mentions += 1;
            a.sources.insert(EvidenceSource::Resume);
        } else {
            a.add_snippet(snippet);
        }
    }

    for key in &vocab {
        let mut forms: Vec<String> = vec![key.clone()];
        forms.extend(store.alias_forms(key));
        let a = acc.get_mut(key).expect("vocabulary is registered");
        if !a.display.is_empty() {
            let display_key = normalize_key(&a.display);
            if !forms.contains(&display_key) {
                forms.push(display_key);
            }
        }
        let count =
            |text: &str| -> u32 { forms.iter().map(|f| count_phrase(text, f) as u32).sum() };

        for job in &resume.experience {
            let mut here = count(&job.title);
            let mut lines = Vec::new();
            for bullet in &job.bullets {
                let n = count(bullet);
                if n > 0 {
                    here += n;
                    lines.push(bullet.as_str());
                }
            }
            if here > 0 {
                a.mentions += here;
                a.sources.insert(EvidenceSource::Resume);
                if !a.soft {
                    a.months += months_between(job.start.as_deref(), job.end.as_deref(), as_of);
                }
                for line in lines {
                    a.add_snippet(line);
                }
            }
        }
        for project in &resume.projects {
            let n = count(&project.name) + count(&project.description);
            if n > 0 {
                a.mentions += n;
                a.sources.insert(EvidenceSource::Resume);
                a.add_snippet(&project.description);
            }
        }
        for cert in &resume.certifications {
            let n = count(cert);
            if n > 0 {
                a.mentions += n;
                a.sources.insert(EvidenceSource::Resume);
                a.add_snippet(cert);
            }
        }
        for answer in qa {
            let probed = answer
                .probed_skill
                .as_deref()
                .is_some_and(|s| store.canonical(s) == *key);
            let n = count(&answer.answer) + u32::from(probed);
            if n > 0 {
                a.mentions += n;
                a.sources.insert(EvidenceSource::Qa);
                a.add_snippet(&answer.answer);
            }
            if probed && answer.attests_advanced {
                a.attested = true;
            }
        }
    }

    acc.into_values()
        .filter(|a| a.mentions > 0)
        .map(|a| SkillEvidence {
            skill_name: a.display,
            months_experience: a.months,
            mention_count: a.mentions,
            sources: a.sources,
            snippets: a.snippets,
            self_attested_advanced: a.attested,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessedSkill {
    pub skill_name: String,
    pub level: ProficiencyLevel,
    pub evidence: SkillEvidence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillGap {
    pub skill_name: String,
    pub required_level: ProficiencyLevel,
    pub current_level: Option<ProficiencyLevel>,
    pub target_role_node_id: String,
    pub severity: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillAssessmentReport {
    pub profile_id: String,
    pub current_role_node_id: String,
    pub assessed: Vec<AssessedSkill>,
    pub top_skills: Vec<String>,
    pub gaps: Vec<SkillGap>,
    pub generated_at: Timestamp,
}

/// Rates every evidenced skill and flags gaps against the requirements of
/// `targets` (the current role's next positions). A leaf role is compared
/// against its own requirements instead.
pub fn assess(
    profile_id: &str,
    evidence: &[SkillEvidence],
    current: &CareerNode,
    targets: &[CareerNode],
    store: &SkillsStore,
    generated_at: Timestamp,
) -> Result<SkillAssessmentReport, SkillsError> {
    let rubric = store.rubric();
    let mut assessed: Vec<AssessedSkill> = evidence
        .iter()
        .map(|e| AssessedSkill {
            skill_name: e.skill_name.clone(),
            level: rate_skill(e, rubric),
            evidence: e.clone(),
        })
        .collect();
    assessed.sort_by(|a, b| {
        normalize_key(&a.skill_name)
            .cmp(&normalize_key(&b.skill_name))
            .then_with(|| a.skill_name.cmp(&b.skill_name))
    });

    let mut ranked: Vec<&AssessedSkill> = assessed.iter().collect();
    ranked.sort_by(|a, b| {
        b.level
            .cmp(&a.level)
            .then_with(|| {
                b.evidence
                    .months_experience
                    .cmp(&a.evidence.months_experience)
            })
            .then_with(|| a.skill_name.cmp(&b.skill_name))
    });
    let top_skills = ranked
        .iter()
        .take(TOP_SKILLS)
        .map(|s| s.skill_name.clone())
        .collect();

    let levels: HashMap<String, ProficiencyLevel> = assessed
        .iter()
        .map(|s| (store.canonical(&s.skill_name), s.level))
        .collect();

    let benchmark_roles: Vec<&CareerNode> = if targets.is_empty() {
        vec![current]
    } else {
        targets.iter().collect()
    };
    // canonical skill -> strongest requirement across target roles
    let mut required: BTreeMap<String, &SkillRequirement> = BTreeMap::new();
    for role in benchmark_roles {
        let mut any = false;
        for req in store.for_role(&role.node_id) {
            any = true;
            let key = store.canonical(&req.skill_name);
            match required.get(&key) {
                Some(existing) if existing.minimum_level >= req.minimum_level => {}
                _ => {
                    required.insert(key, req);
                }
            }
        }
        if !any {
            return Err(SkillsError::MissingBenchmarks(role.node_id.clone()));
        }
    }

    let mut gaps: Vec<SkillGap> = required
        .iter()
        .filter_map(|(key, req)| {
            let current_level = levels.get(key).copied();
            let have = current_level.map_or(0, ProficiencyLevel::value);
            let need = req.minimum_level.value();
            (need > have).then(|| SkillGap {
                skill_name: req.skill_name.clone(),
                required_level: req.minimum_level,
                current_level,
                target_role_node_id: req.role_node_id.clone(),
                severity: need - have,
            })
        })
        .collect();
    gaps.sort_by(|a, b| {
        b.severity
            .cmp(&a.severity)
            .then_with(|| normalize_key(&a.skill_name).cmp(&normalize_key(&b.skill_name)))
    });

    Ok(SkillAssessmentReport {
        profile_id: profile_id.to_string(),
        current_role_node_id: current.node_id.clone(),
        assessed,
        top_skills,
        gaps,
        generated_at,
    })
}
