use serde::{Deserialize, Serialize};

use super::CourseError;
use crate::career::CareerNode;
use crate::skills::{SkillAssessmentReport, SkillGap};
use crate::text::normalize_key;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationQuery {
    pub query_text: String,
    pub target_role_title: String,
    pub gap_list: Vec<SkillGap>,
    pub k: usize,
}

/// Renders the report's gaps as retrieval text:
/// `Skills and technologies required for <title>: <skill> (<level>), ...`
/// with gaps ordered by severity descending, then name.
pub fn build_query(
    report: &SkillAssessmentReport,
    target: &CareerNode,
    k: usize,
) -> Result<RecommendationQuery, CourseError> {
    if report.gaps.is_empty() {
        return Err(CourseError::NoGaps);
    }
    if k == 0 {
        return Err(CourseError::InvalidK);
    }
    let mut gaps = report.gaps.clone();
    gaps.sort_by(|a, b| {
        b.severity
            .cmp(&a.severity)
            .then_with(|| normalize_key(&a.skill_name).cmp(&normalize_key(&b.skill_name)))
            .then_with(|| a.skill_name.cmp(&b.skill_name))
    });
    let listed: Vec<String> = gaps
        .iter()
        .map(|g| format!("{} ({})", g.skill_name, g.required_level))
        .collect();
    Ok(RecommendationQuery {
        query_text: format!(
            "Skills and technologies required for {}: {}",
            target.title,
            listed.join(", ")
        ),
        target_role_title: target.title.clone(),
        gap_list: gaps,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skills::ProficiencyLevel;
    use crate::time::Timestamp;

    fn gap(name: &str, required: ProficiencyLevel, severity: u8) -> SkillGap {
        SkillGap {
            skill_name: name.into(),
            required_level: required,
            current_level: None,
            target_role_node_id: "senior-software-engineer".into(),
            severity,
        }
    }

    fn report(gaps: Vec<SkillGap>) -> SkillAssessmentReport {
        SkillAssessmentReport {
            profile_id: "p".into(),
            current_role_node_id: "software-engineer-ii".into(),
            assessed: vec![],
            top_skills: vec![],
            gaps,
            generated_at: Timestamp::from_millis(0),
        }
    }

    fn senior() -> CareerNode {
        CareerNode {
            node_id: "senior-software-engineer".into(),
            title: "Senior Software Engineer".into(),
            description: String::new(),
            next_positions: vec![],
            second_jump_positions: vec![],
            required_skill_refs: vec![],
        }
    }

    #[test]
    fn template_rendering() {
        let r = report(vec![
            gap("kubernetes", ProficiencyLevel::Intermediate, 1),
            gap("system design", ProficiencyLevel::Advanced, 2),
        ]);
        let q = build_query(&r, &senior(), DEFAULT_K).unwrap();
        assert_eq!(
            q.query_text,
            "Skills and technologies required for Senior Software Engineer: system design (advanced), kubernetes (intermediate)"
        );
        assert_eq!(q.k, 5);
    }

    #[test]
    fn equal_severity_is_alphabetical() {
        let r = report(vec![
            gap("terraform", ProficiencyLevel::Intermediate, 1),
            gap("Docker", ProficiencyLevel::Intermediate, 1),
            gap("ci/cd", ProficiencyLevel::Intermediate, 1),
        ]);
        let q = build_query(&r, &senior(), 3).unwrap();
        assert!(q
            .query_text
            .ends_with(": ci/cd (intermediate), Docker (intermediate), terraform (intermediate)"));
    }

    #[test]
    fn no_gaps() {
        assert!(matches!(
            build_query(&report(vec![]), &senior(), 5),
            Err(CourseError::NoGaps)
        ));
    }
}
