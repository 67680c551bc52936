use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::CourseError;
use crate::gateway::{Gateway, GatewayError};
use crate::par;
use crate::templates::PromptTemplate;
use crate::text::count_phrase;

/// Keywords used to select the software-engineering catalog.
pub const DEFAULT_KEYWORDS: [&str; 7] =
    ["Python", "TensorFlow", "Agile", "Git", "DevOps", "SQL", "R"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseRecord {
    pub course_id: String,
    pub title: String,
    pub description: String,
    pub url: String,
    pub skills_tags: Vec<String>,
    pub outcomes: Vec<String>,
}

impl CourseRecord {
    /// Title, description and outcomes, one per line.
    pub fn composite_text(&self) -> String {
        let mut parts = vec![self.title.as_str(), self.description.as_str()];
        parts.extend(self.outcomes.iter().map(String::as_str));
        parts.join("\n")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvIngest {
    pub records: Vec<CourseRecord>,
    /// Rows skipped because outcome generation failed.
    pub warnings: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct Outcomes {
    outcomes: Vec<String>,
}

pub fn course_id_for_url(url: &str) -> String {
    let digest = Sha256::digest(url.trim().as_bytes());
    format!(
        "c-{}",
        digest[..6]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    )
}

/// True when any keyword appears as a whole word (case-insensitive) in the
/// skills column.
pub fn keyword_match(skills: &str, keywords: &[String]) -> bool {
    keywords.iter().any(|k| count_phrase(skills, k) > 0)
}

fn split_tags(skills: &str) -> Vec<String> {
    skills
        .split([';', ',', '|'])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

struct Row {
    course_id: Option<String>,
    title: String,
    description: String,
    url: String,
    skills: String,
}

fn read_rows(input: impl Read) -> Result<Vec<Row>, CourseError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CourseError::MalformedCsv(e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut missing = Vec::new();
    let mut required = |name: &'static str| {
        column(name).unwrap_or_else(|| {
            missing.push(name);
            0
        })
    };
    let (title, description, url, skills) = (
        required("title"),
        required("description"),
        required("url"),
        required("skills"),
    );
    if !missing.is_empty() {
        return Err(CourseError::MalformedCsv(format!(
            "missing column(s): {}",
            missing.join(", ")
        )));
    }
    let id = column("course_id");

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CourseError::MalformedCsv(e.to_string()))?;
        let get = |i: usize| record.get(i).unwrap_or_default().to_string();
        rows.push(Row {
            course_id: id.map(get).filter(|s| !s.is_empty()),
            title: get(title),
            description: get(description),
            url: get(url),
            skills: get(skills),
        });
    }
    Ok(rows)
}

/// Reads a course CSV (`title, description, url, skills`, optional
/// `course_id`), keeps rows whose skills match a keyword, collapses repeated
/// URLs to their first row, and generates 3–6 outcomes per course.
pub fn ingest_csv(
    input: impl Read,
    keyword_filter: &[String],
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<CsvIngest, CourseError> {
    let mut seen_urls = HashSet::new();
    let mut kept = Vec::new();
    for row in read_rows(input)? {
        if row.title.is_empty() || row.url.is_empty() {
            continue;
        }
        if !keyword_match(&row.skills, keyword_filter) {
            continue;
        }
        if !seen_urls.insert(row.url.clone()) {
            continue;
        }
        kept.push(row);
    }

    let requests = kept
        .iter()
        .map(|row| {
            template.request(&json!({
                "title": row.title,
                "description": row.description,
                "skills": row.skills,
            }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let generated: Vec<Result<Vec<String>, GatewayError>> = par::map(&requests, |req| {
        gateway
            .complete_as::<Outcomes>(req.clone())
            .map(|(o, _)| o.outcomes)
    });

    let mut out = CsvIngest::default();
    for (row, outcomes) in kept.into_iter().zip(generated) {
        match outcomes {
            Ok(outcomes) => out.records.push(CourseRecord {
                course_id: row.course_id.unwrap_or_else(|| course_id_for_url(&row.url)),
                skills_tags: split_tags(&row.skills),
                title: row.title,
                description: row.description,
                url: row.url,
                outcomes,
            }),
            Err(e) if e.is_retriable() => return Err(CourseError::Gateway(e)),
            Err(e) => {
                tracing::warn!(url = %row.url, error = %e, "skipping course");
                out.warnings.push(format!("{}: {e}", row.url));
            }
        }
    }
    Ok(out)
}
