//! Resume ingestion: document text extraction, token-budgeted chunking,
//! per-chunk schema-constrained extraction, and merging of the partials.

mod chunk;
pub mod dates;
mod merge;

use std::panic::{self, AssertUnwindSafe};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError};
use crate::par;
use crate::templates::{PromptTemplate, TemplateError};
use crate::time::Timestamp;

pub use chunk::{chunk_text, reassemble, TextChunk, DEFAULT_CHUNK_BUDGET, DEFAULT_CHUNK_OVERLAP};
pub use merge::merge_partials;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("document is empty or has no extractable text")]
    EmptyDocument,
    #[error("document cannot be read: {0}")]
    UnreadableDocument(String),
    #[error("extraction failed on chunk {chunk}: {source}")]
    Extraction {
        chunk: usize,
        #[source]
        source: GatewayError,
    },
    #[error("no chunks to extract")]
    NoChunks,
    #[error("partials disagree on the candidate name: `{first}` vs `{second}`")]
    ConflictingIdentity { first: String, second: String },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Pdf,
    PlainText,
}

impl MediaKind {
    /// PDF when the bytes carry the `%PDF` magic or the filename ends in
    /// `.pdf`, plain text otherwise.
    pub fn detect(filename: &str, bytes: &[u8]) -> Self {
        if bytes.starts_with(b"%PDF") || filename.to_lowercase().ends_with(".pdf") {
            MediaKind::Pdf
        } else {
            MediaKind::PlainText
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResumeDocument {
    pub document_id: String,
    pub filename: String,
    pub media_kind: MediaKind,
    pub extracted_text: String,
    pub uploaded_at: Timestamp,
}

/// Extracts the text of an uploaded resume.
pub fn extract_text(
    filename: &str,
    bytes: &[u8],
    media_kind: MediaKind,
    uploaded_at: Timestamp,
) -> Result<ResumeDocument, IngestError> {
    if bytes.is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    let extracted_text = match media_kind {
        MediaKind::PlainText => String::from_utf8(bytes.to_vec())
            .map_err(|e| IngestError::UnreadableDocument(format!("not UTF-8 text: {e}")))?,
        MediaKind::Pdf => pdf_text(bytes)?,
    };
    if extracted_text.trim().is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    let digest = Sha256::digest(bytes);
    let document_id = format!(
        "doc-{}",
        digest[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    );
    Ok(ResumeDocument {
        document_id,
        filename: filename.to_string(),
        media_kind,
        extracted_text,
        uploaded_at,
    })
}

fn pdf_text(bytes: &[u8]) -> Result<String, IngestError> {
    // pdf-extract panics on some malformed inputs.
    let result = panic::catch_unwind(AssertUnwindSafe(|| {
        pdf_extract::extract_text_from_mem(bytes)
    }));
    match result {
        Ok(Ok(text)) => Ok(text),
        Ok(Err(e)) => Err(IngestError::UnreadableDocument(e.to_string())),
        Err(_) => Err(IngestError::UnreadableDocument("malformed PDF".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContactKind {
    Email,
    Phone,
    Url,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    pub kind: ContactKind,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Education {
    pub institution: String,
    pub credential: String,
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub end: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Experience {
    pub title: String,
    pub organization: String,
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub end: Option<String>,
    #[serde(default)]
    pub bullets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TechnicalSkill {
    pub name: String,
    #[serde(default)]
    pub context_snippets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftSkill {
    pub name: String,
    pub justification: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

/// Structured resume, as extracted from one chunk or merged across chunks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedResume {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub contacts: Vec<Contact>,
    #[serde(default)]
    pub education: Vec<Education>,
    #[serde(default)]
    pub experience: Vec<Experience>,
    #[serde(default)]
    pub technical_skills: Vec<TechnicalSkill>,
    #[serde(default)]
    pub soft_skills: Vec<SoftSkill>,
    #[serde(default)]
    pub certifications: Vec<String>,
    #[serde(default)]
    pub projects: Vec<Project>,
}

impl ParsedResume {
    /// The most recent experience entry (the list is kept newest first).
    pub fn latest_experience(&self) -> Option<&Experience> {
        self.experience.first()
    }
}

/// Runs the extraction template over every chunk. Chunks are independent and
/// may be processed in parallel; the first failing chunk (by index) is reported.
pub fn extract_structured(
    chunks: &[TextChunk],
    gateway: &Gateway,
    template: &PromptTemplate,
) -> Result<Vec<ParsedResume>, IngestError> {
    if chunks.is_empty() {
        return Err(IngestError::NoChunks);
    }
    let requests = chunks
        .iter()
        .map(|c| extraction_request(template, c, chunks.len()))
        .collect::<Result<Vec<_>, _>>()?;
    par::map_indexed(&requests, |index, request| {
        gateway
            .complete_as::<ParsedResume>(request.clone())
            .map(|(parsed, _)| parsed)
            .map_err(|source| IngestError::Extraction {
                chunk: index,
                source,
            })
    })
    .into_iter()
    .collect()
}

pub fn extraction_request(
    template: &PromptTemplate,
    chunk: &TextChunk,
    chunk_count: usize,
) -> Result<crate::gateway::LlmRequest, TemplateError> {
    template.request(&json!({
        "chunk_index": chunk.index,
        "chunk_count": chunk_count,
        "chunk_text": chunk.text,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::TokenCount;
    use crate::gateway::{StubProvider, StubScript};
    use crate::templates::Templates;
    use std::sync::Arc;

    #[test]
    fn plain_text_passes_through() {
        let doc = extract_text(
            "cv.txt",
            b"Jane Doe\nEngineer",
            MediaKind::PlainText,
            Timestamp::from_millis(0),
        )
        .unwrap();
        assert_eq!(doc.extracted_text, "Jane Doe\nEngineer");
        assert!(doc.document_id.starts_with("doc-"));
    }

    #[test]
    fn empty_inputs() {
        let at = Timestamp::from_millis(0);
        assert!(matches!(
            extract_text("a", b"", MediaKind::PlainText, at),
            Err(IngestError::EmptyDocument)
        ));
        assert!(matches!(
            extract_text("a", b"  \n", MediaKind::PlainText, at),
            Err(IngestError::EmptyDocument)
        ));
        assert!(matches!(
            extract_text("a", b"", MediaKind::Pdf, at),
            Err(IngestError::EmptyDocument)
        ));
    }

    #[test]
    fn corrupt_pdf_is_unreadable() {
        let at = Timestamp::from_millis(0);
        let err = extract_text(
            "a.pdf",
            b"%PDF-1.4\nthis is not really a pdf",
            MediaKind::Pdf,
            at,
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::UnreadableDocument(_)));
        let err = extract_text("a.txt", &[0xff, 0xfe, 0x00], MediaKind::PlainText, at).unwrap_err();
        assert!(matches!(err, IngestError::UnreadableDocument(_)));
    }

    #[test]
    fn media_detection() {
        assert_eq!(MediaKind::detect("x.bin", b"%PDF-1.7"), MediaKind::Pdf);
        assert_eq!(MediaKind::detect("CV.PDF", b""), MediaKind::Pdf);
        assert_eq!(MediaKind::detect("cv.txt", b"hello"), MediaKind::PlainText);
    }

    fn partial(name: &str, skill: &str) -> ParsedResume {
        ParsedResume {
            name: name.into(),
            technical_skills: vec![TechnicalSkill {
                name: skill.into(),
                context_snippets: vec![],
            }],
            ..Default::default()
        }
    }

    #[test]
    fn chunk_failure_names_the_chunk() {
        let templates = Templates::builtin();
        let text = format!(
            "{}\n\n{}\n\n{}",
            "a".repeat(90),
            "b".repeat(90),
            "c".repeat(90)
        );
        let chunks = chunk_text(&text, TokenCount(25), TokenCount(0));
        assert_eq!(chunks.len(), 3);
        let mut script = StubScript::default();
        for (i, c) in chunks.iter().enumerate() {
            let fp = extraction_request(&templates.resume_extraction, c, 3)
                .unwrap()
                .fingerprint();
            let response = if i == 2 {
                vec!["no".to_string()]
            } else {
                vec![serde_json::to_string(&partial("", "Rust")).unwrap()]
            };
            script.insert(&fp, response);
        }
        let gateway = Gateway::new();
        gateway
            .register_provider("stub", Arc::new(StubProvider::new(script)))
            .unwrap();
        let err = extract_structured(&chunks, &gateway, &templates.resume_extraction).unwrap_err();
        assert!(
            matches!(err, IngestError::Extraction { chunk: 2, .. }),
            "{err}"
        );
        assert!(matches!(
            extract_structured(&[], &gateway, &templates.resume_extraction),
            Err(IngestError::NoChunks)
        ));
    }
}
