//! Versioned prompt templates and their output schemas.
//!
//! Each template is a TOML file with `name`, `version`, `schema` (a path to a
//! JSON schema, relative to the template directory), and `system` / `user`
//! prompt bodies rendered with minijinja. The files under `templates/` in this
//! crate are compiled in as the defaults; a deployment can point at its own
//! directory with the same layout.

use std::path::Path;

use minijinja::Environment;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::coach::QuestionKind;
use crate::gateway::LlmRequest;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read template `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("template `{name}` is malformed: {message}")]
    Malformed { name: String, message: String },
    #[error("template `{name}` failed to render: {message}")]
    Render { name: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedQuestion {
    pub question_id: String,
    pub kind: QuestionKind,
    pub text: String,
    #[serde(default)]
    pub skill: Option<String>,
}

#[derive(Debug, Deserialize)]
struct TemplateFile {
    name: String,
    version: String,
    schema: String,
    system: String,
    user: String,
    #[serde(default)]
    greeting: Option<String>,
    #[serde(default)]
    generic: Vec<SeedQuestion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: String,
    pub version: String,
    pub system: String,
    pub user: String,
    pub output_schema: Value,
}

impl PromptTemplate {
    /// Renders both prompt bodies into a pipeline-temperature request.
    pub fn request(&self, context: &Value) -> Result<LlmRequest, TemplateError> {
        let system = render(&self.name, &self.system, context)?;
        let user = render(&self.name, &self.user, context)?;
        Ok(LlmRequest::new(system, user, self.output_schema.clone()))
    }

    pub fn render_system(&self, context: &Value) -> Result<String, TemplateError> {
        render(&self.name, &self.system, context)
    }

    pub fn render_user(&self, context: &Value) -> Result<String, TemplateError> {
        render(&self.name, &self.user, context)
    }
}

pub fn render(name: &str, source: &str, context: &Value) -> Result<String, TemplateError> {
    Environment::new()
        .render_str(source, context)
        .map(|s| s.trim().to_string())
        .map_err(|e| TemplateError::Render {
            name: name.to_string(),
            message: e.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    pub resume_extraction: PromptTemplate,
    pub course_outcomes: PromptTemplate,
    pub qa_questions: PromptTemplate,
    pub generic_questions: Vec<SeedQuestion>,
    pub chat_reply: PromptTemplate,
    pub chat_greeting: String,
    pub takeaways: PromptTemplate,
}

const NAMES: [&str; 5] = [
    "resume_extraction",
    "course_outcomes",
    "qa_questions",
    "chat_reply",
    "takeaways",
];

macro_rules! builtin {
    ($name:literal) => {
        include_str!(concat!("../templates/", $name))
    };
}

fn builtin_file(path: &str) -> Option<&'static str> {
    Some(match path {
        "resume_extraction.toml" => builtin!("resume_extraction.toml"),
        "course_outcomes.toml" => builtin!("course_outcomes.toml"),
        "qa_questions.toml" => builtin!("qa_questions.toml"),
        "chat_reply.toml" => builtin!("chat_reply.toml"),
        "takeaways.toml" => builtin!("takeaways.toml"),
        "schemas/parsed_resume.schema.json" => builtin!("schemas/parsed_resume.schema.json"),
        "schemas/course_outcomes.schema.json" => builtin!("schemas/course_outcomes.schema.json"),
        "schemas/qa_questions.schema.json" => builtin!("schemas/qa_questions.schema.json"),
        "schemas/chat_reply.schema.json" => builtin!("schemas/chat_reply.schema.json"),
        "schemas/takeaways.schema.json" => builtin!("schemas/takeaways.schema.json"),
        _ => return None,
    })
}

impl Templates {
    /// The templates shipped with this crate.
    pub fn builtin() -> Self {
        Self::load_with(|path| {
            builtin_file(path)
                .map(str::to_string)
                .ok_or_else(|| TemplateError::Io {
                    path: path.to_string(),
                    message: "not a built-in template".into(),
                })
        })
        .expect("built-in templates are valid")
    }

    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        Self::load_with(|path| {
            let full = dir.join(path);
            std::fs::read_to_string(&full).map_err(|e| TemplateError::Io {
                path: full.display().to_string(),
                message: e.to_string(),
            })
        })
    }

    fn load_with(
        read: impl Fn(&str) -> Result<String, TemplateError>,
    ) -> Result<Self, TemplateError> {
        let mut files = Vec::new();
        for name in NAMES {
            let text = read(&format!("{name}.toml"))?;
            let file: TemplateFile =
                toml::from_str(&text).map_err(|e| TemplateError::Malformed {
                    name: name.to_string(),
                    message: e.to_string(),
                })?;
            let schema_text = read(&file.schema)?;
            let output_schema: Value =
                serde_json::from_str(&schema_text).map_err(|e| TemplateError::Malformed {
                    name: name.to_string(),
                    message: format!("schema: {e}"),
                })?;
            files.push((file, output_schema));
        }
        let mut it = files.into_iter().map(|(file, output_schema)| {
            let template = PromptTemplate {
                name: file.name.clone(),
                version: file.version.clone(),
                system: file.system.clone(),
                user: file.user.clone(),
                output_schema,
            };
            (template, file)
        });
        let (resume_extraction, _) = it.next().expect("five templates");
        let (course_outcomes, _) = it.next().expect("five templates");
        let (qa_questions, qa_file) = it.next().expect("five templates");
        let (chat_reply, chat_file) = it.next().expect("five templates");
        let (takeaways, _) = it.next().expect("five templates");

        if qa_file.generic.is_empty() {
            return Err(TemplateError::Malformed {
                name: "qa_questions".into(),
                message: "at least one [[generic]] question is required".into(),
            });
        }
        let chat_greeting = chat_file.greeting.ok_or_else(|| TemplateError::Malformed {
            name: "chat_reply".into(),
            message: "missing `greeting`".into(),
        })?;
        Ok(Templates {
            resume_extraction,
            course_outcomes,
            qa_questions,
            generic_questions: qa_file.generic,
            chat_reply,
            chat_greeting,
            takeaways,
        })
    }
}
