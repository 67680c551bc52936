//! Regenerates `fixtures/stubs/*.json` and `fixtures/golden/*.json`.
//!
//! Replays the fixture scenarios against a provider that answers from the
//! hand-written files in `fixtures/responses/` and records the fingerprint of
//! every request it sees.
//!
//! ```text
//! cargo run -p coach-server --example record_stubs
//! ```

#[path = "../tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use anyhow::{bail, Result};
use serde_json::Value;

use coach_core::courses::{ingest_csv, DEFAULT_KEYWORDS};
use coach_core::gateway::{Gateway, ModelProvider, ProviderCall, ProviderError, Role, StubScript};
use coach_core::pipeline::{CoachService, FALLBACK_ROLE_QUESTION};
use coach_core::store::ProfileStore;
use coach_core::templates::Templates;
use coach_core::time::{SteppingClock, Timestamp};
use coach_server::AppConfig;

struct Recorder {
    templates: Templates,
    recorded: Mutex<StubScript>,
}

fn response(name: &str) -> Value {
    support::json_fixture(&format!("responses/{name}"))
}

impl Recorder {
    fn answer(&self, call: &ProviderCall<'_>) -> Result<(String, Value)> {
        let schema = &call.request.output_schema;
        let user = &call
            .request
            .messages
            .iter()
            .find(|m| m.role == Role::User)
            .expect("user message")
            .text;
        let t = &self.templates;
        if schema == &t.resume_extraction.output_schema {
            let (label, file) = if user.contains("Pastry") {
                ("extraction: pastry_chef", "pastry_chef_extraction.json")
            } else if user.contains("distributed tracing") {
                ("extraction: jane_doe_2025", "resume_extraction_2025.json")
            } else {
                ("extraction: jane_doe", "resume_extraction.json")
            };
            return Ok((label.into(), response(file)));
        }
        if schema == &t.qa_questions.output_schema {
            return Ok((
                "qa questions: software-engineer-ii".into(),
                response("qa_questions.json"),
            ));
        }
        if schema == &t.chat_reply.output_schema {
            return Ok(("chat reply".into(), response("chat_reply.json")));
        }
        if schema == &t.takeaways.output_schema {
            return Ok((
                "takeaways: adversarial gap names".into(),
                response("takeaways.json"),
            ));
        }
        if schema == &t.course_outcomes.output_schema {
            let outcomes = response("course_outcomes.json");
            for (title, list) in outcomes.as_object().expect("title map") {
                if user.contains(title.as_str()) {
                    return Ok((
                        format!("outcomes: {title}"),
                        serde_json::json!({ "outcomes": list }),
                    ));
                }
            }
        }
        bail!("no scripted response for request:\n{user}")
    }
}

impl ModelProvider for Recorder {
    fn complete(&self, call: &ProviderCall<'_>) -> Result<String, ProviderError> {
        let (label, value) = self
            .answer(call)
            .map_err(|e| ProviderError(e.to_string()))?;
        self.recorded.lock().unwrap().insert_values(
            call.fingerprint,
            Some(label),
            vec![value.clone()],
        );
        Ok(value.to_string())
    }
}

fn recording_service(config: &AppConfig, recorder: Arc<Recorder>) -> Result<CoachService> {
    let gateway = Gateway::new();
    gateway.register_provider("recorder", recorder)?;
    let clock = Arc::new(SteppingClock::starting_at(Timestamp::from_millis(
        1_735_689_600_000,
    )));
    Ok(CoachService::new(
        config.pipeline_with(gateway)?,
        ProfileStore::in_memory(clock),
    ))
}

fn write_json(path: &str, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(support::fixture(path), text)?;
    println!("wrote fixtures/{path}");
    Ok(())
}

fn main() -> Result<()> {
    let config = AppConfig::load(&support::fixture("coach.toml"))?;
    let templates = config.templates()?;
    let recorder = Arc::new(Recorder {
        templates: templates.clone(),
        recorded: Mutex::default(),
    });
    let service = recording_service(&config, recorder.clone())?;
    let upload = |file: &str| -> Result<_> {
        let id = service.create_profile("Jane")?.profile_id;
        let result =
            service.upload_resume(&id, file, &support::read_fixture(&format!("resume/{file}")));
        Ok((id, result))
    };

    let (jane, golden) = upload("jane_doe.txt")?;
    let golden = golden?;
    service.qa(&jane)?;
    service.takeaways(&jane)?;
    service.chat(&jane, support::CHAT_MESSAGE)?;
    upload("jane_doe.pdf")?.1?;
    upload("jane_doe_2025.txt")?.1?;
    let (chef_id, chef) = upload("pastry_chef.txt")?;
    if let Ok(bundle) = chef {
        bail!(
            "the pastry chef resume unexpectedly mapped: {:?}",
            bundle.mapping
        );
    }
    let fallback = service.answer(
        &chef_id,
        FALLBACK_ROLE_QUESTION,
        support::FALLBACK_ANSWER,
        false,
    )?;
    let mapped = fallback.bundle.map(|b| b.mapping.node_id);
    if mapped.as_deref() != Some("software-engineer-ii") {
        bail!("the fallback answer mapped to {mapped:?}");
    }

    let mut golden = serde_json::to_value(&golden)?;
    support::strip_timestamps(&mut golden);
    write_json("golden/resume_bundle.json", &golden)?;
    let pipeline = std::mem::take(&mut *recorder.recorded.lock().unwrap());
    write_json("stubs/pipeline.json", &pipeline)?;

    let keywords: Vec<String> = DEFAULT_KEYWORDS.iter().map(|k| k.to_string()).collect();
    let gateway = Gateway::new();
    gateway.register_provider("recorder", recorder.clone())?;
    let csv = support::read_fixture("catalog.csv");
    let ingest = ingest_csv(
        csv.as_slice(),
        &keywords,
        &gateway,
        &templates.course_outcomes,
    )?;
    let catalog = std::mem::take(&mut *recorder.recorded.lock().unwrap());
    write_json("stubs/catalog.json", &catalog)?;
    let titles: BTreeMap<_, _> = ingest
        .records
        .iter()
        .map(|r| (r.title.clone(), r.course_id.clone()))
        .collect();
    println!("catalog rows kept: {titles:#?}");
    Ok(())
}
