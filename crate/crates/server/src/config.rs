//! `coach.toml`: where the tree, benchmarks, catalog and templates live, which
//! embedder and model provider to use, and server defaults. Relative paths
//! resolve against the directory containing the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use coach_core::career::{CareerTree, DEFAULT_MAPPING_THRESHOLD};
use coach_core::courses::{index_courses, CourseRecord, ScanMode, VectorCollection, DEFAULT_K};
use coach_core::embeddings::{EmbedderConfig, DEFAULT_SEED, DEFAULT_TEST_DIMENSION};
use coach_core::gateway::{
    Gateway, HttpProvider, HttpProviderConfig, StubProvider, StubScript, DEFAULT_RETRY_LIMIT,
};
use coach_core::pipeline::{CoachService, Pipeline, PipelineSettings};
use coach_core::skills::SkillsStore;
use coach_core::store::{FileStore, ProfileStore};
use coach_core::templates::Templates;
use coach_core::time::Clock;

pub const COLLECTION_NAME: &str = "courses";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub paths: PathsConfig,
    #[serde(default = "default_embedder")]
    pub embedder: EmbedderConfig,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub llm: LlmConfig,
    #[serde(default)]
    pub server: ServerConfig,
}

fn default_embedder() -> EmbedderConfig {
    EmbedderConfig::deterministic(DEFAULT_SEED, DEFAULT_TEST_DIMENSION)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub career_tree: PathBuf,
    pub skills: PathBuf,
    /// Course catalog (JSON array of course records), indexed at startup.
    pub courses: Option<PathBuf>,
    /// Prebuilt collection snapshot; takes precedence over `courses`.
    pub collection: Option<PathBuf>,
    /// Template directory; the built-in templates are used when absent.
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub mapping_threshold: f64,
    pub k: usize,
    pub chunk_budget: usize,
    pub chunk_overlap: usize,
    pub parallel_scan: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let d = PipelineSettings::default();
        PipelineConfig {
            mapping_threshold: DEFAULT_MAPPING_THRESHOLD,
            k: DEFAULT_K,
            chunk_budget: d.chunk_budget.0,
            chunk_overlap: d.chunk_overlap.0,
            parallel_scan: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Scripted responses from `stub_scripts`.
    Stub,
    /// OpenAI-compatible endpoint from `LLM_BASE_URL`, `LLM_API_KEY`, `LLM_MODEL`.
    Http,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlmConfig {
    pub provider: ProviderKind,
    pub stub_scripts: Vec<PathBuf>,
    pub retry_limit: u32,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            provider: ProviderKind::Stub,
            stub_scripts: Vec::new(),
            retry_limit: DEFAULT_RETRY_LIMIT,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub listen_addr: String,
    pub store_dir: PathBuf,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen_addr: "127.0.0.1:8080".into(),
            store_dir: PathBuf::from("coach-data"),
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut config: AppConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve(base);
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.career_tree);
        fix(&mut self.paths.skills);
        for p in [
            &mut self.paths.courses,
            &mut self.paths.collection,
            &mut self.paths.templates,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.llm.stub_scripts.iter_mut().for_each(fix);
        fix(&mut self.server.store_dir);
    }

    pub fn settings(&self) -> PipelineSettings {
        PipelineSettings {
            mapping_threshold: self.pipeline.mapping_threshold,
            k: self.pipeline.k,
            chunk_budget: coach_core::gateway::TokenCount(self.pipeline.chunk_budget),
            chunk_overlap: coach_core::gateway::TokenCount(self.pipeline.chunk_overlap),
            scan_mode: if self.pipeline.parallel_scan {
                ScanMode::Parallel
            } else {
                ScanMode::Sequential
            },
        }
    }

    pub fn stub_script(&self) -> Result<StubScript> {
        let mut script = StubScript::default();
        for path in &self.llm.stub_scripts {
            script.extend(
                StubScript::load(path).with_context(|| format!("loading {}", path.display()))?,
            );
        }
        Ok(script)
    }

    /// Gateway with the configured provider registered and active.
    pub fn gateway(&self) -> Result<Gateway> {
        let gateway = Gateway::new().with_retry_limit(self.llm.retry_limit);
        match self.llm.provider {
            ProviderKind::Stub => {
                gateway
                    .register_provider("stub", Arc::new(StubProvider::new(self.stub_script()?)))?;
            }
            ProviderKind::Http => {
                let http = HttpProviderConfig::from_env().context(
                    "the http provider needs LLM_BASE_URL (and usually LLM_API_KEY, LLM_MODEL)",
                )?;
                gateway.register_provider("http", Arc::new(HttpProvider::new(http)))?;
            }
        }
        Ok(gateway)
    }

    pub fn templates(&self) -> Result<Templates> {
        Ok(match &self.paths.templates {
            Some(dir) => Templates::load_dir(dir)?,
            None => Templates::builtin(),
        })
    }

    pub fn collection(&self) -> Result<VectorCollection> {
        if let Some(path) = &self.paths.collection {
            let collection = VectorCollection::load(path)?;
            if collection.embedder() != &self.embedder {
                bail!(
                    "collection {} was indexed with {:?}, but the configured embedder is {:?}",
                    path.display(),
                    collection.embedder(),
                    self.embedder
                );
            }
            return Ok(collection);
        }
        let Some(path) = &self.paths.courses else {
            bail!("set paths.collection or paths.courses");
        };
        let courses = load_courses(path)?;
        let embedder = self.embedder.build()?;
        Ok(index_courses(&courses, COLLECTION_NAME, embedder.as_ref())?)
    }

    /// Loads and validates everything the pipeline reads.
    pub fn pipeline_with(&self, gateway: Gateway) -> Result<Pipeline> {
        let tree = CareerTree::load(&self.paths.career_tree)?;
        let skills = SkillsStore::load(&self.paths.skills, Some(&tree))?;
        Ok(Pipeline {
            tree,
            skills,
            templates: self.templates()?,
            gateway,
            embedder: self.embedder.build()?,
            collection: self.collection()?,
            settings: self.settings(),
        })
    }

    pub fn service(&self, store_dir: &Path, clock: Arc<dyn Clock>) -> Result<CoachService> {
        let pipeline = self.pipeline_with(self.gateway()?)?;
        let store = ProfileStore::new(Box::new(FileStore::open(store_dir)?), clock);
        Ok(CoachService::new(pipeline, store))
    }
}

pub fn load_courses(path: &Path) -> Result<Vec<CourseRecord>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
