use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CourseError, CourseRecord, RecommendationQuery};
use crate::embeddings::{cosine_slices, Embedder, EmbedderConfig, EmbeddingVector};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEntry {
    pub course_id: String,
    pub vector: EmbeddingVector,
    pub payload: CourseRecord,
}

/// A named set of course vectors from one embedder, kept sorted by course id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorCollection {
    name: String,
    dimension: usize,
    embedder: EmbedderConfig,
    entries: Vec<VectorEntry>,
}

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format_version: u32,
    #[serde(flatten)]
    collection: VectorCollection,
}

impl VectorCollection {
    pub fn new(name: impl Into<String>, embedder: EmbedderConfig) -> Self {
        VectorCollection {
            name: name.into(),
            dimension: embedder.dimension,
            embedder,
            entries: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn embedder(&self) -> &EmbedderConfig {
        &self.embedder
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VectorEntry] {
        &self.entries
    }

    pub fn get(&self, course_id: &str) -> Option<&VectorEntry> {
        self.entries
            .binary_search_by(|e| e.course_id.as_str().cmp(course_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    /// Inserts or replaces one entry.
    pub fn insert(&mut self, entry: VectorEntry) -> Result<(), CourseError> {
        if entry.vector.dimension() != self.dimension {
            return Err(CourseError::DimensionMismatch {
                name: self.name.clone(),
                expected: self.dimension,
                found: entry.vector.dimension(),
            });
        }
        match self
            .entries
            .binary_search_by(|e| e.course_id.as_str().cmp(&entry.course_id))
        {
            Ok(i) => self.entries[i] = entry,
            Err(i) => self.entries.insert(i, entry),
        }
        Ok(())
    }

    /// Embeds and upserts `courses` using the collection's own embedder kind.
    pub fn upsert_courses(
        &mut self,
        courses: &[CourseRecord],
        embedder: &dyn Embedder,
    ) -> Result<(), CourseError> {
        if embedder.dimension() != self.dimension {
            return Err(CourseError::DimensionMismatch {
                name: self.name.clone(),
                expected: self.dimension,
                found: embedder.dimension(),
            });
        }
        if courses.is_empty() {
            return Err(CourseError::NoCourses);
        }
        let texts: Vec<String> = courses.iter().map(CourseRecord::composite_text).collect();
        let vectors = embedder.embed_texts(&texts)?;
        for (course, vector) in courses.iter().zip(vectors) {
            self.insert(VectorEntry {
                course_id: course.course_id.clone(),
                vector,
                payload: course.clone(),
            })?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Snapshot {
            format_version: SNAPSHOT_VERSION,
            collection: self.clone(),
        })
        .expect("collection serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CourseError> {
        let snapshot: Snapshot =
            serde_json::from_str(text).map_err(|e| CourseError::Snapshot(e.to_string()))?;
        if snapshot.format_version != SNAPSHOT_VERSION {
            return Err(CourseError::Snapshot(format!(
                "unsupported snapshot version {}",
                snapshot.format_version
            )));
        }
        let stored = snapshot.collection;
        let mut collection = VectorCollection::new(stored.name, stored.embedder);
        if stored.dimension != collection.dimension {
            return Err(CourseError::Snapshot(
                "dimension disagrees with embedder config".into(),
            ));
        }
        for mut entry in stored.entries {
            if entry.payload.course_id != entry.course_id {
                return Err(CourseError::Snapshot(format!(
                    "entry {} payload id mismatch",
                    entry.course_id
                )));
            }
            if (entry.vector.norm() - 1.0).abs() > 1e-9 {
                entry.vector = EmbeddingVector::normalized(entry.vector.values().to_vec())
                    .ok_or_else(|| {
                        CourseError::Snapshot(format!(
                            "entry {} has a zero vector",
                            entry.course_id
                        ))
                    })?;
            }
            collection.insert(entry)?;
        }
        Ok(collection)
    }

    pub fn load(path: &Path) -> Result<Self, CourseError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CourseError::Snapshot(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Writes via a temporary file and rename so readers never see a partial snapshot.
    pub fn save(&self, path: &Path) -> Result<(), CourseError> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()).map_err(|e| CourseError::Snapshot(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| CourseError::Snapshot(e.to_string()))
    }
}

/// Builds a fresh collection from `courses`.
pub fn index_courses(
    courses: &[CourseRecord],
    collection_name: &str,
    embedder: &dyn Embedder,
) -> Result<VectorCollection, CourseError> {
    let mut collection = VectorCollection::new(collection_name, embedder.config());
    collection.upsert_courses(courses, embedder)?;
    Ok(collection)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCourse {
    pub course: CourseRecord,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMode {
    Sequential,
    /// Rayon scan when built with the `parallel` feature, sequential otherwise.
    Parallel,
}

impl Default for ScanMode {
    fn default() -> Self {
        if par::is_parallel() {
            ScanMode::Parallel
        } else {
            ScanMode::Sequential
        }
    }
}

fn by_rank(a: &(f64, usize), b: &(f64, usize), entries: &[VectorEntry]) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| entries[a.1].course_id.cmp(&entries[b.1].course_id))
}

/// Exact scan: cosine against every entry, best `k` by score descending,
/// ties by course id ascending.
pub fn search_vector_with<'a>(
    collection: &'a VectorCollection,
    query: &EmbeddingVector,
    k: usize,
    mode: ScanMode,
) -> Result<Vec<(&'a VectorEntry, f64)>, CourseError> {
    if collection.is_empty() {
        return Err(CourseError::EmptyCollection);
    }
    if k == 0 {
        return Err(CourseError::InvalidK);
    }
    if query.dimension() != collection.dimension() {
        return Err(CourseError::DimensionMismatch {
            name: collection.name.clone(),
            expected: collection.dimension(),
            found: query.dimension(),
        });
    }
    let entries = collection.entries();
    let score =
        |(i, e): (usize, &VectorEntry)| (cosine_slices(query.values(), e.vector.values()), i);
    let mut scored: Vec<(f64, usize)> = match mode {
        ScanMode::Sequential => entries.iter().enumerate().map(score).collect(),
        ScanMode::Parallel => par::map_indexed(entries, |i, e| score((i, e))),
    };
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, |a, b| by_rank(a, b, entries));
        scored.truncate(k);
    }
    scored.sort_by(|a, b| by_rank(a, b, entries));
    Ok(scored.into_iter().map(|(s, i)| (&entries[i], s)).collect())
}

pub fn search_vector<'a>(
    collection: &'a VectorCollection,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<(&'a VectorEntry, f64)>, CourseError> {
    search_vector_with(collection, query, k, ScanMode::default())
}

/// Embeds the query text and returns the top `query.k` courses.
pub fn search(
    collection: &VectorCollection,
    query: &RecommendationQuery,
    embedder: &dyn Embedder,
) -> Result<Vec<ScoredCourse>, CourseError> {
    search_with(collection, query, embedder, ScanMode::default())
}

pub fn search_with(
    collection: &VectorCollection,
    query: &RecommendationQuery,
    embedder: &dyn Embedder,
    mode: ScanMode,
) -> Result<Vec<ScoredCourse>, CourseError> {
    if collection.is_empty() {
        return Err(CourseError::EmptyCollection);
    }
    if &embedder.config() != collection.embedder() {
        return Err(CourseError::EmbedderMismatch);
    }
    let vector = embedder.embed_one(&query.query_text)?;
    Ok(search_vector_with(collection, &vector, query.k, mode)?
        .into_iter()
        .map(|(entry, score)| ScoredCourse {
            course: entry.payload.clone(),
            score,
        })
        .collect())
}
