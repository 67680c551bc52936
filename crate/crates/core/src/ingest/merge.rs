use std::collections::HashSet;

use super::dates::newest_first;
use super::{IngestError, ParsedResume};
use crate::text::normalize_key;

/// Merges per-chunk extractions into one profile.
///
/// Entries are deduplicated per list on a normalized key, keeping the first
/// occurrence. Experience and education end up ordered by end date, newest
/// first, with unparseable dates last. Partials must agree on the candidate
/// name wherever they state one.
pub fn merge_partials(partials: &[ParsedResume]) -> Result<ParsedResume, IngestError> {
    let mut merged = ParsedResume::default();
    for partial in partials {
        let name = partial.name.trim();
        if name.is_empty() {
            continue;
        }
        if merged.name.is_empty() {
            merged.name = name.to_string();
        } else if normalize_key(&merged.name) != normalize_key(name) {
            return Err(IngestError::ConflictingIdentity {
                first: merged.name.clone(),
                second: name.to_string(),
            });
        }
    }

    let all = || partials.iter();
    merged.contacts = dedup(all().flat_map(|p| &p.contacts), |c| {
        format!("{:?}|{}", c.kind, normalize_key(&c.value))
    });
    merged.education = dedup(all().flat_map(|p| &p.education), |e| {
        format!(
            "{}|{}",
            normalize_key(&e.institution),
            normalize_key(&e.credential)
        )
    });
    merged.experience = dedup(all().flat_map(|p| &p.experience), |e| {
        format!(
            "{}|{}|{}",
            normalize_key(&e.title),
            normalize_key(&e.organization),
            normalize_key(e.start.as_deref().unwrap_or(""))
        )
    });
    merged.technical_skills = dedup(all().flat_map(|p| &p.technical_skills), |s| {
        normalize_key(&s.name)
    });
    merged.soft_skills = dedup(all().flat_map(|p| &p.soft_skills), |s| {
        normalize_key(&s.name)
    });
    merged.certifications = dedup(all().flat_map(|p| &p.certifications), |c| normalize_key(c));
    merged.projects = dedup(all().flat_map(|p| &p.projects), |p| normalize_key(&p.name));

    merged
        .experience
        .sort_by(|a, b| newest_first(a.end.as_deref(), b.end.as_deref()));
    merged
        .education
        .sort_by(|a, b| newest_first(a.end.as_deref(), b.end.as_deref()));
    Ok(merged)
}

fn dedup<'a, T: Clone + 'a>(
    items: impl Iterator<Item = &'a T>,
    key: impl Fn(&T) -> String,
) -> Vec<T> {
    let mut seen = HashSet::new();
    items
        .filter(|item| seen.insert(key(item)))
        .cloned()
        .collect()
}
