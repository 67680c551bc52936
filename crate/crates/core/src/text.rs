/// Dedup/matching key: trimmed, lowercased, internal whitespace collapsed.
pub fn normalize_key(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Counts case-insensitive occurrences of `phrase` in `haystack` that are not
/// embedded inside a longer alphanumeric word.
pub fn count_phrase(haystack: &str, phrase: &str) -> usize {
    let needle = normalize_key(phrase);
    if needle.is_empty() {
        return 0;
    }
    let hay = haystack.to_lowercase();
    let bytes = hay.as_bytes();
    let mut count = 0;
    let mut from = 0;
    while let Some(pos) = hay[from..].find(&needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before_ok = start == 0 || !is_word_byte(bytes[start - 1]);
        let after_ok = end == bytes.len() || !is_word_byte(bytes[end]);
        if before_ok && after_ok {
            count += 1;
        }
        from = start + hay[start..].chars().next().map_or(1, char::len_utf8);
    }
    count
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b >= 0x80
}

/// Lowercase slug built from alphanumeric runs joined by `-`.
pub fn slugify(text: &str) -> String {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|part| !part.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("-")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_case_and_space() {
        assert_eq!(normalize_key("  Python  "), "python");
        assert_eq!(normalize_key("System\t  Design"), "system design");
    }

    #[test]
    fn phrase_counting_respects_word_edges() {
        assert_eq!(count_phrase("Go and Golang; go!", "go"), 2);
        assert_eq!(count_phrase("Used Python, python3 and PYTHON", "python"), 2);
        assert_eq!(count_phrase("system   design", "System Design"), 0);
        assert_eq!(count_phrase("system design reviews", "System Design"), 1);
        assert_eq!(count_phrase("C++ and c", "c++"), 1);
    }

    #[test]
    fn slugs() {
        assert_eq!(slugify("Software Engineer II"), "software-engineer-ii");
    }
}
