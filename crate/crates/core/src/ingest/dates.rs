use std::cmp::Ordering;

/// A leniently parsed resume date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResumeDate {
    Month {
        year: i32,
        month: Option<u32>,
    },
    /// "Present", "Current", "Now".
    Ongoing,
}

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Accepts `2021`, `2021-03`, `2021/03`, `03/2021`, `Mar 2021`, `March 2021`,
/// `Sept. 2021` and the ongoing markers. Anything else is `None`.
pub fn parse_date(text: &str) -> Option<ResumeDate> {
    let lower = text.trim().to_lowercase();
    if lower.is_empty() {
        return None;
    }
    if matches!(
        lower.as_str(),
        "present" | "current" | "now" | "ongoing" | "today"
    ) {
        return Some(ResumeDate::Ongoing);
    }
    let parts: Vec<&str> = lower
        .split(|c: char| c == '-' || c == '/' || c == '.' || c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .collect();
    match parts.as_slice() {
        [y] => year(y).map(|year| ResumeDate::Month { year, month: None }),
        [a, b] => {
            if let (Some(y), Some(m)) = (year(a), month_number(b)) {
                return Some(ResumeDate::Month {
                    year: y,
                    month: Some(m),
                });
            }
            if let (Some(m), Some(y)) = (month_number(a).or_else(|| month_name(a)), year(b)) {
                return Some(ResumeDate::Month {
                    year: y,
                    month: Some(m),
                });
            }
            None
        }
        _ => None,
    }
}

fn year(text: &str) -> Option<i32> {
    if text.len() != 4 {
        return None;
    }
    text.parse().ok().filter(|y| (1900..=2200).contains(y))
}

fn month_number(text: &str) -> Option<u32> {
    if text.len() > 2 {
        return None;
    }
    text.parse().ok().filter(|m| (1..=12).contains(m))
}

fn month_name(text: &str) -> Option<u32> {
    if text.len() < 3 {
        return None;
    }
    MONTHS
        .iter()
        .position(|m| text.starts_with(m))
        .map(|i| i as u32 + 1)
}

/// Sort key for "most recent first" ordering: ongoing is newest, unparseable
/// or missing dates sort after everything else.
pub fn recency_key(text: Option<&str>) -> Option<(i32, u32)> {
    match text.and_then(parse_date)? {
        ResumeDate::Ongoing => Some((i32::MAX, 0)),
        ResumeDate::Month { year, month } => Some((year, month.unwrap_or(0))),
    }
}

/// Orders two end dates newest first, unknown last.
pub fn newest_first(a: Option<&str>, b: Option<&str>) -> Ordering {
    match (recency_key(a), recency_key(b)) {
        (Some(x), Some(y)) => y.cmp(&x),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

fn month_index(year: i32, month: Option<u32>) -> i64 {
    year as i64 * 12 + month.unwrap_or(1) as i64 - 1
}

/// Whole months between start and end. A missing month counts as January;
/// an ongoing end resolves to `as_of`. Unknown or inverted spans are 0.
pub fn months_between(start: Option<&str>, end: Option<&str>, as_of: (i32, u32)) -> u32 {
    let Some(ResumeDate::Month {
        year: sy,
        month: sm,
    }) = start.and_then(parse_date)
    else {
        return 0;
    };
    let now = month_index(as_of.0, Some(as_of.1));
    let end_index = match end.map(str::trim).filter(|e| !e.is_empty()) {
        None => now,
        Some(text) => match parse_date(text) {
            Some(ResumeDate::Month { year, month }) => month_index(year, month),
            Some(ResumeDate::Ongoing) => now,
            None => return 0,
        },
    };
    u32::try_from((end_index - month_index(sy, sm)).max(0)).unwrap_or(0)
}
