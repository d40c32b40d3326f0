use std::collections::HashSet;

use url::Url;

use super::PostRecord;
use crate::error::{Error, Result};

/// Joins hashtags into a sequence key. Stripped from hashtags at parse time,
/// so keys are injective over ordered hashtag lists.
pub const HASHTAG_SEPARATOR: char = '|';

/// Normalize one hashtag: drop leading `#`s and the reserved separator,
/// lowercase unless `case_sensitive`. Returns `None` if nothing is left.
pub fn normalize_hashtag(tag: &str, case_sensitive: bool) -> Option<String> {
    let body: String = tag
        .trim()
        .trim_start_matches('#')
        .chars()
        .filter(|&c| c != HASHTAG_SEPARATOR && !c.is_whitespace())
        .collect();
    if body.is_empty() {
        return None;
    }
    Some(if case_sensitive {
        body
    } else {
        body.to_lowercase()
    })
}

/// Hashtags in description order.
pub fn hashtags_from_description(description: &str, case_sensitive: bool) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = description.char_indices().peekable();
    while let Some((_, c)) = chars.next() {
        if c != '#' {
            continue;
        }
        let mut tag = String::new();
        while let Some(&(_, n)) = chars.peek() {
            if n.is_alphanumeric() || n == '_' {
                tag.push(n);
                chars.next();
            } else {
                break;
            }
        }
        if let Some(t) = normalize_hashtag(&tag, case_sensitive) {
            out.push(t);
        }
    }
    out
}

pub(crate) fn urls_from_description(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter(|tok| {
            let lower = tok.to_ascii_lowercase();
            lower.starts_with("http://") || lower.starts_with("https://")
        })
        .map(|tok| {
            tok.trim_end_matches(|c: char| ".,!?;:)]}'\"".contains(c))
                .to_string()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DomainOptions {
    /// Collapse hosts to their registrable domain (`a.b.example.co.uk` to
    /// `example.co.uk`). Uses a small built-in table of multi-label public
    /// suffixes, not the full public suffix list.
    pub registrable_only: bool,
}

const MULTI_LABEL_SUFFIXES: &[&str] = &[
    "co.uk", "org.uk", "ac.uk", "gov.uk", "com.au", "net.au", "org.au", "co.nz", "co.jp",
    "ne.jp", "or.jp", "com.br", "com.mx", "com.ar", "co.in", "co.za", "com.tr", "com.cn",
    "com.tw", "co.kr", "github.io", "blogspot.com",
];

/// Lowercased host of `url` with scheme, port, path, query and fragment
/// removed and one leading `www.` stripped. Inputs without a scheme are
/// read as `http://`. Returns `None` when no host can be recovered.
pub fn normalize_domain(url: &str) -> Option<String> {
    normalize_domain_with(url, DomainOptions::default())
}

pub fn normalize_domain_with(url: &str, opts: DomainOptions) -> Option<String> {
    let trimmed = url.trim();
    if trimmed.is_empty() || trimmed.chars().any(char::is_whitespace) {
        return None;
    }
    let parsed = match Url::parse(trimmed) {
        Ok(u) => u,
        Err(url::ParseError::RelativeUrlWithoutBase) => {
            Url::parse(&format!("http://{trimmed}")).ok()?
        }
        Err(_) => return None,
    };
    let host = parsed.host_str()?.trim_end_matches('.').to_lowercase();
    if host.is_empty() {
        return None;
    }
    // Bare words like "localhost" or "foo" are almost always tokenization
    // noise in post text rather than real link targets.
    if !host.contains('.') && !host.contains(':') {
        return None;
    }
    let host = host.strip_prefix("www.").unwrap_or(&host).to_string();
    if host.is_empty() {
        return None;
    }
    if opts.registrable_only {
        return Some(registrable(&host));
    }
    Some(host)
}

fn registrable(host: &str) -> String {
    if host.parse::<std::net::IpAddr>().is_ok() || host.starts_with('[') {
        return host.to_string();
    }
    let labels: Vec<&str> = host.split('.').collect();
    if labels.len() <= 2 {
        return host.to_string();
    }
    let last_two = labels[labels.len() - 2..].join(".");
    let keep = if MULTI_LABEL_SUFFIXES.contains(&last_two.as_str()) {
        3
    } else {
        2
    };
    labels[labels.len().saturating_sub(keep)..].join(".")
}

/// Ordered hashtag key for a post, or `None` below `min_hashtags`.
pub fn extract_hashtag_sequence(post: &PostRecord, min_hashtags: usize) -> Option<String> {
    if post.hashtags.is_empty() || post.hashtags.len() < min_hashtags {
        return None;
    }
    let mut key = String::new();
    for (i, tag) in post.hashtags.iter().enumerate() {
        if i > 0 {
            key.push(HASHTAG_SEPARATOR);
        }
        key.push_str(tag);
    }
    Some(key)
}

/// `floor(timestamp / bin_width)`.
pub fn assign_time_bin(timestamp: i64, bin_width: i64) -> Result<i64> {
    if bin_width <= 0 {
        return Err(Error::config(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    Ok(timestamp.div_euclid(bin_width))
}

/// Lowercase, strip punctuation, split on whitespace, drop stopwords.
pub fn normalize_transcript(text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned
        .split_whitespace()
        .filter(|tok| !stopwords.contains(*tok))
        .map(str::to_string)
        .collect()
}

pub fn default_stopwords() -> HashSet<String> {
    const WORDS: &[&str] = &[
        "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
        "because", "been", "before", "being", "but", "by", "can", "could", "did", "do", "does",
        "doing", "for", "from", "had", "has", "have", "he", "her", "here", "him", "his", "how",
        "i", "if", "in", "into", "is", "it", "its", "just", "me", "more", "most", "my", "no",
        "not", "now", "of", "on", "once", "only", "or", "other", "our", "out", "over", "she",
        "so", "some", "such", "than", "that", "the", "their", "them", "then", "there", "these",
        "they", "this", "those", "to", "too", "under", "up", "very", "was", "we", "were", "what",
        "when", "where", "which", "while", "who", "why", "will", "with", "would", "you", "your",
    ];
    WORDS.iter().map(|w| w.to_string()).collect()
}
