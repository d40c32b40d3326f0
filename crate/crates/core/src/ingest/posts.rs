use std::collections::HashSet;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::text::{hashtags_from_description, normalize_hashtag, urls_from_description};
use super::{IssueKind, Parsed};
use crate::error::Result;

/// One published video.
///
/// Hashtags are stored normalized (no leading `#`, separator character
/// removed, lowercased unless parsing was case sensitive) and in the order
/// they appeared in the description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post_id: String,
    pub user_id: String,
    #[serde(default)]
    pub username: String,
    pub timestamp: i64,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub hashtags: Vec<String>,
    #[serde(default)]
    pub urls: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duet_target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stitch_target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

/// A comment left under a post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub comment_id: String,
    pub post_id: String,
    pub user_id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub urls: Vec<String>,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Keep hashtag case as written instead of lowercasing.
    pub case_sensitive_hashtags: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTimestamp {
    Int(i64),
    Float(f64),
    Text(String),
}

impl RawTimestamp {
    fn to_epoch(&self) -> std::result::Result<i64, String> {
        let secs = match self {
            RawTimestamp::Int(v) => *v,
            RawTimestamp::Float(v) if v.is_finite() => v.floor() as i64,
            RawTimestamp::Float(v) => return Err(format!("non-finite timestamp {v}")),
            RawTimestamp::Text(s) => parse_iso8601(s)?,
        };
        if secs < 0 {
            return Err(format!("timestamp {secs} precedes the Unix epoch"));
        }
        Ok(secs)
    }
}

fn parse_iso8601(s: &str) -> std::result::Result<i64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    // Offset-less forms are taken as UTC.
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(naive.and_utc().timestamp());
        }
    }
    Err(format!("unrecognized timestamp {s:?}"))
}

#[derive(Deserialize)]
struct RawPost {
    post_id: String,
    user_id: String,
    #[serde(default)]
    username: String,
    timestamp: RawTimestamp,
    #[serde(default)]
    description: String,
    hashtags: Option<Vec<String>>,
    urls: Option<Vec<String>>,
    #[serde(default)]
    duet_target: Option<String>,
    #[serde(default)]
    stitch_target: Option<String>,
    #[serde(default)]
    reply_target: Option<String>,
    #[serde(default)]
    transcript: Option<String>,
}

impl RawPost {
    fn into_record(self, opts: ParseOptions) -> std::result::Result<PostRecord, String> {
        if self.post_id.is_empty() {
            return Err("empty post_id".into());
        }
        if self.user_id.is_empty() {
            return Err("empty user_id".into());
        }
        let timestamp = self.timestamp.to_epoch()?;
        let hashtags = match self.hashtags {
            Some(tags) => tags
                .iter()
                .filter_map(|t| normalize_hashtag(t, opts.case_sensitive_hashtags))
                .collect(),
            None => hashtags_from_description(&self.description, opts.case_sensitive_hashtags),
        };
        let urls = match self.urls {
            Some(urls) => urls,
            None => urls_from_description(&self.description),
        };
        let nonempty = |o: Option<String>| o.filter(|s| !s.is_empty());
        Ok(PostRecord {
            post_id: self.post_id,
            user_id: self.user_id,
            username: self.username,
            timestamp,
            description: self.description,
            hashtags,
            urls,
            duet_target: nonempty(self.duet_target),
            stitch_target: nonempty(self.stitch_target),
            reply_target: nonempty(self.reply_target),
            transcript: self.transcript,
        })
    }
}

#[derive(Deserialize)]
struct RawComment {
    comment_id: String,
    post_id: String,
    user_id: String,
    #[serde(default)]
    text: String,
    urls: Option<Vec<String>>,
    timestamp: RawTimestamp,
}

/// Parse line-delimited JSON posts.
///
/// Malformed lines and repeated `post_id`s are recorded in the ledger and
/// skipped; input order is preserved for everything else. Only an I/O
/// failure of the underlying reader is returned as an error.
pub fn parse_posts<R: BufRead>(reader: R, opts: ParseOptions) -> Result<Parsed<PostRecord>> {
    let mut out = Parsed::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPost = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(err) => {
                out.ledger.push(lineno, IssueKind::Malformed, err.to_string());
                continue;
            }
        };
        let record = match raw.into_record(opts) {
            Ok(r) => r,
            Err(msg) => {
                out.ledger.push(lineno, IssueKind::Invalid, msg);
                continue;
            }
        };
        if !seen.insert(record.post_id.clone()) {
            out.ledger.push(
                lineno,
                IssueKind::Duplicate,
                format!("duplicate post_id {:?}", record.post_id),
            );
            continue;
        }
        out.records.push(record);
    }
    Ok(out)
}

/// Parse line-delimited JSON comments.
///
/// When `known_posts` is given, comments on unknown posts are kept but
/// flagged as dangling.
pub fn parse_comments<R: BufRead>(
    reader: R,
    known_posts: Option<&HashSet<&str>>,
) -> Result<Parsed<CommentRecord>> {
    let mut out = Parsed::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawComment = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(err) => {
                out.ledger.push(lineno, IssueKind::Malformed, err.to_string());
                continue;
            }
        };
        if raw.comment_id.is_empty() || raw.user_id.is_empty() {
            out.ledger
                .push(lineno, IssueKind::Invalid, "empty comment_id or user_id");
            continue;
        }
        let timestamp = match raw.timestamp.to_epoch() {
            Ok(t) => t,
            Err(msg) => {
                out.ledger.push(lineno, IssueKind::Invalid, msg);
                continue;
            }
        };
        if !seen.insert(raw.comment_id.clone()) {
            out.ledger.push(
                lineno,
                IssueKind::Duplicate,
                format!("duplicate comment_id {:?}", raw.comment_id),
            );
            continue;
        }
        if let Some(known) = known_posts {
            if !known.contains(raw.post_id.as_str()) {
                out.ledger.push(
                    lineno,
                    IssueKind::Dangling,
                    format!("comment references unknown post {:?}", raw.post_id),
                );
            }
        }
        let urls = raw.urls.unwrap_or_else(|| urls_from_description(&raw.text));
        out.records.push(CommentRecord {
            comment_id: raw.comment_id,
            post_id: raw.post_id,
            user_id: raw.user_id,
            text: raw.text,
            urls,
            timestamp,
        });
    }
    Ok(out)
}

pub fn write_posts_jsonl<W: Write>(mut writer: W, posts: &[PostRecord]) -> Result<()> {
    for post in posts {
        serde_json::to_writer(&mut writer, post)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_comments_jsonl<W: Write>(mut writer: W, comments: &[CommentRecord]) -> Result<()> {
    for comment in comments {
        serde_json::to_writer(&mut writer, comment)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: &str, user: &str, ts: i64) -> String {
        format!(
            r##"{{"post_id":"{id}","user_id":"{user}","username":"n","timestamp":{ts},"description":"hi #A #b","hashtags":["#America","#election2024"]}}"##
        )
    }

    #[test]
    fn three_good_lines() {
        let input = [line("p1", "u1", 1), line("p2", "u1", 2), line("p3", "u2", 3)].join("\n");
        let parsed = parse_posts(input.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.records.len(), 3);
        assert!(parsed.ledger.is_empty());
        let ids: Vec<_> = parsed.records.iter().map(|p| p.post_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
        assert_eq!(parsed.records[0].hashtags, ["america", "election2024"]);
    }

    #[test]
    fn truncated_line_is_ledgered() {
        let mut bad = line("p2", "u1", 2);
        bad.truncate(bad.len() / 2);
        let input = [line("p1", "u1", 1), bad, line("p3", "u2", 3)].join("\n");
        let parsed = parse_posts(input.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.ledger.lines(), [2]);
        assert_eq!(parsed.ledger.issues[0].kind, IssueKind::Malformed);
    }

    #[test]
    fn duplicate_post_id_keeps_first() {
        let input = [line("p1", "u1", 1), line("p1", "u2", 5)].join("\n");
        let parsed = parse_posts(input.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].user_id, "u1");
        assert_eq!(parsed.ledger.issues[0].kind, IssueKind::Duplicate);
        assert_eq!(parsed.ledger.lines(), [2]);
    }

    #[test]
    fn iso_timestamps_are_normalized() {
        let input = r#"{"post_id":"p","user_id":"u","timestamp":"2024-08-01T00:05:00Z"}
{"post_id":"q","user_id":"u","timestamp":"2024-08-01T02:05:00.750+02:00"}
{"post_id":"r","user_id":"u","timestamp":"2024-08-01 00:05:00"}
{"post_id":"s","user_id":"u","timestamp":12.9}"#;
        let parsed = parse_posts(input.as_bytes(), ParseOptions::default()).unwrap();
        let ts: Vec<i64> = parsed.records.iter().map(|p| p.timestamp).collect();
        assert_eq!(ts, [1_722_470_700, 1_722_470_700, 1_722_470_700, 12]);
    }

    #[test]
    fn negative_timestamp_and_empty_id_are_invalid() {
        let input = r#"{"post_id":"p","user_id":"u","timestamp":-1}
{"post_id":"","user_id":"u","timestamp":1}"#;
        let parsed = parse_posts(input.as_bytes(), ParseOptions::default()).unwrap();
        assert!(parsed.records.is_empty());
        assert!(parsed
            .ledger
            .issues
            .iter()
            .all(|i| i.kind == IssueKind::Invalid));
    }

    #[test]
    fn hashtags_fall_back_to_description() {
        let input = r##"{"post_id":"p","user_id":"u","timestamp":1,"description":"Go #Vote now #USA! see https://x.org/a"}"##;
        let parsed = parse_posts(input.as_bytes(), ParseOptions::default()).unwrap();
        assert_eq!(parsed.records[0].hashtags, ["vote", "usa"]);
        assert_eq!(parsed.records[0].urls, ["https://x.org/a"]);
        let cs = parse_posts(
            input.as_bytes(),
            ParseOptions {
                case_sensitive_hashtags: true,
            },
        )
        .unwrap();
        assert_eq!(cs.records[0].hashtags, ["Vote", "USA"]);
    }

    #[test]
    fn dangling_comments_are_kept() {
        let known: HashSet<&str> = ["p1"].into_iter().collect();
        let input = r#"{"comment_id":"c1","post_id":"p1","user_id":"u","text":"ok","timestamp":5}
{"comment_id":"c2","post_id":"p9","user_id":"u","text":"see http://a.com","timestamp":6}"#;
        let parsed = parse_comments(input.as_bytes(), Some(&known)).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.ledger.issues[0].kind, IssueKind::Dangling);
        assert_eq!(parsed.ledger.rejected(), 0);
        assert_eq!(parsed.records[1].urls, ["http://a.com"]);
    }
}
