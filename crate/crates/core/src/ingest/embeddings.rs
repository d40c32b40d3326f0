use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use super::{IssueKind, Ledger, Parsed};
use crate::error::{Error, Result};

/// Magic bytes opening a packed embedding file.
pub const PACKED_MAGIC: &[u8; 4] = b"CNEB";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Speech,
    Video,
    AudioVerify,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Speech => "speech",
            EmbeddingKind::Video => "video",
            EmbeddingKind::AudioVerify => "audio_verify",
        }
    }
}

/// A precomputed content embedding for one post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub post_id: String,
    pub kind: EmbeddingKind,
    pub vector: Vec<f32>,
}

fn check_vector(vector: &[f32]) -> std::result::Result<(), String> {
    if vector.is_empty() {
        return Err("empty vector".into());
    }
    if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
        return Err(format!("component {i} is not finite"));
    }
    if vector.iter().all(|&v| v == 0.0) {
        return Err("zero vector".into());
    }
    Ok(())
}

/// Parse JSON-lines embeddings.
///
/// The first valid vector of each kind fixes that kind's dimensionality;
/// later vectors of another length are rejected, as are zero or
/// non-finite vectors.
pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<Parsed<EmbeddingRecord>> {
    let mut out = Parsed::default();
    let mut dims: HashMap<EmbeddingKind, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(err) => {
                out.ledger.push(lineno, IssueKind::Malformed, err.to_string());
                continue;
            }
        };
        if let Err(msg) = accept(&rec, &mut dims) {
            out.ledger.push(lineno, IssueKind::Invalid, msg);
            continue;
        }
        out.records.push(rec);
    }
    Ok(out)
}

fn accept(
    rec: &EmbeddingRecord,
    dims: &mut HashMap<EmbeddingKind, usize>,
) -> std::result::Result<(), String> {
    if rec.post_id.is_empty() {
        return Err("empty post_id".into());
    }
    check_vector(&rec.vector).map_err(|m| format!("post {:?}: {m}", rec.post_id))?;
    let dim = *dims.entry(rec.kind).or_insert(rec.vector.len());
    if dim != rec.vector.len() {
        return Err(format!(
            "post {:?}: {} vector has dimension {}, expected {dim}",
            rec.post_id,
            rec.kind.as_str(),
            rec.vector.len()
        ));
    }
    Ok(())
}

pub fn write_embeddings_jsonl<W: Write>(mut writer: W, records: &[EmbeddingRecord]) -> Result<()> {
    for rec in records {
        serde_json::to_writer(&mut writer, rec)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Write the packed binary format: `CNEB`, `u32` dimension, then per
/// record a `u16` id length, the id bytes and `dim` little-endian `f32`s.
/// All integers are little-endian. The file carries a single kind.
pub fn write_packed_embeddings<W: Write>(mut writer: W, records: &[EmbeddingRecord]) -> Result<()> {
    let dim = records.first().map_or(0, |r| r.vector.len());
    writer.write_all(PACKED_MAGIC)?;
    writer.write_all(&(dim as u32).to_le_bytes())?;
    for rec in records {
        if rec.vector.len() != dim {
            return Err(Error::data(format!(
                "post {:?} has dimension {}, expected {dim}",
                rec.post_id,
                rec.vector.len()
            )));
        }
        let id = rec.post_id.as_bytes();
        let len = u16::try_from(id.len())
            .map_err(|_| Error::data(format!("post id too long ({} bytes)", id.len())))?;
        writer.write_all(&len.to_le_bytes())?;
        writer.write_all(id)?;
        for v in &rec.vector {
            writer.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read the packed binary format, tagging every record with `kind`.
///
/// A bad header or a truncated record is fatal; per-record value problems
/// (zero or non-finite vectors, non-UTF-8 ids) are ledgered by record index.
pub fn read_packed_embeddings<R: Read>(
    mut reader: R,
    kind: EmbeddingKind,
) -> Result<Parsed<EmbeddingRecord>> {
    let mut header = [0u8; 8];
    read_exact_or(&mut reader, &mut header, "header")?;
    if &header[..4] != PACKED_MAGIC {
        return Err(Error::data("bad magic: not a packed embedding file"));
    }
    let dim = u32::from_le_bytes([header[4], header[5], header[6], header[7]]) as usize;
    if dim == 0 {
        // An empty file written without records carries dimension 0.
        let mut probe = [0u8; 1];
        if read_exact_or_eof(&mut reader, &mut probe)? {
            return Err(Error::data("packed embedding dimension is zero"));
        }
        return Ok(Parsed::default());
    }
    // Guard against absurd allocations from corrupt headers.
    if dim > 1 << 20 {
        return Err(Error::data(format!("packed embedding dimension {dim} is too large")));
    }
    let mut out = Parsed {
        records: Vec::new(),
        ledger: Ledger::default(),
    };
    let mut body = vec![0u8; dim * 4];
    let mut index = 0usize;
    loop {
        let mut len_buf = [0u8; 2];
        match read_exact_or_eof(&mut reader, &mut len_buf)? {
            false => break,
            true => {}
        }
        index += 1;
        let len = u16::from_le_bytes(len_buf) as usize;
        let mut id = vec![0u8; len];
        read_exact_or(&mut reader, &mut id, "record id")?;
        read_exact_or(&mut reader, &mut body, "record vector")?;
        let vector: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let post_id = match String::from_utf8(id) {
            Ok(s) if !s.is_empty() => s,
            _ => {
                out.ledger
                    .push(index, IssueKind::Invalid, "post id is empty or not UTF-8");
                continue;
            }
        };
        if let Err(msg) = check_vector(&vector) {
            out.ledger
                .push(index, IssueKind::Invalid, format!("post {post_id:?}: {msg}"));
            continue;
        }
        out.records.push(EmbeddingRecord {
            post_id,
            kind,
            vector,
        });
    }
    Ok(out)
}

fn read_exact_or<R: Read>(reader: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    reader.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::data(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

/// Fills `buf`, returning `false` on a clean EOF before the first byte.
fn read_exact_or_eof<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => return Err(Error::data("truncated record header")),
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn jsonl_validation() {
        let input = r#"{"post_id":"p1","kind":"speech","vector":[1.0,0.0]}
{"post_id":"p2","kind":"speech","vector":[0.0,0.0]}
{"post_id":"p3","kind":"speech","vector":[1.0,2.0,3.0]}
{"post_id":"p4","kind":"video","vector":[1.0,2.0,3.0]}
{"post_id":"p5","kind":"bogus","vector":[1.0]}"#;
        let parsed = parse_embeddings(input.as_bytes()).unwrap();
        let ids: Vec<_> = parsed.records.iter().map(|r| r.post_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p4"]);
        assert_eq!(parsed.ledger.lines(), [2, 3, 5]);
        assert!(parsed.ledger.issues[1].message.contains("p3"));
    }

    #[test]
    fn packed_rejects_bad_magic_and_truncation() {
        assert!(read_packed_embeddings(&b"NOPE\x02\x00\x00\x00"[..], EmbeddingKind::Video).is_err());
        let recs = vec![EmbeddingRecord {
            post_id: "p".into(),
            kind: EmbeddingKind::Video,
            vector: vec![1.0, 2.0],
        }];
        let mut buf = Vec::new();
        write_packed_embeddings(&mut buf, &recs).unwrap();
        buf.pop();
        assert!(matches!(
            read_packed_embeddings(&buf[..], EmbeddingKind::Video),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn packed_ledgers_zero_vectors() {
        let recs = vec![
            EmbeddingRecord {
                post_id: "a".into(),
                kind: EmbeddingKind::Speech,
                vector: vec![0.0, 0.0],
            },
            EmbeddingRecord {
                post_id: "b".into(),
                kind: EmbeddingKind::Speech,
                vector: vec![0.5, 0.0],
            },
        ];
        let mut buf = Vec::new();
        write_packed_embeddings(&mut buf, &recs).unwrap();
        let parsed = read_packed_embeddings(&buf[..], EmbeddingKind::Speech).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.ledger.lines(), [1]);
    }

    proptest! {
        #[test]
        fn packed_round_trip(
            dim in 1usize..8,
            rows in prop::collection::vec(("[a-z0-9]{1,12}", prop::collection::vec(0.1f32..10.0, 8)), 0..20),
        ) {
            let recs: Vec<EmbeddingRecord> = rows
                .into_iter()
                .map(|(id, v)| EmbeddingRecord { post_id: id, kind: EmbeddingKind::Video, vector: v[..dim].to_vec() })
                .collect();
            let mut buf = Vec::new();
            write_packed_embeddings(&mut buf, &recs).unwrap();
            let back = read_packed_embeddings(&buf[..], EmbeddingKind::Video).unwrap();
            prop_assert!(back.ledger.is_empty());
            prop_assert_eq!(back.records, recs);
        }
    }
}
