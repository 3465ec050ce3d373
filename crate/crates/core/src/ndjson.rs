//! Line-oriented readers with per-line rejection accounting.
//!
//! Every input line is either accepted or rejected, never silently dropped,
//! so `accepted + rejected` always equals the number of lines read.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Why a line was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum RejectReason {
    /// Not valid UTF-8, not JSON, or the wrong JSON shape.
    Malformed(String),
    MissingField(String),
    /// Parsed but violates a record invariant.
    Invalid(String),
    Duplicate(String),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::Malformed(m) => write!(f, "malformed: {m}"),
            RejectReason::MissingField(m) => write!(f, "missing field {m}"),
            RejectReason::Invalid(m) => write!(f, "invalid: {m}"),
            RejectReason::Duplicate(m) => write!(f, "duplicate: {m}"),
        }
    }
}

/// A rejected line, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: RejectReason,
}

/// Accepted records plus the rejects seen on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejections: Vec<Rejection>,
    pub lines: usize,
}

impl<T> Parsed<T> {
    pub fn accepted(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Rejected { line: usize, reason: RejectReason },
}

fn classify_json_error(err: serde_json::Error) -> RejectReason {
    let msg = err.to_string();
    if let Some(rest) = msg.strip_prefix("missing field ") {
        let field = rest.split(' ').next().unwrap_or(rest).trim_matches('`');
        RejectReason::MissingField(field.to_string())
    } else {
        RejectReason::Malformed(msg)
    }
}

/// Reads raw lines (without the trailing `\n` / `\r\n`), handing each to
/// `parse`. Non-UTF-8 lines are rejected as malformed. In strict mode the
/// first rejection aborts with [`ReadError::Rejected`].
pub fn read_lines<T, R, F>(mut reader: R, strict: bool, mut parse: F) -> Result<Parsed<T>, ReadError>
where
    R: BufRead,
    F: FnMut(&str) -> Result<T, RejectReason>,
{
    let mut out = Parsed {
        records: Vec::new(),
        rejections: Vec::new(),
        lines: 0,
    };
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        out.lines += 1;
        let line_no = out.lines;
        if buf.last() == Some(&b'\n') {
            buf.pop();
            if buf.last() == Some(&b'\r') {
                buf.pop();
            }
        }
        let result = match std::str::from_utf8(&buf) {
            Ok(s) if s.trim().is_empty() => Err(RejectReason::Malformed("empty line".into())),
            Ok(s) => parse(s),
            Err(e) => Err(RejectReason::Malformed(format!("invalid utf-8: {e}"))),
        };
        match result {
            Ok(rec) => out.records.push(rec),
            Err(reason) => {
                if strict {
                    return Err(ReadError::Rejected {
                        line: line_no,
                        reason,
                    });
                }
                log::warn!("line {line_no} skipped: {reason}");
                out.rejections.push(Rejection {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    Ok(out)
}

/// Reads NDJSON records of type `D`, then runs `validate` on each.
pub fn read_ndjson<D, T, R, F>(reader: R, strict: bool, mut validate: F) -> Result<Parsed<T>, ReadError>
where
    D: DeserializeOwned,
    R: BufRead,
    F: FnMut(D) -> Result<T, RejectReason>,
{
    read_lines(reader, strict, |line| {
        let raw: D = serde_json::from_str(line).map_err(classify_json_error)?;
        validate(raw)
    })
}

/// Writes one compact JSON object per line.
pub fn write_ndjson<T: Serialize, W: Write>(mut w: W, records: impl IntoIterator<Item = T>) -> io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Identifiers may arrive as JSON strings or integers; both become strings.
pub(crate) mod id {
    use serde::de::{self, Deserializer, Visitor};
    use std::fmt;

    struct IdVisitor;

    impl Visitor<'_> for IdVisitor {
        type Value = String;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a string or integer identifier")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<String, E> {
            Ok(v.to_string())
        }

        fn visit_string<E: de::Error>(self, v: String) -> Result<String, E> {
            Ok(v)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<String, E> {
            Ok(v.to_string())
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<String, E> {
            Ok(v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
        d.deserialize_any(IdVisitor)
    }

    pub mod list {
        use super::IdVisitor;
        use serde::de::{Deserializer, SeqAccess, Visitor};
        use std::fmt;

        struct Wrap(String);

        impl<'de> serde::Deserialize<'de> for Wrap {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                d.deserialize_any(IdVisitor).map(Wrap)
            }
        }

        struct ListVisitor;

        impl<'de> Visitor<'de> for ListVisitor {
            type Value = Vec<String>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array of identifiers")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Vec<String>, A::Error> {
                let mut out = Vec::new();
                while let Some(Wrap(s)) = seq.next_element()? {
                    out.push(s);
                }
                Ok(out)
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
            d.deserialize_seq(ListVisitor)
        }
    }
}
