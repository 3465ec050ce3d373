//! On-disk layout of a trained index (see `docs/bim-format.md`).
//!
//! ```text
//! "TBIM" | u32 version | u32 header_len | header JSON | body
//! ```
//!
//! All integers are little-endian. Section offsets in the header are relative
//! to the start of the body and the sections tile it exactly.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Cursor, Read};
use std::path::Path;
use std::sync::atomic::AtomicU64;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{BimParams, ParamError, TopicModelIndex};

pub const MAGIC: &[u8; 4] = b"TBIM";
pub const FORMAT_VERSION: u32 = 1;
const PAIR_RECORD_LEN: u64 = 16;
/// Smallest possible string record: u32 length + u64 count.
const MIN_STRING_RECORD_LEN: u64 = 12;
const MAX_HEADER_LEN: u32 = 1 << 20;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a topical BIM index (bad magic)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("bad header: {0}")]
    Header(String),
    #[error("bad {section} section: {detail}")]
    Section { section: &'static str, detail: String },
    #[error("count invariant violated: {0}")]
    Counts(String),
    #[error(transparent)]
    Params(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct SectionRef {
    offset: u64,
    len: u64,
    count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    n: u64,
    delta: f64,
    k: u64,
    nu: Option<usize>,
    entities: SectionRef,
    topics: SectionRef,
    pairs: SectionRef,
}

fn section_err(section: &'static str) -> impl Fn(String) -> FormatError {
    move |detail| FormatError::Section { section, detail }
}

fn encode_strings(names: &[String], counts: &[u64]) -> Vec<u8> {
    let mut out = Vec::new();
    for (name, &c) in names.iter().zip(counts) {
        out.write_u32::<LittleEndian>(name.len() as u32).unwrap();
        out.extend_from_slice(name.as_bytes());
        out.write_u64::<LittleEndian>(c).unwrap();
    }
    out
}

fn decode_strings(section: &'static str, bytes: &[u8], count: u64) -> Result<(Vec<String>, Vec<u64>), FormatError> {
    let err = section_err(section);
    if count > bytes.len() as u64 / MIN_STRING_RECORD_LEN {
        return Err(err(format!("{count} records cannot fit in {} bytes", bytes.len())));
    }
    let mut cur = Cursor::new(bytes);
    let mut names: Vec<String> = Vec::with_capacity(count as usize);
    let mut counts = Vec::with_capacity(count as usize);
    for i in 0..count {
        let len = cur.read_u32::<LittleEndian>().map_err(|e| err(e.to_string()))? as usize;
        let pos = cur.position() as usize;
        let end = pos
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| err(format!("record {i} overruns the section")))?;
        let name = std::str::from_utf8(&bytes[pos..end])
            .map_err(|e| err(format!("record {i}: {e}")))?
            .to_string();
        cur.set_position(end as u64);
        let c = cur.read_u64::<LittleEndian>().map_err(|e| err(e.to_string()))?;
        if c == 0 {
            return Err(err(format!("record {i} has a zero count")));
        }
        if let Some(prev) = names.last() {
            if prev.as_str() >= name.as_str() {
                return Err(err(format!("record {i} is out of order or duplicated")));
            }
        }
        names.push(name);
        counts.push(c);
    }
    if cur.position() as usize != bytes.len() {
        return Err(err("trailing bytes".into()));
    }
    Ok((names, counts))
}

impl TopicModelIndex {
    /// Serializes to the documented layout. Deterministic.
    pub fn to_bytes(&self) -> Vec<u8> {
        let entities = encode_strings(&self.entities, &self.n_e);
        let topics = encode_strings(&self.topics, &self.n_t);
        let mut pairs: Vec<(&(u32, u32), &u64)> = self.n_et.iter().collect();
        pairs.sort();
        let mut pair_bytes = Vec::with_capacity(pairs.len() * PAIR_RECORD_LEN as usize);
        for (&(e, t), &c) in pairs {
            pair_bytes.write_u32::<LittleEndian>(e).unwrap();
            pair_bytes.write_u32::<LittleEndian>(t).unwrap();
            pair_bytes.write_u64::<LittleEndian>(c).unwrap();
        }
        let header = Header {
            n: self.n,
            delta: self.params.delta,
            k: self.params.k,
            nu: self.params.nu,
            entities: SectionRef {
                offset: 0,
                len: entities.len() as u64,
                count: self.entities.len() as u64,
            },
            topics: SectionRef {
                offset: entities.len() as u64,
                len: topics.len() as u64,
                count: self.topics.len() as u64,
            },
            pairs: SectionRef {
                offset: (entities.len() + topics.len()) as u64,
                len: pair_bytes.len() as u64,
                count: self.n_et.len() as u64,
            },
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + header.len() + entities.len() + topics.len() + pair_bytes.len());
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(FORMAT_VERSION).unwrap();
        out.write_u32::<LittleEndian>(header.len() as u32).unwrap();
        out.extend_from_slice(&header);
        out.extend_from_slice(&entities);
        out.extend_from_slice(&topics);
        out.extend_from_slice(&pair_bytes);
        out
    }

    /// Parses and fully validates an encoded index.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 4];
        cur.read_exact(&mut magic).map_err(|_| FormatError::BadMagic)?;
        if &magic != MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = cur.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(FormatError::Version(version));
        }
        let header_len = cur.read_u32::<LittleEndian>()?;
        if header_len > MAX_HEADER_LEN {
            return Err(FormatError::Header(format!("header length {header_len} too large")));
        }
        let start = cur.position() as usize;
        let body_start = start + header_len as usize;
        if body_start > bytes.len() {
            return Err(FormatError::Header("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&bytes[start..body_start])
            .map_err(|e| FormatError::Header(e.to_string()))?;
        let params = BimParams {
            delta: header.delta,
            k: header.k,
            nu: header.nu,
        };
        params.validate()?;
        let body = &bytes[body_start..];

        // Sections must tile the body in order.
        let mut expected = 0u64;
        for (name, s) in [
            ("entities", header.entities),
            ("topics", header.topics),
            ("pairs", header.pairs),
        ] {
            if s.offset != expected {
                return Err(FormatError::Header(format!("{name} section at {}, expected {expected}", s.offset)));
            }
            expected = s
                .offset
                .checked_add(s.len)
                .ok_or_else(|| FormatError::Header(format!("{name} section length overflows")))?;
        }
        if expected != body.len() as u64 {
            return Err(FormatError::Header(format!(
                "sections cover {expected} bytes, body has {}",
                body.len()
            )));
        }
        let slice = |s: SectionRef| &body[s.offset as usize..(s.offset + s.len) as usize];

        let (entities, n_e) = decode_strings("entities", slice(header.entities), header.entities.count)?;
        let (topics, n_t) = decode_strings("topics", slice(header.topics), header.topics.count)?;
        if let Some((e, c)) = entities.iter().zip(&n_e).find(|(_, &c)| c > header.n) {
            return Err(FormatError::Counts(format!("n_e({e:?}) = {c} exceeds n = {}", header.n)));
        }
        if let Some((t, c)) = topics.iter().zip(&n_t).find(|(_, &c)| c > header.n) {
            return Err(FormatError::Counts(format!("n_t({t:?}) = {c} exceeds n = {}", header.n)));
        }

        let pair_bytes = slice(header.pairs);
        let perr = section_err("pairs");
        if header.pairs.count.checked_mul(PAIR_RECORD_LEN) != Some(pair_bytes.len() as u64) {
            return Err(perr(format!(
                "{} records need {} bytes, found {}",
                header.pairs.count,
                header.pairs.count.saturating_mul(PAIR_RECORD_LEN),
                pair_bytes.len()
            )));
        }
        let mut n_et = HashMap::with_capacity(header.pairs.count as usize);
        let mut prev: Option<(u32, u32)> = None;
        let mut pc = Cursor::new(pair_bytes);
        for _ in 0..header.pairs.count {
            let e = pc.read_u32::<LittleEndian>()?;
            let t = pc.read_u32::<LittleEndian>()?;
            let c = pc.read_u64::<LittleEndian>()?;
            if e as usize >= entities.len() || t as usize >= topics.len() {
                return Err(perr(format!("pair ({e}, {t}) out of range")));
            }
            if prev.is_some_and(|p| p >= (e, t)) {
                return Err(perr(format!("pair ({e}, {t}) out of order or duplicated")));
            }
            prev = Some((e, t));
            let cap = n_e[e as usize].min(n_t[t as usize]);
            if c == 0 || c > cap {
                return Err(FormatError::Counts(format!(
                    "n_et({:?}, {:?}) = {c} outside 1..={cap}",
                    entities[e as usize], topics[t as usize]
                )));
            }
            n_et.insert((e, t), c);
        }

        let entity_ids = entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i as u32))
            .collect();
        let topic_ids = topics
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(TopicModelIndex {
            params,
            n: header.n,
            entity_ids,
            entities,
            n_e,
            topic_ids,
            topics,
            n_t,
            n_et,
            log_factors: Vec::new(),
            lookups: AtomicU64::new(0),
        }
        .with_factor_tables())
    }

    pub fn write_to(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_bytes())
    }

    pub fn open(path: &Path) -> Result<Self, FormatError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
