//! Export of latent syntactic structures: one record per token holding the
//! sentence id, the token index and `[c_i; h_i]`.
//!
//! Text layout: `sentence<TAB>token<TAB>v1 v2 ... vk`, one record per line.
//! Floats use the shortest representation that parses back to the same
//! bits.
//!
//! Binary layout (little endian): magic `LSS1`, `u32` vector width, then
//! per record `u32` sentence, `u32` token and `width` × `f64`.

use std::io::{self, BufRead, Read, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::model::{latent_structure, LhrModel};
use crate::treebank::Sentence;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"LSS1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LssFormat {
    Text,
    Binary,
}

impl FromStr for LssFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(LssFormat::Text),
            "binary" => Ok(LssFormat::Binary),
            other => Err(Error::Config(format!("unknown LSS format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LssRecord {
    /// 1-based sentence position in the input.
    pub sentence: u32,
    /// 1-based token index.
    pub token: u32,
    pub values: Vec<f64>,
}

/// Records for every token of `sentences`, in input order.
pub fn export_records(model: &LhrModel, sentences: &[Sentence]) -> Result<Vec<LssRecord>> {
    let per_sentence = sentences
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let enc = model.encode_sentence(s)?;
            Ok(latent_structure(&enc)
                .into_iter()
                .enumerate()
                .map(|(i, v)| LssRecord {
                    sentence: k as u32 + 1,
                    token: i as u32 + 1,
                    values: v.into_data(),
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_sentence.into_iter().flatten().collect())
}

pub fn write<W: Write>(w: W, format: LssFormat, records: &[LssRecord]) -> Result<()> {
    match format {
        LssFormat::Text => write_text(w, records),
        LssFormat::Binary => write_binary(w, records),
    }
}

pub fn read<R: BufRead>(r: R, format: LssFormat) -> Result<Vec<LssRecord>> {
    match format {
        LssFormat::Text => read_text(r),
        LssFormat::Binary => read_binary(r),
    }
}

pub fn write_text<W: Write>(mut w: W, records: &[LssRecord]) -> Result<()> {
    for r in records {
        write!(w, "{}\t{}\t", r.sentence, r.token)?;
        for (k, v) in r.values.iter().enumerate() {
            if k > 0 {
                w.write_all(b" ")?;
            }
            write!(w, "{v:?}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_text<R: BufRead>(r: R) -> Result<Vec<LssRecord>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::InvalidInput(format!("LSS line {}: {msg}", n + 1));
        let mut parts = line.splitn(3, '\t');
        let sentence = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("sentence id"))?;
        let token = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("token index"))?;
        let values = parts
            .next()
            .ok_or_else(|| bad("missing vector"))?
            .split(' ')
            .map(|v| v.parse::<f64>().map_err(|_| bad("invalid value")))
            .collect::<Result<Vec<_>>>()?;
        out.push(LssRecord {
            sentence,
            token,
            values,
        });
    }
    Ok(out)
}

pub fn write_binary<W: Write>(mut w: W, records: &[LssRecord]) -> Result<()> {
    let width = records.first().map_or(0, |r| r.values.len());
    if records.iter().any(|r| r.values.len() != width) {
        return Err(Error::InvalidInput("LSS records differ in width".into()));
    }
    w.write_all(MAGIC)?;
    w.write_all(&(width as u32).to_le_bytes())?;
    for r in records {
        w.write_all(&r.sentence.to_le_bytes())?;
        w.write_all(&r.token.to_le_bytes())?;
        for v in &r.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 if filled == 0 => return Ok(false),
            0 => return Err(Error::Io(io::Error::from(io::ErrorKind::UnexpectedEof))),
            k => filled += k,
        }
    }
    Ok(true)
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Vec<LssRecord>> {
    let mut header = [0u8; 8];
    if !read_exact_or_eof(&mut r, &mut header)? || &header[..4] != MAGIC {
        return Err(Error::InvalidInput("not a binary LSS file".into()));
    }
    let width = u32::from_le_bytes(header[4..].try_into().unwrap()) as usize;
    let mut out = Vec::new();
    let mut ids = [0u8; 8];
    while read_exact_or_eof(&mut r, &mut ids)? {
        let mut raw = vec![0u8; 8 * width];
        r.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(LssRecord {
            sentence: u32::from_le_bytes(ids[..4].try_into().unwrap()),
            token: u32::from_le_bytes(ids[4..].try_into().unwrap()),
            values,
        });
    }
    Ok(out)
}
