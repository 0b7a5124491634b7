use std::fs;
use std::io::Write;
use std::path::Path;

use crate::patterns::CONTINUATION_MARKER;

use super::DataError;

/// Words longer than this many characters are split.
const SPLIT_THRESHOLD: usize = 6;
const CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
}

impl SentencePair {
    pub fn new(src: &str, tgt: &str) -> Self {
        Self {
            src: split_sentence(src),
            tgt: split_sentence(tgt),
        }
    }
}

/// Source/reference/contrastive triple with an optional integer attribute
/// used for bucketing (e.g. the corruption position or an agreement
/// distance).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContrastiveItem {
    pub source: Vec<String>,
    pub reference: Vec<String>,
    pub contrastive: Vec<String>,
    pub attribute: Option<i64>,
}

pub fn split_sentence(line: &str) -> Vec<String> {
    line.split_whitespace().map(String::from).collect()
}

/// Deterministic stand-in for BPE: words longer than six characters are
/// cut into four-character chunks, all but the last marked with `@@`.
pub fn toy_subword_split(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() <= SPLIT_THRESHOLD {
        return vec![word.to_string()];
    }
    let chunks: Vec<String> = chars.chunks(CHUNK).map(|c| c.iter().collect()).collect();
    let last = chunks.len() - 1;
    chunks
        .into_iter()
        .enumerate()
        .map(|(i, c)| if i < last { c + CONTINUATION_MARKER } else { c })
        .collect()
}

/// Undo subword splitting: glue `@@`-marked pieces onto the next token.
pub fn join_subwords<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    let mut words = Vec::new();
    let mut pending = String::new();
    for tok in tokens {
        let tok = tok.as_ref();
        match tok.strip_suffix(CONTINUATION_MARKER) {
            Some(stem) => pending.push_str(stem),
            None => {
                pending.push_str(tok);
                words.push(std::mem::take(&mut pending));
            }
        }
    }
    if !pending.is_empty() {
        words.push(pending);
    }
    words
}

/// Read a UTF-8 text file as lines. A trailing newline does not produce an
/// extra empty line; `\r\n` endings are accepted.
pub fn read_lines(path: &Path) -> Result<Vec<String>, DataError> {
    let bytes = fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    body.split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            String::from_utf8(raw.to_vec()).map_err(|_| DataError::Encoding {
                path: path.to_path_buf(),
                line: i + 1,
            })
        })
        .collect()
}

pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<(), DataError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for line in lines {
        out.extend_from_slice(line.as_ref().as_bytes());
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(&out).map_err(io_err)
}

/// Load two aligned files into whitespace-tokenised pairs. Empty lines are
/// kept as empty sentences.
pub fn load_parallel(src: &Path, tgt: &Path) -> Result<Vec<SentencePair>, DataError> {
    let s = read_lines(src)?;
    let t = read_lines(tgt)?;
    if s.len() != t.len() {
        return Err(DataError::Corpus(format!(
            "{} has {} lines but {} has {}",
            src.display(),
            s.len(),
            tgt.display(),
            t.len()
        )));
    }
    Ok(s.iter().zip(&t).map(|(a, b)| SentencePair::new(a, b)).collect())
}

/// Tab-separated `source, reference, contrastive, attribute` lines. An
/// empty attribute field is read as no attribute.
pub fn read_contrastive(path: &Path) -> Result<Vec<ContrastiveItem>, DataError> {
    read_lines(path)?
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            if !(3..=4).contains(&fields.len()) {
                return Err(DataError::Corpus(format!(
                    "{} line {}: expected 4 tab-separated fields, found {}",
                    path.display(),
                    i + 1,
                    fields.len()
                )));
            }
            let attribute = match fields.get(3).map(|f| f.trim()) {
                None | Some("") => None,
                Some(a) => Some(a.parse::<i64>().map_err(|_| {
                    DataError::Corpus(format!("{} line {}: attribute {a:?} is not an integer", path.display(), i + 1))
                })?),
            };
            Ok(ContrastiveItem {
                source: split_sentence(fields[0]),
                reference: split_sentence(fields[1]),
                contrastive: split_sentence(fields[2]),
                attribute,
            })
        })
        .collect()
}

pub fn write_contrastive(path: &Path, items: &[ContrastiveItem]) -> Result<(), DataError> {
    write_lines(
        path,
        items.iter().map(|it| {
            format!(
                "{}\t{}\t{}\t{}",
                it.source.join(" "),
                it.reference.join(" "),
                it.contrastive.join(" "),
                it.attribute.map(|a| a.to_string()).unwrap_or_default()
            )
        }),
    )
}
