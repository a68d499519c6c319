//! JSON-lines annotation files and plain-text unlabeled files.
//!
//! Annotation files hold one document per line:
//!
//! ```text
//! {"id":"d1","domain":"source","text":"Denies fever.","sentences":[
//!   {"token_ranges":[[0,6],[7,12],[12,13]],
//!    "entities":[{"id":"T1","type":"SSx","subtype":null,"start":1,"end":2}],
//!    "relations":[]}]}
//! ```
//!
//! Token ranges are byte offsets into `text`; entity `start`/`end` are token
//! indices within the sentence. A sentence without an `entities` key carries
//! no gold annotation. Unlabeled files hold one document per line with the
//! domain tag as the first whitespace-delimited field.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnotatedCorpus, Document, Gold, Sentence, Token, Vocab};
use crate::error::{Error, Result};
use crate::schema::{Entity, EntityType, Relation, Severity, Span, Subtype};

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    id: String,
    domain: String,
    text: String,
    sentences: Vec<SentenceRecord>,
}

#[derive(Serialize, Deserialize)]
struct SentenceRecord {
    token_ranges: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entities: Option<Vec<EntityRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relations: Option<Vec<Relation>>,
}

#[derive(Serialize, Deserialize)]
struct EntityRecord {
    id: String,
    #[serde(rename = "type")]
    kind: EntityType,
    subtype: Option<Subtype>,
    start: usize,
    end: usize,
}

fn to_record(doc: &Document) -> DocumentRecord {
    DocumentRecord {
        id: doc.id.clone(),
        domain: doc.domain.clone(),
        text: doc.text.clone(),
        sentences: doc
            .sentences
            .iter()
            .map(|s| SentenceRecord {
                token_ranges: s
                    .tokens
                    .iter()
                    .map(|t| (t.char_range.start, t.char_range.end))
                    .collect(),
                entities: s.gold.as_ref().map(|g| {
                    g.entities
                        .iter()
                        .map(|e| EntityRecord {
                            id: e.id.clone(),
                            kind: e.kind,
                            subtype: e.subtype,
                            start: e.span.start,
                            end: e.span.end,
                        })
                        .collect()
                }),
                relations: s.gold.as_ref().map(|g| g.relations.clone()),
            })
            .collect(),
    }
}

fn from_record(rec: DocumentRecord) -> std::result::Result<Document, String> {
    let mut sentences = Vec::with_capacity(rec.sentences.len());
    for (si, s) in rec.sentences.into_iter().enumerate() {
        let mut tokens = Vec::with_capacity(s.token_ranges.len());
        for (start, end) in s.token_ranges {
            let surface = rec
                .text
                .get(start..end)
                .ok_or_else(|| format!("sentence {si}: token range {start}..{end} is not a slice of the text"))?
                .to_lowercase();
            tokens.push(Token {
                surface,
                vocab_id: Vocab::UNK,
                char_range: start..end,
            });
        }
        let gold = match (s.entities, s.relations) {
            (None, None) => None,
            (entities, relations) => Some(Gold {
                entities: entities
                    .unwrap_or_default()
                    .into_iter()
                    .map(|e| Entity::new(e.id, e.kind, e.subtype, Span::new(e.start, e.end)))
                    .collect(),
                relations: relations.unwrap_or_default(),
            }),
        };
        sentences.push(Sentence { tokens, gold });
    }
    Ok(Document {
        id: rec.id,
        text: rec.text,
        domain: rec.domain,
        sentences,
    })
}

/// Parses annotation JSON lines. `path` only labels error messages.
pub fn parse_corpus<R: BufRead>(reader: R, path: &Path) -> Result<AnnotatedCorpus> {
    let mut documents = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let rec: DocumentRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let doc = from_record(rec).map_err(parse_err)?;
        if let Some(v) = doc.validate().into_iter().find(|v| v.severity == Severity::Error) {
            return Err(Error::InvalidRecord {
                path: path.to_path_buf(),
                line: line_no,
                message: v.to_string(),
            });
        }
        documents.push(doc);
    }
    Ok(AnnotatedCorpus { documents })
}

pub fn load_corpus(path: &Path) -> Result<AnnotatedCorpus> {
    let f = std::fs::File::open(path)?;
    parse_corpus(BufReader::new(f), path)
}

pub fn write_corpus<W: Write>(corpus: &AnnotatedCorpus, mut w: W) -> Result<()> {
    for doc in &corpus.documents {
        let line = serde_json::to_string(&to_record(doc)).expect("records always serialize");
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_corpus(corpus: &AnnotatedCorpus, path: &Path) -> Result<()> {
    write_corpus(corpus, BufWriter::new(std::fs::File::create(path)?))
}

/// Reads `<domain> <text>` lines into unannotated documents. Document ids
/// are `<file stem>:<line>`.
pub fn load_unlabeled(path: &Path) -> Result<Vec<Document>> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (domain, text) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        out.push(Document::from_text(format!("{stem}:{}", i + 1), domain, text.trim_start()));
    }
    Ok(out)
}

pub fn save_unlabeled(documents: &[Document], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for d in documents {
        let flat = d.text.replace(['\n', '\r'], " ");
        writeln!(w, "{} {}", d.domain, flat)?;
    }
    w.flush()?;
    Ok(())
}
