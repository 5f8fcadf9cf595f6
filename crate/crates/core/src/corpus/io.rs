//! Binary embedding files and the TSV side files.
//!
//! Embedding file layout, all little-endian:
//!
//! ```text
//! "TPCL" | version u32 = 1 | r u32 | doc_count u64 | token_count u64
//! per document: doc_id u64 | n_tokens u32
//!     per token: word_id u32 | pos_class u8 | r × f32
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Corpus, Document, PosClass, VocabEntry, Vocabulary};
use crate::error::FormatError;

pub const EMBEDDING_MAGIC: [u8; 4] = *b"TPCL";
pub const EMBEDDING_VERSION: u32 = 1;

const HEADER_LEN: u64 = 4 + 4 + 4 + 8 + 8;

/// Reader that tracks its byte offset and knows how many bytes remain, so
/// every failure can name where it happened.
struct OffsetReader<R> {
    inner: R,
    offset: u64,
    len: u64,
}

impl<R: Read> OffsetReader<R> {
    fn read_array<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], FormatError> {
        let mut buf = [0u8; N];
        self.fill(&mut buf, what)?;
        Ok(buf)
    }

    fn fill(&mut self, buf: &mut [u8], what: &'static str) -> Result<(), FormatError> {
        let needed = buf.len() as u64;
        let available = self.len.saturating_sub(self.offset);
        if needed > available {
            return Err(FormatError::Truncated {
                what,
                offset: self.offset,
                needed,
                available,
            });
        }
        self.inner
            .read_exact(buf)
            .map_err(|_| FormatError::Truncated {
                what,
                offset: self.offset,
                needed,
                available,
            })?;
        self.offset += needed;
        Ok(())
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, FormatError> {
        Ok(self.read_array::<1>(what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.read_array(what)?))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.read_array(what)?))
    }
}

/// Parses an embedding stream of `len` bytes against a vocabulary of
/// `vocab_size` words.
fn parse_embeddings<R: Read>(
    reader: R,
    len: u64,
    vocabulary: Vocabulary,
) -> Result<Corpus, FormatError> {
    let mut r = OffsetReader {
        inner: reader,
        offset: 0,
        len,
    };
    let magic = r.read_array::<4>("magic")?;
    if magic != EMBEDDING_MAGIC {
        return Err(FormatError::BadMagic {
            offset: 0,
            expected: EMBEDDING_MAGIC,
            found: magic,
        });
    }
    let version_offset = r.offset;
    let version = r.u32("header")?;
    if version != EMBEDDING_VERSION {
        return Err(FormatError::UnsupportedVersion {
            offset: version_offset,
            version,
        });
    }
    let dim_offset = r.offset;
    let dim = r.u32("header")? as usize;
    if dim == 0 {
        return Err(FormatError::Header {
            offset: dim_offset,
            reason: "embedding dimension r must be positive".into(),
        });
    }
    let doc_count = r.u64("header")?;
    let token_count_offset = r.offset;
    let token_count = r.u64("header")?;
    if token_count == 0 {
        return Err(FormatError::Header {
            offset: token_count_offset,
            reason: "token_count must be positive".into(),
        });
    }
    // The header fixes the exact file size; a shorter file is missing data.
    let expected = doc_count
        .checked_mul(12)
        .and_then(|d| token_count.checked_mul(5 + 4 * dim as u64).and_then(|t| t.checked_add(d)))
        .and_then(|body| body.checked_add(HEADER_LEN));
    match expected {
        Some(expected) if len < expected => {
            return Err(FormatError::Truncated {
                what: "records",
                offset: HEADER_LEN,
                needed: expected - HEADER_LEN,
                available: len - HEADER_LEN,
            });
        }
        None => {
            return Err(FormatError::Header {
                offset: token_count_offset,
                reason: "declared sizes overflow".into(),
            });
        }
        _ => {}
    }
    let n = token_count as usize;
    // Never trust the header for allocation sizes; truncation is detected while streaming.
    let fits = (len.saturating_sub(HEADER_LEN) / (5 + 4 * dim as u64)) as usize;
    let mut documents = Vec::with_capacity((doc_count as usize).min(fits));
    let mut word_ids = Vec::with_capacity(n.min(fits));
    let mut pos = Vec::with_capacity(n.min(fits));
    let mut flat = Vec::with_capacity(n.min(fits) * dim);
    let mut values = vec![0u8; 4 * dim];
    for _ in 0..doc_count {
        let doc_offset = r.offset;
        let doc_id = r.u64("document header")?;
        let n_tokens = r.u32("document header")? as usize;
        if n_tokens == 0 {
            return Err(FormatError::Record {
                offset: doc_offset,
                reason: format!("document {doc_id} has no tokens"),
            });
        }
        if word_ids.len() + n_tokens > n {
            return Err(FormatError::Record {
                offset: doc_offset,
                reason: format!(
                    "document {doc_id} exceeds the declared token_count {token_count}"
                ),
            });
        }
        documents.push(Document {
            doc_id,
            start: word_ids.len(),
            len: n_tokens,
        });
        for _ in 0..n_tokens {
            let token_offset = r.offset;
            let word_id = r.u32("token record")?;
            if word_id as usize >= vocabulary.len() {
                return Err(FormatError::WordOutOfRange {
                    offset: token_offset,
                    word_id,
                    vocab_size: vocabulary.len(),
                });
            }
            let pos_offset = r.offset;
            let class = r.u8("token record")?;
            let class = PosClass::from_byte(class).ok_or_else(|| FormatError::Record {
                offset: pos_offset,
                reason: format!("unknown pos_class {class}"),
            })?;
            let values_offset = r.offset;
            r.fill(&mut values, "token embedding")?;
            for chunk in values.chunks_exact(4) {
                let v = f32::from_le_bytes(chunk.try_into().expect("chunk of 4"));
                if !v.is_finite() {
                    return Err(FormatError::Record {
                        offset: values_offset,
                        reason: "non-finite embedding value".into(),
                    });
                }
                flat.push(f64::from(v));
            }
            word_ids.push(word_id);
            pos.push(class);
        }
    }
    if word_ids.len() != n {
        return Err(FormatError::Record {
            offset: r.offset,
            reason: format!(
                "documents hold {} tokens but the header declares {token_count}",
                word_ids.len()
            ),
        });
    }
    if r.offset != len {
        return Err(FormatError::TrailingBytes {
            offset: r.offset,
            trailing: len - r.offset,
        });
    }
    let embeddings = Array2::from_shape_vec((n, dim), flat).expect("sized from header");
    Ok(Corpus::from_parts(
        dim, documents, word_ids, pos, embeddings, vocabulary,
    ))
}

/// Decodes an in-memory embedding file.
pub fn decode_embeddings(bytes: &[u8], vocabulary: Vocabulary) -> Result<Corpus, FormatError> {
    parse_embeddings(bytes, bytes.len() as u64, vocabulary)
}

/// Serializes the corpus embeddings in the binary format. Values are narrowed
/// back to `f32`, which is exact for anything that was loaded from a file.
pub fn encode_embeddings(corpus: &Corpus) -> Vec<u8> {
    let mut out = Vec::with_capacity(
        HEADER_LEN as usize
            + corpus.num_documents() * 12
            + corpus.num_tokens() * (5 + 4 * corpus.dim()),
    );
    write_embeddings_to(&mut out, corpus).expect("writing to a Vec cannot fail");
    out
}

fn write_embeddings_to<W: Write>(w: &mut W, corpus: &Corpus) -> std::io::Result<()> {
    w.write_all(&EMBEDDING_MAGIC)?;
    w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
    w.write_all(&(corpus.dim() as u32).to_le_bytes())?;
    w.write_all(&(corpus.num_documents() as u64).to_le_bytes())?;
    w.write_all(&(corpus.num_tokens() as u64).to_le_bytes())?;
    let emb = corpus.embeddings();
    for doc in corpus.documents() {
        w.write_all(&doc.doc_id.to_le_bytes())?;
        w.write_all(&(doc.len as u32).to_le_bytes())?;
        for t in doc.range() {
            w.write_all(&corpus.word_ids()[t].to_le_bytes())?;
            w.write_all(&[corpus.pos_classes()[t] as u8])?;
            for &v in emb.row(t) {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn write_embeddings(path: &Path, corpus: &Corpus) -> Result<(), FormatError> {
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_embeddings_to(&mut w, corpus)
        .and_then(|_| w.flush())
        .map_err(|e| FormatError::io(path, e))
}

/// Reads a `word_id<TAB>surface<TAB>frequency` file. Ids must be dense and in order.
pub fn read_vocabulary(path: &Path) -> Result<Vocabulary, FormatError> {
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| FormatError::io(path, e))?;
        let mut fields = line.split('\t');
        let (Some(id), Some(surface), Some(freq), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(FormatError::Tsv {
                line: line_no,
                reason: "expected 3 tab-separated fields".into(),
            });
        };
        let id: usize = id.parse().map_err(|_| FormatError::Tsv {
            line: line_no,
            reason: format!("bad word_id {id:?}"),
        })?;
        if id != entries.len() {
            return Err(FormatError::Tsv {
                line: line_no,
                reason: format!("word_id {id} out of sequence, expected {}", entries.len()),
            });
        }
        let frequency: u64 = freq.parse().map_err(|_| FormatError::Tsv {
            line: line_no,
            reason: format!("bad frequency {freq:?}"),
        })?;
        entries.push(VocabEntry {
            surface: surface.to_owned(),
            frequency,
        });
    }
    Vocabulary::new(entries)
}

pub fn write_vocabulary(path: &Path, vocabulary: &Vocabulary) -> Result<(), FormatError> {
    let mut out = String::new();
    for (i, e) in vocabulary.entries().iter().enumerate() {
        out.push_str(&format!("{i}\t{}\t{}\n", e.surface, e.frequency));
    }
    fs::write(path, out).map_err(|e| FormatError::io(path, e))
}

/// Loads an embedding file together with its vocabulary.
pub fn load_corpus(embedding_path: &Path, vocab_path: &Path) -> Result<Corpus, FormatError> {
    let vocabulary = read_vocabulary(vocab_path)?;
    let file = File::open(embedding_path).map_err(|e| FormatError::io(embedding_path, e))?;
    let len = file
        .metadata()
        .map_err(|e| FormatError::io(embedding_path, e))?
        .len();
    parse_embeddings(BufReader::new(file), len, vocabulary)
}

/// Reads a `doc_id<TAB>label` file, preserving file order.
pub fn read_labels(path: &Path) -> Result<Vec<(u64, String)>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut seen = std::collections::HashSet::new();
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some((id, label)) = line.split_once('\t') else {
            return Err(FormatError::Tsv {
                line: i + 1,
                reason: "expected doc_id<TAB>label".into(),
            });
        };
        let id: u64 = id.parse().map_err(|_| FormatError::Tsv {
            line: i + 1,
            reason: format!("bad doc_id {id:?}"),
        })?;
        if !seen.insert(id) {
            return Err(FormatError::Tsv {
                line: i + 1,
                reason: format!("duplicate doc_id {id}"),
            });
        }
        labels.push((id, label.to_owned()));
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenRecord;

    fn tiny() -> Corpus {
        let vocab = Vocabulary::from_surfaces(["good", "food"]).unwrap();
        Corpus::from_documents(
            4,
            vec![(
                17,
                vec![
                    TokenRecord {
                        word_id: 0,
                        pos: PosClass::Adjective,
                        embedding: vec![0.5, -1.0, 2.25, 0.0],
                    },
                    TokenRecord {
                        word_id: 1,
                        pos: PosClass::Noun,
                        embedding: vec![1.0, 2.0, 3.0, 4.0],
                    },
                ],
            )],
            vocab,
        )
        .unwrap()
    }

    #[test]
    fn header_is_echoed() {
        let c = tiny();
        let bytes = encode_embeddings(&c);
        let back = decode_embeddings(&bytes, c.vocabulary().clone()).unwrap();
        assert_eq!(back.num_tokens(), 2);
        assert_eq!(back.num_documents(), 1);
        assert_eq!(back.document(0).unwrap().len, 2);
        assert_eq!(back.dim(), 4);
        assert_eq!(encode_embeddings(&back), bytes);
    }

    #[test]
    fn altered_magic_fails_at_offset_zero() {
        let c = tiny();
        let mut bytes = encode_embeddings(&c);
        bytes[1] = b'X';
        let err = decode_embeddings(&bytes, c.vocabulary().clone()).unwrap_err();
        assert!(matches!(err, FormatError::BadMagic { offset: 0, .. }), "{err}");
    }

    #[test]
    fn short_record_is_truncation() {
        let c = tiny();
        let mut bytes = encode_embeddings(&c);
        bytes.truncate(bytes.len() - 4);
        let err = decode_embeddings(&bytes, c.vocabulary().clone()).unwrap_err();
        assert!(matches!(err, FormatError::Truncated { .. }), "{err}");
    }

    #[test]
    fn missing_value_mid_file_is_truncation() {
        // Two documents; the first token's embedding loses one value so every
        // later record shifts and the stream runs short.
        let vocab = Vocabulary::from_surfaces(["a"]).unwrap();
        let rec = |v: f64| TokenRecord {
            word_id: 0,
            pos: PosClass::Noun,
            embedding: vec![v; 3],
        };
        let c = Corpus::from_documents(3, vec![(0, vec![rec(1.0)]), (1, vec![rec(2.0)])], vocab.clone())
            .unwrap();
        let mut bytes = encode_embeddings(&c);
        let first_value = (HEADER_LEN + 12 + 5) as usize;
        bytes.drain(first_value..first_value + 4);
        let err = decode_embeddings(&bytes, vocab).unwrap_err();
        assert!(matches!(err, FormatError::Truncated { .. }), "{err}");
    }

    #[test]
    fn word_out_of_range_names_offset() {
        let c = tiny();
        let bytes = encode_embeddings(&c);
        let small = Vocabulary::from_surfaces(["good"]).unwrap();
        let err = decode_embeddings(&bytes, small).unwrap_err();
        let second_token = HEADER_LEN + 12 + (5 + 16);
        assert!(
            matches!(err, FormatError::WordOutOfRange { offset, word_id: 1, .. } if offset == second_token),
            "{err}"
        );
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let c = tiny();
        let mut bytes = encode_embeddings(&c);
        bytes.push(0);
        assert!(matches!(
            decode_embeddings(&bytes, c.vocabulary().clone()),
            Err(FormatError::TrailingBytes { trailing: 1, .. })
        ));
    }

    #[test]
    fn bad_version_and_pos_class() {
        let c = tiny();
        let mut bytes = encode_embeddings(&c);
        bytes[4] = 2;
        assert!(matches!(
            decode_embeddings(&bytes, c.vocabulary().clone()),
            Err(FormatError::UnsupportedVersion { offset: 4, version: 2 })
        ));
        let mut bytes = encode_embeddings(&c);
        bytes[(HEADER_LEN + 12 + 4) as usize] = 9;
        assert!(matches!(
            decode_embeddings(&bytes, c.vocabulary().clone()),
            Err(FormatError::Record { .. })
        ));
    }

    #[test]
    fn vocabulary_and_labels_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        let vocab = Vocabulary::new(vec![
            VocabEntry {
                surface: "new york".into(),
                frequency: 3,
            },
            VocabEntry {
                surface: "pizza".into(),
                frequency: 9,
            },
        ])
        .unwrap();
        write_vocabulary(&path, &vocab).unwrap();
        assert_eq!(read_vocabulary(&path).unwrap(), vocab);

        fs::write(&path, "0\ta\t1\n2\tb\t1\n").unwrap();
        assert!(matches!(read_vocabulary(&path), Err(FormatError::Tsv { line: 2, .. })));

        let labels = dir.path().join("labels.tsv");
        fs::write(&labels, "3\tsports\n1\tpolitics\n").unwrap();
        assert_eq!(
            read_labels(&labels).unwrap(),
            vec![(3, "sports".to_string()), (1, "politics".to_string())]
        );
        fs::write(&labels, "3\tsports\n3\tarts\n").unwrap();
        assert!(read_labels(&labels).is_err());
    }
}
