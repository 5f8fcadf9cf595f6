//! Token-embedding corpus: documents of contextualized token vectors plus the
//! vocabulary they index into.
//!
//! A [`Corpus`] is immutable once built. Embeddings are promoted to `f64` on
//! ingestion and stored row-major as one `N × r` matrix, so a document is just
//! a contiguous row range.

mod filter;
mod io;

use std::collections::HashSet;

use log::warn;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{CorpusError, FormatError};

pub use filter::RemovalLog;
pub use io::{
    decode_embeddings, encode_embeddings, load_corpus, read_labels, read_vocabulary,
    write_embeddings, write_vocabulary, EMBEDDING_MAGIC, EMBEDDING_VERSION,
};

/// Coarse part-of-speech class of a token occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum PosClass {
    Other = 0,
    Noun = 1,
    Verb = 2,
    Adjective = 3,
}

impl PosClass {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(PosClass::Other),
            1 => Some(PosClass::Noun),
            2 => Some(PosClass::Verb),
            3 => Some(PosClass::Adjective),
            _ => None,
        }
    }

    /// Nouns, verbs and adjectives carry topical content; everything else does not.
    pub fn is_content(self) -> bool {
        !matches!(self, PosClass::Other)
    }
}

/// One token occurrence, used to assemble corpora in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenRecord {
    pub word_id: u32,
    pub pos: PosClass,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub surface: String,
    pub frequency: u64,
}

/// Dense word-id → surface table. The word id is the entry's index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
}

impl Vocabulary {
    pub fn new(entries: Vec<VocabEntry>) -> Result<Self, FormatError> {
        let mut seen = HashSet::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.frequency == 0 {
                return Err(FormatError::Tsv {
                    line: i + 1,
                    reason: format!("frequency of {:?} must be at least 1", e.surface),
                });
            }
            if !seen.insert(e.surface.as_str()) {
                return Err(FormatError::Tsv {
                    line: i + 1,
                    reason: format!("duplicate surface {:?}", e.surface),
                });
            }
        }
        Ok(Vocabulary { entries })
    }

    /// Builds a vocabulary from surfaces alone, every frequency set to 1.
    pub fn from_surfaces<S: Into<String>>(
        surfaces: impl IntoIterator<Item = S>,
    ) -> Result<Self, FormatError> {
        Self::new(
            surfaces
                .into_iter()
                .map(|s| VocabEntry {
                    surface: s.into(),
                    frequency: 1,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn surface(&self, word_id: u32) -> &str {
        &self.entries[word_id as usize].surface
    }

    pub fn frequency(&self, word_id: u32) -> u64 {
        self.entries[word_id as usize].frequency
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn id_of(&self, surface: &str) -> Option<u32> {
        self.entries
            .iter()
            .position(|e| e.surface == surface)
            .map(|i| i as u32)
    }
}

/// A document: its external id and its contiguous token range in the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Document {
    pub doc_id: u64,
    pub start: usize,
    pub len: usize,
}

impl Document {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    dim: usize,
    documents: Vec<Document>,
    word_ids: Vec<u32>,
    pos: Vec<PosClass>,
    embeddings: Array2<f64>,
    vocabulary: Vocabulary,
}

impl Corpus {
    /// Assembles a corpus from per-document token lists.
    ///
    /// Every document must be non-empty, every embedding must have `dim` finite
    /// entries and every word id must index into `vocabulary`.
    pub fn from_documents(
        dim: usize,
        documents: Vec<(u64, Vec<TokenRecord>)>,
        vocabulary: Vocabulary,
    ) -> Result<Self, FormatError> {
        if dim == 0 {
            return Err(FormatError::Header {
                offset: 0,
                reason: "embedding dimension must be positive".into(),
            });
        }
        let n: usize = documents.iter().map(|(_, t)| t.len()).sum();
        let mut flat = Vec::with_capacity(n * dim);
        let mut word_ids = Vec::with_capacity(n);
        let mut pos = Vec::with_capacity(n);
        let mut docs = Vec::with_capacity(documents.len());
        for (doc_id, tokens) in documents {
            if tokens.is_empty() {
                return Err(FormatError::Record {
                    offset: 0,
                    reason: format!("document {doc_id} has no tokens"),
                });
            }
            docs.push(Document {
                doc_id,
                start: word_ids.len(),
                len: tokens.len(),
            });
            for t in tokens {
                let index = word_ids.len();
                if t.word_id as usize >= vocabulary.len() {
                    return Err(FormatError::WordOutOfRange {
                        offset: 0,
                        word_id: t.word_id,
                        vocab_size: vocabulary.len(),
                    });
                }
                if t.embedding.len() != dim {
                    return Err(FormatError::Record {
                        offset: 0,
                        reason: format!(
                            "token {index} has {} values, expected {dim}",
                            t.embedding.len()
                        ),
                    });
                }
                if t.embedding.iter().any(|v| !v.is_finite()) {
                    return Err(FormatError::Record {
                        offset: 0,
                        reason: format!("token {index} has a non-finite embedding value"),
                    });
                }
                word_ids.push(t.word_id);
                pos.push(t.pos);
                flat.extend_from_slice(&t.embedding);
            }
        }
        if word_ids.is_empty() {
            return Err(FormatError::Header {
                offset: 0,
                reason: "corpus has no tokens".into(),
            });
        }
        let embeddings = Array2::from_shape_vec((word_ids.len(), dim), flat)
            .expect("flat buffer sized from token count");
        Ok(Corpus {
            dim,
            documents: docs,
            word_ids,
            pos,
            embeddings,
            vocabulary,
        })
    }

    pub(crate) fn from_parts(
        dim: usize,
        documents: Vec<Document>,
        word_ids: Vec<u32>,
        pos: Vec<PosClass>,
        embeddings: Array2<f64>,
        vocabulary: Vocabulary,
    ) -> Self {
        debug_assert_eq!(embeddings.nrows(), word_ids.len());
        Corpus {
            dim,
            documents,
            word_ids,
            pos,
            embeddings,
            vocabulary,
        }
    }

    /// Embedding dimension `r`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total token count `N`.
    pub fn num_tokens(&self) -> usize {
        self.word_ids.len()
    }

    pub fn num_documents(&self) -> usize {
        self.documents.len()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn document(&self, index: usize) -> Result<&Document, CorpusError> {
        self.documents
            .get(index)
            .ok_or(CorpusError::NoSuchDocument(index))
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn word_ids(&self) -> &[u32] {
        &self.word_ids
    }

    pub fn pos_classes(&self) -> &[PosClass] {
        &self.pos
    }

    /// All token embeddings, one row per token.
    pub fn embeddings(&self) -> ArrayView2<'_, f64> {
        self.embeddings.view()
    }

    pub fn token_embedding(&self, token: usize) -> ArrayView1<'_, f64> {
        self.embeddings.row(token)
    }

    /// Token embeddings of one document, `n × r`.
    pub fn document_embeddings(&self, doc_index: usize) -> ArrayView2<'_, f64> {
        let d = &self.documents[doc_index];
        self.embeddings.slice(s![d.start..d.start + d.len, ..])
    }

    /// Word ids of one document in token order.
    pub fn document_words(&self, doc_index: usize) -> &[u32] {
        &self.word_ids[self.documents[doc_index].range()]
    }

    /// Occurrence counts per word id over the stored tokens.
    pub fn token_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocabulary.len()];
        for &w in &self.word_ids {
            counts[w as usize] += 1;
        }
        counts
    }

    /// Drops tokens of words occurring fewer than `min_count` times.
    ///
    /// Documents left without tokens are removed and reported in the log;
    /// word ids are re-densified in their original order.
    pub fn filter_vocabulary(&self, min_count: u32) -> Result<(Corpus, RemovalLog), CorpusError> {
        filter::filter_vocabulary(self, min_count)
    }

    /// Unweighted mean of the document's content-word embeddings.
    ///
    /// Falls back to the mean over all tokens when the document has no noun,
    /// verb or adjective.
    pub fn generic_document_embedding(&self, doc_index: usize) -> Result<Array1<f64>, CorpusError> {
        let doc = *self.document(doc_index)?;
        let mut sum = Array1::<f64>::zeros(self.dim);
        let mut count = 0usize;
        for t in doc.range() {
            if self.pos[t].is_content() {
                sum += &self.embeddings.row(t);
                count += 1;
            }
        }
        if count == 0 {
            warn!(
                "document {} has no content words; using the mean of all tokens",
                doc.doc_id
            );
            for t in doc.range() {
                sum += &self.embeddings.row(t);
            }
            count = doc.len;
        }
        sum /= count as f64;
        Ok(sum)
    }

    /// Document index for each external document id.
    pub fn doc_index_by_id(&self) -> std::collections::HashMap<u64, usize> {
        self.documents
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id, i))
            .collect()
    }
}
