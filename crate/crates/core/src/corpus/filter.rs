use log::warn;
use ndarray::Array2;

use super::{Corpus, Document, VocabEntry, Vocabulary};
use crate::error::CorpusError;

/// What a vocabulary filter removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RemovalLog {
    /// Surfaces of the words that fell below the threshold.
    pub removed_words: Vec<String>,
    pub removed_tokens: usize,
    /// External ids of documents that lost every token.
    pub dropped_documents: Vec<u64>,
}

pub(super) fn filter_vocabulary(
    corpus: &Corpus,
    min_count: u32,
) -> Result<(Corpus, RemovalLog), CorpusError> {
    if min_count == 0 {
        return Err(CorpusError::InvalidMinCount);
    }
    let counts = corpus.token_counts();
    // Removing a word's tokens never changes another word's count, so one pass suffices.
    let mut remap = vec![None; counts.len()];
    let mut entries = Vec::new();
    let mut log = RemovalLog::default();
    for (old, &count) in counts.iter().enumerate() {
        if count >= u64::from(min_count) {
            remap[old] = Some(entries.len() as u32);
            entries.push(VocabEntry {
                surface: corpus.vocabulary().surface(old as u32).to_owned(),
                frequency: count,
            });
        } else {
            log.removed_words
                .push(corpus.vocabulary().surface(old as u32).to_owned());
        }
    }

    let dim = corpus.dim();
    let emb = corpus.embeddings();
    let mut documents = Vec::with_capacity(corpus.num_documents());
    let mut word_ids = Vec::new();
    let mut pos = Vec::new();
    let mut flat = Vec::new();
    for doc in corpus.documents() {
        let start = word_ids.len();
        for t in doc.range() {
            match remap[corpus.word_ids()[t] as usize] {
                Some(new_id) => {
                    word_ids.push(new_id);
                    pos.push(corpus.pos_classes()[t]);
                    flat.extend(emb.row(t).iter().copied());
                }
                None => log.removed_tokens += 1,
            }
        }
        let len = word_ids.len() - start;
        if len == 0 {
            log.dropped_documents.push(doc.doc_id);
        } else {
            documents.push(Document {
                doc_id: doc.doc_id,
                start,
                len,
            });
        }
    }
    if word_ids.is_empty() {
        return Err(CorpusError::EmptyAfterFilter { min_count });
    }
    if !log.dropped_documents.is_empty() {
        warn!(
            "{} documents emptied by min_count = {min_count} were dropped",
            log.dropped_documents.len()
        );
    }
    let vocabulary = Vocabulary::new(entries).expect("subset of a valid vocabulary");
    let embeddings = Array2::from_shape_vec((word_ids.len(), dim), flat).expect("row-major copy");
    Ok((
        Corpus::from_parts(dim, documents, word_ids, pos, embeddings, vocabulary),
        log,
    ))
}
