use std::collections::BTreeSet;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

/// Surface form of `lemma` in time bin `bin`.
pub fn tagged_lemma(lemma: &str, bin: usize) -> String {
    format!("{lemma}#{bin}")
}

/// Rewrite every target occurrence to its bin-tagged form, leaving all other
/// lemmas untouched.
pub fn temporal_reference(corpus: &Corpus, targets: &[String]) -> Result<Vec<Document>> {
    if targets.is_empty() {
        return Err(Error::Empty("no target lemmas".into()));
    }
    let targets: BTreeSet<&str> = targets.iter().map(String::as_str).collect();
    if let Some(t) = targets.iter().find(|t| t.contains('#')) {
        return Err(Error::Invalid(format!("target `{t}` contains `#`")));
    }
    for doc in &corpus.documents {
        for lemma in &doc.lemmas {
            if let Some((stem, _)) = lemma.split_once('#') {
                if targets.contains(stem) {
                    return Err(Error::Invalid(format!(
                        "corpus lemma `{lemma}` collides with the tagged form of target `{stem}`"
                    )));
                }
            }
        }
    }
    Ok(corpus
        .documents
        .iter()
        .zip(&corpus.bins)
        .map(|(doc, &bin)| Document {
            lemmas: doc
                .lemmas
                .iter()
                .map(|l| {
                    if targets.contains(l.as_str()) {
                        tagged_lemma(l, bin)
                    } else {
                        l.clone()
                    }
                })
                .collect(),
            ..doc.clone()
        })
        .collect())
}
