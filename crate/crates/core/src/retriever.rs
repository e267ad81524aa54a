//! TF-IDF (unigram + bigram) retrieval over the example store.
//!
//! Weights are raw term count times smoothed idf, `ln((1 + N) / (1 + df)) + 1`,
//! and every vector is L2-normalized, so cosine similarity is a plain dot
//! product. A corpus document is `prompt_bn + " " + prompt_en`; the query is
//! built the same way from the task.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::{BilingualExample, ExampleStore};

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrieverError {
    #[error("cannot fit a vectorizer on an empty store")]
    EmptyStore,
    #[error("store has {store} examples but the vectorizer was fitted on {fitted}")]
    StoreMismatch { store: usize, fitted: usize },
    #[error("invalid vectorizer snapshot: {0}")]
    Snapshot(String),
}

fn is_separator(c: char) -> bool {
    c.is_whitespace()
        || (c.is_ascii() && !c.is_ascii_alphanumeric() && c != '_')
        || matches!(c,
            '\u{00A1}'..='\u{00BF}' | '\u{00D7}' | '\u{00F7}'
            // danda, double danda
            | '\u{0964}' | '\u{0965}'
            | '\u{2010}'..='\u{205E}'
            | '\u{3000}'..='\u{303F}'
            | '\u{FF01}'..='\u{FF0F}')
}

/// Splits on whitespace and punctuation. ASCII letters are lowercased,
/// everything else (Bangla included) is kept verbatim.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(is_separator)
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

/// Unigrams followed by space-joined adjacent bigrams.
pub fn terms(text: &str) -> Vec<String> {
    let tokens = tokenize(text);
    let mut out = Vec::with_capacity(tokens.len() * 2);
    for pair in tokens.windows(2) {
        out.push(alloc::format!("{} {}", pair[0], pair[1]));
    }
    let mut all = tokens;
    all.append(&mut out);
    all
}

/// Sparse vector, entries sorted by term index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocumentVector {
    entries: Vec<(u32, f64)>,
}

impl DocumentVector {
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.entries.iter().map(|(_, w)| w * w).sum())
    }
}

/// Dot product of two normalized vectors; 0 when either is zero.
pub fn cosine(a: &DocumentVector, b: &DocumentVector) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut dot = 0.0;
    while i < a.entries.len() && j < b.entries.len() {
        match a.entries[i].0.cmp(&b.entries[j].0) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                dot += a.entries[i].1 * b.entries[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalHit<'a> {
    pub example: &'a BilingualExample,
    /// Position in the store.
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectorizer {
    version: u32,
    vocabulary: BTreeMap<String, u32>,
    document_count: u32,
    document_frequency: Vec<u32>,
    idf: Vec<f64>,
    documents: Vec<DocumentVector>,
}

pub fn document_text(example: &BilingualExample) -> String {
    query_text(&example.prompt_bn, &example.prompt_en)
}

fn query_text(bn: &str, en: &str) -> String {
    let mut s = String::with_capacity(bn.len() + en.len() + 1);
    s.push_str(bn);
    s.push(' ');
    s.push_str(en);
    s
}

impl Vectorizer {
    pub fn fit(store: &ExampleStore) -> Result<Self, RetrieverError> {
        if store.is_empty() {
            return Err(RetrieverError::EmptyStore);
        }
        let docs: Vec<Vec<String>> = store.examples().iter().map(|e| terms(&document_text(e))).collect();

        let mut df_by_term: BTreeMap<&str, u32> = BTreeMap::new();
        for doc in &docs {
            let mut unique: Vec<&str> = doc.iter().map(String::as_str).collect();
            unique.sort_unstable();
            unique.dedup();
            for t in unique {
                *df_by_term.entry(t).or_insert(0) += 1;
            }
        }

        let n = docs.len() as f64;
        let mut vocabulary = BTreeMap::new();
        let mut document_frequency = Vec::with_capacity(df_by_term.len());
        let mut idf = Vec::with_capacity(df_by_term.len());
        for (i, (term, df)) in df_by_term.iter().enumerate() {
            vocabulary.insert(term.to_string(), i as u32);
            document_frequency.push(*df);
            idf.push(libm::log((1.0 + n) / (1.0 + f64::from(*df))) + 1.0);
        }

        let mut v = Self {
            version: SNAPSHOT_VERSION,
            vocabulary,
            document_count: docs.len() as u32,
            document_frequency,
            idf,
            documents: Vec::new(),
        };
        v.documents = docs.iter().map(|d| v.weigh(d)).collect();
        Ok(v)
    }

    fn weigh(&self, terms: &[String]) -> DocumentVector {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for t in terms {
            if let Some(&idx) = self.vocabulary.get(t.as_str()) {
                *counts.entry(idx).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(u32, f64)> =
            counts.into_iter().map(|(idx, tf)| (idx, f64::from(tf) * self.idf[idx as usize])).collect();
        let norm = libm::sqrt(entries.iter().map(|(_, w)| w * w).sum());
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        DocumentVector { entries }
    }

    pub fn embed(&self, text: &str) -> DocumentVector {
        self.weigh(&terms(text))
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, u32> {
        &self.vocabulary
    }

    pub fn document_count(&self) -> usize {
        self.document_count as usize
    }

    pub fn document_frequency(&self, term: &str) -> Option<u32> {
        self.vocabulary.get(term).map(|&i| self.document_frequency[i as usize])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i as usize])
    }

    /// Stored vector of the `index`-th fitted document.
    pub fn corpus_vector(&self, index: usize) -> Option<&DocumentVector> {
        self.documents.get(index)
    }

    /// Up to `k` most similar examples, best first; ties go to the earlier
    /// store entry. The example with id `exclude_id` is never returned.
    pub fn top_k<'s>(
        &self,
        store: &'s ExampleStore,
        query_bn: &str,
        query_en: &str,
        k: usize,
        exclude_id: Option<&str>,
    ) -> Result<Vec<RetrievalHit<'s>>, RetrieverError> {
        if store.len() != self.documents.len() {
            return Err(RetrieverError::StoreMismatch { store: store.len(), fitted: self.documents.len() });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let query = self.embed(&query_text(query_bn, query_en));
        let mut hits: Vec<RetrievalHit<'s>> = store
            .examples()
            .iter()
            .enumerate()
            .filter(|(_, e)| exclude_id != Some(e.id.as_str()))
            .map(|(index, example)| RetrievalHit { example, index, score: cosine(&query, &self.documents[index]) })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
        hits.truncate(k);
        Ok(hits)
    }

    pub fn to_snapshot(&self) -> String {
        serde_json::to_string(self).expect("vectorizer always serializes")
    }

    pub fn from_snapshot(json: &str) -> Result<Self, RetrieverError> {
        let v: Self = serde_json::from_str(json).map_err(|e| RetrieverError::Snapshot(e.to_string()))?;
        if v.version != SNAPSHOT_VERSION {
            return Err(RetrieverError::Snapshot(alloc::format!("unsupported version {}", v.version)));
        }
        if v.idf.len() != v.vocabulary.len() || v.document_frequency.len() != v.vocabulary.len() {
            return Err(RetrieverError::Snapshot("vocabulary and weight tables differ in length".into()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn store(docs: &[&str]) -> ExampleStore {
        ExampleStore::new(
            docs.iter()
                .enumerate()
                .map(|(i, d)| BilingualExample {
                    id: alloc::format!("e{i}"),
                    prompt_bn: d.to_string(),
                    prompt_en: String::new(),
                    solution_code: "pass".into(),
                    tests: vec![],
                })
                .collect(),
        )
        .unwrap()
    }

    // Direct evaluation of the weighting formula with std maps, whitespace
    // tokens only (test corpora contain no punctuation or uppercase).
    fn oracle_vector(docs: &[&str], text: &str) -> HashMap<String, f64> {
        fn grams(s: &str) -> Vec<String> {
            let t: Vec<&str> = s.split_whitespace().collect();
            let mut g: Vec<String> = t.iter().map(|x| x.to_string()).collect();
            for w in t.windows(2) {
                g.push(std::format!("{} {}", w[0], w[1]));
            }
            g
        }
        let n = docs.len() as f64;
        let doc_grams: Vec<Vec<String>> = docs.iter().map(|d| grams(d)).collect();
        let mut v: HashMap<String, f64> = HashMap::new();
        for g in grams(text) {
            let df = doc_grams.iter().filter(|d| d.contains(&g)).count();
            if df == 0 {
                continue;
            }
            let idf = ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0;
            *v.entry(g).or_insert(0.0) += idf;
        }
        let norm = v.values().map(|w| w * w).sum::<f64>().sqrt();
        for w in v.values_mut() {
            *w /= norm;
        }
        v
    }

    #[test]
    fn single_document_vocabulary() {
        let v = Vectorizer::fit(&store(&["a b"])).unwrap();
        let terms: Vec<&str> = v.vocabulary().keys().map(String::as_str).collect();
        assert_eq!(terms, ["a", "a b", "b"]);
        for t in terms {
            assert_eq!(v.document_frequency(t), Some(1));
        }
    }

    #[test]
    fn document_frequencies_and_idf() {
        let docs = ["gcd lcm", "sum list", "gcd sum"];
        let v = Vectorizer::fit(&store(&docs)).unwrap();
        assert_eq!(v.document_frequency("gcd"), Some(2));
        assert_eq!(v.document_frequency("lcm"), Some(1));
        assert_eq!(v.document_frequency("gcd lcm"), Some(1));
        // (1+3)/(1+2) and (1+3)/(1+1)
        let idf_df2 = (4.0f64 / 3.0).ln() + 1.0;
        let idf_df1 = 2.0f64.ln() + 1.0;
        assert!((v.idf("gcd").unwrap() - idf_df2).abs() < 1e-12);
        assert!((v.idf("sum").unwrap() - idf_df2).abs() < 1e-12);
        assert!((v.idf("lcm").unwrap() - idf_df1).abs() < 1e-12);
        assert!((v.idf("sum list").unwrap() - idf_df1).abs() < 1e-12);
    }

    #[test]
    fn empty_store() {
        assert_eq!(Vectorizer::fit(&ExampleStore::default()), Err(RetrieverError::EmptyStore));
    }

    #[test]
    fn embed_matches_corpus_vector() {
        let docs = ["gcd lcm", "sum list", "gcd sum"];
        let v = Vectorizer::fit(&store(&docs)).unwrap();
        for (i, d) in docs.iter().enumerate() {
            let e = v.embed(d);
            assert_eq!(&e, v.corpus_vector(i).unwrap());
            assert!((cosine(&e, &e) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn unknown_text_is_zero() {
        let v = Vectorizer::fit(&store(&["gcd lcm"])).unwrap();
        let z = v.embed("nothing here");
        assert!(z.is_zero());
        assert_eq!(cosine(&z, &v.embed("gcd")), 0.0);
    }

    #[test]
    fn mixed_terms_match_oracle() {
        let docs = ["gcd lcm", "sum list", "gcd sum"];
        let v = Vectorizer::fit(&store(&docs)).unwrap();
        let query = "gcd of list sum list";
        let ours = v.embed(query);
        let oracle = oracle_vector(&docs, query);
        assert_eq!(ours.entries().len(), oracle.len());
        for (term, idx) in v.vocabulary() {
            let mine = ours.entries().iter().find(|e| e.0 == *idx).map_or(0.0, |e| e.1);
            let want = oracle.get(term).copied().unwrap_or(0.0);
            assert!((mine - want).abs() < 1e-9, "{term}: {mine} vs {want}");
        }
        assert!((ours.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_of_disjoint_vectors_is_zero() {
        let v = Vectorizer::fit(&store(&["gcd lcm", "sum list"])).unwrap();
        assert_eq!(cosine(&v.embed("gcd lcm"), &v.embed("sum list")), 0.0);
    }

    #[test]
    fn cosine_matches_direct_dot_product() {
        let docs = ["gcd lcm sum", "sum list gcd", "max list"];
        let v = Vectorizer::fit(&store(&docs)).unwrap();
        let a = oracle_vector(&docs, docs[0]);
        let b = oracle_vector(&docs, docs[1]);
        let want: f64 = a.iter().map(|(t, w)| w * b.get(t).unwrap_or(&0.0)).sum();
        let got = cosine(v.corpus_vector(0).unwrap(), v.corpus_vector(1).unwrap());
        assert!((got - want).abs() < 1e-9);
    }

    #[test]
    fn top_k_zero_and_exclusion() {
        let s = store(&["gcd lcm", "sum list", "gcd sum"]);
        let v = Vectorizer::fit(&s).unwrap();
        assert!(v.top_k(&s, "gcd lcm", "", 0, None).unwrap().is_empty());
        let hits = v.top_k(&s, "gcd lcm", "", 3, Some("e0")).unwrap();
        assert_eq!(hits.len(), 2);
        assert!(hits.iter().all(|h| h.example.id != "e0"));
        let hits = v.top_k(&s, "gcd lcm", "", 3, None).unwrap();
        assert_eq!(hits[0].example.id, "e0");
    }

    #[test]
    fn ties_go_to_insertion_order() {
        let s = store(&["x y", "a b", "a b"]);
        let v = Vectorizer::fit(&s).unwrap();
        let hits = v.top_k(&s, "a b", "", 3, None).unwrap();
        assert_eq!(hits[0].index, 1);
        assert_eq!(hits[1].index, 2);
        assert_eq!(hits[0].score, hits[1].score);
    }

    #[test]
    fn tokenizer_handles_mixed_scripts() {
        assert_eq!(tokenize("GCD, দুটি সংখ্যার। sum_list(x)"), ["gcd", "দুটি", "সংখ্যার", "sum_list", "x"]);
    }

    #[test]
    fn snapshot_round_trips_bit_exactly() {
        let v = Vectorizer::fit(&store(&["gcd lcm", "sum list", "gcd sum", "দুটি সংখ্যার"])).unwrap();
        let back = Vectorizer::from_snapshot(&v.to_snapshot()).unwrap();
        assert_eq!(back, v);
        for (a, b) in v.idf.iter().zip(&back.idf) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    proptest! {
        #[test]
        fn scores_non_increasing_and_consistent(
            docs in proptest::collection::vec("[a-e]( [a-e]){0,5}", 1..8),
            query in "[a-f]( [a-f]){0,5}",
            k in 0usize..10,
        ) {
            let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
            let s = store(&refs);
            let v = Vectorizer::fit(&s).unwrap();
            let hits = v.top_k(&s, &query, "", k, None).unwrap();
            prop_assert_eq!(hits.len(), k.min(docs.len()));
            let q = v.embed(&std::format!("{query} "));
            for w in hits.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
            for h in &hits {
                prop_assert!(h.score <= 1.0 + 1e-9 && h.score >= 0.0);
                prop_assert!((cosine(&q, v.corpus_vector(h.index).unwrap()) - h.score).abs() < 1e-9);
            }
        }

        #[test]
        fn embed_is_deterministic(text in "\\PC{0,40}") {
            let v = Vectorizer::fit(&store(&["gcd lcm", "sum list"])).unwrap();
            let a = serde_json::to_string(&v.embed(&text)).unwrap();
            let b = serde_json::to_string(&v.embed(&text)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn irrelevant_document_matches_refitted_oracle(
            docs in proptest::collection::vec("[a-d]( [a-d]){0,4}", 1..6),
            query in "[a-d]( [a-d]){0,4}",
        ) {
            let mut with_extra: Vec<&str> = docs.iter().map(String::as_str).collect();
            with_extra.push("x y z");
            let s = store(&with_extra);
            let v = Vectorizer::fit(&s).unwrap();
            let q = oracle_vector(&with_extra, &query);
            for h in v.top_k(&s, &query, "", with_extra.len(), None).unwrap() {
                let d = oracle_vector(&with_extra, with_extra[h.index]);
                let want: f64 = q.iter().map(|(t, w)| w * d.get(t).unwrap_or(&0.0)).sum();
                prop_assert!((h.score - want).abs() < 1e-9);
            }
        }
    }
}
