//! Text ↔ id mapping with reserved ids for the control tokens.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formatting::SpecialTokens;
use crate::model::{TokenSequence, BOS_ID, EOS_ID, PAD_ID};
use crate::text::{is_cjk, segment};

pub const UNK_ID: u32 = 3;
pub const QUESTION_ID: u32 = 4;
pub const ANSWERS_ID: u32 = 5;
pub const FIELD_SEP_ID: u32 = 6;
pub const ANSWER_SEP_ID: u32 = 7;
/// First id available to ordinary vocabulary entries.
pub const FIRST_FREE_ID: u32 = 8;

/// What the formatting, decoding and training code needs from a tokenizer.
pub trait Tokenizer: Send + Sync {
    /// Byte spans of each token of `text`.
    fn spans(&self, text: &str) -> Vec<(usize, usize)>;

    fn encode(&self, text: &str) -> TokenSequence;

    fn decode(&self, ids: &[u32]) -> String;

    fn vocab_size(&self) -> usize;

    fn fingerprint(&self) -> String;

    fn count(&self, text: &str) -> usize {
        self.spans(text).len()
    }
}

/// Closed-vocabulary tokenizer built from a corpus: reserved surfaces, single
/// CJK characters, alphanumeric runs, and single punctuation characters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabTokenizer {
    specials: SpecialTokens,
    vocab: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl VocabTokenizer {
    pub fn new(specials: SpecialTokens, words: Vec<String>) -> Self {
        let mut vocab = vec![
            "<pad>".to_string(),
            "<s>".to_string(),
            "</s>".to_string(),
            "<unk>".to_string(),
            specials.question_tok.clone(),
            specials.answers_tok.clone(),
            specials.field_sep.clone(),
            specials.answer_sep.clone(),
        ];
        for w in words {
            if !vocab.contains(&w) {
                vocab.push(w);
            }
        }
        let mut tok = Self {
            specials,
            vocab,
            index: HashMap::new(),
        };
        tok.reindex();
        tok
    }

    fn reindex(&mut self) {
        self.index = self
            .vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
    }

    /// Vocabulary ordered by descending frequency, ties broken lexicographically.
    pub fn build<'a>(specials: SpecialTokens, texts: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let reserved = specials.surfaces();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for (s, e) in segment(text, &reserved) {
                *counts.entry(text[s..e].to_string()).or_default() += 1;
            }
        }
        let mut words: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_count && !reserved.contains(&w.as_str()))
            .collect();
        words.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::new(specials, words.into_iter().map(|(w, _)| w).collect())
    }

    pub fn specials(&self) -> &SpecialTokens {
        &self.specials
    }

    pub fn id_of(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("tokenizer serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, serde_json::Error> {
        let mut tok: Self = serde_json::from_value(value.clone())?;
        tok.reindex();
        Ok(tok)
    }
}

impl Tokenizer for VocabTokenizer {
    fn spans(&self, text: &str) -> Vec<(usize, usize)> {
        segment(text, &self.specials.surfaces())
    }

    fn encode(&self, text: &str) -> TokenSequence {
        TokenSequence(
            self.spans(text)
                .into_iter()
                .map(|(s, e)| self.index.get(&text[s..e]).copied().unwrap_or(UNK_ID))
                .collect(),
        )
    }

    fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        let mut prev_cjk = false;
        for &id in ids {
            if id == PAD_ID || id == BOS_ID || id == EOS_ID {
                continue;
            }
            let piece = self.vocab.get(id as usize).map(String::as_str).unwrap_or("<unk>");
            let cjk = {
                let mut chars = piece.chars();
                matches!((chars.next(), chars.next()), (Some(c), None) if is_cjk(c))
            };
            if !out.is_empty() && !(prev_cjk && cjk) {
                out.push(' ');
            }
            out.push_str(piece);
            prev_cjk = cjk;
        }
        out
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for s in self.specials.surfaces() {
            h.update(s.as_bytes());
            h.update([0u8]);
        }
        for w in &self.vocab {
            h.update(w.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok() -> VocabTokenizer {
        VocabTokenizer::build(
            SpecialTokens::default(),
            ["你觉得线上复试是否公平", "do you like cats", "<question> q <answers> a <ans_sep> b"],
            1,
        )
    }

    #[test]
    fn reserved_ids_are_fixed() {
        let t = tok();
        assert_eq!(t.id_of("<question>"), Some(QUESTION_ID));
        assert_eq!(t.id_of("<answers>"), Some(ANSWERS_ID));
        assert_eq!(t.id_of("[SEP]"), Some(FIELD_SEP_ID));
        assert_eq!(t.id_of("<ans_sep>"), Some(ANSWER_SEP_ID));
        assert_eq!(
            t.encode("<question> q <answers> a <ans_sep> b").0[..3],
            [QUESTION_ID, t.id_of("q").unwrap(), ANSWERS_ID]
        );
    }

    #[test]
    fn decode_restores_normalized_text() {
        let t = tok();
        for s in ["你觉得线上复试是否公平", "do you like cats", "<question> q <answers> a <ans_sep> b"] {
            assert_eq!(t.decode(&t.encode(s).0), s);
        }
        assert_eq!(t.encode("zebra").0, vec![UNK_ID]);
    }

    #[test]
    fn json_round_trip_keeps_fingerprint() {
        let t = tok();
        let back = VocabTokenizer::from_json(&t.to_json()).unwrap();
        assert_eq!(back.fingerprint(), t.fingerprint());
        assert_eq!(back.encode("do you like cats"), t.encode("do you like cats"));
    }
}
