//! Template corpus for smoke tests and desk-scale experiments. Each post names
//! one topic and one aspect among filler words; the gold question is a fixed
//! template over the topic and aspect, and the aspect picks the answer list.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, PollSample, Split};

const TOPICS: [&str; 8] = ["coffee", "movie", "phone", "game", "city", "book", "car", "song"];

const ASPECTS: [(&str, [&str; 3]); 5] = [
    ("color", ["red", "blue", "green"]),
    ("size", ["small", "medium", "large"]),
    ("time", ["morning", "noon", "night"]),
    ("price", ["cheap", "fair", "costly"]),
    ("mood", ["happy", "calm", "sad"]),
];

const FILLER: [&str; 24] = [
    "today", "really", "just", "think", "about", "my", "friend", "said", "that", "we", "should", "talk",
    "maybe", "later", "again", "very", "nice", "new", "old", "week", "here", "now", "still", "quite",
];

fn filler(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| FILLER[rng.gen_range(0..FILLER.len())]).collect()
}

/// `n` samples; every tenth sample (offset 0) is valid, offset 1 is test, the rest train.
pub fn synthetic_corpus(n: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| {
            let topic = TOPICS[rng.gen_range(0..TOPICS.len())];
            let (aspect, answers) = ASPECTS[rng.gen_range(0..ASPECTS.len())];
            let k = rng.gen_range(3..7);
            let mut words = filler(&mut rng, k);
            words.push(topic);
            words.push(aspect);
            words.shuffle(&mut rng);
            let n_comments = rng.gen_range(0..4);
            let comments = (0..n_comments)
                .map(|_| {
                    let k = rng.gen_range(2..5);
                    filler(&mut rng, k).join(" ")
                })
                .collect();
            let split = match i % 10 {
                0 => Split::Valid,
                1 => Split::Test,
                _ => Split::Train,
            };
            PollSample {
                id: format!("syn-{i:04}"),
                post: words.join(" "),
                comments,
                question: format!("which {topic} {aspect} do you like"),
                answers: answers.iter().map(|s| s.to_string()).collect(),
                split,
            }
        })
        .collect();
    Corpus::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_split() {
        let a = synthetic_corpus(200, 7);
        assert_eq!(a, synthetic_corpus(200, 7));
        assert_eq!(a.count(Split::Train), 160);
        assert_eq!(a.count(Split::Valid), 20);
        assert_eq!(a.count(Split::Test), 20);
        for s in &a.samples {
            let words: Vec<&str> = s.question.split(' ').collect();
            assert!(s.post.split(' ').any(|w| w == words[1]));
            assert!(s.post.split(' ').any(|w| w == words[2]));
        }
    }
}
