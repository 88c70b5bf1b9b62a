//! Synthetic topic corpus.
//!
//! Every class owns a small topic vocabulary; documents mix tokens from their
//! own topic, occasionally another class's topic, and a large shared
//! background vocabulary. Word frequencies within each vocabulary follow a
//! Zipf-like law. Classes overlap enough that the label budget matters.

use al_core::corpus::{Dataset, LabelMode, LabelSet, LabelSpace};
use al_core::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "su", "te", "ra", "vi", "no", "de", "pa", "shi", "gu", "be", "yo", "ze", "fu",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub docs: usize,
    pub classes: usize,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
    pub topic_words: usize,
    pub background_words: usize,
    /// Probability that a token comes from the document's own topic.
    pub topic_rate: f64,
    /// Probability that a token comes from another class's topic.
    pub cross_rate: f64,
    /// Minimum margin of own-topic over foreign-topic tokens per document;
    /// background tokens are overwritten until it holds.
    pub min_topic_margin: usize,
}

impl SynthConfig {
    pub fn new(docs: usize, classes: usize, seed: u64) -> Self {
        Self {
            docs,
            classes,
            seed,
            min_len: 12,
            max_len: 40,
            topic_words: 40,
            background_words: 400,
            topic_rate: 0.20,
            cross_rate: 0.06,
            min_topic_margin: 2,
        }
    }
}

/// Deterministic pronounceable word for an index below 16³.
fn word(index: usize) -> String {
    let mut s = String::new();
    for shift in [8, 4, 0] {
        s.push_str(SYLLABLES[(index >> shift) & 0xF]);
    }
    s
}

fn zipf(n: usize, exponent: f64) -> Vec<f64> {
    (0..n).map(|j| 1.0 / ((j + 1) as f64).powf(exponent)).collect()
}

pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    let c = config.classes;
    if c < 2 {
        return Err(ExperimentError::Config("synthetic corpus needs at least 2 classes".into()));
    }
    if config.docs == 0 || config.min_len == 0 || config.min_len > config.max_len {
        return Err(ExperimentError::Config("invalid synthetic corpus size or length range".into()));
    }
    if config.background_words + c * config.topic_words > 4096 {
        return Err(ExperimentError::Config("too many synthetic words requested".into()));
    }
    if config.topic_rate < 0.0 || config.cross_rate < 0.0 || config.topic_rate + config.cross_rate > 1.0 {
        return Err(ExperimentError::Config("topic_rate + cross_rate must lie in [0, 1]".into()));
    }
    // shuffle the word ids so topics do not occupy contiguous syllable prefixes
    let mut rng = Rng::new(config.seed);
    let mut ids: Vec<usize> = (0..4096).collect();
    rng.shuffle(&mut ids);
    let background: Vec<String> = ids[..config.background_words].iter().map(|&i| word(i)).collect();
    let topics: Vec<Vec<String>> = (0..c)
        .map(|k| {
            let start = config.background_words + k * config.topic_words;
            ids[start..start + config.topic_words].iter().map(|&i| word(i)).collect()
        })
        .collect();
    let bg_weights = zipf(config.background_words, 1.0);
    let topic_weights = zipf(config.topic_words, 0.8);

    let mut texts = Vec::with_capacity(config.docs);
    let mut labels = Vec::with_capacity(config.docs);
    for _ in 0..config.docs {
        let class = rng.below(c);
        let len = config.min_len + rng.below(config.max_len - config.min_len + 1);
        // (source, word) with source 0 = background, 1 = own topic, 2 = foreign
        let mut tokens: Vec<(u8, &str)> = Vec::with_capacity(len);
        for _ in 0..len {
            let u = rng.next_f64();
            tokens.push(if u < config.topic_rate {
                (1, &topics[class][rng.weighted_index(&topic_weights).expect("positive weights")])
            } else if u < config.topic_rate + config.cross_rate {
                let other = (class + 1 + rng.below(c - 1)) % c;
                (2, &topics[other][rng.weighted_index(&topic_weights).expect("positive weights")])
            } else {
                (0, &background[rng.weighted_index(&bg_weights).expect("positive weights")])
            });
        }
        let count = |t: &[(u8, &str)], src: u8| t.iter().filter(|(s, _)| *s == src).count();
        let mut pos = 0;
        while count(&tokens, 1) < count(&tokens, 2) + config.min_topic_margin && pos < tokens.len() {
            if tokens[pos].0 != 1 {
                tokens[pos] = (1, &topics[class][rng.weighted_index(&topic_weights).expect("positive weights")]);
            }
            pos += 1;
        }
        let words: Vec<&str> = tokens.iter().map(|(_, w)| *w).collect();
        texts.push(words.join(" "));
        labels.push(Some(LabelSet::single(class)));
    }
    let names = (0..c).map(|k| format!("topic{k}")).collect();
    let space = LabelSpace::new(LabelMode::SingleLabel, names)?;
    Ok(Dataset::new(texts, space, labels)?)
}
