use super::tokenize::{is_word, tokens};
use super::{CorpusStat, MetricError};

pub const FKGL_SENTENCE_WEIGHT: f64 = 0.39;
pub const FKGL_SYLLABLE_WEIGHT: f64 = 11.8;
pub const FKGL_OFFSET: f64 = 15.59;

/// Lowest attainable grade: one monosyllabic word per sentence.
pub const FKGL_FLOOR: f64 = FKGL_SENTENCE_WEIGHT + FKGL_SYLLABLE_WEIGHT - FKGL_OFFSET;

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group heuristic. Maximal runs of `a e i o u y` are counted; a
/// trailing lone `e` is treated as silent unless it is the only group.
/// Never returns less than 1.
pub fn count_syllables(word: &str) -> usize {
    let lower: Vec<char> = word.to_lowercase().chars().collect();
    let mut groups = 0;
    let mut last_group_len = 0;
    let mut in_group = false;
    for &c in &lower {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
                last_group_len = 0;
            }
            in_group = true;
            last_group_len += 1;
        } else {
            in_group = false;
        }
    }
    let silent_e = lower.last() == Some(&'e') && in_group && last_group_len == 1 && groups > 1;
    if silent_e {
        groups -= 1;
    }
    groups.max(1)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FkglStat {
    pub words: u64,
    pub sentences: u64,
    pub syllables: u64,
}

impl FkglStat {
    /// Counts for one text. Sentences end at `.`, `!` or `?`; a trailing
    /// segment without terminal punctuation still counts when it has words.
    pub fn text(text: &str) -> Self {
        let mut stat = FkglStat::default();
        let mut open = false;
        for tok in tokens(text).tokens {
            if is_word(&tok) {
                stat.words += 1;
                stat.syllables += count_syllables(&tok) as u64;
                open = true;
            } else if matches!(tok.as_str(), "." | "!" | "?") && open {
                stat.sentences += 1;
                open = false;
            }
        }
        if open {
            stat.sentences += 1;
        }
        stat
    }
}

impl CorpusStat for FkglStat {
    fn merge(&mut self, other: &Self) {
        self.words += other.words;
        self.sentences += other.sentences;
        self.syllables += other.syllables;
    }

    /// NaN when the corpus has no words; [`fkgl_corpus`] rejects that case.
    fn score(&self) -> f64 {
        if self.words == 0 {
            return f64::NAN;
        }
        let w = self.words as f64;
        FKGL_SENTENCE_WEIGHT * (w / self.sentences as f64)
            + FKGL_SYLLABLE_WEIGHT * (self.syllables as f64 / w)
            - FKGL_OFFSET
    }
}

pub fn fkgl_corpus(texts: &[impl AsRef<str>]) -> Result<f64, MetricError> {
    let mut total = FkglStat::default();
    for t in texts {
        total.merge(&FkglStat::text(t.as_ref()));
    }
    if total.words == 0 {
        return Err(MetricError::NoWords);
    }
    Ok(total.score())
}
