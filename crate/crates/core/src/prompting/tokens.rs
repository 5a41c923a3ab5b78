/// Pluggable prompt-size estimator.
pub trait TokenEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> usize;
}

/// Counts words and punctuation marks, scaled by a calibration factor and
/// rounded up.
///
/// Within each whitespace-delimited chunk, every maximal run of alphanumeric
/// characters is one word and every other character one punctuation mark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordPunctEstimator {
    pub factor: f64,
}

pub const DEFAULT_TOKEN_FACTOR: f64 = 1.33;

impl Default for WordPunctEstimator {
    fn default() -> Self {
        Self {
            factor: DEFAULT_TOKEN_FACTOR,
        }
    }
}

impl WordPunctEstimator {
    pub fn new(factor: f64) -> Self {
        Self { factor }
    }

    /// Unscaled word + punctuation count.
    pub fn raw_count(text: &str) -> usize {
        let mut count = 0;
        for chunk in text.split_whitespace() {
            let mut in_word = false;
            for c in chunk.chars() {
                if c.is_alphanumeric() {
                    if !in_word {
                        count += 1;
                        in_word = true;
                    }
                } else {
                    count += 1;
                    in_word = false;
                }
            }
        }
        count
    }
}

impl TokenEstimator for WordPunctEstimator {
    fn estimate(&self, text: &str) -> usize {
        let scaled = Self::raw_count(text) as f64 * self.factor;
        // Guard against 100 * 1.33 = 133.00000000000003 rounding up to 134.
        (scaled - 1e-9).ceil().max(0.0) as usize
    }
}

/// Estimates with the default estimator.
pub fn estimate_tokens(text: &str) -> usize {
    WordPunctEstimator::default().estimate(text)
}
