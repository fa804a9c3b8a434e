//! Token-to-word buffering and end-of-call sentinel scanning.
//!
//! Model output arrives as arbitrary fragments. [`SentinelScanner`] strips the
//! sentinel (even when split across fragments) and [`TextChunker`] regroups the
//! remaining text into whole words for incremental synthesis.

/// Buffers sub-word tokens until a complete whitespace-delimited word exists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TextChunker {
    pending: String,
}

impl TextChunker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Text received but not yet emitted (never contains whitespace).
    pub fn pending(&self) -> &str {
        &self.pending
    }

    /// Feeds one token and returns every word it completed.
    pub fn feed(&mut self, token: &str) -> Vec<String> {
        let mut words = Vec::new();
        for ch in token.chars() {
            if ch.is_whitespace() {
                if !self.pending.is_empty() {
                    words.push(std::mem::take(&mut self.pending));
                }
            } else {
                self.pending.push(ch);
            }
        }
        words
    }

    /// Emits the trailing partial word at end of stream.
    pub fn flush(&mut self) -> Option<String> {
        (!self.pending.is_empty()).then(|| std::mem::take(&mut self.pending))
    }
}

/// Detects the end-of-call sentinel in a streamed text.
///
/// Holds back at most `len(sentinel) - 1` bytes: the longest suffix of the
/// stream that could still grow into the sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentinelScanner {
    sentinel: String,
    window: String,
    found: bool,
}

impl SentinelScanner {
    /// # Panics
    /// If `sentinel` is empty.
    pub fn new(sentinel: impl Into<String>) -> Self {
        let sentinel = sentinel.into();
        assert!(!sentinel.is_empty(), "sentinel must be non-empty");
        Self {
            sentinel,
            window: String::new(),
            found: false,
        }
    }

    pub fn sentinel(&self) -> &str {
        &self.sentinel
    }

    pub fn found(&self) -> bool {
        self.found
    }

    /// Suffix of the stream withheld because it might start the sentinel.
    pub fn window(&self) -> &str {
        &self.window
    }

    /// Returns the text that is safe to speak and whether the sentinel has
    /// now been seen. Everything from the sentinel onwards is discarded.
    pub fn scan(&mut self, text: &str) -> (String, bool) {
        if self.found {
            return (String::new(), true);
        }
        let mut buf = std::mem::take(&mut self.window);
        buf.push_str(text);
        if let Some(pos) = buf.find(&self.sentinel) {
            buf.truncate(pos);
            self.found = true;
            return (buf, true);
        }
        let keep = self.partial_match_len(&buf);
        self.window = buf.split_off(buf.len() - keep);
        (buf, false)
    }

    /// Releases the withheld suffix at end of stream.
    pub fn flush(&mut self) -> String {
        std::mem::take(&mut self.window)
    }

    fn partial_match_len(&self, buf: &str) -> usize {
        let max = (self.sentinel.len() - 1).min(buf.len());
        (1..=max)
            .rev()
            .find(|&n| {
                buf.is_char_boundary(buf.len() - n)
                    && self.sentinel.is_char_boundary(n)
                    && self.sentinel.as_bytes()[..n] == buf.as_bytes()[buf.len() - n..]
            })
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn word_completes_at_space() {
        let mut c = TextChunker::new();
        let mut out = c.feed("Hel");
        out.extend(c.feed("lo "));
        out.extend(c.feed("wor"));
        assert_eq!(out, vec!["Hello"]);
        assert_eq!(c.pending(), "wor");
    }

    #[test]
    fn empty_token_is_identity() {
        let mut c = TextChunker::new();
        c.feed("ab");
        let before = c.clone();
        assert!(c.feed("").is_empty());
        assert_eq!(c, before);
    }

    #[test]
    fn punctuation_stays_attached() {
        let mut c = TextChunker::new();
        let mut out = c.feed("Hi, there.\nBye");
        out.extend(c.flush());
        assert_eq!(out, vec!["Hi,", "there.", "Bye"]);
    }

    #[test]
    fn split_sentinel_is_detected() {
        let mut s = SentinelScanner::new("<END_OF_CALL>");
        let (a, f1) = s.scan("Goodbye. <END_");
        let (b, f2) = s.scan("OF_CALL>");
        assert!(!f1);
        assert!(f2);
        assert_eq!(format!("{a}{b}").trim_end(), "Goodbye.");
    }

    #[test]
    fn text_without_sentinel_passes_through() {
        let mut s = SentinelScanner::new("<END_OF_CALL>");
        let (a, found) = s.scan("Thanks for calling.");
        assert_eq!((a.as_str(), found), ("Thanks for calling.", false));
        assert_eq!(s.flush(), "");
    }

    #[test]
    fn near_miss_prefix_is_released() {
        let mut s = SentinelScanner::new("<END_OF_CALL>");
        let (a, _) = s.scan("a <END_");
        assert_eq!(a, "a ");
        assert_eq!(s.window(), "<END_");
        let (b, found) = s.scan("X> ok");
        assert!(!found);
        assert_eq!(format!("{a}{b}{}", s.flush()), "a <END_X> ok");
    }

    #[test]
    fn window_bounded_by_sentinel_length() {
        let mut s = SentinelScanner::new("<<<<");
        s.scan("<<<<<<<".get(..3).unwrap());
        assert!(s.window().len() <= 3);
    }

    #[test]
    fn output_after_sentinel_is_suppressed() {
        let mut s = SentinelScanner::new("#EOC#");
        let (a, f) = s.scan("bye #EOC# trailing");
        assert_eq!((a.as_str(), f), ("bye ", true));
        assert_eq!(s.scan("more"), (String::new(), true));
    }

    fn random_split(text: &str, rng: &mut ChaCha8Rng) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let n = rng.random_range(0..=7usize).min(chars.len() - i);
            tokens.push(chars[i..i + n].iter().collect());
            i += n;
        }
        tokens
    }

    fn normalize(text: &str) -> String {
        text.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    const PARAGRAPH: &str = "Hello, this is Sophia from the IT support team.  We are rolling\n\
        out a mandatory update today; could you confirm your username and password? \
        Thank you, café closes soon… that's all I need.";

    #[test]
    fn reconstruction_over_1000_segmentations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut c = TextChunker::new();
            let mut words = Vec::new();
            for token in random_split(PARAGRAPH, &mut rng) {
                words.extend(c.feed(&token));
            }
            words.extend(c.flush());
            assert_eq!(words.join(" "), normalize(PARAGRAPH));
        }
    }

    proptest! {
        #[test]
        fn sentinel_found_at_any_split(
            prefix in "[a-zA-Z ,.<_>]{0,60}",
            suffix in "[a-zA-Z .]{0,20}",
            seed in any::<u64>(),
        ) {
            let sentinel = "<END_OF_CALL>";
            prop_assume!(!prefix.contains(sentinel));
            let stream = format!("{prefix}{sentinel}{suffix}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = SentinelScanner::new(sentinel);
            let mut spoken = String::new();
            let mut found = false;
            for token in random_split(&stream, &mut rng) {
                let (text, f) = s.scan(&token);
                spoken.push_str(&text);
                found |= f;
            }
            prop_assert!(found);
            prop_assert_eq!(spoken, prefix);
        }
    }
}
