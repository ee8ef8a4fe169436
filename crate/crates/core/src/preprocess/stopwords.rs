use std::collections::HashSet;

use crate::error::{Error, Result};

const CLASSIC_ENGLISH: &str = include_str!("stopwords_en.txt");

/// Version tag of the list shipped in-repo.
pub const CLASSIC_ENGLISH_TAG: &str = "classic-english-179/v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopwordList {
    words: HashSet<String>,
    pub source_tag: String,
}

impl StopwordList {
    /// The 179-word classic English list.
    pub fn classic_english() -> Self {
        Self::parse(CLASSIC_ENGLISH, CLASSIC_ENGLISH_TAG).expect("shipped list is valid")
    }

    /// One word per line; blank lines and `#` comments ignored.
    pub fn parse(text: &str, source_tag: &str) -> Result<Self> {
        let mut words = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let w = line.trim();
            if w.is_empty() || w.starts_with('#') {
                continue;
            }
            if w.chars().any(|c| c.is_uppercase()) {
                return Err(Error::parse(source_tag, i + 1, format!("{w:?} is not lowercase")));
            }
            if !words.insert(w.to_string()) {
                return Err(Error::parse(source_tag, i + 1, format!("duplicate {w:?}")));
            }
        }
        Ok(StopwordList {
            words,
            source_tag: source_tag.to_string(),
        })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopwordList {
    fn default() -> Self {
        Self::classic_english()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_list_has_179_words() {
        let list = StopwordList::classic_english();
        assert_eq!(list.len(), 179);
        assert!(list.contains("the") && list.contains("wouldn't") && !list.contains("botox"));
    }

    #[test]
    fn duplicates_and_uppercase_rejected() {
        assert!(StopwordList::parse("a\na\n", "t").is_err());
        assert!(StopwordList::parse("The\n", "t").is_err());
    }
}
