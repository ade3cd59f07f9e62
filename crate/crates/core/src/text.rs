//! Word-level tokenizer shared by the TF-IDF model and the built-in encoder.

/// Lowercase `text` and split it on every non-alphanumeric character.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Number of whitespace-delimited tokens.
pub fn whitespace_word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_lowercases() {
        assert_eq!(word_tokens("Hello, World! x-ray 3.14"), ["hello", "world", "x", "ray", "3", "14"]);
        assert!(word_tokens("  ...  ").is_empty());
    }

    #[test]
    fn counts_whitespace_words() {
        assert_eq!(whitespace_word_count(" a  b\nc\t"), 3);
        assert_eq!(whitespace_word_count(""), 0);
    }
}
