use serde::{Deserialize, Serialize};

/// A token with its character extent `[start, end)` in the document text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            text: text.into(),
            start,
            end,
        }
    }
}

/// Byte offset of every character boundary, plus the final length.
///
/// `offsets[i]` is the byte position of character `i`; the vector has
/// `chars + 1` entries.
pub fn char_to_byte_offsets(text: &str) -> Vec<usize> {
    let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    offsets.push(text.len());
    offsets
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits on Unicode whitespace, then peels leading and trailing
/// non-alphanumeric characters off each chunk as single-character tokens.
///
/// Internal punctuation (apostrophes, hyphens, decimal points) stays inside
/// the word: `don't` is one token, `stop.` is two.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let chunk_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        push_chunk(&chars, chunk_start, i, &mut tokens);
    }
    tokens
}

fn push_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let singles = |from: usize, to: usize, out: &mut Vec<Token>| {
        for (k, c) in chars[from..to].iter().enumerate() {
            out.push(Token::new(c.to_string(), from + k, from + k + 1));
        }
    };
    let Some(first_word) = (start..end).find(|&k| is_word_char(chars[k])) else {
        singles(start, end, out);
        return;
    };
    let last_word = (start..end).rev().find(|&k| is_word_char(chars[k])).unwrap();
    singles(start, first_word, out);
    out.push(Token::new(
        chars[first_word..=last_word].iter().collect::<String>(),
        first_word,
        last_word + 1,
    ));
    singles(last_word + 1, end, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    /// Re-slices the source string by the recorded character offsets.
    fn reslice(text: &str, tok: &Token) -> String {
        text.chars().skip(tok.start).take(tok.end - tok.start).collect()
    }

    #[test]
    fn empty() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t").is_empty());
    }

    #[test]
    fn contraction_and_period() {
        let text = "don't stop.";
        let tokens = tokenize(text);
        assert_eq!(texts(&tokens), ["don't", "stop", "."]);
        assert_eq!(
            tokens.iter().map(|t| (t.start, t.end)).collect::<Vec<_>>(),
            [(0, 5), (6, 10), (10, 11)]
        );
        for tok in &tokens {
            assert_eq!(reslice(text, tok), tok.text);
        }
    }

    #[test]
    fn whitespace_is_gap() {
        let tokens = tokenize("a  b");
        assert_eq!(texts(&tokens), ["a", "b"]);
        assert_eq!((tokens[0].start, tokens[0].end), (0, 1));
        assert_eq!((tokens[1].start, tokens[1].end), (3, 4));
    }

    #[test]
    fn punctuation_runs_and_internal_marks() {
        assert_eq!(texts(&tokenize("(well-known)...")), ["(", "well-known", ")", ".", ".", "."]);
        assert_eq!(texts(&tokenize("\"3.5%\"")), ["\"", "3.5", "%", "\""]);
        assert_eq!(texts(&tokenize("--")), ["-", "-"]);
    }

    #[test]
    fn offsets_are_characters_not_bytes() {
        let text = "café, naïve";
        let tokens = tokenize(text);
        assert_eq!(texts(&tokens), ["café", ",", "naïve"]);
        assert_eq!((tokens[2].start, tokens[2].end), (6, 11));
        let offsets = char_to_byte_offsets(text);
        assert_eq!(&text[offsets[6]..offsets[11]], "naïve");
    }
}
