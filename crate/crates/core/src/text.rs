//! Whitespace-and-punctuation tokenizer with a matching detokenizer.

/// Splits on whitespace and peels punctuation off word edges.
///
/// Inner `.`/`,` between digits, inner hyphens, apostrophes and slashes stay
/// attached, so `3.5`, `sixty-two`, `don't` and `12/05/2003` are single
/// tokens.
///
/// ```
/// use lambda_nli::text::tokenize;
/// assert_eq!(tokenize("Mary moved to the hallway."), ["Mary", "moved", "to", "the", "hallway", "."]);
/// assert_eq!(tokenize("pays 35 dirams (a few cents)"), ["pays", "35", "dirams", "(", "a", "few", "cents", ")"]);
/// ```
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let prev = i.checked_sub(1).map(|p| chars[p]);
            let next = chars.get(i + 1).copied();
            let inner = |pred: fn(char) -> bool| prev.is_some_and(pred) && next.is_some_and(pred);
            let keep = c.is_alphanumeric()
                || ((c == '.' || c == ',') && inner(|x| x.is_ascii_digit()))
                || ((c == '-' || c == '\'' || c == '/' || c == '’') && inner(char::is_alphanumeric));
            if keep {
                cur.push(c);
            } else {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

fn attaches_left(tok: &str) -> bool {
    matches!(tok, "." | "," | ";" | ":" | "!" | "?" | ")" | "]" | "%")
}

fn attaches_right(tok: &str) -> bool {
    matches!(tok, "(" | "[" | "$")
}

/// Inverse of [`tokenize`] for well-formed token lists.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut glue_next = true;
    for t in tokens {
        let t = t.as_ref();
        if !glue_next && !attaches_left(t) {
            out.push(' ');
        }
        out.push_str(t);
        glue_next = attaches_right(t);
    }
    out
}

/// Uppercases the first character.
pub fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Lowercases the first character.
pub fn decapitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn keeps_compound_tokens() {
        assert_eq!(tokenize("It costs 3.5 or 1,000 on 12/05/2003."), ["It", "costs", "3.5", "or", "1,000", "on", "12/05/2003", "."]);
        assert_eq!(tokenize("sixty-two people don't"), ["sixty-two", "people", "don't"]);
        assert_eq!(tokenize("end, then."), ["end", ",", "then", "."]);
    }

    #[test]
    fn detokenize_reattaches_punctuation() {
        let toks = tokenize("The Tajik State pays 35 dirams (a few cents) per day.");
        assert_eq!(detokenize(&toks), "The Tajik State pays 35 dirams (a few cents) per day.");
    }

    #[test]
    fn case_helpers() {
        assert_eq!(capitalize("propellers"), "Propellers");
        assert_eq!(decapitalize("Many"), "many");
        assert_eq!(capitalize(""), "");
    }

    proptest! {
        #[test]
        fn tokenize_detokenize_roundtrip(words in proptest::collection::vec("[a-z]{1,6}|[0-9]{1,3}|[.,!?]", 1..12)) {
            let toks = tokenize(&words.join(" "));
            prop_assert_eq!(tokenize(&detokenize(&toks)), toks);
        }
    }
}
