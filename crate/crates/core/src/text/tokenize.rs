//! Rule-based word tokenizer.
//!
//! Rules, applied in order:
//!
//! 1. Lowercase; the typographic apostrophe `’` is read as `'`.
//! 2. Split on whitespace.
//! 3. A word is a maximal run of alphanumerics. `-` and `'` stay inside a
//!    word when both neighbours are alphanumeric; `.` and `,` stay inside
//!    when both neighbours are digits (`3.5`, `1,000`).
//! 4. Clitics split off a word: a trailing `n't` (`doesn't` → `does n't`),
//!    or a trailing `'s`, `'re`, `'ve`, `'ll`, `'d`, `'m`.
//! 5. A clitic standing alone (`'re` in `they 're`) stays one token.
//! 6. Every other character is a token of its own.

const CLITICS: [&str; 6] = ["'s", "'re", "'ve", "'ll", "'d", "'m"];

pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase().replace('\u{2019}', "'");
    let mut out = Vec::new();
    for chunk in lowered.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_alphanumeric() {
                let start = i;
                while i < chars.len() {
                    let c = chars[i];
                    if c.is_alphanumeric() {
                        i += 1;
                        continue;
                    }
                    let prev = chars[i - 1];
                    let next = chars.get(i + 1).copied();
                    let joins = match c {
                        '-' | '\'' => next.is_some_and(char::is_alphanumeric),
                        '.' | ',' => prev.is_ascii_digit() && next.is_some_and(|n| n.is_ascii_digit()),
                        _ => false,
                    };
                    if !joins {
                        break;
                    }
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                split_clitic(word, &mut out);
            } else if let Some(c) = standalone_clitic(&chars[i..]) {
                out.push(c.to_string());
                i += c.len();
            } else {
                out.push(chars[i].to_string());
                i += 1;
            }
        }
    }
    out
}

/// A clitic already separated from its word (`'re` in `they 're`).
fn standalone_clitic(rest: &[char]) -> Option<&'static str> {
    CLITICS.into_iter().find(|c| {
        let n = c.chars().count();
        rest.len() >= n
            && rest[..n].iter().copied().eq(c.chars())
            && !rest.get(n).is_some_and(|ch| ch.is_alphanumeric())
    })
}

fn split_clitic(word: String, out: &mut Vec<String>) {
    if word.len() > 3 && word.ends_with("n't") {
        let stem = &word[..word.len() - 3];
        out.push(stem.to_string());
        out.push("n't".to_string());
        return;
    }
    for c in CLITICS {
        if word.len() > c.len() && word.ends_with(c) {
            out.push(word[..word.len() - c.len()].to_string());
            out.push(c.to_string());
            return;
        }
    }
    out.push(word);
}

/// Space-joined tokens.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}
