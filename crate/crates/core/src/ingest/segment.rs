//! Rule-based sentence segmentation.
//!
//! A sentence ends at `.`, `!` or `?` (plus any closing quotes or brackets)
//! when followed by whitespace and then an uppercase letter or digit,
//! optionally behind an opening quote or bracket. A period does not end a
//! sentence after a known abbreviation, a single-letter initial, or a word
//! that already contains a period (`U.S.`, `S.t.`).

const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "ft", "vs", "etc", "inc", "ltd", "co",
    "corp", "no", "gen", "gov", "sen", "rep", "lt", "col", "capt", "sgt", "rev", "hon", "jan",
    "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "fig", "eq",
    "approx", "dept", "est", "al",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201c}', '\u{2018}'];

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(OPENERS);
    if word.is_empty() {
        return false;
    }
    if word.contains('.') {
        return true;
    }
    let mut chars = word.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        if c.is_alphabetic() && c.is_uppercase() {
            return true;
        }
    }
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

/// Split `text` into trimmed, non-empty sentences. Text without any boundary
/// comes back as a single sentence; whitespace-only text yields nothing.
pub fn segment(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            // Extend over repeated terminators and closing quotes/brackets.
            let mut j = i + 1;
            while j < chars.len()
                && (matches!(chars[j].1, '.' | '!' | '?') || CLOSERS.contains(&chars[j].1))
            {
                j += 1;
            }
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let mut next = k;
            while next < chars.len() && OPENERS.contains(&chars[next].1) {
                next += 1;
            }
            let boundary = k > j
                && next < chars.len()
                && (chars[next].1.is_uppercase() || chars[next].1.is_ascii_digit())
                && !(c == '.' && {
                    let word = text[start..pos].split_whitespace().last().unwrap_or("");
                    is_abbreviation(word)
                });
            if boundary {
                let end = if j < chars.len() {
                    chars[j].0
                } else {
                    text.len()
                };
                push_trimmed(&mut sentences, &text[start..end]);
                start = chars[k].0;
                i = k;
                continue;
            }
            i = j;
            continue;
        }
        i += 1;
    }
    push_trimmed(&mut sentences, &text[start..]);
    sentences
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_owned());
    }
}
