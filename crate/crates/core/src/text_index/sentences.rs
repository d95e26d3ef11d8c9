/// Abbreviations (lowercase, with trailing dot) that never end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "dr.", "mr.", "mrs.", "ms.", "vs.", "prof.", "fig.", "approx.", "cf.",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// Splits `text` into trimmed sentences.
///
/// A boundary falls after `.`, `!` or `?` (optionally followed by closing
/// quotes or brackets) when the next character is whitespace or the text
/// ends. A period closing one of [`ABBREVIATIONS`] is not a boundary.
/// Every non-whitespace character of the input lands in exactly one
/// sentence, in order.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (_, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        // absorb runs like "?!" or "..." and trailing closers
        let mut j = i + 1;
        while j < chars.len() && (is_terminator(chars[j].1) || is_closer(chars[j].1)) {
            j += 1;
        }
        let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
        if at_boundary && !(c == '.' && ends_with_abbreviation(text, start, chars[i].0)) {
            let end = chars.get(j).map_or(text.len(), |&(pos, _)| pos);
            push_trimmed(&mut out, &text[start..end]);
            start = end;
        }
        i = j;
    }
    push_trimmed(&mut out, &text[start..]);
    out
}

/// Whether the word ending with the period at byte `dot` is a known
/// abbreviation. The word is taken back to the previous whitespace (but not
/// before `floor`), ignoring leading opening punctuation.
fn ends_with_abbreviation(text: &str, floor: usize, dot: usize) -> bool {
    let head = &text[floor..dot];
    let word_start = head
        .rfind(char::is_whitespace)
        .map_or(0, |p| p + head[p..].chars().next().map_or(1, char::len_utf8));
    let word = head[word_start..].trim_start_matches(['(', '[', '"', '\'', '\u{201c}']);
    if word.is_empty() {
        return false;
    }
    let candidate = format!("{}.", word.to_lowercase());
    ABBREVIATIONS.contains(&candidate.as_str())
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let piece = piece.trim();
    if !piece.is_empty() {
        out.push(piece.to_string());
    }
}
