use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("expected True or False, got {0:?}")]
    NotBoolean(String),
    #[error("expected a JSON array of strings: {0}")]
    NotStringList(String),
}

/// Accepts `true`/`false` in any case, with surrounding whitespace and at
/// most one trailing punctuation mark.
pub fn parse_boolean(text: &str) -> Result<bool, ParseError> {
    let trimmed = text.trim();
    let core = match trimmed.chars().last() {
        Some(c) if c.is_ascii_punctuation() => &trimmed[..trimmed.len() - 1],
        _ => trimmed,
    };
    if core.eq_ignore_ascii_case("true") {
        Ok(true)
    } else if core.eq_ignore_ascii_case("false") {
        Ok(false)
    } else {
        Err(ParseError::NotBoolean(text.to_string()))
    }
}

/// Parses a JSON array of strings, optionally wrapped in a markdown code
/// fence. Elements come back trimmed and lowercased.
pub fn parse_string_list(text: &str) -> Result<Vec<String>, ParseError> {
    let body = strip_code_fence(text);
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ParseError::NotStringList(e.to_string()))?;
    let items = value
        .as_array()
        .ok_or_else(|| ParseError::NotStringList(format!("top-level value is not an array: {body}")))?;
    items
        .iter()
        .map(|item| {
            item.as_str()
                .map(|s| s.trim().to_lowercase())
                .ok_or_else(|| ParseError::NotStringList(format!("non-string element {item}")))
        })
        .collect()
}

fn strip_code_fence(text: &str) -> &str {
    let trimmed = text.trim();
    let Some(after_open) = trimmed.strip_prefix("```") else {
        return trimmed;
    };
    // drop the info string (e.g. "json") up to the first newline
    let inner = after_open.split_once('\n').map_or("", |(_, rest)| rest);
    inner.trim_end().strip_suffix("```").unwrap_or(inner).trim()
}
