//! Text normalization shared by DBpedia label matching, glossary merging
//! and the hashing embedder.

/// Lowercases, turns punctuation into spaces, collapses whitespace and
/// singularizes every token.
pub fn preprocess(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();
    lowered
        .split_whitespace()
        .map(singularize)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Heuristic singular form: `ies` becomes `y`, one trailing `s` is dropped
/// unless the token ends in `ss` or has at most three characters.
pub fn singularize(token: &str) -> String {
    if token.chars().count() <= 3 {
        return token.to_string();
    }
    if let Some(stem) = token.strip_suffix("ies") {
        return format!("{stem}y");
    }
    if token.ends_with("ss") {
        return token.to_string();
    }
    token.strip_suffix('s').unwrap_or(token).to_string()
}

/// Whitespace tokens of already-preprocessed text.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}
