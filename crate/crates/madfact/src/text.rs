//! Text normalization helpers shared across the pipeline.

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Casefolds and collapses whitespace.
///
/// This is the normalization used for query deduplication and for the
/// exact-normalized claim matcher.
pub fn normalize_key(s: &str) -> String {
    normalize_ws(&s.to_lowercase())
}

/// Makes an identifier safe to use as a file or directory name.
pub fn sanitize_id(s: &str) -> String {
    let out: String = s
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.is_empty() {
        "_".to_string()
    } else {
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_ws_collapses_runs() {
        assert_eq!(normalize_ws("  a\t b\n\nc  "), "a b c");
        assert_eq!(normalize_ws(""), "");
    }

    #[test]
    fn normalize_key_casefolds() {
        assert_eq!(normalize_key("Zhuang  POPULATION"), "zhuang population");
    }

    #[test]
    fn sanitize_id_replaces_separators() {
        assert_eq!(sanitize_id("q1:gpt-4o/mini"), "q1_gpt-4o_mini");
        assert_eq!(sanitize_id(""), "_");
    }
}
