//! Line and character helpers shared by the filters and truncation rules.
//!
//! A line is a maximal substring separated by `'\n'`; a trailing newline does
//! not open an extra empty line, so `"a\n"` has one line and `""` has none.

pub fn lines(text: &str) -> impl Iterator<Item = &str> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let empty = text.is_empty();
    body.split('\n').filter(move |_| !empty)
}

pub fn line_count(text: &str) -> usize {
    if text.is_empty() {
        0
    } else {
        text.matches('\n').count() + usize::from(!text.ends_with('\n'))
    }
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// First `n` characters of `text`.
pub fn take_chars(text: &str, n: usize) -> &str {
    match text.char_indices().nth(n) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trailing_newline_does_not_add_a_line() {
        assert_eq!(line_count("a\n"), 1);
        assert_eq!(line_count("a"), 1);
        assert_eq!(line_count(""), 0);
        assert_eq!(line_count("\n"), 1);
        assert_eq!(line_count("a\n\nb"), 3);
        assert_eq!(lines("a\n\n").collect::<Vec<_>>(), vec!["a", ""]);
        assert_eq!(lines("").count(), 0);
    }

    #[test]
    fn take_chars_respects_boundaries() {
        assert_eq!(take_chars("héllo", 2), "hé");
        assert_eq!(take_chars("ab", 5), "ab");
    }

    proptest! {
        #[test]
        fn count_matches_iterator(s in "[a\\n]{0,30}") {
            prop_assert_eq!(line_count(&s), lines(&s).count());
        }
    }
}
