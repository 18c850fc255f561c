//! Prompt item lists shipped with the crate. They are plain text files, one
//! item per line, and can be replaced by any file in the same format.

const LISTS: [(&str, &str); 6] = [
    ("countries", include_str!("../items/countries.txt")),
    ("capitals", include_str!("../items/capitals.txt")),
    ("apples", include_str!("../items/apples.txt")),
    ("mammals", include_str!("../items/mammals.txt")),
    ("animals", include_str!("../items/animals.txt")),
    ("constants", include_str!("../items/constants.txt")),
];

/// Names of the bundled lists.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    LISTS.iter().map(|(name, _)| *name)
}

pub fn bundled(name: &str) -> Option<Vec<String>> {
    LISTS.iter().find(|(n, _)| *n == name).map(|(_, raw)| parse_items(raw))
}

/// One item per non-empty line; lines starting with `#` are comments.
pub fn parse_items(raw: &str) -> Vec<String> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn list_sizes() {
        let sizes: Vec<usize> = bundled_names().map(|n| bundled(n).unwrap().len()).collect();
        assert_eq!(sizes, [201, 201, 251, 227, 139, 54]);
    }

    #[test]
    fn entries_are_unique() {
        for name in bundled_names() {
            let items = bundled(name).unwrap();
            let set: HashSet<&String> = items.iter().collect();
            assert_eq!(set.len(), items.len(), "{name}");
        }
    }

    #[test]
    fn comments_and_blanks() {
        assert_eq!(parse_items("# x\n\n a \nb\n"), ["a", "b"]);
        assert!(bundled("planets").is_none());
    }
}
