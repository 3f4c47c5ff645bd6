//! Rule-based identifier splitting at case boundaries and underscores.
//!
//! Continuation pieces carry a `##` prefix. A snake-case piece that starts
//! with an uppercase letter, or is empty, keeps its underscore (`##_VALUE`)
//! so that joining is exact for every identifier.

pub const CONTINUATION: &str = "##";

fn camel_parts(seg: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = seg.char_indices().collect();
    let mut cuts = Vec::new();
    for i in 1..chars.len() {
        let c = chars[i].1;
        if !c.is_uppercase() {
            continue;
        }
        let prev = chars[i - 1].1;
        let after_lower = prev.is_lowercase() || prev.is_ascii_digit();
        let acronym_end = prev.is_uppercase()
            && chars
                .get(i + 1)
                .is_some_and(|(_, next)| next.is_lowercase());
        if after_lower || acronym_end {
            cuts.push(chars[i].0);
        }
    }
    let mut parts = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0;
    for cut in cuts {
        parts.push(&seg[start..cut]);
        start = cut;
    }
    parts.push(&seg[start..]);
    parts
}

/// Splits `identifier` into subtokens, e.g. `liveTimeDesc` into
/// `live`, `##Time`, `##Desc`.
pub fn subtokenize(identifier: &str) -> Vec<String> {
    let rest = identifier.trim_start_matches('_');
    let lead = &identifier[..identifier.len() - rest.len()];
    if rest.is_empty() {
        return vec![identifier.to_string()];
    }
    let mut pieces = Vec::new();
    for (k, seg) in rest.split('_').enumerate() {
        for (j, part) in camel_parts(seg).into_iter().enumerate() {
            let piece = match (k, j) {
                (0, 0) => format!("{lead}{part}"),
                (_, 0) => {
                    let upper = part.chars().next().is_none_or(char::is_uppercase);
                    if upper {
                        format!("{CONTINUATION}_{part}")
                    } else {
                        format!("{CONTINUATION}{part}")
                    }
                }
                _ => format!("{CONTINUATION}{part}"),
            };
            pieces.push(piece);
        }
    }
    pieces
}

/// Inverse of [`subtokenize`].
pub fn join_subtokens<S: AsRef<str>>(pieces: &[S]) -> String {
    let mut out = String::new();
    for (i, piece) in pieces.iter().enumerate() {
        let piece = piece.as_ref();
        match piece.strip_prefix(CONTINUATION) {
            Some(rest) if i > 0 => {
                let attach = rest
                    .chars()
                    .next()
                    .is_none_or(|c| c == '_' || c.is_uppercase());
                if !attach {
                    out.push('_');
                }
                out.push_str(rest);
            }
            Some(rest) => out.push_str(rest),
            None => out.push_str(piece),
        }
    }
    out
}

/// Splits string-literal contents into alternating runs of whitespace and
/// non-whitespace. Concatenating the pieces restores the contents.
pub fn split_string(contents: &str) -> Vec<String> {
    let mut pieces: Vec<String> = Vec::new();
    let mut last_space = None;
    for c in contents.chars() {
        let space = c.is_whitespace();
        match pieces.last_mut() {
            Some(p) if last_space == Some(space) => p.push(c),
            _ => pieces.push(c.to_string()),
        }
        last_space = Some(space);
    }
    pieces
}
