//! Character classes and segmentation shared by the tokenizer and the metrics.

/// CJK ideographs, kana and hangul syllables: each is a token on its own.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2CEAF)
}

/// Splits `text` into byte ranges. Any of `reserved` matches first (longest
/// wins); then CJK characters one by one, runs of other alphanumerics, and
/// every remaining non-space character as its own piece.
pub fn segment(text: &str, reserved: &[&str]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    let bytes_len = text.len();
    'outer: while i < bytes_len {
        let rest = &text[i..];
        let mut best: Option<usize> = None;
        for r in reserved {
            if !r.is_empty() && rest.starts_with(r) && best.is_none_or(|b| r.len() > b) {
                best = Some(r.len());
            }
        }
        if let Some(len) = best {
            out.push((i, i + len));
            i += len;
            continue;
        }
        let c = rest.chars().next().expect("non-empty rest");
        let clen = c.len_utf8();
        if c.is_whitespace() {
            i += clen;
            continue;
        }
        if is_cjk(c) || !c.is_alphanumeric() {
            out.push((i, i + clen));
            i += clen;
            continue;
        }
        let start = i;
        i += clen;
        while i < bytes_len {
            let rest = &text[i..];
            if reserved.iter().any(|r| !r.is_empty() && rest.starts_with(r)) {
                out.push((start, i));
                continue 'outer;
            }
            let c = rest.chars().next().expect("non-empty rest");
            if c.is_whitespace() || is_cjk(c) || !c.is_alphanumeric() {
                break;
            }
            i += c.len_utf8();
        }
        out.push((start, i));
    }
    out
}
